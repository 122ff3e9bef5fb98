//! Numeric tolerances shared by every module.
//!
//! All thresholds live in one record so tests and callers can see at a glance
//! what "equal" means for each comparison.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Branch partition and self-map checks.
    pub structural: f64,
    /// Bracket width at which branch-inverse bisection stops.
    pub bisection_width: f64,
    /// Required |f(x) - y| for an accepted branch preimage.
    pub preimage_residual: f64,
    /// Maximum derivative-based refinement steps after bisection.
    pub newton_steps: usize,
    /// Below this |Df| in the bracket only bisection is used.
    pub newton_min_derivative: f64,
    /// Preimages closer than this are merged.
    pub merge: f64,
    /// Distance to a critical point at which log|Df| is refused.
    pub singular: f64,
    /// Neighbourhood of singular points skipped by grid diagnostics.
    pub singular_grid: f64,
    /// Sign of the derivative is only checked where |Df| exceeds this.
    pub derivative_sign: f64,
    /// Forward re-verification of tree leaves.
    pub leaf_verification: f64,
    /// Offset applied to base points lying on the orbit of a branch cut.
    pub base_nudge: f64,
    /// Periodicity check for base points.
    pub periodic: f64,
    /// Endpoint matching in surjectivity tests.
    pub surjective: f64,
    /// Points identified when comparing IMFS images.
    pub freeness: f64,
    /// Target residual of operator eigenpairs.
    pub eigen_residual: f64,
    /// Maximum power-iteration steps.
    pub eigen_max_iterations: usize,
    /// Fixed-point tolerance for periodic points.
    pub periodic_point: f64,
    /// Hyperbolicity decision threshold.
    pub hyperbolicity_threshold: f64,
    /// Pressure methods disagreeing by more than this give an inconclusive verdict.
    pub method_disagreement: f64,
    /// Slope jump that counts as a kink.
    pub kink_jump: f64,
    /// Most negative second difference accepted as convex.
    pub convexity: f64,
}

pub const DEFAULT: Tolerances = Tolerances {
    structural: 1e-12,
    bisection_width: 1e-13,
    preimage_residual: 1e-12,
    newton_steps: 3,
    newton_min_derivative: 1e-8,
    merge: 1e-10,
    singular: 1e-12,
    singular_grid: 1e-9,
    derivative_sign: 1e-9,
    leaf_verification: 1e-8,
    base_nudge: 1e-9,
    periodic: 1e-9,
    surjective: 1e-8,
    freeness: 1e-9,
    eigen_residual: 1e-9,
    eigen_max_iterations: 100_000,
    periodic_point: 1e-12,
    hyperbolicity_threshold: 0.02,
    method_disagreement: 0.05,
    kink_jump: 0.1,
    convexity: -0.01,
};

impl Default for Tolerances {
    fn default() -> Self {
        DEFAULT
    }
}
