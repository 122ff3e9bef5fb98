//! Collocation discretization of the transfer operator
//! L_φ g(x) = Σ_{f(y)=x} e^{φ(y)} g(y)
//! on a uniform partition, with power iteration for the leading eigenpair.
//!
//! Row i of the matrix is the operator evaluated at the midpoint of cell i;
//! column j collects the preimages falling in cell j. The right eigenvector
//! approximates the eigenfunction, the left one the conformal measure, and
//! their product the equilibrium state.

use std::collections::VecDeque;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{Method, PressureEstimate};
use crate::map::IntervalMap;
use crate::potential::Potential;
use crate::tolerance::DEFAULT as TOL;
use crate::tree::check_regular;

pub const MIN_CELLS: usize = 16;

/// Seed of the deterministic start vectors.
const SEED: u64 = 0x5eed_cafe;

/// Preimages of every node with their cells; independent of the potential.
#[derive(Debug, Clone)]
pub struct OperatorSkeleton {
    ambient: (f64, f64),
    nodes: Vec<f64>,
    /// Per row: (column, preimage point).
    preimages: Vec<Vec<(usize, f64)>>,
    map_label: String,
}

impl OperatorSkeleton {
    pub fn new(map: &IntervalMap, k: usize) -> Result<Self> {
        if k < MIN_CELLS {
            return Err(Error::Precondition(format!(
                "need at least {MIN_CELLS} cells, got {k}"
            )));
        }
        let (lo, hi) = map.ambient();
        let width = (hi - lo) / k as f64;
        let nodes: Vec<f64> = (0..k).map(|i| lo + (i as f64 + 0.5) * width).collect();
        let preimages = nodes
            .par_iter()
            .map(|&x| {
                map.preimages(x)
                    .into_iter()
                    .map(|y| (cell_of(y, lo, width, k), y))
                    .collect()
            })
            .collect();
        Ok(OperatorSkeleton {
            ambient: (lo, hi),
            nodes,
            preimages,
            map_label: map.label().to_string(),
        })
    }

    pub fn cells(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Fills in the weights e^{φ(y)}.
    pub fn weighted(&self, phi: &Potential) -> Result<CollocationOperator> {
        let rows: Result<Vec<Vec<(usize, f64)>>> = self
            .preimages
            .par_iter()
            .enumerate()
            .map(|(i, pre)| {
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(pre.len());
                for &(j, y) in pre {
                    let w = phi.value(y).map_err(|e| match e {
                        Error::Singularity { x, detail } => Error::Singularity {
                            x,
                            detail: format!(
                                "preimage of node {i} (x = {}): {detail}; try another cell count",
                                self.nodes[i]
                            ),
                        },
                        other => other,
                    })?;
                    let w = w.exp();
                    match row.iter_mut().find(|(c, _)| *c == j) {
                        Some(entry) => entry.1 += w,
                        None => row.push((j, w)),
                    }
                }
                row.sort_by_key(|e| e.0);
                Ok(row)
            })
            .collect();
        let rows = rows?;
        let primitive = is_primitive(&rows);
        Ok(CollocationOperator {
            cells: self.nodes.len(),
            ambient: self.ambient,
            nodes: self.nodes.clone(),
            rows,
            primitive,
            map_label: self.map_label.clone(),
            potential_label: phi.label().to_string(),
        })
    }
}

fn cell_of(y: f64, lo: f64, width: f64, k: usize) -> usize {
    (((y - lo) / width).floor().max(0.0) as usize).min(k - 1)
}

/// Sparse non-negative k×k matrix.
#[derive(Debug, Clone, Serialize)]
pub struct CollocationOperator {
    pub cells: usize,
    pub ambient: (f64, f64),
    pub nodes: Vec<f64>,
    /// Row i: (column, entry) pairs with positive entries, sorted by column.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Some power of the sparsity pattern is strictly positive.
    pub primitive: bool,
    pub map_label: String,
    pub potential_label: String,
}

impl CollocationOperator {
    /// y = M x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|&(j, m)| m * x[j]).sum();
        }
    }

    /// y = Mᵀ x
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, m) in row {
                y[j] += m * x[i];
            }
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|e| e.1).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cells]; self.cells];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, m) in row {
                d[i][j] += m;
            }
        }
        d
    }
}

/// Strong connectivity plus aperiodicity of the sparsity graph, which is
/// equivalent to some power of the boolean pattern being all-positive.
fn is_primitive(rows: &[Vec<(usize, f64)>]) -> bool {
    let k = rows.len();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, row) in rows.iter().enumerate() {
        for &(j, _) in row {
            reverse[j].push(i);
        }
    }
    let bfs = |adj: &dyn Fn(usize) -> Vec<usize>| -> Vec<Option<usize>> {
        let mut level = vec![None; k];
        level[0] = Some(0);
        let mut q = VecDeque::from([0usize]);
        while let Some(u) = q.pop_front() {
            for v in adj(u) {
                if level[v].is_none() {
                    level[v] = Some(level[u].unwrap() + 1);
                    q.push_back(v);
                }
            }
        }
        level
    };
    let forward = bfs(&|u| rows[u].iter().map(|e| e.0).collect());
    let backward = bfs(&|u| reverse[u].clone());
    if forward.iter().chain(&backward).any(Option::is_none) {
        return false;
    }
    let mut g = 0usize;
    for (u, row) in rows.iter().enumerate() {
        for &(v, _) in row {
            let d = (forward[u].unwrap() + 1).abs_diff(forward[v].unwrap());
            g = gcd(g, d);
        }
    }
    g == 1
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn build_operator(map: &IntervalMap, phi: &Potential, k: usize) -> Result<CollocationOperator> {
    check_regular(phi, map)?;
    OperatorSkeleton::new(map, k)?.weighted(phi)
}

#[derive(Debug, Clone, Serialize)]
pub struct Eigen {
    pub lambda: f64,
    /// Eigenfunction values at the nodes (M r = λ r).
    pub right: Vec<f64>,
    /// Eigenmeasure weights (lᵀ M = λ lᵀ); Σ l = 1 and Σ l·r = 1.
    pub left: Vec<f64>,
    /// max of the right and left relative residuals.
    pub residual: f64,
    pub iterations: usize,
    /// log λ estimates sampled along the iteration.
    pub trace: Vec<f64>,
}

fn start_vector(k: usize, salt: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(SEED ^ salt);
    (0..k).map(|_| 1.0 + 0.1 * rng.gen::<f64>()).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct PowerResult {
    lambda: f64,
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn power_iterate(k: usize, apply: impl Fn(&[f64], &mut [f64]), salt: u64) -> Result<PowerResult> {
    let mut v = start_vector(k, salt);
    let mut w = vec![0.0; k];
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut lambda = 0.0;
    for it in 1..=TOL.eigen_max_iterations {
        apply(&v, &mut w);
        let sv: f64 = v.iter().sum();
        let sw: f64 = w.iter().sum();
        lambda = sw / sv;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Convergence {
                iterations: it,
                residual: f64::NAN,
            });
        }
        let norm = max_abs(&v);
        residual = v
            .iter()
            .zip(&w)
            .fold(0.0, |m: f64, (a, b)| m.max((b - lambda * a).abs()))
            / norm;
        if it == 1 || it % 64 == 0 {
            trace.push(lambda.ln());
        }
        let scale = max_abs(&w);
        if scale == 0.0 {
            return Err(Error::Convergence {
                iterations: it,
                residual,
            });
        }
        if residual <= TOL.eigen_residual {
            trace.push(lambda.ln());
            return Ok(PowerResult {
                lambda,
                vector: v,
                residual,
                iterations: it,
                trace,
            });
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / scale;
        }
    }
    Err(Error::Convergence {
        iterations: TOL.eigen_max_iterations,
        residual: residual.min(lambda.abs().max(1.0) * f64::MAX),
    })
}

/// Leading eigenvalue with right and left eigenvectors by power iteration.
pub fn leading_eigen(op: &CollocationOperator) -> Result<Eigen> {
    let k = op.cells;
    let right = power_iterate(k, |x, y| op.apply(x, y), 1)?;
    let left = power_iterate(k, |x, y| op.apply_transpose(x, y), 2)?;
    let mut l = left.vector;
    // two-sided quotient lᵀMr / lᵀr: error quadratic in the residuals
    let mut mr = vec![0.0; k];
    op.apply(&right.vector, &mut mr);
    let num: f64 = l.iter().zip(&mr).map(|(a, b)| a * b).sum();
    let den: f64 = l.iter().zip(&right.vector).map(|(a, b)| a * b).sum();
    let lambda = if den > 0.0 && num > 0.0 {
        num / den
    } else {
        right.lambda
    };
    let mut r = right.vector;
    let sl: f64 = l.iter().sum();
    l.iter_mut().for_each(|x| *x /= sl);
    let lr: f64 = l.iter().zip(&r).map(|(a, b)| a * b).sum();
    r.iter_mut().for_each(|x| *x /= lr);
    Ok(Eigen {
        lambda,
        right: r,
        left: l,
        residual: right.residual.max(left.residual),
        iterations: right.iterations.max(left.iterations),
        trace: right.trace,
    })
}

/// log λ of the collocation operator; the half-resolution value is kept as a
/// convergence diagnostic.
pub fn pressure_operator(map: &IntervalMap, phi: &Potential, k: usize) -> Result<PressureEstimate> {
    let eig = leading_eigen(&build_operator(map, phi, k)?)?;
    let coarse = if k / 2 >= MIN_CELLS {
        Some(
            leading_eigen(&build_operator(map, phi, k / 2)?)?
                .lambda
                .ln(),
        )
    } else {
        None
    };
    Ok(estimate_from(&eig, k, coarse))
}

pub(crate) fn estimate_from(eig: &Eigen, k: usize, coarse: Option<f64>) -> PressureEstimate {
    PressureEstimate {
        value: eig.lambda.ln(),
        method: Method::OperatorEig,
        resolution: k,
        residual: eig.residual,
        trace: eig.trace.clone(),
        coarse_value: coarse,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumMeasure {
    /// Cell weights, summing to 1.
    pub weights: Vec<f64>,
    /// Total-variation change of the weights under one step of the
    /// normalized operator.
    pub invariance_defect: f64,
}

/// w_j ∝ left_j · right_j.
pub fn equilibrium_measure(op: &CollocationOperator, eig: &Eigen) -> EquilibriumMeasure {
    let k = op.cells;
    let mut w: Vec<f64> = eig
        .left
        .iter()
        .zip(&eig.right)
        .map(|(a, b)| a * b)
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    // push w through P_ij = M_ij r_j / (λ r_i)
    let mut pushed = vec![0.0; k];
    for (i, row) in op.rows.iter().enumerate() {
        if eig.right[i] == 0.0 {
            continue;
        }
        for &(j, m) in row {
            pushed[j] += w[i] * m * eig.right[j] / (eig.lambda * eig.right[i]);
        }
    }
    let tv = 0.5
        * pushed
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    EquilibriumMeasure {
        weights: w,
        invariance_defect: tv,
    }
}

/// Midpoints of the uniform partition matching `cells` weights.
pub fn cell_nodes(map: &IntervalMap, cells: usize) -> Vec<f64> {
    let (lo, hi) = map.ambient();
    let width = (hi - lo) / cells as f64;
    (0..cells).map(|i| lo + (i as f64 + 0.5) * width).collect()
}

/// (h, ∫φ) with ∫φ = Σ w_j φ(node_j) and h = P − ∫φ.
pub fn entropy_and_integral(
    map: &IntervalMap,
    phi: &Potential,
    weights: &[f64],
    pressure: f64,
) -> Result<(f64, f64)> {
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "weights sum to {total}, not 1"
        )));
    }
    let nodes = cell_nodes(map, weights.len());
    let mut integral = 0.0;
    for (w, &x) in weights.iter().zip(&nodes) {
        if *w != 0.0 {
            integral += w * phi.value(x)?;
        }
    }
    let h = pressure - integral;
    if h < -0.02 {
        return Err(Error::Construction(format!(
            "negative entropy estimate {h}"
        )));
    }
    Ok((h, integral))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingRate {
    pub rho_hat: f64,
    /// Disagreement between two late growth-rate windows.
    pub residual: f64,
    pub low_confidence: bool,
}

const MIXING_STEPS: usize = 4096;

/// Modulus of the second eigenvalue of the normalized operator
/// P = D⁻¹ M D / λ (D = diag(right)), from the growth rate of iterates of
/// P restricted to the complement of the leading eigenspace.
pub fn mixing_rate(op: &CollocationOperator, eig: &Eigen) -> MixingRate {
    let k = op.cells;
    let r = &eig.right;
    let weights = {
        let mut w: Vec<f64> = eig.left.iter().zip(r).map(|(a, b)| a * b).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        w
    };
    let project = |v: &mut [f64]| {
        let c: f64 = weights.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        v.iter_mut().for_each(|x| *x -= c);
    };
    let mut rng = StdRng::seed_from_u64(SEED ^ 3);
    let mut v: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() - 0.5).collect();
    project(&mut v);
    let mut tmp = vec![0.0; k];
    let mut mv = vec![0.0; k];
    let mut log_norm = vec![0.0f64; MIXING_STEPS + 1];
    let mut acc = 0.0;
    for step in 1..=MIXING_STEPS {
        // P v = D⁻¹ M D v / λ
        for i in 0..k {
            tmp[i] = r[i] * v[i];
        }
        op.apply(&tmp, &mut mv);
        for i in 0..k {
            v[i] = if r[i] != 0.0 {
                mv[i] / (eig.lambda * r[i])
            } else {
                0.0
            };
        }
        project(&mut v);
        let n = max_abs(&v);
        if n == 0.0 || !n.is_finite() {
            return MixingRate {
                rho_hat: 0.0,
                residual: 0.0,
                low_confidence: !n.is_finite(),
            };
        }
        // below 1e-200 relative growth is meaningless; treat as nilpotent
        acc += n.ln();
        if acc < -700.0 && step < MIXING_STEPS / 2 {
            return MixingRate {
                rho_hat: (acc / step as f64).exp(),
                residual: 0.0,
                low_confidence: false,
            };
        }
        v.iter_mut().for_each(|x| *x /= n);
        log_norm[step] = acc;
    }
    let rate = |a: usize, b: usize| ((log_norm[b] - log_norm[a]) / (b - a) as f64).exp();
    let n = MIXING_STEPS;
    let early = rate(n / 2, 3 * n / 4);
    let late = rate(3 * n / 4, n);
    let residual = (early - late).abs();
    MixingRate {
        rho_hat: late,
        residual,
        low_confidence: residual > 1e-6,
    }
}

/// C_n = |Σ_j w_j ψ₁(fⁿ x_j) ψ₂(x_j) − (Σ_j w_j ψ₁(fⁿ x_j))(Σ_j w_j ψ₂(x_j))| for n = 0..=n_max.
pub fn correlation_sum(
    map: &IntervalMap,
    psi1: &Potential,
    psi2: &Potential,
    weights: &[f64],
    n_max: usize,
) -> Result<Vec<f64>> {
    let nodes = cell_nodes(map, weights.len());
    let mut orbits = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        orbits.push(map.iterate(x, n_max)?);
    }
    let mut psi2_vals = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        psi2_vals.push(psi2.value(x)?);
    }
    let mean2: f64 = weights.iter().zip(&psi2_vals).map(|(w, v)| w * v).sum();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let (mut joint, mut mean1) = (0.0, 0.0);
        for (j, w) in weights.iter().enumerate() {
            let a = psi1.value(orbits[j][n])?;
            joint += w * a * psi2_vals[j];
            mean1 += w * a;
        }
        out.push((joint - mean1 * mean2).abs());
    }
    Ok(out)
}

/// Smallest ρ with C_n ≤ C_0 ρⁿ for every listed n ≥ 1.
pub fn correlation_decay_rate(correlations: &[f64]) -> f64 {
    let c0 = correlations[0];
    if c0 == 0.0 {
        return 0.0;
    }
    correlations
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, c)| (c / c0).powf(1.0 / n as f64))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn doubling() -> IntervalMap {
        IntervalMap::builtin("doubling").unwrap()
    }

    #[test]
    fn row_sums() {
        let op = build_operator(&doubling(), &Potential::constant(0.0), 64).unwrap();
        assert!(op.row_sums().iter().all(|s| (s - 2.0).abs() < 1e-15));
        assert!(op.primitive);
        let op = build_operator(&doubling(), &Potential::constant(0.3), 64).unwrap();
        let expected = 2.0 * 0.3f64.exp();
        assert!(op.row_sums().iter().all(|s| (s - expected).abs() < 1e-14));
        let f = IntervalMap::intermittent(0.5).unwrap();
        let op = build_operator(&f, &Potential::constant(0.0), 64).unwrap();
        for (i, row) in op.rows.iter().enumerate() {
            let s: f64 = row.iter().map(|e| e.1).sum();
            assert_eq!(s, f.preimages(op.nodes[i]).len() as f64);
            assert_eq!(s, 2.0);
        }
    }

    #[test]
    fn too_few_cells() {
        assert!(matches!(
            build_operator(&doubling(), &Potential::constant(0.0), 8),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn leading_eigen_doubling() {
        let op = build_operator(&doubling(), &Potential::constant(0.0), 64).unwrap();
        let e = leading_eigen(&op).unwrap();
        assert!((e.lambda - 2.0).abs() < 1e-10);
        assert!(e.residual <= 1e-9);
        let s: f64 = e.left.iter().sum();
        let lr: f64 = e.left.iter().zip(&e.right).map(|(a, b)| a * b).sum();
        assert!((s - 1.0).abs() < 1e-12 && (lr - 1.0).abs() < 1e-12);
        let op = build_operator(&doubling(), &Potential::constant(-LN_2), 64).unwrap();
        assert!((leading_eigen(&op).unwrap().lambda - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pressure_examples() {
        let p = pressure_operator(&doubling(), &Potential::constant(0.0), 128).unwrap();
        assert!((p.value - LN_2).abs() < 1e-10);
        assert!(p.trace.len() >= 2);
        let t = IntervalMap::builtin("tent").unwrap();
        let p = pressure_operator(&t, &Potential::constant(0.0), 128).unwrap();
        assert!((p.value - LN_2).abs() < 1e-10);
    }

    #[test]
    fn equilibrium_doubling_is_uniform() {
        for c in [0.0, 0.7] {
            let op = build_operator(&doubling(), &Potential::constant(c), 64).unwrap();
            let e = leading_eigen(&op).unwrap();
            let m = equilibrium_measure(&op, &e);
            assert!(m.weights.iter().all(|w| (w - 1.0 / 64.0).abs() < 1e-12));
            assert!(m.invariance_defect < 1e-9);
            let (h, i) =
                entropy_and_integral(&doubling(), &Potential::constant(c), &m.weights, LN_2 + c)
                    .unwrap();
            assert!((h - LN_2).abs() < 1e-12 && (i - c).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_and_integral_rejects_bad_input() {
        let d = doubling();
        let w = vec![0.5 / 16.0; 16];
        assert!(entropy_and_integral(&d, &Potential::constant(0.0), &w, 0.0).is_err());
        let w = vec![1.0 / 16.0; 16];
        assert!(entropy_and_integral(&d, &Potential::constant(1.0), &w, 0.5).is_err());
    }

    #[test]
    fn mixing_doubling_and_shift() {
        let a = {
            let op = build_operator(&doubling(), &Potential::constant(0.0), 256).unwrap();
            mixing_rate(&op, &leading_eigen(&op).unwrap())
        };
        let b = {
            let op = build_operator(&doubling(), &Potential::constant(1.3), 256).unwrap();
            mixing_rate(&op, &leading_eigen(&op).unwrap())
        };
        assert!(a.rho_hat <= 0.75);
        assert!((a.rho_hat - b.rho_hat).abs() < 1e-9);
    }

    #[test]
    fn correlations_trivial_cases() {
        let d = doubling();
        let w = vec![1.0 / 128.0; 128];
        let cos = Potential::cosine(1.0, 1.0);
        let c = correlation_sum(&d, &cos, &Potential::constant(2.0), &w, 5).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-15));
        let c = correlation_sum(&d, &cos, &cos, &w, 0).unwrap();
        // midpoint quadrature of cos² is exact for this grid: 1/2
        assert!((c[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn primitivity_detects_periodic_pattern() {
        // two-cycle: 0 -> 1 -> 0
        let rows = vec![vec![(1, 1.0)], vec![(0, 1.0)]];
        assert!(!is_primitive(&rows));
        let rows = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0)]];
        assert!(is_primitive(&rows));
        let rows = vec![vec![(0, 1.0)], vec![(1, 1.0)]];
        assert!(!is_primitive(&rows));
    }
}
