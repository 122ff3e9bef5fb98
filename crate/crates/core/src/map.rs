//! Piecewise-monotone interval maps.
//!
//! A map is an ordered list of monotone branches whose domains partition the
//! ambient interval. Branch inverses are computed by bracketed bisection with
//! a few Newton refinements, which is all the backward-orbit and pull-back
//! machinery needs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::tolerance::DEFAULT as TOL;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Samples used to validate monotonicity of a branch.
const VALIDATION_GRID: usize = 257;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Increasing,
    Decreasing,
}

/// Which one-sided limit to use at a branch cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Clone)]
pub struct Branch {
    domain_lo: f64,
    domain_hi: f64,
    orientation: Orientation,
    forward: RealFn,
    derivative: RealFn,
    image_lo: f64,
    image_hi: f64,
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Branch")
            .field("domain", &(self.domain_lo, self.domain_hi))
            .field("orientation", &self.orientation)
            .field("image", &(self.image_lo, self.image_hi))
            .finish()
    }
}

impl Branch {
    /// Builds a branch, inferring its orientation and checking strict
    /// monotonicity and the derivative sign on a sampling grid.
    pub fn new(
        domain_lo: f64,
        domain_hi: f64,
        forward: RealFn,
        derivative: RealFn,
    ) -> Result<Self> {
        if !(domain_lo < domain_hi) || !domain_lo.is_finite() || !domain_hi.is_finite() {
            return Err(Error::Domain(format!(
                "branch domain [{domain_lo}, {domain_hi}] is empty or not finite"
            )));
        }
        let a = forward(domain_lo);
        let b = forward(domain_hi);
        if !a.is_finite() || !b.is_finite() || a == b {
            return Err(Error::Domain(format!(
                "branch on [{domain_lo}, {domain_hi}] is not strictly monotone (endpoint values {a}, {b})"
            )));
        }
        let orientation = if b > a {
            Orientation::Increasing
        } else {
            Orientation::Decreasing
        };
        let sign = if b > a { 1.0 } else { -1.0 };
        let mut prev = a;
        for i in 1..VALIDATION_GRID {
            let x = domain_lo + (domain_hi - domain_lo) * i as f64 / (VALIDATION_GRID - 1) as f64;
            let v = forward(x);
            if !v.is_finite() || sign * (v - prev) <= 0.0 {
                return Err(Error::Domain(format!(
                    "branch on [{domain_lo}, {domain_hi}] is not strictly monotone near x = {x}"
                )));
            }
            prev = v;
            if i < VALIDATION_GRID - 1 {
                let d = derivative(x);
                if !d.is_finite() || (d.abs() > TOL.derivative_sign && d * sign < 0.0) {
                    return Err(Error::Domain(format!(
                        "derivative sign disagrees with orientation at x = {x} (Df = {d})"
                    )));
                }
            }
        }
        Ok(Branch {
            domain_lo,
            domain_hi,
            orientation,
            forward,
            derivative,
            image_lo: a.min(b),
            image_hi: a.max(b),
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    pub fn image(&self) -> (f64, f64) {
        (self.image_lo, self.image_hi)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn forward(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    /// The unique x in the branch domain with f(x) = y, or `None` when y is
    /// outside the branch image.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let tol = TOL.structural;
        if y < self.image_lo - tol || y > self.image_hi + tol {
            return None;
        }
        let y = y.clamp(self.image_lo, self.image_hi);
        let (lo, hi) = (self.domain_lo, self.domain_hi);
        // value of f at lo and hi
        let (f_lo, f_hi) = match self.orientation {
            Orientation::Increasing => (self.image_lo, self.image_hi),
            Orientation::Decreasing => (self.image_hi, self.image_lo),
        };
        if y == f_lo {
            return Some(lo);
        }
        if y == f_hi {
            return Some(hi);
        }
        let increasing = self.orientation == Orientation::Increasing;
        let (mut a, mut b) = (lo, hi);
        while b - a > TOL.bisection_width {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let below = (self.forward)(m) < y;
            if below == increasing {
                a = m;
            } else {
                b = m;
            }
        }
        let mut x = 0.5 * (a + b);
        let flat = [a, x, b]
            .iter()
            .any(|&p| (self.derivative)(p).abs() < TOL.newton_min_derivative);
        if !flat {
            let mut r = (self.forward)(x) - y;
            for _ in 0..TOL.newton_steps {
                if r == 0.0 {
                    break;
                }
                let d = (self.derivative)(x);
                let cand = x - r / d;
                if !(cand >= lo && cand <= hi) {
                    break;
                }
                let rc = (self.forward)(cand) - y;
                if rc.abs() >= r.abs() {
                    break;
                }
                x = cand;
                r = rc;
            }
        }
        Some(x)
    }
}

/// A piecewise-monotone self-map of a compact interval.
#[derive(Debug, Clone)]
pub struct IntervalMap {
    ambient_lo: f64,
    ambient_hi: f64,
    branches: Vec<Branch>,
    critical_points: Vec<f64>,
    label: String,
    regularity: f64,
}

impl IntervalMap {
    /// Validates the branch partition and the self-map property; critical
    /// points are the branch endpoints where a one-sided derivative vanishes.
    pub fn new(
        ambient: (f64, f64),
        branches: Vec<Branch>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let (lo, hi) = ambient;
        if !(lo < hi) {
            return Err(Error::Domain(format!(
                "empty ambient interval [{lo}, {hi}]"
            )));
        }
        if branches.is_empty() {
            return Err(Error::Domain("a map needs at least one branch".into()));
        }
        let tol = TOL.structural;
        if (branches[0].domain_lo - lo).abs() > tol
            || (branches[branches.len() - 1].domain_hi - hi).abs() > tol
        {
            return Err(Error::Domain(
                "branch domains do not reach both ends of the ambient interval".into(),
            ));
        }
        for w in branches.windows(2) {
            if (w[0].domain_hi - w[1].domain_lo).abs() > tol {
                return Err(Error::Domain(format!(
                    "branch domains are not contiguous at {} / {}",
                    w[0].domain_hi, w[1].domain_lo
                )));
            }
        }
        for b in &branches {
            if b.image_lo < lo - tol || b.image_hi > hi + tol {
                return Err(Error::Domain(format!(
                    "branch on [{}, {}] leaves the ambient interval (image [{}, {}])",
                    b.domain_lo, b.domain_hi, b.image_lo, b.image_hi
                )));
            }
        }
        let mut critical_points: Vec<f64> = Vec::new();
        for b in &branches {
            for x in [b.domain_lo, b.domain_hi] {
                if (b.derivative)(x).abs() < TOL.derivative_sign
                    && !critical_points.iter().any(|&c| (c - x).abs() <= tol)
                {
                    critical_points.push(x);
                }
            }
        }
        critical_points.sort_by(f64::total_cmp);
        Ok(IntervalMap {
            ambient_lo: lo,
            ambient_hi: hi,
            branches,
            critical_points,
            label: label.into(),
            regularity: 1.0,
        })
    }

    /// The intermittent map x(1 + x^alpha) mod 1 with a neutral fixed point at 0.
    pub fn intermittent(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha outside (0,1): {alpha}")));
        }
        let cut = intermittent_cut(alpha);
        let left = Branch::new(
            0.0,
            cut,
            Arc::new(move |x: f64| x * (1.0 + x.powf(alpha))),
            Arc::new(move |x: f64| 1.0 + (1.0 + alpha) * x.powf(alpha)),
        )?;
        let right = Branch::new(
            cut,
            1.0,
            Arc::new(move |x: f64| x * (1.0 + x.powf(alpha)) - 1.0),
            Arc::new(move |x: f64| 1.0 + (1.0 + alpha) * x.powf(alpha)),
        )?;
        let mut map = IntervalMap::new(
            (0.0, 1.0),
            vec![left, right],
            format!("intermittent(alpha={alpha})"),
        )?;
        map.regularity = alpha;
        Ok(map)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let lin = |slope: f64, offset: f64| -> (RealFn, RealFn) {
            (
                Arc::new(move |x: f64| slope * x + offset),
                Arc::new(move |_x: f64| slope),
            )
        };
        match name {
            "doubling" => {
                let (f0, d0) = lin(2.0, 0.0);
                let (f1, d1) = lin(2.0, -1.0);
                IntervalMap::new(
                    (0.0, 1.0),
                    vec![
                        Branch::new(0.0, 0.5, f0, d0)?,
                        Branch::new(0.5, 1.0, f1, d1)?,
                    ],
                    "doubling",
                )
            }
            "tent" => {
                let (f0, d0) = lin(2.0, 0.0);
                let (f1, d1) = lin(-2.0, 2.0);
                IntervalMap::new(
                    (0.0, 1.0),
                    vec![
                        Branch::new(0.0, 0.5, f0, d0)?,
                        Branch::new(0.5, 1.0, f1, d1)?,
                    ],
                    "tent",
                )
            }
            "logistic" => {
                let f: RealFn = Arc::new(|x: f64| 4.0 * x * (1.0 - x));
                let d: RealFn = Arc::new(|x: f64| 4.0 - 8.0 * x);
                IntervalMap::new(
                    (0.0, 1.0),
                    vec![
                        Branch::new(0.0, 0.5, f.clone(), d.clone())?,
                        Branch::new(0.5, 1.0, f, d)?,
                    ],
                    "logistic",
                )
            }
            "chebyshev" | "chebyshev-like" => {
                let f: RealFn = Arc::new(|x: f64| 4.0 * x * x * x - 3.0 * x);
                let d: RealFn = Arc::new(|x: f64| 12.0 * x * x - 3.0);
                IntervalMap::new(
                    (-1.0, 1.0),
                    vec![
                        Branch::new(-1.0, -0.5, f.clone(), d.clone())?,
                        Branch::new(-0.5, 0.5, f.clone(), d.clone())?,
                        Branch::new(0.5, 1.0, f, d)?,
                    ],
                    "chebyshev",
                )
            }
            other => Err(Error::Domain(format!("unknown built-in map '{other}'"))),
        }
    }

    /// Builds a map from expression strings, one per branch, with symbolic derivatives.
    pub fn piecewise(
        ambient: (f64, f64),
        pieces: &[((f64, f64), &str)],
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut branches = Vec::with_capacity(pieces.len());
        for &((lo, hi), src) in pieces {
            let e = Expr::parse(src)?;
            let d = e.derivative();
            let e = Arc::new(e);
            let d = Arc::new(d);
            branches.push(Branch::new(
                lo,
                hi,
                Arc::new(move |x: f64| e.eval(x)),
                Arc::new(move |x: f64| d.eval(x)),
            )?);
        }
        IntervalMap::new(ambient, branches, label)
    }

    pub fn ambient(&self) -> (f64, f64) {
        (self.ambient_lo, self.ambient_hi)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn critical_points(&self) -> &[f64] {
        &self.critical_points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Hölder exponent of log|Df| (alpha for the intermittent family, 1 for smooth maps).
    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.ambient_lo - TOL.structural && x <= self.ambient_hi + TOL.structural
    }

    fn check_domain(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || !self.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                self.ambient_lo, self.ambient_hi
            )));
        }
        Ok(x.clamp(self.ambient_lo, self.ambient_hi))
    }

    /// Index of the branch used at x; interior cuts belong to the left branch.
    pub fn branch_index(&self, x: f64) -> Result<usize> {
        self.branch_index_sided(x, Side::Left)
    }

    /// Like [`branch_index`](Self::branch_index) but choosing the branch on
    /// `side` when x sits exactly on an interior cut.
    pub fn branch_index_sided(&self, x: f64, side: Side) -> Result<usize> {
        let x = self.check_domain(x)?;
        let n = self.branches.len();
        for (i, b) in self.branches.iter().enumerate() {
            if x <= b.domain_hi {
                if side == Side::Right && x == b.domain_hi && i + 1 < n {
                    return Ok(i + 1);
                }
                return Ok(i);
            }
        }
        Ok(n - 1)
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.ambient_lo, self.ambient_hi)
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let i = self.branch_index(x)?;
        let x = self.check_domain(x)?;
        Ok(self.clamp(self.branches[i].forward(x)))
    }

    /// One step of a one-sided orbit: the side flips after a decreasing branch.
    pub fn evaluate_sided(&self, x: f64, side: Side) -> Result<(f64, Side)> {
        let i = self.branch_index_sided(x, side)?;
        let x = self.check_domain(x)?;
        let b = &self.branches[i];
        let next_side = match b.orientation {
            Orientation::Increasing => side,
            Orientation::Decreasing => side.flip(),
        };
        Ok((self.clamp(b.forward(x)), next_side))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let i = self.branch_index(x)?;
        Ok(self.branches[i].derivative(self.check_domain(x)?))
    }

    /// log|Df(x)|; refused next to critical points.
    pub fn log_derivative(&self, x: f64) -> Result<f64> {
        if let Some(&c) = self
            .critical_points
            .iter()
            .find(|&&c| (x - c).abs() <= TOL.singular)
        {
            return Err(Error::Singularity {
                x,
                detail: format!("critical point {c} of {}", self.label),
            });
        }
        let d = self.derivative(x)?;
        if d == 0.0 {
            return Err(Error::Singularity {
                x,
                detail: format!("Df vanishes for {}", self.label),
            });
        }
        Ok(d.abs().ln())
    }

    /// Branch preimages of y, each tagged with its branch index, sorted by point.
    pub fn preimages_with_branch(&self, y: f64) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self
            .branches
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.inverse(y).map(|x| (i, x)))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out.dedup_by(|later, earlier| (later.1 - earlier.1).abs() <= TOL.merge);
        out
    }

    pub fn preimages(&self, y: f64) -> Vec<f64> {
        self.preimages_with_branch(y)
            .into_iter()
            .map(|(_, x)| x)
            .collect()
    }

    /// x, f(x), ..., f^n(x).
    pub fn iterate(&self, x: f64, n: usize) -> Result<Vec<f64>> {
        let mut orbit = Vec::with_capacity(n + 1);
        let mut cur = self.check_domain(x)?;
        orbit.push(cur);
        for _ in 0..n {
            cur = self.evaluate(cur)?;
            orbit.push(cur);
        }
        Ok(orbit)
    }

    /// True when every branch maps onto the whole ambient interval.
    pub fn is_full_branch(&self) -> bool {
        let tol = 1e-10;
        self.branches.iter().all(|b| {
            (b.image_lo - self.ambient_lo).abs() <= tol
                && (b.image_hi - self.ambient_hi).abs() <= tol
        })
    }

    /// Interior cuts where the two adjacent branches disagree, as
    /// `(cut, left value, right value)`.
    pub fn discontinuities(&self) -> Vec<(f64, f64, f64)> {
        self.branches
            .windows(2)
            .filter_map(|w| {
                let c = w[0].domain_hi;
                let l = w[0].forward(c);
                let r = w[1].forward(w[1].domain_lo);
                ((l - r).abs() > TOL.merge).then_some((c, l, r))
            })
            .collect()
    }

    /// Continuity at a branch endpoint shared by two branches (or any interior point).
    pub fn is_continuous_at(&self, x: f64) -> bool {
        !self
            .discontinuities()
            .iter()
            .any(|&(c, _, _)| (c - x).abs() <= TOL.structural)
    }
}

/// Root of x(1 + x^alpha) = 1 in (0, 1).
pub fn intermittent_cut(alpha: f64) -> f64 {
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    while b - a > 1e-16 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if m * (1.0 + m.powf(alpha)) < 1.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
