//! Hölder potentials, Birkhoff sums and the cohomology reduction
//! φ ↦ (1/n) S_n(φ).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::map::{IntervalMap, Side};
use crate::tolerance::DEFAULT as TOL;

pub type PotentialFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// A real-valued function on an interval with a declared Hölder exponent.
#[derive(Clone)]
pub struct Potential {
    f: PotentialFn,
    holder_exponent: f64,
    label: String,
    singular_set: Vec<f64>,
    domain: (f64, f64),
    constant: Option<f64>,
    flagged: bool,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("label", &self.label)
            .field("holder_exponent", &self.holder_exponent)
            .field("singular_set", &self.singular_set)
            .field("domain", &self.domain)
            .finish()
    }
}

impl Potential {
    pub fn from_fn(
        label: impl Into<String>,
        holder_exponent: f64,
        f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(holder_exponent > 0.0 && holder_exponent <= 1.0) {
            return Err(Error::Domain(format!(
                "Hölder exponent must lie in (0, 1], got {holder_exponent}"
            )));
        }
        Ok(Potential {
            f: Arc::new(f),
            holder_exponent,
            label: label.into(),
            singular_set: Vec::new(),
            domain: (0.0, 1.0),
            constant: None,
            flagged: false,
        })
    }

    pub fn constant(c: f64) -> Self {
        Potential {
            f: Arc::new(move |_| Ok(c)),
            holder_exponent: 1.0,
            label: format!("constant({c})"),
            singular_set: Vec::new(),
            domain: (0.0, 1.0),
            constant: Some(c),
            flagged: false,
        }
    }

    /// amp · cos(2π · freq · x); Lipschitz.
    pub fn cosine(amp: f64, freq: f64) -> Self {
        Potential {
            f: Arc::new(move |x| Ok(amp * (2.0 * PI * freq * x).cos())),
            holder_exponent: 1.0,
            label: format!("cosine({amp},{freq})"),
            singular_set: Vec::new(),
            domain: (0.0, 1.0),
            constant: None,
            flagged: false,
        }
    }

    /// −t · log|Df|. Singular at the critical points of `map`; such potentials
    /// are constructible but flagged.
    pub fn geometric(map: &IntervalMap, t: f64, holder_exponent: f64) -> Result<Self> {
        let m = map.clone();
        let mut p = Potential::from_fn(format!("geometric(t={t})"), holder_exponent, move |x| {
            Ok(-t * m.log_derivative(x)?)
        })?;
        p.singular_set = map.critical_points().to_vec();
        p.flagged = !map.critical_points().is_empty();
        p.domain = map.ambient();
        Ok(p)
    }

    /// −C · dist(x, points)^alpha.
    pub fn distance_power(c: f64, alpha: f64, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain(
                "distance_power needs at least one point".into(),
            ));
        }
        Potential::from_fn(
            format!("distance_power(C={c},alpha={alpha})"),
            alpha,
            move |x| {
                let d = points
                    .iter()
                    .map(|p| (x - p).abs())
                    .fold(f64::INFINITY, f64::min);
                Ok(-c * d.powf(alpha))
            },
        )
    }

    pub fn expression(src: &str, holder_exponent: f64) -> Result<Self> {
        let e = Expr::parse(src)?;
        Potential::from_fn(format!("expr({src})"), holder_exponent, move |x| {
            let v = e.eval(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Singularity {
                    x,
                    detail: "expression is not finite".into(),
                })
            }
        })
    }

    pub fn with_domain(mut self, domain: (f64, f64)) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        if let Some(&s) = self
            .singular_set
            .iter()
            .find(|&&s| (x - s).abs() <= TOL.singular)
        {
            return Err(Error::Singularity {
                x,
                detail: format!("{} is singular at {s}", self.label),
            });
        }
        (self.f)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder_exponent
    }

    pub fn singular_set(&self) -> &[f64] {
        &self.singular_set
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// The constant value, when this potential is known to be constant.
    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    /// Geometric potential over a map with critical points.
    pub fn is_flagged(&self) -> bool {
        self.flagged
    }

    /// self + t · other.
    pub fn plus_scaled(&self, other: &Potential, t: f64) -> Potential {
        let (a, b) = (self.f.clone(), other.f.clone());
        let mut singular = self.singular_set.clone();
        if t != 0.0 {
            singular.extend(other.singular_set.iter().copied());
        }
        Potential {
            f: Arc::new(move |x| Ok(a(x)? + t * b(x)?)),
            holder_exponent: self.holder_exponent.min(other.holder_exponent),
            label: format!("{} + {t}*{}", self.label, other.label),
            singular_set: singular,
            domain: self.domain,
            constant: match (self.constant, other.constant) {
                (Some(c), Some(d)) => Some(c + t * d),
                _ => None,
            },
            flagged: self.flagged || (t != 0.0 && other.flagged),
        }
    }

    pub fn shifted(&self, c: f64) -> Potential {
        self.plus_scaled(&Potential::constant(1.0), c)
    }
}

/// S_n(φ)(x) = Σ_{j<n} φ(f^j x).
pub fn birkhoff_sum(map: &IntervalMap, phi: &Potential, x: f64, n: usize) -> Result<f64> {
    birkhoff_sum_sided(map, phi, x, Side::Left, n)
}

/// Birkhoff sum along a one-sided orbit (see [`IntervalMap::evaluate_sided`]).
pub fn birkhoff_sum_sided(
    map: &IntervalMap,
    phi: &Potential,
    x: f64,
    side: Side,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Precondition("birkhoff sum needs n >= 1".into()));
    }
    let mut cur = x;
    let mut side = side;
    let mut sum = 0.0;
    for j in 0..n {
        sum += phi.value(cur).map_err(|e| name_iterate(e, j))?;
        if j + 1 < n {
            (cur, side) = map.evaluate_sided(cur, side)?;
        }
    }
    Ok(sum)
}

fn name_iterate(e: Error, j: usize) -> Error {
    match e {
        Error::Singularity { x, detail } => Error::Singularity {
            x,
            detail: format!("iterate {j} of the orbit: {detail}"),
        },
        other => other,
    }
}

/// Returns (φ̃, h) with φ̃ = (1/n) S_n(φ) and h = −(1/n) Σ_{j<n} (n−1−j) φ∘f^j,
/// so that φ̃ = φ + h − h∘f.
pub fn cohomology_reduce(
    map: &IntervalMap,
    phi: &Potential,
    n: usize,
) -> Result<(Potential, Potential)> {
    if n == 0 {
        return Err(Error::Precondition(
            "cohomology reduction needs n >= 1".into(),
        ));
    }
    if n == 1 {
        let h = Potential::constant(0.0).with_domain(phi.domain);
        return Ok((phi.clone(), h));
    }
    let weights = |k: usize| -> Vec<f64> { (0..k).map(|j| (n - 1 - j) as f64).collect() };
    let tilde = {
        let (m, p) = (map.clone(), phi.clone());
        let mut out = Potential::from_fn(
            format!("S_{n}({})/{n}", phi.label),
            phi.holder_exponent,
            move |x| Ok(birkhoff_sum(&m, &p, x, n)? / n as f64),
        )?;
        out.singular_set = phi.singular_set.clone();
        out.domain = phi.domain;
        out.constant = phi.constant;
        out
    };
    let h = {
        let (m, p) = (map.clone(), phi.clone());
        let w = weights(n);
        let mut out = Potential::from_fn(
            format!("h_{n}({})", phi.label),
            phi.holder_exponent,
            move |x| {
                let mut cur = x;
                let mut acc = 0.0;
                for (j, wj) in w.iter().enumerate() {
                    if *wj != 0.0 {
                        acc += wj * p.value(cur).map_err(|e| name_iterate(e, j))?;
                    }
                    if j + 1 < w.len() {
                        cur = m.evaluate(cur)?;
                    }
                }
                Ok(-acc / n as f64)
            },
        )?;
        out.singular_set = phi.singular_set.clone();
        out.domain = phi.domain;
        out
    };
    Ok((tilde, h))
}

/// Empirical Hölder quotient max |φ(x) − φ(x')| / |x − x'|^α over grid pairs
/// at distance at least 1e-4, skipping neighbourhoods of singular points.
pub fn holder_modulus(phi: &Potential, grid_size: usize) -> Result<f64> {
    if grid_size < 2 {
        return Err(Error::Precondition(
            "holder_modulus needs grid_size >= 2".into(),
        ));
    }
    let (lo, hi) = phi.domain;
    let alpha = phi.holder_exponent;
    let mut samples = Vec::with_capacity(grid_size);
    for i in 0..grid_size {
        let x = lo + (hi - lo) * i as f64 / (grid_size - 1) as f64;
        if phi
            .singular_set
            .iter()
            .any(|s| (x - s).abs() <= TOL.singular_grid)
        {
            continue;
        }
        if let Ok(v) = phi.value(x) {
            if v.is_finite() {
                samples.push((x, v));
            }
        }
    }
    let mut best: f64 = 0.0;
    for (i, &(x, v)) in samples.iter().enumerate() {
        for &(y, w) in &samples[i + 1..] {
            let d = y - x;
            if d < 1e-4 {
                continue;
            }
            best = best.max((v - w).abs() / d.powf(alpha));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doubling() -> IntervalMap {
        IntervalMap::builtin("doubling").unwrap()
    }

    #[test]
    fn potential_examples() {
        assert_eq!(Potential::constant(0.3).value(0.77).unwrap(), 0.3);
        let f = IntervalMap::intermittent(0.5).unwrap();
        let g = Potential::geometric(&f, 1.0, 0.5).unwrap();
        assert_eq!(g.value(0.0).unwrap(), 0.0);
        assert!(!g.is_flagged());
        assert!((Potential::cosine(1.0, 1.0).value(0.5).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_over_critical_map_is_flagged_and_errors_at_critical_point() {
        let l = IntervalMap::builtin("logistic").unwrap();
        let g = Potential::geometric(&l, 1.0, 1.0).unwrap();
        assert!(g.is_flagged());
        assert_eq!(g.singular_set(), &[0.5]);
        assert!(matches!(g.value(0.5), Err(Error::Singularity { .. })));
        assert!(g.value(0.3).is_ok());
    }

    #[test]
    fn birkhoff_examples() {
        let f = IntervalMap::intermittent(0.5).unwrap();
        let g = Potential::geometric(&f, 1.0, 0.5).unwrap();
        assert_eq!(birkhoff_sum(&f, &g, 0.0, 7).unwrap(), 0.0);
        let c = Potential::constant(0.7);
        assert!((birkhoff_sum(&doubling(), &c, 0.123, 9).unwrap() - 6.3).abs() < 1e-12);
        let cos = Potential::cosine(1.0, 1.0);
        let s = birkhoff_sum(&doubling(), &cos, 1.0 / 3.0, 2).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
    }

    #[test]
    fn birkhoff_names_singular_iterate() {
        let l = IntervalMap::builtin("logistic").unwrap();
        let g = Potential::geometric(&l, 1.0, 1.0).unwrap();
        // 0.25 -> 0.75 -> 0.75; 1/2 is reached from (2 - sqrt 2)/4... use a direct preimage of 1/2
        let x = (1.0 - 0.5f64.sqrt()) / 2.0;
        match birkhoff_sum(&l, &g, x, 3) {
            Err(Error::Singularity { detail, .. }) => {
                assert!(detail.contains("iterate 1"), "{detail}")
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn cohomology_examples() {
        let d = doubling();
        let phi = Potential::cosine(1.0, 1.0);
        let (t1, h1) = cohomology_reduce(&d, &phi, 1).unwrap();
        assert_eq!(t1.value(0.3).unwrap(), phi.value(0.3).unwrap());
        assert_eq!(h1.value(0.3).unwrap(), 0.0);

        let id = Potential::expression("x", 1.0).unwrap();
        let (t, h) = cohomology_reduce(&d, &id, 2).unwrap();
        assert!((t.value(0.2).unwrap() - 0.3).abs() < 1e-15);
        let rhs = 0.2 + h.value(0.2).unwrap() - h.value(0.4).unwrap();
        assert!((rhs - 0.3).abs() < 1e-15);

        let c = Potential::constant(-1.25);
        let (tc, _) = cohomology_reduce(&d, &c, 5).unwrap();
        assert!((tc.value(0.61).unwrap() + 1.25).abs() < 1e-15);
    }

    #[test]
    fn cohomology_identity_on_grid() {
        let d = doubling();
        let phi = Potential::cosine(1.0, 1.0);
        for n in [2, 3, 4, 7] {
            let (t, h) = cohomology_reduce(&d, &phi, n).unwrap();
            for i in 0..1000 {
                let x = (i as f64 + 0.37) / 1000.0;
                let fx = d.evaluate(x).unwrap();
                let rhs = phi.value(x).unwrap() + h.value(x).unwrap() - h.value(fx).unwrap();
                assert!((t.value(x).unwrap() - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cohomology_preserves_periodic_averages() {
        // period-3 orbit {1/7, 2/7, 4/7} and fixed point 0 of the doubling map
        let d = doubling();
        let phi = Potential::cosine(1.0, 1.0);
        let (t, _) = cohomology_reduce(&d, &phi, 4).unwrap();
        for orbit in [
            vec![1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0],
            vec![0.0],
            vec![1.0 / 3.0, 2.0 / 3.0],
        ] {
            let a: f64 = orbit.iter().map(|&x| phi.value(x).unwrap()).sum::<f64>();
            let b: f64 = orbit.iter().map(|&x| t.value(x).unwrap()).sum::<f64>();
            assert!((a - b).abs() / orbit.len() as f64 <= 1e-9);
        }
    }

    #[test]
    fn holder_modulus_examples() {
        assert_eq!(holder_modulus(&Potential::constant(2.0), 200).unwrap(), 0.0);
        let id = Potential::expression("x", 1.0).unwrap();
        assert!((holder_modulus(&id, 300).unwrap() - 1.0).abs() < 1e-12);
        // oracle: max of |cos'| = 2π is approached by the nearest admissible grid pairs
        let g = 1001;
        let h = 1.0 / (g - 1) as f64;
        let oracle = (0..g - 1)
            .map(|i| {
                let x = i as f64 * h;
                ((2.0 * PI * (x + h)).cos() - (2.0 * PI * x).cos()).abs() / h
            })
            .fold(0.0, f64::max);
        let m = holder_modulus(&Potential::cosine(1.0, 1.0), g).unwrap();
        assert!((m - oracle).abs() < 1e-12);
        assert!((m - 2.0 * PI).abs() < 1e-3);
        assert!(holder_modulus(&id, 1).is_err());
    }

    #[test]
    fn fixed_point_sum_is_exact() {
        let d = doubling();
        let phi = Potential::cosine(0.375, 3.0);
        let p = phi.value(0.0).unwrap();
        assert_eq!(birkhoff_sum(&d, &phi, 0.0, 11).unwrap(), 11.0 * p);
    }

    proptest! {
        #[test]
        fn birkhoff_additivity(x in 0.0f64..1.0, m in 1usize..10, n in 1usize..10) {
            let d = doubling();
            let phi = Potential::cosine(1.0, 1.0);
            let lhs = birkhoff_sum(&d, &phi, x, m + n).unwrap();
            let fm = d.iterate(x, m).unwrap()[m];
            let rhs = birkhoff_sum(&d, &phi, x, m).unwrap() + birkhoff_sum(&d, &phi, fm, n).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
