//! Backward-orbit trees f⁻ⁿ(x₀) and the tree pressure
//! lim (1/n) log Σ_{y ∈ f⁻ⁿ(x₀)} exp S_n(φ)(y).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{Method, PressureEstimate};
use crate::map::IntervalMap;
use crate::numerics::{fit_line, log_sum_exp};
use crate::potential::{birkhoff_sum, Potential};
use crate::tolerance::DEFAULT as TOL;

pub const DEFAULT_NODE_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Leaf {
    pub point: f64,
    /// S_n(φ)(point).
    pub log_weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BackwardTree {
    /// Base point actually used (after any nudge off a branch-cut orbit).
    pub base: f64,
    pub requested_base: f64,
    pub depth: usize,
    /// Deepest level, sorted by point.
    pub leaves: Vec<Leaf>,
    /// log Z_k for k = 0..=depth.
    pub log_z: Vec<f64>,
    /// Number of nodes on each level k = 0..=depth.
    pub counts: Vec<usize>,
}

impl BackwardTree {
    pub fn nudged(&self) -> bool {
        self.base != self.requested_base
    }
}

/// Refuses potentials that are singular somewhere on the interval.
pub(crate) fn check_regular(phi: &Potential, map: &IntervalMap) -> Result<()> {
    if phi.is_flagged() {
        return Err(Error::Precondition(format!(
            "potential {} is singular at the critical points of {}",
            phi.label(),
            map.label()
        )));
    }
    Ok(())
}

/// Moves x0 off the forward orbits of the one-sided values at interior
/// discontinuities, where branch preimages would not verify forward.
fn nudge_base(map: &IntervalMap, x0: f64, depth: usize) -> Result<f64> {
    let (lo, hi) = map.ambient();
    for (_, l, r) in map.discontinuities() {
        for start in [l, r] {
            let orbit = map.iterate(start, depth)?;
            if orbit.iter().any(|&p| (p - x0).abs() <= TOL.structural) {
                let up = x0 + TOL.base_nudge;
                return Ok(if up <= hi {
                    up
                } else {
                    (x0 - TOL.base_nudge).max(lo)
                });
            }
        }
    }
    Ok(x0)
}

pub fn build_tree(map: &IntervalMap, phi: &Potential, x0: f64, n: usize) -> Result<BackwardTree> {
    build_tree_with_budget(map, phi, x0, n, DEFAULT_NODE_BUDGET)
}

/// Breadth-first preimage expansion. Each node carries the Birkhoff sum of
/// its forward path back to the root.
pub fn build_tree_with_budget(
    map: &IntervalMap,
    phi: &Potential,
    x0: f64,
    n: usize,
    node_budget: usize,
) -> Result<BackwardTree> {
    if n == 0 {
        return Err(Error::Precondition("tree depth must be >= 1".into()));
    }
    if !map.contains(x0) {
        return Err(Error::Domain(format!(
            "base point {x0} outside the ambient interval"
        )));
    }
    check_regular(phi, map)?;
    let base = nudge_base(map, x0, n)?;

    let mut level = vec![Leaf {
        point: base,
        log_weight: 0.0,
    }];
    let mut log_z = vec![0.0];
    let mut counts = vec![1usize];
    for k in 1..=n {
        let children: Result<Vec<Vec<Leaf>>> = level
            .par_iter()
            .map(|node| {
                map.preimages(node.point)
                    .into_iter()
                    .map(|y| {
                        Ok(Leaf {
                            point: y,
                            log_weight: node.log_weight + phi.value(y)?,
                        })
                    })
                    .collect()
            })
            .collect();
        let mut next: Vec<Leaf> = children?.into_iter().flatten().collect();
        if next.len() > node_budget {
            return Err(Error::Budget {
                budget: node_budget,
                failed_level: k,
                deepest_level: k - 1,
            });
        }
        next.par_sort_by(|a, b| a.point.total_cmp(&b.point));
        let weights: Vec<f64> = next.iter().map(|l| l.log_weight).collect();
        log_z.push(log_sum_exp(&weights));
        counts.push(next.len());
        level = next;
    }
    Ok(BackwardTree {
        base,
        requested_base: x0,
        depth: n,
        leaves: level,
        log_z,
        counts,
    })
}

/// Headline value: least-squares slope of log Z_k against k over the deepest
/// half of the levels.
pub fn tree_pressure(tree: &BackwardTree) -> Result<PressureEstimate> {
    let n = tree.depth;
    if n < 4 {
        return Err(Error::Precondition(format!(
            "tree pressure needs depth >= 4, got {n}"
        )));
    }
    let start = n - n / 2;
    let ks: Vec<f64> = (start..=n).map(|k| k as f64).collect();
    let ys: Vec<f64> = tree.log_z[start..=n].to_vec();
    let fit = fit_line(&ks, &ys).expect("at least three levels");
    Ok(PressureEstimate {
        value: fit.slope,
        method: Method::TreeSlope,
        resolution: n,
        residual: fit.rms,
        trace: tree.log_z.clone(),
        coarse_value: Some(tree.log_z[n] / n as f64),
    })
}

/// max over leaves of (1/n) S_n(φ), with an attaining leaf.
pub fn max_backward_birkhoff(tree: &BackwardTree) -> (f64, f64) {
    let best = tree
        .leaves
        .iter()
        .copied()
        .fold(None::<Leaf>, |acc, l| match acc {
            Some(a) if a.log_weight >= l.log_weight => Some(a),
            _ => Some(l),
        })
        .expect("trees have at least one leaf");
    (best.log_weight / tree.depth as f64, best.point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    /// Tree-pressure slope at the periodic base point.
    pub lhs: f64,
    /// (1/N) S_N(φ)(x0).
    pub rhs: f64,
    pub gap: f64,
}

/// Compares the tree pressure at an N-periodic point with the orbit average
/// of φ along it. A positive gap is expected.
pub fn periodic_gap_check(
    map: &IntervalMap,
    phi: &Potential,
    x0: f64,
    period: usize,
    depth: usize,
) -> Result<GapReport> {
    if period == 0 {
        return Err(Error::Precondition("period must be >= 1".into()));
    }
    let orbit = map.iterate(x0, period)?;
    if (orbit[period] - x0).abs() > TOL.periodic {
        return Err(Error::Precondition(format!(
            "x0 = {x0} is not {period}-periodic (f^{period}(x0) = {})",
            orbit[period]
        )));
    }
    let rhs = birkhoff_sum(map, phi, x0, period)? / period as f64;
    let lhs = tree_pressure(&build_tree(map, phi, x0, depth)?)?.value;
    Ok(GapReport {
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use std::f64::consts::LN_2;

    fn doubling() -> IntervalMap {
        IntervalMap::builtin("doubling").unwrap()
    }

    #[test]
    fn doubling_zero_potential() {
        let t = build_tree(&doubling(), &Potential::constant(0.0), 0.3, 10).unwrap();
        assert_eq!(t.leaves.len(), 1024);
        assert!((t.log_z[10] - 10.0 * LN_2).abs() < 1e-12);
        let p = tree_pressure(&t).unwrap();
        assert!((p.value - LN_2).abs() < 1e-12);
        assert_eq!(p.method, Method::TreeSlope);
    }

    #[test]
    fn doubling_geometric_potential() {
        let d = doubling();
        let g = Potential::geometric(&d, 1.0, 1.0).unwrap();
        let t = build_tree(&d, &g, 0.3, 10).unwrap();
        assert!(t.log_z[10].abs() < 1e-12);
    }

    #[test]
    fn constant_shift() {
        let t = build_tree(&doubling(), &Potential::constant(-0.4), 0.71, 8).unwrap();
        let p = tree_pressure(&t).unwrap();
        assert!((p.value - (LN_2 - 0.4)).abs() < 1e-12);
        let (v, _) = max_backward_birkhoff(&t);
        assert!((v + 0.4).abs() < 1e-12);
    }

    #[test]
    fn intermittent_leaves_verify_forward() {
        let f = IntervalMap::intermittent(0.5).unwrap();
        let t = build_tree(&f, &Potential::constant(0.0), 0.3, 3).unwrap();
        assert_eq!(t.leaves.len(), 8);
        for leaf in &t.leaves {
            let y = f.iterate(leaf.point, 3).unwrap()[3];
            assert!((y - 0.3).abs() <= 1e-8);
        }
    }

    #[test]
    fn max_birkhoff_small_example() {
        let t = build_tree(&doubling(), &Potential::cosine(1.0, 1.0), 0.0, 1).unwrap();
        assert_eq!(t.leaves.len(), 2);
        let (v, w) = max_backward_birkhoff(&t);
        assert!((v - 1.0).abs() < 1e-9);
        assert!(w.abs() < 1e-8);
    }

    #[test]
    fn max_birkhoff_deep_doubling_cosine() {
        let t = build_tree(&doubling(), &Potential::cosine(1.0, 1.0), 0.3, 12).unwrap();
        let (v, _) = max_backward_birkhoff(&t);
        assert!((v - 1.0).abs() <= 0.05, "{v}");
    }

    #[test]
    fn budget_error_reports_deepest_level() {
        let err = build_tree_with_budget(&doubling(), &Potential::constant(0.0), 0.3, 12, 1000)
            .unwrap_err();
        assert_eq!(
            err,
            Error::Budget {
                budget: 1000,
                failed_level: 10,
                deepest_level: 9
            }
        );
    }

    #[test]
    fn refuses_singular_geometric_potential() {
        let l = IntervalMap::builtin("logistic").unwrap();
        let g = Potential::geometric(&l, 1.0, 1.0).unwrap();
        assert!(matches!(
            build_tree(&l, &g, 0.3, 4),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn shallow_tree_pressure_is_rejected() {
        let t = build_tree(&doubling(), &Potential::constant(0.0), 0.3, 3).unwrap();
        assert!(tree_pressure(&t).is_err());
    }

    #[test]
    fn base_on_cut_orbit_is_nudged() {
        let t = build_tree(&doubling(), &Potential::constant(0.0), 0.0, 6).unwrap();
        assert!(t.nudged());
        assert_eq!(t.leaves.len(), 64);
        let t = build_tree(&doubling(), &Potential::constant(0.0), 0.3, 6).unwrap();
        assert!(!t.nudged());
    }

    #[test]
    fn gap_examples() {
        let d = doubling();
        let r = periodic_gap_check(&d, &Potential::constant(0.0), 0.0, 1, 10).unwrap();
        assert!((r.lhs - LN_2).abs() < 1e-9 && r.rhs == 0.0 && (r.gap - LN_2).abs() < 1e-9);
        let r = periodic_gap_check(&d, &Potential::constant(-LN_2), 0.0, 1, 10).unwrap();
        assert!(r.lhs.abs() < 1e-9 && (r.rhs + LN_2).abs() < 1e-15 && (r.gap - LN_2).abs() < 1e-9);
        let r = periodic_gap_check(&d, &Potential::cosine(1.0, 1.0), 0.0, 1, 14).unwrap();
        assert!((r.rhs - 1.0).abs() < 1e-15 && r.lhs > 1.0);
        assert!(matches!(
            periodic_gap_check(&d, &Potential::constant(0.0), 0.3, 1, 10),
            Err(Error::Precondition(_))
        ));
    }
}
