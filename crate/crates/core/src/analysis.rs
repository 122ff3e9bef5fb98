//! Hyperbolicity verdicts, periodic-orbit ergodic optimization, Lyapunov
//! brackets, pressure-function scans and kink detection.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::PressureEstimate;
use crate::map::IntervalMap;
use crate::numerics::fit_line;
use crate::operator::{
    build_operator, equilibrium_measure, estimate_from, leading_eigen, pressure_operator,
    OperatorSkeleton,
};
use crate::potential::{birkhoff_sum, Potential};
use crate::pullback::invert_word;
use crate::tolerance::DEFAULT as TOL;
use crate::tree::{build_tree, check_regular, tree_pressure};

/// Upper bound on the number of candidate words examined by the periodic
/// orbit enumeration.
pub const PERIODIC_WORD_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    /// Branch itinerary, canonical up to rotation.
    pub word: Vec<usize>,
    /// x, f(x), ..., f^{p-1}(x).
    pub points: Vec<f64>,
    /// (1/p) S_p(φ)(x).
    pub average: f64,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.word.len()
    }
}

/// Smallest rotation, and only for primitive words (not a power of a shorter one).
fn is_canonical_primitive(word: &[usize]) -> bool {
    let p = word.len();
    for r in 1..p {
        let rotated = word[r..].iter().chain(&word[..r]);
        match rotated.cmp(word.iter()) {
            std::cmp::Ordering::Less => return false,
            // equal to a proper rotation means the word is periodic
            std::cmp::Ordering::Equal => return false,
            std::cmp::Ordering::Greater => {}
        }
    }
    true
}

/// The unique fixed point of x ↦ g_{w_0}(g_{w_1}(... g_{w_{p-1}}(x))), where
/// g_b is the inverse of branch b. Bisection on G(x) − x, whose sign changes
/// across the ambient interval because G maps it into itself.
fn word_fixed_point(map: &IntervalMap, word: &[usize]) -> Option<f64> {
    let (mut a, mut b) = map.ambient();
    let g = |x: f64| invert_word(map, x, word).map(|y| y - x);
    let ga = g(a)?;
    if ga == 0.0 {
        return Some(a);
    }
    let gb = g(b)?;
    if gb == 0.0 {
        return Some(b);
    }
    if ga.signum() == gb.signum() {
        return None;
    }
    while b - a > TOL.bisection_width {
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if gm == 0.0 {
            return Some(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let x = 0.5 * (a + b);
    let residual = g(x)?.abs();
    (residual <= TOL.periodic_point.max(2.0 * TOL.bisection_width)).then_some(x)
}

fn orbit_for_word(
    map: &IntervalMap,
    phi: &Potential,
    word: &[usize],
) -> Result<Option<PeriodicOrbit>> {
    let Some(x) = word_fixed_point(map, word) else {
        return Ok(None);
    };
    // walk back along the inverse branches, which contract
    let p = word.len();
    let mut points = vec![0.0; p];
    let mut cur = x;
    for j in (0..p).rev() {
        cur = match map.branches()[word[j]].inverse(cur) {
            Some(y) => y,
            None => return Ok(None),
        };
        points[j] = cur;
    }
    let mut sum = 0.0;
    for &y in &points {
        match phi.value(y) {
            Ok(v) => sum += v,
            Err(Error::Singularity { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(PeriodicOrbit {
        word: word.to_vec(),
        points,
        average: sum / p as f64,
    }))
}

/// Every periodic orbit of period ≤ max_period, one per cyclic class of
/// primitive branch words. Orbits through singular points of φ are skipped.
pub fn periodic_orbits(
    map: &IntervalMap,
    phi: &Potential,
    max_period: usize,
) -> Result<Vec<PeriodicOrbit>> {
    if max_period == 0 {
        return Err(Error::Precondition("max_period must be >= 1".into()));
    }
    if !map.is_full_branch() {
        return Err(Error::Unsupported(format!(
            "periodic orbit enumeration needs a full-branch map; {} is not",
            map.label()
        )));
    }
    let b = map.branch_count();
    let mut total = 0usize;
    let mut words = Vec::new();
    for p in 1..=max_period {
        let count = b.checked_pow(p as u32).unwrap_or(usize::MAX);
        total = total.saturating_add(count);
        if total > PERIODIC_WORD_BUDGET {
            return Err(Error::Budget {
                budget: PERIODIC_WORD_BUDGET,
                failed_level: p,
                deepest_level: p - 1,
            });
        }
        let mut word = vec![0usize; p];
        for code in 0..count {
            let mut c = code;
            for slot in word.iter_mut().rev() {
                *slot = c % b;
                c /= b;
            }
            if is_canonical_primitive(&word) {
                words.push(word.clone());
            }
        }
    }
    let orbits: Result<Vec<Option<PeriodicOrbit>>> = words
        .par_iter()
        .map(|w| orbit_for_word(map, phi, w))
        .collect();
    Ok(orbits?.into_iter().flatten().collect())
}

/// Largest periodic-orbit average of φ up to max_period, with its orbit.
pub fn periodic_orbit_sup(
    map: &IntervalMap,
    phi: &Potential,
    max_period: usize,
) -> Result<(f64, PeriodicOrbit)> {
    let best = periodic_orbits(map, phi, max_period)?
        .into_iter()
        .reduce(|a, b| if b.average > a.average { b } else { a })
        .ok_or_else(|| Error::Construction("no periodic orbit avoided the singular set".into()))?;
    Ok((best.average, best))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Hyperbolic,
    NotHyperbolic,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessSource {
    PeriodicOrbit,
    GridPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub source: WitnessSource,
    /// The periodic orbit, or the single grid start point.
    pub points: Vec<f64>,
    pub average: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityReport {
    pub sup_birkhoff: f64,
    pub grid_sup: f64,
    pub periodic_sup: Option<f64>,
    /// Operator estimate (headline).
    pub pressure: PressureEstimate,
    /// Tree estimate used as a cross-check, when it fit in the budget.
    pub tree_pressure: Option<PressureEstimate>,
    pub method_gap: Option<f64>,
    pub margin: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Orbits within the threshold of the sup, best first.
    pub witnesses: Vec<Witness>,
    pub n_used: usize,
    pub grid_used: usize,
    pub diagnostics: Vec<String>,
}

const MAX_WITNESSES: usize = 8;

/// max over a uniform grid (endpoints included) of (1/n) S_n(φ), with the
/// maximizing start point. Grid points whose orbit meets a singularity are skipped.
fn grid_sup(
    map: &IntervalMap,
    phi: &Potential,
    n: usize,
    grid: usize,
) -> Result<(f64, f64, usize)> {
    let (lo, hi) = map.ambient();
    let step = (hi - lo) / (grid - 1) as f64;
    let values: Result<Vec<Option<(f64, f64)>>> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let x = if i + 1 == grid {
                hi
            } else {
                lo + i as f64 * step
            };
            match birkhoff_sum(map, phi, x, n) {
                Ok(s) => Ok(Some((s / n as f64, x))),
                Err(Error::Singularity { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let values = values?;
    let skipped = values.iter().filter(|v| v.is_none()).count();
    let (v, x) = values
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .ok_or_else(|| Error::Construction("every grid orbit met a singularity".into()))?;
    Ok((v, x, skipped))
}

/// Compares the pressure with sup (1/n) S_n(φ) over grid orbits and periodic
/// orbits. Hyperbolic when the margin exceeds the threshold; not hyperbolic
/// when it does not and some periodic orbit average comes within the
/// threshold of the pressure.
pub fn hyperbolicity_check(
    map: &IntervalMap,
    phi: &Potential,
    depth: usize,
    k_cells: usize,
    max_period: usize,
    grid: usize,
) -> Result<HyperbolicityReport> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be >= 1".into()));
    }
    if grid < 2 {
        return Err(Error::Precondition("grid needs at least 2 points".into()));
    }
    check_regular(phi, map)?;
    let tau = TOL.hyperbolicity_threshold;
    let mut diagnostics = Vec::new();

    let (grid_value, grid_point, skipped) = grid_sup(map, phi, depth, grid)?;
    if skipped > 0 {
        diagnostics.push(format!(
            "{skipped} grid orbits met a singularity and were skipped"
        ));
    }
    let orbits = match periodic_orbits(map, phi, max_period) {
        Ok(o) => o,
        Err(Error::Unsupported(msg)) => {
            diagnostics.push(msg);
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let periodic_sup = orbits.iter().map(|o| o.average).reduce(f64::max);
    let sup_birkhoff = periodic_sup.map_or(grid_value, |p| p.max(grid_value));

    let pressure = pressure_operator(map, phi, k_cells)?;
    let tree = match build_tree(
        map,
        phi,
        0.5 * (map.ambient().0 + map.ambient().1),
        depth.max(4),
    ) {
        Ok(t) => Some(tree_pressure(&t)?),
        Err(Error::Budget { budget, .. }) => {
            diagnostics.push(format!(
                "tree cross-check skipped: {budget} node budget exceeded"
            ));
            None
        }
        Err(e) => return Err(e),
    };
    let method_gap = tree.as_ref().map(|t| (t.value - pressure.value).abs());
    let margin = pressure.value - sup_birkhoff;

    let mut witnesses: Vec<Witness> = orbits
        .iter()
        .filter(|o| o.average >= sup_birkhoff - tau)
        .map(|o| Witness {
            source: WitnessSource::PeriodicOrbit,
            points: o.points.clone(),
            average: o.average,
        })
        .collect();
    witnesses.sort_by(|a, b| {
        b.average
            .total_cmp(&a.average)
            .then(a.points.len().cmp(&b.points.len()))
    });
    witnesses.truncate(MAX_WITNESSES);
    if grid_value >= sup_birkhoff - tau {
        witnesses.push(Witness {
            source: WitnessSource::GridPoint,
            points: vec![grid_point],
            average: grid_value,
        });
    }

    let periodic_attains = orbits.iter().any(|o| o.average >= pressure.value - tau);
    let verdict = match method_gap {
        Some(gap) if gap > TOL.method_disagreement => {
            diagnostics.push(format!(
                "operator and tree pressures disagree by {gap:.3e} (> {})",
                TOL.method_disagreement
            ));
            Verdict::Inconclusive
        }
        _ if margin > tau => Verdict::Hyperbolic,
        _ if margin < tau && periodic_attains => Verdict::NotHyperbolic,
        _ => Verdict::Inconclusive,
    };
    if pressure
        .coarse_value
        .is_some_and(|c| (c - pressure.value).abs() > tau)
    {
        diagnostics
            .push("operator pressure moved by more than the threshold between k/2 and k".into());
    }

    Ok(HyperbolicityReport {
        sup_birkhoff,
        grid_sup: grid_value,
        periodic_sup,
        pressure,
        tree_pressure: tree,
        method_gap,
        margin,
        threshold: tau,
        verdict,
        witnesses,
        n_used: depth,
        grid_used: grid,
        diagnostics,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovBounds {
    pub chi_inf: f64,
    pub chi_sup: f64,
    pub inf_orbit: PeriodicOrbit,
    pub sup_orbit: PeriodicOrbit,
    /// ∫ log|Df| against the operator equilibrium state of φ ≡ 0.
    pub equilibrium_integral: f64,
}

/// Extreme periodic-orbit averages of log|Df| up to max_period.
pub fn lyapunov_bounds(
    map: &IntervalMap,
    max_period: usize,
    k_cells: usize,
) -> Result<LyapunovBounds> {
    if !map.critical_points().is_empty() {
        return Err(Error::Unsupported(format!(
            "{} has critical points {:?}; Lyapunov bounds need a map without them",
            map.label(),
            map.critical_points()
        )));
    }
    let log_df = Potential::geometric(map, -1.0, 1.0)?.with_label("log|Df|");
    let orbits = periodic_orbits(map, &log_df, max_period)?;
    let pick = |better: fn(f64, f64) -> bool| {
        orbits
            .iter()
            .cloned()
            .reduce(|a, b| if better(b.average, a.average) { b } else { a })
            .ok_or_else(|| Error::Construction("no periodic orbits found".into()))
    };
    let inf_orbit = pick(|a, b| a < b)?;
    let sup_orbit = pick(|a, b| a > b)?;

    let zero = Potential::constant(0.0);
    let op = build_operator(map, &zero, k_cells)?;
    let eig = leading_eigen(&op)?;
    let eq = equilibrium_measure(&op, &eig);
    let mut integral = 0.0;
    for (w, &x) in eq.weights.iter().zip(&op.nodes) {
        integral += w * log_df.value(x)?;
    }
    Ok(LyapunovBounds {
        chi_inf: inf_orbit.average,
        chi_sup: sup_orbit.average,
        inf_orbit,
        sup_orbit,
        equilibrium_integral: integral,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureCurve {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    /// Central differences; one-sided at the ends.
    pub dp: Vec<f64>,
    /// Three-point second derivative; the ends repeat their neighbour.
    pub d2p: Vec<f64>,
    /// Smallest undivided second difference.
    pub min_second_difference: f64,
    pub convex: bool,
    pub estimates: Vec<PressureEstimate>,
}

/// P̂(φ + tψ) by the operator method at each t. The preimage skeleton is
/// shared and the grid points run in parallel.
pub fn pressure_scan(
    map: &IntervalMap,
    phi: &Potential,
    psi: &Potential,
    t_grid: &[f64],
    k_cells: usize,
) -> Result<PressureCurve> {
    if t_grid.len() < 5 {
        return Err(Error::Precondition(format!(
            "pressure scan needs >= 5 points, got {}",
            t_grid.len()
        )));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition(
            "t grid must be strictly increasing".into(),
        ));
    }
    let skeleton = OperatorSkeleton::new(map, k_cells)?;
    let estimates: Result<Vec<PressureEstimate>> = t_grid
        .par_iter()
        .map(|&t| {
            let combined = phi.plus_scaled(psi, t);
            check_regular(&combined, map)?;
            let eig = leading_eigen(&skeleton.weighted(&combined)?)?;
            Ok(estimate_from(&eig, k_cells, None))
        })
        .collect();
    let estimates = estimates?;
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let (dp, d2p, raw) = differences(t_grid, &values);
    let min_second_difference = raw.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PressureCurve {
        t: t_grid.to_vec(),
        values,
        dp,
        d2p,
        min_second_difference,
        convex: min_second_difference >= TOL.convexity,
        estimates,
    })
}

/// (first derivative, second derivative, undivided second differences).
fn differences(t: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = t.len();
    let mut dp = vec![0.0; n];
    let mut d2p = vec![0.0; n];
    let mut raw = Vec::with_capacity(n - 2);
    dp[0] = (p[1] - p[0]) / (t[1] - t[0]);
    dp[n - 1] = (p[n - 1] - p[n - 2]) / (t[n - 1] - t[n - 2]);
    for i in 1..n - 1 {
        let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        dp[i] = (p[i + 1] - p[i - 1]) / (h1 + h2);
        let second = 2.0 * ((p[i + 1] - p[i]) / h2 - (p[i] - p[i - 1]) / h1) / (h1 + h2);
        d2p[i] = second;
        raw.push(second * h1 * h2);
    }
    d2p[0] = d2p[1];
    d2p[n - 1] = d2p[n - 2];
    (dp, d2p, raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kink {
    pub t: f64,
    pub left_slope: f64,
    pub right_slope: f64,
}

const KINK_SIDE: usize = 3;

/// Points where least-squares slopes over the three grid points strictly to
/// the left and strictly to the right differ by more than the kink threshold.
/// Each run of adjacent flagged points collapses to its largest jump (the
/// middle one on ties).
pub fn kink_detect(curve: &PressureCurve) -> Result<Vec<Kink>> {
    let n = curve.t.len();
    if n < 2 * KINK_SIDE + 1 {
        return Err(Error::Precondition(format!(
            "kink detection needs >= 7 points, got {n}"
        )));
    }
    let slope = |a: usize, b: usize| {
        fit_line(&curve.t[a..=b], &curve.values[a..=b])
            .expect("three distinct abscissae")
            .slope
    };
    let mut runs: Vec<Vec<(usize, Kink)>> = Vec::new();
    for i in KINK_SIDE..n - KINK_SIDE {
        let left = slope(i - KINK_SIDE, i - 1);
        let right = slope(i + 1, i + KINK_SIDE);
        if (left - right).abs() <= TOL.kink_jump {
            continue;
        }
        let kink = Kink {
            t: curve.t[i],
            left_slope: left,
            right_slope: right,
        };
        match runs.last_mut() {
            Some(run) if run.last().is_some_and(|(j, _)| j + 1 == i) => run.push((i, kink)),
            _ => runs.push(vec![(i, kink)]),
        }
    }
    let jump = |k: &Kink| (k.left_slope - k.right_slope).abs();
    Ok(runs
        .into_iter()
        .map(|run| {
            let best = run.iter().map(|(_, k)| jump(k)).fold(0.0, f64::max);
            let top: Vec<Kink> = run
                .into_iter()
                .map(|(_, k)| k)
                .filter(|k| jump(k) >= best * (1.0 - 1e-9))
                .collect();
            top[(top.len() - 1) / 2]
        })
        .collect())
}
