//! Pull-backs of intervals, the polynomial shrinking fit and bounded
//! distortion diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::{IntervalMap, Side};
use crate::numerics::fit_line;
use crate::potential::{birkhoff_sum_sided, Potential};
use crate::tolerance::DEFAULT as TOL;

pub const DEFAULT_COMPONENT_BUDGET: usize = 1 << 20;

/// A connected component of f⁻ⁿ(target).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullBack {
    pub level: usize,
    pub lo: f64,
    pub hi: f64,
    /// Branch itinerary: `word[j]` is the branch containing fʲ(W).
    pub word: Vec<usize>,
    /// fⁿ maps the pull-back onto the whole target.
    pub surjective: bool,
}

impl PullBack {
    pub fn diameter(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Applies the branches named by `word` in order, without cut conventions.
pub fn follow_word(map: &IntervalMap, x: f64, word: &[usize]) -> Vec<f64> {
    let mut orbit = Vec::with_capacity(word.len() + 1);
    let mut cur = x;
    orbit.push(cur);
    for &b in word {
        let (lo, hi) = map.ambient();
        cur = map.branches()[b].forward(cur).clamp(lo, hi);
        orbit.push(cur);
    }
    orbit
}

/// Inverts fⁿ along `word` (innermost branch applied last in the forward direction first).
pub fn invert_word(map: &IntervalMap, y: f64, word: &[usize]) -> Option<f64> {
    let mut cur = y;
    for &b in word.iter().rev() {
        cur = map.branches()[b].inverse(cur)?;
    }
    Some(cur)
}

fn validate_target(map: &IntervalMap, target: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = target;
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty target interval ({lo}, {hi})")));
    }
    if !map.contains(lo) || !map.contains(hi) {
        return Err(Error::Domain(format!(
            "target ({lo}, {hi}) is not inside the ambient interval {:?}",
            map.ambient()
        )));
    }
    let (a, b) = map.ambient();
    Ok((lo.max(a), hi.min(b)))
}

/// Monotone pieces of f⁻ⁿ(target) for every level 1..=n. Adjacent pieces are
/// not merged, so fⁿ is monotone on each piece. `levels[k-1]` is level k,
/// sorted by lower endpoint.
pub fn monotone_pullbacks(
    map: &IntervalMap,
    target: (f64, f64),
    n: usize,
    budget: usize,
) -> Result<Vec<Vec<PullBack>>> {
    if n == 0 {
        return Err(Error::Precondition("pull-back level must be >= 1".into()));
    }
    let (tlo, thi) = validate_target(map, target)?;
    let tol = TOL.structural;
    let mut levels: Vec<Vec<PullBack>> = Vec::with_capacity(n);
    let mut current = vec![PullBack {
        level: 0,
        lo: tlo,
        hi: thi,
        word: Vec::new(),
        surjective: true,
    }];
    for k in 1..=n {
        let mut next = Vec::new();
        for piece in &current {
            for (b, branch) in map.branches().iter().enumerate() {
                let (ilo, ihi) = branch.image();
                let lo = piece.lo.max(ilo);
                let hi = piece.hi.min(ihi);
                if hi - lo <= tol {
                    continue;
                }
                let clipped = lo > piece.lo + tol || hi < piece.hi - tol;
                let (Some(x1), Some(x2)) = (branch.inverse(lo), branch.inverse(hi)) else {
                    continue;
                };
                let mut word = Vec::with_capacity(k);
                word.push(b);
                word.extend_from_slice(&piece.word);
                next.push(PullBack {
                    level: k,
                    lo: x1.min(x2),
                    hi: x1.max(x2),
                    word,
                    surjective: piece.surjective && !clipped,
                });
            }
            if next.len() > budget {
                return Err(Error::Budget {
                    budget,
                    failed_level: k,
                    deepest_level: k - 1,
                });
            }
        }
        next.sort_by(|a, b| a.lo.total_cmp(&b.lo).then_with(|| a.word.cmp(&b.word)));
        levels.push(next.clone());
        current = next;
    }
    Ok(levels)
}

/// Coalesces adjacent monotone pieces that share an endpoint at which fⁿ is
/// continuous (turning points); pieces meeting at a jump stay separate.
fn merge_components(map: &IntervalMap, pieces: &[PullBack]) -> Vec<PullBack> {
    let mut out: Vec<PullBack> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if let Some(last) = out.last_mut() {
            if (p.lo - last.hi).abs() <= TOL.structural {
                let left_image = *follow_word(map, last.hi, &last.word).last().unwrap();
                let right_image = *follow_word(map, p.lo, &p.word).last().unwrap();
                if (left_image - right_image).abs() <= TOL.merge {
                    last.hi = last.hi.max(p.hi);
                    last.surjective |= p.surjective;
                    continue;
                }
            }
        }
        out.push(p.clone());
    }
    out
}

/// Connected components of f⁻ⁿ(target), sorted by lower endpoint. The word of
/// a merged component is that of its leftmost piece.
pub fn interval_pullbacks(
    map: &IntervalMap,
    target: (f64, f64),
    n: usize,
) -> Result<Vec<PullBack>> {
    interval_pullbacks_with_budget(map, target, n, DEFAULT_COMPONENT_BUDGET)
}

pub fn interval_pullbacks_with_budget(
    map: &IntervalMap,
    target: (f64, f64),
    n: usize,
    budget: usize,
) -> Result<Vec<PullBack>> {
    let levels = monotone_pullbacks(map, target, n, budget)?;
    Ok(merge_components(map, &levels[n - 1]))
}

/// Components for every level 1..=n, computed in one pass.
pub fn interval_pullbacks_by_level(
    map: &IntervalMap,
    target: (f64, f64),
    n: usize,
    budget: usize,
) -> Result<Vec<Vec<PullBack>>> {
    let levels = monotone_pullbacks(map, target, n, budget)?;
    Ok(levels.iter().map(|l| merge_components(map, l)).collect())
}

fn ball(map: &IntervalMap, center: f64, rho: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {rho}")));
    }
    if !map.contains(center) {
        return Err(Error::Domain(format!(
            "center {center} outside the ambient interval"
        )));
    }
    let (a, b) = map.ambient();
    Ok(((center - rho).max(a), (center + rho).min(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkingFit {
    pub beta_hat: f64,
    pub c_hat: f64,
    /// (n, largest pull-back diameter at level n) for n = 1..=n_max.
    pub max_diams: Vec<(usize, f64)>,
    /// log max_diam is better fitted by a line in n than by a line in log n.
    pub super_polynomial: bool,
    pub power_rms: f64,
    pub exponential_rms: f64,
    /// Slope of log max_diam against n.
    pub exponential_rate: f64,
}

/// Fits max diam(W) ≈ C n^(−β) over the deepest half of levels 1..=n_max for
/// the pull-backs of B(center, ρ).
pub fn shrinking_fit(
    map: &IntervalMap,
    center: f64,
    rho: f64,
    n_max: usize,
) -> Result<ShrinkingFit> {
    if n_max < 6 {
        return Err(Error::Precondition(format!(
            "shrinking fit needs n_max >= 6, got {n_max}"
        )));
    }
    let target = ball(map, center, rho)?;
    let levels = interval_pullbacks_by_level(map, target, n_max, DEFAULT_COMPONENT_BUDGET)?;
    let max_diams: Vec<(usize, f64)> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| (i + 1, l.iter().map(PullBack::diameter).fold(0.0, f64::max)))
        .collect();
    let tail: Vec<&(usize, f64)> = max_diams[n_max - n_max / 2 - 1..]
        .iter()
        .filter(|(_, d)| *d > 0.0)
        .collect();
    if tail.len() < 2 {
        return Err(Error::Construction(
            "too few non-degenerate levels to fit".into(),
        ));
    }
    let ln_d: Vec<f64> = tail.iter().map(|(_, d)| d.ln()).collect();
    let ln_n: Vec<f64> = tail.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ns: Vec<f64> = tail.iter().map(|(n, _)| *n as f64).collect();
    let power = fit_line(&ln_n, &ln_d).expect("distinct levels");
    let expo = fit_line(&ns, &ln_d).expect("distinct levels");
    Ok(ShrinkingFit {
        beta_hat: -power.slope,
        c_hat: power.intercept.exp(),
        max_diams,
        super_polynomial: expo.slope < 0.0 && expo.rms < power.rms,
        power_rms: power.rms,
        exponential_rms: expo.rms,
        exponential_rate: expo.slope,
    })
}

/// C₁ = C_* · C₀^α · ζ(βα), the bounded-distortion constant. Diverges for βα ≤ 1.
pub fn distortion_constant(c_star: f64, c0: f64, alpha: f64, beta: f64) -> Result<f64> {
    let s = beta * alpha;
    if !(s > 1.0) {
        return Err(Error::Divergence(format!(
            "sum of m^(-beta*alpha) diverges for beta*alpha = {s} <= 1"
        )));
    }
    if c_star == 0.0 {
        return Ok(0.0);
    }
    Ok(c_star * c0.powf(alpha) * zeta(s))
}

/// Riemann ζ(s), s > 1: partial sum to N plus an Euler–Maclaurin tail.
pub fn zeta(s: f64) -> f64 {
    const N: usize = 2000;
    let partial: f64 = (1..=N).rev().map(|m| (m as f64).powf(-s)).sum();
    let n = N as f64;
    // Σ_{m>N} m^{-s} = ∫_N^∞ x^{-s} dx − N^{-s}/2 + s N^{-s-1}/12 − s(s+1)(s+2) N^{-s-3}/720 + …
    let tail = n.powf(1.0 - s) / (s - 1.0) - 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    partial + tail
}

/// max over pull-backs W of B(center, ρ) at levels 1..=n of the spread of
/// S_k(φ) over 32 points of W (endpoints included).
pub fn empirical_distortion(
    map: &IntervalMap,
    phi: &Potential,
    center: f64,
    rho: f64,
    n: usize,
) -> Result<f64> {
    const SAMPLES: usize = 32;
    let target = ball(map, center, rho)?;
    let levels = interval_pullbacks_by_level(map, target, n, DEFAULT_COMPONENT_BUDGET)?;
    let mut worst: f64 = 0.0;
    for (i, level) in levels.iter().enumerate() {
        let k = i + 1;
        for w in level {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for j in 0..SAMPLES {
                let x = w.lo + (w.hi - w.lo) * j as f64 / (SAMPLES - 1) as f64;
                let side = if j == SAMPLES - 1 {
                    Side::Left
                } else {
                    Side::Right
                };
                let s = birkhoff_sum_sided(map, phi, x, side, k)?;
                lo = lo.min(s);
                hi = hi.max(s);
            }
            worst = worst.max(hi - lo);
        }
    }
    Ok(worst)
}
