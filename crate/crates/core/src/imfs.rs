//! Iterated multivalued function systems (IMFS) generated by an interval map:
//! inverse restrictions φ_l = (f^{m_l}|W_l)⁻¹ onto a base interval B₀, a
//! freeness check on the images of a base point, and the pressure lower bound
//! from the generating function Φ(s) = Σ_l e^{−D} e^{m_l I} s^{m_l}.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::IntervalMap;
use crate::numerics::log_sum_exp;
use crate::potential::Potential;
use crate::pullback::{
    follow_word, invert_word, monotone_pullbacks, PullBack, DEFAULT_COMPONENT_BUDGET,
};
use crate::tolerance::DEFAULT as TOL;

const SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImfsElement {
    pub time: usize,
    pub b0: (f64, f64),
    pub pullback: PullBack,
    /// min over samples of S_m(φ) on the pull-back.
    pub birkhoff_min: f64,
}

impl ImfsElement {
    /// The element whose pull-back is the monotone piece with itinerary
    /// `word`; fails unless that piece lies in B₀ and maps onto it.
    pub fn from_word(
        map: &IntervalMap,
        phi: &Potential,
        b0: (f64, f64),
        word: Vec<usize>,
    ) -> Result<Self> {
        if word.is_empty() || word.iter().any(|&b| b >= map.branch_count()) {
            return Err(Error::Construction(format!("invalid branch word {word:?}")));
        }
        let (Some(a), Some(b)) = (invert_word(map, b0.0, &word), invert_word(map, b0.1, &word))
        else {
            return Err(Error::Construction(format!(
                "B0 is not in the image of word {word:?}"
            )));
        };
        let pullback = PullBack {
            level: word.len(),
            lo: a.min(b),
            hi: a.max(b),
            word,
            surjective: true,
        };
        element_from_pullback(map, phi, b0, pullback)
    }

    /// φ_l(y): the point of W_l mapped to y by f^{m_l}, if any.
    pub fn inverse(&self, map: &IntervalMap, y: f64) -> Option<f64> {
        if y < self.b0.0 - TOL.freeness || y > self.b0.1 + TOL.freeness {
            return None;
        }
        invert_word(map, y.clamp(self.b0.0, self.b0.1), &self.pullback.word)
    }
}

fn element_from_pullback(
    map: &IntervalMap,
    phi: &Potential,
    b0: (f64, f64),
    w: PullBack,
) -> Result<ImfsElement> {
    let tol = TOL.surjective;
    if w.lo < b0.0 - TOL.structural || w.hi > b0.1 + TOL.structural {
        return Err(Error::Construction(format!(
            "pull-back [{}, {}] is not contained in B0 = [{}, {}]",
            w.lo, w.hi, b0.0, b0.1
        )));
    }
    let m = w.word.len();
    let end_lo = follow_word(map, w.lo, &w.word)[m];
    let end_hi = follow_word(map, w.hi, &w.word)[m];
    let (a, b) = (end_lo.min(end_hi), end_lo.max(end_hi));
    if (a - b0.0).abs() > tol || (b - b0.1).abs() > tol {
        return Err(Error::Construction(format!(
            "f^{m} maps [{}, {}] onto [{a}, {b}], not onto B0",
            w.lo, w.hi
        )));
    }
    let mut birkhoff_min = f64::INFINITY;
    for j in 0..SAMPLES {
        let x = w.lo + (w.hi - w.lo) * j as f64 / (SAMPLES - 1) as f64;
        let orbit = follow_word(map, x, &w.word);
        if orbit[m] < b0.0 - tol || orbit[m] > b0.1 + tol {
            return Err(Error::Construction(format!(
                "sample {x} leaves B0 under f^{m}"
            )));
        }
        let mut s = 0.0;
        for &p in &orbit[..m] {
            s += phi.value(p)?;
        }
        birkhoff_min = birkhoff_min.min(s);
    }
    Ok(ImfsElement {
        time: m,
        b0,
        pullback: w,
        birkhoff_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImfsSystem {
    pub elements: Vec<ImfsElement>,
    pub warnings: Vec<String>,
}

/// For each time m, the first (by branch word) level-m pull-back of B₀
/// contained in B₀ and mapped onto it by f^m.
pub fn build_imfs(
    map: &IntervalMap,
    phi: &Potential,
    b0: (f64, f64),
    times: &[usize],
) -> Result<ImfsSystem> {
    if times.is_empty() {
        return Err(Error::Precondition("times must be non-empty".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) || times[0] == 0 {
        return Err(Error::Precondition(
            "times must be positive and strictly increasing".into(),
        ));
    }
    let max_time = *times.last().unwrap();
    let levels = monotone_pullbacks(map, b0, max_time, DEFAULT_COMPONENT_BUDGET)?;
    let mut elements = Vec::new();
    let mut warnings = Vec::new();
    for &m in times {
        let mut candidates: Vec<&PullBack> = levels[m - 1]
            .iter()
            .filter(|w| {
                w.surjective && w.lo >= b0.0 - TOL.structural && w.hi <= b0.1 + TOL.structural
            })
            .collect();
        candidates.sort_by(|a, b| a.word.cmp(&b.word));
        let found = candidates
            .into_iter()
            .find_map(|w| element_from_pullback(map, phi, b0, w.clone()).ok());
        match found {
            Some(e) => elements.push(e),
            None => warnings.push(format!(
                "no surjective pull-back of B0 inside B0 at time {m}"
            )),
        }
    }
    if elements.is_empty() {
        return Err(Error::Construction(format!(
            "no IMFS element found for any time in {times:?}"
        )));
    }
    Ok(ImfsSystem { elements, warnings })
}

/// A word together with the image set of the base point under it.
type WordImage = (Vec<usize>, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreenessReport {
    pub free: bool,
    /// Two distinct equal-time words (1-based element indices) whose images of x₀ meet.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
    pub words_checked: usize,
}

/// Enumerates words l̄ with |l̄| ≤ max_word_len and m_l̄ ≤ time_budget,
/// computes φ_l̄(x₀) = φ_{l₁}∘…∘φ_{l_k}(x₀) as point sets, and reports
/// the first pair of distinct equal-time words whose sets intersect.
pub fn imfs_freeness_check(
    map: &IntervalMap,
    elements: &[ImfsElement],
    x0: f64,
    max_word_len: usize,
    time_budget: usize,
) -> Result<FreenessReport> {
    if elements.is_empty() {
        return Err(Error::Precondition("no IMFS elements".into()));
    }
    let b0 = elements[0].b0;
    if x0 < b0.0 - TOL.structural || x0 > b0.1 + TOL.structural {
        return Err(Error::Precondition(format!("x0 = {x0} is not in B0")));
    }
    // time -> list of (word, image set), in generation order
    let mut by_time: BTreeMap<usize, Vec<WordImage>> = BTreeMap::new();
    let mut stack: Vec<(Vec<usize>, usize, Vec<f64>)> = vec![(Vec::new(), 0, vec![x0])];
    let mut words_checked = 0;
    // depth-first, prepending letters: φ_{l₀ l̄}(x₀) = φ_{l₀}(φ_l̄(x₀))
    while let Some((word, time, points)) = stack.pop() {
        if !word.is_empty() {
            words_checked += 1;
            by_time
                .entry(time)
                .or_default()
                .push((word.clone(), points.clone()));
        }
        if word.len() == max_word_len {
            continue;
        }
        for (idx, e) in elements.iter().enumerate().rev() {
            let t = time + e.time;
            if t > time_budget {
                continue;
            }
            let mut image: Vec<f64> = points.iter().filter_map(|&y| e.inverse(map, y)).collect();
            if image.is_empty() {
                continue;
            }
            image.sort_by(f64::total_cmp);
            image.dedup_by(|a, b| (*a - *b).abs() <= TOL.freeness);
            let mut w = Vec::with_capacity(word.len() + 1);
            w.push(idx + 1);
            w.extend_from_slice(&word);
            stack.push((w, t, image));
        }
    }
    for group in by_time.values() {
        let mut tagged: Vec<(f64, usize)> = group
            .iter()
            .enumerate()
            .flat_map(|(i, (_, pts))| pts.iter().map(move |&p| (p, i)))
            .collect();
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut clash: Option<(usize, usize)> = None;
        for pair in tagged.windows(2) {
            if pair[0].1 != pair[1].1 && (pair[1].0 - pair[0].0).abs() <= TOL.freeness {
                let (a, b) = (pair[0].1.min(pair[1].1), pair[0].1.max(pair[1].1));
                if clash.is_none_or(|c| (a, b) < c) {
                    clash = Some((a, b));
                }
            }
        }
        if let Some((a, b)) = clash {
            return Ok(FreenessReport {
                free: false,
                witness: Some((group[a].0.clone(), group[b].0.clone())),
                words_checked,
            });
        }
    }
    Ok(FreenessReport {
        free: true,
        witness: None,
        words_checked,
    })
}

/// Largest integral I that needs no slack: min over elements of (min S_m φ) / m.
pub fn baseline_integral(elements: &[ImfsElement]) -> f64 {
    elements
        .iter()
        .map(|e| e.birkhoff_min / e.time as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Smallest D ≥ 0 with S_{m_l}(φ) ≥ m_l · I − D on every element.
pub fn slack_constant(elements: &[ImfsElement], target_integral: f64) -> f64 {
    elements
        .iter()
        .map(|e| e.time as f64 * target_integral - e.birkhoff_min)
        .fold(0.0, f64::max)
}

/// −log s₀ where Φ(s₀) = 1 for Φ(s) = Σ_l e^{−D} e^{m_l I} s^{m_l}.
pub fn imfs_pressure_lower_bound(
    elements: &[ImfsElement],
    target_integral: f64,
    d: f64,
) -> Result<f64> {
    let times: Vec<usize> = elements.iter().map(|e| e.time).collect();
    pressure_lower_bound_from_times(&times, target_integral, d)
}

pub fn pressure_lower_bound_from_times(
    times: &[usize],
    target_integral: f64,
    d: f64,
) -> Result<f64> {
    if times.is_empty() || times.contains(&0) {
        return Err(Error::Precondition(
            "need at least one element with positive time".into(),
        ));
    }
    if !(d >= 0.0) || !target_integral.is_finite() {
        return Err(Error::Precondition(format!(
            "need D >= 0 and a finite integral (D = {d})"
        )));
    }
    // log Φ(e^u), strictly increasing in u
    let log_phi = |u: f64| -> f64 {
        let terms: Vec<f64> = times
            .iter()
            .map(|&m| -d + m as f64 * (target_integral + u))
            .collect();
        log_sum_exp(&terms)
    };
    let mut lo = -target_integral - 1.0;
    let mut hi = -target_integral + 1.0;
    let mut width = 1.0;
    while log_phi(lo) >= 0.0 || log_phi(hi) <= 0.0 {
        width *= 2.0;
        lo = -target_integral - width;
        hi = -target_integral + width;
        if width > 1e6 || !log_phi(lo).is_finite() && !log_phi(hi).is_finite() {
            return Err(Error::Infeasible(
                "Φ(s) = 1 has no root in the search window".into(),
            ));
        }
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if log_phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(-0.5 * (lo + hi))
}
