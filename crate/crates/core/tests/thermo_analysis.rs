use thermo_core::analysis::*;
use thermo_core::{IntervalMap, Potential};

fn t_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

#[test]
fn periodic_sup_matches_grid_sup() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let phi = Potential::cosine(1.0, 1.0);
    let r = hyperbolicity_check(&d, &phi, 14, 256, 10, 513).unwrap();
    let periodic = r.periodic_sup.unwrap();
    assert!(
        (periodic - r.grid_sup).abs() <= 0.05,
        "{periodic} vs {}",
        r.grid_sup
    );
}

#[test]
fn scans_are_convex() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let f = IntervalMap::intermittent(0.5).unwrap();
    let zero = Potential::constant(0.0);
    let curves = [
        pressure_scan(
            &d,
            &zero,
            &Potential::cosine(1.0, 1.0),
            &t_grid(-2.0, 2.0, 0.1),
            256,
        )
        .unwrap(),
        pressure_scan(
            &f,
            &zero,
            &Potential::geometric(&f, 1.0, 0.5).unwrap(),
            &t_grid(0.0, 1.6, 0.05),
            1024,
        )
        .unwrap(),
        pressure_scan(
            &f,
            &Potential::cosine(0.5, 1.0),
            &Potential::cosine(1.0, 2.0),
            &t_grid(-1.0, 1.0, 0.1),
            512,
        )
        .unwrap(),
    ];
    for c in &curves {
        assert!(
            c.convex && c.min_second_difference >= -0.01,
            "{}",
            c.min_second_difference
        );
    }
}

#[test]
fn margins_shift_with_constants() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let f = IntervalMap::intermittent(0.5).unwrap();
    for (map, phi) in [
        (&d, Potential::cosine(1.0, 1.0)),
        (&f, Potential::cosine(1.0, 1.0)),
        (&f, Potential::geometric(&f, 1.0, 0.5).unwrap()),
    ] {
        let base = hyperbolicity_check(map, &phi, 10, 256, 4, 65).unwrap();
        for c in [-0.7, 1.9] {
            let shifted = hyperbolicity_check(map, &phi.shifted(c), 10, 256, 4, 65).unwrap();
            assert!(
                (base.margin - shifted.margin).abs() <= 1e-9,
                "{} {c}",
                phi.label()
            );
            assert_eq!(base.verdict, shifted.verdict);
        }
    }
}

/// P̂(t) against the best periodic-orbit average of φ + tψ.
fn variational_excess(
    map: &IntervalMap,
    phi: &Potential,
    psi: &Potential,
    grid: &[f64],
    k: usize,
) -> Vec<(f64, f64)> {
    let curve = pressure_scan(map, phi, psi, grid, k).unwrap();
    grid.iter()
        .zip(&curve.values)
        .map(|(&t, &p)| {
            let (best, _) = periodic_orbit_sup(map, &phi.plus_scaled(psi, t), 6).unwrap();
            (t, best - p)
        })
        .collect()
}

#[test]
fn scans_respect_the_variational_inequality() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let f = IntervalMap::intermittent(0.5).unwrap();
    let zero = Potential::constant(0.0);
    let cos = Potential::cosine(1.0, 1.0);
    for (t, excess) in variational_excess(&d, &zero, &cos, &t_grid(-2.0, 2.0, 0.25), 512) {
        assert!(excess <= 0.0, "doubling t = {t}: {excess}");
    }
    for (t, excess) in variational_excess(&f, &zero, &cos, &t_grid(-2.0, 2.0, 0.25), 1024) {
        assert!(excess <= 0.0, "intermittent t = {t}: {excess}");
    }
    let geo = Potential::geometric(&f, 1.0, 0.5).unwrap();
    for (t, excess) in variational_excess(&f, &zero, &geo, &t_grid(0.0, 1.0, 0.1), 1024) {
        assert!(excess <= 0.01, "geometric t = {t}: {excess}");
    }
}

/// Beyond the phase transition the uniform grid cannot resolve the neutral
/// point: P̂(t) follows −t log Df at the first node instead of 0. The deficit
/// is bounded by that slope.
#[test]
fn geometric_scan_deficit_past_transition_is_first_cell_artifact() {
    let f = IntervalMap::intermittent(0.5).unwrap();
    let geo = Potential::geometric(&f, 1.0, 0.5).unwrap();
    let k = 1024;
    let first_node = 0.5 / k as f64;
    let slope = f.log_derivative(first_node).unwrap();
    for (t, excess) in variational_excess(
        &f,
        &Potential::constant(0.0),
        &geo,
        &t_grid(1.1, 1.6, 0.1),
        k,
    ) {
        assert!(
            excess > 0.0 && excess <= t * slope + 1e-3,
            "t = {t}: {excess} vs {}",
            t * slope
        );
    }
}

#[test]
fn verdicts() {
    let f = IntervalMap::intermittent(0.5).unwrap();
    let geo = Potential::geometric(&f, 1.0, 0.5).unwrap();
    let r = hyperbolicity_check(&f, &geo, 14, 1024, 5, 129).unwrap();
    assert_eq!(r.verdict, Verdict::NotHyperbolic);
    assert_eq!(r.witnesses[0].points, vec![0.0]);
    let r = hyperbolicity_check(&f, &Potential::cosine(1.0, 1.0), 14, 1024, 5, 129).unwrap();
    assert_eq!(r.verdict, Verdict::Hyperbolic);
    assert!(r.margin > 0.05);
}

#[test]
fn logistic_needs_grid_only_sup() {
    // not full-branch is fine for the grid; logistic happens to be full-branch
    let l = IntervalMap::builtin("logistic").unwrap();
    let r = hyperbolicity_check(&l, &Potential::cosine(1.0, 1.0), 10, 256, 4, 65).unwrap();
    assert!(r.periodic_sup.is_some());
    assert!(r.margin > 0.0);
}
