use thermo_core::imfs::*;
use thermo_core::pullback::*;
use thermo_core::tree::{build_tree, tree_pressure};
use thermo_core::{IntervalMap, Potential};

fn maps() -> Vec<IntervalMap> {
    vec![
        IntervalMap::builtin("doubling").unwrap(),
        IntervalMap::builtin("tent").unwrap(),
        IntervalMap::builtin("logistic").unwrap(),
        IntervalMap::intermittent(0.5).unwrap(),
    ]
}

#[test]
fn images_nest_in_exactly_one_component() {
    let target = (0.3, 0.45);
    for map in maps() {
        let levels =
            interval_pullbacks_by_level(&map, target, 7, DEFAULT_COMPONENT_BUDGET).unwrap();
        for n in 1..levels.len() {
            for w in &levels[n] {
                let a = map.evaluate(w.lo + 1e-12).unwrap();
                let b = map.evaluate(w.hi - 1e-12).unwrap();
                let (lo, hi) = (a.min(b), a.max(b));
                let holders = levels[n - 1]
                    .iter()
                    .filter(|v| v.lo <= lo + 1e-9 && hi <= v.hi + 1e-9)
                    .count();
                assert_eq!(holders, 1, "{} level {}: {w:?}", map.label(), n + 1);
            }
        }
    }
}

#[test]
fn midpoints_land_in_the_target() {
    let target = (0.3, 0.45);
    for map in maps() {
        let levels =
            interval_pullbacks_by_level(&map, target, 8, DEFAULT_COMPONENT_BUDGET).unwrap();
        for (i, level) in levels.iter().enumerate() {
            let n = i + 1;
            for w in level {
                let y = map.iterate(w.midpoint(), n).unwrap()[n];
                assert!(
                    y >= target.0 - 1e-9 && y <= target.1 + 1e-9,
                    "{} {w:?} -> {y}",
                    map.label()
                );
            }
        }
    }
}

#[test]
fn distortion_constant_monotonicity() {
    let base = distortion_constant(1.0, 0.5, 0.8, 2.0).unwrap();
    assert!(distortion_constant(1.5, 0.5, 0.8, 2.0).unwrap() > base);
    assert!(distortion_constant(1.0, 0.7, 0.8, 2.0).unwrap() > base);
    assert!(distortion_constant(1.0, 0.5, 0.8, 2.5).unwrap() < base);
    assert!(distortion_constant(1.0, 0.5, 0.8, 1.25).is_err());
    let exact = 2.0 * 1.5 * std::f64::consts::PI.powi(2) / 6.0;
    assert!((distortion_constant(2.0, 1.5, 1.0, 2.0).unwrap() - exact).abs() <= 1e-8);
}

/// Free systems on doubling and tent, their lower bounds below the tree pressure.
#[test]
fn lower_bound_soundness() {
    let words = [vec![0], vec![1, 0]];
    for name in ["doubling", "tent"] {
        let map = IntervalMap::builtin(name).unwrap();
        for phi in [
            Potential::constant(0.0),
            Potential::cosine(1.0, 1.0),
            Potential::constant(-0.5),
        ] {
            let elements: Vec<ImfsElement> = words
                .iter()
                .map(|w| ImfsElement::from_word(&map, &phi, (0.0, 1.0), w.clone()).unwrap())
                .collect();
            let free = imfs_freeness_check(&map, &elements, 0.3, 8, 8).unwrap();
            assert!(free.free, "{name}: {free:?}");
            let integral = baseline_integral(&elements);
            let d = slack_constant(&elements, integral);
            let bound = imfs_pressure_lower_bound(&elements, integral, d).unwrap();
            let tree = tree_pressure(&build_tree(&map, &phi, 0.3, 16).unwrap())
                .unwrap()
                .value;
            assert!(
                bound <= tree + 0.02,
                "{name} {}: {bound} vs {tree}",
                phi.label()
            );
        }
    }
}

#[test]
fn built_systems_are_free_or_flagged() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let phi = Potential::constant(0.0);
    let sys = build_imfs(&d, &phi, (0.25, 0.75), &[2, 3, 4]).unwrap();
    let report = imfs_freeness_check(&d, &sys.elements, 0.5, 6, 8).unwrap();
    let integral = baseline_integral(&sys.elements);
    let bound = imfs_pressure_lower_bound(
        &sys.elements,
        integral,
        slack_constant(&sys.elements, integral),
    )
    .unwrap();
    if report.free {
        assert!(bound <= std::f64::consts::LN_2 + 0.02);
    } else {
        assert!(report.witness.is_some());
    }
}

#[test]
fn golden_ratio_bound() {
    let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    assert!((pressure_lower_bound_from_times(&[1, 2], 0.0, 0.0).unwrap() - golden).abs() <= 1e-9);
}
