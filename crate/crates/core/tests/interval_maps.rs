use proptest::prelude::*;
use thermo_core::{IntervalMap, Orientation};

fn maps() -> Vec<IntervalMap> {
    vec![
        IntervalMap::builtin("doubling").unwrap(),
        IntervalMap::builtin("tent").unwrap(),
        IntervalMap::builtin("logistic").unwrap(),
        IntervalMap::builtin("chebyshev").unwrap(),
        IntervalMap::intermittent(0.5).unwrap(),
        IntervalMap::intermittent(0.2).unwrap(),
    ]
}

proptest! {
    #[test]
    fn round_trip(u in 0.0f64..=1.0) {
        for map in maps() {
            for b in map.branches() {
                let (lo, hi) = b.image();
                let y = lo + u * (hi - lo);
                let x = b.inverse(y).unwrap();
                prop_assert!((b.forward(x) - y).abs() <= 1e-10, "{} y={y}", map.label());
                let (dlo, dhi) = b.domain();
                prop_assert!(x >= dlo && x <= dhi);
            }
        }
    }

    #[test]
    fn interior_preimage_count(u in 0.001f64..0.999) {
        for name in ["doubling", "tent", "logistic"] {
            let m = IntervalMap::builtin(name).unwrap();
            prop_assert_eq!(m.preimages(u).len(), 2, "{}", name);
        }
        prop_assert_eq!(IntervalMap::builtin("chebyshev").unwrap().preimages(2.0 * u - 1.0).len(), 3);
        prop_assert_eq!(IntervalMap::intermittent(0.5).unwrap().preimages(u).len(), 2);
    }

    #[test]
    fn inverses_preserve_order(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let (y1, y2) = if a < b { (a, b) } else { (b, a) };
        for map in maps() {
            let (lo, hi) = map.ambient();
            let (y1, y2) = (lo + y1 * (hi - lo), lo + y2 * (hi - lo));
            for br in map.branches() {
                let (x1, x2) = (br.inverse(y1).unwrap(), br.inverse(y2).unwrap());
                match br.orientation() {
                    Orientation::Increasing => prop_assert!(x1 <= x2),
                    Orientation::Decreasing => prop_assert!(x1 >= x2),
                }
            }
        }
    }
}

#[test]
fn tent_apex_has_single_preimage() {
    let t = IntervalMap::builtin("tent").unwrap();
    assert_eq!(t.preimages(1.0), vec![0.5]);
}

#[test]
fn periodic_orbits_repeat() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let orbit = d.iterate(1.0 / 3.0, 6).unwrap();
    for (k, x) in orbit.iter().enumerate() {
        let expected = if k % 2 == 0 { 1.0 / 3.0 } else { 2.0 / 3.0 };
        assert!((x - expected).abs() < 1e-12);
    }
    let f = IntervalMap::intermittent(0.5).unwrap();
    assert!(f.iterate(0.0, 50).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn derivative_of_intermittent_map() {
    let f = IntervalMap::intermittent(0.5).unwrap();
    assert_eq!(f.derivative(0.0).unwrap(), 1.0);
    assert!(f.critical_points().is_empty());
    let l = IntervalMap::builtin("logistic").unwrap();
    assert_eq!(l.critical_points(), &[0.5]);
}
