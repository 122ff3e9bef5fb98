use proptest::prelude::*;
use thermo_core::analysis::periodic_orbits;
use thermo_core::potential::{birkhoff_sum, cohomology_reduce};
use thermo_core::{IntervalMap, Potential};

proptest! {
    #[test]
    fn additivity(x in 0.0f64..1.0, m in 1usize..=10, n in 1usize..=10) {
        let d = IntervalMap::builtin("doubling").unwrap();
        let phi = Potential::cosine(1.0, 1.0);
        let whole = birkhoff_sum(&d, &phi, x, m + n).unwrap();
        let fm = d.iterate(x, m).unwrap()[m];
        let split = birkhoff_sum(&d, &phi, x, m).unwrap() + birkhoff_sum(&d, &phi, fm, n).unwrap();
        prop_assert!((whole - split).abs() <= 1e-9);
    }
}

#[test]
fn cohomologous_potentials_share_periodic_averages() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let phi = Potential::cosine(1.0, 1.0);
    for n in [2, 3, 4] {
        let (tilde, _) = cohomology_reduce(&d, &phi, n).unwrap();
        let a = periodic_orbits(&d, &phi, 7).unwrap();
        let b = periodic_orbits(&d, &tilde, 7).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.word, q.word);
            assert!(
                (p.average - q.average).abs() <= 1e-9,
                "{:?}: {} vs {}",
                p.word,
                p.average,
                q.average
            );
        }
    }
}

#[test]
fn coboundary_identity_on_a_grid() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let phi = Potential::cosine(1.0, 1.0);
    let (tilde, h) = cohomology_reduce(&d, &phi, 4).unwrap();
    for i in 0..1000 {
        let x = (i as f64 + 0.5) / 1000.0;
        let fx = d.evaluate(x).unwrap();
        let rhs = phi.value(x).unwrap() + h.value(x).unwrap() - h.value(fx).unwrap();
        assert!((tilde.value(x).unwrap() - rhs).abs() <= 1e-9);
    }
}

#[test]
fn fixed_point_sums_are_multiples() {
    let d = IntervalMap::builtin("doubling").unwrap();
    let phi = Potential::cosine(0.375, 1.0);
    for n in 1..=20 {
        assert_eq!(birkhoff_sum(&d, &phi, 0.0, n).unwrap(), n as f64 * 0.375);
    }
    let f = IntervalMap::intermittent(0.5).unwrap();
    let g = Potential::geometric(&f, 1.0, 0.5).unwrap();
    for n in 1..=20 {
        assert_eq!(birkhoff_sum(&f, &g, 0.0, n).unwrap(), 0.0);
    }
}
