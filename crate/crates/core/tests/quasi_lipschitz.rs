mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use bisg::problems::Point;
use bisg::quasi_lipschitz::{
    ql_certify, ql_certify_mixture, ql_chain_rule, ql_compose, ql_from_global_lipschitz,
    ql_from_lipschitz_map, ql_linear_precompose, ql_scale, ql_sum, Certification, MixtureSampler,
    QLConstants, SPHERE_RADII,
};

use common::p;

fn q(d1: f64, d2: f64) -> QLConstants {
    QLConstants::new(d1, d2).unwrap()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[test]
fn identity_is_certified_with_zero_one() {
    let r = ql_certify_mixture(|x: &Point| Ok(x.clone()), q(0.0, 1.0), 3, 1, 10_000).unwrap();
    assert_eq!(r, Certification::Certified);
}

#[test]
fn identity_counterexample_at_four() {
    let pts = vec![p(&[0.5, 0.0]), p(&[4.0, 0.0]), p(&[9.0, 0.0])];
    let r = ql_certify(|x: &Point| Ok(x.clone()), q(1.0, 0.5), pts, 10).unwrap();
    // |F| = 4 > max{1, 0.5 * 4} = 2.
    assert_eq!(r, Certification::Counterexample(p(&[4.0, 0.0])));
}

#[test]
fn sign_in_the_plane() {
    let r = ql_certify_mixture(|x: &Point| Ok(x.map(sign)), ql_from_global_lipschitz(2f64.sqrt()), 2, 3, 10_000)
        .unwrap();
    assert!(r.is_certified());
    // Slightly below sqrt(2) is falsified by points away from the axes.
    let r = ql_certify_mixture(|x: &Point| Ok(x.map(sign)), q(1.4, 0.0), 2, 3, 10_000).unwrap();
    assert!(!r.is_certified());
}

#[test]
fn squared_l1_in_the_plane() {
    let c = ql_chain_rule(2f64.sqrt(), 0.0, q(0.0, 2.0)).unwrap();
    assert_eq!(c.d1, 0.0);
    assert!((c.d2 - 8.0).abs() < 1e-14);
    let f = |x: &Point| {
        let s = x.abs().sum();
        Ok(x.map(|v| 2.0 * s * sign(v)))
    };
    assert!(ql_certify_mixture(f, c, 2, 5, 10_000).unwrap().is_certified());
}

#[test]
fn algebra_examples() {
    assert_eq!(ql_from_lipschitz_map(3.0, 5.0), q(10.0, 6.0));
    assert_eq!(ql_from_lipschitz_map(1.0, 0.0), q(0.0, 2.0));
    assert_eq!(ql_linear_precompose(q(1.0, 2.0), 1.0).unwrap(), q(1.0, 2.0));
    assert_eq!(ql_chain_rule(2.0, 0.0, q(3.0, 0.0)).unwrap(), q(12.0, 0.0));
    assert!(QLConstants::new(-1.0, 0.0).is_err());
    assert!(QLConstants::new(0.0, f64::INFINITY).is_err());
}

#[test]
fn sampler_mixes_spheres_and_gaussian() {
    let pts: Vec<Point> = MixtureSampler::new(4, 9).take(5_000).collect();
    for r in SPHERE_RADII {
        let hits = pts.iter().filter(|x| (x.norm() - r).abs() < 1e-9 * r).count();
        assert!(hits > 700, "radius {r}: {hits}");
    }
    let a: Vec<Point> = MixtureSampler::new(4, 9).take(10).collect();
    assert_eq!(a, pts[..10].to_vec());
}

#[test]
fn zero_samples_rejected() {
    assert!(ql_certify(|x: &Point| Ok(x.clone()), q(0.0, 1.0), Vec::new(), 0).is_err());
}

/// A map together with constants it is known to satisfy.
#[derive(Debug, Clone)]
enum Atom {
    Affine(DMatrix<f64>, Point),
    Sign,
    SquaredL1,
}

impl Atom {
    fn apply(&self, x: &Point) -> Point {
        match self {
            Atom::Affine(m, b) => m * x + b,
            Atom::Sign => x.map(sign),
            Atom::SquaredL1 => {
                let s = x.abs().sum();
                x.map(|v| 2.0 * s * sign(v))
            }
        }
    }

    fn constants(&self, n: usize) -> QLConstants {
        match self {
            Atom::Affine(m, b) => ql_from_lipschitz_map(m.norm(), b.norm()),
            Atom::Sign => ql_from_global_lipschitz((n as f64).sqrt()),
            Atom::SquaredL1 => ql_chain_rule((n as f64).sqrt(), 0.0, q(0.0, 2.0)).unwrap(),
        }
    }
}

const N: usize = 3;

fn atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        (
            proptest::collection::vec(-2.0f64..2.0, N * N),
            proptest::collection::vec(-2.0f64..2.0, N)
        )
            .prop_map(|(m, b)| Atom::Affine(DMatrix::from_vec(N, N, m), p(&b))),
        Just(Atom::Sign),
        Just(Atom::SquaredL1),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn algebra_is_never_falsified(
        a in atom(),
        b in atom(),
        scale in -3.0f64..3.0,
        m in proptest::collection::vec(-2.0f64..2.0, N * N),
        seed in 0u64..1_000,
    ) {
        let (qa, qb) = (a.constants(N), b.constants(N));
        let (fa, fb) = (a.clone(), b.clone());
        let sum = ql_certify_mixture(move |x: &Point| Ok(fa.apply(x) + fb.apply(x)), ql_sum(qa, qb), N, seed, 10_000).unwrap();
        prop_assert!(sum.is_certified());
        let (fa, fb) = (a.clone(), b.clone());
        let comp = ql_certify_mixture(move |x: &Point| Ok(fa.apply(&fb.apply(x))), ql_compose(qa, qb), N, seed, 10_000).unwrap();
        prop_assert!(comp.is_certified());
        let fa = a.clone();
        let scaled = ql_certify_mixture(move |x: &Point| Ok(fa.apply(x) * scale), ql_scale(qa, scale), N, seed, 10_000).unwrap();
        prop_assert!(scaled.is_certified());
        let mat = DMatrix::from_vec(N, N, m);
        let op = mat.clone().svd(false, false).singular_values.max();
        let fa = a.clone();
        let pre = ql_certify_mixture(move |x: &Point| Ok(fa.apply(&(&mat * x))), ql_linear_precompose(qa, op).unwrap(), N, seed, 10_000).unwrap();
        prop_assert!(pre.is_certified());
    }

    #[test]
    fn certification_is_monotone(d1 in 0.0f64..3.0, d2 in 0.0f64..3.0, e1 in 0.0f64..2.0, e2 in 0.0f64..2.0, seed in 0u64..100) {
        let f = |x: &Point| Ok(x.map(|v| v.sin() * 2.0 + v * 0.5));
        let pts: Vec<Point> = MixtureSampler::new(2, seed).take(2_000).collect();
        let base = ql_certify(f, q(d1, d2), pts.clone(), 2_000).unwrap();
        let bigger = ql_certify(f, q(d1 + e1, d2 + e2), pts, 2_000).unwrap();
        if base.is_certified() {
            prop_assert!(bigger.is_certified());
        }
    }

    #[test]
    fn certified_maps_are_bounded_on_balls(radius in 0.1f64..100.0, seed in 0u64..100) {
        let qc = ql_from_global_lipschitz(2f64.sqrt());
        for x in MixtureSampler::new(2, seed).take(500).filter(|x| x.norm() <= radius) {
            prop_assert!(x.map(sign).norm() <= qc.bound_at(radius) * (1.0 + 1e-12));
        }
    }
}
