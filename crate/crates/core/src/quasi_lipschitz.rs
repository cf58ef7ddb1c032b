//! Quasi-Lipschitz constants and an empirical certifier.
//!
//! A mapping `F` is quasi Lipschitz with constants `(d1, d2)` when
//! `|F(x)| <= max{d1, d2 |x|}` for every `x`. Bounded maps have `d2 = 0`,
//! Lipschitz maps through the origin have `d1 = 0`.
//!
//! Sums and compositions are binary; folding more terms applies the binary
//! rule repeatedly, which may be looser than a dedicated n-ary formula.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Point;

/// Relative slack in the falsification test.
pub const CERTIFY_RTOL: f64 = 1e-9;

/// Radii of the spheres probed by [`MixtureSampler`].
pub const SPHERE_RADII: [f64; 4] = [1e-3, 1.0, 10.0, 1e3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QLConstants {
    pub d1: f64,
    pub d2: f64,
}

impl QLConstants {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 >= 0.0 && d2 >= 0.0 && d1.is_finite() && d2.is_finite()) {
            return Err(Error::Parameter(format!(
                "quasi-Lipschitz constants must be finite and nonnegative, got ({d1}, {d2})"
            )));
        }
        Ok(Self { d1, d2 })
    }

    /// `max{d1, d2 |x|}`.
    pub fn bound_at(&self, norm: f64) -> f64 {
        self.d1.max(self.d2 * norm)
    }

    /// True when `(self.d1, self.d2)` dominates `other` coordinatewise.
    pub fn dominates(&self, other: &QLConstants) -> bool {
        self.d1 >= other.d1 && self.d2 >= other.d2
    }
}

/// Constants of `a F`.
pub fn ql_scale(q: QLConstants, a: f64) -> QLConstants {
    QLConstants {
        d1: a.abs() * q.d1,
        d2: a.abs() * q.d2,
    }
}

/// Constants of `F1 + F2`.
pub fn ql_sum(q1: QLConstants, q2: QLConstants) -> QLConstants {
    QLConstants {
        d1: 2.0 * (q1.d1 + q2.d1),
        d2: 2.0 * (q1.d2 + q2.d2),
    }
}

/// Constants of `F_outer o F_inner`.
pub fn ql_compose(q_outer: QLConstants, q_inner: QLConstants) -> QLConstants {
    QLConstants {
        d1: 2.0 * (q_outer.d1 + q_outer.d2 * q_inner.d1),
        d2: 2.0 * q_outer.d2 * q_inner.d2,
    }
}

/// Constants of `F o A` for a linear map with operator norm `op_norm`.
pub fn ql_linear_precompose(q: QLConstants, op_norm: f64) -> Result<QLConstants> {
    if !(op_norm >= 0.0) {
        return Err(Error::Parameter(format!(
            "operator norm must be nonnegative, got {op_norm}"
        )));
    }
    Ok(QLConstants {
        d1: q.d1,
        d2: q.d2 * op_norm,
    })
}

/// Constants of a sub-gradient selector of `phi o psi`, where `psi` is convex
/// and `L`-Lipschitz and `phi` is nondecreasing with a quasi-Lipschitz
/// derivative selector `phi'`.
pub fn ql_chain_rule(l_psi: f64, psi_at_zero: f64, q_phi_prime: QLConstants) -> Result<QLConstants> {
    if !(l_psi > 0.0) {
        return Err(Error::Parameter(format!(
            "Lipschitz constant of psi must be positive, got {l_psi}"
        )));
    }
    Ok(QLConstants {
        d1: 2.0 * (l_psi * q_phi_prime.d1 + l_psi * q_phi_prime.d2 * psi_at_zero.abs()),
        d2: 2.0 * l_psi * l_psi * q_phi_prime.d2,
    })
}

/// Constants of an `L`-Lipschitz map `T` with `|T(0)| = norm_at_zero`.
pub fn ql_from_lipschitz_map(l: f64, norm_at_zero: f64) -> QLConstants {
    QLConstants {
        d1: 2.0 * norm_at_zero,
        d2: 2.0 * l,
    }
}

/// Constants `(L, 0)` of sub-gradients of a convex `L`-Lipschitz function.
pub fn ql_from_global_lipschitz(l: f64) -> QLConstants {
    QLConstants { d1: l, d2: 0.0 }
}

/// Seeded points drawn from an equal-weight mixture of uniform distributions on
/// the spheres of [`SPHERE_RADII`] and a standard Gaussian.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    dim: usize,
    rng: ChaCha8Rng,
}

impl MixtureSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn gaussian(&mut self) -> Point {
        Point::from_fn(self.dim, |_, _| self.rng.sample(StandardNormal))
    }
}

impl Iterator for MixtureSampler {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let component = self.rng.random_range(0..=SPHERE_RADII.len());
        let g = self.gaussian();
        if component == SPHERE_RADII.len() {
            return Some(g);
        }
        let norm = g.norm();
        if norm == 0.0 {
            return Some(g);
        }
        Some(g * (SPHERE_RADII[component] / norm))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certification {
    Certified,
    Counterexample(Point),
}

impl Certification {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certification::Certified)
    }
}

/// Look for the first sample with `|F(x)| > max{d1, d2 |x|} (1 + 1e-9)`.
///
/// At most `n_samples` points are taken from `points`. A certified result is
/// evidence, not proof.
pub fn ql_certify<F, I>(f: F, q: QLConstants, points: I, n_samples: usize) -> Result<Certification>
where
    F: Fn(&Point) -> Result<Point>,
    I: IntoIterator<Item = Point>,
{
    if n_samples == 0 {
        return Err(Error::Parameter("n_samples must be at least 1".into()));
    }
    for x in points.into_iter().take(n_samples) {
        let fx = f(&x)?;
        if fx.norm() > q.bound_at(x.norm()) * (1.0 + CERTIFY_RTOL) {
            return Ok(Certification::Counterexample(x));
        }
    }
    Ok(Certification::Certified)
}

/// [`ql_certify`] over a fresh [`MixtureSampler`].
pub fn ql_certify_mixture<F>(
    f: F,
    q: QLConstants,
    dim: usize,
    seed: u64,
    n_samples: usize,
) -> Result<Certification>
where
    F: Fn(&Point) -> Result<Point>,
{
    ql_certify(f, q, MixtureSampler::new(dim, seed), n_samples)
}
