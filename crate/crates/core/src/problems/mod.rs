//! Function oracles and problem containers.
//!
//! The inner problem minimizes `phi = f + g` with `f` smooth convex and `g`
//! proximable; the outer problem minimizes `omega` over the minimizers of `phi`.
//! Functions are shared as `Arc<dyn ...>` trait objects and are immutable after
//! construction, so one instance can back many concurrent solver runs.

mod extended;
mod smooth;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use extended::ExtReal;
pub use smooth::{
    lambda_max_gram, sigmoid, Affine, HalfSquaredDistance, LeastSquares, Logistic, SmoothSum,
    ZeroSmooth,
};

use crate::error::{Error, Result};
use crate::prox_toolkit::ElasticNet;
use crate::quasi_lipschitz::QLConstants;

/// Points and vectors of the ambient space.
pub type Point = DVector<f64>;

/// Number of pseudorandom points used by sampled invariant checks.
pub const SAMPLED_CHECK_POINTS: usize = 256;

/// Half-width of the box `[-10, 10]^n` sampled by invariant checks.
pub const SAMPLED_CHECK_RADIUS: f64 = 10.0;

/// A convex, continuously differentiable function.
pub trait SmoothConvexFn: Send + Sync + fmt::Debug {
    fn eval(&self, x: &Point) -> f64;

    fn grad(&self, x: &Point) -> Point;

    /// Lipschitz constant of the gradient, when known.
    fn lipschitz_grad(&self) -> Option<f64>;

    /// Strong-convexity modulus; zero for merely convex functions.
    fn strong_convexity(&self) -> f64 {
        0.0
    }
}

/// A proper, closed, convex function with a computable proximal mapping.
pub trait ProxFriendlyFn: Send + Sync + fmt::Debug {
    fn eval(&self, x: &Point) -> ExtReal;

    /// `prox_{t h}(x) = argmin_u h(u) + |u - x|^2 / (2t)`. Callers guarantee `t > 0`.
    fn prox(&self, t: f64, x: &Point) -> Point;

    /// A deterministic selection from the sub-differential at `x`.
    ///
    /// Only meaningful on the domain of the function; indicator functions return
    /// the zero vector everywhere.
    fn subgrad(&self, x: &Point) -> Point;

    fn strong_convexity(&self) -> f64 {
        0.0
    }

    /// Weights `(l1, l2)` when the function is `l1 |x|_1 + l2 |x|_2^2`.
    ///
    /// Members of that family are closed under nonnegative sums, which is how
    /// [`regularized_objective`] builds the prox of `g + lambda * omega`.
    fn elastic_net_weights(&self) -> Option<(f64, f64)> {
        None
    }
}

/// The inner objective `phi = f + g`.
#[derive(Debug, Clone)]
pub struct CompositeObjective {
    pub smooth: Arc<dyn SmoothConvexFn>,
    pub nonsmooth: Arc<dyn ProxFriendlyFn>,
}

impl CompositeObjective {
    pub fn new(smooth: Arc<dyn SmoothConvexFn>, nonsmooth: Arc<dyn ProxFriendlyFn>) -> Self {
        Self { smooth, nonsmooth }
    }

    /// `f + 0`.
    pub fn smooth_only(smooth: Arc<dyn SmoothConvexFn>) -> Self {
        Self::new(smooth, Arc::new(crate::prox_toolkit::ZeroFn))
    }

    pub fn eval(&self, x: &Point) -> ExtReal {
        self.nonsmooth.eval(x) + self.smooth.eval(x)
    }

    pub fn lipschitz_grad(&self) -> Option<f64> {
        self.smooth.lipschitz_grad()
    }
}

/// `phi(x) = f(x) + g(x)`, possibly `+inf` when `g` is extended-valued.
pub fn eval_composite(obj: &CompositeObjective, x: &Point) -> Result<ExtReal> {
    ensure_finite(x, "x")?;
    Ok(obj.eval(x))
}

/// The regularized problem `phi + lambda * omega`.
///
/// The smooth part is kept; the nonsmooth part becomes `g + lambda * omega`. A
/// closed-form prox is only available when both `g` and `omega` belong to the
/// elastic-net family; otherwise use [`regularized_objective_with`].
pub fn regularized_objective(
    obj: &CompositeObjective,
    omega: &dyn ProxFriendlyFn,
    lambda: f64,
) -> Result<CompositeObjective> {
    check_lambda(lambda)?;
    let combined = combined_elastic_net(obj.nonsmooth.as_ref(), omega, lambda).ok_or_else(|| {
        Error::Parameter(
            "no closed-form prox for g + lambda * omega; supply one with regularized_objective_with"
                .into(),
        )
    })?;
    Ok(CompositeObjective::new(obj.smooth.clone(), Arc::new(combined)))
}

/// Like [`regularized_objective`] but with a caller-supplied prox oracle for `g + lambda * omega`.
pub fn regularized_objective_with(
    obj: &CompositeObjective,
    lambda: f64,
    combined: Arc<dyn ProxFriendlyFn>,
) -> Result<CompositeObjective> {
    check_lambda(lambda)?;
    Ok(CompositeObjective::new(obj.smooth.clone(), combined))
}

pub fn combined_elastic_net(
    g: &dyn ProxFriendlyFn,
    omega: &dyn ProxFriendlyFn,
    lambda: f64,
) -> Option<ElasticNet> {
    let (g1, g2) = g.elastic_net_weights()?;
    let (w1, w2) = omega.elastic_net_weights()?;
    Some(ElasticNet::new(g1 + lambda * w1, g2 + lambda * w2))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!(
            "regularization weight must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// `l_s(y, x) = s(y) - s(x) - <grad s(x), y - x>`.
pub fn bregman_linearization_gap(s: &dyn SmoothConvexFn, y: &Point, x: &Point) -> Result<f64> {
    ensure_finite(x, "x")?;
    ensure_finite(y, "y")?;
    Ok(s.eval(y) - s.eval(x) - s.grad(x).dot(&(y - x)))
}

/// How the outer objective is accessed.
#[derive(Debug, Clone)]
pub enum OuterMode {
    /// `omega` through a sub-gradient selector with declared quasi-Lipschitz constants.
    Subgradient {
        omega: Arc<dyn ProxFriendlyFn>,
        ql: QLConstants,
    },
    /// `omega = sigma + psi` with `sigma` smooth and `psi` proximable.
    Composite {
        sigma: Arc<dyn SmoothConvexFn>,
        psi: Arc<dyn ProxFriendlyFn>,
    },
}

impl OuterMode {
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            OuterMode::Subgradient { omega, .. } => omega.eval(x).to_f64(),
            OuterMode::Composite { sigma, psi } => (psi.eval(x) + sigma.eval(x)).to_f64(),
        }
    }

    /// A sub-gradient of the full outer objective.
    pub fn subgrad(&self, x: &Point) -> Point {
        match self {
            OuterMode::Subgradient { omega, .. } => omega.subgrad(x),
            OuterMode::Composite { sigma, psi } => sigma.grad(x) + psi.subgrad(x),
        }
    }

    /// Strong-convexity modulus of the smooth outer part (zero in subgradient mode).
    pub fn smooth_strong_convexity(&self) -> f64 {
        match self {
            OuterMode::Subgradient { .. } => 0.0,
            OuterMode::Composite { sigma, .. } => sigma.strong_convexity(),
        }
    }
}

/// Known solution data used by tests and bound checks.
#[derive(Debug, Clone)]
pub struct Reference {
    /// A bi-level solution `x'`, when known.
    pub point: Option<Point>,
    /// Inner optimal value `phi*`.
    pub phi: f64,
    /// Outer optimal value `omega*`.
    pub omega: f64,
}

/// An inner composite problem together with an outer objective.
#[derive(Debug, Clone)]
pub struct BilevelInstance {
    pub name: String,
    pub dim: usize,
    pub inner: CompositeObjective,
    pub outer: OuterMode,
    pub reference: Option<Reference>,
}

impl BilevelInstance {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        inner: CompositeObjective,
        outer: OuterMode,
    ) -> Result<Self> {
        if let OuterMode::Composite { sigma, .. } = &outer {
            match sigma.lipschitz_grad() {
                Some(l) if l.is_finite() && l >= 0.0 => {}
                _ => {
                    return Err(Error::Parameter(
                        "composite outer objective needs a known gradient Lipschitz constant for sigma"
                            .into(),
                    ))
                }
            }
        }
        let origin = Point::zeros(dim);
        if !outer.value(&origin).is_finite() {
            return Err(Error::Parameter(
                "outer objective must be finite everywhere".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            dim,
            inner,
            outer,
            reference: None,
        })
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    /// Same inner problem and reference with a different outer access mode.
    pub fn with_outer(&self, outer: OuterMode) -> Result<Self> {
        let mut inst = Self::new(self.name.clone(), self.dim, self.inner.clone(), outer)?;
        inst.reference = self.reference.clone();
        Ok(inst)
    }

    pub fn phi(&self, x: &Point) -> f64 {
        self.inner.eval(x).to_f64()
    }

    pub fn omega(&self, x: &Point) -> f64 {
        self.outer.value(x)
    }
}

pub(crate) fn ensure_finite(x: &Point, name: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} has non-finite entries")))
    }
}

/// Uniform pseudorandom points in the box `[-radius, radius]^dim`.
pub fn sample_box(dim: usize, count: usize, radius: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Point::from_fn(dim, |_, _| rng.random_range(-radius..=radius)))
        .collect()
}

/// The default sample set for invariant checks: 256 points in `[-10, 10]^dim`.
pub fn sample_check_points(dim: usize, seed: u64) -> Vec<Point> {
    sample_box(dim, SAMPLED_CHECK_POINTS, SAMPLED_CHECK_RADIUS, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox_toolkit::{IndicatorBox, ElasticNet, ZeroFn};
    use nalgebra::dvector;

    fn half_sq() -> Arc<dyn SmoothConvexFn> {
        Arc::new(HalfSquaredDistance::origin(2, 1.0))
    }

    #[test]
    fn composite_sums_parts() {
        let obj = CompositeObjective::new(half_sq(), Arc::new(ElasticNet::l1(1.0)));
        let v = eval_composite(&obj, &dvector![1.0, -1.0]).unwrap();
        assert_eq!(v, ExtReal::Finite(3.0));
    }

    #[test]
    fn composite_with_zero_is_smooth_value() {
        let f = Arc::new(LeastSquares::new(
            nalgebra::dmatrix![1.0, 2.0; 0.5, -1.0],
            dvector![1.0, 0.0],
        ));
        let x = dvector![0.3, -0.7];
        let obj = CompositeObjective::smooth_only(f.clone());
        assert_eq!(eval_composite(&obj, &x).unwrap(), ExtReal::Finite(f.eval(&x)));
    }

    #[test]
    fn infeasible_indicator_gives_infinity() {
        let obj = CompositeObjective::new(
            half_sq(),
            Arc::new(IndicatorBox::new(0.0, f64::INFINITY)),
        );
        assert_eq!(
            eval_composite(&obj, &dvector![-1.0, 0.0]).unwrap(),
            ExtReal::PosInfinity
        );
    }

    #[test]
    fn non_finite_point_is_rejected() {
        let obj = CompositeObjective::smooth_only(half_sq());
        assert!(matches!(
            eval_composite(&obj, &dvector![f64::NAN, 0.0]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn regularized_objective_adds_weighted_outer() {
        let obj = CompositeObjective::smooth_only(half_sq());
        let reg = regularized_objective(&obj, &ElasticNet::l1(1.0), 1.0).unwrap();
        assert_eq!(reg.eval(&dvector![1.0, 1.0]), ExtReal::Finite(3.0));
    }

    #[test]
    fn regularized_value_is_linear_in_lambda() {
        let obj = CompositeObjective::smooth_only(half_sq());
        let omega = ElasticNet::new(1.0, 0.05);
        let x = dvector![0.4, -2.0];
        let base = obj.eval(&x).to_f64();
        let at = |lambda: f64| {
            regularized_objective(&obj, &omega, lambda)
                .unwrap()
                .eval(&x)
                .to_f64()
        };
        let lambda = 0.7;
        assert!(((at(2.0 * lambda) - base) - 2.0 * (at(lambda) - base)).abs() < 1e-12);
    }

    #[test]
    fn regularized_prox_is_scaled_soft_threshold() {
        let obj = CompositeObjective::new(half_sq(), Arc::new(ZeroFn));
        let reg = regularized_objective(&obj, &ElasticNet::l1(1.0), 1.0).unwrap();
        let p = reg.nonsmooth.prox(1.0, &dvector![2.0, -0.5]);
        assert_eq!(p, dvector![1.0, 0.0]);
    }

    #[test]
    fn regularized_objective_rejects_nonpositive_lambda() {
        let obj = CompositeObjective::smooth_only(half_sq());
        for lambda in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                regularized_objective(&obj, &ElasticNet::l1(1.0), lambda),
                Err(Error::Parameter(_))
            ));
        }
    }

    #[test]
    fn regularized_objective_needs_closed_form() {
        let obj = CompositeObjective::new(half_sq(), Arc::new(IndicatorBox::new(-1.0, 1.0)));
        assert!(regularized_objective(&obj, &ElasticNet::l1(1.0), 1.0).is_err());
        let combined: Arc<dyn ProxFriendlyFn> = Arc::new(IndicatorBox::new(-1.0, 1.0));
        assert!(regularized_objective_with(&obj, 1.0, combined).is_ok());
    }

    #[test]
    fn bregman_gap_of_half_square() {
        let s = HalfSquaredDistance::origin(2, 1.0);
        let gap = bregman_linearization_gap(&s, &dvector![2.0, 0.0], &Point::zeros(2)).unwrap();
        assert_eq!(gap, 2.0);
    }

    #[test]
    fn bregman_gap_vanishes_for_affine() {
        let s = Affine::new(dvector![1.5, -2.0, 0.25], 3.0);
        for (x, y) in sample_check_points(3, 1).iter().zip(sample_check_points(3, 2).iter()) {
            assert!(bregman_linearization_gap(&s, y, x).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn bregman_gap_is_tight_for_unit_quadratic() {
        let s = HalfSquaredDistance::origin(3, 1.0);
        let beta = s.strong_convexity();
        for (x, y) in sample_check_points(3, 3).iter().zip(sample_check_points(3, 4).iter()) {
            let gap = bregman_linearization_gap(&s, y, x).unwrap();
            let lower = 0.5 * beta * (y - x).norm_squared();
            assert!((gap - lower).abs() <= 1e-10 * lower.max(1.0));
        }
    }

    #[test]
    fn composite_outer_requires_known_lipschitz() {
        #[derive(Debug)]
        struct Unknown;
        impl SmoothConvexFn for Unknown {
            fn eval(&self, _: &Point) -> f64 {
                0.0
            }
            fn grad(&self, x: &Point) -> Point {
                Point::zeros(x.len())
            }
            fn lipschitz_grad(&self) -> Option<f64> {
                None
            }
        }
        let inner = CompositeObjective::smooth_only(half_sq());
        let outer = OuterMode::Composite {
            sigma: Arc::new(Unknown),
            psi: Arc::new(ZeroFn),
        };
        assert!(BilevelInstance::new("x", 2, inner, outer).is_err());
    }

    #[test]
    fn sampled_points_stay_in_box() {
        let pts = sample_check_points(4, 9);
        assert_eq!(pts.len(), SAMPLED_CHECK_POINTS);
        assert!(pts.iter().flat_map(|p| p.iter()).all(|v| v.abs() <= 10.0));
        assert_eq!(pts, sample_check_points(4, 9));
    }
}
