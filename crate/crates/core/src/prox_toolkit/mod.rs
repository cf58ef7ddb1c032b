//! Proximal operators, the prox-grad and gradient mappings, step-size rules and
//! the Moreau envelope gradient.

mod closed_form;
mod step_size;

pub use closed_form::{
    prox_elastic_net, prox_indicator_ball, prox_indicator_box, prox_l1, prox_sq_l2, prox_zero,
    soft_threshold, ElasticNet, IndicatorBall, IndicatorBox, ZeroFn,
};
#[doc(hidden)]
pub use step_size::DecreaseCoefficient;
pub use step_size::{backtrack, StepSize, StepSizeRule, MAX_BACKTRACK_INCREASES};

use closed_form::check_step;

use crate::error::Result;
use crate::problems::{ensure_finite, CompositeObjective, Point, ProxFriendlyFn};

/// `prox_{t g}(x - t grad)` with a precomputed gradient.
pub(crate) fn prox_grad_step(obj: &CompositeObjective, t: f64, x: &Point, grad: &Point) -> Point {
    let mut w = x.clone();
    w.axpy(-t, grad, 1.0);
    obj.nonsmooth.prox(t, &w)
}

/// The prox-grad mapping `T_t(x) = prox_{t g}(x - t grad f(x))`.
pub fn prox_grad_map(obj: &CompositeObjective, t: f64, x: &Point) -> Result<Point> {
    check_step(t, "t")?;
    ensure_finite(x, "x")?;
    Ok(prox_grad_step(obj, t, x, &obj.smooth.grad(x)))
}

/// The gradient mapping `G_t(x) = (x - T_t(x)) / t`.
pub fn grad_map(obj: &CompositeObjective, t: f64, x: &Point) -> Result<Point> {
    let tx = prox_grad_map(obj, t, x)?;
    Ok((x - tx) / t)
}

/// Gradient of the Moreau envelope `e_delta h` at `x`: `(x - prox_{delta h}(x)) / delta`.
///
/// The envelope gradient is `1/delta`-Lipschitz.
pub fn moreau_env_grad(h: &dyn ProxFriendlyFn, delta: f64, x: &Point) -> Result<Point> {
    check_step(delta, "delta")?;
    ensure_finite(x, "x")?;
    Ok((x - h.prox(delta, x)) / delta)
}
