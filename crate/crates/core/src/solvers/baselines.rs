use std::sync::Arc;

use crate::error::{Error, Result};
use crate::prox_toolkit::{ElasticNet, StepSize, StepSizeRule};
use crate::problems::{
    combined_elastic_net, BilevelInstance, CompositeObjective, OuterMode, Point, ProxFriendlyFn,
    SmoothConvexFn, SmoothSum,
};

use super::{drive, SolverConfig, StepData, Trace};

/// Weight of the outer point in BiG-SAM's convex combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixSchedule {
    /// `min{1, 2 / (k + 2)}`.
    Default,
    Constant(f64),
}

impl MixSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            MixSchedule::Default => (2.0 / (k as f64 + 2.0)).min(1.0),
            MixSchedule::Constant(v) => v,
        }
    }
}

/// BiG-SAM applied to the Moreau envelope of `omega` with parameter `delta`.
///
/// Each iteration mixes the inner prox-grad point `p_k = T_{1/L_k}(x_k)` with
/// `s_k = x_k - delta * grad e_delta omega(x_k) = prox_{delta omega}(x_k)`.
/// For a composite outer objective `s_k` is the prox-grad step of length
/// `delta` on `sigma + psi`.
pub fn run_bigsam_envelope(
    inst: &BilevelInstance,
    cfg: &SolverConfig,
    delta: f64,
    mix: MixSchedule,
) -> Result<Trace> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    if let MixSchedule::Constant(v) = mix {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Parameter(format!("mixing weight must lie in [0, 1], got {v}")));
        }
    }
    let mut rule = StepSizeRule::new(cfg.step)?;
    let label = format!("bigsam-d{delta}");
    drive(inst, cfg, &label, |k, x| {
        let grad_x = inst.inner.smooth.grad(x);
        let (lk, p) = rule.next_with_grad(&inst.inner, x, &grad_x)?;
        let s = match &inst.outer {
            OuterMode::Subgradient { omega, .. } => omega.prox(delta, x),
            OuterMode::Composite { sigma, psi } => {
                let mut w = x.clone();
                w.axpy(-delta, &sigma.grad(x), 1.0);
                psi.prox(delta, &w)
            }
        };
        let m = mix.at(k);
        let x_next = &s * m + &p * (1.0 - m);
        Ok(StepData {
            omega_step_norm: (x - &s).norm() / delta,
            y: p,
            x_next,
            grad_x,
            lk,
            eta: m,
        })
    })
}

/// Regularization weights `lambda_k` for iterative regularization.
#[derive(Debug, Clone, Copy)]
pub enum LambdaSchedule {
    /// `lambda0 / (k + 1)`.
    Harmonic { lambda0: f64 },
    /// Any positive schedule; positivity is checked at every `k`.
    Custom(fn(usize) -> f64),
    /// `lambda_k = 0`: plain prox-grad on the inner problem.
    #[doc(hidden)]
    Zero,
}

impl LambdaSchedule {
    pub fn harmonic(lambda0: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::Parameter(format!("lambda0 must be positive, got {lambda0}")));
        }
        Ok(LambdaSchedule::Harmonic { lambda0 })
    }

    pub fn at(&self, k: usize) -> Result<f64> {
        let v = match *self {
            LambdaSchedule::Harmonic { lambda0 } => lambda0 / (k as f64 + 1.0),
            LambdaSchedule::Custom(f) => f(k),
            LambdaSchedule::Zero => return Ok(0.0),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!(
                "regularization weight must be positive, got {v} at k = {k}"
            )));
        }
        Ok(v)
    }
}

/// How `omega` enters the regularized step at a given `lambda`.
enum Regularized {
    /// `g + lambda omega` (or `g + lambda psi`) has a closed-form prox; a smooth
    /// outer part `sigma` joins `f`.
    Combined {
        nonsmooth: Arc<dyn ProxFriendlyFn>,
        sigma: Option<Arc<dyn SmoothConvexFn>>,
    },
    /// `omega` is linearized through its sub-gradient selector.
    Linearized,
}

fn regularized_parts(inst: &BilevelInstance, lambda: f64) -> Result<Regularized> {
    let g = inst.inner.nonsmooth.as_ref();
    if lambda == 0.0 {
        return Ok(Regularized::Combined {
            nonsmooth: inst.inner.nonsmooth.clone(),
            sigma: None,
        });
    }
    match &inst.outer {
        OuterMode::Subgradient { omega, .. } => Ok(match combined_elastic_net(g, omega.as_ref(), lambda) {
            Some(en) => Regularized::Combined {
                nonsmooth: Arc::new(en),
                sigma: None,
            },
            None => Regularized::Linearized,
        }),
        OuterMode::Composite { sigma, psi } => {
            let en: ElasticNet = combined_elastic_net(g, psi.as_ref(), lambda).ok_or_else(|| {
                Error::Parameter("no closed-form prox for g + lambda * psi".into())
            })?;
            Ok(Regularized::Combined {
                nonsmooth: Arc::new(en),
                sigma: Some(sigma.clone()),
            })
        }
    }
}

/// Local smoothness estimate for a sub-gradient selector with quasi-Lipschitz
/// constants `(d1, d2)` on the ball of radius `|x|`.
fn omega_lipschitz_estimate(inst: &BilevelInstance, x: &Point) -> f64 {
    match &inst.outer {
        OuterMode::Subgradient { ql, .. } => {
            let r = x.norm();
            ql.bound_at(r) / r.max(1.0)
        }
        OuterMode::Composite { sigma, .. } => sigma.lipschitz_grad().unwrap_or(0.0),
    }
}

/// Iterative regularization: one prox-grad step on `phi + lambda_k omega` per iteration.
///
/// The step is `1 / (L + lambda_k L_omega)` where `L` is the configured constant
/// (or the backtracking estimate on `f`) and `L_omega` is `L_sigma` for a
/// composite outer objective, zero when `omega` is absorbed into a combined
/// prox, and a quasi-Lipschitz estimate otherwise.
pub fn run_iterative_regularization(
    inst: &BilevelInstance,
    cfg: &SolverConfig,
    schedule: LambdaSchedule,
) -> Result<Trace> {
    let mut rule = StepSizeRule::new(cfg.step)?;
    drive(inst, cfg, "iterative-reg", |k, x| {
        let lambda = schedule.at(k)?;
        let grad_x = inst.inner.smooth.grad(x);
        let parts = regularized_parts(inst, lambda)?;
        let linearized = matches!(parts, Regularized::Linearized);
        let (grad, nonsmooth, extra, smooth) = match parts {
            Regularized::Combined { nonsmooth, sigma } => match sigma {
                Some(sigma) => {
                    let mut grad = grad_x.clone();
                    grad.axpy(lambda, &sigma.grad(x), 1.0);
                    let extra = lambda * sigma.lipschitz_grad().unwrap_or(0.0);
                    let smooth: Arc<dyn SmoothConvexFn> = Arc::new(SmoothSum::new(vec![
                        (1.0, inst.inner.smooth.clone()),
                        (lambda, sigma),
                    ]));
                    (grad, nonsmooth, extra, smooth)
                }
                None => (grad_x.clone(), nonsmooth, 0.0, inst.inner.smooth.clone()),
            },
            Regularized::Linearized => {
                let mut grad = grad_x.clone();
                grad.axpy(lambda, &inst.outer.subgrad(x), 1.0);
                let extra = lambda * omega_lipschitz_estimate(inst, x);
                (grad, inst.inner.nonsmooth.clone(), extra, inst.inner.smooth.clone())
            }
        };
        let obj = CompositeObjective::new(smooth, nonsmooth);
        let lk = match cfg.step {
            StepSize::Constant { lipschitz } => lipschitz + extra,
            StepSize::Backtracking { .. } => {
                // A linearized omega stays out of the decrease test.
                let g = if linearized { &grad_x } else { &grad };
                let (l, _) = rule.next_with_grad(&obj, x, g)?;
                if linearized {
                    l + extra
                } else {
                    l
                }
            }
        };
        let t = 1.0 / lk;
        let mut w = x.clone();
        w.axpy(-t, &grad, 1.0);
        let x_next = obj.nonsmooth.prox(t, &w);
        Ok(StepData {
            omega_step_norm: (x - &x_next).norm() * lk,
            y: x_next.clone(),
            x_next,
            grad_x,
            lk,
            eta: lambda,
        })
    })
}
