//! Bi-SG (Versions I and II), candidate-iterate selectors and two baselines.
//!
//! Every solver runs a budgeted loop from `x^0` and records one
//! [`TraceRecord`] per iteration. Runs are sequential and deterministic for a
//! given configuration; independent runs may share an instance across threads.

mod baselines;
mod bisg;
mod trace;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use baselines::{run_bigsam_envelope, run_iterative_regularization, LambdaSchedule, MixSchedule};
pub use bisg::{bisg_step_v1, bisg_step_v2, run_bisg, BisgStep, Variant};
pub use trace::{select_k_best, select_k_tilde, RunStatus, Trace, TraceRecord};

use crate::error::{Error, Result};
use crate::prox_toolkit::StepSize;
use crate::problems::{BilevelInstance, Point};
use crate::quasi_lipschitz::QLConstants;

/// Source of the `time_s` column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// Seconds since the start of the run.
    #[default]
    Wall,
    /// Number of completed iterations, for reproducible output.
    Logical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub c: f64,
    pub step: StepSize,
    pub max_iter: usize,
    /// Wall-clock limit in seconds, checked after every iteration.
    #[serde(default)]
    pub time_budget: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Starting point; the origin when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub clock: Clock,
    /// Keep `x^k` and `y^k` in the trace.
    #[serde(default = "default_store_points")]
    pub store_points: bool,
}

fn default_store_points() -> bool {
    true
}

impl SolverConfig {
    pub fn new(alpha: f64, c: f64, step: StepSize, max_iter: usize) -> Self {
        Self {
            alpha,
            c,
            step,
            max_iter,
            time_budget: None,
            seed: 0,
            x0: None,
            clock: Clock::Wall,
            store_points: true,
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_x0(mut self, x0: &Point) -> Self {
        self.x0 = Some(x0.iter().copied().collect());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.5 && self.alpha <= 1.0) {
            return Err(Error::Parameter(format!(
                "alpha must lie in (1/2, 1], got {}",
                self.alpha
            )));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::Parameter(format!("c must lie in (0, 1], got {}", self.c)));
        }
        self.step.validate()?;
        if let Some(b) = self.time_budget {
            if !(b > 0.0) {
                return Err(Error::Parameter(format!("time budget must be positive, got {b}")));
            }
        }
        Ok(())
    }

    pub fn initial_point(&self, dim: usize) -> Result<Point> {
        match &self.x0 {
            None => Ok(Point::zeros(dim)),
            Some(v) if v.len() == dim => {
                let x = Point::from_column_slice(v);
                crate::problems::ensure_finite(&x, "x0")?;
                Ok(x)
            }
            Some(v) => Err(Error::Parameter(format!(
                "x0 has length {}, instance dimension is {dim}",
                v.len()
            ))),
        }
    }
}

/// `eta_k = c (k + 1)^(-alpha)`.
pub fn eta_schedule(cfg: &SolverConfig, k: usize) -> f64 {
    cfg.c * ((k + 1) as f64).powf(-cfg.alpha)
}

/// Bound on `|x^k - x'|` for Version I from the declared quasi-Lipschitz
/// constants of the sub-gradient selector:
///
/// `sqrt(prod_{s<k} (1 + 4 d2^2 eta_s^2) * max{C1^2, |x^0 - x'|^2})`
///
/// with `R = max{level_radius, d1 / (2 d2), |x'|}` and
/// `C1 = R + max{d1, d2 (R + |x'|)}`. `level_radius` bounds
/// `|x - x'|` over the level set `omega(x) <= omega(x')`. A zero `d2` is
/// raised to the smallest value that keeps `R` unchanged.
pub fn boundedness_bound(
    ql: QLConstants,
    level_radius: f64,
    x_ref: &Point,
    x0: &Point,
    cfg: &SolverConfig,
    k: usize,
) -> f64 {
    let ref_norm = x_ref.norm();
    let base = level_radius.max(ref_norm);
    let d2 = if ql.d2 > 0.0 {
        ql.d2
    } else if base > 0.0 {
        ql.d1 / (2.0 * base)
    } else {
        ql.d1.max(1.0)
    };
    let r = if d2 > 0.0 { base.max(ql.d1 / (2.0 * d2)) } else { base };
    let c1 = r + ql.d1.max(d2 * (r + ref_norm));
    let log_prod: f64 = (0..k)
        .map(|s| (4.0 * d2 * d2 * eta_schedule(cfg, s).powi(2)).ln_1p())
        .sum();
    let start = (x0 - x_ref).norm();
    (log_prod.exp() * c1.powi(2).max(start * start)).sqrt()
}

/// Output of one solver step at `x^k`.
pub(crate) struct StepData {
    pub y: Point,
    pub x_next: Point,
    pub grad_x: Point,
    pub lk: f64,
    pub eta: f64,
    pub omega_step_norm: f64,
}

fn all_finite(x: &Point) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// The shared iteration loop: run `step` until the budget is spent and record
/// one row per iteration. Parameter errors propagate; other failures stop the
/// run and mark the trace as aborted.
pub(crate) fn drive<F>(
    inst: &BilevelInstance,
    cfg: &SolverConfig,
    method: &str,
    mut step: F,
) -> Result<Trace>
where
    F: FnMut(usize, &Point) -> Result<StepData>,
{
    cfg.validate()?;
    let mut x = cfg.initial_point(inst.dim)?;
    let x_ref = inst.reference.as_ref().and_then(|r| r.point.clone());
    let start = Instant::now();
    let mut records = Vec::with_capacity(cfg.max_iter.min(1 << 20));
    let mut status = RunStatus::Completed;
    let mut max_lk: f64 = 0.0;
    for k in 0..cfg.max_iter {
        let data = match step(k, &x) {
            Ok(d) => d,
            Err(Error::Parameter(m)) => return Err(Error::Parameter(m)),
            Err(e) => {
                status = RunStatus::Aborted(format!("k = {k}: {e}"));
                break;
            }
        };
        let phi_y = inst.phi(&data.y);
        if !all_finite(&data.y) || !all_finite(&data.x_next) || !phi_y.is_finite() {
            status = RunStatus::Aborted(format!("k = {k}: non-finite iterate"));
            break;
        }
        let phi_sub = &data.grad_x + inst.inner.nonsmooth.subgrad(&x);
        let subgrad_norm = inst
            .outer
            .subgrad(&data.y)
            .norm()
            .max(inst.outer.subgrad(&x).norm())
            .max(phi_sub.norm());
        let time_s = match cfg.clock {
            Clock::Wall => start.elapsed().as_secs_f64(),
            Clock::Logical => (k + 1) as f64,
        };
        max_lk = max_lk.max(data.lk);
        records.push(TraceRecord {
            k,
            time_s,
            phi_y,
            omega_y: inst.omega(&data.y),
            phi_x: inst.phi(&x),
            omega_x: inst.omega(&x),
            eta: data.eta,
            lk: data.lk,
            omega_step_norm: data.omega_step_norm,
            subgrad_norm,
            dist_x: x_ref.as_ref().map(|p| (&x - p).norm()),
            x: cfg.store_points.then(|| x.clone()),
            y: cfg.store_points.then_some(data.y),
        });
        x = data.x_next;
        if let Some(budget) = cfg.time_budget {
            if start.elapsed().as_secs_f64() >= budget {
                status = RunStatus::TimeBudget;
                break;
            }
        }
    }
    let lipschitz_bar = match inst.inner.lipschitz_grad() {
        Some(lf) => cfg.step.upper_bound(lf),
        None => max_lk.max(cfg.step.lower_bound()),
    };
    Ok(Trace {
        method: method.to_string(),
        instance: inst.name.clone(),
        config: cfg.clone(),
        records,
        final_x: x,
        status,
        lipschitz_bar,
        beta: inst.outer.smooth_strong_convexity(),
    })
}
