use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox_toolkit::StepSizeRule;
use crate::problems::{BilevelInstance, OuterMode, Point};

use super::{drive, eta_schedule, SolverConfig, StepData, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Sub-gradient outer step `x^{k+1} = y^k - eta_k z^k`.
    V1,
    /// Prox-grad outer step on `sigma + psi`.
    V2,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::V1 => "bisg-v1",
            Variant::V2 => "bisg-v2",
        }
    }
}

/// One Bi-SG iteration.
#[derive(Debug, Clone)]
pub struct BisgStep {
    pub y: Point,
    pub x_next: Point,
    /// `Omega_k(y^k)`, so that `x_next = y - eta * omega_dir`.
    pub omega_dir: Point,
    pub lk: f64,
    pub eta: f64,
    pub grad_x: Point,
}

fn inner_step(
    inst: &BilevelInstance,
    rule: &mut StepSizeRule,
    x: &Point,
) -> Result<(f64, Point, Point)> {
    let grad = inst.inner.smooth.grad(x);
    let (lk, y) = rule.next_with_grad(&inst.inner, x, &grad)?;
    Ok((lk, y, grad))
}

/// Version I: `y = T_{1/L_k}(x)`, then a sub-gradient step on `omega` at `y`.
pub fn bisg_step_v1(
    inst: &BilevelInstance,
    cfg: &SolverConfig,
    k: usize,
    x: &Point,
    rule: &mut StepSizeRule,
) -> Result<BisgStep> {
    let OuterMode::Subgradient { omega, .. } = &inst.outer else {
        return Err(Error::Parameter("Version I needs a sub-gradient outer objective".into()));
    };
    let (lk, y, grad_x) = inner_step(inst, rule, x)?;
    let eta = eta_schedule(cfg, k);
    let z = omega.subgrad(&y);
    let mut x_next = y.clone();
    x_next.axpy(-eta, &z, 1.0);
    Ok(BisgStep {
        y,
        x_next,
        omega_dir: z,
        lk,
        eta,
        grad_x,
    })
}

/// Version II: `y = T_{1/L_k}(x)`, then `x_next = prox_{eta psi}(y - eta grad sigma(y))`.
pub fn bisg_step_v2(
    inst: &BilevelInstance,
    cfg: &SolverConfig,
    k: usize,
    x: &Point,
    rule: &mut StepSizeRule,
) -> Result<BisgStep> {
    let OuterMode::Composite { sigma, psi } = &inst.outer else {
        return Err(Error::Parameter("Version II needs a composite outer objective".into()));
    };
    check_c_cap(inst, cfg)?;
    let (lk, y, grad_x) = inner_step(inst, rule, x)?;
    let eta = eta_schedule(cfg, k);
    let mut w = y.clone();
    w.axpy(-eta, &sigma.grad(&y), 1.0);
    let x_next = psi.prox(eta, &w);
    let omega_dir = (&y - &x_next) / eta;
    Ok(BisgStep {
        y,
        x_next,
        omega_dir,
        lk,
        eta,
        grad_x,
    })
}

fn check_c_cap(inst: &BilevelInstance, cfg: &SolverConfig) -> Result<()> {
    if let OuterMode::Composite { sigma, .. } = &inst.outer {
        let l_sigma = sigma.lipschitz_grad().unwrap_or(f64::INFINITY);
        let cap = if l_sigma > 0.0 { (1.0 / l_sigma).min(1.0) } else { 1.0 };
        if cfg.c > cap {
            return Err(Error::Parameter(format!(
                "Version II needs c <= min(1/L_sigma, 1) = {cap}, got {}",
                cfg.c
            )));
        }
    }
    Ok(())
}

/// Run Bi-SG from `x^0` until the iteration or time budget is spent.
pub fn run_bisg(inst: &BilevelInstance, cfg: &SolverConfig, variant: Variant) -> Result<Trace> {
    match (variant, &inst.outer) {
        (Variant::V1, OuterMode::Subgradient { .. }) => {}
        (Variant::V2, OuterMode::Composite { .. }) => check_c_cap(inst, cfg)?,
        _ => {
            return Err(Error::Parameter(format!(
                "{} does not match the instance's outer objective",
                variant.label()
            )))
        }
    }
    let mut rule = StepSizeRule::new(cfg.step)?;
    let step_fn = match variant {
        Variant::V1 => bisg_step_v1,
        Variant::V2 => bisg_step_v2,
    };
    drive(inst, cfg, variant.label(), |k, x| {
        let s = step_fn(inst, cfg, k, x, &mut rule)?;
        Ok(StepData {
            omega_step_norm: s.omega_dir.norm(),
            y: s.y,
            x_next: s.x_next,
            grad_x: s.grad_x,
            lk: s.lk,
            eta: s.eta,
        })
    })
}
