use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{CompositeObjective, Point};

use super::prox_grad_step;

/// Upper limit on the number of increases `i_k` in one backtracking call.
pub const MAX_BACKTRACK_INCREASES: u32 = 60;

/// How `L_k` (the inverse inner step size) is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StepSize {
    /// `L_k = lipschitz` for every `k`.
    Constant { lipschitz: f64 },
    /// Start from `L_{-1} = gamma`, multiply by `eta` until sufficient decrease holds.
    Backtracking { gamma: f64, eta: f64 },
}

impl StepSize {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSize::Constant { lipschitz } => {
                if !(lipschitz > 0.0 && lipschitz.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "constant step needs L > 0, got {lipschitz}"
                    )));
                }
            }
            StepSize::Backtracking { gamma, eta } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
                }
                if !(eta > 1.0 && eta.is_finite()) {
                    return Err(Error::Parameter(format!("eta must exceed 1, got {eta}")));
                }
            }
        }
        Ok(())
    }

    /// Lower bound on every emitted `L_k`.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            StepSize::Constant { lipschitz } => lipschitz,
            StepSize::Backtracking { gamma, .. } => gamma,
        }
    }

    /// Upper bound `L_bar` on every emitted `L_k`, given the gradient Lipschitz constant `L_f`.
    ///
    /// For a constant rule this is the rule's own constant.
    pub fn upper_bound(&self, lipschitz_f: f64) -> f64 {
        match *self {
            StepSize::Constant { lipschitz } => lipschitz,
            StepSize::Backtracking { gamma, eta } => (lipschitz_f * eta).max(gamma),
        }
    }
}

/// Quadratic coefficient in the sufficient-decrease test.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecreaseCoefficient {
    /// `(L_k / 2) |y - x|^2`, the standard test.
    HalfLipschitz,
    /// `(t_k / 2) |y - x|^2` with `t_k = 1 / L_k`.
    HalfStep,
}

/// A step-size rule with the per-run state of the backtracking procedure.
///
/// One rule belongs to one solver run; it is not meant to be shared.
#[derive(Debug, Clone)]
pub struct StepSizeRule {
    mode: StepSize,
    last: f64,
    coefficient: DecreaseCoefficient,
}

impl StepSizeRule {
    pub fn new(mode: StepSize) -> Result<Self> {
        mode.validate()?;
        Ok(Self {
            mode,
            last: mode.lower_bound(),
            coefficient: DecreaseCoefficient::HalfLipschitz,
        })
    }

    pub fn constant(lipschitz: f64) -> Result<Self> {
        Self::new(StepSize::Constant { lipschitz })
    }

    pub fn backtracking(gamma: f64, eta: f64) -> Result<Self> {
        Self::new(StepSize::Backtracking { gamma, eta })
    }

    /// Switch to the `(t_k / 2)` quadratic term. With it the search can fail to
    /// terminate for any `L_k` above `1 / L_f`.
    #[doc(hidden)]
    pub fn with_coefficient(mut self, coefficient: DecreaseCoefficient) -> Self {
        self.coefficient = coefficient;
        self
    }

    pub fn mode(&self) -> StepSize {
        self.mode
    }

    /// The last accepted `L_k` (or `L_{-1}` before the first call).
    pub fn last(&self) -> f64 {
        self.last
    }

    /// Choose `L_k` at `x` and return it with `y = T_{1/L_k}(x)`.
    pub fn next(&mut self, obj: &CompositeObjective, x: &Point) -> Result<(f64, Point)> {
        let grad = obj.smooth.grad(x);
        self.next_with_grad(obj, x, &grad)
    }

    /// [`next`](Self::next) with `grad f(x)` supplied by the caller.
    pub fn next_with_grad(
        &mut self,
        obj: &CompositeObjective,
        x: &Point,
        grad: &Point,
    ) -> Result<(f64, Point)> {
        match self.mode {
            StepSize::Constant { lipschitz } => {
                Ok((lipschitz, prox_grad_step(obj, 1.0 / lipschitz, x, grad)))
            }
            StepSize::Backtracking { eta, .. } => search(obj, self, eta, x, grad),
        }
    }
}

/// One backtracking search from `L_{k-1}`.
///
/// Returns the accepted `L_k = L_{k-1} eta^{i_k}` and `y = T_{1/L_k}(x)` such
/// that `f(y) <= f(x) + <grad f(x), y - x> + (L_k / 2) |y - x|^2`.
pub fn backtrack(
    obj: &CompositeObjective,
    rule: &mut StepSizeRule,
    x: &Point,
) -> Result<(f64, Point)> {
    let StepSize::Backtracking { eta, .. } = rule.mode else {
        return Err(Error::Parameter("backtrack needs a backtracking rule".into()));
    };
    search(obj, rule, eta, x, &obj.smooth.grad(x))
}

fn search(
    obj: &CompositeObjective,
    rule: &mut StepSizeRule,
    eta: f64,
    x: &Point,
    grad: &Point,
) -> Result<(f64, Point)> {
    let fx = obj.smooth.eval(x);
    let mut lk = rule.last;
    for _ in 0..=MAX_BACKTRACK_INCREASES {
        let y = prox_grad_step(obj, 1.0 / lk, x, grad);
        let d = &y - x;
        let fy = obj.smooth.eval(&y);
        let lin = grad.dot(&d);
        let quad = match rule.coefficient {
            DecreaseCoefficient::HalfLipschitz => 0.5 * lk,
            DecreaseCoefficient::HalfStep => 0.5 / lk,
        } * d.norm_squared();
        let slack = 10.0 * f64::EPSILON * (fx.abs() + fy.abs() + lin.abs());
        if !fy.is_finite() {
            return Err(Error::Numerical(format!("f(y) is not finite at L = {lk}")));
        }
        if fy <= fx + lin + quad + slack {
            rule.last = lk;
            return Ok((lk, y));
        }
        lk *= eta;
    }
    Err(Error::Numerical(format!(
        "backtracking exceeded {MAX_BACKTRACK_INCREASES} increases; oracles look inconsistent"
    )))
}
