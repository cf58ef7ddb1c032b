use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Point;

use super::SolverConfig;

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    TimeBudget,
    /// An oracle failed or produced non-finite values; the trace holds the
    /// iterations completed before the failure.
    Aborted(String),
}

/// One iteration `k`: the pair `(x^k, y^k)` and the quantities derived from it.
///
/// For the baselines `y` is the point produced by the inner step of iteration
/// `k` (the prox-grad point for BiG-SAM, `x^{k+1}` for iterative regularization).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub time_s: f64,
    pub x: Option<Point>,
    pub y: Option<Point>,
    pub phi_y: f64,
    pub omega_y: f64,
    pub phi_x: f64,
    pub omega_x: f64,
    /// Outer step length parameter: `eta_k` for Bi-SG, the mixing weight for
    /// BiG-SAM, `lambda_k` for iterative regularization.
    pub eta: f64,
    pub lk: f64,
    /// `|Omega_k(y^k)|`.
    pub omega_step_norm: f64,
    /// Largest of `|omega'(y^k)|`, `|omega'(x^k)|` and `|phi'(x^k)|` for the
    /// deterministic sub-gradient selectors.
    pub subgrad_norm: f64,
    /// `|x^k - x'|` when a reference solution is known.
    pub dist_x: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub method: String,
    pub instance: String,
    pub config: SolverConfig,
    pub records: Vec<TraceRecord>,
    /// The iterate after the last recorded step.
    pub final_x: Point,
    pub status: RunStatus,
    /// Upper bound `L_bar` on the inverse inner step sizes.
    pub lipschitz_bar: f64,
    /// Strong-convexity modulus of the smooth outer part.
    pub beta: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        !matches!(self.status, RunStatus::Aborted(_))
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Fill `dist_x` from stored iterates against a (possibly surrogate) solution.
    pub fn set_reference_point(&mut self, x_ref: &Point) -> Result<()> {
        for r in &mut self.records {
            let x = r.x.as_ref().ok_or_else(|| {
                Error::Config("trace was recorded without iterates".into())
            })?;
            r.dist_x = Some((x - x_ref).norm());
        }
        Ok(())
    }

    /// `D1 = max_k |x^k - x'|` over the recorded iterations.
    pub fn measured_d1(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.dist_x)
            .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))
    }

    /// `D2`: the running maximum of step-direction and sub-gradient norms.
    pub fn measured_d2(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.omega_step_norm.max(r.subgrad_norm))
            .fold(0.0, f64::max)
    }
}

fn window_argmin(trace: &Trace, lo: usize, hi: usize, value: impl Fn(&TraceRecord) -> f64) -> Result<usize> {
    if trace.records.len() <= hi {
        return Err(Error::Range(format!(
            "trace has {} records, window needs index {hi}",
            trace.records.len()
        )));
    }
    let mut best = lo;
    let mut best_v = value(&trace.records[lo]);
    for j in lo + 1..=hi {
        let v = value(&trace.records[j]);
        if v < best_v {
            best = j;
            best_v = v;
        }
    }
    Ok(trace.records[best].k)
}

/// Smallest `j` in `[k, 2k]` minimizing `omega(y^j)`.
pub fn select_k_best(trace: &Trace, k: usize) -> Result<usize> {
    window_argmin(trace, k, 2 * k, |r| r.omega_y)
}

/// Smallest `j` in `[k + 1, 2k]` minimizing `omega(x^j)`.
pub fn select_k_tilde(trace: &Trace, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Range("k_tilde needs k >= 1".into()));
    }
    window_argmin(trace, k + 1, 2 * k, |r| r.omega_x)
}
