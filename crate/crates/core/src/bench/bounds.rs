use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{select_k_best, select_k_tilde, Trace};

/// Relative slack before a bound counts as violated.
pub const BOUND_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `phi(y^k) - phi* <= 2H / k^alpha` (`2H (ln k + 1) / k` at `alpha = 1`).
    InnerRate,
    /// `omega(y^{k_best}) - omega* <= 2 D^2 / (c k^(1 - alpha))`.
    OuterRate,
    /// `omega(x^{k~}) - omega* <= exp(-c beta k^(1 - alpha) / 4) D^2` and
    /// `phi(x^{k~}) - phi* <= (2H + D^2) / k^alpha`.
    LinearRate,
    /// `min_{1<=j<=k} omega(y^j) - omega* <= D^2 / (2c (ln(k + 1) - 1))` at `alpha = 1`.
    Alpha1Outer,
}

impl BoundKind {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::Config(format!("unknown bound {s:?}")))
    }
}

/// Optimal values the bounds are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReference {
    pub phi_star: f64,
    pub omega_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    /// Index of the certified iterate (`k`, `k_best` or `k~`).
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: BoundKind,
    pub k_range: (usize, usize),
    pub checked: usize,
    pub d1: f64,
    pub d2: f64,
    pub h: f64,
    pub violations: Vec<Violation>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.checked > 0
    }
}

fn violates(lhs: f64, rhs: f64) -> bool {
    lhs > rhs * (1.0 + BOUND_RTOL) || lhs.is_nan()
}

/// Check a rate bound at every admissible `k` in `[k_min, k_max]`.
///
/// `D1` is the largest recorded `|x^k - x'|` and `D2` the largest recorded
/// step or sub-gradient norm; `H = D^2 L_bar / (1 - alpha)` (or `D^2 L_bar`
/// at `alpha = 1`). Window-based bounds skip `k` whose window runs past the trace.
pub fn verify_bound(
    trace: &Trace,
    bound: BoundKind,
    reference: &BoundReference,
    k_min: usize,
    k_max: usize,
) -> Result<BoundReport> {
    let d1 = trace
        .measured_d1()
        .ok_or_else(|| Error::Config("bound checks need |x^k - x'| in the trace".into()))?;
    let d2 = trace.measured_d2();
    let alpha = trace.config.alpha;
    let c = trace.config.c;
    let d = d1 + d2;
    let h = if alpha < 1.0 {
        d * d * trace.lipschitz_bar / (1.0 - alpha)
    } else {
        d * d * trace.lipschitz_bar
    };
    let omega_star = || {
        reference
            .omega_star
            .ok_or_else(|| Error::Config("outer bounds need omega*".into()))
    };
    let last = trace.len().saturating_sub(1);
    let mut violations = Vec::new();
    let mut checked = 0;
    let k_lo = k_min.max(1);
    match bound {
        BoundKind::InnerRate => {
            for k in k_lo..=k_max.min(last) {
                let lhs = trace.records[k].phi_y - reference.phi_star;
                let kf = k as f64;
                let rhs = if alpha < 1.0 {
                    2.0 * h / kf.powf(alpha)
                } else {
                    2.0 * h * (kf.ln() + 1.0) / kf
                };
                checked += 1;
                if violates(lhs, rhs) {
                    violations.push(Violation { k, j: k, lhs, rhs, what: "phi".into() });
                }
            }
        }
        BoundKind::OuterRate => {
            let w = omega_star()?;
            for k in k_lo..=k_max.min(last / 2) {
                let j = select_k_best(trace, k)?;
                let lhs = trace.records[j].omega_y - w;
                let rhs = 2.0 * d * d / (c * (k as f64).powf(1.0 - alpha));
                checked += 1;
                if violates(lhs, rhs) {
                    violations.push(Violation { k, j, lhs, rhs, what: "omega".into() });
                }
            }
        }
        BoundKind::LinearRate => {
            let w = omega_star()?;
            let beta = trace.beta;
            if !(beta > 0.0) {
                return Err(Error::Config("linear rate needs a strongly convex sigma".into()));
            }
            for k in k_lo..=k_max.min(last / 2) {
                let j = select_k_tilde(trace, k)?;
                let r = &trace.records[j];
                let kf = k as f64;
                let rhs_w = (-c * beta / 4.0 * kf.powf(1.0 - alpha)).exp() * d * d;
                let rhs_p = (2.0 * h + d * d) / kf.powf(alpha);
                checked += 1;
                if violates(r.omega_x - w, rhs_w) {
                    violations.push(Violation { k, j, lhs: r.omega_x - w, rhs: rhs_w, what: "omega".into() });
                }
                if violates(r.phi_x - reference.phi_star, rhs_p) {
                    violations.push(Violation {
                        k,
                        j,
                        lhs: r.phi_x - reference.phi_star,
                        rhs: rhs_p,
                        what: "phi".into(),
                    });
                }
            }
        }
        BoundKind::Alpha1Outer => {
            if alpha != 1.0 {
                return Err(Error::Config("this bound needs alpha = 1".into()));
            }
            let w = omega_star()?;
            let mut best = f64::INFINITY;
            let mut best_j = 1;
            for k in 1..=k_max.min(last) {
                if trace.records[k].omega_y < best {
                    best = trace.records[k].omega_y;
                    best_j = k;
                }
                let denom = ((k + 1) as f64).ln() - 1.0;
                if k < k_lo || denom <= 0.0 {
                    continue;
                }
                let rhs = d * d / (2.0 * c * denom);
                checked += 1;
                if violates(best - w, rhs) {
                    violations.push(Violation { k, j: best_j, lhs: best - w, rhs, what: "omega".into() });
                }
            }
        }
    }
    Ok(BoundReport {
        bound,
        k_range: (k_min, k_max),
        checked,
        d1,
        d2,
        h,
        violations,
    })
}

/// Upper bound `(n2^(1-r) - (n1 - 1)^(1-r)) / (1 - r)` on `sum_{n=n1}^{n2} n^(-r)`.
///
/// Valid for `0 < r < 1`, or `r > 1` with `n1 >= 2`.
pub fn harmonic_sum_bound(n1: u64, n2: u64, r: f64) -> Result<f64> {
    if n1 < 1 || n1 > n2 {
        return Err(Error::Domain(format!("need 1 <= n1 <= n2, got n1 = {n1}, n2 = {n2}")));
    }
    let valid = (r > 0.0 && r < 1.0) || (r > 1.0 && n1 >= 2);
    if !valid || !r.is_finite() {
        return Err(Error::Domain(format!("bound does not hold for r = {r} with n1 = {n1}")));
    }
    let e = 1.0 - r;
    let lower = if n1 == 1 { 0.0 } else { ((n1 - 1) as f64).powf(e) };
    Ok(((n2 as f64).powf(e) - lower) / e)
}
