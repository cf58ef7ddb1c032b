//! Metrics, rate fitting, bound verification, export and the experiment runner.

mod bounds;
mod export;
mod runner;

pub use bounds::{
    harmonic_sum_bound, verify_bound, BoundKind, BoundReference, BoundReport, Violation, BOUND_RTOL,
};
pub use export::{
    read_trace_csv, write_omega_vs_gap_svg, write_phi_gap_svg, write_summary_json, write_trace_csv,
    CsvRow, CSV_HEADER,
};
pub use runner::{
    default_seed, run_experiment, surrogate_reference, Budget, ExperimentResult, ExperimentSpec,
    MethodKind, MethodMeta, MethodSpec, PhiStarSource, RunMeta, DEFAULT_SEED,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{CompositeObjective, Point};
use crate::prox_toolkit::grad_map;
use crate::solvers::Trace;

/// Gaps in `(-1e-12, 0)` are rounding and clamp silently.
pub const GAP_ROUNDING: f64 = 1e-12;

/// Gaps below this are treated as evidence of a wrong `phi*`.
pub const GAP_INCONSISTENT: f64 = 1e-9;

/// `Delta phi(t) = phi(y_t) - phi*` over a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSeries {
    pub k: Vec<usize>,
    pub time_s: Vec<f64>,
    pub gap: Vec<f64>,
    /// Set when a gap in `[-1e-9, -1e-12]` was clamped, which hints at a stale `phi*`.
    pub clamped: bool,
}

/// Clamp a single gap value; `k` is only used in the error.
pub fn clamp_gap(raw: f64, k: usize) -> Result<(f64, bool)> {
    if raw >= 0.0 {
        Ok((raw, false))
    } else if raw > -GAP_ROUNDING {
        Ok((0.0, false))
    } else if raw >= -GAP_INCONSISTENT {
        Ok((0.0, true))
    } else {
        Err(Error::PhiStarInconsistent { k, gap: raw })
    }
}

pub fn compute_phi_gap(trace: &Trace, phi_star: f64) -> Result<GapSeries> {
    if !phi_star.is_finite() {
        return Err(Error::Input("phi* must be finite".into()));
    }
    let mut out = GapSeries {
        k: Vec::with_capacity(trace.len()),
        time_s: Vec::with_capacity(trace.len()),
        gap: Vec::with_capacity(trace.len()),
        clamped: false,
    };
    for r in &trace.records {
        let (g, flagged) = clamp_gap(r.phi_y - phi_star, r.k)?;
        out.clamped |= flagged;
        out.k.push(r.k);
        out.time_s.push(r.time_s);
        out.gap.push(g);
    }
    Ok(out)
}

/// Result of [`phi_star_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiStar {
    pub value: f64,
    /// `|G_{1/L}(x)|` at the returned point.
    pub grad_map_norm: f64,
    pub iterations: usize,
    /// Set when the certificate is above `1e-8`.
    pub low_accuracy: bool,
}

/// Certificate threshold for a usable `phi*`.
pub const PHI_STAR_CERTIFICATE: f64 = 1e-8;

/// Default iteration budget of [`phi_star_oracle`].
pub const PHI_STAR_BUDGET: usize = 100_000;

/// High-accuracy `min phi` over `R^dim` by accelerated prox-grad with
/// function-value restarts, started at the origin.
///
/// Returns the best value seen together with the gradient-mapping norm at the
/// best point as an accuracy certificate.
pub fn phi_star_oracle(obj: &CompositeObjective, dim: usize, budget: usize) -> Result<PhiStar> {
    let lf = obj
        .lipschitz_grad()
        .ok_or_else(|| Error::Config("phi* oracle needs a known Lipschitz constant".into()))?;
    if budget == 0 {
        return Err(Error::Parameter("budget must be positive".into()));
    }
    let l = lf.max(f64::MIN_POSITIVE);
    let t = 1.0 / l;
    let mut x = Point::zeros(dim);
    let mut z = x.clone();
    let mut theta = 1.0f64;
    let mut best_x = x.clone();
    let mut best = obj.eval(&x).to_f64();
    let mut prev = best;
    let mut iterations = 0;
    for it in 0..budget {
        iterations = it + 1;
        let g = obj.smooth.grad(&z);
        let mut w = z.clone();
        w.axpy(-t, &g, 1.0);
        let x_next = obj.nonsmooth.prox(t, &w);
        let v = obj.eval(&x_next).to_f64();
        if v < best {
            best = v;
            best_x = x_next.clone();
        }
        if v > prev {
            // Restart the momentum from the last iterate.
            theta = 1.0;
            z = x.clone();
            continue;
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        z = &x_next + (&x_next - &x) * ((theta - 1.0) / theta_next);
        x = x_next;
        theta = theta_next;
        prev = v;
        if it % 64 == 0 && grad_map(obj, t, &best_x)?.norm() < 1e-13 {
            break;
        }
    }
    let cert = grad_map(obj, t, &best_x)?.norm();
    Ok(PhiStar {
        value: best,
        grad_map_norm: cert,
        iterations,
        low_accuracy: !(cert < PHI_STAR_CERTIFICATE),
    })
}

/// Which iterations a rate fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// `[k_max / 10, k_max]`.
    Auto,
    Range { k_min: f64, k_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Ordinary least squares of `log(value)` on `log(k)` over the window.
pub fn fit_rate(series: &[(f64, f64)], window: Window) -> Result<RateFit> {
    let (lo, hi) = match window {
        Window::Auto => {
            let k_max = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            (k_max / 10.0, k_max)
        }
        Window::Range { k_min, k_max } => (k_min, k_max),
    };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(k, _)| *k >= lo && *k <= hi)
        .copied()
        .collect();
    if pts.len() < 10 {
        return Err(Error::Range(format!(
            "window [{lo}, {hi}] holds {} points, need at least 10",
            pts.len()
        )));
    }
    if let Some((k, v)) = pts.iter().find(|(k, v)| !(*v > 0.0) || !(*k > 0.0)) {
        return Err(Error::Domain(format!("log fit needs positive data, got ({k}, {v})")));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r_squared) = ols(&xs, &ys);
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        window: (lo, hi),
    })
}

/// Simple linear regression `y = a x + b`; returns `(a, b, r^2)`.
///
/// A series with no variance in `y` is fit exactly and reports `r^2 = 1`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    // The mean of equal values can round, leaving a spurious tiny syy.
    let constant = ys.iter().all(|&y| y == ys[0]);
    let r2 = if syy > 0.0 && !constant {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r2)
}
