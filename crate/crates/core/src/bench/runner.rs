use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::thread;

use serde::{Deserialize, Serialize};

use super::export::{write_omega_vs_gap_svg, write_phi_gap_svg, write_summary_json, write_trace_csv, CsvRow};
use super::{phi_star_oracle, PhiStar, PHI_STAR_BUDGET};
use crate::error::{Error, Result};
use crate::instances::InstanceDescriptor;
use crate::problems::{BilevelInstance, OuterMode, Point};
use crate::prox_toolkit::StepSize;
use crate::solvers::{
    run_bigsam_envelope, run_bisg, run_iterative_regularization, Clock, LambdaSchedule,
    MixSchedule, RunStatus, SolverConfig, Trace, TraceRecord, Variant,
};

/// Seed used when neither the spec nor `BISOLVE_SEED` sets one.
pub const DEFAULT_SEED: u64 = 7;

/// `BISOLVE_SEED` when set to an integer, otherwise 7.
pub fn default_seed() -> u64 {
    std::env::var("BISOLVE_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub iterations: usize,
    /// Advisory wall-clock limit per method.
    #[serde(default)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiStarSource {
    /// The instance's known optimum.
    Analytic,
    /// A high-accuracy run of the accelerated oracle.
    #[default]
    ReferenceRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodKind {
    BisgV1 { alpha: f64, c: f64 },
    BisgV2 { alpha: f64, c: f64 },
    Bigsam { delta: f64 },
    IterativeReg { lambda0: f64 },
}

impl MethodKind {
    fn default_label(&self) -> String {
        match *self {
            MethodKind::BisgV1 { alpha, c } => format!("bisg-v1-a{alpha}-c{c}"),
            MethodKind::BisgV2 { alpha, c } => format!("bisg-v2-a{alpha}-c{c}"),
            MethodKind::Bigsam { delta } => format!("bigsam-d{delta}"),
            MethodKind::IterativeReg { lambda0 } => format!("iterative-reg-l{lambda0}"),
        }
    }

    /// The outer access mode the method needs.
    fn variant(&self) -> Variant {
        match self {
            MethodKind::BisgV2 { .. } => Variant::V2,
            _ => Variant::V1,
        }
    }

    /// `(alpha, c)` for the solver configuration; the baselines ignore both.
    fn schedule(&self) -> (f64, f64) {
        match *self {
            MethodKind::BisgV1 { alpha, c } | MethodKind::BisgV2 { alpha, c } => (alpha, c),
            _ => (1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    #[serde(flatten)]
    pub kind: MethodKind,
    #[serde(default)]
    pub label: Option<String>,
    /// Inner step rule; a constant step `1 / L_f` when absent.
    #[serde(default)]
    pub step: Option<StepSize>,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            label: None,
            step: None,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.default_label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instance: InstanceDescriptor,
    pub methods: Vec<MethodSpec>,
    pub budget: Budget,
    #[serde(default)]
    pub phi_star: PhiStarSource,
    /// Output directory used by the CLI.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub clock: Clock,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Measure `|x^k - x'|` against a surrogate solution when the instance has
    /// no known one.
    #[serde(default)]
    pub surrogate_reference: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("experiment needs at least one method".into()));
        }
        if self.budget.iterations == 0 {
            return Err(Error::Config("iteration budget must be positive".into()));
        }
        if let Some(s) = self.budget.seconds {
            if !(s > 0.0) {
                return Err(Error::Config(format!("time budget must be positive, got {s}")));
            }
        }
        let mut seen = BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(m.label()) {
                return Err(Error::Config(format!("duplicate method label {:?}", m.label())));
            }
        }
        Ok(())
    }
}

/// Per-method part of the `run.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMeta {
    pub label: String,
    pub spec: MethodSpec,
    pub config: SolverConfig,
    pub status: RunStatus,
    pub iterations: usize,
    pub lipschitz_bar: f64,
    pub beta: f64,
    pub final_phi_gap: Option<f64>,
    pub final_omega: Option<f64>,
}

/// Everything needed to rebuild traces from an exported CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub instance: InstanceDescriptor,
    pub phi_star_source: PhiStarSource,
    pub phi_star: f64,
    pub omega_star: Option<f64>,
    pub phi_star_certificate: Option<PhiStar>,
    pub runs: Vec<MethodMeta>,
}

impl RunMeta {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Rebuild the trace of `method` from exported rows. Stored iterates are
    /// not part of the export, so `x`, `y` and `final_x` are empty.
    pub fn trace_from_rows(&self, rows: &[CsvRow], method: &str) -> Result<Trace> {
        let run = self
            .runs
            .iter()
            .find(|r| r.label == method)
            .ok_or_else(|| Error::Config(format!("no run labelled {method:?}")))?;
        let records: Vec<TraceRecord> = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| TraceRecord {
                k: r.k,
                time_s: r.time_s,
                x: None,
                y: None,
                phi_y: r.phi,
                omega_y: r.omega,
                phi_x: r.phi_x,
                omega_x: r.omega_x,
                eta: r.eta,
                lk: r.lk,
                omega_step_norm: r.step_norm,
                subgrad_norm: r.subgrad_norm,
                dist_x: r.dist_x,
            })
            .collect();
        if records.iter().enumerate().any(|(i, r)| r.k != i) {
            return Err(Error::Input(format!("rows of {method:?} do not cover k = 0, 1, 2, ...")));
        }
        Ok(Trace {
            method: method.to_string(),
            instance: self.instance.name(),
            config: run.config.clone(),
            records,
            final_x: Point::zeros(0),
            status: run.status.clone(),
            lipschitz_bar: run.lipschitz_bar,
            beta: run.beta,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub traces: Vec<Trace>,
    pub rows: Vec<CsvRow>,
    pub meta: RunMeta,
}

impl ExperimentResult {
    pub fn trace(&self, label: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.method == label)
    }

    /// Write `trace.csv`, `run.json`, `phi_gap.svg` and `omega_vs_gap.svg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_trace_csv(&dir.join("trace.csv"), &self.rows)?;
        write_summary_json(&dir.join("run.json"), &self.meta)?;
        write_phi_gap_svg(&dir.join("phi_gap.svg"), &self.rows)?;
        write_omega_vs_gap_svg(&dir.join("omega_vs_gap.svg"), &self.rows)?;
        Ok(())
    }
}

/// Surrogate bi-level solution: the last iterate of a Bi-SG run with
/// `alpha = 0.95` and ten times the iteration budget.
pub fn surrogate_reference(inst: &BilevelInstance, step: StepSize, iterations: usize) -> Result<Point> {
    let (variant, c) = match &inst.outer {
        OuterMode::Subgradient { .. } => (Variant::V1, 1.0),
        OuterMode::Composite { sigma, .. } => {
            let l = sigma.lipschitz_grad().unwrap_or(1.0);
            (Variant::V2, if l > 1.0 { 1.0 / l } else { 1.0 })
        }
    };
    let mut cfg = SolverConfig::new(0.95, c, step, iterations.saturating_mul(10));
    cfg.store_points = false;
    let trace = run_bisg(inst, &cfg, variant)?;
    if let RunStatus::Aborted(why) = &trace.status {
        return Err(Error::Numerical(format!("surrogate run aborted: {why}")));
    }
    Ok(trace.final_x)
}

fn default_step(inst: &BilevelInstance) -> Result<StepSize> {
    inst.inner
        .lipschitz_grad()
        .map(|l| StepSize::Constant { lipschitz: l })
        .ok_or_else(|| Error::Config("no Lipschitz constant known; give a step rule".into()))
}

fn run_method(
    spec: &ExperimentSpec,
    method: &MethodSpec,
    seed: u64,
    x_ref: Option<&Point>,
) -> Result<Trace> {
    let (inst, _) = spec.instance.build(method.kind.variant())?;
    let step = match method.step {
        Some(s) => s,
        None => default_step(&inst)?,
    };
    let (alpha, c) = method.kind.schedule();
    let mut cfg = SolverConfig::new(alpha, c, step, spec.budget.iterations).with_clock(spec.clock);
    cfg.time_budget = spec.budget.seconds;
    cfg.seed = seed;
    cfg.store_points = x_ref.is_some() && inst.reference.as_ref().and_then(|r| r.point.as_ref()).is_none();
    let mut trace = match method.kind {
        MethodKind::BisgV1 { .. } => run_bisg(&inst, &cfg, Variant::V1)?,
        MethodKind::BisgV2 { .. } => run_bisg(&inst, &cfg, Variant::V2)?,
        MethodKind::Bigsam { delta } => run_bigsam_envelope(&inst, &cfg, delta, MixSchedule::Default)?,
        MethodKind::IterativeReg { lambda0 } => {
            run_iterative_regularization(&inst, &cfg, LambdaSchedule::harmonic(lambda0)?)?
        }
    };
    if cfg.store_points {
        if let Some(p) = x_ref {
            trace.set_reference_point(p)?;
            for r in &mut trace.records {
                r.x = None;
                r.y = None;
            }
        }
    }
    trace.method = method.label();
    Ok(trace)
}

/// Run every method of `spec`, one worker thread per method.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let seed = spec.seed.unwrap_or_else(default_seed);
    let (base, _) = spec.instance.build(Variant::V1)?;
    let (phi_star, certificate) = match spec.phi_star {
        PhiStarSource::Analytic => {
            let r = base
                .reference
                .as_ref()
                .ok_or_else(|| Error::Config("instance has no analytic phi*".into()))?;
            (r.phi, None)
        }
        PhiStarSource::ReferenceRun => {
            let p = phi_star_oracle(&base.inner, base.dim, PHI_STAR_BUDGET)?;
            (p.value, Some(p))
        }
    };
    let omega_star = base.reference.as_ref().map(|r| r.omega);
    let x_ref = match base.reference.as_ref().and_then(|r| r.point.clone()) {
        Some(p) => Some(p),
        None if spec.surrogate_reference => {
            Some(surrogate_reference(&base, default_step(&base)?, spec.budget.iterations)?)
        }
        None => None,
    };

    let outcomes: Vec<Result<Trace>> = thread::scope(|s| {
        let handles: Vec<_> = spec
            .methods
            .iter()
            .map(|m| {
                let x_ref = x_ref.as_ref();
                s.spawn(move || run_method(spec, m, seed, x_ref))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("worker panicked".into()))))
            .collect()
    });
    let traces = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (t, m) in traces.iter().zip(&spec.methods) {
        let mut r = CsvRow::from_trace(t, phi_star)?;
        runs.push(MethodMeta {
            label: t.method.clone(),
            spec: m.clone(),
            config: t.config.clone(),
            status: t.status.clone(),
            iterations: t.len(),
            lipschitz_bar: t.lipschitz_bar,
            beta: t.beta,
            final_phi_gap: r.last().map(|r| r.phi_gap),
            final_omega: r.last().map(|r| r.omega),
        });
        rows.append(&mut r);
    }
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.k.cmp(&b.k)));
    Ok(ExperimentResult {
        traces,
        rows,
        meta: RunMeta {
            instance: spec.instance.clone(),
            phi_star_source: spec.phi_star,
            phi_star,
            omega_star,
            phi_star_certificate: certificate,
            runs,
        },
    })
}
