use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bisg::bench::{
    fit_rate, read_trace_csv, run_experiment, verify_bound, write_summary_json, BoundKind,
    BoundReference, Budget, CsvRow, ExperimentSpec, MethodKind, MethodSpec, PhiStarSource, RunMeta,
    Window,
};
use bisg::instances::InstanceDescriptor;
use bisg::problems::Point;
use bisg::prox_toolkit::StepSize;
use bisg::quasi_lipschitz::{ql_certify_mixture, ql_chain_rule, Certification, QLConstants};
use bisg::solvers::Clock;

#[derive(Parser)]
#[command(name = "bisolve", version, about = "Bi-level optimization bench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    BisgV1,
    BisgV2,
    Bigsam,
    IterativeReg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhiStarArg {
    Analytic,
    ReferenceRun,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    PhiGap,
    /// `|omega(y^k) - omega*|`.
    OmegaGap,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    SquaredL1,
    L1,
    SqL2,
    ElasticNet,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one instance.
    Run {
        /// `analytic`, `colinear-ls`, `logistic`, inline JSON or a JSON file.
        #[arg(long)]
        instance: String,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Envelope parameter for BiG-SAM.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Initial regularization weight for iterative regularization.
        #[arg(long, default_value_t = 1.0)]
        lambda0: f64,
        #[arg(long, default_value_t = 20_000)]
        iters: usize,
        /// Advisory wall-clock limit in seconds.
        #[arg(long)]
        seconds: Option<f64>,
        #[arg(long, env = "BISOLVE_SEED", default_value_t = bisg::bench::DEFAULT_SEED)]
        seed: u64,
        /// Backtracking with `gamma` and `eta` instead of the constant step `1 / L_f`.
        #[arg(long, num_args = 2, value_names = ["GAMMA", "ETA"])]
        backtracking: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "reference-run")]
        phi_star: PhiStarArg,
        /// Record iteration counts instead of wall-clock time.
        #[arg(long)]
        logical_clock: bool,
        /// Measure distances against a surrogate solution.
        #[arg(long)]
        surrogate: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every method of an experiment spec.
    Compare {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit log-log rates to an exported trace.
    Rates {
        trace: PathBuf,
        /// `auto` or `K_MIN:K_MAX`.
        #[arg(long, default_value = "auto")]
        window: String,
        #[arg(long, value_enum, default_value = "phi-gap")]
        metric: Metric,
        #[arg(long)]
        method: Option<String>,
    },
    /// Check a rate bound on an exported trace; needs `run.json` beside it.
    Verify {
        trace: PathBuf,
        #[arg(long)]
        bound: String,
        #[arg(long, default_value_t = 10)]
        k_min: usize,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        method: Option<String>,
    },
    /// Certify quasi-Lipschitz constants of a preset sub-gradient selector by sampling.
    CertifyQl {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, env = "BISOLVE_SEED", default_value_t = bisg::bench::DEFAULT_SEED)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            instance,
            method,
            alpha,
            c,
            delta,
            lambda0,
            iters,
            seconds,
            seed,
            backtracking,
            phi_star,
            logical_clock,
            surrogate,
            out,
        } => {
            let kind = match method {
                Method::BisgV1 => MethodKind::BisgV1 { alpha, c },
                Method::BisgV2 => MethodKind::BisgV2 { alpha, c },
                Method::Bigsam => MethodKind::Bigsam { delta },
                Method::IterativeReg => MethodKind::IterativeReg { lambda0 },
            };
            let mut m = MethodSpec::new(kind);
            if let Some(v) = backtracking {
                m.step = Some(StepSize::Backtracking { gamma: v[0], eta: v[1] });
            }
            let spec = ExperimentSpec {
                instance: InstanceDescriptor::parse(&instance, seed)?,
                methods: vec![m],
                budget: Budget { iterations: iters, seconds },
                phi_star: match phi_star {
                    PhiStarArg::Analytic => PhiStarSource::Analytic,
                    PhiStarArg::ReferenceRun => PhiStarSource::ReferenceRun,
                },
                output: Some(out.clone()),
                clock: if logical_clock { Clock::Logical } else { Clock::Wall },
                seed: Some(seed),
                surrogate_reference: surrogate,
            };
            execute(&spec, &out)
        }
        Command::Compare { spec, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec: ExperimentSpec = serde_json::from_str(&text).context("parsing experiment spec")?;
            let out = out
                .or_else(|| spec.output.clone())
                .ok_or_else(|| anyhow!("no output directory; pass --out or set `output`"))?;
            execute(&spec, &out)
        }
        Command::Rates {
            trace,
            window,
            metric,
            method,
        } => rates(&trace, &window, metric, method.as_deref()),
        Command::Verify {
            trace,
            bound,
            k_min,
            k_max,
            method,
        } => verify(&trace, &bound, k_min, k_max, method.as_deref()),
        Command::CertifyQl {
            preset,
            dim,
            samples,
            seed,
        } => certify(preset, dim, samples, seed),
    }
}

fn execute(spec: &ExperimentSpec, out: &Path) -> Result<ExitCode> {
    let result = run_experiment(spec)?;
    result.write(out)?;
    let meta = &result.meta;
    if let Some(cert) = &meta.phi_star_certificate {
        if cert.low_accuracy {
            eprintln!(
                "warning: phi* certificate {:.3e} is above the usable threshold",
                cert.grad_map_norm
            );
        }
    }
    println!("instance {}  phi* = {}", meta.instance.name(), meta.phi_star);
    for run in &meta.runs {
        println!(
            "{:<28} iters {:>7}  phi gap {:>12.5e}  omega {:>14.8}  {:?}",
            run.label,
            run.iterations,
            run.final_phi_gap.unwrap_or(f64::NAN),
            run.final_omega.unwrap_or(f64::NAN),
            run.status
        );
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_window(s: &str) -> Result<Window> {
    if s == "auto" {
        return Ok(Window::Auto);
    }
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("window must be `auto` or `K_MIN:K_MAX`, got {s:?}"))?;
    Ok(Window::Range {
        k_min: a.trim().parse()?,
        k_max: b.trim().parse()?,
    })
}

fn methods_in(rows: &[CsvRow], only: Option<&str>) -> Result<Vec<String>> {
    let mut names: Vec<String> = rows.iter().map(|r| r.method.clone()).collect();
    names.dedup();
    if let Some(m) = only {
        if !names.iter().any(|n| n == m) {
            bail!("no rows for method {m:?}");
        }
        names.retain(|n| n == m);
    }
    Ok(names)
}

fn sidecar(trace: &Path) -> Result<RunMeta> {
    let path = trace.with_file_name("run.json");
    RunMeta::read(&path).with_context(|| format!("reading {}", path.display()))
}

fn rates(trace: &Path, window: &str, metric: Metric, only: Option<&str>) -> Result<ExitCode> {
    let rows = read_trace_csv(trace)?;
    let window = parse_window(window)?;
    let omega_star = match metric {
        Metric::PhiGap => None,
        Metric::OmegaGap => Some(
            sidecar(trace)?
                .omega_star
                .ok_or_else(|| anyhow!("omega gap needs a known omega*"))?,
        ),
    };
    let mut fits = Vec::new();
    for name in methods_in(&rows, only)? {
        // k = 0 has no place on a log axis, so the series starts at k = 1.
        let series: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.method == name && r.k > 0)
            .map(|r| {
                let v = match omega_star {
                    None => r.phi_gap,
                    Some(w) => (r.omega - w).abs(),
                };
                (r.k as f64, v)
            })
            .collect();
        let fit = fit_rate(&series, window)?;
        println!(
            "{name:<28} slope {:>9.4}  intercept {:>9.4}  r2 {:.4}  window [{}, {}]",
            fit.slope, fit.intercept, fit.r_squared, fit.window.0, fit.window.1
        );
        fits.push(serde_json::json!({ "method": name, "fit": fit }));
    }
    let out = trace.with_file_name("rates.json");
    write_summary_json(&out, &fits)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(trace: &Path, bound: &str, k_min: usize, k_max: Option<usize>, only: Option<&str>) -> Result<ExitCode> {
    let bound = BoundKind::parse(bound)?;
    let rows = read_trace_csv(trace)?;
    let meta = sidecar(trace)?;
    let reference = BoundReference {
        phi_star: meta.phi_star,
        omega_star: meta.omega_star,
    };
    let mut all_pass = true;
    let mut reports = Vec::new();
    for name in methods_in(&rows, only)? {
        let t = meta.trace_from_rows(&rows, &name)?;
        let report = verify_bound(&t, bound, &reference, k_min, k_max.unwrap_or(usize::MAX))?;
        let pass = report.passed();
        all_pass &= pass;
        println!(
            "{name:<28} {} checked {:>6}  violations {:>5}  D1 {:.4e}  D2 {:.4e}  H {:.4e}",
            if pass { "PASS" } else { "FAIL" },
            report.checked,
            report.violations.len(),
            report.d1,
            report.d2,
            report.h
        );
        if let Some(v) = report.violations.first() {
            println!("  first violation at k = {} (j = {}): {} > {}", v.k, v.j, v.lhs, v.rhs);
        }
        reports.push(serde_json::json!({ "method": name, "report": report }));
    }
    write_summary_json(&trace.with_file_name("bounds.json"), &reports)?;
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn certify(preset: Preset, dim: usize, samples: usize, seed: u64) -> Result<ExitCode> {
    if dim == 0 {
        bail!("dimension must be positive");
    }
    let n = dim as f64;
    let (q, f): (QLConstants, Box<dyn Fn(&Point) -> bisg::Result<Point>>) = match preset {
        Preset::SquaredL1 => (
            ql_chain_rule(n.sqrt(), 0.0, QLConstants::new(0.0, 2.0)?)?,
            Box::new(|x: &Point| {
                let s = x.abs().sum();
                Ok(x.map(|v| 2.0 * s * sign(v)))
            }),
        ),
        Preset::L1 => (QLConstants::new(n.sqrt(), 0.0)?, Box::new(|x: &Point| Ok(x.map(sign)))),
        Preset::SqL2 => (QLConstants::new(0.0, 2.0)?, Box::new(|x: &Point| Ok(x * 2.0))),
        Preset::ElasticNet => {
            let q = bisg::instances::elastic_net_ql(dim);
            let en = bisg::instances::elastic_net_outer();
            (
                q,
                Box::new(move |x: &Point| Ok(bisg::problems::ProxFriendlyFn::subgrad(&en, x))),
            )
        }
    };
    println!("constants ({}, {}) in dimension {dim}", q.d1, q.d2);
    match ql_certify_mixture(f, q, dim, seed, samples)? {
        Certification::Certified => {
            println!("certified over {samples} samples");
            Ok(ExitCode::SUCCESS)
        }
        Certification::Counterexample(x) => {
            println!("counterexample at |x| = {:.6e}", x.norm());
            Ok(ExitCode::from(1))
        }
    }
}
