mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bisg::bench::{
    harmonic_sum_bound, run_experiment, verify_bound, write_trace_csv, BoundKind, BoundReference,
    Budget, ExperimentSpec, MethodKind, MethodSpec, PhiStarSource,
};
use bisg::instances::{analytic_instance, InstanceDescriptor};
use bisg::problems::Point;
use bisg::prox_toolkit::{
    prox_elastic_net, prox_indicator_ball, prox_indicator_box, prox_l1, prox_sq_l2, prox_zero,
    StepSize,
};
use bisg::quasi_lipschitz::{
    ql_certify_mixture, ql_chain_rule, ql_compose, ql_from_global_lipschitz,
    ql_from_lipschitz_map, ql_linear_precompose, ql_scale, ql_sum, QLConstants,
};
use bisg::solvers::{run_bisg, Clock, SolverConfig, Trace, Variant};

use common::{brute_prox_1d, direct_power_sum, p, slope};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> bisg::Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn analytic_run(variant: Variant, alpha: f64, iters: usize) -> bisg::Result<Trace> {
    let inst = analytic_instance(variant);
    let cfg = SolverConfig::new(alpha, 1.0, StepSize::Constant { lipschitz: 2.0 }, iters)
        .with_clock(Clock::Logical);
    run_bisg(&inst, &cfg, variant)
}

fn analytic_reference() -> BoundReference {
    let inst = analytic_instance(Variant::V2);
    let r = inst.reference.expect("analytic reference");
    BoundReference {
        phi_star: r.phi,
        omega_star: Some(r.omega),
    }
}

fn bound_outcome(trace: &Trace, kind: BoundKind, k_min: usize, k_max: usize) -> bisg::Result<Outcome> {
    let rep = verify_bound(trace, kind, &analytic_reference(), k_min, k_max)?;
    let expected = k_max - k_min + 1;
    outcome(
        rep.passed() && rep.checked == expected,
        format!(
            "{} of {expected} k checked, {} violations, D1 = {:.3e}, D2 = {:.3e}",
            rep.checked,
            rep.violations.len(),
            rep.d1,
            rep.d2
        ),
    )
}

fn criterion_1() -> bisg::Result<Outcome> {
    let start = Instant::now();
    let trace = analytic_run(Variant::V2, 0.75, 50_000)?;
    let secs = start.elapsed().as_secs_f64();
    let target = p(&[0.5, 0.5]);
    let y = trace.last().and_then(|r| r.y.clone()).expect("stored y");
    let first = trace
        .records
        .iter()
        .position(|r| (r.y.as_ref().unwrap() - &target).norm() < 1e-3);
    let dist = (&y - &target).norm();
    outcome(
        dist < 1e-3 && secs < 2.0,
        format!("final dist {dist:.3e}, first below 1e-3 at k = {first:?}, {secs:.2} s"),
    )
}

fn criterion_2() -> bisg::Result<Outcome> {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for alpha in [0.75, 0.95] {
        let spec = ExperimentSpec {
            instance: InstanceDescriptor::colinear_ls(7),
            methods: vec![MethodSpec::new(MethodKind::BisgV2 { alpha, c: 1.0 })],
            budget: Budget {
                iterations: 20_001,
                seconds: None,
            },
            phi_star: PhiStarSource::ReferenceRun,
            output: None,
            clock: Clock::Logical,
            seed: Some(7),
            surrogate_reference: true,
        };
        let res = run_experiment(&spec)?;
        let cert = res.meta.phi_star_certificate.expect("certificate");
        let reference = BoundReference {
            phi_star: res.meta.phi_star,
            omega_star: None,
        };
        let rep = verify_bound(&res.traces[0], BoundKind::InnerRate, &reference, 10, 20_000)?;
        pass &= rep.passed() && rep.checked == 19_991 && !cert.low_accuracy;
        details.push(format!(
            "alpha {alpha}: {} violations over {} k (|G| = {:.1e})",
            rep.violations.len(),
            rep.checked,
            cert.grad_map_norm
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 30.0, format!("{}, {secs:.2} s", details.join("; ")))
}

fn criterion_3() -> bisg::Result<Outcome> {
    let start = Instant::now();
    let trace = analytic_run(Variant::V2, 0.75, 20_001)?;
    let o = bound_outcome(&trace, BoundKind::OuterRate, 10, 10_000)?;
    let secs = start.elapsed().as_secs_f64();
    outcome(o.pass && secs < 10.0, format!("{}, {secs:.2} s", o.detail))
}

fn criterion_4() -> bisg::Result<Outcome> {
    let start = Instant::now();
    let alpha = 0.75;
    let trace = analytic_run(Variant::V2, alpha, 10_001)?;
    let o = bound_outcome(&trace, BoundKind::LinearRate, 10, 5_000)?;
    let omega_star = analytic_reference().omega_star.unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = trace.records[10..=5_000]
        .iter()
        .filter_map(|r| {
            let gap = (r.omega_x - omega_star).abs();
            (gap > 0.0).then(|| ((r.k as f64).powf(1.0 - alpha), gap.ln()))
        })
        .unzip();
    let s = slope(&xs, &ys);
    let limit = -0.25 + 0.05;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        o.pass && s <= limit && xs.len() >= 10 && secs < 10.0,
        format!("{}, log-gap slope {s:.4} (limit {limit}), {secs:.2} s", o.detail),
    )
}

fn criterion_5() -> bisg::Result<Outcome> {
    let start = Instant::now();
    let trace = analytic_run(Variant::V1, 1.0, 10_001)?;
    let k_min = (1..).find(|&k| ((k + 1) as f64).ln() > 1.5).unwrap();
    let o = bound_outcome(&trace, BoundKind::Alpha1Outer, k_min, 10_000)?;
    let secs = start.elapsed().as_secs_f64();
    outcome(o.pass && secs < 10.0, format!("k from {k_min}: {}, {secs:.2} s", o.detail))
}

fn criterion_6() -> bisg::Result<Outcome> {
    let (inst, _) = InstanceDescriptor::logistic(7).build(Variant::V1)?;
    let lf = inst.inner.lipschitz_grad().expect("logistic L_f");
    let (gamma, eta) = (1.0, 2.0);
    let cfg = SolverConfig::new(0.95, 1.0, StepSize::Backtracking { gamma, eta }, 1_000)
        .with_clock(Clock::Logical);
    let trace = run_bisg(&inst, &cfg, Variant::V1)?;
    let upper = (lf * eta).max(gamma);
    let bad = trace
        .records
        .iter()
        .filter(|r| !(r.lk >= gamma && r.lk <= upper))
        .count();
    let max_lk = trace.records.iter().map(|r| r.lk).fold(0.0, f64::max);
    outcome(
        bad == 0 && trace.len() == 1_000 && trace.is_complete(),
        format!(
            "{} steps, max L_k = {max_lk:.4}, range [{gamma}, {upper:.4}], {bad} outside",
            trace.len()
        ),
    )
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

fn criterion_7() -> bisg::Result<Outcome> {
    let q = |a, b| QLConstants::new(a, b).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [1usize, 2, 4, 10, 50] {
        let out = ql_chain_rule((n as f64).sqrt(), 0.0, q(0.0, 2.0))?;
        // sqrt(n)^2 may differ from n in the last place.
        let ok = out.d1 == 0.0 && (out.d2 - 4.0 * n as f64).abs() <= 4.0 * f64::EPSILON * n as f64;
        pass &= ok;
    }
    let algebra = [
        (ql_scale(q(3.0, 2.0), -2.0), q(6.0, 4.0)),
        (ql_sum(q(1.0, 2.0), q(3.0, 4.0)), q(8.0, 12.0)),
        (ql_compose(q(1.0, 2.0), q(3.0, 4.0)), q(14.0, 16.0)),
        (ql_linear_precompose(q(1.0, 2.0), 3.0)?, q(1.0, 6.0)),
        (ql_from_lipschitz_map(0.75, 5.0), q(10.0, 1.5)),
        (ql_from_global_lipschitz(2f64.sqrt()), q(2f64.sqrt(), 0.0)),
    ];
    let algebra_ok = algebra.iter().all(|(a, b)| a == b);
    pass &= algebra_ok;
    notes.push(format!("algebra examples exact: {algebra_ok}"));
    for dim in [2usize, 10, 50] {
        let n = dim as f64;
        let qc = ql_chain_rule(n.sqrt(), 0.0, q(0.0, 2.0))?;
        let sq_l1 = |x: &Point| {
            let s = x.abs().sum();
            Ok(x.map(|v| 2.0 * s * sign(v)))
        };
        let a = ql_certify_mixture(sq_l1, qc, dim, 7 + dim as u64, 10_000)?.is_certified();
        let b = ql_certify_mixture(|x: &Point| Ok(x.map(sign)), q(n.sqrt(), 0.0), dim, 11, 10_000)?
            .is_certified();
        pass &= a && b;
        notes.push(format!("dim {dim}: squared l1 {a}, sign {b}"));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_8() -> bisg::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inf = f64::INFINITY;
    type Case = (&'static str, Box<dyn Fn(f64, f64) -> f64>, Box<dyn Fn(f64) -> f64>, Vec<f64>);
    let cases: Vec<Case> = vec![
        (
            "l1",
            Box::new(|t, x| prox_l1(t, &p(&[x])).unwrap()[0]),
            Box::new(|u: f64| u.abs()),
            vec![0.0],
        ),
        (
            "sq_l2",
            Box::new(|t, x| prox_sq_l2(t, &p(&[x]), 0.7).unwrap()[0]),
            Box::new(|u: f64| 0.7 * u * u),
            vec![],
        ),
        (
            "elastic_net",
            Box::new(|t, x| prox_elastic_net(t, &p(&[x]), 1.0, 0.05).unwrap()[0]),
            Box::new(|u: f64| u.abs() + 0.05 * u * u),
            vec![0.0],
        ),
        (
            "box",
            Box::new(|t, x| prox_indicator_box(t, &p(&[x]), -1.0, 2.0).unwrap()[0]),
            Box::new(move |u: f64| if (-1.0..=2.0).contains(&u) { 0.0 } else { inf }),
            vec![-1.0, 2.0],
        ),
        (
            "ball",
            Box::new(|t, x| prox_indicator_ball(t, &p(&[x]), 1.5).unwrap()[0]),
            Box::new(move |u: f64| if u.abs() <= 1.5 { 0.0 } else { inf }),
            vec![-1.5, 1.5],
        ),
        (
            "zero",
            Box::new(|t, x| prox_zero(t, &p(&[x])).unwrap()[0]),
            Box::new(|_| 0.0),
            vec![],
        ),
    ];
    let mut worst = Vec::new();
    let mut pass = true;
    for (name, prox, h, extra) in &cases {
        let mut max_err: f64 = 0.0;
        for _ in 0..100 {
            let t = rng.random_range(0.01..5.0);
            let x = rng.random_range(-10.0..10.0);
            let got = prox(t, x);
            let want = brute_prox_1d(h, t, x, extra);
            max_err = max_err.max((got - want).abs());
        }
        pass &= max_err < 1e-4;
        worst.push(format!("{name} {max_err:.1e}"));
    }
    outcome(pass, format!("max errors: {}", worst.join(", ")))
}

fn criterion_9() -> bisg::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = 0;
    for _ in 0..200 {
        let r = if rng.random_bool(0.5) {
            rng.random_range(0.01..0.99)
        } else {
            rng.random_range(1.01..3.0)
        };
        let n1 = if r > 1.0 { rng.random_range(2..500) } else { rng.random_range(1..500) };
        let n2 = n1 + rng.random_range(0..5_000);
        let bound = harmonic_sum_bound(n1, n2, r)?;
        if direct_power_sum(n1, n2, r) > bound {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("200 triples, {bad} violations"))
}

fn criterion_10() -> bisg::Result<Outcome> {
    let methods = vec![
        MethodSpec::new(MethodKind::BisgV2 { alpha: 0.95, c: 1.0 }),
        MethodSpec::new(MethodKind::BisgV2 { alpha: 0.85, c: 1.0 }),
        MethodSpec::new(MethodKind::Bigsam { delta: 0.01 }),
        MethodSpec::new(MethodKind::Bigsam { delta: 1.0 }),
        MethodSpec::new(MethodKind::IterativeReg { lambda0: 1.0 }),
    ];
    let spec = ExperimentSpec {
        instance: InstanceDescriptor::colinear_ls(7),
        methods,
        budget: Budget {
            iterations: 20_000,
            seconds: None,
        },
        phi_star: PhiStarSource::ReferenceRun,
        output: None,
        clock: Clock::Logical,
        seed: Some(7),
        surrogate_reference: false,
    };
    let res = run_experiment(&spec)?;
    let runs = &res.meta.runs;
    let gap = |i: usize| runs[i].final_phi_gap.unwrap();
    let omega = |i: usize| runs[i].final_omega.unwrap();
    let best = (1..runs.len()).all(|i| gap(0) < gap(i));
    let omega_ok = omega(1) <= omega(0);
    let gaps: Vec<String> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{} {:.3e}", r.label, gap(i)))
        .collect();
    outcome(
        best && omega_ok,
        format!(
            "gaps: {}; omega a0.85 {:.4} vs a0.95 {:.4}",
            gaps.join(", "),
            omega(1),
            omega(0)
        ),
    )
}

fn criterion_11() -> bisg::Result<Outcome> {
    let spec = ExperimentSpec {
        instance: InstanceDescriptor::colinear_ls(7),
        methods: vec![
            MethodSpec::new(MethodKind::BisgV2 { alpha: 0.95, c: 1.0 }),
            MethodSpec::new(MethodKind::BisgV1 { alpha: 0.85, c: 1.0 }),
            MethodSpec::new(MethodKind::Bigsam { delta: 0.01 }),
            MethodSpec::new(MethodKind::IterativeReg { lambda0: 1.0 }),
        ],
        budget: Budget {
            iterations: 2_000,
            seconds: None,
        },
        phi_star: PhiStarSource::ReferenceRun,
        output: None,
        clock: Clock::Logical,
        seed: Some(7),
        surrogate_reference: false,
    };
    let dir = tempfile::tempdir()?;
    let mut bytes = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("run{run}.csv"));
        write_trace_csv(&path, &run_experiment(&spec)?.rows)?;
        bytes.push(std::fs::read(&path)?);
    }
    outcome(
        bytes[0] == bytes[1] && !bytes[0].is_empty(),
        format!("{} bytes per export, identical: {}", bytes[0].len(), bytes[0] == bytes[1]),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> bisg::Result<Outcome>); 11] = [
        ("analytic bi-level solution", criterion_1),
        ("inner-rate bound, colinear LS", criterion_2),
        ("outer-rate bound at k_best", criterion_3),
        ("strongly convex linear rate", criterion_4),
        ("alpha = 1 outer bound", criterion_5),
        ("backtracking L_k range", criterion_6),
        ("quasi-Lipschitz suite", criterion_7),
        ("prox grid-oracle equivalence", criterion_8),
        ("power-sum bound", criterion_9),
        ("method ordering, colinear LS", criterion_10),
        ("byte-identical exports", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
