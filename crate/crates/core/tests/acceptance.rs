//! Acceptance suite: one PASS/FAIL line per criterion. The run is a report and
//! exits 0 regardless; set `ACCEPTANCE_STRICT=1` to exit non-zero on any FAIL.
//! Criterion 5 trains nine full-size networks and takes roughly twenty
//! minutes on one core.

mod common;

use mrpirnn::datagen::{build_verification_set, DataConfig, Trial};
use mrpirnn::muscle::{active_force_length, passive_force_length};
use mrpirnn::physics::{Gamma, IdentTargets, Metrics, PARAM_LABELS};
use mrpirnn::series::TimeSeries;
use mrpirnn::trainer::{
    build_scale_data, evaluate, noise_rng, train_multiresolution, train_scale, train_seeds, TrainConfig, TrainState,
};
use mrpirnn::wavelet::{build_db2_filter, decompose, reconstruct};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: String) -> Self {
        Self { pass, summary, details: Vec::new() }
    }
}

fn verification_split(sigma: f64) -> (Vec<Trial>, Vec<Trial>, Gamma) {
    let set = build_verification_set(&DataConfig { noise_sigma: sigma, ..Default::default() }).unwrap();
    (set.select(&[1, 2, 4, 5]).unwrap(), set.select(&[3]).unwrap(), set.truth())
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let filter = build_db2_filter();
    let h = &filter.lowpass;
    let g = &filter.highpass;
    let shifted = |a: &[f64], b: &[f64], m: usize| (0..a.len() - m).map(|k| a[k + m] * b[k]).sum::<f64>();
    let mut ortho: f64 = 0.0;
    ortho = ortho.max((shifted(h, h, 0) - 1.0).abs());
    ortho = ortho.max((shifted(g, g, 0) - 1.0).abs());
    ortho = ortho.max(shifted(h, h, 2).abs());
    ortho = ortho.max(shifted(g, g, 2).abs());
    ortho = ortho.max(shifted(h, g, 0).abs());
    ortho = ortho.max(shifted(h, g, 2).abs()).max(shifted(g, h, 2).abs());
    ortho = ortho.max((h.iter().sum::<f64>() - 2f64.sqrt()).abs());
    ortho = ortho.max(g.iter().sum::<f64>().abs());

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let len = if i % 2 == 0 { 500 } else { 512 };
        let depth = 1 + i % 4;
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = TimeSeries::new(0.005, x.clone());
        let back = reconstruct(&decompose(&s, depth, &filter).unwrap(), &filter).unwrap();
        assert_eq!(back.len(), len);
        worst = worst.max(x.iter().zip(&back.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        worst < 1e-10 && ortho < 1e-12 && secs < 5.0,
        format!("round-trip max error {worst:.2e}, orthonormality defect {ortho:.2e}, {secs:.2} s"),
    )
}

fn criterion_2() -> Verdict {
    // Values at the neighbouring floats on either side of each breakpoint.
    let jump = |f: fn(f64) -> f64, x: f64| {
        let (below, above) = (f64::from_bits(x.to_bits() - 1), f64::from_bits(x.to_bits() + 1));
        (f(above) - f(below)).abs()
    };
    let active = jump(active_force_length, 0.6).max(jump(active_force_length, 1.4));
    let passive = jump(passive_force_length, 1.0).max(jump(passive_force_length, 1.4));
    let peak = active_force_length(1.0);
    let expected = 0.075 * ((2.64f64).exp() - 1.0);
    let p14 = (passive_force_length(1.4) - expected).abs();
    Verdict::new(
        active < 1e-12 && passive < 1e-12 && peak == 1.0 && p14 < 1e-12,
        format!("active jump {active:.1e}, passive jump {passive:.1e}, f_AL(1) = {peak}, |f_P(1.4) - ref| = {p14:.1e}"),
    )
}

fn criterion_3() -> Verdict {
    let expected = 2.0 * PI * (1.0f64 / 9.81).sqrt();
    let period = common::pendulum_period(0.05, 0.001, 12.0);
    let period_err = (period / expected - 1.0).abs();
    let order = common::rk4_self_convergence_order();
    let (r, torque) = common::residual_closure();
    Verdict::new(
        period_err < 0.005 && order >= 3.5 && torque >= 100.0 * r,
        format!(
            "period error {:.3}%, RK4 order {order:.2}, residual/torque RMS {r:.2e}/{torque:.2e} (ratio {:.0})",
            100.0 * period_err,
            torque / r
        ),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let normalized = common::check_toy_gradients(&common::normalized_toy(), 0, 11);
    let sigmoid = common::check_toy_gradients(&common::sigmoid_toy(), 0, 12);
    let secs = start.elapsed().as_secs_f64();
    let worst = normalized.worst_rel.max(sigmoid.worst_rel);
    Verdict::new(
        worst < 1e-5 && secs < 10.0,
        format!(
            "{} + {} entries, worst relative error {worst:.2e}, {secs:.2} s",
            normalized.checked, sigmoid.checked
        ),
    )
}

struct ConfigOutcome {
    scales: Vec<i32>,
    errors: Vec<[f64; 4]>,
    tests: Vec<Metrics>,
    failures: Vec<String>,
}

fn criterion_5() -> Verdict {
    let (train, test, truth) = verification_split(0.1);
    let mut outcomes = Vec::new();
    for scales in [vec![0], vec![-1, 0], vec![-2, -1, 0]] {
        let config = TrainConfig { scales: scales.clone(), seeds: vec![0, 1, 2], ..Default::default() };
        let mut out = ConfigOutcome { scales, errors: vec![], tests: vec![], failures: vec![] };
        for (seed, run) in train_seeds(&train, &test, &config) {
            match run {
                Ok(run) => {
                    out.errors.push(run.gamma(&config).relative_errors(&truth));
                    out.tests.push(run.final_test().unwrap().mean);
                }
                Err(e) => out.failures.push(format!("seed {seed}: {e}")),
            }
        }
        outcomes.push(out);
    }

    let mut details = Vec::new();
    let mut identified = true;
    let mut means = Vec::new();
    for o in &outcomes {
        let k = o.errors.len().max(1) as f64;
        let avg: [f64; 4] = std::array::from_fn(|i| 100.0 * o.errors.iter().map(|e| e[i].abs()).sum::<f64>() / k);
        let mse = o.tests.iter().map(|m| m.mse).sum::<f64>() / o.tests.len().max(1) as f64;
        let r2 = o.tests.iter().map(|m| m.r2).sum::<f64>() / o.tests.len().max(1) as f64;
        identified &= o.failures.is_empty() && avg.iter().all(|e| *e < 2.0);
        means.push((mse, r2));
        let summary = if o.errors.is_empty() {
            "no seed converged".to_string()
        } else {
            let params: Vec<String> = PARAM_LABELS.iter().zip(avg).map(|(l, e)| format!("{l} {e:.2}%")).collect();
            format!("mean |error| {}; test MSE {mse:.3e}, R2 {r2:.4}", params.join(", "))
        };
        details.push(format!(
            "{}-scale {:?}: {summary}; {} of 3 seeds converged",
            o.scales.len(),
            o.scales,
            o.errors.len()
        ));
        details.extend(o.failures.iter().map(|f| format!("  {f}")));
    }
    let all_converged = outcomes.iter().all(|o| o.failures.is_empty());
    let trend = all_converged && means.windows(2).all(|w| w[1].0 <= w[0].0 && w[1].1 >= w[0].1);
    let mut v = Verdict::new(
        identified && trend,
        format!(
            "(a) identification within 2%: {}; (b) monotone test MSE/R2: {}",
            if identified { "yes" } else { "no" },
            if trend { "yes" } else { "no" }
        ),
    );
    v.details = details;
    v
}

fn criterion_6() -> Verdict {
    let (train, test, _) = verification_split(0.1);
    let anchors = IdentTargets::literature_anchors();
    let upper: Vec<f64> = anchors.iter().map(|a| a.iter().sum::<f64>() / a.len() as f64).collect();
    let sigmoid = TrainConfig {
        scales: vec![-1, 0],
        total_epochs: 400,
        hidden_size: 16,
        ident: IdentTargets::sigmoid(anchors),
        ..Default::default()
    };
    let run = train_multiresolution(&train, &test, &sigmoid, 0);
    let (boxed, epochs) = match &run {
        Ok(r) => {
            let trace: Vec<&Gamma> = r.scales.iter().flat_map(|s| &s.summary.gamma_trace).collect();
            let inside = trace.iter().all(|g| g.to_array().iter().zip(&upper).all(|(v, u)| *v > 0.0 && v < u));
            (inside && !trace.is_empty(), trace.len())
        }
        Err(_) => (false, 0),
    };

    let five = TrainConfig { scales: vec![-4, -3, -2, -1, 0], total_epochs: 100, hidden_size: 16, ..Default::default() };
    let deep = train_multiresolution(&train, &test, &five, 0);
    let deep_ok = deep.as_ref().is_ok_and(|r| {
        r.scales.len() == 5 && r.scales.iter().all(|s| s.summary.epochs_run > 0 && s.test.as_ref().is_some_and(|t| t.mean.mse.is_finite()))
    });
    let deep_note = match &deep {
        Ok(r) => format!("final test R2 {:.3}", r.final_test().unwrap().mean.r2),
        Err(e) => e.to_string(),
    };
    Verdict::new(
        boxed && deep_ok,
        format!(
            "(a) sigmoid box held over {epochs} epochs: {}; (b) 5-scale run: {} ({deep_note})",
            if boxed { "yes" } else { "no" },
            if deep_ok { "completed" } else { "failed" }
        ),
    )
}

fn criterion_7() -> Verdict {
    let (train, test, _) = verification_split(0.1);
    let config = TrainConfig { scales: vec![0], total_epochs: 150, hidden_size: 16, ..Default::default() };
    let seed = 5;
    let multi = train_multiresolution(&train, &test, &config, seed).unwrap();

    let mut state = TrainState::new(&config, seed);
    let data = build_scale_data(&train, 0, &config).unwrap();
    let mut rng = noise_rng(seed);
    let summary = train_scale(&data, &mut state, &config, config.total_epochs, &mut rng).unwrap();
    let eval = evaluate(&state.weights, state.gamma(&config), &test, config.history_steps).unwrap();

    let bits = |w: &TrainState| -> Vec<u64> {
        w.weights.tensors().iter().flat_map(|m| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
    };
    let same = bits(&state) == bits(&multi.state)
        && state.ident == multi.state.ident
        && summary == multi.scales[0].summary
        && Some(&eval) == multi.final_test();
    Verdict::new(
        same,
        format!("{} epochs, weights/identification/metrics bit-identical: {}", summary.epochs_run, if same { "yes" } else { "no" }),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Verdict); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|_| Verdict::new(false, "panicked".to_string()));
        for d in &verdict.details {
            println!("    {d}");
        }
        println!(
            "criterion {id}: {} - {} [{:.1} s]",
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.summary,
            start.elapsed().as_secs_f64()
        );
        if !verdict.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        if std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
            std::process::exit(1);
        }
    }
}
