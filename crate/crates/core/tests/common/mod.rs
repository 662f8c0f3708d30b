#![allow(dead_code)]

use mrpirnn::datagen::{build_verification_set, DataConfig, Trial};
use mrpirnn::dynamics::{muscle_torque, solve_forward_states, solve_forward_substeps, ElbowGeometry, ForwardModel, JointState};
use mrpirnn::muscle::{activation_series, mt_kinematics, ActivationParams};
use mrpirnn::physics::{consistent_activations, residual, Gamma, IdentTargets, ResidualModel};
use mrpirnn::series::TimeSeries;
use mrpirnn::trainer::{build_scale_data, loss_and_gradients, ScaleData, TrainConfig, TrainState};

/// Worst disagreement between tape gradients and central differences.
#[derive(Debug, Clone, Copy)]
pub struct GradReport {
    pub checked: usize,
    pub worst_rel: f64,
    pub worst_tensor: usize,
}

pub fn toy_config(ident: IdentTargets) -> TrainConfig {
    TrainConfig {
        hidden_size: 4,
        history_steps: 2,
        noise_sigma: 0.0,
        beta: 1e-3,
        ident,
        activation: ActivationParams { delay: 0.01, shape: 0.2 },
        ..Default::default()
    }
}

/// Two short trials whose windows cover 10 current steps each.
pub fn toy_trials() -> Vec<Trial> {
    let set = build_verification_set(&DataConfig { samples: 60, ..Default::default() }).unwrap();
    let cut = |s: &TimeSeries| TimeSeries::new(s.dt, s.values[40..52].to_vec());
    set.select(&[1, 4])
        .unwrap()
        .into_iter()
        .map(|t| Trial { index: t.index, emg_bi: cut(&t.emg_bi), emg_tri: cut(&t.emg_tri), q: cut(&t.q) })
        .collect()
}

fn nudge(state: &mut TrainState, p: usize, at: (usize, usize), delta: f64) {
    let n_weights = state.weights.tensors().len();
    if p < n_weights {
        state.weights.tensors_mut()[p][[at.0, at.1]] += delta;
    } else {
        state.ident[p - n_weights][[at.0, at.1]] += delta;
    }
}

fn loss_at(state: &TrainState, data: &ScaleData, config: &TrainConfig) -> f64 {
    loss_and_gradients(state, data, config, None).unwrap().0.loss
}

/// Checks every entry of every trainable tensor. Relative error uses
/// `max(|g|, |fd|, floor)` so vanishing components are judged absolutely.
pub fn check_toy_gradients(config: &TrainConfig, scale: i32, seed: u64) -> GradReport {
    let trials = toy_trials();
    let data = build_scale_data(&trials, scale, config).unwrap();
    let mut state = TrainState::new(config, seed);
    // Move the identified parameters off their starting point.
    for (i, m) in state.ident.iter_mut().enumerate() {
        m.mapv_inplace(|v| v + 0.05 * (i as f64 + 1.0) - 0.1);
    }
    let (_, grads) = loss_and_gradients(&state, &data, config, None).unwrap();
    let mut report = GradReport { checked: 0, worst_rel: 0.0, worst_tensor: 0 };
    let h = 1e-3;
    let floor = 1e-4;
    for p in 0..grads.len() {
        let shape = grads[p].dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let central = |step: f64| {
                    let mut plus = state.clone();
                    let mut minus = state.clone();
                    nudge(&mut plus, p, (r, c), step);
                    nudge(&mut minus, p, (r, c), -step);
                    (loss_at(&plus, &data, config) - loss_at(&minus, &data, config)) / (2.0 * step)
                };
                // Richardson extrapolation cancels the h^2 term.
                let fd = (4.0 * central(h / 2.0) - central(h)) / 3.0;
                let g = grads[p][[r, c]];
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
                if rel > report.worst_rel {
                    report.worst_rel = rel;
                    report.worst_tensor = p;
                }
                report.checked += 1;
            }
        }
    }
    report
}

pub fn normalized_toy() -> TrainConfig {
    toy_config(IdentTargets::normalized(Gamma::from_array([360.0, 0.54, 240.0, 0.44])))
}

pub fn sigmoid_toy() -> TrainConfig {
    toy_config(IdentTargets::sigmoid(IdentTargets::literature_anchors()))
}

/// Mean zero-crossing period of a muscle-free elbow released from `q0`.
pub fn pendulum_period(q0: f64, dt: f64, duration: f64) -> f64 {
    let n = (duration / dt) as usize;
    let silent = TimeSeries::zeros(dt, n);
    let model = ForwardModel::pendulum(ElbowGeometry::default());
    let q = solve_forward_substeps(&silent, &silent, JointState { q: q0, q_dot: 0.0 }, &model, 4).unwrap().values;
    let mut crossings = Vec::new();
    for k in 1..n {
        if q[k - 1] > 0.0 && q[k] <= 0.0 {
            crossings.push((k as f64 - 1.0 + q[k - 1] / (q[k - 1] - q[k])) * dt);
        }
    }
    (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64
}

/// Observed order from successive step halvings on a muscle-driven trial.
/// The horizon ends before either fiber first crosses a force-length
/// breakpoint, where the right-hand side loses smoothness.
pub fn rk4_self_convergence_order() -> f64 {
    let config = DataConfig { noise_sigma: 0.0, samples: 200, ..Default::default() };
    let set = build_verification_set(&config).unwrap();
    let t = set.trial(2).unwrap();
    let init = JointState { q: config.q0, q_dot: config.q_dot0 };
    let g = set.model.geometry;
    let states = solve_forward_states(&t.emg_bi, &t.emg_tri, init, &set.model, 1).unwrap();
    let fibers: Vec<(f64, f64)> = states
        .iter()
        .map(|s| {
            let bi = mt_kinematics(s.q, s.q_dot, &g.biceps_path(), &set.model.biceps).unwrap();
            let tri = mt_kinematics(s.q, s.q_dot, &g.triceps_path(), &set.model.triceps).unwrap();
            (bi.l_norm, tri.l_norm)
        })
        .collect();
    let side = |l: f64| [0.6, 1.0, 1.4].iter().filter(|&&b| l > b).count();
    let cut = fibers
        .iter()
        .position(|f| side(f.0) != side(fibers[0].0) || side(f.1) != side(fibers[0].1))
        .unwrap_or(fibers.len());
    assert!(cut > 40, "smooth horizon too short: {cut}");
    let head = |s: &TimeSeries| TimeSeries::new(s.dt, s.values[..cut].to_vec());
    let (bi, tri) = (head(&t.emg_bi), head(&t.emg_tri));
    let run = |s| solve_forward_substeps(&bi, &tri, init, &set.model, s).unwrap().values;
    let (q1, q2, q4) = (run(1), run(2), run(4));
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    (diff(&q1, &q2) / diff(&q2, &q4)).log2()
}

/// RMS residual of every noise-free trial under the true parameters, and
/// RMS muscle torque along the same trajectories.
pub fn residual_closure() -> (f64, f64) {
    let config = DataConfig { noise_sigma: 0.0, ..Default::default() };
    let set = build_verification_set(&config).unwrap();
    let rm = ResidualModel::default();
    let init = JointState { q: config.q0, q_dot: config.q_dot0 };
    let (mut r_sq, mut t_sq, mut count) = (0.0, 0.0, 0usize);
    for t in &set.trials {
        let a_bi = activation_series(&t.emg_bi, &set.model.activation).unwrap().values;
        let a_tri = activation_series(&t.emg_tri, &set.model.activation).unwrap().values;
        let r = residual(&t.q.values, &consistent_activations(&a_bi), &consistent_activations(&a_tri), &set.truth(), &rm, set.dt)
            .unwrap();
        let states = solve_forward_states(&t.emg_bi, &t.emg_tri, init, &set.model, 1).unwrap();
        let g = &set.model.geometry;
        for k in 1..r.len() - 1 {
            let torque = muscle_torque(a_bi[k], a_tri[k], &states[k], g, &set.model.biceps, &set.model.triceps).unwrap();
            r_sq += r[k] * r[k];
            t_sq += torque * torque;
            count += 1;
        }
    }
    ((r_sq / count as f64).sqrt(), (t_sq / count as f64).sqrt())
}
