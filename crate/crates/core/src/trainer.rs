//! Sequential multi-resolution training: the network and the identified
//! muscle parameters are fitted on the coarsest projection of the data
//! first, then carried over as the starting point for each finer scale,
//! finishing on the raw signals.

use crate::autodiff::{Matrix, SparseRows, Tape};
use crate::datagen::Trial;
use crate::error::{Error, Result};
use crate::muscle::{activation_series, ActivationParams};
use crate::network::{forward_teacher_tape, rollout, GruWeights, StepInput, WindowBatch};
use crate::physics::{
    consistent_activations, metrics, residual_tape, segment_stencils, Gamma, IdentTargets, Metrics, ResidualModel,
    VMAX_PER_LENGTH,
};
use crate::series::TimeSeries;
use crate::wavelet::{build_db2_filter, project_to_scale};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Scale indices from coarse to fine, e.g. `[-2, -1, 0]`.
    pub scales: Vec<i32>,
    /// Total epoch budget, split evenly across scales.
    pub total_epochs: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub history_steps: usize,
    pub hidden_size: usize,
    /// Standard deviation of the noise added to history motion inputs.
    pub noise_sigma: f64,
    pub early_stop_patience: usize,
    pub seeds: Vec<u64>,
    pub train_trial_ids: Vec<usize>,
    pub test_trial_ids: Vec<usize>,
    pub hidden_bias: bool,
    /// Clear the optimizer moments when moving to the next scale.
    pub reset_moments_per_scale: bool,
    pub ident: IdentTargets,
    pub activation: ActivationParams,
    pub residual: ResidualModel,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let truth = Gamma::from_array([300.0, 0.6, 300.0, 0.4]);
        let start = Gamma::from_array([
            truth.f0_bi * 1.2,
            truth.l0_bi * 0.9,
            truth.f0_tri * 0.8,
            truth.l0_tri * 1.1,
        ]);
        Self {
            scales: vec![-2, -1, 0],
            total_epochs: 3000,
            learning_rate: 1e-3,
            beta: 1e-3,
            history_steps: 2,
            hidden_size: 50,
            noise_sigma: 0.01,
            early_stop_patience: 200,
            seeds: vec![0, 1, 2],
            train_trial_ids: vec![1, 2, 4, 5],
            test_trial_ids: vec![3],
            hidden_bias: true,
            reset_moments_per_scale: true,
            ident: IdentTargets::normalized(start),
            activation: ActivationParams::default(),
            residual: ResidualModel::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.scales.is_empty() || self.scales.last() != Some(&0) {
            return bad("scales must end at 0");
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return bad("scales must be strictly increasing");
        }
        if self.total_epochs < self.scales.len() {
            return bad("total epoch budget must cover every scale");
        }
        if !(self.learning_rate > 0.0) || !(self.beta >= 0.0) || !(self.noise_sigma >= 0.0) {
            return bad("learning rate must be positive, beta and noise non-negative");
        }
        if self.hidden_size == 0 {
            return bad("hidden size must be positive");
        }
        if self.seeds.is_empty() || self.train_trial_ids.is_empty() {
            return bad("need at least one seed and one training trial");
        }
        self.activation.validate()?;
        self.ident.validate()
    }

    pub fn epochs_per_scale(&self) -> usize {
        self.total_epochs / self.scales.len()
    }
}

/// Adam moments shared by every trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            m: shapes.iter().map(|&s| Matrix::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Matrix::zeros(s)).collect(),
            step: 0,
        }
    }

    pub fn reset(&mut self) {
        self.m.iter_mut().chain(self.v.iter_mut()).for_each(|x| x.fill(0.0));
        self.step = 0;
    }
}

/// One Adam update in place.
pub fn adam_step(params: &mut [&mut Matrix], grads: &[Matrix], adam: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || grads.len() != adam.m.len() {
        return Err(Error::ShapeMismatch(format!("{} parameters, {} gradients", params.len(), grads.len())));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.dim() != g.dim() {
            return Err(Error::ShapeMismatch(format!("gradient {:?} for parameter {:?}", g.dim(), p.dim())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged("non-finite gradient".into()));
        }
    }
    adam.step += 1;
    let t = adam.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = &grads[i];
        let m = &mut adam.m[i];
        let v = &mut adam.v[i];
        ndarray::Zip::from(&mut **p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub loss: f64,
    pub data: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub weights: GruWeights,
    /// `gamma_bar` or `psi`, one tensor per identified parameter.
    pub ident: Vec<Matrix>,
    pub adam: AdamState,
    pub scale_index: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    pub fn new(config: &TrainConfig, seed: u64) -> Self {
        let mut weights = GruWeights::init(config.hidden_size, 3, seed);
        weights.hidden_bias = config.hidden_bias;
        let ident = config.ident.initial_trainables();
        let shapes: Vec<_> = weights.tensors().iter().map(|m| m.dim()).chain(ident.iter().map(|m| m.dim())).collect();
        Self { weights, ident, adam: AdamState::new(&shapes), scale_index: 0, history: Vec::new() }
    }

    pub fn gamma(&self, config: &TrainConfig) -> Gamma {
        config.ident.gamma(&self.ident)
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut p: Vec<&mut Matrix> = self.weights.tensors_mut().into_iter().collect();
        p.extend(self.ident.iter_mut());
        p
    }

    pub fn adam_step(&mut self, grads: &[Matrix], lr: f64) -> Result<()> {
        let mut adam = std::mem::replace(&mut self.adam, AdamState::new(&[]));
        let result = adam_step(&mut self.params_mut(), grads, &mut adam, lr);
        self.adam = adam;
        result
    }
}

/// Training windows of one scale with everything the loss needs.
#[derive(Debug, Clone)]
pub struct ScaleData {
    pub scale: i32,
    pub batch: WindowBatch,
    pub segments: Vec<usize>,
    pub a_bi: Matrix,
    pub a_tri: Matrix,
    pub d1: SparseRows,
    pub d2: SparseRows,
    pub dt: f64,
}

fn row(v: Vec<f64>) -> Matrix {
    let n = v.len();
    Matrix::from_shape_vec((1, n), v).expect("row")
}

/// Projects every trial to `scale`, then cuts it into teacher-forcing
/// windows whose current steps cover samples `m..n` of each trial.
pub fn build_scale_data(trials: &[Trial], scale: i32, config: &TrainConfig) -> Result<ScaleData> {
    let first = trials.first().ok_or(Error::Empty("training trials"))?;
    let dt = first.q.dt;
    let filter = build_db2_filter();
    let j = (-scale) as usize;
    let m = config.history_steps;
    let mut windows = Vec::new();
    let mut targets = Vec::new();
    let mut segments = Vec::new();
    let (mut a_bi, mut a_tri) = (Vec::new(), Vec::new());
    for trial in trials {
        let n = trial.q.len();
        if trial.emg_bi.len() != n || trial.emg_tri.len() != n || trial.q.dt != dt {
            return Err(Error::ShapeMismatch(format!("trial {} signals are not aligned", trial.index)));
        }
        if n < m + 4 {
            return Err(Error::InvalidParameter(format!("trial {} too short for {m} history steps", trial.index)));
        }
        let eb = project_to_scale(&trial.emg_bi, j, &filter)?;
        let et = project_to_scale(&trial.emg_tri, j, &filter)?;
        let q = project_to_scale(&trial.q, j, &filter)?;
        let ab = consistent_activations(&activation_series(&eb, &config.activation)?.values);
        let at = consistent_activations(&activation_series(&et, &config.activation)?.values);
        for k in m..n {
            windows.push(
                (k - m..=k)
                    .map(|i| StepInput {
                        t: i as f64 * dt,
                        emg: vec![eb.values[i], et.values[i]],
                        q: if i < k { Some(q.values[i]) } else { None },
                    })
                    .collect::<Vec<_>>(),
            );
            targets.push(q.values[k]);
        }
        a_bi.extend_from_slice(&ab[m..]);
        a_tri.extend_from_slice(&at[m..]);
        segments.push(n - m);
    }
    let batch = WindowBatch::from_steps(&windows, &targets)?;
    let (d1, d2) = segment_stencils(&segments, dt)?;
    Ok(ScaleData { scale, batch, segments, a_bi: row(a_bi), a_tri: row(a_tri), d1, d2, dt })
}

/// Loss and gradients at the current parameters. `history_q` replaces the
/// measured history motion when noise augmentation is active.
pub fn loss_and_gradients(
    state: &TrainState,
    data: &ScaleData,
    config: &TrainConfig,
    history_q: Option<&[Matrix]>,
) -> Result<(EpochRecord, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let vars = state.weights.record(&mut tape);
    let (ident_leaves, gamma) = config.ident.record(&mut tape, &state.ident)?;
    let q_hat = forward_teacher_tape(&mut tape, &vars, &data.batch, history_q)?;
    let target = tape.constant(data.batch.target.clone());
    let diff = tape.sub(q_hat, target)?;
    let sq = tape.square(diff);
    let j_data = tape.mean(sq);
    let r = residual_tape(&mut tape, q_hat, &data.d1, &data.d2, &data.a_bi, &data.a_tri, gamma, &config.residual)?;
    let r2 = tape.square(r);
    let j_res = tape.mean(r2);
    let weighted = tape.scale(j_res, config.beta);
    let j = tape.add(j_data, weighted)?;
    let record = EpochRecord { loss: tape.scalar(j), data: tape.scalar(j_data), residual: tape.scalar(j_res) };
    let grads = tape.backward(j)?;
    let mut out: Vec<Matrix> = vars.tensors().iter().map(|v| grads.wrt(*v)).collect();
    out.extend(ident_leaves.iter().map(|v| grads.wrt(*v)));
    Ok((record, out))
}

/// Outcome of training on one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub scale: i32,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub best: EpochRecord,
    /// Best loss seen so far after each epoch.
    pub best_trace: Vec<f64>,
    /// Identified values after each epoch.
    pub gamma_trace: Vec<Gamma>,
}

pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

fn noisy_history(batch: &WindowBatch, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<Matrix> {
    let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
    batch.history_q.iter().map(|q| q.mapv(|v| v + normal.sample(rng))).collect()
}

/// Full-batch Adam on one scale with early stopping; leaves the best
/// parameters in `state`.
pub fn train_scale(
    data: &ScaleData,
    state: &mut TrainState,
    config: &TrainConfig,
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ScaleSummary> {
    let mut summary = ScaleSummary {
        scale: data.scale,
        epochs_run: 0,
        best_epoch: 0,
        best_loss: f64::INFINITY,
        best: EpochRecord { loss: f64::INFINITY, data: f64::INFINITY, residual: f64::INFINITY },
        best_trace: Vec::with_capacity(epochs),
        gamma_trace: Vec::with_capacity(epochs),
    };
    if epochs == 0 {
        return Ok(summary);
    }
    let mut best = (state.weights.clone(), state.ident.clone());
    for epoch in 0..epochs {
        let noisy = (config.noise_sigma > 0.0).then(|| noisy_history(&data.batch, config.noise_sigma, rng));
        let (record, grads) = loss_and_gradients(state, data, config, noisy.as_deref())?;
        if !record.loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss at scale {} epoch {epoch}", data.scale)));
        }
        if record.loss < summary.best_loss {
            summary.best_loss = record.loss;
            summary.best = record;
            summary.best_epoch = epoch;
            best = (state.weights.clone(), state.ident.clone());
        }
        state.history.push(record);
        state.adam_step(&grads, config.learning_rate)?;
        if !config.ident.admissible(&state.ident) {
            return Err(Error::Diverged(format!("identified parameters left the admissible set at epoch {epoch}")));
        }
        summary.epochs_run = epoch + 1;
        summary.best_trace.push(summary.best_loss);
        summary.gamma_trace.push(state.gamma(config));
        if epoch - summary.best_epoch >= config.early_stop_patience {
            break;
        }
    }
    state.weights = best.0;
    state.ident = best.1;
    Ok(summary)
}

/// Rollout metrics on one raw trial, over the predicted samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub trials: Vec<TrialMetrics>,
    pub mean: Metrics,
    pub gamma: Gamma,
    /// Maximum contraction velocities derived from the identified lengths.
    pub vmax_bi: f64,
    pub vmax_tri: f64,
}

pub fn trial_inputs(trial: &Trial) -> Vec<StepInput> {
    (0..trial.q.len())
        .map(|i| StepInput { t: trial.q.time(i), emg: vec![trial.emg_bi.values[i], trial.emg_tri.values[i]], q: None })
        .collect()
}

pub fn predict_trial(weights: &GruWeights, trial: &Trial, history_steps: usize) -> Result<TimeSeries> {
    let seed = &trial.q.values[..history_steps];
    Ok(TimeSeries::new(trial.q.dt, rollout(&trial_inputs(trial), seed, weights)?))
}

pub fn evaluate(weights: &GruWeights, gamma: Gamma, trials: &[Trial], history_steps: usize) -> Result<Evaluation> {
    if trials.is_empty() {
        return Err(Error::Empty("test trials"));
    }
    let mut out = Vec::with_capacity(trials.len());
    for trial in trials {
        let pred = predict_trial(weights, trial, history_steps)?;
        let m = metrics(&trial.q.values[history_steps..], &pred.values[history_steps..])?;
        out.push(TrialMetrics { trial: trial.index, metrics: m });
    }
    let k = out.len() as f64;
    let mean = Metrics {
        mse: out.iter().map(|t| t.metrics.mse).sum::<f64>() / k,
        r2: out.iter().map(|t| t.metrics.r2).sum::<f64>() / k,
        nmse: out.iter().map(|t| t.metrics.nmse).sum::<f64>() / k,
    };
    Ok(Evaluation {
        trials: out,
        mean,
        gamma,
        vmax_bi: VMAX_PER_LENGTH * gamma.l0_bi,
        vmax_tri: VMAX_PER_LENGTH * gamma.l0_tri,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub summary: ScaleSummary,
    pub gamma: Gamma,
    pub test: Option<Evaluation>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub state: TrainState,
    pub scales: Vec<ScaleReport>,
    /// Parameters entering each scale, for transfer checks.
    pub entering: Vec<(GruWeights, Vec<Matrix>)>,
    /// Retained parameters at the end of each scale.
    pub leaving: Vec<(GruWeights, Vec<Matrix>)>,
    pub seconds: f64,
}

impl RunOutcome {
    pub fn gamma(&self, config: &TrainConfig) -> Gamma {
        self.state.gamma(config)
    }

    pub fn final_test(&self) -> Option<&Evaluation> {
        self.scales.last().and_then(|s| s.test.as_ref())
    }
}

/// Coarse-to-fine training for one seed. `test` may be empty.
pub fn train_multiresolution(train: &[Trial], test: &[Trial], config: &TrainConfig, seed: u64) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut state = TrainState::new(config, seed);
    let mut rng = noise_rng(seed);
    let epochs = config.epochs_per_scale();
    let mut scales = Vec::with_capacity(config.scales.len());
    let mut entering = Vec::with_capacity(config.scales.len());
    let mut leaving = Vec::with_capacity(config.scales.len());
    for (i, &scale) in config.scales.iter().enumerate() {
        let data = build_scale_data(train, scale, config)?;
        if i > 0 && config.reset_moments_per_scale {
            state.adam.reset();
        }
        state.scale_index = i;
        entering.push((state.weights.clone(), state.ident.clone()));
        let summary = train_scale(&data, &mut state, config, epochs, &mut rng)?;
        leaving.push((state.weights.clone(), state.ident.clone()));
        let gamma = state.gamma(config);
        let test_eval = if test.is_empty() {
            None
        } else {
            Some(evaluate(&state.weights, gamma, test, config.history_steps)?)
        };
        scales.push(ScaleReport { summary, gamma, test: test_eval });
    }
    Ok(RunOutcome { seed, state, scales, entering, leaving, seconds: start.elapsed().as_secs_f64() })
}

/// Runs every configured seed in parallel; failures are reported per seed.
pub fn train_seeds(train: &[Trial], test: &[Trial], config: &TrainConfig) -> Vec<(u64, Result<RunOutcome>)> {
    config
        .seeds
        .par_iter()
        .map(|&seed| (seed, train_multiresolution(train, test, config, seed)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_verification_set, DataConfig};

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut p = Matrix::from_elem((2, 2), 0.5);
        let mut adam = AdamState::new(&[(2, 2)]);
        adam_step(&mut [&mut p], &[Matrix::zeros((2, 2))], &mut adam, 1e-3).unwrap();
        assert_eq!(p, Matrix::from_elem((2, 2), 0.5));
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn adam_constant_gradient_moves_by_lr() {
        let mut p = Matrix::zeros((1, 2));
        let mut adam = AdamState::new(&[(1, 2)]);
        let g = Matrix::from_shape_vec((1, 2), vec![3.0, -0.2]).unwrap();
        let mut prev = p.clone();
        for _ in 0..500 {
            prev = p.clone();
            adam_step(&mut [&mut p], &[g.clone()], &mut adam, 0.01).unwrap();
        }
        let step = &p - &prev;
        assert!((step[[0, 0]] + 0.01).abs() < 1e-6);
        assert!((step[[0, 1]] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn adam_matches_hand_trace_on_quadratic() {
        // f(x) = x^2 from x = 1 with lr = 0.1
        let mut x = Matrix::from_elem((1, 1), 1.0);
        let mut adam = AdamState::new(&[(1, 1)]);
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let (mut m, mut v, mut want) = (0.0, 0.0, 1.0f64);
        for t in 1..=2 {
            let g = 2.0 * want;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            want -= lr * mh / (vh.sqrt() + eps);
            let grad = x.mapv(|x| 2.0 * x);
            adam_step(&mut [&mut x], &[grad], &mut adam, lr).unwrap();
        }
        assert!((x[[0, 0]] - want).abs() < 1e-15);
        assert!((want - 0.8).abs() < 1e-3);
    }

    #[test]
    fn adam_rejects_bad_gradients() {
        let mut p = Matrix::zeros((1, 1));
        let mut adam = AdamState::new(&[(1, 1)]);
        let bad = Matrix::from_elem((1, 1), f64::NAN);
        assert!(matches!(adam_step(&mut [&mut p], &[bad], &mut adam, 0.1), Err(Error::Diverged(_))));
        assert!(adam_step(&mut [&mut p], &[Matrix::zeros((2, 1))], &mut adam, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { scales: vec![-1, -2, 0], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { scales: vec![-2, -1], ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(TrainConfig::default().epochs_per_scale(), 1000);
    }

    fn small_config() -> TrainConfig {
        TrainConfig { hidden_size: 6, total_epochs: 6, scales: vec![-1, 0], seeds: vec![4], ..Default::default() }
    }

    #[test]
    fn scale_data_layout() {
        let set = build_verification_set(&DataConfig::default()).unwrap();
        let trials = set.select(&[1, 2]).unwrap();
        let config = small_config();
        let d = build_scale_data(&trials, 0, &config).unwrap();
        assert_eq!(d.batch.len(), 2 * 498);
        assert_eq!(d.segments, vec![498, 498]);
        assert_eq!(d.batch.target[[0, 0]], trials[0].q.values[2]);
        assert_eq!(d.batch.history_q[1][[0, 498]], trials[1].q.values[1]);
        assert_eq!(d.a_bi.ncols(), 996);
    }

    #[test]
    fn zero_epochs_leave_state_unchanged() {
        let set = build_verification_set(&DataConfig::default()).unwrap();
        let trials = set.select(&[1]).unwrap();
        let config = small_config();
        let data = build_scale_data(&trials, 0, &config).unwrap();
        let mut state = TrainState::new(&config, 1);
        let before = state.clone();
        train_scale(&data, &mut state, &config, 0, &mut noise_rng(1)).unwrap();
        assert_eq!(state, before);
    }

    #[test]
    fn transfer_and_determinism() {
        let set = build_verification_set(&DataConfig::default()).unwrap();
        let train = set.select(&[1]).unwrap();
        let test = set.select(&[3]).unwrap();
        let config = small_config();
        let a = train_multiresolution(&train, &test, &config, 4).unwrap();
        let b = train_multiresolution(&train, &test, &config, 4).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.scales, b.scales);
        assert_eq!(a.scales.len(), 2);
        assert_eq!(a.entering[1], a.leaving[0]);
        assert_ne!(a.entering[0], a.leaving[0]);
        for w in a.scales[0].summary.best_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
