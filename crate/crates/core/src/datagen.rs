//! Synthetic verification data: five antagonistic sEMG trial pairs with
//! trial-dependent frequency content, optional Gaussian corruption, and the
//! joint motion they produce through the forward model.

use crate::dynamics::{solve_forward, ForwardModel, JointState};
use crate::error::{Error, Result};
use crate::physics::Gamma;
use crate::series::TimeSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

pub const TRIAL_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// 1-based trial number.
    pub index: usize,
    pub emg_bi: TimeSeries,
    pub emg_tri: TimeSeries,
    pub q: TimeSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub dt: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub model: ForwardModel,
    pub initial: JointState,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl TrialSet {
    pub fn truth(&self) -> Gamma {
        Gamma::from_muscles(&self.model.biceps, &self.model.triceps)
    }

    pub fn trial(&self, index: usize) -> Option<&Trial> {
        self.trials.iter().find(|t| t.index == index)
    }

    pub fn select(&self, ids: &[usize]) -> Result<Vec<Trial>> {
        ids.iter()
            .map(|&i| self.trial(i).cloned().ok_or_else(|| Error::InvalidConfig(format!("no trial {i}"))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub samples: usize,
    pub dt: f64,
    pub q0: f64,
    pub q_dot0: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { samples: 500, dt: 0.005, q0: PI / 6.0, q_dot0: 0.0, noise_sigma: 0.1, seed: 7 }
    }
}

fn trial_rng(seed: u64, trial_index: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream * 16 + trial_index as u64);
    rng
}

/// Raised-cosine burst envelopes: the biceps carries a base component at
/// `0.4 * trial_index` Hz plus a faster one, the triceps a phase-shifted
/// base component plus its own faster one. The seed jitters the phases.
pub fn synth_emg(trial_index: usize, n: usize, dt: f64, seed: u64) -> Result<(TimeSeries, TimeSeries)> {
    if !(1..=TRIAL_COUNT).contains(&trial_index) {
        return Err(Error::InvalidParameter(format!("trial index {trial_index} outside 1..={TRIAL_COUNT}")));
    }
    let mut rng = trial_rng(seed, trial_index, 0);
    let jitter = Uniform::new(-0.3, 0.3).expect("valid range");
    let p: [f64; 4] = std::array::from_fn(|_| jitter.sample(&mut rng));
    let f = 0.4 * trial_index as f64;
    let raised = |x: f64| 0.5 * (1.0 - x.cos());
    let mut bi = Vec::with_capacity(n);
    let mut tri = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let w = TAU * f * t;
        let b = 0.3 + 0.25 * raised(w + p[0]) + 0.1 * raised(2.1 * w + 0.7 + p[1]);
        let c = 0.2 + 0.25 * raised(w + PI + 0.9 + p[2]) + 0.1 * raised(1.7 * w + p[3]);
        bi.push(b.clamp(0.0, 1.0));
        tri.push(c.clamp(0.0, 1.0));
    }
    Ok((TimeSeries::new(dt, bi), TimeSeries::new(dt, tri)))
}

/// `len` draws from `N(0, sigma^2)`.
pub fn gaussian_noise(len: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; len];
    }
    let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
    (0..len).map(|_| normal.sample(rng)).collect()
}

/// Corrupts every sEMG sample, clamps to `[0, 1]`, and regenerates the
/// motion from the corrupted signals.
pub fn apply_noise_case(
    clean: &[(TimeSeries, TimeSeries)],
    sigma: f64,
    seed: u64,
    model: &ForwardModel,
    initial: JointState,
) -> Result<Vec<Trial>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma} must be non-negative")));
    }
    clean
        .iter()
        .enumerate()
        .map(|(i, (bi, tri))| {
            let index = i + 1;
            let mut rng = trial_rng(seed, index, 1);
            let corrupt = |s: &TimeSeries, rng: &mut ChaCha8Rng| {
                let noise = gaussian_noise(s.len(), sigma, rng);
                let values = s.values.iter().zip(noise).map(|(v, e)| (v + e).clamp(0.0, 1.0)).collect();
                TimeSeries::new(s.dt, values)
            };
            let emg_bi = if sigma == 0.0 { bi.clone() } else { corrupt(bi, &mut rng) };
            let emg_tri = if sigma == 0.0 { tri.clone() } else { corrupt(tri, &mut rng) };
            let q = solve_forward(&emg_bi, &emg_tri, initial, model)?;
            Ok(Trial { index, emg_bi, emg_tri, q })
        })
        .collect()
}

/// Five trials at the given noise level; trials 1, 2, 4, 5 train and trial
/// 3 tests.
pub fn build_verification_set(config: &DataConfig) -> Result<TrialSet> {
    build_trial_set(config, &ForwardModel::default())
}

pub fn build_trial_set(config: &DataConfig, model: &ForwardModel) -> Result<TrialSet> {
    if config.samples < 8 || !(config.dt > 0.0) {
        return Err(Error::InvalidConfig(format!("invalid sampling {} x {}", config.samples, config.dt)));
    }
    let clean = (1..=TRIAL_COUNT)
        .map(|k| synth_emg(k, config.samples, config.dt, config.seed))
        .collect::<Result<Vec<_>>>()?;
    let initial = JointState { q: config.q0, q_dot: config.q_dot0 };
    let trials = apply_noise_case(&clean, config.noise_sigma, config.seed, model, initial)?;
    Ok(TrialSet {
        trials,
        dt: config.dt,
        noise_sigma: config.noise_sigma,
        seed: config.seed,
        model: *model,
        initial,
        train_ids: vec![1, 2, 4, 5],
        test_ids: vec![3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{consistent_activations, residual, ResidualModel};
    use crate::muscle::activation_series;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn peak_frequency(x: &[f64], dt: f64) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let (k, _) = buf[1..n / 2]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        (k + 1) as f64 / (n as f64 * dt)
    }

    #[test]
    fn envelopes_are_bounded_and_deterministic() {
        for k in 1..=5 {
            let (b, t) = synth_emg(k, 500, 0.005, 3).unwrap();
            assert!(b.values.iter().chain(&t.values).all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(synth_emg(k, 500, 0.005, 3).unwrap(), (b, t));
        }
        assert!(synth_emg(0, 500, 0.005, 3).is_err());
        assert!(synth_emg(6, 500, 0.005, 3).is_err());
    }

    #[test]
    fn frequency_grows_with_trial_index() {
        let (b1, _) = synth_emg(1, 500, 0.005, 1).unwrap();
        let (b5, _) = synth_emg(5, 500, 0.005, 1).unwrap();
        assert!(peak_frequency(&b5.values, 0.005) >= 2.0 * peak_frequency(&b1.values, 0.005));
    }

    #[test]
    fn noise_cases() {
        let model = ForwardModel::default();
        let init = JointState { q: PI / 6.0, q_dot: 0.0 };
        let clean: Vec<_> = (1..=5).map(|k| synth_emg(k, 500, 0.005, 2).unwrap()).collect();
        let same = apply_noise_case(&clean, 0.0, 2, &model, init).unwrap();
        for (t, (b, c)) in same.iter().zip(&clean) {
            assert_eq!(&t.emg_bi, b);
            assert_eq!(&t.emg_tri, c);
        }
        let noisy = apply_noise_case(&clean, 0.2, 2, &model, init).unwrap();
        assert!(noisy.iter().all(|t| t.emg_bi.values.iter().chain(&t.emg_tri.values).all(|v| (0.0..=1.0).contains(v))));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = gaussian_noise(5 * 2 * 500, 0.1, &mut rng);
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let std = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std / 0.1 - 1.0).abs() < 0.02);
    }

    #[test]
    fn verification_set_structure() {
        let set = build_verification_set(&DataConfig::default()).unwrap();
        assert_eq!(set.trials.len(), 5);
        assert!(set.trials.iter().all(|t| t.q.len() == 500 && t.emg_bi.len() == 500));
        assert_eq!(set.train_ids, vec![1, 2, 4, 5]);
        assert_eq!(set.test_ids, vec![3]);
        let truth = set.truth();
        assert_eq!(truth.to_array(), [300.0, 0.6, 300.0, 0.4]);
        assert_eq!(set.trials[2].q.values[0], PI / 6.0);
        assert_eq!(build_verification_set(&DataConfig::default()).unwrap(), set);
    }

    #[test]
    fn generated_trials_close_the_residual() {
        for sigma in [0.1, 0.2] {
            let set = build_verification_set(&DataConfig { noise_sigma: sigma, ..Default::default() }).unwrap();
            let rm = ResidualModel::default();
            for t in &set.trials {
                let a_bi = consistent_activations(&activation_series(&t.emg_bi, &set.model.activation).unwrap().values);
                let a_tri =
                    consistent_activations(&activation_series(&t.emg_tri, &set.model.activation).unwrap().values);
                let r = residual(&t.q.values, &a_bi, &a_tri, &set.truth(), &rm, set.dt).unwrap();
                let rms_r = (r[1..499].iter().map(|v| v * v).sum::<f64>() / 498.0).sqrt();
                assert!(rms_r < 0.05, "trial {} residual rms {rms_r}", t.index);
            }
        }
    }
}
