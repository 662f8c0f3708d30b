//! Physics-informed loss: data misfit plus the weighted squared residual of
//! the elbow equation of motion, with the muscle parameters under
//! identification entering either through normalization or through a
//! sigmoid-constrained average of literature anchors.

use crate::autodiff::{Matrix, SparseRows, Tape, Var};
use crate::dynamics::{external_torque, inertia, muscle_torque, ElbowGeometry, JointState};
use crate::error::{Error, Result};
use crate::muscle::{
    active_force_length, active_force_length_slope, passive_force_length, passive_force_length_slope,
    ForceVelocityCurve, MuscleParams, MusclePath, MuscleRole,
};
use serde::{Deserialize, Serialize};

/// Ratio of maximum contraction velocity to optimal fiber length (1/s).
pub const VMAX_PER_LENGTH: f64 = 10.0;

pub const PARAM_LABELS: [&str; 4] = ["f0_bi", "l0_bi", "f0_tri", "l0_tri"];

pub fn data_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions vs {} targets", predictions.len(), targets.len())));
    }
    let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(sse / predictions.len() as f64)
}

pub fn residual_loss(residual: &[f64]) -> Result<f64> {
    if residual.is_empty() {
        return Err(Error::Empty("residual"));
    }
    Ok(residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64)
}

pub fn total_loss(data: f64, residual: f64, beta: f64) -> f64 {
    data + beta * residual
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { beta: 1e-3 }
    }
}

/// The four identified quantities in the order of [`PARAM_LABELS`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub f0_bi: f64,
    pub l0_bi: f64,
    pub f0_tri: f64,
    pub l0_tri: f64,
}

impl Gamma {
    pub fn from_array(v: [f64; 4]) -> Self {
        Self { f0_bi: v[0], l0_bi: v[1], f0_tri: v[2], l0_tri: v[3] }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.f0_bi, self.l0_bi, self.f0_tri, self.l0_tri]
    }

    pub fn from_muscles(biceps: &MuscleParams, triceps: &MuscleParams) -> Self {
        Self {
            f0_bi: biceps.max_isometric_force,
            l0_bi: biceps.optimal_length,
            f0_tri: triceps.max_isometric_force,
            l0_tri: triceps.optimal_length,
        }
    }

    /// Relative error of each entry against `truth`.
    pub fn relative_errors(&self, truth: &Gamma) -> [f64; 4] {
        let (a, b) = (self.to_array(), truth.to_array());
        [0, 1, 2, 3].map(|i| (a[i] - b[i]) / b[i])
    }

    /// Applies the identified values to a muscle pair, with the maximum
    /// velocity tied to the optimal length.
    pub fn apply(&self, biceps: &MuscleParams, triceps: &MuscleParams) -> (MuscleParams, MuscleParams) {
        let bi = MuscleParams {
            max_isometric_force: self.f0_bi,
            optimal_length: self.l0_bi,
            max_velocity: VMAX_PER_LENGTH * self.l0_bi,
            ..*biceps
        };
        let tri = MuscleParams {
            max_isometric_force: self.f0_tri,
            optimal_length: self.l0_tri,
            max_velocity: VMAX_PER_LENGTH * self.l0_tri,
            ..*triceps
        };
        (bi, tri)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentMode {
    /// `Gamma = gamma_bar * gamma0`.
    Normalized,
    /// `Gamma = mean_r(anchor_r * sig(psi_r))`.
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentTargets {
    pub mode: IdentMode,
    pub initial: Gamma,
    /// Literature values per parameter, used in sigmoid mode.
    pub anchors: [Vec<f64>; 4],
}

impl IdentTargets {
    pub fn normalized(initial: Gamma) -> Self {
        Self { mode: IdentMode::Normalized, initial, anchors: Default::default() }
    }

    pub fn sigmoid(anchors: [Vec<f64>; 4]) -> Self {
        let initial = Gamma::from_array([0, 1, 2, 3].map(|i| mean(&anchors[i]) / 2.0));
        Self { mode: IdentMode::Sigmoid, initial, anchors }
    }

    /// Endpoints of published physiological ranges for the two muscles.
    pub fn literature_anchors() -> [Vec<f64>; 4] {
        [vec![158.4, 845.0], vec![0.115, 0.142], vec![554.4, 2332.916], vec![0.067, 0.087]]
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            IdentMode::Normalized => {
                if self.initial.to_array().iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidParameter("initial identification values must be positive".into()));
                }
            }
            IdentMode::Sigmoid => {
                if self.anchors.iter().any(|a| a.is_empty() || a.iter().any(|v| !(*v > 0.0))) {
                    return Err(Error::InvalidParameter("every parameter needs positive anchors".into()));
                }
            }
        }
        Ok(())
    }

    /// Trainable starting point: `gamma_bar = 1` or `psi = 0`.
    pub fn initial_trainables(&self) -> Vec<Matrix> {
        match self.mode {
            IdentMode::Normalized => (0..4).map(|_| Matrix::ones((1, 1))).collect(),
            IdentMode::Sigmoid => self.anchors.iter().map(|a| Matrix::zeros((1, a.len()))).collect(),
        }
    }

    pub fn gamma(&self, trainables: &[Matrix]) -> Gamma {
        match self.mode {
            IdentMode::Normalized => {
                let g0 = self.initial.to_array();
                let bar = [0, 1, 2, 3].map(|i| trainables[i][[0, 0]]);
                Gamma::from_array(params_normalized(&bar, &g0))
            }
            IdentMode::Sigmoid => {
                Gamma::from_array([0, 1, 2, 3].map(|i| params_sigmoid(trainables[i].as_slice().unwrap(), &self.anchors[i])))
            }
        }
    }

    /// Records the trainables and returns the leaves plus `Gamma` as scalars.
    pub fn record(&self, tape: &mut Tape, trainables: &[Matrix]) -> Result<(Vec<Var>, [Var; 4])> {
        let leaves: Vec<Var> = trainables.iter().map(|m| tape.leaf(m.clone())).collect();
        let mut gamma = Vec::with_capacity(4);
        for (i, &leaf) in leaves.iter().enumerate() {
            let g = match self.mode {
                IdentMode::Normalized => tape.scale(leaf, self.initial.to_array()[i]),
                IdentMode::Sigmoid => {
                    let s = tape.sigmoid(leaf);
                    let anchors = Matrix::from_shape_vec((1, self.anchors[i].len()), self.anchors[i].clone())
                        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
                    let weighted = tape.mul_const(s, &anchors)?;
                    tape.mean(weighted)
                }
            };
            gamma.push(g);
        }
        Ok((leaves, [gamma[0], gamma[1], gamma[2], gamma[3]]))
    }

    /// True when the trainables produce a usable parameter set.
    pub fn admissible(&self, trainables: &[Matrix]) -> bool {
        let finite = trainables.iter().all(|m| m.iter().all(|v| v.is_finite()));
        finite && self.gamma(trainables).to_array().iter().all(|v| *v > 0.0)
    }
}

pub fn params_normalized(bar: &[f64; 4], initial: &[f64; 4]) -> [f64; 4] {
    [0, 1, 2, 3].map(|i| bar[i] * initial[i])
}

/// Sigmoid-weighted average of the anchors; lies in `(0, mean(anchors))`.
pub fn params_sigmoid(psi: &[f64], anchors: &[f64]) -> f64 {
    psi.iter().zip(anchors).map(|(p, a)| a * crate::autodiff::sigmoid(*p)).sum::<f64>() / anchors.len() as f64
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub r2: f64,
    pub nmse: f64,
}

pub fn metrics(q: &[f64], q_hat: &[f64]) -> Result<Metrics> {
    let mse = data_loss(q_hat, q)?;
    let n = q.len() as f64;
    let mu = mean(q);
    let ss_tot: f64 = q.iter().map(|v| (v - mu).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let r2 = 1.0 - mse * n / ss_tot;
    Ok(Metrics { mse, r2, nmse: (1.0 - r2) / n })
}

/// First and second derivative stencils on one uniformly sampled segment:
/// central differences inside, one-sided second-order at both ends.
pub fn derivative_stencils(len: usize, dt: f64) -> Result<(Vec<Vec<(usize, f64)>>, Vec<Vec<(usize, f64)>>)> {
    if len < 4 {
        return Err(Error::InvalidParameter(format!("finite differences need at least 4 samples, got {len}")));
    }
    let (h1, h2) = (1.0 / (2.0 * dt), 1.0 / (dt * dt));
    let mut first = Vec::with_capacity(len);
    let mut second = Vec::with_capacity(len);
    for k in 0..len {
        if k == 0 {
            first.push(vec![(0, -3.0 * h1), (1, 4.0 * h1), (2, -h1)]);
            second.push(vec![(0, 2.0 * h2), (1, -5.0 * h2), (2, 4.0 * h2), (3, -h2)]);
        } else if k == len - 1 {
            first.push(vec![(k, 3.0 * h1), (k - 1, -4.0 * h1), (k - 2, h1)]);
            second.push(vec![(k, 2.0 * h2), (k - 1, -5.0 * h2), (k - 2, 4.0 * h2), (k - 3, -h2)]);
        } else {
            first.push(vec![(k + 1, h1), (k - 1, -h1)]);
            second.push(vec![(k + 1, h2), (k, -2.0 * h2), (k - 1, h2)]);
        }
    }
    Ok((first, second))
}

/// Block-diagonal stencils over consecutive segments of the given lengths.
pub fn segment_stencils(lengths: &[usize], dt: f64) -> Result<(SparseRows, SparseRows)> {
    let total: usize = lengths.iter().sum();
    let mut d1 = SparseRows { input_len: total, rows: Vec::with_capacity(total) };
    let mut d2 = SparseRows { input_len: total, rows: Vec::with_capacity(total) };
    let mut offset = 0;
    for &len in lengths {
        let (f, s) = derivative_stencils(len, dt)?;
        let shift = |rows: Vec<Vec<(usize, f64)>>| {
            rows.into_iter().map(|r| r.into_iter().map(|(k, c)| (k + offset, c)).collect()).collect::<Vec<_>>()
        };
        d1.rows.extend(shift(f));
        d2.rows.extend(shift(s));
        offset += len;
    }
    Ok((d1, d2))
}

/// Simpson-weighted activations `(a[k-1] + 4 a[k] + a[k+1]) / 6` at interior
/// samples, matching what the second difference of an integrated trajectory
/// actually sees. End samples are kept.
pub fn consistent_activations(a: &[f64]) -> Vec<f64> {
    let mut out = a.to_vec();
    for k in 1..a.len().saturating_sub(1) {
        out[k] = (a[k - 1] + 4.0 * a[k] + a[k + 1]) / 6.0;
    }
    out
}

/// Fixed quantities entering the residual besides `Gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualModel {
    pub geometry: ElbowGeometry,
    /// Only tendon slack length and pennation angle are read from these.
    pub biceps: MuscleParams,
    pub triceps: MuscleParams,
    pub force_velocity: ForceVelocityCurve,
}

impl Default for ResidualModel {
    fn default() -> Self {
        Self {
            geometry: ElbowGeometry::default(),
            biceps: MuscleParams::biceps(),
            triceps: MuscleParams::triceps(),
            force_velocity: ForceVelocityCurve::default(),
        }
    }
}

fn apply_stencil(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().map(|&(k, c)| c * x[k]).sum()).collect()
}

/// Equation-of-motion residual `I q'' - E(q) - T(a, q, q')` along one
/// predicted trajectory, with derivatives taken by finite differences.
pub fn residual(
    q: &[f64],
    a_bi: &[f64],
    a_tri: &[f64],
    gamma: &Gamma,
    model: &ResidualModel,
    dt: f64,
) -> Result<Vec<f64>> {
    if a_bi.len() != q.len() || a_tri.len() != q.len() {
        return Err(Error::ShapeMismatch("activations and motion must be aligned".into()));
    }
    if q.len() < 3 {
        return Err(Error::InvalidParameter("residual needs at least 3 samples".into()));
    }
    let (d1, d2) = derivative_stencils(q.len().max(4), dt)?;
    let (q_dot, q_ddot) = if q.len() == 3 {
        // Too short for the one-sided second difference: use the central
        // stencil everywhere.
        let qd = (q[2] - q[0]) / (2.0 * dt);
        let qdd = (q[2] - 2.0 * q[1] + q[0]) / (dt * dt);
        (vec![qd; 3], vec![qdd; 3])
    } else {
        (apply_stencil(&d1, q), apply_stencil(&d2, q))
    };
    let (bi, tri) = gamma.apply(&model.biceps, &model.triceps);
    let i_mass = inertia(&model.geometry);
    (0..q.len())
        .map(|k| {
            let state = JointState { q: q[k], q_dot: q_dot[k] };
            let torque = muscle_torque(a_bi[k], a_tri[k], &state, &model.geometry, &bi, &tri)?;
            Ok(i_mass * q_ddot[k] - external_torque(q[k], &model.geometry) - torque)
        })
        .collect()
}

/// Per-muscle torque recorded on the tape. Length conditions are not
/// checked here: a slack path simply produces whatever the curves give.
#[allow(clippy::too_many_arguments)]
fn muscle_torque_tape(
    t: &mut Tape,
    path: &MusclePath,
    params: &MuscleParams,
    fv: &ForceVelocityCurve,
    f0: Var,
    l0: Var,
    activation: Var,
    sin_q: Var,
    cos_q: Var,
    q_dot: Var,
) -> Result<Var> {
    let (rows, cols) = sin_q.shape();
    let (l1, l2) = (path.l1, path.l2);
    // cos of the included angle is -cos q for a flexor, cos q for an extensor
    let sign = match path.role {
        MuscleRole::Flexor => 1.0,
        MuscleRole::Extensor => -1.0,
    };
    let c = t.scale(cos_q, sign * 2.0 * l1 * l2);
    let sq = t.offset(c, l1 * l1 + l2 * l2);
    let length = t.sqrt(sq);
    let inv_length = t.recip(length);
    let s = t.scale(sin_q, l1 * l2);
    let arm = t.mul(s, inv_length)?;
    let rate = match path.role {
        MuscleRole::Flexor => t.neg(arm),
        MuscleRole::Extensor => arm,
    };
    let cos_phi = params.pennation_angle.cos();
    let l0b = t.broadcast(l0, rows, cols)?;
    let inv_l0 = t.recip(l0b);
    let fiber = t.offset(length, -params.tendon_slack_length);
    let fiber = t.scale(fiber, 1.0 / cos_phi);
    let l_norm = t.mul(fiber, inv_l0)?;
    let v = t.mul(rate, q_dot)?;
    let v = t.mul(v, inv_l0)?;
    let v_norm = t.scale(v, 1.0 / (cos_phi * VMAX_PER_LENGTH));

    let fal = t.map(l_norm, |x| (active_force_length(x), active_force_length_slope(x)));
    let fp = t.map(l_norm, |x| (passive_force_length(x), passive_force_length_slope(x)));
    let fvv = t.map(v_norm, |x| (fv.value(x), fv.slope(x)));
    let act = t.mul(activation, fal)?;
    let act = t.mul(act, fvv)?;
    let total = t.add(act, fp)?;
    let f0b = t.broadcast(f0, rows, cols)?;
    let force = t.mul(total, f0b)?;
    let force = t.scale(force, cos_phi);
    t.mul(force, arm)
}

/// Residual over concatenated segments, recorded on the tape.
///
/// `q` is a `1 x N` row of predictions, `d1`/`d2` the matching derivative
/// stencils, and `a_bi`/`a_tri` the activations at the same samples.
#[allow(clippy::too_many_arguments)]
pub fn residual_tape(
    t: &mut Tape,
    q: Var,
    d1: &SparseRows,
    d2: &SparseRows,
    a_bi: &Matrix,
    a_tri: &Matrix,
    gamma: [Var; 4],
    model: &ResidualModel,
) -> Result<Var> {
    let q_dot = t.linear(q, d1)?;
    let q_ddot = t.linear(q, d2)?;
    let sin_q = t.sin(q);
    let cos_q = t.cos(q);
    let ab = t.constant(a_bi.clone());
    let at = t.constant(a_tri.clone());
    let g = &model.geometry;
    let fv = &model.force_velocity;
    let t_bi = muscle_torque_tape(t, &g.biceps_path(), &model.biceps, fv, gamma[0], gamma[1], ab, sin_q, cos_q, q_dot)?;
    let t_tri =
        muscle_torque_tape(t, &g.triceps_path(), &model.triceps, fv, gamma[2], gamma[3], at, sin_q, cos_q, q_dot)?;
    let inertial = t.scale(q_ddot, inertia(g));
    let gravity = t.scale(sin_q, g.forearm_mass * g.gravity * g.forearm_length);
    let r = t.add(inertial, gravity)?;
    let r = t.sub(r, t_bi)?;
    t.add(r, t_tri)
}
