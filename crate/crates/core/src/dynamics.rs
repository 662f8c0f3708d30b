//! Single-DOF elbow flexion-extension model driven by a biceps/triceps pair.
//!
//! `q` is the elbow flexion angle; `q = 0` is the forearm hanging straight
//! down, which is also the stable equilibrium under gravity.

use crate::error::{Error, Result};
use crate::muscle::{
    activation_series, mt_force, mt_kinematics, ActivationParams, MuscleParams, MusclePath, MuscleRole,
};
use crate::series::TimeSeries;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowGeometry {
    pub upper_arm_length: f64,
    pub forearm_length: f64,
    /// Point mass at the wrist (kg).
    pub forearm_mass: f64,
    pub biceps_l1: f64,
    pub biceps_l2: f64,
    pub triceps_l1: f64,
    pub triceps_l2: f64,
    pub gravity: f64,
}

impl Default for ElbowGeometry {
    fn default() -> Self {
        Self {
            upper_arm_length: 1.0,
            forearm_length: 1.0,
            forearm_mass: 1.0,
            biceps_l1: 0.3,
            biceps_l2: 0.8,
            triceps_l1: 0.2,
            triceps_l2: 0.7,
            gravity: 9.81,
        }
    }
}

impl ElbowGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.upper_arm_length,
            self.forearm_length,
            self.forearm_mass,
            self.biceps_l1,
            self.biceps_l2,
            self.triceps_l1,
            self.triceps_l2,
        ]
        .iter()
        .all(|v| *v > 0.0);
        let attached = self.biceps_l1 <= self.upper_arm_length
            && self.triceps_l1 <= self.upper_arm_length
            && self.biceps_l2 <= self.forearm_length
            && self.triceps_l2 <= self.forearm_length;
        if positive && attached {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid elbow geometry {self:?}")))
        }
    }

    pub fn biceps_path(&self) -> MusclePath {
        MusclePath { l1: self.biceps_l1, l2: self.biceps_l2, role: MuscleRole::Flexor }
    }

    pub fn triceps_path(&self) -> MusclePath {
        MusclePath { l1: self.triceps_l1, l2: self.triceps_l2, role: MuscleRole::Extensor }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: f64,
    pub q_dot: f64,
}

pub fn inertia(geometry: &ElbowGeometry) -> f64 {
    geometry.forearm_mass * geometry.forearm_length.powi(2)
}

/// Gravity torque about the elbow.
pub fn external_torque(q: f64, geometry: &ElbowGeometry) -> f64 {
    -geometry.forearm_mass * geometry.gravity * geometry.forearm_length * q.sin()
}

fn single_muscle_torque(a: f64, state: &JointState, path: &MusclePath, params: &MuscleParams) -> Result<f64> {
    let fiber = mt_kinematics(state.q, state.q_dot, path, params)?;
    let force = mt_force(a, fiber.l_norm, fiber.v_norm, params.pennation_angle, params);
    Ok(force * path.moment_arm(state.q))
}

/// Net muscle torque: biceps flexing minus triceps extending.
pub fn muscle_torque(
    a_bi: f64,
    a_tri: f64,
    state: &JointState,
    geometry: &ElbowGeometry,
    biceps: &MuscleParams,
    triceps: &MuscleParams,
) -> Result<f64> {
    let t_bi = single_muscle_torque(a_bi, state, &geometry.biceps_path(), biceps)?;
    let t_tri = single_muscle_torque(a_tri, state, &geometry.triceps_path(), triceps)?;
    Ok(t_bi - t_tri)
}

pub fn acceleration(
    a_bi: f64,
    a_tri: f64,
    state: &JointState,
    geometry: &ElbowGeometry,
    biceps: &MuscleParams,
    triceps: &MuscleParams,
) -> Result<f64> {
    let torque = muscle_torque(a_bi, a_tri, state, geometry, biceps, triceps)?;
    Ok((external_torque(state.q, geometry) + torque) / inertia(geometry))
}

/// Everything needed to turn sEMG into joint motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardModel {
    pub geometry: ElbowGeometry,
    pub biceps: MuscleParams,
    pub triceps: MuscleParams,
    pub activation: ActivationParams,
    /// When false only gravity acts (a rigid pendulum).
    pub muscles_enabled: bool,
}

impl Default for ForwardModel {
    fn default() -> Self {
        Self {
            geometry: ElbowGeometry::default(),
            biceps: MuscleParams::biceps(),
            triceps: MuscleParams::triceps(),
            activation: ActivationParams::default(),
            muscles_enabled: true,
        }
    }
}

impl ForwardModel {
    pub fn pendulum(geometry: ElbowGeometry) -> Self {
        Self { geometry, muscles_enabled: false, ..Self::default() }
    }

    pub fn acceleration(&self, a_bi: f64, a_tri: f64, state: &JointState) -> Result<f64> {
        if self.muscles_enabled {
            acceleration(a_bi, a_tri, state, &self.geometry, &self.biceps, &self.triceps)
        } else {
            Ok(external_torque(state.q, &self.geometry) / inertia(&self.geometry))
        }
    }

    fn derivative(&self, a: (f64, f64), s: &JointState) -> Result<(f64, f64)> {
        Ok((s.q_dot, self.acceleration(a.0, a.1, s)?))
    }

    /// `½ I q̇² - m g l cos q`, conserved when the muscles are disabled.
    pub fn pendulum_energy(&self, state: &JointState) -> f64 {
        let g = &self.geometry;
        0.5 * inertia(g) * state.q_dot.powi(2) - g.forearm_mass * g.gravity * g.forearm_length * state.q.cos()
    }
}

/// Integrates the equation of motion over the sEMG duration with classical
/// RK4 at the data step and returns `q` on the same grid.
pub fn solve_forward(
    emg_bi: &TimeSeries,
    emg_tri: &TimeSeries,
    initial: JointState,
    model: &ForwardModel,
) -> Result<TimeSeries> {
    solve_forward_substeps(emg_bi, emg_tri, initial, model, 1)
}

/// As [`solve_forward`] with each data interval split into `substeps` RK4
/// steps. Activations are linearly interpolated between samples.
pub fn solve_forward_substeps(
    emg_bi: &TimeSeries,
    emg_tri: &TimeSeries,
    initial: JointState,
    model: &ForwardModel,
    substeps: usize,
) -> Result<TimeSeries> {
    let states = solve_forward_states(emg_bi, emg_tri, initial, model, substeps)?;
    Ok(TimeSeries::new(emg_bi.dt, states.iter().map(|s| s.q).collect()))
}

/// Full joint state trajectory on the data grid.
pub fn solve_forward_states(
    emg_bi: &TimeSeries,
    emg_tri: &TimeSeries,
    initial: JointState,
    model: &ForwardModel,
    substeps: usize,
) -> Result<Vec<JointState>> {
    if emg_bi.len() != emg_tri.len() || emg_bi.dt != emg_tri.dt {
        return Err(Error::ShapeMismatch("biceps and triceps sEMG must share length and time step".into()));
    }
    if emg_bi.is_empty() {
        return Err(Error::Empty("sEMG signal"));
    }
    let substeps = substeps.max(1);
    let a_bi = activation_series(emg_bi, &model.activation)?;
    let a_tri = activation_series(emg_tri, &model.activation)?;
    let dt = emg_bi.dt;
    let h = dt / substeps as f64;
    let n = emg_bi.len();

    let mut states = Vec::with_capacity(n);
    let mut s = initial;
    states.push(s);
    for i in 0..n - 1 {
        let (b0, b1) = (a_bi.values[i], a_bi.values[i + 1]);
        let (t0, t1) = (a_tri.values[i], a_tri.values[i + 1]);
        let at = |w: f64| (b0 + (b1 - b0) * w, t0 + (t1 - t0) * w);
        for k in 0..substeps {
            let w0 = k as f64 / substeps as f64;
            let wm = (k as f64 + 0.5) / substeps as f64;
            let w1 = (k + 1) as f64 / substeps as f64;
            let k1 = model.derivative(at(w0), &s)?;
            let s2 = JointState { q: s.q + 0.5 * h * k1.0, q_dot: s.q_dot + 0.5 * h * k1.1 };
            let k2 = model.derivative(at(wm), &s2)?;
            let s3 = JointState { q: s.q + 0.5 * h * k2.0, q_dot: s.q_dot + 0.5 * h * k2.1 };
            let k3 = model.derivative(at(wm), &s3)?;
            let s4 = JointState { q: s.q + h * k3.0, q_dot: s.q_dot + h * k3.1 };
            let k4 = model.derivative(at(w1), &s4)?;
            s = JointState {
                q: s.q + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                q_dot: s.q_dot + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            };
        }
        if !(s.q.is_finite() && s.q_dot.is_finite()) {
            return Err(Error::IntegrationDiverged(i + 1));
        }
        states.push(s);
    }
    Ok(states)
}
