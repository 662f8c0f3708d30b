//! Activation dynamics and the rigid-tendon Hill-type muscle-tendon model.

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Passive force-length constants for an adult human muscle.
pub const PASSIVE_GAMMA1: f64 = 0.075;
pub const PASSIVE_GAMMA2: f64 = 6.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationParams {
    /// Electromechanical delay in seconds.
    pub delay: f64,
    /// Nonlinear shape factor of the excitation-to-activation map.
    pub shape: f64,
}

impl ActivationParams {
    pub fn new(delay: f64, shape: f64) -> Result<Self> {
        let p = Self { delay, shape };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay >= 0.0) {
            return Err(Error::InvalidParameter(format!("delay must be >= 0, got {}", self.delay)));
        }
        if self.shape == 0.0 || !self.shape.is_finite() {
            return Err(Error::InvalidParameter("activation shape factor must be finite and non-zero".into()));
        }
        Ok(())
    }
}

impl Default for ActivationParams {
    fn default() -> Self {
        Self { delay: 0.08, shape: 0.2 }
    }
}

/// Hill-model parameter vector of one muscle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuscleParams {
    /// Optimal fiber length (m).
    pub optimal_length: f64,
    /// Maximum contraction velocity (m/s).
    pub max_velocity: f64,
    /// Maximum isometric force (N).
    pub max_isometric_force: f64,
    /// Tendon slack length (m).
    pub tendon_slack_length: f64,
    /// Pennation angle at optimal length (rad).
    pub pennation_angle: f64,
}

impl MuscleParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.optimal_length > 0.0
            && self.max_velocity > 0.0
            && self.max_isometric_force > 0.0
            && self.tendon_slack_length >= 0.0
            && (0.0..FRAC_PI_2).contains(&self.pennation_angle);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid muscle parameters {self:?}")))
        }
    }

    pub fn biceps() -> Self {
        Self {
            optimal_length: 0.6,
            max_velocity: 6.0,
            max_isometric_force: 300.0,
            tendon_slack_length: 0.55,
            pennation_angle: 0.0,
        }
    }

    pub fn triceps() -> Self {
        Self {
            optimal_length: 0.4,
            max_velocity: 4.0,
            max_isometric_force: 300.0,
            tendon_slack_length: 0.33,
            pennation_angle: 0.0,
        }
    }
}

/// Shifts the sEMG envelope by the electromechanical delay. Samples before
/// the delay repeat the first recorded value.
pub fn excitation_from_emg(emg: &TimeSeries, params: &ActivationParams) -> Result<TimeSeries> {
    let shift = (params.delay / emg.dt).round() as usize;
    let len = emg.len();
    if shift >= len {
        return Err(Error::DelayTooLong { shift, len });
    }
    let first = emg.values[0];
    let values = (0..len)
        .map(|i| if i < shift { first } else { emg.values[i - shift] })
        .collect();
    Ok(TimeSeries::new(emg.dt, values))
}

pub fn activation(u: f64, shape: f64) -> f64 {
    (shape * u).exp_m1() / shape.exp_m1()
}

/// Delay followed by the activation map, with excitations clamped to [0, 1].
pub fn activation_series(emg: &TimeSeries, params: &ActivationParams) -> Result<TimeSeries> {
    let u = excitation_from_emg(emg, params)?;
    Ok(u.map(|v| activation(v.clamp(0.0, 1.0), params.shape)))
}

pub fn active_force_length(l_norm: f64) -> f64 {
    if l_norm <= 0.6 {
        9.0 * (l_norm - 0.4).powi(2)
    } else if l_norm <= 1.4 {
        1.0 - 4.0 * (1.0 - l_norm).powi(2)
    } else {
        9.0 * (l_norm - 1.6).powi(2)
    }
}

/// Branch-wise derivative; a breakpoint belongs to the lower branch.
pub fn active_force_length_slope(l_norm: f64) -> f64 {
    if l_norm <= 0.6 {
        18.0 * (l_norm - 0.4)
    } else if l_norm <= 1.4 {
        8.0 * (1.0 - l_norm)
    } else {
        18.0 * (l_norm - 1.6)
    }
}

pub fn passive_force_length(l_norm: f64) -> f64 {
    let (g1, g2) = (PASSIVE_GAMMA1, PASSIVE_GAMMA2);
    if l_norm <= 1.0 {
        0.0
    } else if l_norm <= 1.4 {
        g1 * ((g2 * (l_norm - 1.0)).exp() - 1.0)
    } else {
        let e = (0.4 * g2).exp();
        g1 * g2 * e * l_norm + g1 * ((1.0 - 1.4 * g2) * e - 1.0)
    }
}

pub fn passive_force_length_slope(l_norm: f64) -> f64 {
    let (g1, g2) = (PASSIVE_GAMMA1, PASSIVE_GAMMA2);
    if l_norm <= 1.0 {
        0.0
    } else if l_norm <= 1.4 {
        g1 * g2 * (g2 * (l_norm - 1.0)).exp()
    } else {
        g1 * g2 * (0.4 * g2).exp()
    }
}

/// Hyperbolic concentric/eccentric force-velocity relation.
///
/// Concentric (`v <= 0`): `(1 + v) / (1 - v / shape)`, zero at `v = -1`.
/// Eccentric (`v > 0`): `1 + (plateau - 1) v / (v + k)` with `k` chosen so the
/// slope is continuous at `v = 0`; it saturates at `plateau`.
/// Velocities are normalized by the maximum contraction velocity, shortening
/// negative. Below `-1` the curve is held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceVelocityCurve {
    pub eccentric_plateau: f64,
    pub concentric_shape: f64,
}

impl Default for ForceVelocityCurve {
    fn default() -> Self {
        Self { eccentric_plateau: 1.4, concentric_shape: 0.25 }
    }
}

impl ForceVelocityCurve {
    fn eccentric_knee(&self) -> f64 {
        (self.eccentric_plateau - 1.0) / (1.0 + 1.0 / self.concentric_shape)
    }

    pub fn value(&self, v_norm: f64) -> f64 {
        if v_norm < -1.0 {
            0.0
        } else if v_norm <= 0.0 {
            (1.0 + v_norm) / (1.0 - v_norm / self.concentric_shape)
        } else {
            let k = self.eccentric_knee();
            1.0 + (self.eccentric_plateau - 1.0) * v_norm / (v_norm + k)
        }
    }

    pub fn slope(&self, v_norm: f64) -> f64 {
        if v_norm < -1.0 {
            0.0
        } else if v_norm <= 0.0 {
            let den = 1.0 - v_norm / self.concentric_shape;
            (1.0 + 1.0 / self.concentric_shape) / (den * den)
        } else {
            let k = self.eccentric_knee();
            (self.eccentric_plateau - 1.0) * k / (v_norm + k).powi(2)
        }
    }
}

pub fn force_velocity(v_norm: f64) -> f64 {
    ForceVelocityCurve::default().value(v_norm)
}

pub fn force_velocity_slope(v_norm: f64) -> f64 {
    ForceVelocityCurve::default().slope(v_norm)
}

/// Muscle-tendon force along the tendon (N).
pub fn mt_force(a: f64, l_norm: f64, v_norm: f64, phi: f64, params: &MuscleParams) -> f64 {
    params.max_isometric_force
        * (a * active_force_length(l_norm) * force_velocity(v_norm) + passive_force_length(l_norm))
        * phi.cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuscleRole {
    /// Shortens as the elbow angle grows.
    Flexor,
    /// Lengthens as the elbow angle grows.
    Extensor,
}

/// Straight-line muscle path across the elbow. The muscle attaches at `l1`
/// along the upper arm and `l2` along the forearm; the path closes a triangle
/// whose included angle is `pi - q` for a flexor and `q` for an extensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MusclePath {
    pub l1: f64,
    pub l2: f64,
    pub role: MuscleRole,
}

impl MusclePath {
    fn included_angle_cos(&self, q: f64) -> f64 {
        match self.role {
            MuscleRole::Flexor => -q.cos(),
            MuscleRole::Extensor => q.cos(),
        }
    }

    pub fn length(&self, q: f64) -> f64 {
        (self.l1 * self.l1 + self.l2 * self.l2 - 2.0 * self.l1 * self.l2 * self.included_angle_cos(q)).sqrt()
    }

    /// `l1 l2 sin(q) / l(q)`, the magnitude of the moment arm.
    pub fn moment_arm(&self, q: f64) -> f64 {
        self.l1 * self.l2 * q.sin() / self.length(q)
    }

    /// d(length)/dq.
    pub fn length_rate(&self, q: f64) -> f64 {
        match self.role {
            MuscleRole::Flexor => -self.moment_arm(q),
            MuscleRole::Extensor => self.moment_arm(q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberState {
    pub l_norm: f64,
    pub v_norm: f64,
}

/// Normalized fiber length and velocity for a rigid tendon. Lengthening
/// velocities are positive.
pub fn mt_kinematics(q: f64, q_dot: f64, path: &MusclePath, params: &MuscleParams) -> Result<FiberState> {
    let path_length = path.length(q);
    if path_length <= params.tendon_slack_length {
        return Err(Error::MuscleSlack { path_length, slack_length: params.tendon_slack_length });
    }
    let cos_phi = params.pennation_angle.cos();
    let fiber_length = (path_length - params.tendon_slack_length) / cos_phi;
    let fiber_velocity = path.length_rate(q) * q_dot / cos_phi;
    Ok(FiberState {
        l_norm: fiber_length / params.optimal_length,
        v_norm: fiber_velocity / params.max_velocity,
    })
}
