use serde::{Deserialize, Serialize};

use super::quadrotor::{unit_quaternion, P, V, W};
use super::SystemModel;
use crate::error::{check_len, contract, Result};
use crate::stochastics::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    OpenLoopNoise,
    FeedbackPlusNoise,
}

/// PD gains for hover: altitude loop on thrust, attitude loops on torques.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadrotorGains {
    pub kp_z: f64,
    pub kd_z: f64,
    pub kp: f64,
    pub kd: f64,
    /// Nominal mass and gravity used for the thrust feed-forward.
    pub mass: f64,
    pub g: f64,
}

impl Default for QuadrotorGains {
    fn default() -> Self {
        Self {
            kp_z: 0.75,
            kd_z: 1.25,
            kp: 0.03,
            kd: 0.00875,
            mass: 0.468,
            g: 9.81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feedback {
    Zero,
    /// `u = K x` with `K` stored row by row (`n_u` rows of length `n_x`).
    Linear { gain: Vec<Vec<f64>> },
    QuadrotorHover(QuadrotorGains),
}

impl Feedback {
    /// Pendulum damping `u = -k α̇`.
    pub fn damping(k: f64) -> Self {
        Feedback::Linear {
            gain: vec![vec![0.0, -k]],
        }
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Feedback::Zero => out.fill(0.0),
            Feedback::Linear { gain } => {
                for (o, row) in out.iter_mut().zip(gain) {
                    *o = row.iter().zip(x).map(|(k, v)| k * v).sum();
                }
            }
            Feedback::QuadrotorHover(g) => {
                let [q0, q1, q2, q3] = unit_quaternion(x);
                let roll = (2.0 * (q0 * q1 + q2 * q3)).atan2(1.0 - 2.0 * (q1 * q1 + q2 * q2));
                let pitch = (2.0 * (q0 * q2 - q3 * q1)).clamp(-1.0, 1.0).asin();
                let yaw = (2.0 * (q0 * q3 + q1 * q2)).atan2(1.0 - 2.0 * (q2 * q2 + q3 * q3));
                out[0] = g.mass * (g.g - g.kp_z * x[P + 2] - g.kd_z * x[V + 2]);
                // Body rates stand in for the Euler-angle rates near hover.
                for (i, a) in [roll, pitch, yaw].into_iter().enumerate() {
                    out[1 + i] = -g.kp * a - g.kd * x[W + i];
                }
            }
        }
    }
}

/// `u_t = π(x_t) + η_t` with i.i.d. input noise `η_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPolicy {
    pub kind: PolicyKind,
    pub feedback: Feedback,
    pub noise: NoiseSpec,
}

impl ControlPolicy {
    pub fn open_loop(noise: NoiseSpec) -> Self {
        Self {
            kind: PolicyKind::OpenLoopNoise,
            feedback: Feedback::Zero,
            noise,
        }
    }

    pub fn closed_loop(feedback: Feedback, noise: NoiseSpec) -> Self {
        Self {
            kind: PolicyKind::FeedbackPlusNoise,
            feedback,
            noise,
        }
    }

    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        let d = model.dims();
        check_len("input noise dimension", d.n_u, self.noise.dimension)?;
        self.noise.validate()?;
        match (&self.kind, &self.feedback) {
            (PolicyKind::OpenLoopNoise, Feedback::Zero) => {}
            (PolicyKind::OpenLoopNoise, _) => {
                return Err(contract("open-loop policy must have zero feedback"))
            }
            (_, Feedback::Linear { gain }) => {
                check_len("feedback gain rows", d.n_u, gain.len())?;
                for row in gain {
                    check_len("feedback gain row", d.n_x, row.len())?;
                }
            }
            (_, Feedback::QuadrotorHover(_)) => {
                if (d.n_x, d.n_u) != (13, 4) {
                    return Err(contract("quadrotor feedback needs 13 states and 4 inputs"));
                }
            }
            (_, Feedback::Zero) => {}
        }
        Ok(())
    }

    /// Deterministic part `π(x)`.
    pub fn feedback_into(&self, x: &[f64], out: &mut [f64]) {
        self.feedback.eval_into(x, out);
    }
}
