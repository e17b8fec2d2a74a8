use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{positive, Dimensions, FeatureMap, ParameterMatrix, PhysicalParam, SystemModel};
use crate::error::Result;

// State layout.
pub(crate) const P: usize = 0;
pub(crate) const V: usize = 3;
pub(crate) const Q: usize = 6;
pub(crate) const W: usize = 10;

// Feature layout.
const F_P: usize = 0;
const F_V: usize = 3;
const F_Q: usize = 6;
const F_W: usize = 10;
const F_ONE: usize = 13;
const F_THRUST: usize = 14;
const F_OMEGA_Q: usize = 17;
const F_TAU: usize = 21;
const F_CROSS: usize = 24;
const N_PHI: usize = 27;

/// Quadrotor features over state `(p, v, q, ω)` and input `(f_u, τ)`.
///
/// The quaternion is normalized before use. Features are `p`, `v`, `q`, `ω`,
/// the constant 1, `R(q) e_z f_u`, `Ω(ω) q`, `τ` and `(ω₂ω₃, ω₁ω₃, ω₁ω₂)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadrotorFeatures;

pub(crate) fn unit_quaternion(x: &[f64]) -> [f64; 4] {
    let q = [x[Q], x[Q + 1], x[Q + 2], x[Q + 3]];
    let n = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        q.map(|a| a / n)
    } else {
        [1.0, 0.0, 0.0, 0.0]
    }
}

impl FeatureMap for QuadrotorFeatures {
    fn dims(&self) -> Dimensions {
        Dimensions {
            n_x: 13,
            n_u: 4,
            n_phi: N_PHI,
        }
    }

    fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = Vec::with_capacity(N_PHI);
        l.extend(["px", "py", "pz", "vx", "vy", "vz"].map(String::from));
        l.extend(["q0", "q1", "q2", "q3", "w1", "w2", "w3", "1"].map(String::from));
        l.extend(["(R ez f)x", "(R ez f)y", "(R ez f)z"].map(String::from));
        l.extend((0..4).map(|i| format!("(Omega q){i}")));
        l.extend(["tau1", "tau2", "tau3", "w2*w3", "w1*w3", "w1*w2"].map(String::from));
        l
    }

    fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let [q0, q1, q2, q3] = unit_quaternion(x);
        let (w1, w2, w3) = (x[W], x[W + 1], x[W + 2]);
        let f = u[0];
        out[F_P..F_P + 3].copy_from_slice(&x[P..P + 3]);
        out[F_V..F_V + 3].copy_from_slice(&x[V..V + 3]);
        out[F_Q..F_Q + 4].copy_from_slice(&[q0, q1, q2, q3]);
        out[F_W..F_W + 3].copy_from_slice(&x[W..W + 3]);
        out[F_ONE] = 1.0;
        out[F_THRUST] = 2.0 * (q1 * q3 + q0 * q2) * f;
        out[F_THRUST + 1] = 2.0 * (q2 * q3 - q0 * q1) * f;
        out[F_THRUST + 2] = (q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3) * f;
        out[F_OMEGA_Q] = -w1 * q1 - w2 * q2 - w3 * q3;
        out[F_OMEGA_Q + 1] = w1 * q0 + w3 * q2 - w2 * q3;
        out[F_OMEGA_Q + 2] = w2 * q0 - w3 * q1 + w1 * q3;
        out[F_OMEGA_Q + 3] = w3 * q0 + w2 * q1 - w1 * q2;
        out[F_TAU..F_TAU + 3].copy_from_slice(&u[1..4]);
        out[F_CROSS] = w2 * w3;
        out[F_CROSS + 1] = w1 * w3;
        out[F_CROSS + 2] = w1 * w2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadrotorParams {
    pub m: f64,
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    pub dt: f64,
    pub g: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            m: 0.468,
            ixx: 4.856e-3,
            iyy: 4.856e-3,
            izz: 8.801e-3,
            dt: 0.01,
            g: 9.81,
        }
    }
}

impl QuadrotorParams {
    /// `(θ1, …, θ7)` computed directly from the physical constants.
    pub fn theta(&self) -> [f64; 7] {
        [
            1.0 / self.m,
            1.0 / self.ixx,
            (self.iyy - self.izz) / self.ixx,
            1.0 / self.iyy,
            (self.izz - self.ixx) / self.iyy,
            1.0 / self.izz,
            (self.ixx - self.iyy) / self.izz,
        ]
    }
}

/// Euler-discretized rigid-body quadrotor with hover initial state.
///
/// Unknown entries: the thrust feature in each velocity row (`dt θ1`) and,
/// in each angular-rate row, the torque and cross-product coefficients.
pub fn quadrotor_model(p: &QuadrotorParams) -> Result<SystemModel> {
    for (n, v) in [
        ("m", p.m),
        ("Ixx", p.ixx),
        ("Iyy", p.iyy),
        ("Izz", p.izz),
        ("dt", p.dt),
        ("g", p.g),
    ] {
        positive(n, v)?;
    }
    let dt = p.dt;
    let th = p.theta();
    let mut t = DMatrix::zeros(13, N_PHI);
    for i in 0..3 {
        t[(P + i, F_P + i)] = 1.0;
        t[(P + i, F_V + i)] = dt;
        t[(V + i, F_V + i)] = 1.0;
        t[(V + i, F_THRUST + i)] = dt * th[0];
        t[(W + i, F_W + i)] = 1.0;
        t[(W + i, F_TAU + i)] = dt * th[1 + 2 * i];
        t[(W + i, F_CROSS + i)] = dt * th[2 + 2 * i];
    }
    t[(V + 2, F_ONE)] = -p.g * dt;
    for i in 0..4 {
        t[(Q + i, F_Q + i)] = 1.0;
        t[(Q + i, F_OMEGA_Q + i)] = 0.5 * dt;
    }
    let mut unknown = Vec::new();
    for i in 0..3 {
        unknown.push((V + i, F_THRUST + i));
        unknown.push((W + i, F_TAU + i));
        unknown.push((W + i, F_CROSS + i));
    }
    let pm = ParameterMatrix::new(t, &unknown)?;
    let mut m = SystemModel::new("quadrotor", Arc::new(QuadrotorFeatures), pm)?;
    let mut x0 = vec![0.0; 13];
    x0[Q] = 1.0;
    m.x0 = x0;
    let s = 1.0 / dt;
    m.physical = vec![PhysicalParam {
        name: "theta1".into(),
        terms: (0..3).map(|i| (V + i, F_THRUST + i, s)).collect(),
    }];
    for i in 0..3 {
        m.physical.push(PhysicalParam {
            name: format!("theta{}", 2 + 2 * i),
            terms: vec![(W + i, F_TAU + i, s)],
        });
        m.physical.push(PhysicalParam {
            name: format!("theta{}", 3 + 2 * i),
            terms: vec![(W + i, F_CROSS + i, s)],
        });
    }
    m.physical.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(m)
}
