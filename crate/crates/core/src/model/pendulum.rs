use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{positive, Dimensions, FeatureMap, ParameterMatrix, PhysicalParam, SystemModel};
use crate::error::Result;

/// State `(α, α̇)`, input `u`, features `(α, α̇, sin α, u)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PendulumFeatures;

impl FeatureMap for PendulumFeatures {
    fn dims(&self) -> Dimensions {
        Dimensions {
            n_x: 2,
            n_u: 1,
            n_phi: 4,
        }
    }

    fn labels(&self) -> Vec<String> {
        ["alpha", "alpha_dot", "sin(alpha)", "u"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = x[0];
        out[1] = x[1];
        out[2] = x[0].sin();
        out[3] = u[0];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumParams {
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub g: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            m: 0.1,
            l: 0.5,
            dt: 0.01,
            g: 9.81,
        }
    }
}

/// Euler-discretized pendulum `α̈ = -(g/l) sin α + u / (m l²)`.
///
/// Unknown entries are `(1, 2) = -g dt / l` and `(1, 3) = dt / (m l²)`;
/// `theta1 = 1/l` and `theta2 = 1/(m l²)` are read back from them.
pub fn pendulum_model(p: &PendulumParams) -> Result<SystemModel> {
    positive("m", p.m)?;
    positive("l", p.l)?;
    positive("dt", p.dt)?;
    positive("g", p.g)?;
    #[rustfmt::skip]
    let theta = DMatrix::from_row_slice(2, 4, &[
        1.0, p.dt, 0.0, 0.0,
        0.0, 1.0, -p.g * p.dt / p.l, p.dt / (p.m * p.l * p.l),
    ]);
    let pm = ParameterMatrix::new(theta, &[(1, 2), (1, 3)])?;
    let mut m = SystemModel::new("pendulum", Arc::new(PendulumFeatures), pm)?;
    m.physical = vec![
        PhysicalParam {
            name: "theta1".into(),
            terms: vec![(1, 2, -1.0 / (p.g * p.dt))],
        },
        PhysicalParam {
            name: "theta2".into(),
            terms: vec![(1, 3, 1.0 / p.dt)],
        },
    ];
    Ok(m)
}
