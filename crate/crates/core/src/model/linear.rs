use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Dimensions, FeatureMap, ParameterMatrix, PhysicalParam, SystemModel};
use crate::error::Result;

/// `φ(x, u) = (x)` for a scalar state; the input is not a feature.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearScalarFeatures;

impl FeatureMap for LinearScalarFeatures {
    fn dims(&self) -> Dimensions {
        Dimensions {
            n_x: 1,
            n_u: 1,
            n_phi: 1,
        }
    }

    fn labels(&self) -> Vec<String> {
        vec!["x".into()]
    }

    fn eval_into(&self, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
}

/// `x' = θ x + w` with `θ` unknown.
pub fn linear_scalar_model(theta: f64) -> Result<SystemModel> {
    let pm = ParameterMatrix::new(DMatrix::from_element(1, 1, theta), &[(0, 0)])?;
    let mut m = SystemModel::new("linear-scalar", Arc::new(LinearScalarFeatures), pm)?;
    m.physical = vec![PhysicalParam {
        name: "theta".into(),
        terms: vec![(0, 0, 1.0)],
    }];
    Ok(m)
}
