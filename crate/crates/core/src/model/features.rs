use std::fmt::Debug;

use super::Dimensions;
use crate::error::{check_len, Result};

/// Known basis functions `φ(x, u)`.
pub trait FeatureMap: Debug + Send + Sync {
    fn dims(&self) -> Dimensions;

    fn labels(&self) -> Vec<String>;

    /// Writes `φ(x, u)` into `out`. Lengths are the caller's responsibility.
    fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]);
}

/// Checked evaluation of a feature map.
pub fn eval_features(map: &dyn FeatureMap, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let d = map.dims();
    check_len("state", d.n_x, x.len())?;
    check_len("input", d.n_u, u.len())?;
    let mut out = vec![0.0; d.n_phi];
    map.eval_into(x, u, &mut out);
    Ok(out)
}
