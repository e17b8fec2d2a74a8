//! Masked least-squares estimation of the unknown entries of `θ*`.
//!
//! The squared-residual objective separates across state rows, so each row is
//! an ordinary least-squares problem over its unknown columns after moving the
//! known part of the prediction to the left-hand side.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{spectral_norm, ParameterMatrix, SystemModel, Trajectory};

/// Reciprocal condition number below which the Gram matrix counts as singular.
pub const SINGULAR_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowFit {
    pub row: usize,
    /// 2-norm condition number of the reduced Gram matrix.
    pub condition: f64,
    pub used_pseudo_inverse: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LseResult {
    pub estimate: ParameterMatrix,
    /// One entry per row with at least one unknown.
    pub rows: Vec<RowFit>,
    pub samples: usize,
}

impl LseResult {
    pub fn used_pseudo_inverse(&self) -> bool {
        self.rows.iter().any(|r| r.used_pseudo_inverse)
    }
}

/// Reduced normal equations `G θ_row = c` for one row.
#[derive(Debug, Clone)]
pub struct RowSystem {
    pub gram: DMatrix<f64>,
    pub cross: DVector<f64>,
}

/// Normal equations of row `row` built from the first `traj.len` samples.
pub fn row_system(traj: &Trajectory, model: &SystemModel, row: usize) -> RowSystem {
    let cols = model.theta.unknown_columns(row);
    let d = cols.len();
    let th = model.theta.entries();
    let mut gram = DMatrix::zeros(d, d);
    let mut cross = DVector::zeros(d);
    let mut a = vec![0.0; d];
    for t in 0..traj.len {
        let phi = traj.feature(t);
        let mut y = traj.state(t + 1)[row];
        for (c, p) in phi.iter().enumerate() {
            if !cols.contains(&c) {
                y -= th[(row, c)] * p;
            }
        }
        for (k, &c) in cols.iter().enumerate() {
            a[k] = phi[c];
        }
        for i in 0..d {
            cross[i] += a[i] * y;
            for j in 0..=i {
                gram[(i, j)] += a[i] * a[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    RowSystem { gram, cross }
}

/// Least-squares estimate of the masked entries from a trajectory.
pub fn solve_lse(traj: &Trajectory, model: &SystemModel) -> Result<LseResult> {
    let dims = model.dims();
    if traj.dims != dims {
        return Err(CoreError::Data(format!(
            "trajectory dimensions {:?} do not match the model {:?}",
            traj.dims, dims
        )));
    }
    let max_d = (0..dims.n_x)
        .map(|r| model.theta.unknown_columns(r).len())
        .max()
        .unwrap_or(0);
    if traj.len < max_d.max(1) {
        return Err(CoreError::InsufficientData {
            samples: traj.len,
            unknowns: max_d,
        });
    }
    if traj.states.iter().chain(&traj.features).any(|v| !v.is_finite()) {
        return Err(CoreError::Data("trajectory contains non-finite values".into()));
    }

    let mut estimate = model.theta.clone();
    let mut rows = Vec::new();
    for row in 0..dims.n_x {
        if model.theta.unknown_columns(row).is_empty() {
            continue;
        }
        let sys = row_system(traj, model, row);
        let (theta_row, fit) = solve_row(&sys, row);
        estimate = estimate.with_row_unknowns(row, theta_row.as_slice())?;
        rows.push(fit);
    }
    Ok(LseResult {
        estimate,
        rows,
        samples: traj.len,
    })
}

fn solve_row(sys: &RowSystem, row: usize) -> (DVector<f64>, RowFit) {
    let eig = sys.gram.clone().symmetric_eigenvalues();
    let hi = eig.iter().copied().fold(0.0_f64, f64::max);
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let well_posed = hi > 0.0 && lo / hi >= SINGULAR_RCOND;
    if well_posed {
        if let Some(ch) = sys.gram.clone().cholesky() {
            return (
                ch.solve(&sys.cross),
                RowFit {
                    row,
                    condition,
                    used_pseudo_inverse: false,
                },
            );
        }
    }
    let eps = SINGULAR_RCOND * hi.max(f64::MIN_POSITIVE);
    let pinv = sys
        .gram
        .clone()
        .pseudo_inverse(eps)
        .unwrap_or_else(|_| DMatrix::zeros(sys.gram.nrows(), sys.gram.ncols()));
    (
        pinv * &sys.cross,
        RowFit {
            row,
            condition,
            used_pseudo_inverse: true,
        },
    )
}

/// Spectral-norm error `||θ̂ - θ*||₂` and its ratio to `||θ*||₂`.
pub fn estimation_error(result: &LseResult, model: &SystemModel) -> (f64, f64) {
    let diff = result.estimate.entries() - model.theta.entries();
    let abs = spectral_norm(&diff);
    (abs, abs / model.theta.spectral_norm())
}

/// Sum of squared one-step residuals of `theta` on a trajectory.
pub fn residual_sum_of_squares(traj: &Trajectory, theta: &DMatrix<f64>) -> f64 {
    let mut rss = 0.0;
    for t in 0..traj.len {
        let phi = traj.feature(t);
        for (r, x) in traj.state(t + 1).iter().enumerate() {
            let pred: f64 = phi.iter().enumerate().map(|(c, p)| theta[(r, c)] * p).sum();
            rss += (x - pred) * (x - pred);
        }
    }
    rss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pendulum_model, ControlPolicy, Feedback, PendulumParams};
    use crate::stochastics::{NoiseSpec, SeedStream};
    use crate::model::simulate;

    fn pendulum_run(w: f64, len: usize) -> (SystemModel, Trajectory) {
        let m = pendulum_model(&PendulumParams::default()).unwrap();
        let pol = ControlPolicy::closed_loop(Feedback::damping(2.0), NoiseSpec::uniform(1, 1.0));
        let tr = simulate(&m, &pol, &NoiseSpec::uniform(2, w), len, &SeedStream::new(3)).unwrap();
        (m, tr)
    }

    #[test]
    fn noiseless_recovery() {
        // A disturbance bound of 1e-300 is numerically zero.
        let (m, tr) = pendulum_run(1e-300, 200);
        let r = solve_lse(&tr, &m).unwrap();
        for (row, col) in m.theta.unknown_entries() {
            assert!((r.estimate.get(row, col) - m.theta.get(row, col)).abs() < 1e-8);
        }
        assert!(!r.used_pseudo_inverse());
        assert_eq!(r.estimate.get(0, 1), m.theta.get(0, 1));
    }

    #[test]
    fn error_of_exact_estimate_is_zero() {
        let (m, tr) = pendulum_run(1e-300, 50);
        let mut r = solve_lse(&tr, &m).unwrap();
        r.estimate = m.theta.clone();
        assert_eq!(estimation_error(&r, &m), (0.0, 0.0));
        let bumped = m.theta.with_row_unknowns(1, &[m.theta.get(1, 2), m.theta.get(1, 3) + 0.1]);
        r.estimate = bumped.unwrap();
        assert!((estimation_error(&r, &m).0 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn insufficient_data() {
        let (m, tr) = pendulum_run(1.0, 1);
        assert!(matches!(
            solve_lse(&tr, &m),
            Err(CoreError::InsufficientData { samples: 1, unknowns: 2 })
        ));
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let (m, mut tr) = pendulum_run(1.0, 20);
        tr.states[5] = f64::NAN;
        assert!(matches!(solve_lse(&tr, &m), Err(CoreError::Data(_))));
    }

    #[test]
    fn singular_gram_falls_back() {
        // From x0 = 0 with a numerically zero disturbance the only feature stays 0.
        let m = crate::model::linear_scalar_model(0.9).unwrap();
        let pol = ControlPolicy::open_loop(NoiseSpec::uniform(1, 1.0));
        let tr = simulate(&m, &pol, &NoiseSpec::uniform(1, 1e-300), 30, &SeedStream::new(1)).unwrap();
        let r = solve_lse(&tr, &m).unwrap();
        assert!(r.used_pseudo_inverse());
        assert!(r.estimate.entries().iter().all(|v| v.is_finite()));
    }
}
