use serde::{Deserialize, Serialize};

use super::{ControlPolicy, Dimensions, SystemModel};
use crate::error::{check_len, contract, CoreError, Result};
use crate::stochastics::{NoiseSpec, SeedStream};

/// A simulated run. Matrices are stored row-major, one row per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub len: usize,
    pub dims: Dimensions,
    /// `(len + 1) x n_x`
    pub states: Vec<f64>,
    /// `len x n_u`
    pub inputs: Vec<f64>,
    /// `len x n_x`
    pub disturbances: Vec<f64>,
    /// `len x n_phi`, `φ(x_t, u_t)` as used in the update
    pub features: Vec<f64>,
    pub guard_tripped: bool,
    /// First time index whose state norm exceeded the guard.
    pub guard_step: Option<usize>,
}

impl Trajectory {
    pub fn state(&self, t: usize) -> &[f64] {
        let n = self.dims.n_x;
        &self.states[t * n..(t + 1) * n]
    }

    pub fn input(&self, t: usize) -> &[f64] {
        let n = self.dims.n_u;
        &self.inputs[t * n..(t + 1) * n]
    }

    pub fn disturbance(&self, t: usize) -> &[f64] {
        let n = self.dims.n_x;
        &self.disturbances[t * n..(t + 1) * n]
    }

    pub fn feature(&self, t: usize) -> &[f64] {
        let n = self.dims.n_phi;
        &self.features[t * n..(t + 1) * n]
    }

    /// The first `len` steps as a standalone trajectory.
    pub fn prefix(&self, len: usize) -> Result<Trajectory> {
        if len > self.len {
            return Err(contract(format!(
                "prefix of length {len} from a trajectory of length {}",
                self.len
            )));
        }
        let d = self.dims;
        let guard_step = self.guard_step.filter(|&s| s <= len);
        Ok(Trajectory {
            len,
            dims: d,
            states: self.states[..(len + 1) * d.n_x].to_vec(),
            inputs: self.inputs[..len * d.n_u].to_vec(),
            disturbances: self.disturbances[..len * d.n_x].to_vec(),
            features: self.features[..len * d.n_phi].to_vec(),
            guard_tripped: guard_step.is_some(),
            guard_step,
        })
    }

    /// Largest `|x_{t+1} - (θ φ_t + w_t)|` relative to `max(1, |x_{t+1}|)`.
    pub fn max_recurrence_residual(&self, model: &SystemModel) -> f64 {
        let mut pred = vec![0.0; self.dims.n_x];
        let mut worst = 0.0_f64;
        for t in 0..self.len {
            model.apply_theta(self.feature(t), &mut pred);
            for ((p, w), x) in pred.iter().zip(self.disturbance(t)).zip(self.state(t + 1)) {
                worst = worst.max((p + w - x).abs() / x.abs().max(1.0));
            }
        }
        worst
    }
}

/// One update `θ* φ(x, u) + w`.
pub fn step(model: &SystemModel, x: &[f64], u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let d = model.dims();
    check_len("state", d.n_x, x.len())?;
    check_len("input", d.n_u, u.len())?;
    check_len("disturbance", d.n_x, w.len())?;
    let mut phi = vec![0.0; d.n_phi];
    model.features.eval_into(x, u, &mut phi);
    let mut out = vec![0.0; d.n_x];
    model.apply_theta(&phi, &mut out);
    out.iter_mut().zip(w).for_each(|(o, wi)| *o += wi);
    Ok(out)
}

/// Simulates `len` steps from `model.x0`.
///
/// Disturbances and input noise come from the `disturbance` and `input-noise`
/// children of `stream`. Crossing `model.guard` only sets a flag; crossing
/// `model.ceiling` (or producing a non-finite state) is an error.
pub fn simulate(
    model: &SystemModel,
    policy: &ControlPolicy,
    noise: &NoiseSpec,
    len: usize,
    stream: &SeedStream,
) -> Result<Trajectory> {
    let d = model.dims();
    if len == 0 {
        return Err(contract("trajectory length must be at least 1"));
    }
    check_len("disturbance dimension", d.n_x, noise.dimension)?;
    policy.validate(model)?;
    let w_sampler = noise.sampler()?;
    let eta_sampler = policy.noise.sampler()?;
    let mut w_rng = stream.child("disturbance").rng();
    let mut eta_rng = stream.child("input-noise").rng();

    let mut states = Vec::with_capacity((len + 1) * d.n_x);
    let mut inputs = vec![0.0; len * d.n_u];
    let mut dist = vec![0.0; len * d.n_x];
    let mut feats = vec![0.0; len * d.n_phi];
    states.extend_from_slice(&model.x0);

    let mut eta = vec![0.0; d.n_u];
    let mut next = vec![0.0; d.n_x];
    let mut guard_step = None;
    for t in 0..len {
        let x = &states[t * d.n_x..(t + 1) * d.n_x];
        let u = &mut inputs[t * d.n_u..(t + 1) * d.n_u];
        policy.feedback_into(x, u);
        eta_sampler.fill(&mut eta_rng, &mut eta)?;
        u.iter_mut().zip(&eta).for_each(|(a, b)| *a += b);

        let phi = &mut feats[t * d.n_phi..(t + 1) * d.n_phi];
        model.features.eval_into(x, u, phi);
        let w = &mut dist[t * d.n_x..(t + 1) * d.n_x];
        w_sampler.fill(&mut w_rng, w)?;
        model.apply_theta(phi, &mut next);
        next.iter_mut().zip(w.iter()).for_each(|(a, b)| *a += b);

        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > model.ceiling {
            return Err(CoreError::Divergence {
                step: t + 1,
                norm,
                ceiling: model.ceiling,
            });
        }
        if norm > model.guard && guard_step.is_none() {
            guard_step = Some(t + 1);
        }
        states.extend_from_slice(&next);
    }
    Ok(Trajectory {
        len,
        dims: d,
        states,
        inputs,
        disturbances: dist,
        features: feats,
        guard_tripped: guard_step.is_some(),
        guard_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linear_scalar_model, pendulum_model, Feedback, PendulumParams};

    #[test]
    fn step_examples() {
        let p = SystemModel::builtin("pendulum").unwrap();
        assert_eq!(step(&p, &[0.0, 0.0], &[0.0], &[0.01, -0.02]).unwrap(), vec![0.01, -0.02]);
        let l = linear_scalar_model(0.9).unwrap();
        assert_eq!(step(&l, &[1.0], &[0.0], &[0.0]).unwrap(), vec![0.9]);
        // Cancelling disturbance.
        let x = [0.2, -0.1];
        let mut w = step(&p, &x, &[0.05], &[0.0, 0.0]).unwrap();
        w.iter_mut().for_each(|v| *v = -*v);
        assert!(step(&p, &x, &[0.05], &w).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(step(&p, &x, &[0.05], &[0.0]).is_err());
    }

    #[test]
    fn reproducible_and_consistent() {
        let m = pendulum_model(&PendulumParams::default()).unwrap();
        let pol = ControlPolicy::closed_loop(Feedback::damping(2.0), NoiseSpec::uniform(1, 1.0));
        let noise = NoiseSpec::uniform(2, 1.0);
        let s = SeedStream::new(7).child("trial/0");
        let a = simulate(&m, &pol, &noise, 100, &s).unwrap();
        let b = simulate(&m, &pol, &noise, 100, &s).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        assert!(a.max_recurrence_residual(&m) <= 1e-12);
        assert!(a.disturbances.iter().all(|w| w.abs() <= 1.0));
        let p = a.prefix(40).unwrap();
        assert_eq!(p.state(40), a.state(40));
        assert!(a.prefix(101).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let m = linear_scalar_model(3.0).unwrap();
        let pol = ControlPolicy::open_loop(NoiseSpec::uniform(1, 1.0));
        let err = simulate(&m, &pol, &NoiseSpec::uniform(1, 1.0), 100, &SeedStream::new(1));
        assert!(matches!(err, Err(CoreError::Divergence { .. })));
    }
}
