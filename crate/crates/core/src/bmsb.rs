//! Monte-Carlo estimation of small-ball constants `(s_φ, p_φ)` and of the
//! feature magnitudes `b_φ`, `b̄_φ`.
//!
//! For a visited point `z = (x, u)` and unit direction `v`, the quantity of
//! interest is `P(|v·φ(x', u')| >= s)` where `x' = θ* φ(z) + w` and
//! `u' = π(x') + η`. The estimate is the minimum over visited points and
//! sampled directions, evaluated on a grid of radii with shared draws.

use nlsysid_geometry::unit_direction;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, contract, CoreError, Result};
use crate::model::{simulate, ControlPolicy, SystemModel};
use crate::stochastics::{NoiseSampler, NoiseSpec, SeedStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BmsbConfig {
    pub horizon: usize,
    pub n_traj: usize,
    pub n_dirs: usize,
    pub n_mc: usize,
    /// Ascending candidate radii.
    pub s_grid: Vec<f64>,
    /// Visited points above this count are subsampled with an even stride.
    pub max_points: usize,
}

impl Default for BmsbConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            n_traj: 20,
            n_dirs: 1000,
            n_mc: 200,
            s_grid: log_grid(1e-4, 10.0, 51),
            max_points: 2000,
        }
    }
}

impl BmsbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.n_traj == 0 || self.n_dirs == 0 || self.n_mc == 0 {
            return Err(contract("BMSB budgets must all be at least 1"));
        }
        if self.max_points == 0 {
            return Err(contract("max_points must be at least 1"));
        }
        if self.s_grid.is_empty() {
            return Err(contract("s_grid must not be empty"));
        }
        if self.s_grid.iter().any(|s| !(*s >= 0.0))
            || self.s_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(contract("s_grid must be nonnegative and strictly ascending"));
        }
        Ok(())
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmsbProvenance {
    pub model: String,
    pub horizon: usize,
    pub n_traj: usize,
    pub n_dirs: usize,
    pub n_mc: usize,
    pub root_seed: u64,
    pub label: String,
    pub points_visited: usize,
    pub points_used: usize,
    pub subsampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmsbEstimate {
    pub s_phi: f64,
    pub p_phi: f64,
    pub b_phi: f64,
    pub b_bar_phi: f64,
    /// `(s, p̄(s))` for every grid radius.
    pub profile: Vec<(f64, f64)>,
    pub provenance: BmsbProvenance,
}

struct NextStep<'a> {
    model: &'a SystemModel,
    policy: &'a ControlPolicy,
    w: NoiseSampler,
    eta: NoiseSampler,
}

impl<'a> NextStep<'a> {
    fn new(model: &'a SystemModel, policy: &'a ControlPolicy, noise: &NoiseSpec) -> Result<Self> {
        check_len("disturbance dimension", model.dims().n_x, noise.dimension)?;
        policy.validate(model)?;
        Ok(Self {
            model,
            policy,
            w: noise.sampler()?,
            eta: policy.noise.sampler()?,
        })
    }

    /// `n_mc` draws of `φ(x', u')` from `z`, stored row-major.
    fn draw(&self, x: &[f64], u: &[f64], n_mc: usize, stream: &SeedStream) -> Result<Vec<f64>> {
        let d = self.model.dims();
        let mut phi = vec![0.0; d.n_phi];
        self.model.features.eval_into(x, u, &mut phi);
        let mut mean = vec![0.0; d.n_x];
        self.model.apply_theta(&phi, &mut mean);
        let mut rng = stream.rng();
        let mut out = vec![0.0; n_mc * d.n_phi];
        let mut w = vec![0.0; d.n_x];
        let mut xn = vec![0.0; d.n_x];
        let mut un = vec![0.0; d.n_u];
        let mut eta = vec![0.0; d.n_u];
        for k in 0..n_mc {
            self.w.fill(&mut rng, &mut w)?;
            self.eta.fill(&mut rng, &mut eta)?;
            for i in 0..d.n_x {
                xn[i] = mean[i] + w[i];
            }
            self.policy.feedback_into(&xn, &mut un);
            un.iter_mut().zip(&eta).for_each(|(a, b)| *a += b);
            self.model
                .features
                .eval_into(&xn, &un, &mut out[k * d.n_phi..(k + 1) * d.n_phi]);
        }
        Ok(out)
    }
}

/// Fraction of `n_mc` draws with `|v·φ(x', u')| >= s`.
#[allow(clippy::too_many_arguments)]
pub fn mc_smallball_prob(
    model: &SystemModel,
    policy: &ControlPolicy,
    noise: &NoiseSpec,
    z: (&[f64], &[f64]),
    v: &[f64],
    s: f64,
    n_mc: usize,
    stream: &SeedStream,
) -> Result<f64> {
    let d = model.dims();
    check_len("state", d.n_x, z.0.len())?;
    check_len("input", d.n_u, z.1.len())?;
    check_len("direction", d.n_phi, v.len())?;
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if (nv - 1.0).abs() > 1e-12 {
        return Err(contract(format!("direction must be a unit vector, norm {nv}")));
    }
    if n_mc == 0 {
        return Err(contract("n_mc must be at least 1"));
    }
    let next = NextStep::new(model, policy, noise)?;
    let draws = next.draw(z.0, z.1, n_mc, stream)?;
    let hits = draws
        .chunks(d.n_phi)
        .filter(|phi| dot(v, phi).abs() >= s)
        .count();
    Ok(hits as f64 / n_mc as f64)
}

/// Estimates `(s_φ, p_φ, b_φ, b̄_φ)` by simulation.
///
/// The returned radius is the largest grid value whose minimum probability
/// lies strictly inside `(0, 1)`.
pub fn estimate_bmsb(
    model: &SystemModel,
    policy: &ControlPolicy,
    noise: &NoiseSpec,
    cfg: &BmsbConfig,
    stream: &SeedStream,
) -> Result<BmsbEstimate> {
    cfg.validate()?;
    let d = model.dims();
    let next = NextStep::new(model, policy, noise)?;

    let trajs = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| simulate(model, policy, noise, cfg.horizon, &stream.child("traj").child(i)))
        .collect::<Result<Vec<_>>>()?;

    let mut b_phi = 0.0_f64;
    let mut b_bar = 0.0_f64;
    for t in 0..cfg.horizon {
        let mut mean_sq = 0.0;
        for tr in &trajs {
            let sq: f64 = tr.feature(t).iter().map(|a| a * a).sum();
            b_phi = b_phi.max(sq.sqrt());
            mean_sq += sq;
        }
        b_bar = b_bar.max(mean_sq / cfg.n_traj as f64);
    }

    let visited: Vec<(usize, usize)> = (0..cfg.n_traj)
        .flat_map(|i| (0..cfg.horizon).map(move |t| (i, t)))
        .collect();
    let points: Vec<(usize, usize)> = if visited.len() > cfg.max_points {
        (0..cfg.max_points)
            .map(|k| visited[k * visited.len() / cfg.max_points])
            .collect()
    } else {
        visited.clone()
    };

    let mut dir_rng = stream.child("directions").rng();
    let dirs: Vec<Vec<f64>> = (0..cfg.n_dirs)
        .map(|_| unit_direction(d.n_phi, &mut dir_rng))
        .collect();

    let g = cfg.s_grid.len();
    let per_point = points
        .par_iter()
        .enumerate()
        .map(|(k, &(i, t))| {
            let tr = &trajs[i];
            let draws = next.draw(tr.state(t), tr.input(t), cfg.n_mc, &stream.child("mc").child(k))?;
            let mut worst = vec![cfg.n_mc; g];
            let mut hist = vec![0usize; g + 1];
            for v in &dirs {
                hist.iter_mut().for_each(|h| *h = 0);
                for phi in draws.chunks(d.n_phi) {
                    let a = dot(v, phi).abs();
                    // Number of grid radii not exceeding a.
                    hist[cfg.s_grid.partition_point(|&s| s <= a)] += 1;
                }
                // Hits at grid index j are draws with at least j + 1 radii below them.
                let mut above = 0;
                for j in (0..g).rev() {
                    above += hist[j + 1];
                    worst[j] = worst[j].min(above);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut min_hits = vec![cfg.n_mc; g];
    for w in &per_point {
        for j in 0..g {
            min_hits[j] = min_hits[j].min(w[j]);
        }
    }
    let profile: Vec<(f64, f64)> = cfg
        .s_grid
        .iter()
        .zip(&min_hits)
        .map(|(&s, &h)| (s, h as f64 / cfg.n_mc as f64))
        .collect();
    let chosen = profile.iter().rev().find(|(_, p)| *p > 0.0 && *p < 1.0);
    let Some(&(s_phi, p_phi)) = chosen else {
        return Err(CoreError::BmsbEstimation {
            profile: profile.iter().map(|p| p.1).collect(),
        });
    };
    Ok(BmsbEstimate {
        s_phi,
        p_phi,
        b_phi,
        b_bar_phi: b_bar,
        profile,
        provenance: BmsbProvenance {
            model: model.name.clone(),
            horizon: cfg.horizon,
            n_traj: cfg.n_traj,
            n_dirs: cfg.n_dirs,
            n_mc: cfg.n_mc,
            root_seed: stream.root(),
            label: stream.label().to_string(),
            points_visited: visited.len(),
            points_used: points.len(),
            subsampled: points.len() < visited.len(),
        },
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
