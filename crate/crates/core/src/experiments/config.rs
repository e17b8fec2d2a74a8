use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bmsb::{log_grid, BmsbConfig};
use crate::error::{CoreError, Result};
use crate::model::{
    linear_scalar_model, pendulum_model, quadrotor_model, ControlPolicy, Feedback, PendulumParams,
    PolicyKind, QuadrotorGains, QuadrotorParams, SystemModel, DEFAULT_CEILING, DEFAULT_GUARD,
};
use crate::sme::{DEFAULT_PRIOR_RADIUS, DEFAULT_PRUNE_INTERVAL};
use crate::stochastics::NoiseSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub policy: PolicyConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub sme: SmeOptions,
    #[serde(default)]
    pub bmsb: BmsbOptions,
    #[serde(default)]
    pub bounds: BoundsOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ixx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iyy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub izz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Coefficient of the linear-scalar model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_guard")]
    pub guard: f64,
    #[serde(default = "default_ceiling")]
    pub ceiling: f64,
}

fn default_guard() -> f64 {
    DEFAULT_GUARD
}

fn default_ceiling() -> f64 {
    DEFAULT_CEILING
}

impl ModelConfig {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.into(),
            m: None,
            l: None,
            ixx: None,
            iyy: None,
            izz: None,
            dt: None,
            g: None,
            theta: None,
            guard: DEFAULT_GUARD,
            ceiling: DEFAULT_CEILING,
        }
    }

    fn pendulum_params(&self) -> PendulumParams {
        let d = PendulumParams::default();
        PendulumParams {
            m: self.m.unwrap_or(d.m),
            l: self.l.unwrap_or(d.l),
            dt: self.dt.unwrap_or(d.dt),
            g: self.g.unwrap_or(d.g),
        }
    }

    fn quadrotor_params(&self) -> QuadrotorParams {
        let d = QuadrotorParams::default();
        QuadrotorParams {
            m: self.m.unwrap_or(d.m),
            ixx: self.ixx.unwrap_or(d.ixx),
            iyy: self.iyy.unwrap_or(d.iyy),
            izz: self.izz.unwrap_or(d.izz),
            dt: self.dt.unwrap_or(d.dt),
            g: self.g.unwrap_or(d.g),
        }
    }

    pub fn build(&self) -> Result<SystemModel> {
        let m = match self.name.as_str() {
            "pendulum" => pendulum_model(&self.pendulum_params())?,
            "quadrotor" => quadrotor_model(&self.quadrotor_params())?,
            "linear-scalar" => linear_scalar_model(self.theta.unwrap_or(0.9))?,
            other => {
                return Err(CoreError::Config(format!(
                    "model.name: unknown model '{other}' (expected pendulum, quadrotor or linear-scalar)"
                )))
            }
        };
        m.with_guard(self.guard, self.ceiling)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Damping gain `k` in `u = -k α̇` (pendulum) or `u = -k x` (linear-scalar).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Hover gains for the quadrotor; defaults apply when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<QuadrotorGainsConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrotorGainsConfig {
    pub kp_z: f64,
    pub kd_z: f64,
    pub kp: f64,
    pub kd: f64,
}

impl PolicyConfig {
    pub fn build(&self, model_cfg: &ModelConfig, input: &NoiseSpec) -> Result<ControlPolicy> {
        if self.kind == PolicyKind::OpenLoopNoise {
            return Ok(ControlPolicy::open_loop(input.clone()));
        }
        let fb = match model_cfg.name.as_str() {
            "pendulum" => Feedback::damping(self.k.ok_or_else(|| {
                CoreError::Config("policy.k: pendulum feedback needs a damping gain".into())
            })?),
            "linear-scalar" => Feedback::Linear {
                gain: vec![vec![-self.k.unwrap_or(0.0)]],
            },
            "quadrotor" => {
                let p = model_cfg.quadrotor_params();
                let d = QuadrotorGains::default();
                let g = self.gains.unwrap_or(QuadrotorGainsConfig {
                    kp_z: d.kp_z,
                    kd_z: d.kd_z,
                    kp: d.kp,
                    kd: d.kd,
                });
                Feedback::QuadrotorHover(QuadrotorGains {
                    kp_z: g.kp_z,
                    kd_z: g.kd_z,
                    kp: g.kp,
                    kd: g.kd,
                    mass: p.m,
                    g: p.g,
                })
            }
            other => return Err(CoreError::Config(format!("model.name: unknown model '{other}'"))),
        };
        Ok(ControlPolicy::closed_loop(fb, input.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub disturbance: NoiseSpec,
    pub input: NoiseSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Lse,
    Sme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub t_grid: Vec<usize>,
    pub trials: usize,
    pub estimators: Vec<Estimator>,
    /// Compute the set diameter after every update and audit nesting.
    pub audit_every_step: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            t_grid: default_t_grid(),
            trials: 1,
            estimators: vec![Estimator::Lse, Estimator::Sme],
            audit_every_step: false,
        }
    }
}

/// Ten log-spaced horizons from 100 to 10000.
pub fn default_t_grid() -> Vec<usize> {
    log_grid(1e2, 1e4, 10).iter().map(|t| t.round() as usize).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmeOptions {
    pub prior_radius: f64,
    pub prune_interval: u64,
    /// Noise bound assumed by the estimator; defaults to the disturbance bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_max: Option<f64>,
    /// Pairs of physical parameter names to project on.
    pub projections: Vec<[String; 2]>,
    /// Horizons at which projections are exported (defaults to the sweep grid).
    pub projection_t: Vec<usize>,
}

impl Default for SmeOptions {
    fn default() -> Self {
        Self {
            prior_radius: DEFAULT_PRIOR_RADIUS,
            prune_interval: DEFAULT_PRUNE_INTERVAL,
            w_max: None,
            projections: Vec::new(),
            projection_t: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BmsbOptions {
    /// Run a fresh estimation for the theoretical curves when no saved
    /// estimate is configured.
    pub estimate: bool,
    pub horizon: usize,
    pub n_traj: usize,
    pub n_dirs: usize,
    pub n_mc: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    pub max_points: usize,
}

impl Default for BmsbOptions {
    fn default() -> Self {
        let d = BmsbConfig::default();
        Self {
            estimate: false,
            horizon: d.horizon,
            n_traj: d.n_traj,
            n_dirs: d.n_dirs,
            n_mc: d.n_mc,
            s_grid: None,
            max_points: d.max_points,
        }
    }
}

impl BmsbOptions {
    pub fn to_config(&self) -> BmsbConfig {
        BmsbConfig {
            horizon: self.horizon,
            n_traj: self.n_traj,
            n_dirs: self.n_dirs,
            n_mc: self.n_mc,
            s_grid: self.s_grid.clone().unwrap_or_else(|| BmsbConfig::default().s_grid),
            max_points: self.max_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsOptions {
    pub delta: f64,
    pub epsilon: f64,
    /// Saved estimate from `bmsb-estimate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bmsb_file: Option<PathBuf>,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            delta: 0.05,
            epsilon: 0.05,
            bmsb_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    pub horizon: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { horizon: 1000 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CoreError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CoreError::Config(m));
        if self.version != SCHEMA_VERSION {
            return err(format!(
                "version: expected {SCHEMA_VERSION}, found {}",
                self.version
            ));
        }
        let model = self.model.build()?;
        let d = model.dims();
        if self.noise.disturbance.dimension != d.n_x {
            return err(format!(
                "noise.disturbance.dimension: model has {} states, found {}",
                d.n_x, self.noise.disturbance.dimension
            ));
        }
        if self.noise.input.dimension != d.n_u {
            return err(format!(
                "noise.input.dimension: model has {} inputs, found {}",
                d.n_u, self.noise.input.dimension
            ));
        }
        for (n, s) in [("noise.disturbance", &self.noise.disturbance), ("noise.input", &self.noise.input)] {
            s.validate().map_err(|e| CoreError::Config(format!("{n}: {e}")))?;
        }
        self.policy.build(&self.model, &self.noise.input)?;
        let g = &self.sweep.t_grid;
        if g.is_empty() || g[0] == 0 || g.windows(2).any(|w| w[1] <= w[0]) {
            return err("sweep.t_grid: must be a nonempty, strictly increasing list of positive horizons".into());
        }
        if self.sweep.trials == 0 {
            return err("sweep.trials: must be at least 1".into());
        }
        if self.sweep.estimators.is_empty() {
            return err("sweep.estimators: must name at least one estimator".into());
        }
        if self.sme.projection_t.iter().any(|&t| t == 0) {
            return err("sme.projection_t: horizons must be positive".into());
        }
        for pair in &self.sme.projections {
            for p in pair {
                if model.physical_param(p).is_none() {
                    return err(format!("sme.projections: unknown parameter '{p}'"));
                }
            }
            if pair[0] == pair[1] {
                return err("sme.projections: a pair needs two distinct parameters".into());
            }
        }
        for (n, v) in [("bounds.delta", self.bounds.delta), ("bounds.epsilon", self.bounds.epsilon)] {
            if !(v > 0.0 && v < 1.0) {
                return err(format!("{n}: must lie in (0, 1), got {v}"));
            }
        }
        self.bmsb
            .to_config()
            .validate()
            .map_err(|e| CoreError::Config(format!("bmsb: {e}")))?;
        if self.simulate.horizon == 0 {
            return err("simulate.horizon: must be at least 1".into());
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<SystemModel> {
        self.model.build()
    }

    pub fn build_policy(&self) -> Result<ControlPolicy> {
        self.policy.build(&self.model, &self.noise.input)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).unwrap_or_default();
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn has(&self, e: Estimator) -> bool {
        self.sweep.estimators.contains(&e)
    }
}
