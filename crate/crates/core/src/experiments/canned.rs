//! Ready-made configurations for the pendulum and quadrotor studies.

use super::config::{
    default_t_grid, BmsbOptions, BoundsOptions, Estimator, ExperimentConfig, ModelConfig,
    NoiseConfig, PolicyConfig, SimulateOptions, SmeOptions, SweepConfig, SCHEMA_VERSION,
};
use crate::error::{CoreError, Result};
use crate::model::PolicyKind;
use crate::stochastics::NoiseSpec;

pub const FIGURE_IDS: [&str; 11] = [
    "fig1a", "fig1b", "fig1c", "fig1d", "fig2a", "fig2b", "fig2c", "fig2d", "fig3b", "fig3c", "fig4",
];

#[derive(Clone, Copy)]
enum Noise {
    Uniform(f64),
    Trunc(f64, f64),
}

impl Noise {
    fn spec(self, dim: usize) -> NoiseSpec {
        match self {
            Noise::Uniform(b) => NoiseSpec::uniform(dim, b),
            Noise::Trunc(s, b) => NoiseSpec::truncated_gaussian(dim, s, b),
        }
    }
}

struct Setup {
    model: &'static str,
    k: Option<f64>,
    w: Noise,
    eta: Noise,
    estimator: Estimator,
    trials: usize,
}

fn build(id: &str, s: Setup) -> ExperimentConfig {
    let (n_x, n_u) = if s.model == "quadrotor" { (13, 4) } else { (2, 1) };
    ExperimentConfig {
        version: SCHEMA_VERSION,
        name: Some(id.into()),
        seed: 0,
        model: ModelConfig::named(s.model),
        policy: PolicyConfig {
            kind: PolicyKind::FeedbackPlusNoise,
            k: s.k,
            gains: None,
        },
        noise: NoiseConfig {
            disturbance: s.w.spec(n_x),
            input: s.eta.spec(n_u),
        },
        sweep: SweepConfig {
            t_grid: default_t_grid(),
            trials: s.trials,
            estimators: vec![s.estimator],
            audit_every_step: false,
        },
        sme: SmeOptions::default(),
        bmsb: BmsbOptions {
            estimate: true,
            ..Default::default()
        },
        bounds: BoundsOptions::default(),
        simulate: SimulateOptions::default(),
    }
}

/// Canned configuration for a figure id.
pub fn canned(id: &str) -> Result<ExperimentConfig> {
    use Estimator::{Lse, Sme};
    let u1 = Noise::Uniform(1.0);
    let lse_tg = Noise::Trunc(0.1, 1.0);
    let sme_tg = Noise::Trunc(0.5, 1.0);
    let setup = |model, k, noise, estimator, trials| Setup {
        model,
        k,
        w: noise,
        eta: noise,
        estimator,
        trials,
    };
    let mut cfg = match id {
        "fig1a" => build(id, setup("pendulum", Some(2.0), u1, Lse, 20)),
        "fig1b" => build(id, setup("pendulum", Some(2.0), lse_tg, Lse, 20)),
        "fig1c" => build(id, setup("quadrotor", None, u1, Lse, 20)),
        "fig1d" => build(id, setup("quadrotor", None, lse_tg, Lse, 20)),
        "fig2a" => build(id, setup("pendulum", Some(0.1), u1, Sme, 10)),
        "fig2b" => build(id, setup("pendulum", Some(0.1), sme_tg, Sme, 10)),
        "fig2c" => build(id, setup("quadrotor", None, u1, Sme, 10)),
        "fig2d" => build(id, setup("quadrotor", None, sme_tg, Sme, 10)),
        "fig3b" | "fig3c" => build(
            id,
            Setup {
                model: "pendulum",
                k: Some(0.1),
                w: Noise::Trunc(1.0, 1.0),
                eta: Noise::Trunc(2.0, 2.0),
                estimator: Sme,
                trials: 1,
            },
        ),
        "fig4" => build(id, setup("quadrotor", None, sme_tg, Sme, 1)),
        other => {
            return Err(CoreError::Config(format!(
                "unknown figure '{other}' (expected one of {})",
                FIGURE_IDS.join(", ")
            )))
        }
    };
    match id {
        "fig3c" => {
            cfg.sweep.t_grid = vec![50, 200, 250, 400, 500];
            cfg.sme.projections = vec![["theta1".into(), "theta2".into()]];
            cfg.bmsb.estimate = false;
        }
        "fig4" => {
            cfg.sme.projections = [("theta2", "theta3"), ("theta4", "theta5"), ("theta6", "theta7"), ("theta1", "theta2")]
                .iter()
                .map(|(a, b)| [a.to_string(), b.to_string()])
                .collect();
            cfg.sme.projection_t = vec![100, 1000, 10000];
        }
        _ => {}
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastics::NoiseKind;

    #[test]
    fn all_canned_configs_validate() {
        for id in FIGURE_IDS {
            canned(id).unwrap().validate().unwrap();
        }
        assert!(canned("fig9").is_err());
    }

    #[test]
    fn captions_match() {
        let c = canned("fig1b").unwrap();
        assert_eq!(c.noise.disturbance.kind, NoiseKind::TruncatedGaussian);
        assert_eq!((c.noise.disturbance.sigma, c.noise.disturbance.bound), (Some(0.1), 1.0));
        assert_eq!(c.policy.k, Some(2.0));
        assert_eq!(c.sweep.trials, 20);
        let c = canned("fig2b").unwrap();
        assert_eq!(c.noise.input.sigma, Some(0.5));
        assert_eq!((c.policy.k, c.sweep.trials), (Some(0.1), 10));
        let c = canned("fig3c").unwrap();
        assert_eq!(c.noise.input, NoiseSpec::truncated_gaussian(1, 2.0, 2.0));
        assert_eq!(c.noise.disturbance, NoiseSpec::truncated_gaussian(2, 1.0, 1.0));
        assert_eq!(c.sweep.t_grid, vec![50, 200, 250, 400, 500]);
    }
}
