use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Estimator, ExperimentConfig};
use crate::bmsb::{estimate_bmsb, BmsbEstimate};
use crate::bounds::{lse_burn_in, lse_error_bound, sme_diameter_bound, sme_m_choice, BoundInputs};
use crate::error::{CoreError, Result};
use crate::lse::{estimation_error, solve_lse};
use crate::model::{simulate, SystemModel, Trajectory};
use crate::sme::SmeState;
use crate::stochastics::SeedStream;

/// Largest fraction of failed trials tolerated by a sweep.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

/// Metrics of one trial at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: usize,
    pub trial: usize,
    pub lse_err_norm: Option<f64>,
    pub sme_diam_norm: Option<f64>,
    pub truth_member: Option<bool>,
    pub guard: bool,
    pub theo_lse: Option<f64>,
    pub theo_sme: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub t: usize,
    /// Trials that produced metrics at this horizon.
    pub n: usize,
    pub lse_mean: Option<f64>,
    pub lse_std: Option<f64>,
    pub sme_mean: Option<f64>,
    pub sme_std: Option<f64>,
    pub truth_all: Option<bool>,
    pub guard_any: bool,
    pub theo_lse: Option<f64>,
    pub theo_sme: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NestingAudit {
    pub steps_checked: u64,
    pub violations: u64,
    /// Largest increase of the diameter between consecutive steps (0 if none).
    pub max_increase: f64,
    /// Audited steps whose set excluded the true parameters.
    pub truth_failures: u64,
}

impl NestingAudit {
    fn merge(&mut self, o: &NestingAudit) {
        self.steps_checked += o.steps_checked;
        self.violations += o.violations;
        self.max_increase = self.max_increase.max(o.max_increase);
        self.truth_failures += o.truth_failures;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRecord {
    pub t: usize,
    pub trial: usize,
    pub axes: [String; 2],
    pub exact: bool,
    /// Counterclockwise vertices in physical-parameter coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// True physical parameter values on the two axes.
    pub truth: [f64; 2],
}

/// Constants behind the theoretical columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub inputs_lse: BoundInputs,
    pub inputs_sme: BoundInputs,
    pub lse_burn_in: u64,
    /// Block length chosen at each grid horizon.
    pub sme_m: Vec<(usize, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    pub failed_trials: Vec<(usize, String)>,
    pub nesting: Option<NestingAudit>,
    pub projections: Vec<ProjectionRecord>,
    pub bmsb: Option<BmsbEstimate>,
    pub bounds: Option<BoundSummary>,
    /// `||θ*||₂`, divisor of the least-squares errors.
    pub theta_spectral_norm: f64,
    /// `||θ*||_F`, divisor of the set diameters.
    pub theta_frobenius_norm: f64,
    pub lse_slope: Option<f64>,
    pub sme_slope: Option<f64>,
}

impl SweepResult {
    pub fn failed_fraction(&self, trials: usize) -> f64 {
        self.failed_trials.len() as f64 / trials as f64
    }
}

struct TrialOutcome {
    points: Vec<(Option<f64>, Option<f64>, Option<bool>, bool)>,
    nesting: NestingAudit,
    projections: Vec<ProjectionRecord>,
}

/// Runs every trial of a sweep. `bmsb` supplies the theoretical curves; when
/// `None` and the config asks for it, a fresh estimate is computed.
pub fn run_sweep(cfg: &ExperimentConfig, bmsb: Option<BmsbEstimate>) -> Result<SweepResult> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let root = SeedStream::new(cfg.seed);
    let bmsb = match bmsb {
        Some(b) => Some(b),
        None if cfg.bmsb.estimate => Some(estimate_bmsb(
            &model,
            &cfg.build_policy()?,
            &cfg.noise.disturbance,
            &cfg.bmsb.to_config(),
            &root.child("bmsb"),
        )?),
        None => None,
    };

    let spec_norm = model.theta.spectral_norm();
    let frob_norm = model.theta.frobenius_norm();
    let grid = &cfg.sweep.t_grid;
    let (theo, bounds) = theoretical_curves(cfg, &model, bmsb.as_ref(), spec_norm, frob_norm)?;

    let outcomes: Vec<Result<TrialOutcome>> = (0..cfg.sweep.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &model, i, &root.child("trial").child(i)))
        .collect();

    let mut records = Vec::new();
    let mut failed = Vec::new();
    let mut nesting = NestingAudit::default();
    let mut projections = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        if let Err(e) = o {
            failed.push((i, e.to_string()));
        }
    }
    for (k, &t) in grid.iter().enumerate() {
        for (i, o) in outcomes.iter().enumerate() {
            let (theo_lse, theo_sme) = theo[k];
            let rec = match o {
                Ok(out) => {
                    let (l, s, m, g) = out.points[k];
                    Record {
                        t,
                        trial: i,
                        lse_err_norm: l,
                        sme_diam_norm: s,
                        truth_member: m,
                        guard: g,
                        theo_lse,
                        theo_sme,
                        error: None,
                    }
                }
                Err(e) => Record {
                    t,
                    trial: i,
                    lse_err_norm: None,
                    sme_diam_norm: None,
                    truth_member: None,
                    guard: false,
                    theo_lse,
                    theo_sme,
                    error: Some(e.to_string()),
                },
            };
            records.push(rec);
        }
    }
    for o in outcomes.into_iter().flatten() {
        nesting.merge(&o.nesting);
        projections.extend(o.projections);
    }
    let aggregates = aggregate(grid, &records, &theo);
    let slope_of = |f: fn(&Aggregate) -> Option<f64>| {
        let pts: Vec<(f64, f64)> = aggregates
            .iter()
            .filter_map(|a| f(a).map(|m| (a.t as f64, m)))
            .collect();
        fit_loglog_slope(&pts).ok()
    };
    Ok(SweepResult {
        lse_slope: slope_of(|a| a.lse_mean),
        sme_slope: slope_of(|a| a.sme_mean),
        records,
        aggregates,
        failed_trials: failed,
        nesting: cfg.sweep.audit_every_step.then_some(nesting),
        projections,
        bmsb,
        bounds,
        theta_spectral_norm: spec_norm,
        theta_frobenius_norm: frob_norm,
    })
}

type Theo = Vec<(Option<f64>, Option<f64>)>;

fn theoretical_curves(
    cfg: &ExperimentConfig,
    model: &SystemModel,
    bmsb: Option<&BmsbEstimate>,
    spec_norm: f64,
    frob_norm: f64,
) -> Result<(Theo, Option<BoundSummary>)> {
    let grid = &cfg.sweep.t_grid;
    let Some(est) = bmsb else {
        return Ok((vec![(None, None); grid.len()], None));
    };
    let d = model.dims();
    let w = &cfg.noise.disturbance;
    let lse_in = BoundInputs::from_estimate(
        d.n_x,
        d.n_phi,
        w.std_dev(),
        cfg.bounds.delta,
        w.tightness_coefficient(),
        est,
    );
    let sme_in = BoundInputs {
        confidence: cfg.bounds.epsilon,
        ..lse_in
    };
    let burn = lse_burn_in(&lse_in)?;
    let mut theo = Vec::with_capacity(grid.len());
    let mut ms = Vec::with_capacity(grid.len());
    for &t in grid {
        let t64 = t as u64;
        let l = cfg
            .has(Estimator::Lse)
            .then(|| lse_error_bound(&lse_in, t64).ok().map(|b| b / spec_norm))
            .flatten();
        let m = sme_m_choice(&sme_in, t64).ok();
        if let Some(m) = m {
            ms.push((t, m));
        }
        let s = match m {
            Some(m) if cfg.has(Estimator::Sme) => {
                sme_diameter_bound(&sme_in, t64, m).ok().map(|b| b / frob_norm)
            }
            _ => None,
        };
        theo.push((l, s));
    }
    Ok((
        theo,
        Some(BoundSummary {
            inputs_lse: lse_in,
            inputs_sme: sme_in,
            lse_burn_in: burn,
            sme_m: ms,
        }),
    ))
}

fn run_trial(cfg: &ExperimentConfig, model: &SystemModel, trial: usize, stream: &SeedStream) -> Result<TrialOutcome> {
    let grid = &cfg.sweep.t_grid;
    let proj_t: Vec<usize> = if cfg.sme.projection_t.is_empty() {
        grid.clone()
    } else {
        cfg.sme.projection_t.clone()
    };
    let want_proj = cfg.has(Estimator::Sme) && !cfg.sme.projections.is_empty();
    let mut t_max = *grid.last().unwrap_or(&1);
    if want_proj {
        t_max = t_max.max(*proj_t.iter().max().unwrap_or(&0));
    }
    let policy = cfg.build_policy()?;
    let traj = simulate(model, &policy, &cfg.noise.disturbance, t_max, stream)?;
    let spec_norm = model.theta.spectral_norm();
    let frob_norm = model.theta.frobenius_norm();

    let mut points = Vec::with_capacity(grid.len());
    let lse_errs: Vec<Option<f64>> = if cfg.has(Estimator::Lse) {
        grid.iter()
            .map(|&t| {
                let r = solve_lse(&traj.prefix(t)?, model)?;
                Ok(Some(estimation_error(&r, model).0 / spec_norm))
            })
            .collect::<Result<_>>()?
    } else {
        vec![None; grid.len()]
    };

    let mut nesting = NestingAudit::default();
    let mut projections = Vec::new();
    let mut sme_pts = vec![(None, None); grid.len()];
    if cfg.has(Estimator::Sme) {
        let w_max = cfg.sme.w_max.unwrap_or(cfg.noise.disturbance.bound);
        let mut st = SmeState::new(model, w_max, cfg.sme.prior_radius, cfg.sme.prune_interval)?;
        let mut prev = if cfg.sweep.audit_every_step {
            Some(st.diameter()?.value)
        } else {
            None
        };
        let mut k = 0;
        for t in 0..t_max {
            st.update(traj.state(t + 1), traj.feature(t), model)?;
            let len = t + 1;
            if let Some(p) = prev {
                let d = st.diameter()?.value;
                nesting.steps_checked += 1;
                if d > p + 1e-9 {
                    nesting.violations += 1;
                }
                nesting.max_increase = nesting.max_increase.max(d - p);
                if !st.contains_truth(model) {
                    nesting.truth_failures += 1;
                }
                prev = Some(d);
            }
            if k < grid.len() && grid[k] == len {
                let d = st.diameter()?.value;
                sme_pts[k] = (Some(d / frob_norm), Some(st.contains_truth(model)));
                k += 1;
            }
            if want_proj && trial == 0 && proj_t.contains(&len) {
                for pair in &cfg.sme.projections {
                    projections.push(project(&st, model, pair, len, trial)?);
                }
            }
        }
    }
    for k in 0..grid.len() {
        points.push((lse_errs[k], sme_pts[k].0, sme_pts[k].1, guard_by(&traj, grid[k])));
    }
    Ok(TrialOutcome {
        points,
        nesting,
        projections,
    })
}

fn guard_by(traj: &Trajectory, t: usize) -> bool {
    traj.guard_step.is_some_and(|s| s <= t)
}

fn project(
    st: &SmeState,
    model: &SystemModel,
    pair: &[String; 2],
    t: usize,
    trial: usize,
) -> Result<ProjectionRecord> {
    let lookup = |name: &str| {
        model
            .physical_param(name)
            .map(|p| p.terms[0])
            .ok_or_else(|| CoreError::Config(format!("sme.projections: unknown parameter '{name}'")))
    };
    let (ra, ca, sa) = lookup(&pair[0])?;
    let (rb, cb, sb) = lookup(&pair[1])?;
    let proj = st.project_2d((ra, ca), (rb, cb))?;
    let mut vertices: Vec<[f64; 2]> = proj.vertices.iter().map(|v| [v[0] * sa, v[1] * sb]).collect();
    nlsysid_geometry::sort_ccw(&mut vertices);
    let th = model.theta.entries();
    Ok(ProjectionRecord {
        t,
        trial,
        axes: pair.clone(),
        exact: proj.exact,
        vertices,
        truth: [th[(ra, ca)] * sa, th[(rb, cb)] * sb],
    })
}

fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

/// Per-horizon mean and sample standard deviation over successful trials.
pub fn aggregate(grid: &[usize], records: &[Record], theo: &[(Option<f64>, Option<f64>)]) -> Vec<Aggregate> {
    grid.iter()
        .enumerate()
        .map(|(k, &t)| {
            let rs: Vec<&Record> = records.iter().filter(|r| r.t == t && r.error.is_none()).collect();
            let lse: Vec<f64> = rs.iter().filter_map(|r| r.lse_err_norm).collect();
            let sme: Vec<f64> = rs.iter().filter_map(|r| r.sme_diam_norm).collect();
            let truth: Vec<bool> = rs.iter().filter_map(|r| r.truth_member).collect();
            let l = mean_std(&lse);
            let s = mean_std(&sme);
            Aggregate {
                t,
                n: rs.len(),
                lse_mean: l.map(|x| x.0),
                lse_std: l.map(|x| x.1),
                sme_mean: s.map(|x| x.0),
                sme_std: s.map(|x| x.1),
                truth_all: (!truth.is_empty()).then(|| truth.iter().all(|&b| b)),
                guard_any: rs.iter().any(|r| r.guard),
                theo_lse: theo.get(k).and_then(|x| x.0),
                theo_sme: theo.get(k).and_then(|x| x.1),
            }
        })
        .collect()
}

/// Least-squares slope of `log(mean)` against `log(T)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(CoreError::Domain(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(CoreError::Domain(format!(
            "slope fit needs positive values, got ({}, {})",
            p.0, p.1
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(CoreError::Domain("slope fit needs distinct horizons".into()));
    }
    Ok(sxy / sxx)
}
