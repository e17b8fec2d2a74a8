use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::sweep::{Aggregate, BoundSummary, NestingAudit, Record, SweepResult};
use crate::bmsb::BmsbEstimate;
use crate::error::Result;
use crate::model::{SystemModel, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "T,trial,lse_err_norm,sme_diam_norm,truth_member,guard,theo_lse,theo_sme";

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Records grouped by horizon, each group followed by its `mean` row.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for a in &result.aggregates {
        for r in result.records.iter().filter(|r| r.t == a.t) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.t,
                r.trial,
                num(r.lse_err_norm),
                num(r.sme_diam_norm),
                flag(r.truth_member),
                r.guard,
                num(r.theo_lse),
                num(r.theo_sme)
            );
        }
        let _ = writeln!(
            s,
            "{},mean,{},{},{},{},{},{}",
            a.t,
            num(a.lse_mean),
            num(a.sme_mean),
            flag(a.truth_all),
            a.guard_any,
            num(a.theo_lse),
            num(a.theo_sme)
        );
    }
    s
}

#[derive(Debug, Serialize)]
pub struct ModelSummary {
    pub name: String,
    pub n_x: usize,
    pub n_u: usize,
    pub n_phi: usize,
    pub feature_labels: Vec<String>,
    pub unknown_entries: Vec<(usize, usize)>,
    pub true_physical: Vec<(String, f64)>,
    pub theta_spectral_norm: f64,
    pub theta_frobenius_norm: f64,
}

impl ModelSummary {
    pub fn of(model: &SystemModel) -> Self {
        let d = model.dims();
        Self {
            name: model.name.clone(),
            n_x: d.n_x,
            n_u: d.n_u,
            n_phi: d.n_phi,
            feature_labels: model.features.labels(),
            unknown_entries: model.theta.unknown_entries(),
            true_physical: model.physical_values(model.theta.entries()),
            theta_spectral_norm: model.theta.spectral_norm(),
            theta_frobenius_norm: model.theta.frobenius_norm(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepMeta<'a> {
    pub id: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub model: ModelSummary,
    pub normalization: Normalization,
    pub aggregates: &'a [Aggregate],
    pub lse_slope: Option<f64>,
    pub sme_slope: Option<f64>,
    pub failed_trials: &'a [(usize, String)],
    pub nesting: Option<NestingAudit>,
    pub bmsb: Option<&'a BmsbEstimate>,
    pub bounds: Option<&'a BoundSummary>,
    pub projection_files: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Normalization {
    pub lse_err_norm: &'static str,
    pub sme_diam_norm: &'static str,
    pub theta_spectral_norm: f64,
    pub theta_frobenius_norm: f64,
}

#[derive(Debug, Serialize)]
struct SweepJson<'a> {
    records: &'a [Record],
    aggregates: &'a [Aggregate],
}

/// Writes `<id>.csv` (or `<id>.json`), `<id>.meta.json` and any projection files.
pub fn write_sweep(
    dir: &Path,
    id: &str,
    cfg: &ExperimentConfig,
    model: &SystemModel,
    result: &SweepResult,
    format: Format,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let data = match format {
        Format::Csv => {
            let p = dir.join(format!("{id}.csv"));
            fs::write(&p, sweep_csv(result))?;
            p
        }
        Format::Json => {
            let p = dir.join(format!("{id}.json"));
            let body = SweepJson {
                records: &result.records,
                aggregates: &result.aggregates,
            };
            fs::write(&p, to_json(&body)?)?;
            p
        }
    };
    written.push(data);

    let mut proj_files = Vec::new();
    for pr in &result.projections {
        let name = format!("{id}_{}_{}_T{}.json", pr.axes[0], pr.axes[1], pr.t);
        fs::write(dir.join(&name), to_json(pr)?)?;
        proj_files.push(name);
    }

    let meta = SweepMeta {
        id,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg,
        model: ModelSummary::of(model),
        normalization: Normalization {
            lse_err_norm: "spectral norm of the error divided by ||theta*||_2",
            sme_diam_norm: "Frobenius diameter divided by ||theta*||_F",
            theta_spectral_norm: result.theta_spectral_norm,
            theta_frobenius_norm: result.theta_frobenius_norm,
        },
        aggregates: &result.aggregates,
        lse_slope: result.lse_slope,
        sme_slope: result.sme_slope,
        failed_trials: &result.failed_trials,
        nesting: result.nesting,
        bmsb: result.bmsb.as_ref(),
        bounds: result.bounds.as_ref(),
        projection_files: proj_files.clone(),
    };
    let mp = dir.join(format!("{id}.meta.json"));
    fs::write(&mp, to_json(&meta)?)?;
    written.push(mp);
    written.extend(proj_files.into_iter().map(|f| dir.join(f)));
    Ok(written)
}

pub fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// One row per time step: state, then input and disturbance (empty on the last row).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let d = traj.dims;
    let mut s = String::from("t");
    for i in 0..d.n_x {
        let _ = write!(s, ",x{i}");
    }
    for i in 0..d.n_u {
        let _ = write!(s, ",u{i}");
    }
    for i in 0..d.n_x {
        let _ = write!(s, ",w{i}");
    }
    s.push('\n');
    for t in 0..=traj.len {
        let _ = write!(s, "{t}");
        for v in traj.state(t) {
            let _ = write!(s, ",{v}");
        }
        if t < traj.len {
            for v in traj.input(t).iter().chain(traj.disturbance(t)) {
                let _ = write!(s, ",{v}");
            }
        } else {
            s.push_str(&",".repeat(d.n_u + d.n_x));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::sweep::aggregate;

    #[test]
    fn csv_layout() {
        let rec = |trial, v| Record {
            t: 100,
            trial,
            lse_err_norm: Some(v),
            sme_diam_norm: None,
            truth_member: None,
            guard: false,
            theo_lse: None,
            theo_sme: Some(0.5),
            error: None,
        };
        let records = vec![rec(0, 1.0), rec(1, 3.0)];
        let aggregates = aggregate(&[100], &records, &[(None, Some(0.5))]);
        let r = SweepResult {
            records,
            aggregates,
            failed_trials: vec![],
            nesting: None,
            projections: vec![],
            bmsb: None,
            bounds: None,
            theta_spectral_norm: 1.0,
            theta_frobenius_norm: 1.0,
            lse_slope: None,
            sme_slope: None,
        };
        let csv = sweep_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "100,0,1,,,false,,0.5");
        assert_eq!(lines[3], "100,mean,2,,,false,,0.5");
    }
}
