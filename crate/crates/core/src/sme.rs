//! Set-membership estimation: every datum confines the unknown entries of a
//! row to a slab, and the uncertainty set is the running intersection.
//!
//! Constraints never couple rows, so the set is a product of per-row
//! polytopes and its Frobenius diameter is the root-sum-square of the row
//! diameters.

use nlsysid_geometry::{
    diameter, lp_maximize, vertices_2d, HPolytope, Halfspace, LpStatus, Point2,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, contract, CoreError, Result};
use crate::model::{SystemModel, Trajectory};

pub const DEFAULT_PRIOR_RADIUS: f64 = 100.0;
pub const DEFAULT_PRUNE_INTERVAL: u64 = 25;
/// Random widths per row diameter when a row has more than three unknowns.
pub const SAMPLED_DIRECTIONS: usize = 500;
/// A masked feature vector shorter than this carries no information.
const NULL_FEATURE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSet {
    pub row: usize,
    pub cols: Vec<usize>,
    pub poly: HPolytope,
    /// A point known to satisfy every constraint absorbed so far.
    witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmeState {
    /// Rows with at least one unknown entry, in row order.
    pub rows: Vec<RowSet>,
    pub w_max: f64,
    pub prior_radius: f64,
    pub prune_interval: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmeDiameter {
    pub value: f64,
    pub certified_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2d {
    pub vertices: Vec<Point2>,
    /// False when other coordinates were eliminated by support-function bounding.
    pub exact: bool,
}

impl SmeState {
    /// Prior box `[-R0, R0]^{d_j}` for every row with unknowns.
    pub fn new(model: &SystemModel, w_max: f64, prior_radius: f64, prune_interval: u64) -> Result<Self> {
        if !(w_max > 0.0 && w_max.is_finite()) {
            return Err(contract(format!("w_max must be positive, got {w_max}")));
        }
        if !(prior_radius > 0.0 && prior_radius.is_finite()) {
            return Err(contract(format!("prior radius must be positive, got {prior_radius}")));
        }
        if prune_interval == 0 {
            return Err(contract("prune interval must be at least 1"));
        }
        let mut rows = Vec::new();
        for r in 0..model.dims().n_x {
            let cols = model.theta.unknown_columns(r).to_vec();
            if cols.is_empty() {
                continue;
            }
            let d = cols.len();
            rows.push(RowSet {
                row: r,
                poly: HPolytope::cube(&vec![0.0; d], prior_radius)?,
                witness: vec![0.0; d],
                cols,
            });
        }
        if rows.is_empty() {
            return Err(contract("model has no unknown entries"));
        }
        Ok(Self {
            rows,
            w_max,
            prior_radius,
            prune_interval,
            steps: 0,
        })
    }

    /// Absorbs one datum `(φ(x_t, u_t), x_{t+1})`.
    pub fn update(&mut self, x_next: &[f64], features: &[f64], model: &SystemModel) -> Result<()> {
        let dims = model.dims();
        check_len("next state", dims.n_x, x_next.len())?;
        check_len("features", dims.n_phi, features.len())?;
        let th = model.theta.entries();
        let step = self.steps + 1;
        let w = self.w_max;
        for rs in &mut self.rows {
            let mut c = x_next[rs.row];
            for (k, p) in features.iter().enumerate() {
                if !rs.cols.contains(&k) {
                    c -= th[(rs.row, k)] * p;
                }
            }
            let a: Vec<f64> = rs.cols.iter().map(|&k| features[k]).collect();
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na <= NULL_FEATURE {
                if c.abs() > w + 1e-9 {
                    return Err(CoreError::NoiseBoundViolation { row: rs.row, step });
                }
                continue;
            }
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            rs.poly.push(Halfspace::new(a, c + w))?;
            rs.poly.push(Halfspace::new(neg, w - c))?;
            if rs.poly.max_violation(&rs.witness) > 0.0 {
                rs.witness = feasible_point(&rs.poly, rs.row, step)?;
            }
            if step % self.prune_interval == 0 {
                let mut p = rs.poly.prune()?;
                p.set_pruned_at(step);
                rs.poly = p;
            }
        }
        self.steps = step;
        Ok(())
    }

    /// Absorbs every step of a trajectory.
    pub fn absorb(&mut self, traj: &Trajectory, model: &SystemModel) -> Result<()> {
        for t in 0..traj.len {
            self.update(traj.state(t + 1), traj.feature(t), model)?;
        }
        Ok(())
    }

    pub fn row_diameters(&self) -> Result<Vec<SmeDiameter>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.rows
            .iter()
            .map(|rs| {
                let d = diameter(&rs.poly, SAMPLED_DIRECTIONS, &mut rng)?;
                Ok(SmeDiameter {
                    value: d.value,
                    certified_exact: d.certified_exact,
                })
            })
            .collect()
    }

    /// Frobenius diameter of the product set.
    pub fn diameter(&self) -> Result<SmeDiameter> {
        let rows = self.row_diameters()?;
        Ok(SmeDiameter {
            value: rows.iter().map(|d| d.value * d.value).sum::<f64>().sqrt(),
            certified_exact: rows.iter().all(|d| d.certified_exact),
        })
    }

    /// Whether the true unknown entries lie in every row set.
    pub fn contains_truth(&self, model: &SystemModel) -> bool {
        self.rows.iter().all(|rs| {
            let truth: Vec<f64> = rs.cols.iter().map(|&c| model.theta.get(rs.row, c)).collect();
            rs.poly.contains(&truth).unwrap_or(false)
        })
    }

    /// Whether an arbitrary parameter matrix lies in the set.
    pub fn contains(&self, theta: &nalgebra::DMatrix<f64>) -> bool {
        self.rows.iter().all(|rs| {
            let v: Vec<f64> = rs.cols.iter().map(|&c| theta[(rs.row, c)]).collect();
            rs.poly.contains(&v).unwrap_or(false)
        })
    }

    fn locate(&self, (row, col): (usize, usize)) -> Result<(usize, usize)> {
        for (i, rs) in self.rows.iter().enumerate() {
            if rs.row == row {
                if let Some(k) = rs.cols.iter().position(|&c| c == col) {
                    return Ok((i, k));
                }
            }
        }
        Err(contract(format!("entry ({row}, {col}) is not an unknown coordinate")))
    }

    /// Shadow of the set on two unknown entries `(row, col)`.
    pub fn project_2d(&self, a: (usize, usize), b: (usize, usize)) -> Result<Projection2d> {
        let (ia, ka) = self.locate(a)?;
        let (ib, kb) = self.locate(b)?;
        if ia != ib {
            let (lo_a, hi_a) = coordinate_range(&self.rows[ia].poly, ka)?;
            let (lo_b, hi_b) = coordinate_range(&self.rows[ib].poly, kb)?;
            return Ok(Projection2d {
                vertices: vec![[lo_a, lo_b], [hi_a, lo_b], [hi_a, hi_b], [lo_a, hi_b]],
                exact: true,
            });
        }
        if ka == kb {
            return Err(contract("projection needs two distinct coordinates"));
        }
        let poly = &self.rows[ia].poly;
        if poly.dim() == 2 {
            let mut v = vertices_2d(poly)?;
            if ka == 1 {
                v.iter_mut().for_each(|p| p.swap(0, 1));
                nlsysid_geometry::sort_ccw(&mut v);
            }
            return Ok(Projection2d {
                vertices: v,
                exact: true,
            });
        }
        // Outer polygon from support values along 64 in-plane directions.
        let mut shadow = HPolytope::new(2, Vec::new())?;
        for k in 0..64 {
            let t = std::f64::consts::TAU * k as f64 / 64.0;
            let mut c = vec![0.0; poly.dim()];
            c[ka] = t.cos();
            c[kb] = t.sin();
            let h = nlsysid_geometry::support(poly, &c)?;
            shadow.push(Halfspace::new(vec![t.cos(), t.sin()], h))?;
        }
        shadow.check_bounded()?;
        Ok(Projection2d {
            vertices: vertices_2d(&shadow)?,
            exact: false,
        })
    }
}

fn coordinate_range(poly: &HPolytope, k: usize) -> Result<(f64, f64)> {
    let mut e = vec![0.0; poly.dim()];
    e[k] = 1.0;
    let hi = nlsysid_geometry::support(poly, &e)?;
    e[k] = -1.0;
    let lo = -nlsysid_geometry::support(poly, &e)?;
    Ok((lo, hi))
}

fn feasible_point(poly: &HPolytope, row: usize, step: u64) -> Result<Vec<f64>> {
    let n = poly.constraints().len();
    // The latest constraint is the one most likely to be active; maximizing
    // its normal lands on the current face.
    let c = poly.constraints()[n - 1].normal.clone();
    let res = lp_maximize(&c, poly)?;
    match (res.status, res.point) {
        (LpStatus::Optimal, Some(p)) => Ok(p),
        _ => Err(CoreError::NoiseBoundViolation { row, step }),
    }
}
