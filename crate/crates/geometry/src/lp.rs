//! Dense two-phase simplex with Bland's rule.
//!
//! `lp_maximize` solves `max c·x s.t. A x <= b` with `x` free. The polytopes
//! handled here have very few coordinates and many constraints, so the solver
//! works on the dual `min b·y s.t. Aᵀy = c, y >= 0`, whose tableau has only
//! `d` rows. The primal optimizer is read off the final simplex multipliers.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::polytope::{dot, norm, HPolytope};
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

/// Outcome of [`lp_maximize`].
///
/// `value` is the supremum of the objective: `+inf` when unbounded and `-inf`
/// when the feasible set is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpStatus,
    pub value: f64,
    pub point: Option<Vec<f64>>,
}

impl LpResult {
    fn unbounded() -> Self {
        Self {
            status: LpStatus::Unbounded,
            value: f64::INFINITY,
            point: None,
        }
    }

    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            value: f64::NEG_INFINITY,
            point: None,
        }
    }
}

/// Maximizes `c·x` over `poly`.
pub fn lp_maximize(c: &[f64], poly: &HPolytope) -> Result<LpResult> {
    let d = poly.dim();
    if c.len() != d {
        return Err(GeometryError::DimensionMismatch {
            expected: d,
            found: c.len(),
        });
    }
    if poly.is_empty() {
        return Err(GeometryError::NoConstraints);
    }

    // Unit normals keep the tableau well scaled; the primal problem is unchanged.
    let m = poly.len();
    let mut normals = vec![vec![0.0; m]; d];
    let mut offsets = Vec::with_capacity(m);
    for (j, h) in poly.constraints().iter().enumerate() {
        let n = norm(&h.normal);
        for i in 0..d {
            normals[i][j] = h.normal[i] / n;
        }
        offsets.push(h.offset / n);
    }

    match solve_standard(&normals, c, &offsets)? {
        Standard::Optimal { multipliers, .. } => {
            let value = dot(c, &multipliers);
            Ok(LpResult {
                status: LpStatus::Optimal,
                value,
                point: Some(multipliers),
            })
        }
        // Dual unbounded: the primal has no feasible point.
        Standard::Unbounded => Ok(LpResult::infeasible()),
        // Dual infeasible: the primal is either empty or unbounded. Decide with
        // a Farkas certificate `y >= 0, Aᵀy = 0, Σy = 1, b·y < 0`.
        Standard::Infeasible => {
            let mut rows = normals;
            rows.push(vec![1.0; m]);
            let mut rhs = vec![0.0; d];
            rhs.push(1.0);
            match solve_standard(&rows, &rhs, &offsets)? {
                Standard::Optimal { value, .. } if value < -tolerance::FEASIBILITY => {
                    Ok(LpResult::infeasible())
                }
                Standard::Unbounded => Ok(LpResult::infeasible()),
                _ => Ok(LpResult::unbounded()),
            }
        }
    }
}

enum Standard {
    Optimal {
        #[allow(dead_code)]
        value: f64,
        multipliers: Vec<f64>,
    },
    Infeasible,
    Unbounded,
}

/// `min cost·y s.t. rows·y = rhs, y >= 0`.
fn solve_standard(rows: &[Vec<f64>], rhs: &[f64], cost: &[f64]) -> Result<Standard> {
    let r = rows.len();
    let n = cost.len();
    let mut t = Tableau::new(rows, rhs, n);

    // Phase I: minimize the sum of artificials.
    let mut phase1 = vec![0.0; t.cols];
    for a in 0..r {
        phase1[n + a] = 1.0;
    }
    t.set_objective(&phase1);
    t.run(t.cols)?;
    let scale = rhs.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    if t.objective_value() > tolerance::FEASIBILITY * scale {
        return Ok(Standard::Infeasible);
    }

    // Pivot remaining artificials out where possible; rows that cannot be
    // cleared are linearly dependent and keep a zero-level artificial.
    for i in 0..r {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t.at(i, j).abs() > tolerance::PIVOT) {
                t.pivot(i, j);
            }
        }
    }

    // Phase II on the structural columns only.
    let mut phase2 = vec![0.0; t.cols];
    phase2[..n].copy_from_slice(cost);
    t.set_objective(&phase2);
    if !t.run(n)? {
        return Ok(Standard::Unbounded);
    }

    // Reduced cost of artificial k is -pi_k in the sign-normalized system.
    let multipliers = (0..r)
        .map(|k| -t.reduced_cost(n + k) * t.row_sign[k])
        .collect();
    Ok(Standard::Optimal {
        value: t.objective_value(),
        multipliers,
    })
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of width `cols + 1`; the last row holds reduced costs and
    /// the negated objective value, the last column holds basic values.
    data: Vec<f64>,
    basis: Vec<usize>,
    row_sign: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn new(rows: &[Vec<f64>], rhs: &[f64], n: usize) -> Self {
        let r = rows.len();
        let cols = n + r;
        let width = cols + 1;
        let mut data = vec![0.0; (r + 1) * width];
        let mut row_sign = vec![1.0; r];
        for i in 0..r {
            let s = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
            row_sign[i] = s;
            let row = &mut data[i * width..(i + 1) * width];
            for j in 0..n {
                row[j] = s * rows[i][j];
            }
            row[n + i] = 1.0;
            row[cols] = s * rhs[i];
        }
        Self {
            rows: r,
            cols,
            data,
            basis: (n..n + r).collect(),
            row_sign,
            pivots: 0,
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    #[inline]
    fn reduced_cost(&self, j: usize) -> f64 {
        self.at(self.rows, j)
    }

    fn objective_value(&self) -> f64 {
        -self.at(self.rows, self.cols)
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width();
        let base = self.rows * w;
        self.data[base..base + self.cols].copy_from_slice(cost);
        self.data[base + self.cols] = 0.0;
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.data[base + j] -= cb * self.data[i * w + j];
                }
            }
        }
    }

    /// Runs Bland's rule with entering candidates restricted to `0..allowed`.
    /// Returns `false` when the objective is unbounded below.
    fn run(&mut self, allowed: usize) -> Result<bool> {
        loop {
            let Some(e) = (0..allowed).find(|&j| self.reduced_cost(j) < -tolerance::PIVOT) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, e);
                if a > tolerance::PIVOT {
                    let ratio = self.at(i, self.cols).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * lr.abs().max(1.0);
                            if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((l, _)) = leave else {
                return Ok(false);
            };
            self.pivot(l, e);
            if self.pivots > tolerance::MAX_PIVOTS {
                return Err(GeometryError::SolverStalled {
                    pivots: self.pivots,
                    rows: self.rows,
                    cols: self.cols,
                });
            }
        }
    }

    fn pivot(&mut self, l: usize, e: usize) {
        let w = self.width();
        let p = self.data[l * w + e];
        for j in 0..w {
            self.data[l * w + j] /= p;
        }
        self.data[l * w + e] = 1.0;
        for i in 0..=self.rows {
            if i == l {
                continue;
            }
            let f = self.data[i * w + e];
            if f != 0.0 {
                for j in 0..w {
                    self.data[i * w + j] -= f * self.data[l * w + j];
                }
                self.data[i * w + e] = 0.0;
            }
        }
        for i in 0..self.rows {
            let v = &mut self.data[i * w + self.cols];
            if *v < 0.0 && *v > -1e-13 {
                *v = 0.0;
            }
        }
        self.basis[l] = e;
        self.pivots += 1;
    }
}
