use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::lp::{lp_maximize, LpStatus};
use crate::tolerance;

/// A single inequality `normal · x <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x)
    }

    /// Signed violation `normal · x - offset`; positive means outside.
    #[inline]
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.eval(x) - self.offset
    }
}

/// Finite intersection of half-spaces in `R^d`.
///
/// `bounded` is only ever set when boundedness has been established, either by
/// construction (boxes) or by [`HPolytope::check_bounded`]. Adding constraints
/// preserves it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPolytope {
    dim: usize,
    constraints: Vec<Halfspace>,
    bounded: bool,
    pruned_at: Option<u64>,
}

impl HPolytope {
    pub fn new(dim: usize, constraints: Vec<Halfspace>) -> Result<Self> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        let mut poly = Self {
            dim,
            constraints: Vec::with_capacity(constraints.len()),
            bounded: false,
            pruned_at: None,
        };
        for h in constraints {
            poly.push(h)?;
        }
        Ok(poly)
    }

    /// Axis-aligned box `[lo_i, hi_i]`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let dim = lo.len();
        let mut constraints = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            constraints.push(Halfspace::new(e.clone(), hi[i]));
            e[i] = -1.0;
            constraints.push(Halfspace::new(e, -lo[i]));
        }
        let mut poly = Self::new(dim, constraints)?;
        poly.bounded = true;
        Ok(poly)
    }

    /// Box centred at `center` with half-width `radius` in every coordinate.
    pub fn cube(center: &[f64], radius: f64) -> Result<Self> {
        let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
        Self::from_box(&lo, &hi)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn is_marked_bounded(&self) -> bool {
        self.bounded
    }

    pub fn pruned_at(&self) -> Option<u64> {
        self.pruned_at
    }

    pub fn set_pruned_at(&mut self, step: u64) {
        self.pruned_at = Some(step);
    }

    pub fn push(&mut self, h: Halfspace) -> Result<()> {
        if h.normal.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: h.normal.len(),
            });
        }
        if norm(&h.normal) == 0.0 {
            return Err(GeometryError::ZeroNormal {
                index: self.constraints.len(),
            });
        }
        self.constraints.push(h);
        Ok(())
    }

    /// Membership with the shared feasibility slack.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x.len())?;
        Ok(self
            .constraints
            .iter()
            .all(|h| h.eval(x) <= h.offset + tolerance::FEASIBILITY))
    }

    /// Largest violation over all constraints (negative when strictly inside).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|h| h.violation(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Solves an LP along each signed coordinate axis and records the result.
    pub fn check_bounded(&mut self) -> Result<bool> {
        if self.bounded {
            return Ok(true);
        }
        for i in 0..self.dim {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; self.dim];
                c[i] = sign;
                match lp_maximize(&c, self)?.status {
                    LpStatus::Optimal => {}
                    LpStatus::Unbounded => return Ok(false),
                    LpStatus::Infeasible => return Err(GeometryError::Empty),
                }
            }
        }
        self.bounded = true;
        Ok(true)
    }

    pub(crate) fn ensure_bounded(&self) -> Result<()> {
        if self.bounded {
            return Ok(());
        }
        for i in 0..self.dim {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; self.dim];
                c[i] = sign;
                match lp_maximize(&c, self)?.status {
                    LpStatus::Optimal => {}
                    LpStatus::Unbounded => return Err(GeometryError::Unbounded { direction: c }),
                    LpStatus::Infeasible => return Err(GeometryError::Empty),
                }
            }
        }
        Ok(())
    }

    /// Removes every constraint that is strictly redundant given the others.
    ///
    /// Constraints are visited in order and each is tested against the set that
    /// remains at that point, so the result describes the same set as the input.
    pub fn prune(&self) -> Result<Self> {
        let mut keep = self.constraints.clone();
        let mut i = 0;
        while i < keep.len() {
            if keep.len() == 1 {
                break;
            }
            let candidate = keep.remove(i);
            let rest = Self {
                dim: self.dim,
                constraints: keep,
                bounded: false,
                pruned_at: None,
            };
            let lp = lp_maximize(&candidate.normal, &rest)?;
            keep = rest.constraints;
            let redundant = lp.status == LpStatus::Optimal
                && lp.value < candidate.offset - tolerance::PRUNE_MARGIN;
            if !redundant {
                keep.insert(i, candidate);
                i += 1;
            }
        }
        Ok(Self {
            dim: self.dim,
            constraints: keep,
            bounded: self.bounded,
            pruned_at: self.pruned_at,
        })
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: n,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
