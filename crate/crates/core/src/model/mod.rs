//! Linearly parameterized systems `x' = θ* φ(x, u) + w`, control policies and simulation.

mod features;
mod linear;
mod pendulum;
mod policy;
mod quadrotor;
mod simulate;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, contract, Result};

pub use features::{eval_features, FeatureMap};
pub use linear::{linear_scalar_model, LinearScalarFeatures};
pub use pendulum::{pendulum_model, PendulumFeatures, PendulumParams};
pub use policy::{ControlPolicy, Feedback, PolicyKind, QuadrotorGains};
pub use quadrotor::{quadrotor_model, QuadrotorFeatures, QuadrotorParams};
pub use simulate::{simulate, step, Trajectory};

/// Default radius of the state-norm monitor.
pub const DEFAULT_GUARD: f64 = 100.0;
/// State norm above which a simulation is aborted.
pub const DEFAULT_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n_x: usize,
    pub n_u: usize,
    pub n_phi: usize,
}

impl Dimensions {
    pub fn new(n_x: usize, n_u: usize, n_phi: usize) -> Result<Self> {
        if n_x == 0 || n_u == 0 || n_phi == 0 {
            return Err(contract(format!(
                "dimensions must be positive, got ({n_x}, {n_u}, {n_phi})"
            )));
        }
        Ok(Self { n_x, n_u, n_phi })
    }
}

/// `θ*` together with the mask of entries that estimators must recover.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMatrix {
    entries: DMatrix<f64>,
    unknown: Vec<Vec<usize>>,
}

impl ParameterMatrix {
    /// `unknown` lists `(row, col)` positions; duplicates are ignored.
    pub fn new(entries: DMatrix<f64>, unknown: &[(usize, usize)]) -> Result<Self> {
        let mut cols = vec![Vec::new(); entries.nrows()];
        for &(r, c) in unknown {
            if r >= entries.nrows() || c >= entries.ncols() {
                return Err(contract(format!(
                    "unknown entry ({r}, {c}) outside a {}x{} matrix",
                    entries.nrows(),
                    entries.ncols()
                )));
            }
            if !cols[r].contains(&c) {
                cols[r].push(c);
            }
        }
        cols.iter_mut().for_each(|v| v.sort_unstable());
        Ok(Self {
            entries,
            unknown: cols,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_unknown(&self, row: usize, col: usize) -> bool {
        self.unknown[row].contains(&col)
    }

    /// Sorted unknown columns of `row`; its length is `d_j`.
    pub fn unknown_columns(&self, row: usize) -> &[usize] {
        &self.unknown[row]
    }

    pub fn unknown_count(&self) -> usize {
        self.unknown.iter().map(Vec::len).sum()
    }

    /// Unknown entries in row-major order.
    pub fn unknown_entries(&self) -> Vec<(usize, usize)> {
        self.unknown
            .iter()
            .enumerate()
            .flat_map(|(r, cs)| cs.iter().map(move |&c| (r, c)))
            .collect()
    }

    /// True values of row `row`'s unknown entries.
    pub fn unknown_values(&self, row: usize) -> Vec<f64> {
        self.unknown[row].iter().map(|&c| self.entries[(row, c)]).collect()
    }

    /// Copy with the unknown entries of `row` replaced by `values`.
    pub fn with_row_unknowns(&self, row: usize, values: &[f64]) -> Result<Self> {
        check_len("row unknowns", self.unknown[row].len(), values.len())?;
        let mut out = self.clone();
        for (&c, &v) in self.unknown[row].iter().zip(values) {
            out.entries[(row, c)] = v;
        }
        Ok(out)
    }

    /// Spectral norm of the whole matrix.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// A physical parameter expressed as a linear read-out of `θ*` entries.
///
/// When several entries carry the same parameter the read-out averages them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParam {
    pub name: String,
    /// `(row, col, scale)`: the entry times `scale` equals the parameter.
    pub terms: Vec<(usize, usize, f64)>,
}

impl PhysicalParam {
    pub fn value(&self, theta: &DMatrix<f64>) -> f64 {
        let s: f64 = self.terms.iter().map(|&(r, c, k)| theta[(r, c)] * k).sum();
        s / self.terms.len() as f64
    }
}

/// A system of the form `x_{t+1} = θ* φ(x_t, u_t) + w_t`.
#[derive(Clone)]
pub struct SystemModel {
    pub name: String,
    pub features: Arc<dyn FeatureMap>,
    pub theta: ParameterMatrix,
    pub physical: Vec<PhysicalParam>,
    pub x0: Vec<f64>,
    pub guard: f64,
    pub ceiling: f64,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("dims", &self.dims())
            .field("theta", &self.theta)
            .field("x0", &self.x0)
            .field("guard", &self.guard)
            .finish()
    }
}

impl SystemModel {
    pub fn new(
        name: impl Into<String>,
        features: Arc<dyn FeatureMap>,
        theta: ParameterMatrix,
    ) -> Result<Self> {
        let dims = features.dims();
        if theta.nrows() != dims.n_x || theta.ncols() != dims.n_phi {
            return Err(contract(format!(
                "θ* is {}x{}, features need {}x{}",
                theta.nrows(),
                theta.ncols(),
                dims.n_x,
                dims.n_phi
            )));
        }
        Ok(Self {
            name: name.into(),
            features,
            theta,
            physical: Vec::new(),
            x0: vec![0.0; dims.n_x],
            guard: DEFAULT_GUARD,
            ceiling: DEFAULT_CEILING,
        })
    }

    pub fn dims(&self) -> Dimensions {
        self.features.dims()
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        check_len("initial state", self.dims().n_x, x0.len())?;
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_guard(mut self, guard: f64, ceiling: f64) -> Result<Self> {
        if !(guard > 0.0 && ceiling >= guard) {
            return Err(contract(format!(
                "need 0 < guard <= ceiling, got ({guard}, {ceiling})"
            )));
        }
        self.guard = guard;
        self.ceiling = ceiling;
        Ok(self)
    }

    pub fn physical_param(&self, name: &str) -> Option<&PhysicalParam> {
        self.physical.iter().find(|p| p.name == name)
    }

    /// Physical parameters read from `theta` (e.g. an estimate).
    pub fn physical_values(&self, theta: &DMatrix<f64>) -> Vec<(String, f64)> {
        self.physical
            .iter()
            .map(|p| (p.name.clone(), p.value(theta)))
            .collect()
    }

    /// Built-in model by name with its default parameters.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "pendulum" => pendulum_model(&PendulumParams::default()),
            "quadrotor" => quadrotor_model(&QuadrotorParams::default()),
            "linear-scalar" => linear_scalar_model(0.9),
            other => Err(contract(format!(
                "unknown model '{other}' (expected pendulum, quadrotor or linear-scalar)"
            ))),
        }
    }

    /// `θ* φ` evaluated into `out`.
    pub(crate) fn apply_theta(&self, phi: &[f64], out: &mut [f64]) {
        let th = self.theta.entries();
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (c, p) in phi.iter().enumerate() {
                s += th[(r, c)] * p;
            }
            *o = s;
        }
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(contract(format!("{name} must be positive, got {v}")))
    }
}
