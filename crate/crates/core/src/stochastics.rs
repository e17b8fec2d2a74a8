//! Seeded substreams and bounded, zero-mean noise samplers.
//!
//! Both noise kinds are absolutely continuous with box support, so they have
//! no atoms and put positive mass arbitrarily close to every face of the box.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{contract, CoreError, Result};

/// Rejection attempts allowed for one truncated-Gaussian draw.
pub const MAX_REJECTIONS: u64 = 10_000_000;

/// A reproducible random stream named by a root seed and a `/`-separated label.
///
/// The generator seed is the SHA-256 digest of the root and the label, so
/// distinct labels give unrelated streams without any coordination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    root: u64,
    label: String,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self {
            root,
            label: String::new(),
        }
    }

    pub fn with_label(root: u64, label: impl Into<String>) -> Self {
        Self {
            root,
            label: label.into(),
        }
    }

    pub fn child(&self, part: impl fmt::Display) -> Self {
        let label = if self.label.is_empty() {
            part.to_string()
        } else {
            format!("{}/{}", self.label, part)
        };
        Self {
            root: self.root,
            label,
        }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.root.to_le_bytes());
        h.update([0u8]);
        h.update(self.label.as_bytes());
        let seed: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(seed)
    }
}

impl fmt::Display for SeedStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.root, self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    UniformBox,
    TruncatedGaussian,
}

/// Componentwise i.i.d. noise on the box `[-bound, bound]^dimension`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub dimension: usize,
}

impl NoiseSpec {
    pub fn uniform(dimension: usize, bound: f64) -> Self {
        Self {
            kind: NoiseKind::UniformBox,
            bound,
            sigma: None,
            dimension,
        }
    }

    pub fn truncated_gaussian(dimension: usize, sigma: f64, bound: f64) -> Self {
        Self {
            kind: NoiseKind::TruncatedGaussian,
            bound,
            sigma: Some(sigma),
            dimension,
        }
    }

    /// Same distribution with a different dimension.
    pub fn with_dimension(&self, dimension: usize) -> Self {
        Self {
            dimension,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(contract(format!("noise bound must be positive, got {}", self.bound)));
        }
        match (self.kind, self.sigma) {
            (NoiseKind::TruncatedGaussian, None) => {
                Err(contract("truncated-gaussian noise needs sigma"))
            }
            (NoiseKind::TruncatedGaussian, Some(s)) if !(s > 0.0 && s.is_finite()) => {
                Err(contract(format!("sigma must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sampler(&self) -> Result<NoiseSampler> {
        self.validate()?;
        Ok(match self.kind {
            NoiseKind::UniformBox => NoiseSampler::Uniform { bound: self.bound },
            NoiseKind::TruncatedGaussian => NoiseSampler::TruncatedGaussian(
                TruncatedGaussian::new(self.sigma.unwrap_or_default(), self.bound)?,
            ),
        })
    }

    /// One i.i.d. draw of length `dimension`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let s = self.sampler()?;
        let mut out = vec![0.0; self.dimension];
        s.fill(rng, &mut out)?;
        Ok(out)
    }

    /// Coefficient `c_w` with `P(w^j + bound <= l) >= c_w l` for small `l`.
    pub fn tightness_coefficient(&self) -> f64 {
        match self.kind {
            NoiseKind::UniformBox => 1.0 / (2.0 * self.bound),
            NoiseKind::TruncatedGaussian => {
                let s = self.sigma.unwrap_or(f64::NAN);
                let b = self.bound;
                (-b * b / (2.0 * s * s)).exp()
                    / ((2.0 * std::f64::consts::PI).sqrt() * s).min(2.0 * b)
            }
        }
    }

    /// Per-component standard deviation of the (truncated) distribution.
    pub fn std_dev(&self) -> f64 {
        match self.kind {
            NoiseKind::UniformBox => self.bound / 3f64.sqrt(),
            NoiseKind::TruncatedGaussian => {
                let s = self.sigma.unwrap_or(f64::NAN);
                let beta = self.bound / s;
                let n = Normal::standard();
                let mass = 2.0 * n.cdf(beta) - 1.0;
                s * (1.0 - 2.0 * beta * n.pdf(beta) / mass).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSampler {
    Uniform { bound: f64 },
    TruncatedGaussian(TruncatedGaussian),
}

impl NoiseSampler {
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        match self {
            NoiseSampler::Uniform { bound } => {
                for o in out.iter_mut() {
                    *o = rng.random_range(-*bound..=*bound);
                }
            }
            NoiseSampler::TruncatedGaussian(tg) => {
                for o in out.iter_mut() {
                    *o = tg.sample(rng)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Proposal {
    Gaussian,
    Uniform,
}

/// Exact rejection sampler for `N(0, sigma^2)` restricted to `[-bound, bound]`.
///
/// Draws come from `N(0, sigma^2)` and are rejected outside the interval. When
/// the interval is narrower than `sigma / 2` that proposal wastes almost every
/// draw, so a uniform proposal on the interval accepted with probability
/// `exp(-x^2 / (2 sigma^2))` is used instead; both target the same law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGaussian {
    sigma: f64,
    bound: f64,
    proposal: Proposal,
}

impl TruncatedGaussian {
    pub fn new(sigma: f64, bound: f64) -> Result<Self> {
        if !(sigma > 0.0 && bound > 0.0 && sigma.is_finite() && bound.is_finite()) {
            return Err(contract(format!(
                "truncated Gaussian needs positive sigma and bound, got ({sigma}, {bound})"
            )));
        }
        let proposal = if bound >= 0.5 * sigma {
            Proposal::Gaussian
        } else {
            Proposal::Uniform
        };
        Ok(Self {
            sigma,
            bound,
            proposal,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.sample_counted(rng).map(|(x, _)| x)
    }

    /// Returns the accepted draw and the number of proposals it took.
    pub fn sample_counted<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, u64)> {
        for attempt in 1..=MAX_REJECTIONS {
            match self.proposal {
                Proposal::Gaussian => {
                    let z: f64 = StandardNormal.sample(rng);
                    let x = self.sigma * z;
                    if x.abs() <= self.bound {
                        return Ok((x, attempt));
                    }
                }
                Proposal::Uniform => {
                    let x = rng.random_range(-self.bound..=self.bound);
                    let u: f64 = rng.random();
                    if u < (-x * x / (2.0 * self.sigma * self.sigma)).exp() {
                        return Ok((x, attempt));
                    }
                }
            }
        }
        Err(CoreError::SamplerExhausted {
            attempts: MAX_REJECTIONS,
            sigma: self.sigma,
            bound: self.bound,
        })
    }
}

/// One truncated-Gaussian scalar draw.
pub fn sample_truncated_gaussian_scalar<R: Rng + ?Sized>(
    sigma: f64,
    bound: f64,
    rng: &mut R,
) -> Result<f64> {
    TruncatedGaussian::new(sigma, bound)?.sample(rng)
}
