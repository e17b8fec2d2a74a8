//! Closed-form convergence guarantees for the two estimators.
//!
//! Logarithms are natural. Products of large powers are assembled in log
//! space and exponentiated once at the end.

use serde::{Deserialize, Serialize};

use crate::bmsb::BmsbEstimate;
use crate::error::{CoreError, Result};

const C544: f64 = 544.0;

/// Constants shared by all evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n_x: usize,
    pub n_phi: usize,
    /// Effective disturbance standard deviation.
    pub sigma_w: f64,
    /// Confidence parameter, `δ` for the least-squares bound and `ε` for the
    /// set-membership bound.
    pub confidence: f64,
    pub s_phi: f64,
    pub p_phi: f64,
    pub b_phi: f64,
    pub b_bar_phi: f64,
    pub c_w: f64,
}

impl BoundInputs {
    pub fn from_estimate(
        n_x: usize,
        n_phi: usize,
        sigma_w: f64,
        confidence: f64,
        c_w: f64,
        est: &BmsbEstimate,
    ) -> Self {
        Self {
            n_x,
            n_phi,
            sigma_w,
            confidence,
            s_phi: est.s_phi,
            p_phi: est.p_phi,
            b_phi: est.b_phi,
            b_bar_phi: est.b_bar_phi,
            c_w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.confidence;
        if !(c > 0.0 && c < 1.0) {
            return Err(domain(format!("confidence must lie in (0, 1), got {c}")));
        }
        if self.n_x == 0 || self.n_phi == 0 {
            return Err(domain("dimensions must be positive"));
        }
        if !(self.p_phi > 0.0 && self.p_phi < 1.0) {
            return Err(domain(format!("p_phi must lie in (0, 1), got {}", self.p_phi)));
        }
        for (n, v) in [
            ("s_phi", self.s_phi),
            ("b_phi", self.b_phi),
            ("b_bar_phi", self.b_bar_phi),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{n} must be positive, got {v}")));
            }
        }
        if !(self.sigma_w >= 0.0 && self.sigma_w.is_finite()) {
            return Err(domain(format!("sigma_w must be nonnegative, got {}", self.sigma_w)));
        }
        Ok(())
    }

    pub fn a1(&self) -> f64 {
        self.s_phi * self.p_phi / 4.0
    }

    pub fn a2(&self) -> f64 {
        64.0 * self.b_phi * self.b_phi / (self.s_phi * self.s_phi * self.p_phi * self.p_phi)
    }

    pub fn a3(&self) -> f64 {
        self.p_phi * self.p_phi / 8.0
    }

    pub fn a4(&self) -> f64 {
        16.0 * self.b_phi * (self.n_x as f64).sqrt() / (self.s_phi * self.p_phi)
    }

    /// `log(1/δ) + n_φ log(10/p) + n_φ log(b̄ / (δ s²))`
    fn lse_log_terms(&self) -> f64 {
        let (d, p, s, n) = (self.confidence, self.p_phi, self.s_phi, self.n_phi as f64);
        (1.0 / d).ln() + n * (10.0 / p).ln() + n * (self.b_bar_phi / (d * s * s)).ln()
    }
}

fn domain(msg: impl Into<String>) -> CoreError {
    CoreError::Domain(msg.into())
}

/// Smallest horizon at which the least-squares bound is claimed.
pub fn lse_burn_in(inp: &BoundInputs) -> Result<u64> {
    inp.validate()?;
    let (p, n) = (inp.p_phi, inp.n_phi as f64);
    let rhs = (10.0 / p) * (inp.lse_log_terms() + n * (10.0 / p).ln());
    Ok(rhs.max(0.0).ceil() as u64)
}

/// High-probability bound on `||θ̂_T - θ*||₂` for least squares.
pub fn lse_error_bound(inp: &BoundInputs, t: u64) -> Result<f64> {
    let burn = lse_burn_in(inp)?;
    if t < burn {
        return Err(CoreError::BoundPrecondition(format!(
            "T = {t} is below the burn-in {burn}"
        )));
    }
    Ok(lse_error_bound_unchecked(inp, t))
}

/// The least-squares bound expression without the burn-in check.
pub fn lse_error_bound_unchecked(inp: &BoundInputs, t: u64) -> f64 {
    let (p, s) = (inp.p_phi, inp.s_phi);
    let inner = (inp.n_x as f64 + inp.lse_log_terms()) / (t as f64 * s * s);
    (90.0 * inp.sigma_w / p) * inner.max(0.0).sqrt()
}

/// `q_w(ℓ) = min(c_w ℓ, 1)`.
pub fn q_w(c_w: f64, ell: f64) -> f64 {
    (c_w * ell).clamp(0.0, 1.0)
}

/// Upper bound on `P(diam > δ)` for set membership with block length `m`.
pub fn sme_failure_prob(inp: &BoundInputs, t: u64, m: u64, delta: f64) -> Result<f64> {
    inp.validate()?;
    if m == 0 || t <= m {
        return Err(CoreError::BoundPrecondition(format!(
            "need T > m >= 1, got T = {t}, m = {m}"
        )));
    }
    if !(delta > 0.0) {
        return Err(domain(format!("diameter threshold must be positive, got {delta}")));
    }
    let (nx, nphi) = (inp.n_x as f64, inp.n_phi as f64);
    let (a1, a2, a3, a4) = (inp.a1(), inp.a2(), inp.a3(), inp.a4());

    let term1 = if a2 * nphi > 1.0 {
        let log1 = C544.ln() + (t as f64 / m as f64).ln() + 2.5 * nphi.ln()
            + (a2 * nphi).ln().ln()
            + nphi * a2.ln()
            - a3 * m as f64;
        log1.exp()
    } else {
        // log(a2 nφ) <= 0 makes the term nonpositive; clamp to zero.
        0.0
    };

    let q = q_w(inp.c_w, a1 * delta / (4.0 * nx.sqrt()));
    let blocks = t.div_ceil(m) as f64;
    let term2 = if q >= 1.0 || a4 * nx * nphi <= 1.0 {
        0.0
    } else {
        let log2 = C544.ln() + 2.5 * nx.ln() + 2.5 * nphi.ln()
            + (a4 * nx * nphi).ln().ln()
            + nx * nphi * a4.ln()
            + blocks * (-q).ln_1p();
        log2.exp()
    };
    Ok((term1 + term2).max(0.0))
}

/// Block length that makes the first failure term at most `ε`.
pub fn sme_m_choice(inp: &BoundInputs, t: u64) -> Result<u64> {
    inp.validate()?;
    if t == 0 {
        return Err(domain("T must be at least 1"));
    }
    let nphi = inp.n_phi as f64;
    let a2 = inp.a2();
    if a2 * nphi <= 1.0 {
        return Err(domain(format!("a2 * n_phi = {} must exceed 1", a2 * nphi)));
    }
    let rhs = ((t as f64 / inp.confidence).ln()
        + nphi * a2.ln()
        + 2.5 * nphi.ln()
        + (a2 * nphi).ln().ln()
        + C544.ln())
        / inp.a3();
    Ok(rhs.ceil().max(1.0) as u64)
}

/// Diameter bound holding with probability at least `1 - 2ε`.
pub fn sme_diameter_bound(inp: &BoundInputs, t: u64, m: u64) -> Result<f64> {
    inp.validate()?;
    if m == 0 || t <= m {
        return Err(CoreError::BoundPrecondition(format!(
            "need T > m >= 1, got T = {t}, m = {m}"
        )));
    }
    if !(inp.c_w > 0.0) {
        return Err(domain(format!("c_w must be positive, got {}", inp.c_w)));
    }
    let (nx, nphi) = (inp.n_x as f64, inp.n_phi as f64);
    let a4 = inp.a4();
    let k = nx * nphi;
    if a4 * k <= 1.0 {
        return Err(domain(format!("a4 * n_x * n_phi = {} must exceed 1", a4 * k)));
    }
    let logs = (1.0 / inp.confidence).ln()
        + k * a4.ln()
        + 2.5 * k.ln()
        + (a4 * k).ln().ln()
        + C544.ln();
    Ok(4.0 * nx.sqrt() * m as f64 / (inp.c_w * inp.a1() * t as f64) * logs)
}
