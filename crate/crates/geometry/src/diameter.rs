use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::lp::{lp_maximize, LpStatus};
use crate::polytope::HPolytope;
use crate::vertex::{dist, vertices};

/// Euclidean diameter of a polytope.
///
/// `certified_exact` is true when the value comes from full vertex
/// enumeration; otherwise `value` is the largest sampled width, a lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diameter {
    pub value: f64,
    pub certified_exact: bool,
}

/// Support function `h(v) = max_{x in P} v·x`.
pub fn support(poly: &HPolytope, v: &[f64]) -> Result<f64> {
    let res = lp_maximize(v, poly)?;
    match res.status {
        LpStatus::Optimal => Ok(res.value),
        LpStatus::Unbounded => Err(GeometryError::Unbounded {
            direction: v.to_vec(),
        }),
        LpStatus::Infeasible => Err(GeometryError::Empty),
    }
}

/// Width along `v`: `h(v) + h(-v)`.
pub fn width(poly: &HPolytope, v: &[f64]) -> Result<f64> {
    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
    Ok(support(poly, v)? + support(poly, &neg)?)
}

/// Diameter of a bounded polytope.
///
/// Dimensions up to three are handled exactly by vertex enumeration. Above
/// that, the widths along `n_dirs` random unit directions and the `2d` signed
/// axes are maximized, which under-estimates the diameter.
pub fn diameter<R: Rng + ?Sized>(poly: &HPolytope, n_dirs: usize, rng: &mut R) -> Result<Diameter> {
    let d = poly.dim();
    if d <= 3 {
        let vs = vertices(poly)?;
        if vs.is_empty() {
            return Err(GeometryError::Empty);
        }
        let mut best = 0.0_f64;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                best = best.max(dist(&vs[i], &vs[j]));
            }
        }
        return Ok(Diameter {
            value: best,
            certified_exact: true,
        });
    }

    poly.ensure_bounded()?;
    let mut best = 0.0_f64;
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        // h(e) + h(-e) covers both signed axes.
        best = best.max(width(poly, &e)?);
    }
    for _ in 0..n_dirs {
        let v = unit_direction(d, rng);
        best = best.max(width(poly, &v)?);
    }
    Ok(Diameter {
        value: best,
        certified_exact: false,
    })
}

/// Uniform direction on the unit sphere: a normalized standard Gaussian draw.
pub fn unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}
