//! Vertex enumeration for polytopes of dimension at most three.
//!
//! Every `d`-subset of constraints is intersected; intersections that satisfy
//! all constraints are kept and near-duplicates merged. This is `O(m^d · m)`,
//! which is fine for the handful of coordinates per estimator row.

use crate::error::{GeometryError, Result};
use crate::polytope::{norm, HPolytope};
use crate::tolerance;

pub type Point2 = [f64; 2];

/// Vertices of a bounded polytope with `dim <= 3`, in enumeration order.
pub fn vertices(poly: &HPolytope) -> Result<Vec<Vec<f64>>> {
    let d = poly.dim();
    if d > 3 {
        return Err(GeometryError::UnsupportedDimension {
            required: "<= 3",
            dim: d,
        });
    }
    poly.ensure_bounded()?;

    let unit: Vec<(Vec<f64>, f64)> = poly
        .constraints()
        .iter()
        .map(|h| {
            let n = norm(&h.normal);
            (h.normal.iter().map(|a| a / n).collect(), h.offset / n)
        })
        .collect();
    let m = unit.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut consider = |x: Vec<f64>, skip: &[usize]| {
        // Check the constraints that did not define the candidate.
        let feasible = unit.iter().enumerate().all(|(k, (a, b))| {
            skip.contains(&k)
                || a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + tolerance::FEASIBILITY
        });
        if feasible && !out.iter().any(|v| dist(v, &x) <= tolerance::DEDUP_RADIUS) {
            out.push(x);
        }
    };

    match d {
        1 => {
            for i in 0..m {
                let (a, b) = &unit[i];
                consider(vec![b / a[0]], &[i]);
            }
        }
        2 => {
            for i in 0..m {
                for j in i + 1..m {
                    if let Some(x) = solve2(&unit[i], &unit[j]) {
                        consider(x.to_vec(), &[i, j]);
                    }
                }
            }
        }
        _ => {
            for i in 0..m {
                for j in i + 1..m {
                    for k in j + 1..m {
                        if let Some(x) = solve3(&unit[i], &unit[j], &unit[k]) {
                            consider(x.to_vec(), &[i, j, k]);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Vertices of a bounded planar polytope, sorted counterclockwise around their centroid.
pub fn vertices_2d(poly: &HPolytope) -> Result<Vec<Point2>> {
    if poly.dim() != 2 {
        return Err(GeometryError::UnsupportedDimension {
            required: "== 2",
            dim: poly.dim(),
        });
    }
    let mut pts: Vec<Point2> = vertices(poly)?.into_iter().map(|v| [v[0], v[1]]).collect();
    sort_ccw(&mut pts);
    Ok(pts)
}

pub fn sort_ccw(pts: &mut [Point2]) {
    if pts.is_empty() {
        return;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    pts.sort_by(|p, q| {
        let ap = (p[1] - cy).atan2(p[0] - cx);
        let aq = (q[1] - cy).atan2(q[0] - cx);
        ap.total_cmp(&aq)
    });
}

/// Shoelace area of a polygon given in counterclockwise order.
pub fn polygon_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let p = pts[i];
            let q = pts[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    0.5 * twice.abs()
}

fn solve2((a1, b1): &(Vec<f64>, f64), (a2, b2): &(Vec<f64>, f64)) -> Option<[f64; 2]> {
    let det = a1[0] * a2[1] - a1[1] * a2[0];
    if det.abs() <= tolerance::SINGULAR {
        return None;
    }
    Some([(b1 * a2[1] - a1[1] * b2) / det, (a1[0] * b2 - b1 * a2[0]) / det])
}

fn solve3(
    (a1, b1): &(Vec<f64>, f64),
    (a2, b2): &(Vec<f64>, f64),
    (a3, b3): &(Vec<f64>, f64),
) -> Option<[f64; 3]> {
    let det3 = |c0: [f64; 3], c1: [f64; 3], c2: [f64; 3]| {
        c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1])
            + c2[0] * (c0[1] * c1[2] - c0[2] * c1[1])
    };
    // Columns of the row-stacked system.
    let col = |k: usize| [a1[k], a2[k], a3[k]];
    let rhs = [*b1, *b2, *b3];
    let det = det3(col(0), col(1), col(2));
    if det.abs() <= tolerance::SINGULAR {
        return None;
    }
    Some([
        det3(rhs, col(1), col(2)) / det,
        det3(col(0), rhs, col(2)) / det,
        det3(col(0), col(1), rhs) / det,
    ])
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
