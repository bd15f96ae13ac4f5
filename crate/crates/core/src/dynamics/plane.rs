//! Flows induced on the projective plane of lines through a fixed point.
//!
//! If `e_i` is an eigenvector of the generator, the lines through `⟨e_i⟩` form the projective
//! plane of `ℝ⁴/⟨e_i⟩`, and `γ_t` acts there by its matrix with row and column `i` removed.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Vector3, Vector4};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flows::OneParamFlow;

/// Samples that move less than this in unit time are fixed.
const FIXED_MOTION: f64 = 1e-10;
/// Fixed samples closer than this are the same fixed point.
const FIXED_MERGE: f64 = 1e-8;
/// A sample is attracted to a fixed point once it is this close at the far horizon.
const CAPTURE: f64 = 1e-3;

fn chordal(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    let (u, v) = (u.normalize(), v.normalize());
    u.cross(&v).norm()
}

fn pencil_image(flow: &OneParamFlow, point: usize, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
    let mut full = Vector4::zeros();
    let mut k = 0;
    for i in 0..4 {
        if i != point {
            full[i] = x[k];
            k += 1;
        }
    }
    let y = flow.image_direction(&full, t);
    let mut out = Vector3::zeros();
    let mut k = 0;
    for i in 0..4 {
        if i != point {
            out[k] = y[i];
            k += 1;
        }
    }
    out
}

/// Affine points `(x, y, 1)` on a `grid × grid` square and `grid − 1` points at infinity.
pub fn plane_grid(grid: usize) -> Vec<Vector3<f64>> {
    let g = grid.max(2);
    let coord = |k: usize| -1.0 + 2.0 * k as f64 / (g - 1) as f64;
    let mut pts = Vec::with_capacity(g * g + g);
    for i in 0..g {
        for j in 0..g {
            pts.push(Vector3::new(coord(i), coord(j), 1.0));
        }
    }
    for k in 0..g - 1 {
        if 2 * k == g - 1 {
            pts.push(Vector3::new(0.0, 1.0, 0.0));
        } else {
            let th = std::f64::consts::PI * k as f64 / (g - 1) as f64;
            pts.push(Vector3::new(th.cos(), th.sin(), 0.0));
        }
    }
    pts
}

#[derive(Debug, Clone, Serialize)]
pub struct PlaneLimit {
    /// The attracting fixed point, unit norm.
    pub point: [f64; 3],
    pub count: usize,
    /// Projective dimension of the span of the samples attracted here.
    pub span_dim: usize,
    /// Whether every attracted sample has first coordinate zero.
    pub first_coordinate_zero: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PencilCensus {
    /// Index of the fixed basis point whose pencil is studied.
    pub pencil_point: usize,
    pub grid: usize,
    pub samples: usize,
    pub fixed_points: Vec<[f64; 3]>,
    pub fixed_samples: usize,
    /// Attractors, largest basin first.
    pub limits: Vec<PlaneLimit>,
    pub unresolved: usize,
}

impl PencilCensus {
    /// `(fixed points, attractors, span dimensions of the basins)`; two censuses with different
    /// signatures cannot come from conjugate actions.
    pub fn signature(&self) -> (usize, usize, Vec<usize>) {
        (self.fixed_points.len(), self.limits.len(), self.limits.iter().map(|l| l.span_dim).collect())
    }
}

fn projective_span_dim(pts: &[Vector3<f64>]) -> usize {
    if pts.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(3, pts.len(), |i, j| pts[j][i] / pts[j].norm());
    let sv = m.svd(false, false).singular_values;
    let rank = sv.iter().filter(|&&s| s > 1e-9 * sv[0]).count();
    rank.saturating_sub(1)
}

/// Census of limit points of the pencil action at `⟨e_point⟩`, sampled on [`plane_grid`].
/// Limits are read off at times `horizon.0 < horizon.1`; fixed points are detected at
/// time `unit`.
pub fn pencil_census(
    flow: &OneParamFlow,
    point: usize,
    grid: usize,
    unit: f64,
    horizon: (f64, f64),
) -> Result<PencilCensus> {
    if point > 3 {
        return Err(Error::Precondition(format!("basis index {point} out of range")));
    }
    let image = flow.image_direction(&Vector4::ith(point, 1.0), unit);
    let off: f64 = (0..4).filter(|&i| i != point).map(|i| image[i].abs()).fold(0.0, f64::max);
    if off > 1e-9 {
        return Err(Error::Precondition(format!("e{} is not fixed by the flow", point + 1)));
    }
    let pts = plane_grid(grid);
    let fixed_flags: Vec<bool> = pts
        .par_iter()
        .map(|x| chordal(x, &pencil_image(flow, point, x, unit)) <= FIXED_MOTION)
        .collect();
    let mut fixed_points: Vec<Vector3<f64>> = Vec::new();
    for (x, _) in pts.iter().zip(&fixed_flags).filter(|(_, f)| **f) {
        if !fixed_points.iter().any(|f| chordal(f, x) <= FIXED_MERGE) {
            fixed_points.push(x.normalize());
        }
    }
    let assignment: Vec<Option<usize>> = pts
        .par_iter()
        .zip(&fixed_flags)
        .map(|(x, &fixed)| {
            if fixed {
                return None;
            }
            let near = pencil_image(flow, point, x, horizon.0);
            let far = pencil_image(flow, point, x, horizon.1);
            let (k, d) = fixed_points
                .iter()
                .enumerate()
                .map(|(k, f)| (k, chordal(f, &far)))
                .min_by(|a, b| a.1.total_cmp(&b.1))?;
            let approaching = d <= chordal(&fixed_points[k], &near) + 1e-12;
            (d <= CAPTURE && approaching).then_some(k)
        })
        .collect();
    let mut basins: BTreeMap<usize, Vec<Vector3<f64>>> = BTreeMap::new();
    let mut unresolved = 0;
    for ((x, &fixed), a) in pts.iter().zip(&fixed_flags).zip(&assignment) {
        match (fixed, a) {
            (true, _) => {}
            (false, Some(k)) => basins.entry(*k).or_default().push(*x),
            (false, None) => unresolved += 1,
        }
    }
    let mut limits: Vec<PlaneLimit> = basins
        .into_iter()
        .map(|(k, members)| PlaneLimit {
            point: fixed_points[k].into(),
            count: members.len(),
            span_dim: projective_span_dim(&members),
            first_coordinate_zero: members.iter().all(|x| x[0] == 0.0),
        })
        .collect();
    limits.sort_by_key(|l| std::cmp::Reverse(l.count));
    Ok(PencilCensus {
        pencil_point: point,
        grid,
        samples: pts.len(),
        fixed_points: fixed_points.iter().map(|f| (*f).into()).collect(),
        fixed_samples: fixed_flags.iter().filter(|f| **f).count(),
        limits,
        unresolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{FlowParams, JordanCase};

    #[test]
    fn grid_contains_axes() {
        let pts = plane_grid(5);
        assert_eq!(pts.len(), 25 + 4);
        assert!(pts.contains(&Vector3::new(0.0, 0.0, 1.0)));
        assert!(pts.contains(&Vector3::new(0.0, 1.0, 0.0)));
        assert!(pts.contains(&Vector3::new(1.0, 0.0, 0.0)));
    }

    #[test]
    fn c3_pencils_differ() {
        let flow = OneParamFlow::new(JordanCase::C3, FlowParams::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        let p = pencil_census(&flow, 0, 21, 1.0, (1e6, 1e8)).unwrap();
        let q = pencil_census(&flow, 2, 21, 1.0, (1e6, 1e8)).unwrap();
        assert_eq!(p.fixed_points.len(), 2);
        assert_eq!(q.fixed_points.len(), 2);
        assert_eq!(p.limits.len(), 2);
        assert_eq!(q.limits.len(), 1);
        assert_eq!(p.unresolved + q.unresolved, 0);
        assert!(p.limits[1].first_coordinate_zero);
        assert_eq!(p.limits[1].span_dim, 1);
    }
}
