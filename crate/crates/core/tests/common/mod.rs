//! Reference computations shared by the integration tests. Nothing here calls into the
//! library's geometry; these are the textbook definitions written out directly.
#![allow(dead_code)]

use nalgebra::{Matrix4, Vector4, Vector6};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pg3::projective::Line;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian4(rng: &mut impl Rng) -> Vector4<f64> {
    // Box-Muller, so the oracle does not share the library's sampler
    Vector4::from_fn(|_, _| {
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let v: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    })
}

/// Orthogonal projector onto span(u, v) by Gram-Schmidt.
pub fn projector(u: &Vector4<f64>, v: &Vector4<f64>) -> Matrix4<f64> {
    let a = u / u.norm();
    let b = v - a * a.dot(v);
    let b = b / b.norm();
    a * a.transpose() + b * b.transpose()
}

pub fn line_projector(l: &Line) -> Matrix4<f64> {
    let [u, v] = l.frame();
    projector(u, v)
}

pub fn projector_distance(p: &Matrix4<f64>, q: &Matrix4<f64>) -> f64 {
    (p - q).norm() / 2f64.sqrt()
}

pub fn line_distance(l: &Line, m: &Line) -> f64 {
    projector_distance(&line_projector(l), &line_projector(m))
}

/// The six 2×2 minors of the 2×4 matrix with rows u, v, in the order 01 02 03 23 31 12.
pub fn minors(u: &Vector4<f64>, v: &Vector4<f64>) -> Vector6<f64> {
    let m = |i: usize, j: usize| u[i] * v[j] - u[j] * v[i];
    Vector6::new(m(0, 1), m(0, 2), m(0, 3), m(2, 3), m(3, 1), m(1, 2))
}

/// Plücker relation on the unit-normalized minors.
pub fn quadric_residual(p: &Vector6<f64>) -> f64 {
    let p = p / p.norm();
    (p[0] * p[3] + p[1] * p[4] + p[2] * p[5]).abs()
}

/// Rank of the 4×4 matrix of stacked frames, with a relative singular value cutoff.
pub fn stacked_rank(l: &Line, m: &Line, cutoff: f64) -> usize {
    let [a, b] = l.frame();
    let [c, d] = m.frame();
    let s = Matrix4::from_columns(&[*a, *b, *c, *d]).svd(false, false).singular_values;
    let top = s.max();
    s.iter().filter(|&&x| x > cutoff * top).count()
}

/// exp(A) by scaling and squaring with a degree-18 Taylor polynomial.
pub fn series_exp(a: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = a.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / 2f64.powi(s);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..=18 {
        term = term * b / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// Unit Frobenius norm, sign fixed by the largest entry.
pub fn projective_normal(m: &Matrix4<f64>) -> Matrix4<f64> {
    let mut best = 0;
    for i in 0..16 {
        if m[i].abs() > m[best].abs() {
            best = i;
        }
    }
    let s = m[best].signum() * m.norm();
    m / s
}

/// A random matrix with condition number at most `max_cond`.
pub fn well_conditioned(rng: &mut impl Rng, max_cond: f64) -> Matrix4<f64> {
    loop {
        let m = Matrix4::from_columns(&[gaussian4(rng), gaussian4(rng), gaussian4(rng), gaussian4(rng)]);
        let s = m.svd(false, false).singular_values;
        if s.max() / s.min() <= max_cond {
            return m;
        }
    }
}

/// Hamilton product written out coordinatewise, (w, x, y, z) ↔ (1, i, j, k).
pub fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [a0, a1, a2, a3] = a;
    let [b0, b1, b2, b3] = b;
    [
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ]
}

pub fn e(i: usize) -> Vector4<f64> {
    Vector4::ith(i, 1.0)
}

pub fn coordinate_projector(i: usize, j: usize) -> Matrix4<f64> {
    projector(&e(i), &e(j))
}
