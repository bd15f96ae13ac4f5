//! Real Jordan classification of 4×4 generators into the nine normal forms.
//!
//! Eigenvalues of a defective matrix are only determined to about `ε^{1/k}` for a Jordan
//! block of size `k`, so clustering by a single threshold either splits true blocks or merges
//! distinct eigenvalues. Instead every set partition of the computed spectrum is tried, coarsest
//! first. A partition is accepted when each cluster is tight enough for its size and the
//! kernel dimensions of `(A − μ)^k` (or of `((A − α)² + β²)^k` for a complex pair) add up to the
//! cluster's multiplicity. The Jordan block sizes are read off those kernel dimensions, and the
//! conjugator is built from explicit Jordan chains.

use nalgebra::{Complex, Matrix4, Vector4};
use serde::Serialize;

use super::{FlowParams, JordanCase, OneParamFlow};
use crate::error::{Error, Result};

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-6;

/// Backward error assumed for the computed spectrum of a normalized generator.
const SPECTRUM_NOISE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    pub case: JordanCase,
    pub params: FlowParams,
    /// Scalar `s` with `S⁻¹ A S = A_canonical + s·I`.
    pub shift: f64,
    #[serde(serialize_with = "rows")]
    pub conjugator: Matrix4<f64>,
    pub residual: f64,
    pub ambiguous: bool,
    /// Computed eigenvalues as `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
}

fn rows<S: serde::Serializer>(m: &Matrix4<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    crate::projective::matrix_rows(m).serialize(s)
}

#[derive(Debug, Clone)]
enum Cluster {
    /// Real eigenvalue with Jordan block sizes (descending) and kernel dimensions of `D^k`.
    Real { value: f64, sizes: Vec<usize>, nullities: Vec<usize> },
    /// Pair `α ± iβ`, β > 0; sizes are per conjugate, nullities of `Q^k` in real dimensions.
    Complex { re: f64, im: f64, sizes: Vec<usize>, nullities: Vec<usize> },
}

impl Cluster {
    fn key(&self) -> Complex<f64> {
        match self {
            Cluster::Real { value, .. } => Complex::new(*value, 0.0),
            Cluster::Complex { re, im, .. } => Complex::new(*re, *im),
        }
    }
}

fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

fn cluster_radius(m: usize, tol: f64) -> f64 {
    if m == 1 {
        return 0.0;
    }
    tol.max(10.0 * SPECTRUM_NOISE.powf(1.0 / m as f64))
}

fn singular_values(m: &Matrix4<f64>) -> Vector4<f64> {
    m.svd(false, false).singular_values
}

fn nullity(m: &Matrix4<f64>, threshold: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s <= threshold).count()
}

/// Kernel basis of dimension `dim` (smallest right singular vectors).
fn kernel(m: &Matrix4<f64>, dim: usize) -> Vec<Vector4<f64>> {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    (4 - dim..4).map(|i| vt.row(i).transpose()).collect()
}

fn orthonormal_basis(vs: &[Vector4<f64>]) -> Vec<Vector4<f64>> {
    let mut out: Vec<Vector4<f64>> = Vec::new();
    for v in vs {
        let mut w = *v;
        for _ in 0..2 {
            for q in &out {
                w -= q * q.dot(&w);
            }
        }
        let n = w.norm();
        if n > 1e-10 * v.norm().max(1e-300) && n > 0.0 {
            out.push(w / n);
        }
    }
    out
}

/// Block sizes (descending) from kernel dimensions `n_1 ≤ n_2 ≤ …` of powers of a nilpotent
/// restriction; `unit` is 2 for complex pairs counted in real dimensions.
fn block_sizes(nullities: &[usize], unit: usize) -> Option<Vec<usize>> {
    let mut ge = Vec::new();
    let mut prev = 0;
    for &n in nullities {
        if n < prev || (n - prev) % unit != 0 {
            return None;
        }
        ge.push((n - prev) / unit);
        prev = n;
    }
    if ge.first().copied().unwrap_or(0) == 0 {
        return None;
    }
    let mut sizes = Vec::new();
    for k in (0..ge.len()).rev() {
        let next = ge.get(k + 1).copied().unwrap_or(0);
        if ge[k] < next {
            return None;
        }
        sizes.extend(std::iter::repeat_n(k + 1, ge[k] - next));
    }
    Some(sizes)
}

fn analyse_real(b: &Matrix4<f64>, value: f64, m: usize, rank_tol: f64) -> Option<Cluster> {
    let d = b - Matrix4::identity() * value;
    let mut power = Matrix4::identity();
    let mut nullities = Vec::with_capacity(m);
    for _ in 0..m {
        power = d * power;
        nullities.push(nullity(&power, rank_tol));
    }
    if *nullities.last()? != m {
        return None;
    }
    let sizes = block_sizes(&nullities, 1)?;
    Some(Cluster::Real { value, sizes, nullities })
}

fn analyse_complex(b: &Matrix4<f64>, re: f64, im: f64, m: usize, rank_tol: f64) -> Option<Cluster> {
    let d = b - Matrix4::identity() * re;
    let q = d * d + Matrix4::identity() * (im * im);
    let mut power = Matrix4::identity();
    let mut nullities = Vec::with_capacity(m);
    for _ in 0..m {
        power = q * power;
        nullities.push(nullity(&power, rank_tol));
    }
    if *nullities.last()? != 2 * m {
        return None;
    }
    let sizes = block_sizes(&nullities, 2)?;
    Some(Cluster::Complex { re, im, sizes, nullities })
}

fn centroid(ev: &[Complex<f64>], block: &[usize]) -> Complex<f64> {
    block.iter().map(|&i| ev[i]).sum::<Complex<f64>>() / block.len() as f64
}

fn spread(ev: &[Complex<f64>], block: &[usize]) -> f64 {
    let mut s: f64 = 0.0;
    for &i in block {
        for &j in block {
            s = s.max((ev[i] - ev[j]).norm());
        }
    }
    s
}

/// Clusters for one partition, or `None` when it is inconsistent.
fn clusters_for(b: &Matrix4<f64>, ev: &[Complex<f64>], partition: &[Vec<usize>], tol: f64) -> Option<Vec<Cluster>> {
    let rank_tol = 0.1 * tol;
    let mut used = vec![false; partition.len()];
    let mut out = Vec::new();
    for (bi, block) in partition.iter().enumerate() {
        if used[bi] {
            continue;
        }
        let m = block.len();
        let radius = cluster_radius(m, tol);
        if spread(ev, block) > radius {
            return None;
        }
        let c = centroid(ev, block);
        if c.im.abs() <= radius.max(tol) {
            used[bi] = true;
            out.push(analyse_real(b, c.re, m, rank_tol)?);
            continue;
        }
        let mirror = partition.iter().enumerate().position(|(bj, other)| {
            bj != bi && !used[bj] && other.len() == m && (centroid(ev, other) - c.conj()).norm() <= radius.max(tol)
        })?;
        used[bi] = true;
        used[mirror] = true;
        let cm = centroid(ev, &partition[mirror]);
        let re = 0.5 * (c.re + cm.re);
        let im = 0.5 * (c.im.abs() + cm.im.abs());
        out.push(analyse_complex(b, re, im, m, rank_tol)?);
    }
    Some(out)
}

/// Jordan chains for a real eigenvalue; each chain is ordered eigenvector first.
fn real_chains(a: &Matrix4<f64>, value: f64, sizes: &[usize], nullities: &[usize]) -> Vec<Vec<Vector4<f64>>> {
    let d = a - Matrix4::identity() * value;
    let mut powers = vec![Matrix4::identity()];
    for k in 1..=nullities.len() {
        powers.push(d * powers[k - 1]);
    }
    let mut chosen: Vec<Vector4<f64>> = Vec::new();
    let mut chains = Vec::new();
    for &k in sizes {
        let kk = kernel(&powers[k], nullities[k - 1]);
        let mut span = if k >= 2 { kernel(&powers[k - 1], nullities[k - 2]) } else { Vec::new() };
        span.extend(chosen.iter().copied());
        let w = orthonormal_basis(&span);
        // the vector of ker D^k farthest from ker D^{k-1} + previous chains
        let mut best = kk[0];
        let mut best_norm = -1.0;
        let cols: Vec<Vector4<f64>> = kk
            .iter()
            .map(|v| {
                let mut r = *v;
                for q in &w {
                    r -= q * q.dot(&r);
                }
                r
            })
            .collect();
        let dim = cols.len();
        let mut p = nalgebra::DMatrix::<f64>::zeros(4, dim);
        for (j, c) in cols.iter().enumerate() {
            p.set_column(j, c);
        }
        let svd = p.svd(false, true);
        let vt = svd.v_t.expect("requested");
        let coeffs = vt.row(0);
        let mut top = Vector4::zeros();
        for j in 0..dim {
            top += kk[j] * coeffs[j];
        }
        if top.norm() > 0.0 {
            best = top / top.norm();
            best_norm = 1.0;
        }
        debug_assert!(best_norm > 0.0);
        let mut chain = vec![best];
        for _ in 1..k {
            let next = d * chain[chain.len() - 1];
            chain.push(next);
        }
        chain.reverse();
        chosen.extend(chain.iter().copied());
        chains.push(chain);
    }
    chains
}

/// `(y, x)` with `(A − α)y = βx`, `(A − α)x = −βy` for a semisimple pair `α ± iβ`.
fn rotation_pair(d: &Matrix4<f64>, x: Vector4<f64>, beta: f64) -> [Vector4<f64>; 2] {
    let y = -(d * x) / beta;
    [y, x]
}

fn rotation_pairs(a: &Matrix4<f64>, re: f64, im: f64, count: usize) -> Vec<[Vector4<f64>; 2]> {
    let d = a - Matrix4::identity() * re;
    let q = d * d + Matrix4::identity() * (im * im);
    let ker = kernel(&q, 2 * count);
    let mut chosen: Vec<Vector4<f64>> = Vec::new();
    let mut out = Vec::new();
    for _ in 0..count {
        let w = orthonormal_basis(&chosen);
        let x = ker
            .iter()
            .map(|v| {
                let mut r = *v;
                for qv in &w {
                    r -= qv * qv.dot(&r);
                }
                r
            })
            .max_by(|u, v| u.norm().total_cmp(&v.norm()))
            .expect("nonempty kernel");
        let x = x / x.norm();
        let pair = rotation_pair(&d, x, im);
        chosen.extend(pair);
        out.push(pair);
    }
    out
}

/// Basis `(v1, v2, v3, v4)` realizing `[[βJ, I], [0, βJ]]` for a single 2-block pair.
fn rotation_jordan_basis(a: &Matrix4<f64>, re: f64, im: f64) -> [Vector4<f64>; 4] {
    let d = a - Matrix4::identity() * re;
    // Newton iteration for the semisimple part: s ← s − (s² + β²)(2s)⁻¹
    let mut s = d;
    for _ in 0..4 {
        let Some(inv) = (s * 2.0).try_inverse() else { break };
        s -= (s * s + Matrix4::identity() * (im * im)) * inv;
    }
    let n = d - s;
    let svd = n.svd(false, true);
    let v3 = svd.v_t.expect("requested").row(0).transpose();
    let v4 = (s * v3) / im;
    [n * v3, n * v4, v3, v4]
}

fn shifted(c: &Cluster, sigma: f64, mean: f64) -> Cluster {
    match c.clone() {
        Cluster::Real { value, sizes, nullities } => Cluster::Real { value: sigma * value + mean, sizes, nullities },
        Cluster::Complex { re, im, sizes, nullities } => Cluster::Complex {
            re: sigma * re + mean,
            im: sigma * im,
            sizes,
            nullities,
        },
    }
}

pub fn classify_generator(a: &Matrix4<f64>, tol: f64) -> Result<ClassificationResult> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mean = a.trace() / 4.0;
    let centered = a - Matrix4::identity() * mean;
    let sigma = centered.norm();
    if sigma <= tol * a.norm() || sigma == 0.0 {
        return Err(Error::NotClassifiable);
    }
    let b = centered / sigma;
    let ev: Vec<Complex<f64>> = b.complex_eigenvalues().iter().copied().collect();

    let mut best: Option<(usize, f64, Vec<Cluster>)> = None;
    for partition in set_partitions(4) {
        let Some(clusters) = clusters_for(&b, &ev, &partition, tol) else { continue };
        let worst = partition.iter().map(|blk| spread(&ev, blk)).fold(0.0, f64::max);
        let better = match &best {
            None => true,
            Some((n, w, _)) => partition.len() < *n || (partition.len() == *n && worst < *w),
        };
        if better {
            best = Some((partition.len(), worst, clusters));
        }
    }
    let (_, _, clusters) =
        best.ok_or_else(|| Error::Unclassified("no consistent Jordan structure".into()))?;

    let mut ambiguous = false;
    for (i, x) in clusters.iter().enumerate() {
        if let Cluster::Complex { im, .. } = x {
            ambiguous |= *im < 10.0 * tol;
        }
        for y in &clusters[i + 1..] {
            let (p, q) = (x.key(), y.key());
            ambiguous |= (p - q).norm().min((p - q.conj()).norm()) < 10.0 * tol;
        }
    }

    let clusters: Vec<Cluster> = clusters.iter().map(|c| shifted(c, sigma, mean)).collect();
    let (case, params, shift, columns) = assemble(a, &clusters)?;
    let conjugator = Matrix4::from_columns(&columns);
    let flow = OneParamFlow::new(case, params)?;
    let target = flow.generator() + Matrix4::identity() * shift;
    let residual = match conjugator.try_inverse() {
        Some(inv) => (inv * a * conjugator - target).norm(),
        None => f64::INFINITY,
    };
    Ok(ClassificationResult {
        case,
        params,
        shift,
        conjugator,
        residual,
        ambiguous,
        eigenvalues: ev.iter().map(|z| [sigma * z.re + mean, sigma * z.im]).collect(),
    })
}

type Assembly = (JordanCase, FlowParams, f64, Vec<Vector4<f64>>);

fn assemble(a: &Matrix4<f64>, clusters: &[Cluster]) -> Result<Assembly> {
    let mut complexes: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    // (eigenvalue, block size, chain)
    let mut real_blocks: Vec<(f64, usize, Vec<Vector4<f64>>)> = Vec::new();
    for c in clusters {
        match c {
            Cluster::Complex { re, im, sizes, .. } => complexes.push((*re, *im, sizes.clone())),
            Cluster::Real { value, sizes, nullities } => {
                for chain in real_chains(a, *value, sizes, nullities) {
                    real_blocks.push((*value, chain.len(), chain));
                }
            }
        }
    }
    real_blocks.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.total_cmp(&y.0)));
    complexes.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let p = FlowParams::new;
    match (complexes.as_slice(), real_blocks.len()) {
        ([(re1, im1, s1), (re2, im2, s2)], 0) if s1 == &[1] && s2 == &[1] => {
            let mut cols = Vec::new();
            cols.extend(rotation_pairs(a, *re1, *im1, 1)[0]);
            cols.extend(rotation_pairs(a, *re2, *im2, 1)[0]);
            Ok((JordanCase::A1, p(*im1, re2 - re1, *im2, 0.0), *re1, cols))
        }
        ([(re, im, s)], 0) if s == &[2] => {
            let cols = rotation_jordan_basis(a, *re, *im).to_vec();
            Ok((JordanCase::A2, p(*im, 0.0, 0.0, 0.0), *re, cols))
        }
        ([(re, im, s)], 0) if s == &[1, 1] => {
            let cols: Vec<_> = rotation_pairs(a, *re, *im, 2).into_iter().flatten().collect();
            Ok((JordanCase::A1, p(*im, 0.0, *im, 0.0), *re, cols))
        }
        ([(re, im, s)], _) if s == &[1] => {
            let mut cols = rotation_pairs(a, *re, *im, 1)[0].to_vec();
            if real_blocks[0].1 == 2 {
                let (value, _, chain) = &real_blocks[0];
                cols.extend(chain.iter().copied());
                Ok((JordanCase::B2, p(*im, value - re, 0.0, 0.0), *re, cols))
            } else {
                let mut rb = real_blocks.clone();
                rb.sort_by(|x, y| x.0.total_cmp(&y.0));
                cols.extend(rb.iter().map(|r| r.2[0]));
                Ok((JordanCase::B1, p(*im, rb[0].0 - re, rb[1].0 - re, 0.0), *re, cols))
            }
        }
        ([], _) => {
            let sizes: Vec<usize> = real_blocks.iter().map(|r| r.1).collect();
            let chain_cols = |blocks: &[(f64, usize, Vec<Vector4<f64>>)]| -> Vec<Vector4<f64>> {
                blocks.iter().flat_map(|r| r.2.iter().copied()).collect()
            };
            match sizes.as_slice() {
                [4] => Ok((JordanCase::C1, FlowParams::default(), real_blocks[0].0, chain_cols(&real_blocks))),
                [3, 1] => {
                    let s = real_blocks[0].0;
                    Ok((JordanCase::C2, p(0.0, real_blocks[1].0 - s, 0.0, 0.0), s, chain_cols(&real_blocks)))
                }
                [2, 2] => {
                    // the block with the smaller eigenvalue carries the zero
                    let mut rb = real_blocks.clone();
                    rb.sort_by(|x, y| y.0.total_cmp(&x.0));
                    let s = rb[1].0;
                    Ok((JordanCase::C3, p(rb[0].0 - s, 0.0, 0.0, 0.0), s, chain_cols(&rb)))
                }
                [2, 1, 1] => {
                    let s = real_blocks[0].0;
                    let mut rest = real_blocks[1..].to_vec();
                    rest.sort_by(|x, y| x.0.total_cmp(&y.0));
                    let mut rb = vec![real_blocks[0].clone()];
                    rb.extend(rest);
                    Ok((JordanCase::C4, p(0.0, rb[1].0 - s, rb[2].0 - s, 0.0), s, chain_cols(&rb)))
                }
                [1, 1, 1, 1] => {
                    let mut rb = real_blocks.clone();
                    rb.sort_by(|x, y| x.0.total_cmp(&y.0));
                    let s = rb[0].0;
                    let params = p(0.0, rb[1].0 - s, rb[2].0 - s, rb[3].0 - s);
                    if params.b == 0.0 && params.c == 0.0 && params.d == 0.0 {
                        return Err(Error::NotClassifiable);
                    }
                    Ok((JordanCase::C5, params, s, chain_cols(&rb)))
                }
                other => Err(Error::Unclassified(format!("unexpected real block sizes {other:?}"))),
            }
        }
        _ => Err(Error::Unclassified("unexpected spectrum".into())),
    }
}
