//! Quaternions and the (left) Clifford parallelism of PG(3,ℝ).
//!
//! ℝ⁴ is identified with the quaternions via `(e1, e2, e3, e4) ↔ (1, i, j, k)`. Two lines are
//! left-Clifford parallel when one is a left translate `qL` of the other. Through a point
//! `⟨w⟩` the parallel of `L = span(u, v)` is therefore `span(w, w·u⁻¹·v)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::projective::{
    grassmann_distance, incidence_residual, intersection_point, pairing, sample_line_with,
    sample_point, sample_rng, Hyperplane, Line, ProjMap, ProjPoint, Tolerances,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn normalize(self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroDivisor);
        }
        Ok(self.scale(1.0 / n))
    }

    pub fn inverse(self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::ZeroDivisor);
        }
        Ok(self.conj().scale(1.0 / n2))
    }

    pub fn dot(self, other: Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Matrix of `x ↦ self·x`.
    pub fn left_matrix(self) -> Matrix4<f64> {
        let Quaternion { w, x, y, z } = self;
        Matrix4::new(w, -x, -y, -z, x, w, -z, y, y, z, w, -x, z, -y, x, w)
    }

    /// Matrix of `x ↦ x·self`.
    pub fn right_matrix(self) -> Matrix4<f64> {
        let Quaternion { w, x, y, z } = self;
        Matrix4::new(w, -x, -y, -z, x, w, z, -y, y, -z, w, x, z, y, -x, w)
    }

    /// Unit quaternion uniformly distributed on S³.
    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q = Self::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            if let Ok(u) = q.normalize() {
                return u;
            }
        }
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, b: Quaternion) -> Quaternion {
        Quaternion::new(self.w + b.w, self.x + b.x, self.y + b.y, self.z + b.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, b: Quaternion) -> Quaternion {
        Quaternion::new(self.w - b.w, self.x - b.x, self.y - b.y, self.z - b.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

pub fn quat_product(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

/// A parallelism given by its parallel map `(p, L) ↦ Π(p, L)`.
pub trait Parallelism: Sync {
    fn name(&self) -> &str;
    fn parallel(&self, p: &ProjPoint, l: &Line) -> Result<Line>;
}

/// The left Clifford parallelism.
#[derive(Debug, Clone, Copy, Default)]
pub struct CliffordParallelism;

impl CliffordParallelism {
    /// `span(w, w·u⁻¹·v)` for the given spanning vector `u` of `l`.
    fn parallel_via(p: &ProjPoint, u: &Vector4<f64>, v: &Vector4<f64>) -> Result<Line> {
        let w = Quaternion::from_vector(p.coords());
        let q = w * Quaternion::from_vector(u).inverse()?;
        Line::span(p.coords(), &(q * Quaternion::from_vector(v)).to_vector())
    }

    /// Parallel built from the frame vector `index` of `l` as the translated basis vector.
    pub fn parallel_with_basis(&self, p: &ProjPoint, l: &Line, index: usize) -> Result<Line> {
        let f = l.frame();
        Self::parallel_via(p, &f[index % 2], &f[(index + 1) % 2])
    }

    /// The unit pure quaternion `z` with `L = u·span(1, z)`.
    fn axis(l: &Line) -> Quaternion {
        let [u, v] = l.frame();
        Quaternion::from_vector(u).conj() * Quaternion::from_vector(v)
    }

    /// Image of the line under the Hopf map of its class, a unit pure quaternion.
    pub fn class_coordinate(l: &Line) -> Quaternion {
        let [u, _] = l.frame();
        let u = Quaternion::from_vector(u);
        u * Self::axis(l) * u.conj()
    }

    /// `n` members of the parallel class of `l`, one over each point of a Fibonacci sphere.
    pub fn class_members(l: &Line, n: usize) -> Vec<Line> {
        let z = Self::axis(l);
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|k| {
                let y = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).max(0.0).sqrt();
                let phi = golden * k as f64;
                let s = Quaternion::new(0.0, r * phi.cos(), y, r * phi.sin());
                let x = rotation_taking(z, s);
                Line::span(&x.to_vector(), &(x * z).to_vector())
                    .expect("left translates of an orthonormal pair are orthonormal")
            })
            .collect()
    }
}

/// Unit quaternion `x` with `x·a·x̄ = b` for unit pure `a`, `b`.
fn rotation_taking(a: Quaternion, b: Quaternion) -> Quaternion {
    let c = a.x * b.x + a.y * b.y + a.z * b.z;
    let cross = Quaternion::new(
        0.0,
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    );
    let q = Quaternion::new(1.0 + c, cross.x, cross.y, cross.z);
    if q.norm() > 1e-8 {
        return q.normalize().expect("nonzero");
    }
    // antipodal: any half-turn about an axis orthogonal to a
    let helper = if a.x.abs() < 0.9 { Quaternion::I } else { Quaternion::J };
    let axis = Quaternion::new(
        0.0,
        a.y * helper.z - a.z * helper.y,
        a.z * helper.x - a.x * helper.z,
        a.x * helper.y - a.y * helper.x,
    );
    axis.normalize().expect("helper is not parallel to a")
}

impl Parallelism for CliffordParallelism {
    fn name(&self) -> &str {
        "clifford-left"
    }

    fn parallel(&self, p: &ProjPoint, l: &Line) -> Result<Line> {
        let f = l.frame();
        let index = if f[0][0].abs() >= f[1][0].abs() { 0 } else { 1 };
        self.parallel_with_basis(p, l, index)
    }
}

pub fn clifford_parallel(p: &ProjPoint, l: &Line) -> Line {
    CliffordParallelism
        .parallel(p, l)
        .expect("unit quaternion translates are well conditioned")
}

/// Whether `m` is a left translate of `l`, tested through a point of `m`.
pub fn is_clifford_parallel(l: &Line, m: &Line, tol: &Tolerances) -> bool {
    let through = m.point_at(0.0);
    grassmann_distance(&clifford_parallel(&through, l), m) <= tol.decision
}

/// The pencil transfer `L ↦ Π(q, L)` from the lines through `p` to the lines through `q`.
pub fn transfer(
    witness: &dyn Parallelism,
    p: &ProjPoint,
    q: &ProjPoint,
    l: &Line,
    tol: &Tolerances,
) -> Result<Line> {
    let residual = incidence_residual(p, l);
    if residual > tol.decision {
        return Err(Error::NotInPencil { residual });
    }
    witness.parallel(q, l)
}

/// A broken witness: keeps the point but shears the direction of each parallel.
pub struct ShearedWitness<'a> {
    pub inner: &'a dyn Parallelism,
    pub shear: ProjMap,
}

impl<'a> ShearedWitness<'a> {
    pub fn new(inner: &'a dyn Parallelism) -> Self {
        let mut m = Matrix4::identity();
        m[(0, 2)] = 0.5;
        Self {
            inner,
            shear: ProjMap::new(m).expect("unipotent shear"),
        }
    }
}

impl Parallelism for ShearedWitness<'_> {
    fn name(&self) -> &str {
        "clifford-left+shear"
    }

    fn parallel(&self, p: &ProjPoint, l: &Line) -> Result<Line> {
        let m = self.inner.parallel(p, l)?;
        let x = p.coords();
        let [f, g] = m.frame();
        let d = if (f - x * f.dot(x)).norm() >= (g - x * g.dot(x)).norm() { f } else { g };
        let w = d - x * d.dot(x);
        Line::span(x, &self.shear.apply_vector(&w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Containment,
    Idempotence,
    Uniqueness,
    Transitivity,
    Disjointness,
    DualSpreadExistence,
    DualSpreadUniqueness,
    Evaluation,
}

/// A failed check together with the objects that witness the failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub sample: u64,
    pub residual: f64,
    pub lines: Vec<Line>,
    pub point: Option<ProjPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub witness: String,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_residuals: BTreeMap<String, f64>,
    /// Smallest |ω| over pairs of clearly distinct parallels.
    pub min_disjoint_pairing: f64,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    fn empty(witness: &str, seed: u64, tolerance: f64) -> Self {
        Self {
            schema_version: 1,
            witness: witness.to_string(),
            samples: 0,
            seed,
            tolerance,
            max_residuals: BTreeMap::new(),
            min_disjoint_pairing: f64::INFINITY,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, key: &str, value: f64) {
        let e = self.max_residuals.entry(key.to_string()).or_insert(0.0);
        *e = e.max(value);
    }

    /// Combines two partial reports; associative and independent of order.
    pub fn merge(mut self, other: AuditReport) -> AuditReport {
        self.samples += other.samples;
        for (k, v) in other.max_residuals {
            self.record(&k, v);
        }
        self.min_disjoint_pairing = self.min_disjoint_pairing.min(other.min_disjoint_pairing);
        self.violations.extend(other.violations);
        self.violations.sort_by_key(|v| (v.sample, v.kind));
        self
    }

    pub fn violation_count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Separation above which two parallels count as clearly distinct lines.
const DISTINCT: f64 = 1e-4;

/// Random-sample audit of the parallelism axioms: containment, idempotence, uniqueness,
/// transitivity, pairwise disjointness of distinct parallels and the dual-spread property.
pub fn spread_audit(witness: &dyn Parallelism, samples: usize, seed: u64, tol: &Tolerances) -> AuditReport {
    let name = witness.name().to_string();
    (0..samples as u64)
        .into_par_iter()
        .map(|i| audit_sample(witness, i, seed, tol))
        .reduce(|| AuditReport::empty(&name, seed, tol.decision), AuditReport::merge)
}

fn audit_sample(witness: &dyn Parallelism, index: u64, seed: u64, tol: &Tolerances) -> AuditReport {
    let mut report = AuditReport::empty(witness.name(), seed, tol.decision);
    report.samples = 1;
    let mut rng = sample_rng(seed, index);
    let p = sample_point(&mut rng);
    let l = sample_line_with(&mut rng);
    let other = sample_point(&mut rng);
    let theta1: f64 = rng.random_range(0.0..PI);
    let theta2: f64 = rng.random_range(0.0..PI);
    let covector = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let violation = |report: &mut AuditReport, kind, residual, lines: Vec<Line>, point| {
        report.violations.push(Violation {
            kind,
            sample: index,
            residual,
            lines,
            point,
        })
    };

    let m = match witness.parallel(&p, &l) {
        Ok(m) => m,
        Err(_) => {
            violation(&mut report, ViolationKind::Evaluation, f64::INFINITY, vec![l], Some(p));
            return report;
        }
    };

    let containment = incidence_residual(&p, &m);
    report.record("containment", containment);
    if containment > tol.decision {
        violation(&mut report, ViolationKind::Containment, containment, vec![l, m], Some(p));
    }

    if let Ok(again) = witness.parallel(&p, &m) {
        let r = grassmann_distance(&again, &m);
        report.record("idempotence", r);
        if r > tol.decision {
            violation(&mut report, ViolationKind::Idempotence, r, vec![m, again], Some(p));
        }
    }

    // parallels through further points of M must be M itself
    for theta in [theta1, theta2] {
        let x = m.point_at(theta);
        let Ok(mx) = witness.parallel(&x, &l) else { continue };
        let r = grassmann_distance(&mx, &m);
        report.record("uniqueness", r);
        if r > tol.decision {
            violation(&mut report, ViolationKind::Uniqueness, r, vec![m, mx], Some(x));
            if r > DISTINCT {
                // two distinct members of one class through x
                violation(&mut report, ViolationKind::Disjointness, pairing(m.plucker(), mx.plucker()).abs(), vec![m, mx], Some(x));
            }
        }
    }

    if let Ok(m2) = witness.parallel(&other, &l) {
        if let Ok(via_m) = witness.parallel(&other, &m) {
            let r = grassmann_distance(&via_m, &m2);
            report.record("transitivity", r);
            if r > tol.decision {
                violation(&mut report, ViolationKind::Transitivity, r, vec![m2, via_m], Some(other));
            }
        }
        if grassmann_distance(&m, &m2) > DISTINCT {
            let w = pairing(m.plucker(), m2.plucker()).abs();
            report.min_disjoint_pairing = report.min_disjoint_pairing.min(w);
            if w <= tol.decision {
                let x = intersection_point(&m, &m2);
                violation(&mut report, ViolationKind::Disjointness, w, vec![m, m2], Some(x));
            }
        }
    }

    if let Ok(h) = Hyperplane::new(covector) {
        dual_spread_probe(witness, &l, &h, tol, &mut report, index);
    }
    report
}

/// Searches a line of `h` for the point whose parallel to `l` lies inside `h`, then checks
/// that no other probed parallel lies in `h`.
fn dual_spread_probe(
    witness: &dyn Parallelism,
    l: &Line,
    h: &Hyperplane,
    tol: &Tolerances,
    report: &mut AuditReport,
    index: u64,
) {
    let eta = h.covector();
    // orthonormal basis of the 3-space ker(eta)
    let mut basis: Vec<Vector4<f64>> = Vec::new();
    for i in 0..4 {
        let mut v = Vector4::zeros();
        v[i] = 1.0;
        v -= eta * eta.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 0.3 {
            basis.push(v.normalize());
        }
        if basis.len() == 2 {
            break;
        }
    }
    let probe_line = Line::span(&basis[0], &basis[1]).expect("orthonormal pair");
    let residual_at = |theta: f64| -> Option<(f64, Line)> {
        let x = probe_line.point_at(theta);
        witness.parallel(&x, l).ok().map(|m| (h.line_residual(&m), m))
    };
    const SCAN: usize = 90;
    let scan: Vec<(f64, Option<(f64, Line)>)> = (0..SCAN)
        .map(|k| {
            let theta = PI * k as f64 / SCAN as f64;
            (theta, residual_at(theta))
        })
        .collect();
    let Some((best_theta, _)) = scan
        .iter()
        .filter_map(|(t, r)| r.as_ref().map(|(v, _)| (*t, *v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
    else {
        return;
    };
    let step = PI / SCAN as f64;
    let (mut lo, mut hi) = (best_theta - step, best_theta + step);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |t: f64| residual_at(t).map_or(f64::INFINITY, |(v, _)| v);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    let theta_star = if fc < fd { c } else { d };
    let Some((existence, member)) = residual_at(theta_star) else { return };
    report.record("dual_spread_existence", existence);
    if existence > tol.decision {
        report.violations.push(Violation {
            kind: ViolationKind::DualSpreadExistence,
            sample: index,
            residual: existence,
            lines: vec![*l],
            point: None,
        });
        return;
    }
    for (theta, r) in &scan {
        let Some((value, m)) = r else { continue };
        let gap = (theta - theta_star).rem_euclid(PI);
        if gap.min(PI - gap) < 2.0 * step {
            continue;
        }
        if grassmann_distance(m, &member) <= DISTINCT {
            continue;
        }
        if *value <= tol.decision {
            report.violations.push(Violation {
                kind: ViolationKind::DualSpreadUniqueness,
                sample: index,
                residual: *value,
                lines: vec![member, *m],
                point: None,
            });
        }
    }
}

/// Largest defect `d(Π(p^g, L^g), Π(p, L)^g)` over random maps `x ↦ a·x·b` with unit `a, b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivarianceReport {
    pub witness: String,
    pub maps: usize,
    pub seed: u64,
    pub max_defect: f64,
}

pub fn block_rotation(a: Quaternion, b: Quaternion) -> ProjMap {
    ProjMap::new(a.left_matrix() * b.right_matrix()).expect("orthogonal map")
}

pub fn equivariance_audit(witness: &dyn Parallelism, maps: usize, seed: u64) -> Result<EquivarianceReport> {
    let mut max_defect: f64 = 0.0;
    for i in 0..maps as u64 {
        let mut rng = sample_rng(seed, i);
        let g = block_rotation(Quaternion::random_unit(&mut rng), Quaternion::random_unit(&mut rng));
        for _ in 0..4 {
            let p = sample_point(&mut rng);
            let l = sample_line_with(&mut rng);
            let lhs = witness.parallel(&g.apply_point(&p)?, &g.apply_line(&l)?)?;
            let rhs = g.apply_line(&witness.parallel(&p, &l)?)?;
            max_defect = max_defect.max(grassmann_distance(&lhs, &rhs));
        }
    }
    Ok(EquivarianceReport {
        witness: witness.name().to_string(),
        maps,
        seed,
        max_defect,
    })
}
