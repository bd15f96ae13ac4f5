//! Points, hyperplanes, lines and projective maps of real projective 3-space.
//!
//! Points and hyperplanes are unit 4-vectors with a canonical sign. A [`Line`] carries an
//! orthonormal 2-frame together with its Plücker vector, ordered as
//! `(p01, p02, p03, p23, p31, p12)` where `pij = u_i v_j - u_j v_i` for a spanning pair
//! `(u, v)` (indices are 0-based). With this ordering the Klein quadric reads
//! `p01·p23 + p02·p31 + p03·p12 = 0` and the symplectic pairing of two lines is
//! `ω(p, q) = p01·q23 + p02·q31 + p03·q12 + p23·q01 + p31·q02 + p12·q03`.
//!
//! Maps act on column vectors: a point `⟨x⟩` goes to `⟨M x⟩`. [`ProjMap::then`] composes
//! in application order, so `g.then(&h)` applies `g` first and has matrix `H·G`.

use nalgebra::{Matrix4, Matrix6, Vector4, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index pairs of the six Plücker coordinates, in storage order.
pub const PLUCKER_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (2, 3), (3, 1), (1, 2)];

/// Largest condition number accepted for a spanning pair of a line.
pub const MAX_FRAME_CONDITION: f64 = 1e12;

/// Numerical tolerances shared by the geometry routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Storage noise allowed in representation invariants.
    pub repr: f64,
    /// Bound on derived residuals (incidence, quadric).
    pub residual: f64,
    /// Threshold for meet/equal decisions.
    pub decision: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            repr: 1e-12,
            residual: 1e-10,
            decision: 1e-8,
        }
    }
}

/// Flips the sign so that the first entry of largest magnitude is positive.
fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn unit_canonical(v: Vector4<f64>) -> Result<Vector4<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scale = v.amax();
    if scale == 0.0 {
        return Err(Error::ZeroVector);
    }
    // pre-scaling keeps tiny or huge inputs away from under/overflow in the norm
    let mut u = v / scale;
    u /= u.norm();
    canonicalize_sign(u.as_mut_slice());
    Ok(u)
}

/// A point of PG(3,ℝ): a 1-dimensional subspace of ℝ⁴.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ProjPoint {
    coords: Vector4<f64>,
}

impl ProjPoint {
    pub fn new(v: Vector4<f64>) -> Result<Self> {
        Ok(Self {
            coords: unit_canonical(v)?,
        })
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        Self::new(Vector4::from(a))
    }

    /// The coordinate point `⟨e_{i+1}⟩` (0-based index).
    pub fn basis(i: usize) -> Self {
        let mut v = Vector4::zeros();
        v[i] = 1.0;
        Self { coords: v }
    }

    pub fn coords(&self) -> &Vector4<f64> {
        &self.coords
    }

    /// Sine of the angle between the two representing vectors.
    pub fn chordal_distance(&self, other: &ProjPoint) -> f64 {
        let c = self.coords.dot(&other.coords).abs().min(1.0);
        // the difference form is accurate for nearly equal points
        let diff = (self.coords - other.coords * self.coords.dot(&other.coords).signum()).norm();
        if diff < 0.5 {
            // sin θ = |a - b| * sqrt(1 - |a - b|²/4) for unit a, b at angle θ
            diff * (1.0 - diff * diff / 4.0).sqrt()
        } else {
            (1.0 - c * c).max(0.0).sqrt()
        }
    }
}

impl TryFrom<[f64; 4]> for ProjPoint {
    type Error = Error;
    fn try_from(a: [f64; 4]) -> Result<Self> {
        Self::from_array(a)
    }
}

impl From<ProjPoint> for [f64; 4] {
    fn from(p: ProjPoint) -> Self {
        p.coords.into()
    }
}

/// A plane of PG(3,ℝ), stored as the kernel of a unit covector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Hyperplane {
    covector: Vector4<f64>,
}

impl Hyperplane {
    pub fn new(covector: Vector4<f64>) -> Result<Self> {
        Ok(Self {
            covector: unit_canonical(covector)?,
        })
    }

    /// The coordinate hyperplane `x_{i+1} = 0` (0-based index).
    pub fn coordinate(i: usize) -> Self {
        let mut v = Vector4::zeros();
        v[i] = 1.0;
        Self { covector: v }
    }

    pub fn covector(&self) -> &Vector4<f64> {
        &self.covector
    }

    pub fn point_residual(&self, p: &ProjPoint) -> f64 {
        self.covector.dot(p.coords()).abs()
    }

    /// Largest distance of the line's frame vectors from the hyperplane.
    pub fn line_residual(&self, l: &Line) -> f64 {
        let [f, g] = l.frame();
        self.covector.dot(f).hypot(self.covector.dot(g))
    }

    /// The point where `l` crosses this hyperplane, or `None` if `l` lies in it.
    pub fn meet_line(&self, l: &Line, tol: f64) -> Option<ProjPoint> {
        let [f, g] = l.frame();
        let a = self.covector.dot(g);
        let b = -self.covector.dot(f);
        if a.hypot(b) <= tol {
            return None;
        }
        ProjPoint::new(f * a + g * b).ok()
    }
}

impl TryFrom<[f64; 4]> for Hyperplane {
    type Error = Error;
    fn try_from(a: [f64; 4]) -> Result<Self> {
        Self::new(Vector4::from(a))
    }
}

impl From<Hyperplane> for [f64; 4] {
    fn from(h: Hyperplane) -> Self {
        h.covector.into()
    }
}

/// Raw Plücker coordinates of `u ∧ v`.
pub fn plucker_raw(u: &Vector4<f64>, v: &Vector4<f64>) -> Vector6<f64> {
    Vector6::from_fn(|k, _| {
        let (i, j) = PLUCKER_PAIRS[k];
        u[i] * v[j] - u[j] * v[i]
    })
}

/// Value of the Klein quadric form `p01·p23 + p02·p31 + p03·p12`.
pub fn klein_form(p: &Vector6<f64>) -> f64 {
    p[0] * p[3] + p[1] * p[4] + p[2] * p[5]
}

/// Symplectic pairing of two Plücker vectors; vanishes iff the lines meet.
pub fn pairing(p: &Vector6<f64>, q: &Vector6<f64>) -> f64 {
    p[0] * q[3] + p[1] * q[4] + p[2] * q[5] + p[3] * q[0] + p[4] * q[1] + p[5] * q[2]
}

/// Orthonormalizes a spanning pair, larger vector first, and returns the
/// 2-norm condition number of the original pair.
fn orthonormal_pair(u: &Vector4<f64>, v: &Vector4<f64>) -> Result<([Vector4<f64>; 2], f64)> {
    if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (a, b) = if u.norm() >= v.norm() { (u, v) } else { (v, u) };
    let r11 = a.norm();
    if r11 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let q1 = a / r11;
    let mut w = *b;
    let mut r12 = 0.0;
    for _ in 0..2 {
        let c = q1.dot(&w);
        r12 += c;
        w -= q1 * c;
    }
    let r22 = w.norm();
    if r22 == 0.0 {
        return Err(Error::ConditioningLoss {
            condition: f64::INFINITY,
        });
    }
    let q2 = w / r22;
    // singular values of the triangular factor [[r11, r12], [0, r22]]
    let s = r11 * r11 + r12 * r12 + r22 * r22;
    let d = r11 * r22;
    let smax2 = 0.5 * (s + (s * s - 4.0 * d * d).max(0.0).sqrt());
    let condition = smax2 / d;
    Ok(([q1, q2], condition))
}

/// A line of PG(3,ℝ): a 2-dimensional subspace of ℝ⁴.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LineRepr", into = "LineRepr")]
pub struct Line {
    frame: [Vector4<f64>; 2],
    plucker: Vector6<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LineRepr {
    Full {
        frame: [[f64; 4]; 2],
        plucker: [f64; 6],
    },
    Frame {
        frame: [[f64; 4]; 2],
    },
    Plucker {
        plucker: [f64; 6],
    },
    Span([[f64; 4]; 2]),
}

impl TryFrom<LineRepr> for Line {
    type Error = Error;
    fn try_from(r: LineRepr) -> Result<Self> {
        match r {
            LineRepr::Full { frame, .. } | LineRepr::Frame { frame } | LineRepr::Span(frame) => {
                Line::span(&Vector4::from(frame[0]), &Vector4::from(frame[1]))
            }
            LineRepr::Plucker { plucker } => Line::plucker_lift(&Vector6::from(plucker)),
        }
    }
}

impl From<Line> for LineRepr {
    fn from(l: Line) -> Self {
        LineRepr::Full {
            frame: [l.frame[0].into(), l.frame[1].into()],
            plucker: l.plucker.into(),
        }
    }
}

impl Line {
    /// The line spanned by two vectors.
    pub fn span(u: &Vector4<f64>, v: &Vector4<f64>) -> Result<Self> {
        let (frame, condition) = orthonormal_pair(u, v)?;
        if !(condition <= MAX_FRAME_CONDITION) {
            return Err(Error::ConditioningLoss { condition });
        }
        Ok(Self::from_orthonormal(frame))
    }

    fn from_orthonormal(frame: [Vector4<f64>; 2]) -> Self {
        let mut p = plucker_raw(&frame[0], &frame[1]);
        p /= p.norm();
        canonicalize_sign(p.as_mut_slice());
        Self { frame, plucker: p }
    }

    /// The coordinate line `⟨e_{i+1}, e_{j+1}⟩` (0-based indices).
    pub fn coordinate(i: usize, j: usize) -> Self {
        Self::span(&ProjPoint::basis(i).coords, &ProjPoint::basis(j).coords)
            .expect("distinct coordinate axes span a line")
    }

    /// Reconstructs a line from a (possibly unnormalized) Plücker 6-vector.
    pub fn plucker_lift(v: &Vector6<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let p = v / n;
        let residual = klein_form(&p).abs();
        if residual > 1e-8 {
            return Err(Error::OffQuadric { residual });
        }
        // for p = u∧v the skew matrix S = u vᵀ - v uᵀ maps every vector into span(u, v), and
        // columns i, j of S are independent exactly when p_ij ≠ 0
        let mut s = Matrix4::zeros();
        for (k, &(i, j)) in PLUCKER_PAIRS.iter().enumerate() {
            s[(i, j)] = p[k];
            s[(j, i)] = -p[k];
        }
        let k = p.iamax();
        let (i, j) = PLUCKER_PAIRS[k];
        let (frame, _) = orthonormal_pair(&s.column(i).into_owned(), &s.column(j).into_owned())?;
        Ok(Self::from_orthonormal(frame))
    }

    pub fn frame(&self) -> &[Vector4<f64>; 2] {
        &self.frame
    }

    /// Unit, sign-canonical Plücker vector.
    pub fn plucker(&self) -> &Vector6<f64> {
        &self.plucker
    }

    pub fn klein_residual(&self) -> f64 {
        klein_form(&self.plucker).abs()
    }

    /// Orthogonal projector onto the underlying 2-space.
    pub fn projector(&self) -> Matrix4<f64> {
        let [f, g] = &self.frame;
        f * f.transpose() + g * g.transpose()
    }

    /// A point of the line, `cos θ · f₀ + sin θ · f₁`.
    pub fn point_at(&self, theta: f64) -> ProjPoint {
        let v = self.frame[0] * theta.cos() + self.frame[1] * theta.sin();
        ProjPoint { coords: unit_canonical(v).expect("unit combination of an orthonormal frame") }
    }

    /// Points of the line at `n` equally spaced angles in `[0, π)`.
    pub fn points(&self, n: usize) -> Vec<ProjPoint> {
        (0..n)
            .map(|k| self.point_at(std::f64::consts::PI * k as f64 / n as f64))
            .collect()
    }
}

/// The line `p ∨ q` through two distinct points.
pub fn join_points(p: &ProjPoint, q: &ProjPoint) -> Result<Line> {
    let distance = p.chordal_distance(q);
    if distance <= 1e-9 {
        return Err(Error::DegenerateJoin { distance });
    }
    Line::span(p.coords(), q.coords())
}

/// Projector metric `‖P_L − P_M‖_F / √2`, with values in `[0, √2]`.
pub fn grassmann_distance(l: &Line, m: &Line) -> f64 {
    (l.projector() - m.projector()).norm() / std::f64::consts::SQRT_2
}

/// Distance of the point's unit representative from the line's 2-space.
pub fn incidence_residual(p: &ProjPoint, l: &Line) -> f64 {
    let x = p.coords();
    let [f, g] = l.frame();
    (x - f * f.dot(x) - g * g.dot(x)).norm()
}

/// Relative position of two lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "point")]
pub enum Intersection {
    Equal,
    Meet(ProjPoint),
    Disjoint,
}

/// The point spanned by both lines; meaningful only when they meet.
pub fn intersection_point(l: &Line, m: &Line) -> ProjPoint {
    let [f1, f2] = l.frame();
    let [g1, g2] = m.frame();
    let stacked = Matrix4::from_columns(&[*f1, *f2, *g1, *g2]);
    let svd = stacked.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let c = vt.row(3);
    let x = f1 * c[0] + f2 * c[1];
    let y = -(g1 * c[2] + g2 * c[3]);
    let v = if x.dot(&y) >= 0.0 { x + y } else { x - y };
    ProjPoint::new(v).unwrap_or(ProjPoint { coords: unit_canonical(x).unwrap_or(*f1) })
}

/// Classifies two lines by the Grassmann distance and the Plücker pairing.
pub fn lines_meet(l: &Line, m: &Line, tol: &Tolerances) -> Intersection {
    if grassmann_distance(l, m) <= tol.decision {
        return Intersection::Equal;
    }
    if pairing(l.plucker(), m.plucker()).abs() > tol.decision {
        return Intersection::Disjoint;
    }
    Intersection::Meet(intersection_point(l, m))
}

/// An invertible projective map, represented by a unit-Frobenius matrix with canonical sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]")]
pub struct ProjMap {
    matrix: Matrix4<f64>,
}

impl ProjMap {
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let g = Self::normalized(m)?;
        if g.matrix.determinant() == 0.0 {
            return Err(Error::Singular);
        }
        Ok(g)
    }

    /// Normalizes without checking invertibility. Flow evaluations at large times can
    /// underflow some entries to zero; the map is still the limit of invertible ones.
    pub(crate) fn normalized(m: Matrix4<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = m.amax();
        if scale == 0.0 {
            return Err(Error::Singular);
        }
        let mut m = m / scale;
        m /= m.norm();
        let mut lead = (0, 0);
        for i in 0..4 {
            for j in 0..4 {
                if m[(i, j)].abs() > m[lead].abs() {
                    lead = (i, j);
                }
            }
        }
        if m[lead] < 0.0 {
            m = -m;
        }
        Ok(Self { matrix: m })
    }

    pub fn identity() -> Self {
        Self::new(Matrix4::identity()).expect("identity is invertible")
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Result<Self> {
        Self::new(matrix_from_rows(&rows))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    /// `self` followed by `next`; the product matrix is `next · self`.
    pub fn then(&self, next: &ProjMap) -> Result<ProjMap> {
        Self::normalized(next.matrix * self.matrix)
    }

    /// Frobenius distance of the unit representatives, minimized over the sign.
    pub fn distance(&self, other: &ProjMap) -> f64 {
        (self.matrix - other.matrix).norm().min((self.matrix + other.matrix).norm())
    }

    pub fn inverse(&self) -> Result<ProjMap> {
        let inv = self.matrix.try_inverse().ok_or(Error::Singular)?;
        Self::new(inv)
    }

    pub fn apply_point(&self, p: &ProjPoint) -> Result<ProjPoint> {
        ProjPoint::new(self.matrix * p.coords())
    }

    pub fn apply_vector(&self, v: &Vector4<f64>) -> Vector4<f64> {
        self.matrix * v
    }

    /// Image line, spanned by the images of the frame vectors.
    pub fn apply_line(&self, l: &Line) -> Result<Line> {
        let [f, g] = l.frame();
        Line::span(&(self.matrix * f), &(self.matrix * g))
    }

    /// Induced action on Plücker vectors (second exterior power).
    pub fn exterior_square(&self) -> Matrix6<f64> {
        exterior_square(&self.matrix)
    }
}

impl TryFrom<[[f64; 4]; 4]> for ProjMap {
    type Error = Error;
    fn try_from(rows: [[f64; 4]; 4]) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<ProjMap> for [[f64; 4]; 4] {
    fn from(g: ProjMap) -> Self {
        matrix_rows(&g.matrix)
    }
}

/// Image of a line under `g`; alias of [`ProjMap::apply_line`].
pub fn apply_to_line(g: &ProjMap, l: &Line) -> Result<Line> {
    g.apply_line(l)
}

pub fn matrix_from_rows(rows: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| rows[i][j])
}

pub fn matrix_rows(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    let mut rows = [[0.0; 4]; 4];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = m[(i, j)];
        }
    }
    rows
}

fn basis_vector(i: usize) -> Vector4<f64> {
    let mut v = Vector4::zeros();
    v[i] = 1.0;
    v
}

/// Matrix of `u∧v ↦ Mu ∧ Mv` in Plücker coordinates.
pub fn exterior_square(m: &Matrix4<f64>) -> Matrix6<f64> {
    let mut out = Matrix6::zeros();
    for (k, &(i, j)) in PLUCKER_PAIRS.iter().enumerate() {
        let col = plucker_raw(&(m * basis_vector(i)), &(m * basis_vector(j)));
        out.set_column(k, &col);
    }
    out
}

/// Matrix of the derivation `u∧v ↦ Au ∧ v + u ∧ Av` in Plücker coordinates.
pub fn exterior_derivation(a: &Matrix4<f64>) -> Matrix6<f64> {
    let mut out = Matrix6::zeros();
    for (k, &(i, j)) in PLUCKER_PAIRS.iter().enumerate() {
        let (ei, ej) = (basis_vector(i), basis_vector(j));
        let col = plucker_raw(&(a * ei), &ej) + plucker_raw(&ei, &(a * ej));
        out.set_column(k, &col);
    }
    out
}

/// Random point, uniform on the sphere of representatives.
pub fn sample_point<R: Rng + ?Sized>(rng: &mut R) -> ProjPoint {
    loop {
        let v = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(p) = ProjPoint::new(v) {
            return p;
        }
    }
}

/// Random line from an orthonormalized 4×2 Gaussian matrix; rotation invariant in law.
pub fn sample_line_with<R: Rng + ?Sized>(rng: &mut R) -> Line {
    loop {
        let u = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let v = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(l) = Line::span(&u, &v) {
            return l;
        }
    }
}

pub fn sample_line(seed: u64) -> Line {
    sample_line_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Independent random stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
