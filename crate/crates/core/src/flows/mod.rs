//! The nine normal forms of one-parameter subgroups of PGL(4,ℝ).
//!
//! Each case fixes a real Jordan structure of the generator `A`, normalized up to adding a
//! scalar matrix. `γ_t = exp(tA)` is evaluated in closed form. Entries are assembled in log
//! scale so that large times produce a correctly normalized projective map instead of
//! overflowing.

mod classify;
mod fixed;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, Matrix4, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projective::{matrix_from_rows, ProjMap, PLUCKER_PAIRS};

pub use classify::{classify_generator, ClassificationResult, DEFAULT_CLASSIFY_TOL};
pub use fixed::{fixed_lines, FixedLineSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JordanCase {
    A1,
    A2,
    B1,
    B2,
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl JordanCase {
    pub const ALL: [JordanCase; 9] = [
        JordanCase::A1,
        JordanCase::A2,
        JordanCase::B1,
        JordanCase::B2,
        JordanCase::C1,
        JordanCase::C2,
        JordanCase::C3,
        JordanCase::C4,
        JordanCase::C5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JordanCase::A1 => "a1",
            JordanCase::A2 => "a2",
            JordanCase::B1 => "b1",
            JordanCase::B2 => "b2",
            JordanCase::C1 => "c1",
            JordanCase::C2 => "c2",
            JordanCase::C3 => "c3",
            JordanCase::C4 => "c4",
            JordanCase::C5 => "c5",
        }
    }

    /// Which of `(a, b, c, d)` the case uses.
    pub fn used_params(self) -> [bool; 4] {
        match self {
            JordanCase::A1 | JordanCase::B1 => [true, true, true, false],
            JordanCase::A2 => [true, false, false, false],
            JordanCase::B2 => [true, true, false, false],
            JordanCase::C1 => [false; 4],
            JordanCase::C2 => [false, true, false, false],
            JordanCase::C3 => [true, false, false, false],
            JordanCase::C4 => [false, true, true, false],
            JordanCase::C5 => [false, true, true, true],
        }
    }
}

impl fmt::Display for JordanCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JordanCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        JordanCase::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown case '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FlowParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Period `2π/|a|` of the rotation block, when there is one.
    pub fn t0(&self) -> Option<f64> {
        (self.a != 0.0).then(|| 2.0 * PI / self.a.abs())
    }

    fn get(&self, i: usize) -> f64 {
        [self.a, self.b, self.c, self.d][i]
    }

    /// Parses `a=1,b=0.5` lists; omitted keys are zero.
    pub fn parse_list(s: &str) -> Result<Self> {
        let mut p = FlowParams::default();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("expected key=value, got '{item}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParams(format!("not a number: '{v}'")))?;
            match k.trim() {
                "a" => p.a = v,
                "b" => p.b = v,
                "c" => p.c = v,
                "d" => p.d = v,
                other => return Err(Error::InvalidParams(format!("unknown parameter '{other}'"))),
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Trig {
    One,
    Cos(f64),
    Sin(f64),
}

/// One closed-form entry `coef · t^power · e^{rate·t} · trig(t)`.
#[derive(Debug, Clone, Copy)]
struct Term {
    row: usize,
    col: usize,
    coef: f64,
    power: i32,
    rate: f64,
    trig: Trig,
}

fn term(row: usize, col: usize, coef: f64, power: i32, rate: f64) -> Term {
    Term { row, col, coef, power, rate, trig: Trig::One }
}

/// `coef · t^power · e^{rate t} · R_{freq·t}` placed at `(row, col)`.
fn rotation_terms(out: &mut Vec<Term>, row: usize, col: usize, freq: f64, rate: f64, power: i32, coef: f64) {
    let t = |r, c, sign: f64, trig| Term { row: row + r, col: col + c, coef: coef * sign, power, rate, trig };
    out.push(t(0, 0, 1.0, Trig::Cos(freq)));
    out.push(t(0, 1, -1.0, Trig::Sin(freq)));
    out.push(t(1, 0, 1.0, Trig::Sin(freq)));
    out.push(t(1, 1, 1.0, Trig::Cos(freq)));
}

/// Sums `Σ factor · e^{log}` per row after removing the largest `log`; unit norm result.
fn log_sum(parts: &[(usize, f64, f64)], dim: usize) -> Vec<f64> {
    let shift = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut y = vec![0.0; dim];
    for &(row, lm, f) in parts {
        y[row] += f * (lm - shift).exp();
    }
    let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        y.iter_mut().for_each(|v| *v /= n);
    }
    y
}

/// A one-parameter group `t ↦ exp(tA)` in one of the nine normal forms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneParamFlow {
    case: JordanCase,
    params: FlowParams,
    #[serde(serialize_with = "serialize_rows")]
    generator: Matrix4<f64>,
}

fn serialize_rows<S: serde::Serializer>(m: &Matrix4<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    crate::projective::matrix_rows(m).serialize(s)
}

impl OneParamFlow {
    pub fn new(case: JordanCase, params: FlowParams) -> Result<Self> {
        validate(case, &params)?;
        Ok(Self {
            case,
            params,
            generator: generator_matrix(case, &params),
        })
    }

    /// A representative with unit-scale parameters.
    pub fn canonical(case: JordanCase) -> Self {
        let p = match case {
            JordanCase::A1 => FlowParams::new(1.0, 1.0, 2.0, 0.0),
            JordanCase::A2 => FlowParams::new(1.0, 0.0, 0.0, 0.0),
            JordanCase::B1 => FlowParams::new(1.0, 1.0, 2.0, 0.0),
            JordanCase::B2 => FlowParams::new(1.0, 1.0, 0.0, 0.0),
            JordanCase::C1 => FlowParams::default(),
            JordanCase::C2 => FlowParams::new(0.0, 1.0, 0.0, 0.0),
            JordanCase::C3 => FlowParams::new(1.0, 0.0, 0.0, 0.0),
            JordanCase::C4 => FlowParams::new(0.0, 1.0, 2.0, 0.0),
            JordanCase::C5 => FlowParams::new(0.0, 1.0, 2.0, 3.0),
        };
        Self::new(case, p).expect("canonical parameters are valid")
    }

    pub fn case(&self) -> JordanCase {
        self.case
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn generator(&self) -> &Matrix4<f64> {
        &self.generator
    }

    fn terms(&self) -> Vec<Term> {
        let FlowParams { a, b, c, d } = self.params;
        let mut out = Vec::with_capacity(16);
        match self.case {
            JordanCase::A1 => {
                rotation_terms(&mut out, 0, 0, a, 0.0, 0, 1.0);
                rotation_terms(&mut out, 2, 2, c, b, 0, 1.0);
            }
            JordanCase::A2 => {
                rotation_terms(&mut out, 0, 0, a, 0.0, 0, 1.0);
                rotation_terms(&mut out, 2, 2, a, 0.0, 0, 1.0);
                rotation_terms(&mut out, 0, 2, a, 0.0, 1, 1.0);
            }
            JordanCase::B1 => {
                rotation_terms(&mut out, 0, 0, a, 0.0, 0, 1.0);
                out.push(term(2, 2, 1.0, 0, b));
                out.push(term(3, 3, 1.0, 0, c));
            }
            JordanCase::B2 => {
                rotation_terms(&mut out, 0, 0, a, 0.0, 0, 1.0);
                out.push(term(2, 2, 1.0, 0, b));
                out.push(term(2, 3, 1.0, 1, b));
                out.push(term(3, 3, 1.0, 0, b));
            }
            JordanCase::C1 => {
                let fact = [1.0, 1.0, 2.0, 6.0];
                for i in 0..4 {
                    for j in i..4 {
                        out.push(term(i, j, 1.0 / fact[j - i], (j - i) as i32, 0.0));
                    }
                }
            }
            JordanCase::C2 => {
                for i in 0..3 {
                    for j in i..3 {
                        let k = j - i;
                        out.push(term(i, j, if k == 2 { 0.5 } else { 1.0 }, k as i32, 0.0));
                    }
                }
                out.push(term(3, 3, 1.0, 0, b));
            }
            JordanCase::C3 => {
                out.push(term(0, 0, 1.0, 0, a));
                out.push(term(0, 1, 1.0, 1, a));
                out.push(term(1, 1, 1.0, 0, a));
                out.push(term(2, 2, 1.0, 0, 0.0));
                out.push(term(2, 3, 1.0, 1, 0.0));
                out.push(term(3, 3, 1.0, 0, 0.0));
            }
            JordanCase::C4 => {
                out.push(term(0, 0, 1.0, 0, 0.0));
                out.push(term(0, 1, 1.0, 1, 0.0));
                out.push(term(1, 1, 1.0, 0, 0.0));
                out.push(term(2, 2, 1.0, 0, b));
                out.push(term(3, 3, 1.0, 0, c));
            }
            JordanCase::C5 => {
                out.push(term(0, 0, 1.0, 0, 0.0));
                out.push(term(1, 1, 1.0, 0, b));
                out.push(term(2, 2, 1.0, 0, c));
                out.push(term(3, 3, 1.0, 0, d));
            }
        }
        out
    }

    /// Closed-form `γ_t` as `(M, s)` with `γ_t = e^s · M` and the largest entry scale of
    /// `M` at most one.
    pub fn gamma_scaled(&self, t: f64) -> (Matrix4<f64>, f64) {
        let terms = self.terms();
        let log_mag = |tm: &Term| -> Option<f64> {
            if tm.power > 0 && t == 0.0 {
                return None;
            }
            let poly = if tm.power > 0 { tm.power as f64 * t.abs().ln() } else { 0.0 };
            Some(tm.coef.abs().ln() + poly + tm.rate * t)
        };
        let shift = terms
            .iter()
            .filter_map(log_mag)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut m = Matrix4::zeros();
        for tm in &terms {
            let Some(lm) = log_mag(tm) else { continue };
            let sign = tm.coef.signum() * if tm.power % 2 == 1 && t < 0.0 { -1.0 } else { 1.0 };
            let trig = match tm.trig {
                Trig::One => 1.0,
                Trig::Cos(w) => (w * t).cos(),
                Trig::Sin(w) => (w * t).sin(),
            };
            m[(tm.row, tm.col)] += sign * (lm - shift).exp() * trig;
        }
        (m, shift)
    }

    /// Unscaled closed-form `γ_t`; overflows for large `|t|`.
    pub fn gamma_matrix(&self, t: f64) -> Matrix4<f64> {
        let (m, s) = self.gamma_scaled(t);
        m * s.exp()
    }

    /// `γ_t` as a normalized projective map.
    pub fn gamma(&self, t: f64) -> ProjMap {
        let (m, _) = self.gamma_scaled(t);
        ProjMap::normalized(m).expect("flow matrices have a nonzero diagonal")
    }

    /// `(log |value|, sign · trig)` of every closed-form entry term at time `t`, by position.
    fn entry_terms(&self, t: f64) -> [[Vec<(f64, f64)>; 4]; 4] {
        let mut out: [[Vec<(f64, f64)>; 4]; 4] = Default::default();
        for tm in self.terms() {
            if tm.power > 0 && t == 0.0 {
                continue;
            }
            let poly = if tm.power > 0 { tm.power as f64 * t.abs().ln() } else { 0.0 };
            let odd = tm.power % 2 == 1 && t < 0.0;
            let trig = match tm.trig {
                Trig::One => 1.0,
                Trig::Cos(w) => (w * t).cos(),
                Trig::Sin(w) => (w * t).sin(),
            };
            let factor = tm.coef.signum() * if odd { -1.0 } else { 1.0 } * trig;
            out[tm.row][tm.col].push((tm.coef.abs().ln() + poly + tm.rate * t, factor));
        }
        out
    }

    /// Direction of `γ_t x`, unit norm, evaluated term by term in log scale so that
    /// components of `x` far below the dominant one still contribute. Zero only for `x = 0`.
    pub fn image_direction(&self, x: &Vector4<f64>, t: f64) -> Vector4<f64> {
        let entries = self.entry_terms(t);
        let mut parts = Vec::with_capacity(16);
        for (row, cols) in entries.iter().enumerate() {
            for (col, terms) in cols.iter().enumerate() {
                if x[col] == 0.0 {
                    continue;
                }
                for &(lm, f) in terms {
                    parts.push((row, lm + x[col].abs().ln(), f * x[col].signum()));
                }
            }
        }
        Vector4::from_column_slice(log_sum(&parts, 4).as_slice())
    }

    /// Direction of `∧²γ_t · p` for a Plücker vector `p`, in the same log-scale arithmetic.
    /// Lines are mapped this way without ever forming an ill-conditioned image frame.
    pub fn plucker_image(&self, p: &Vector6<f64>, t: f64) -> Vector6<f64> {
        let g = self.entry_terms(t);
        let mut parts = Vec::new();
        for (r, &(i, j)) in PLUCKER_PAIRS.iter().enumerate() {
            for (c, &(k, l)) in PLUCKER_PAIRS.iter().enumerate() {
                if p[c] == 0.0 {
                    continue;
                }
                let (pl, ps) = (p[c].abs().ln(), p[c].signum());
                for (a, b, sign) in [((i, k), (j, l), 1.0), ((i, l), (j, k), -1.0)] {
                    for &(la, fa) in &g[a.0][a.1] {
                        for &(lb, fb) in &g[b.0][b.1] {
                            parts.push((r, la + lb + pl, sign * fa * fb * ps));
                        }
                    }
                }
            }
        }
        Vector6::from_column_slice(log_sum(&parts, 6).as_slice())
    }

    /// Eigenvalues of the generator, conjugate pairs adjacent.
    pub fn eigenvalues(&self) -> [Complex<f64>; 4] {
        let FlowParams { a, b, c, d } = self.params;
        let z = |re: f64, im: f64| Complex::new(re, im);
        match self.case {
            JordanCase::A1 => [z(0.0, a), z(0.0, -a), z(b, c), z(b, -c)],
            JordanCase::A2 => [z(0.0, a), z(0.0, -a), z(0.0, a), z(0.0, -a)],
            JordanCase::B1 => [z(0.0, a), z(0.0, -a), z(b, 0.0), z(c, 0.0)],
            JordanCase::B2 => [z(0.0, a), z(0.0, -a), z(b, 0.0), z(b, 0.0)],
            JordanCase::C1 => [z(0.0, 0.0); 4],
            JordanCase::C2 => [z(0.0, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(b, 0.0)],
            JordanCase::C3 => [z(a, 0.0), z(a, 0.0), z(0.0, 0.0), z(0.0, 0.0)],
            JordanCase::C4 => [z(0.0, 0.0), z(0.0, 0.0), z(b, 0.0), z(c, 0.0)],
            JordanCase::C5 => [z(0.0, 0.0), z(b, 0.0), z(c, 0.0), z(d, 0.0)],
        }
    }
}

fn validate(case: JordanCase, p: &FlowParams) -> Result<()> {
    let used = case.used_params();
    for (i, name) in ["a", "b", "c", "d"].iter().enumerate() {
        let v = p.get(i);
        if !v.is_finite() {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        if !used[i] && v != 0.0 {
            return Err(Error::InvalidParams(format!("case {case} does not use parameter {name}")));
        }
    }
    match case {
        JordanCase::A1 if p.a == 0.0 || p.c == 0.0 => {
            Err(Error::InvalidParams("case a1 needs a ≠ 0 and c ≠ 0".into()))
        }
        JordanCase::A2 | JordanCase::B1 | JordanCase::B2 if p.a == 0.0 => {
            Err(Error::InvalidParams(format!("case {case} needs a ≠ 0")))
        }
        JordanCase::C5 if p.b == 0.0 && p.c == 0.0 && p.d == 0.0 => Err(Error::NotClassifiable),
        _ => Ok(()),
    }
}

fn generator_matrix(case: JordanCase, p: &FlowParams) -> Matrix4<f64> {
    let FlowParams { a, b, c, d } = *p;
    let rows = match case {
        JordanCase::A1 => [[0.0, -a, 0.0, 0.0], [a, 0.0, 0.0, 0.0], [0.0, 0.0, b, -c], [0.0, 0.0, c, b]],
        JordanCase::A2 => [[0.0, -a, 1.0, 0.0], [a, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, -a], [0.0, 0.0, a, 0.0]],
        JordanCase::B1 => [[0.0, -a, 0.0, 0.0], [a, 0.0, 0.0, 0.0], [0.0, 0.0, b, 0.0], [0.0, 0.0, 0.0, c]],
        JordanCase::B2 => [[0.0, -a, 0.0, 0.0], [a, 0.0, 0.0, 0.0], [0.0, 0.0, b, 1.0], [0.0, 0.0, 0.0, b]],
        JordanCase::C1 => [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0; 4]],
        JordanCase::C2 => [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0; 4], [0.0, 0.0, 0.0, b]],
        JordanCase::C3 => [[a, 1.0, 0.0, 0.0], [0.0, a, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0; 4]],
        JordanCase::C4 => [[0.0, 1.0, 0.0, 0.0], [0.0; 4], [0.0, 0.0, b, 0.0], [0.0, 0.0, 0.0, c]],
        JordanCase::C5 => [[0.0; 4], [0.0, b, 0.0, 0.0], [0.0, 0.0, c, 0.0], [0.0, 0.0, 0.0, d]],
    };
    matrix_from_rows(&rows)
}

/// Outcome of a continued-fraction search for `p/q ≈ x` with `q ≤ max_denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RationalReconstruction {
    pub value: f64,
    pub numerator: i64,
    pub denominator: u64,
    /// `|x − p/q|` for the last convergent examined.
    pub error: f64,
    pub max_denominator: u64,
    pub rational: bool,
}

pub const DENOMINATOR_CUTOFF: u64 = 1_000_000;
/// Relative agreement required between `x` and a convergent.
pub const RATIONAL_TOL: f64 = 1e-13;

pub fn rational_reconstruction(x: f64, max_denominator: u64) -> RationalReconstruction {
    let (mut h1, mut h2) = (1i64, 0i64);
    let (mut k1, mut k2) = (0u64, 1u64);
    let mut y = x;
    let tol = RATIONAL_TOL * x.abs().max(1.0);
    let mut best = RationalReconstruction {
        value: x,
        numerator: 0,
        denominator: 1,
        error: x.abs(),
        max_denominator,
        rational: false,
    };
    for _ in 0..64 {
        let a = y.floor();
        if a.abs() > 1e15 {
            break;
        }
        let h = a as i64 * h1 + h2;
        let k = (a as i64).unsigned_abs() * k1 + k2;
        if k > max_denominator {
            break;
        }
        best.numerator = h;
        best.denominator = k;
        best.error = (x - h as f64 / k as f64).abs();
        if best.error <= tol {
            best.rational = true;
            break;
        }
        let frac = y - a;
        if frac == 0.0 {
            break;
        }
        (h2, h1) = (h1, h);
        (k2, k1) = (k1, k);
        y = 1.0 / frac;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Compactness {
    CompactClosure {
        reconstruction: Option<RationalReconstruction>,
    },
    /// Dense winding in a 2-torus; the closure is that torus.
    NonClosed {
        closure: TorusRank,
        reconstruction: RationalReconstruction,
    },
    ClosedNonCompact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TorusRank {
    TorusRank2,
}

pub fn compactness_status(flow: &OneParamFlow) -> Compactness {
    let p = flow.params();
    match flow.case() {
        JordanCase::A1 if p.b == 0.0 => {
            let r = rational_reconstruction(p.c / p.a, DENOMINATOR_CUTOFF);
            if r.rational {
                Compactness::CompactClosure { reconstruction: Some(r) }
            } else {
                Compactness::NonClosed {
                    closure: TorusRank::TorusRank2,
                    reconstruction: r,
                }
            }
        }
        JordanCase::B1 if p.b == 0.0 && p.c == 0.0 => Compactness::CompactClosure { reconstruction: None },
        _ => Compactness::ClosedNonCompact,
    }
}

/// A flow given either by case and parameters or by a raw generator matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlowSpec {
    Case {
        case: JordanCase,
        #[serde(default)]
        params: FlowParams,
    },
    Matrix {
        matrix: [[f64; 4]; 4],
    },
}

impl FlowSpec {
    /// The normal-form flow; raw matrices are classified first.
    pub fn resolve(&self, tol: f64) -> Result<(OneParamFlow, Option<ClassificationResult>)> {
        match self {
            FlowSpec::Case { case, params } => Ok((OneParamFlow::new(*case, *params)?, None)),
            FlowSpec::Matrix { matrix } => {
                let c = classify_generator(&matrix_from_rows(matrix), tol)?;
                Ok((OneParamFlow::new(c.case, c.params)?, Some(c)))
            }
        }
    }
}
