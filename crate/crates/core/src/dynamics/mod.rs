//! Orbit limits of lines and points under one-parameter groups, and replays of the limit
//! arguments that exclude each normal form from the automorphism group of a topological
//! parallelism.

mod plane;
mod replay;

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix4x3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{JordanCase, OneParamFlow};
use crate::projective::{grassmann_distance, Line, ProjPoint};

pub use plane::{pencil_census, PencilCensus, PlaneLimit};
pub use replay::{
    replay_a1, replay_c1, replay_c3, replay_c4, replay_c5, replay_discrete, replay_lemma_c1, Certificate, Check, LimitObject,
    CaseReplayReport, Incidence, SampleVerdict, REPORT_SCHEMA_VERSION,
};

/// Orbits whose successive distances rise by less than this are still non-increasing.
const MONOTONE_SLACK: f64 = 1e-12;
/// How often a failing step may be halved.
const MAX_SPLIT_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Times `t0 · ratio^k`, `k = 0..steps`.
    Geometric { t0: f64, ratio: f64, steps: usize },
    /// Times `n · t0`, `n = 1..=steps`.
    Discrete { t0: f64, steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    #[serde(default)]
    pub direction: Direction,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::geometric(0.5, 1.3, 40)
    }
}

impl Schedule {
    pub fn geometric(t0: f64, ratio: f64, steps: usize) -> Self {
        Self { kind: ScheduleKind::Geometric { t0, ratio, steps }, direction: Direction::Forward }
    }

    pub fn discrete(t0: f64, steps: usize) -> Self {
        Self { kind: ScheduleKind::Discrete { t0, steps }, direction: Direction::Forward }
    }

    /// Powers of `γ_{2π/a}`, 200 of them.
    pub fn default_discrete(flow: &OneParamFlow) -> Result<Self> {
        let t0 = flow
            .params()
            .t0()
            .ok_or_else(|| Error::Precondition("discrete schedule needs a ≠ 0".into()))?;
        Ok(Self::discrete(t0, 200))
    }

    pub fn backward(mut self) -> Self {
        self.direction = Direction::Backward;
        self
    }

    pub fn steps(&self) -> usize {
        match self.kind {
            ScheduleKind::Geometric { steps, .. } | ScheduleKind::Discrete { steps, .. } => steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, steps) = match self.kind {
            ScheduleKind::Geometric { t0, ratio, steps } => {
                if !(ratio > 1.0 && ratio.is_finite()) {
                    return Err(Error::Precondition(format!("ratio must exceed 1, got {ratio}")));
                }
                (t0, steps)
            }
            ScheduleKind::Discrete { t0, steps } => (t0, steps),
        };
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::Precondition(format!("t0 must be positive, got {t0}")));
        }
        if steps < 2 {
            return Err(Error::Precondition(format!("need at least 2 steps, got {steps}")));
        }
        Ok(())
    }

    /// Signed times of the schedule.
    pub fn times(&self) -> Vec<f64> {
        let sign = match self.direction {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        };
        match self.kind {
            ScheduleKind::Geometric { t0, ratio, steps } => {
                (0..steps).map(|k| sign * t0 * ratio.powi(k as i32)).collect()
            }
            ScheduleKind::Discrete { t0, steps } => (1..=steps).map(|n| sign * n as f64 * t0).collect(),
        }
    }
}

/// Something a flow moves around: a point or a line.
pub trait OrbitState: Clone + Sized {
    /// The image under `γ_t`, evaluated directly from `self`.
    fn image(&self, flow: &OneParamFlow, t: f64) -> Result<Self>;
    fn distance(&self, other: &Self) -> f64;
}

impl OrbitState for ProjPoint {
    fn image(&self, flow: &OneParamFlow, t: f64) -> Result<Self> {
        ProjPoint::new(flow.image_direction(self.coords(), t))
    }

    fn distance(&self, other: &Self) -> f64 {
        self.chordal_distance(other)
    }
}

impl OrbitState for Line {
    /// Maps the Plücker vector, so that components the flow contracts are kept to full
    /// relative precision; lines meeting a repelling subspace stay on it.
    fn image(&self, flow: &OneParamFlow, t: f64) -> Result<Self> {
        Line::plucker_lift(&flow.plucker_image(self.plucker(), t))
    }

    fn distance(&self, other: &Self) -> f64 {
        grassmann_distance(self, other)
    }
}

/// States at every schedule time.
pub fn orbit<S: OrbitState>(flow: &OneParamFlow, start: &S, schedule: &Schedule) -> Result<Vec<(f64, S)>> {
    schedule.validate()?;
    schedule.times().into_iter().map(|t| Ok((t, start.image(flow, t)?))).collect()
}

fn advance_line(flow: &OneParamFlow, l: &Line, dt: f64, depth: u32) -> Result<Line> {
    match flow.gamma(dt).apply_line(l) {
        Ok(m) => Ok(m),
        Err(e @ (Error::ConditioningLoss { .. } | Error::ZeroVector | Error::DegenerateJoin { .. })) => {
            if depth >= MAX_SPLIT_DEPTH {
                return Err(e);
            }
            let half = advance_line(flow, l, 0.5 * dt, depth + 1)?;
            advance_line(flow, &half, 0.5 * dt, depth + 1)
        }
        Err(e) => Err(e),
    }
}

/// Line orbit by stepping: `γ_{t_k − t_{k−1}}` is applied to the re-orthonormalized frame of
/// the previous image, and steps whose image frame degenerates are halved. Agrees with
/// [`orbit`] while the orbit is well conditioned; rounding in directions the flow repels is
/// amplified, so lines meeting a repelling subspace drift off it.
pub fn stepped_line_orbit(flow: &OneParamFlow, start: &Line, schedule: &Schedule) -> Result<Vec<(f64, Line)>> {
    schedule.validate()?;
    let mut out = Vec::with_capacity(schedule.steps());
    let mut t_prev = 0.0;
    let mut cur = *start;
    for t in schedule.times() {
        cur = advance_line(flow, &cur, t - t_prev, 0)?;
        t_prev = t;
        out.push((t, cur));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitLimitReport<S> {
    pub limit: Option<S>,
    pub converged: bool,
    /// `(t, distance to the last orbit state)`.
    pub trace: Vec<(f64, f64)>,
    pub final_residuals: BTreeMap<String, f64>,
}

impl<S> OrbitLimitReport<S> {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("t,distance\n");
        for (t, d) in &self.trace {
            s.push_str(&format!("{t:?},{d:?}\n"));
        }
        s
    }
}

pub fn orbit_limit<S: OrbitState>(
    flow: &OneParamFlow,
    start: &S,
    schedule: &Schedule,
    tol: f64,
) -> Result<OrbitLimitReport<S>> {
    let states = orbit(flow, start, schedule)?;
    let last = states.last().expect("validated schedule is nonempty").1.clone();
    let trace: Vec<(f64, f64)> = states.iter().map(|(t, s)| (*t, s.distance(&last))).collect();

    let tail: Vec<&S> = states.iter().rev().take(3).map(|(_, s)| s).collect();
    let mut spread: f64 = 0.0;
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            spread = spread.max(tail[i].distance(tail[j]));
        }
    }
    let quartile = &trace[trace.len() - (trace.len() / 4).max(2)..];
    let increase = quartile.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    let converged = spread <= tol && increase <= MONOTONE_SLACK;

    let mut final_residuals = BTreeMap::new();
    final_residuals.insert("tail_spread".to_string(), spread);
    final_residuals.insert("tail_max_increase".to_string(), increase.max(0.0));
    Ok(OrbitLimitReport { limit: converged.then_some(last), converged, trace, final_residuals })
}

pub fn line_orbit_limit(flow: &OneParamFlow, l: &Line, schedule: &Schedule, tol: f64) -> Result<OrbitLimitReport<Line>> {
    orbit_limit(flow, l, schedule, tol)
}

pub fn point_orbit_limit(
    flow: &OneParamFlow,
    p: &ProjPoint,
    schedule: &Schedule,
    tol: f64,
) -> Result<OrbitLimitReport<ProjPoint>> {
    orbit_limit(flow, p, schedule, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct AccumulationCluster {
    pub line: Line,
    /// Fraction of the orbit tail that fell into this cluster.
    pub weight: f64,
}

/// Leader clustering of the second half of the orbit.
pub fn accumulation_lines(
    flow: &OneParamFlow,
    l: &Line,
    schedule: &Schedule,
    cluster_tol: f64,
) -> Result<Vec<AccumulationCluster>> {
    if schedule.steps() < 50 {
        return Err(Error::Precondition(format!(
            "accumulation needs at least 50 steps, got {}",
            schedule.steps()
        )));
    }
    let states = orbit(flow, l, schedule)?;
    let tail = &states[states.len() / 2..];
    let mut reps: Vec<(Line, usize)> = Vec::new();
    for (_, m) in tail {
        match reps.iter_mut().find(|(r, _)| grassmann_distance(r, m) <= cluster_tol) {
            Some(entry) => entry.1 += 1,
            None => reps.push((*m, 1)),
        }
    }
    let n = tail.len() as f64;
    Ok(reps.into_iter().map(|(line, k)| AccumulationCluster { line, weight: k as f64 / n }).collect())
}

/// Polynomial extrapolation to `h = 0` of vector samples `values[i]` taken at `hs[i]`
/// (Neville's scheme). Returns the estimate and the change contributed by the last sample.
pub fn richardson_limit(hs: &[f64], values: &[DVector<f64>]) -> (DVector<f64>, f64) {
    assert_eq!(hs.len(), values.len());
    assert!(!hs.is_empty());
    let mut p: Vec<DVector<f64>> = values.to_vec();
    let n = hs.len();
    let mut prev_best = p[0].clone();
    for k in 1..n {
        for i in 0..n - k {
            let (hi, hj) = (hs[i], hs[i + k]);
            p[i] = (&p[i + 1] * hi - &p[i] * hj) / (hi - hj);
        }
        if k + 1 < n {
            prev_best = p[0].clone();
        }
    }
    let err = if n > 1 { (&p[0] - &prev_best).norm() } else { f64::INFINITY };
    (p[0].clone(), err)
}

/// Sample indices `n_max, n_max/2, …` down to `min_n`, at most `levels` of them.
pub fn halving_indices(n_max: usize, levels: usize, min_n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = n_max;
    while out.len() < levels && n >= min_n {
        out.push(n);
        n /= 2;
    }
    out
}

fn scaled_to_reference(v: &DVector<f64>, reference: usize) -> DVector<f64> {
    v / v[reference]
}

/// Limit of `n ↦ f(n)` extrapolated in `1/n` from samples at halving indices. Vectors are
/// scaled so that their largest coordinate at `n_max` equals one.
pub fn extrapolated_vector(f: impl Fn(usize) -> DVector<f64>, n_max: usize) -> (DVector<f64>, f64) {
    let ns = halving_indices(n_max, 6, 8);
    let first = f(ns[0]);
    let reference = first.iamax();
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let values: Vec<DVector<f64>> = ns.iter().map(|&n| scaled_to_reference(&f(n), reference)).collect();
    let (est, err) = richardson_limit(&hs, &values);
    let norm = est.norm();
    (est / norm, err / norm)
}

pub fn extrapolated_line(f: impl Fn(usize) -> Result<Line>, n_max: usize) -> Result<(Line, f64)> {
    let ns = halving_indices(n_max, 6, 8);
    let mut cache = BTreeMap::new();
    for &n in &ns {
        cache.insert(n, DVector::from_column_slice(f(n)?.plucker().as_slice()));
    }
    let (est, err) = extrapolated_vector(|n| cache[&n].clone(), n_max);
    let line = Line::plucker_lift(&Vector6::from_column_slice(est.as_slice()))?;
    Ok((line, err))
}

pub fn extrapolated_point(f: impl Fn(usize) -> ProjPoint, n_max: usize) -> Result<(ProjPoint, f64)> {
    let (est, err) = extrapolated_vector(|n| DVector::from_column_slice(f(n).coords().as_slice()), n_max);
    Ok((ProjPoint::new(Vector4::from_column_slice(est.as_slice()))?, err))
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub expected_rank: usize,
    pub passed: bool,
}

/// Numerical rank of `[x, γ_t x, γ_{2t} x]` for a diagonal flow with distinct eigenvalues.
pub fn vandermonde_rank_check(x: &Vector4<f64>, flow: &OneParamFlow, t: f64) -> Result<RankReport> {
    if flow.case() != JordanCase::C5 {
        return Err(Error::Precondition("rank check needs a diagonal (c5) flow".into()));
    }
    let p = flow.params();
    let ev = [0.0, p.b, p.c, p.d];
    for i in 0..4 {
        for j in i + 1..4 {
            if ev[i] == ev[j] {
                return Err(Error::Precondition("eigenvalues must be distinct".into()));
            }
        }
    }
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Precondition("t must be nonzero".into()));
    }
    let n = x.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    let cols = [x / n, flow.image_direction(x, t), flow.image_direction(x, 2.0 * t)];
    let m = Matrix4x3::from_columns(&cols);
    let sv = m.svd(false, false).singular_values;
    let rank = sv.iter().filter(|&&s| s > 1e-9 * sv[0]).count();
    let support = x.iter().filter(|v| **v != 0.0).count();
    let expected_rank = support.min(3);
    Ok(RankReport { singular_values: sv.iter().copied().collect(), rank, expected_rank, passed: rank == expected_rank })
}
