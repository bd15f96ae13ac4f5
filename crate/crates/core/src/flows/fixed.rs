//! Lines fixed by a flow, found as decomposable eigenvectors of the induced derivation on
//! the second exterior power.

use nalgebra::{DMatrix, Matrix6, Vector6};
use serde::Serialize;

use super::OneParamFlow;
use crate::projective::{exterior_derivation, grassmann_distance, klein_form, pairing, Line};

#[derive(Debug, Clone, Serialize)]
pub struct FixedContinuum {
    /// Eigenvalue of the derivation whose eigenspace meets the quadric in a curve or more.
    pub eigenvalue: f64,
    pub eigenspace_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedLineSet {
    pub lines: Vec<Line>,
    pub continua: Vec<FixedContinuum>,
}

impl FixedLineSet {
    pub fn has_continuum(&self) -> bool {
        !self.continua.is_empty()
    }
}

/// Plücker entries this small in a unit eigenvector are kernel rounding.
const ROUNDING: f64 = 1e-13;

fn kernel_basis(m: &Matrix6<f64>, threshold: f64) -> Vec<Vector6<f64>> {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    (0..6)
        .filter(|&i| svd.singular_values[i] <= threshold)
        .map(|i| vt.row(i).transpose())
        .collect()
}

fn candidate_eigenvalues(flow: &OneParamFlow, tol: f64) -> Vec<f64> {
    let ev = flow.eigenvalues();
    let mut out: Vec<f64> = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            let s = ev[i] + ev[j];
            if s.im.abs() <= tol * (1.0 + s.re.abs()) && !out.iter().any(|&m| (m - s.re).abs() <= tol * (1.0 + m.abs())) {
                out.push(s.re);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

pub fn fixed_lines(flow: &OneParamFlow, tol: f64) -> FixedLineSet {
    let d = exterior_derivation(flow.generator());
    let threshold = tol * d.norm().max(1.0);
    let mut lines: Vec<Line> = Vec::new();
    let mut continua = Vec::new();
    for mu in candidate_eigenvalues(flow, tol) {
        let basis = kernel_basis(&(d - Matrix6::identity() * mu), threshold);
        let k = basis.len();
        if k == 0 {
            continue;
        }
        // Klein quadric restricted to the eigenspace: q(Σ c_i v_i) = cᵀ B c
        let b = DMatrix::from_fn(k, k, |i, j| 0.5 * pairing(&basis[i], &basis[j]));
        let eig = b.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1e-300);
        let zero = |x: f64| x.abs() <= tol.max(1e-10) * scale.max(1.0);
        let pos: Vec<usize> = (0..k).filter(|&i| !zero(eig.eigenvalues[i]) && eig.eigenvalues[i] > 0.0).collect();
        let neg: Vec<usize> = (0..k).filter(|&i| !zero(eig.eigenvalues[i]) && eig.eigenvalues[i] < 0.0).collect();
        let nul: Vec<usize> = (0..k).filter(|&i| zero(eig.eigenvalues[i])).collect();
        let combine = |c: &nalgebra::DVector<f64>| -> Vector6<f64> {
            basis.iter().zip(c.iter()).map(|(v, &x)| v * x).sum()
        };
        let mut found: Vec<Vector6<f64>> = Vec::new();
        if !pos.is_empty() && !neg.is_empty() {
            if k == 2 {
                let (up, un) = (eig.eigenvectors.column(pos[0]), eig.eigenvectors.column(neg[0]));
                let (lp, ln) = (eig.eigenvalues[pos[0]], -eig.eigenvalues[neg[0]]);
                for sign in [1.0, -1.0] {
                    let c = up * ln.sqrt() + un * (sign * lp.sqrt());
                    found.push(combine(&c.into_owned()));
                }
            } else {
                continua.push(FixedContinuum { eigenvalue: mu, eigenspace_dim: k });
                continue;
            }
        } else {
            match nul.len() {
                0 => {}
                1 => found.push(combine(&eig.eigenvectors.column(nul[0]).into_owned())),
                _ => {
                    continua.push(FixedContinuum { eigenvalue: mu, eigenspace_dim: k });
                    continue;
                }
            }
        }
        for v in found {
            let v = v / v.norm();
            // rounding left in coordinates the flow repels would grow without bound along the orbit
            let v = v.map(|x| if x.abs() <= ROUNDING { 0.0 } else { x });
            if klein_form(&v).abs() > 1e-8 {
                continue;
            }
            let Ok(line) = Line::plucker_lift(&v) else { continue };
            if !lines.iter().any(|l| grassmann_distance(l, &line) <= 1e-8) {
                lines.push(line);
            }
        }
    }
    FixedLineSet { lines, continua }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{FlowParams, JordanCase};

    fn coordinate_lines() -> Vec<Line> {
        let mut out = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                out.push(Line::coordinate(i, j));
            }
        }
        out
    }

    fn same_set(found: &[Line], expected: &[Line]) -> bool {
        found.len() == expected.len()
            && expected.iter().all(|e| found.iter().any(|f| grassmann_distance(e, f) <= 1e-8))
    }

    #[test]
    fn c5_distinct_and_colliding() {
        for (b, c, d) in [(1.0, 2.0, 4.0), (1.0, 2.0, 3.0)] {
            let flow = OneParamFlow::new(JordanCase::C5, FlowParams::new(0.0, b, c, d)).unwrap();
            let set = fixed_lines(&flow, 1e-9);
            assert!(set.continua.is_empty());
            assert!(same_set(&set.lines, &coordinate_lines()), "{:?}", set.lines);
        }
    }

    #[test]
    fn c1_single_line() {
        let set = fixed_lines(&OneParamFlow::canonical(JordanCase::C1), 1e-9);
        assert!(same_set(&set.lines, &[Line::coordinate(0, 1)]));
        assert!(set.continua.is_empty());
    }

    #[test]
    fn isoclinic_rotation_has_continuum() {
        let flow = OneParamFlow::new(JordanCase::A1, FlowParams::new(1.0, 0.0, 1.0, 0.0)).unwrap();
        assert!(fixed_lines(&flow, 1e-9).has_continuum());
    }
}
