use super::poisson::TruncationLadder;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::xreal::XReal;
use serde::{Deserialize, Serialize};

/// Cap on selected ladder terms; `2^-48` is below the resolution of the base-point gap.
pub const MAX_TERMS: usize = 48;

/// Default epsilon schedule of the `(eps, M)` table.
pub const EPS_SCHEDULE: [f64; 8] = [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.001];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsBound {
    pub eps: f64,
    pub m: f64,
}

/// Positive superharmonic `v` with `|u| <= eps*v + M_eps` for each tabulated pair.
#[derive(Debug, Clone)]
pub struct QuasiboundCertificate {
    pub v: GridFunction,
    pub table: Vec<EpsBound>,
    /// Gauge breakpoints `n_k = sup u_k` per ladder part (positive, then negative).
    pub gauge: Vec<Vec<f64>>,
    /// Selected rung indices per part.
    pub selected: Vec<Vec<usize>>,
    pub base: usize,
}

/// `sum max(t - n_k, 0)`.
pub fn gauge_value(breakpoints: &[f64], t: f64) -> f64 {
    breakpoints.iter().map(|&n| (t - n).max(0.0)).sum()
}

fn select(rungs: &[Vec<f64>], base: usize) -> Result<Vec<usize>> {
    let last = rungs.len() - 1;
    let top = rungs[last][base];
    let mut chosen = Vec::new();
    let mut next = 0;
    for j in 1..=MAX_TERMS {
        let tol = 0.5f64.powi(j as i32);
        let Some(idx) = (next..=last).find(|&r| top - rungs[r][base] <= tol) else {
            return Err(Error::Precondition("quasibound construction failed".into()));
        };
        chosen.push(idx);
        if idx == last {
            break;
        }
        next = idx + 1;
    }
    Ok(chosen)
}

/// Builds `v = sum (U - U_k)` over the proof's subsequence for each ladder part.
pub fn build_majorant(u: &GridFunction, ladder: &TruncationLadder, base: usize) -> Result<QuasiboundCertificate> {
    let g = u.grid.clone();
    if ladder.monotonicity_defect() > 1e-12 {
        return Err(Error::Precondition("ladder is not monotone".into()));
    }
    let last = ladder.sum.last().ok_or_else(|| Error::Precondition("empty ladder".into()))?;
    last.same_grid(u)?;
    if base >= g.len() || !g.is_interior(base) {
        return Err(Error::Precondition("base point must be an interior node".into()));
    }
    for &i in &g.interior {
        if let XReal::Finite(x) = u.values[i] {
            if (x - last.values[i].to_f64()).abs() > 1e-9 * (1.0 + x.abs()) {
                return Err(Error::Precondition("ladder does not converge to the certified function".into()));
            }
        }
    }
    let parts: [Vec<Vec<f64>>; 2] = [
        ladder.positive.iter().map(|f| f.to_f64()).collect(),
        ladder.negative.iter().map(|f| f.to_f64().iter().map(|x| -x).collect()).collect(),
    ];
    let n = g.len();
    let mut v = vec![0.0; n];
    let mut gauge = Vec::new();
    let mut selected = Vec::new();
    for rungs in &parts {
        let top = rungs.last().unwrap();
        let chosen = select(rungs, base)?;
        let mut part_v = vec![0.0; n];
        let mut breaks = Vec::new();
        for &r in &chosen {
            for i in 0..n {
                part_v[i] += top[i] - rungs[r][i];
            }
            breaks.push(g.interior.iter().map(|&i| rungs[r][i]).fold(f64::NEG_INFINITY, f64::max));
        }
        for &i in &g.interior {
            if gauge_value(&breaks, top[i]) > part_v[i] + 1e-9 * (1.0 + part_v[i]) {
                return Err(Error::Invariant(format!("gauge exceeds the majorant at node {i}")));
            }
        }
        for i in 0..n {
            v[i] += part_v[i];
        }
        gauge.push(breaks);
        selected.push(chosen);
    }
    let mut vf = GridFunction::from_f64(g.clone(), &v)?;
    for i in 0..n {
        if !u.values[i].is_finite() {
            vf.values[i] = XReal::PosInf;
        }
    }
    let bounded = v.iter().all(|&x| x == 0.0);
    if !bounded && g.interior.iter().any(|&i| v[i] <= 0.0) {
        return Err(Error::Invariant("majorant vanishes at an interior node".into()));
    }
    let table = EPS_SCHEDULE
        .iter()
        .map(|&eps| {
            let m = g
                .interior
                .iter()
                .map(|&i| (u.values[i].to_f64().abs() - eps * v[i]).max(0.0))
                .fold(0.0, f64::max);
            EpsBound { eps, m: m + 1e-12 * (1.0 + m) }
        })
        .collect();
    Ok(QuasiboundCertificate { v: vf, table, gauge, selected, base })
}

#[derive(Debug, Clone)]
pub struct QuasiboundReport {
    pub passed: bool,
    /// `(table row, node)` pairs where the stored inequality fails.
    pub violations: Vec<(usize, usize)>,
    /// `(T, R(T))` with `R(T) = min v/|u|` over `{|u| >= T}`.
    pub ratio_curve: Vec<(f64, f64)>,
    pub ratio_monotone: bool,
}

impl QuasiboundReport {
    /// Smallest tested threshold whose ratio reaches `target`.
    pub fn threshold_for(&self, target: f64) -> Option<f64> {
        self.ratio_curve.iter().find(|(_, r)| *r >= target).map(|(t, _)| *t)
    }
}

pub fn check_quasibounded(u: &GridFunction, cert: &QuasiboundCertificate) -> Result<QuasiboundReport> {
    u.same_grid(&cert.v)?;
    let g = &u.grid;
    let mut violations = Vec::new();
    for (row, b) in cert.table.iter().enumerate() {
        for &i in &g.interior {
            let lhs = u.values[i].to_f64().abs();
            let rhs = b.eps * cert.v.values[i].to_f64() + b.m;
            if !(lhs <= rhs) {
                violations.push((row, i));
            }
        }
    }
    if g.interior.iter().any(|&i| cert.v.values[i].to_f64() < 0.0) {
        violations.push((usize::MAX, cert.base));
    }
    let top = g.interior.iter().map(|&i| u.values[i].to_f64().abs()).fold(0.0, f64::max);
    let mut ratio_curve = Vec::new();
    if top > 0.0 {
        for j in 1..=6 {
            let t = top * (1.0 - 0.5f64.powi(j));
            let r = g
                .interior
                .iter()
                .filter_map(|&i| {
                    let a = u.values[i].to_f64().abs();
                    (a >= t).then(|| cert.v.values[i].to_f64() / a)
                })
                .fold(f64::INFINITY, f64::min);
            ratio_curve.push((t, r));
        }
    }
    let ratio_monotone = ratio_curve.windows(2).all(|w| w[1].1 >= w[0].1);
    Ok(QuasiboundReport { passed: violations.is_empty() && ratio_monotone, violations, ratio_curve, ratio_monotone })
}
