use super::majorant::{build_majorant, EpsBound, QuasiboundCertificate, EPS_SCHEDULE};
use super::poisson::{poisson_solve, truncation_ladder, TruncationLadder};
use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, Grid2D, GridFunction};
use crate::xreal::XReal;
use num_complex::Complex64;
use std::sync::Arc;

/// Node values and intermediate fields of the `|f| <= h` to quasiboundedness chain.
#[derive(Debug, Clone)]
pub struct RieszChain {
    /// `|f|` at every node (`+inf` at poles on the circle).
    pub abs_f: GridFunction,
    /// Least harmonic majorant of `max(log|f|, 0)`.
    pub h_prime: GridFunction,
    /// Largest violation of `max(log|f|, 0) <= h' <= log(h + 1)` (zero when the chain holds).
    pub chain_defect: f64,
    /// `(T, min h/h')` over `{h' >= T}`.
    pub growth: Vec<(f64, f64)>,
    /// Ladder of least harmonic majorants of `exp(min(h', n))`.
    pub h_second_ladder: TruncationLadder,
    pub h_second: GridFunction,
    /// Certificate for `|f|`, built from the `h''` ladder.
    pub certificate: QuasiboundCertificate,
}

fn sample_abs(f: &dyn Fn(Complex64) -> Complex64, z: Complex64) -> XReal {
    let a = f(z).norm();
    if a.is_finite() {
        XReal::Finite(a)
    } else {
        XReal::PosInf
    }
}

/// Runs the chain for an analytic `f` given as a closed-form sampler.
pub fn riesz_demo(
    grid: &Arc<Grid2D>,
    f: &dyn Fn(Complex64) -> Complex64,
    h: &GridFunction,
    levels: &[f64],
    base: usize,
) -> Result<RieszChain> {
    let abs_f = GridFunction::from_fn(grid.clone(), |x, y| sample_abs(f, Complex64::new(x, y)));
    abs_f.same_grid(h)?;
    for &i in &grid.interior {
        let (a, b) = (abs_f.values[i].to_f64(), h.values[i].to_f64());
        if !(a <= b + 1e-12 * (1.0 + b.abs())) {
            return Err(Error::Precondition(format!("|f| = {a} exceeds the majorant {b} at node {i}")));
        }
    }
    let trace = abs_f.trace();
    let log_plus = trace.map(|v| match v {
        XReal::Finite(a) if a > 0.0 => XReal::Finite(a.ln().max(0.0)),
        XReal::Finite(_) => XReal::ZERO,
        other => other,
    });
    let h_prime = poisson_solve(&log_plus)?;
    let mut chain_defect: f64 = 0.0;
    for &i in &grid.interior {
        let lp = abs_f.values[i].to_f64().ln().max(0.0);
        let hp = h_prime.values[i].to_f64();
        let top = (h.values[i].to_f64() + 1.0).ln();
        chain_defect = chain_defect.max(lp - hp).max(hp - top);
    }
    let top = grid.interior.iter().map(|&i| h_prime.values[i].to_f64()).fold(0.0, f64::max);
    let growth = (1..=4)
        .map(|j| {
            let t = top * (1.0 - 0.5f64.powi(j));
            let r = grid
                .interior
                .iter()
                .filter(|&&i| h_prime.values[i].to_f64() >= t && h_prime.values[i].to_f64() > 0.0)
                .map(|&i| h.values[i].to_f64() / h_prime.values[i].to_f64())
                .fold(f64::INFINITY, f64::min);
            (t, r)
        })
        .collect();
    let exp_levels: Vec<f64> = levels.iter().map(|n| n.exp()).collect();
    let at_least_one = trace.map(|v| v.max(XReal::Finite(1.0)));
    let h_second_ladder = truncation_ladder(&at_least_one, &exp_levels)?;
    let h_second = h_second_ladder.sum.last().cloned().expect("nonempty ladder");
    let mut certificate = build_majorant(&h_second, &h_second_ladder, base)?;
    certificate.table = EPS_SCHEDULE
        .iter()
        .map(|&eps| {
            let m = grid
                .interior
                .iter()
                .map(|&i| (abs_f.values[i].to_f64() - eps * certificate.v.values[i].to_f64()).max(0.0))
                .fold(0.0, f64::max);
            EpsBound { eps, m: m + 1e-12 * (1.0 + m) }
        })
        .collect();
    Ok(RieszChain { abs_f, h_prime, chain_defect, growth, h_second_ladder, h_second, certificate })
}

/// Complex boundary data split as `phi1 - phi2 + i(phi3 - phi4)`; each part is laddered
/// separately and the limits recombined.
pub fn poisson_solve_complex(re: &BoundaryTrace, im: &BoundaryTrace, levels: &[f64]) -> Result<(GridFunction, GridFunction)> {
    let solve = |t: &BoundaryTrace| -> Result<GridFunction> {
        let lad = truncation_ladder(t, levels)?;
        let last = lad.sum.len() - 1;
        let (p, n) = (&lad.positive[last], &lad.negative[last]);
        let mut out = p.try_add(n)?;
        for (k, &i) in t.grid.boundary.iter().enumerate() {
            out.values[i] = t.values[k];
        }
        Ok(out)
    };
    Ok((solve(re)?, solve(im)?))
}
