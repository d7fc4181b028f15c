use super::scheme::{ma_operator, MeasureDensity, ToricField};
use crate::envelope::{upper_envelope, ConeConstraint, ObstacleSpec};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, GridFunction};
use crate::xreal::XReal;
use serde::Serialize;
use std::sync::Arc;

pub const COMPARISON_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `ma(u) >= ma(w)` cell-wise.
    pub premise: bool,
    /// `sup (u - w)`.
    pub excess: f64,
    pub passed: bool,
}

pub fn check_comparison(u: &ToricField, w: &ToricField) -> Result<ComparisonReport> {
    u.field.same_grid(&w.field)?;
    let g = u.grid();
    let gap = g.boundary.iter().map(|&i| (u.field.values[i].to_f64() - w.field.values[i].to_f64()).abs()).fold(0.0, f64::max);
    if gap > 1e-12 {
        return Err(Error::Precondition(format!("boundary traces differ by {gap:e}")));
    }
    let (mu, mw) = (ma_operator(u)?, ma_operator(w)?);
    let premise = g.interior.iter().all(|&i| mu.density[i] >= mw.density[i] - COMPARISON_TOL * (1.0 + mw.density[i]));
    let excess = g.interior.iter().map(|&i| u.field.values[i].to_f64() - w.field.values[i].to_f64()).fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport { premise, excess, passed: !premise || excess <= COMPARISON_TOL })
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxLemmaReport {
    /// Largest `mu - ma(max(u, w))` over interior nodes.
    pub deficit: f64,
    pub tau: f64,
    pub passed: bool,
}

fn deficit(m: &MeasureDensity, mu: &MeasureDensity) -> f64 {
    m.grid.interior.iter().map(|&i| mu.density[i] - m.density[i]).fold(f64::NEG_INFINITY, f64::max)
}

/// `ma(max(u, w)) >= mu - tau` given `ma(u), ma(w) >= mu - tau`.
pub fn check_max_lemma(u: &ToricField, w: &ToricField, mu: &MeasureDensity, tau: f64) -> Result<MaxLemmaReport> {
    u.field.same_grid(&w.field)?;
    for (name, f) in [("first", u), ("second", w)] {
        let d = deficit(&ma_operator(f)?, mu);
        if d > tau {
            return Err(Error::Precondition(format!("{name} field is below the measure by {d:e}")));
        }
    }
    let m = ToricField::new(u.field.max(&w.field)?)?;
    let d = deficit(&ma_operator(&m)?, mu);
    Ok(MaxLemmaReport { deficit: d, tau, passed: d <= tau })
}

/// Consistency constant `C` in `tau(h) = C h^2`, from the exponential calibration field.
pub fn calibrate_tau(grid: &Arc<Grid2D>) -> Result<f64> {
    let f = ToricField::new(GridFunction::from_fn(grid.clone(), |x, y| XReal::Finite((2.0 * x).exp() + (2.0 * y).exp())))?;
    let m = ma_operator(&f)?;
    let h = grid.h();
    let err = grid
        .interior
        .iter()
        .map(|&i| {
            let n = &grid.nodes[i];
            (m.density[i] - 16.0 * (2.0 * n.x + 2.0 * n.y).exp()).abs()
        })
        .fold(0.0, f64::max);
    Ok(err / (h * h))
}

#[derive(Debug, Clone)]
pub struct CompliantDensity {
    pub density: MeasureDensity,
    pub exceeds: bool,
}

/// Density of the convexified profile `-(1 - e^{2x} - e^{2y})^alpha` (zero outside the ball).
pub fn compliant_density_from_radial(grid: &Arc<Grid2D>, alpha: f64, threshold: f64) -> Result<CompliantDensity> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!("alpha {alpha} not in (0, 1)")));
    }
    let raw = GridFunction::from_fn(grid.clone(), |x, y| {
        let s = 1.0 - (2.0 * x).exp() - (2.0 * y).exp();
        XReal::Finite(-s.max(0.0).powf(alpha))
    });
    let obs = ObstacleSpec::new(raw.clone(), raw.trace())?;
    let hull = upper_envelope(&ConeConstraint::toric(), &obs)?.field;
    let density = ma_operator(&ToricField::new(hull)?)?;
    let exceeds = density.total_mass > threshold;
    Ok(CompliantDensity { density, exceeds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};

    fn field(g: &Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> ToricField {
        ToricField::new(GridFunction::from_fn(g.clone(), |x, y| XReal::Finite(f(x, y)))).unwrap()
    }

    #[test]
    fn max_of_quadratic_and_shift() {
        let g = build_grid(DomainSpec::toric(24, 3.0)).unwrap();
        let u = field(&g, |x, y| 0.5 * (x * x + y * y));
        let w = field(&g, |x, y| 0.5 * (x * x + y * y) + 0.3 * x - 0.2 * y + 0.1);
        let mu = MeasureDensity::from_fn(g.clone(), |_, _| 1.0).unwrap();
        let tau = calibrate_tau(&g).unwrap() * g.h() * g.h();
        assert!(check_max_lemma(&u, &w, &mu, tau).unwrap().passed);
        assert!(check_max_lemma(&u, &u, &mu, tau).unwrap().passed);
        let flat = field(&g, |x, _| x);
        assert!(check_max_lemma(&flat, &u, &mu, tau).is_err());
    }

    #[test]
    fn comparison_trivial_and_mismatched() {
        let g = build_grid(DomainSpec::toric(24, 3.0)).unwrap();
        let u = field(&g, |x, y| 0.5 * (x * x + y * y));
        assert!(check_comparison(&u, &u).unwrap().passed);
        // shifted boundary trace
        let w = field(&g, |x, y| 0.5 * (x * x + y * y) - 1.0);
        assert!(check_comparison(&u, &w).is_err());
    }

    #[test]
    fn compliant_mass_grows_with_window() {
        let small = build_grid(DomainSpec::toric(34, 4.0)).unwrap();
        let big = build_grid(DomainSpec::toric(66, 8.0)).unwrap();
        let a = compliant_density_from_radial(&small, 0.1, 1e3).unwrap();
        let b = compliant_density_from_radial(&big, 0.1, 1e3).unwrap();
        assert!(b.density.total_mass > a.density.total_mass);
        assert!(compliant_density_from_radial(&small, 1.5, 1.0).is_err());
    }
}
