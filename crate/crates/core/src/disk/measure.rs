use super::poisson::{disk_layout, PoissonIntegral};
use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, Grid2D, GridFunction, Layout};
use crate::xreal::XReal;
use std::f64::consts::PI;

/// Harmonic measure of a union of boundary cells, each cell being the arc of
/// width `2pi/N` centred on its node.
#[derive(Debug, Clone)]
pub struct HarmonicMeasure {
    n: usize,
    cells: Vec<usize>,
}

fn antiderivative(r: f64, psi: f64) -> f64 {
    ((1.0 + r) * (0.5 * psi).sin()).atan2((1.0 - r) * (0.5 * psi).cos()) / PI
}

impl HarmonicMeasure {
    pub fn new(grid: &Grid2D, mask: &[bool]) -> Result<Self> {
        let Layout::Polar(p) = &grid.layout else {
            return Err(Error::Unsupported("harmonic measure on the toric lattice".into()));
        };
        if p.center.is_none() {
            return Err(Error::Unsupported("harmonic measure is implemented for the unit disk only".into()));
        }
        if mask.len() < p.n_boundary {
            return Err(Error::GridMismatch("boundary mask length".into()));
        }
        let cells = (0..p.n_boundary).filter(|&k| mask[k]).collect();
        Ok(HarmonicMeasure { n: p.n_boundary, cells })
    }

    /// `omega(z, E)`, exact for the cell arcs. On the circle it is the indicator.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let r = x.hypot(y).min(1.0);
        let alpha = y.atan2(x);
        let h = 2.0 * PI / self.n as f64;
        let mut total = 0.0;
        for &k in &self.cells {
            let lo = (k as f64 - 0.5) * h - alpha;
            let a = (lo + PI).rem_euclid(2.0 * PI) - PI;
            let b = a + h;
            total += if b <= PI {
                antiderivative(r, b) - antiderivative(r, a)
            } else {
                (0.5 - antiderivative(r, a)) + (antiderivative(r, b - 2.0 * PI) + 0.5)
            };
        }
        total.clamp(0.0, 1.0)
    }
}

pub fn harmonic_measure(grid: &Grid2D, mask: &[bool], x: f64, y: f64) -> Result<f64> {
    Ok(HarmonicMeasure::new(grid, mask)?.eval(x, y))
}

/// `omega(., E)` at every node.
pub fn harmonic_measure_field(grid: &std::sync::Arc<Grid2D>, mask: &[bool]) -> Result<GridFunction> {
    let hm = HarmonicMeasure::new(grid, mask)?;
    Ok(GridFunction::from_fn(grid.clone(), |x, y| XReal::Finite(hm.eval(x, y))))
}

/// Threshold below which a boundary set counts as b-polar.
pub fn delta_bpolar(n_boundary: usize) -> f64 {
    (2.0 / n_boundary as f64).max(1e-4)
}

/// Two harmonic functions with the same boundary values off `E_phi`.
#[derive(Debug, Clone)]
pub struct WitnessPair {
    pub first: GridFunction,
    pub second: GridFunction,
    pub center_gap: f64,
    /// Largest disagreement of extrapolated radial limits at boundary nodes off `E_phi`.
    pub boundary_limit_gap: f64,
}

/// Radial limit at angle `theta`, extrapolated from three probe radii `1 - j/N^2`.
/// The step must be small against the node spacing `2pi/N`: next to an endpoint
/// of `E_phi` the extrapolation error scales like `(N d)^3`.
pub fn radial_limit(f: impl Fn(f64, f64) -> f64, theta: f64, n: usize) -> f64 {
    let d = 1.0 / (n * n) as f64;
    let v: Vec<f64> = (1..=3).map(|j| {
        let r = 1.0 - j as f64 * d;
        f(r * theta.cos(), r * theta.sin())
    }).collect();
    3.0 * v[0] - 3.0 * v[1] + v[2]
}

pub fn nonuniqueness_witness(phi: &BoundaryTrace) -> Result<WitnessPair> {
    let p = disk_layout(phi)?;
    let grid = phi.grid.clone();
    let hm = HarmonicMeasure::new(&grid, &phi.singular)?;
    let center_gap = hm.eval(0.0, 0.0);
    if center_gap <= delta_bpolar(p.n_boundary) {
        return Err(Error::Precondition("witness requires non-null singular set".into()));
    }
    // Values on E_phi are irrelevant to the pair; give the first solution zero data there.
    let values = phi.values.iter().zip(&phi.singular).map(|(&v, &s)| if s { XReal::ZERO } else { v }).collect();
    let data = BoundaryTrace::new(grid.clone(), values, vec![false; phi.len()])?;
    let pi = PoissonIntegral::new(&data)?;
    let mut first = data.to_field(XReal::ZERO);
    let mut second = data.to_field(XReal::ZERO);
    for &i in &grid.interior {
        let n = grid.nodes[i];
        let h = pi.eval(n.x, n.y);
        first.values[i] = XReal::Finite(h);
        second.values[i] = XReal::Finite(h + hm.eval(n.x, n.y));
    }
    for (k, &i) in grid.boundary.iter().enumerate() {
        if phi.singular[k] {
            second.values[i] = XReal::Finite(1.0);
        }
    }
    let mut boundary_limit_gap: f64 = 0.0;
    for k in (0..p.n_boundary).filter(|&k| !phi.singular[k]) {
        let t = p.boundary_angle(k);
        let a = radial_limit(|x, y| pi.eval(x, y), t, p.n_boundary);
        let b = radial_limit(|x, y| pi.eval(x, y) + hm.eval(x, y), t, p.n_boundary);
        boundary_limit_gap = boundary_limit_gap.max((a - b).abs());
    }
    Ok(WitnessPair { first, second, center_gap, boundary_limit_gap })
}
