//! Maximal solutions below a harmonic majorant and the b-pluripolarity dichotomy.

use crate::envelope::{
    envelope_on, is_bpluripolar, relative_extremal, upper_envelope, ConeConstraint, EnvelopeOptions, ObstacleSpec,
};
use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, Grid2D, GridFunction, Layout};
use crate::xreal::XReal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

pub const TOL_MAXIMAL: f64 = 1e-6;

/// Perron envelope of the cone below `h_phi` with boundary data `phi`.
pub fn maximal_envelope(phi: &BoundaryTrace, h_phi: &GridFunction, cone: &ConeConstraint) -> Result<GridFunction> {
    if h_phi.values.contains(&XReal::NegInf) {
        return Err(Error::Precondition("harmonic majorant is -inf somewhere".into()));
    }
    Ok(upper_envelope(cone, &ObstacleSpec::new(h_phi.clone(), phi.clone())?)?.field)
}

/// Index box on the grid: lattice `(i, j)` or polar `(shell, angle)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Probe {
    pub lo: (usize, usize),
    pub hi: (usize, usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub probe: Probe,
    pub drift: f64,
    /// Sup change of `max(resolve, u)` against `u`.
    pub gluing_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaximalityReport {
    pub probes: Vec<ProbeResult>,
    pub skipped: Vec<String>,
    pub tolerance: f64,
    pub maximal: bool,
}

impl MaximalityReport {
    pub fn max_drift(&self) -> f64 {
        self.probes.iter().map(|p| p.drift).fold(0.0, f64::max)
    }
}

/// Free nodes of a probe box: those whose stencil stays in the box.
fn probe_nodes(grid: &Grid2D, p: &Probe, reach: usize) -> Vec<usize> {
    let inside = |a: usize, lo: usize, hi: usize| a >= lo + reach && a + reach <= hi;
    match &grid.layout {
        Layout::Lattice(l) => grid
            .interior
            .iter()
            .copied()
            .filter(|&i| {
                let (ci, cj) = l.coords[i];
                inside(ci, p.lo.0, p.hi.0)
                    && inside(cj, p.lo.1, p.hi.1)
                    && (ci - reach..=ci + reach).all(|a| (cj - reach..=cj + reach).all(|b| l.node_at(a as isize, b as isize).is_some()))
            })
            .collect(),
        Layout::Polar(pl) => (p.lo.0 + 1..p.hi.0)
            .flat_map(|j| (p.lo.1 + 1..p.hi.1).map(move |a| pl.shell_node(j, a)))
            .filter(|&i| grid.is_interior(i))
            .collect(),
    }
}

fn random_probes(grid: &Grid2D, count: usize, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n0, n1) = match &grid.layout {
        Layout::Lattice(l) => (l.n, l.n),
        Layout::Polar(p) => (p.n_radial, p.n_angular),
    };
    (0..count)
        .map(|_| {
            let a = rng.gen_range(0..n0);
            let b = rng.gen_range(0..n1);
            let wa = rng.gen_range(4..=(n0 / 2).max(4));
            let wb = rng.gen_range(4..=(n1 / 2).max(4));
            Probe { lo: (a, b), hi: ((a + wa).min(n0 - 1), (b + wb).min(n1 - 1)) }
        })
        .collect()
}

fn default_cone(grid: &Grid2D) -> ConeConstraint {
    match grid.layout {
        Layout::Lattice(_) => ConeConstraint::toric(),
        Layout::Polar(_) => ConeConstraint::subharmonic(),
    }
}

/// Re-solves the homogeneous problem on random boxes with `u` held outside.
pub fn check_maximality(u: &GridFunction, probes: usize, seed: u64) -> Result<MaximalityReport> {
    let probes = random_probes(&u.grid, probes, seed);
    check_maximality_on(u, &probes)
}

pub fn check_maximality_on(u: &GridFunction, probes: &[Probe]) -> Result<MaximalityReport> {
    let g = &u.grid;
    let cone = default_cone(g);
    let vals = u.to_f64();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("maximality check needs a finite field".into()));
    }
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tolerance = TOL_MAXIMAL * scale;
    let obstacle = vec![f64::INFINITY; g.len()];
    let outcomes: Vec<std::result::Result<ProbeResult, String>> = probes
        .par_iter()
        .map(|p| {
            let free = probe_nodes(g, p, cone.width);
            if free.len() < 4 {
                return Err(format!("probe {:?}..{:?} too small for the stencil", p.lo, p.hi));
            }
            let opts = EnvelopeOptions { tol: 1e-12 * scale, max_iter: None };
            let r = envelope_on(g, &cone, &free, &obstacle, &vals, opts).map_err(|e| e.to_string())?;
            let drift = free.iter().map(|&i| (r.value(i) - vals[i]).abs()).fold(0.0, f64::max);
            let gluing_change = free.iter().map(|&i| r.value(i).max(vals[i]) - vals[i]).fold(0.0, f64::max);
            Ok(ProbeResult { probe: *p, drift, gluing_change })
        })
        .collect();
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(s) => skipped.push(s),
        }
    }
    let maximal = results.iter().all(|r| r.drift <= tolerance);
    Ok(MaximalityReport { probes: results, skipped, tolerance, maximal })
}

/// Envelope below `v` with data `max(phi, -k)`, at most `-level` on `es`.
pub fn lk_envelope(phi: &BoundaryTrace, es: &[bool], level: f64, k: f64, v: &GridFunction) -> Result<GridFunction> {
    if level < 0.0 || k <= 0.0 {
        return Err(Error::Precondition(format!("need L >= 0 and k > 0, got {level}, {k}")));
    }
    if v.values.iter().any(|x| !(x.to_f64() > 0.0) || !x.is_finite()) {
        return Err(Error::Precondition("majorant must be finite and strictly positive".into()));
    }
    let data = phi.map(|x| x.max(XReal::Finite(-k)));
    let mut obs = ObstacleSpec::new(v.clone(), data)?;
    if level > 0.0 {
        obs = obs.with_penalty(es, level)?;
    }
    Ok(upper_envelope(&default_cone(&v.grid), &obs)?.field)
}

#[derive(Debug, Clone)]
pub struct NonUniqueness {
    pub u_phi: GridFunction,
    pub u_l: GridFunction,
    pub probe: usize,
    /// `-ω*(probe, E^s)`.
    pub depth: f64,
    /// `u_phi - U_L` at the probe.
    pub separation: f64,
    /// `L C - (v - u_phi)` at the probe.
    pub bound: f64,
    /// Sup over boundary nodes off `E^s` of the distance of either solution to the data.
    pub boundary_mismatch: f64,
    /// Sup of `U_L - (L ω* + v)`.
    pub majorant_excess: f64,
}

/// Harmonic majorant used by the maximal solver on each grid kind.
pub fn harmonic_majorant(phi: &BoundaryTrace) -> Result<GridFunction> {
    match phi.grid.layout {
        Layout::Polar(_) => crate::disk::poisson_solve(phi),
        Layout::Lattice(_) => crate::toric::laplace_extension(phi),
    }
}

/// Second solution `U_L` built from the non-b-pluripolar set `es`.
pub fn nonuniqueness_maximal(
    phi: &BoundaryTrace,
    es: &[bool],
    level: f64,
    v: &GridFunction,
    ks: &[f64],
    probe: usize,
) -> Result<NonUniqueness> {
    let g = phi.grid.clone();
    let cone = default_cone(&g);
    let (bpp, ev) = is_bpluripolar(es, &g, &cone)?;
    if bpp {
        return Err(Error::Precondition(format!("E^s is numerically b-pluripolar (evidence {ev:e}); the solution is unique")));
    }
    if ks.is_empty() || ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("k levels must be strictly increasing".into()));
    }
    if !g.is_interior(probe) {
        return Err(Error::Precondition(format!("probe node {probe} is not interior")));
    }
    let u_phi = maximal_envelope(phi, &harmonic_majorant(phi)?, &cone)?;
    let mut u_l: Option<GridFunction> = None;
    for &k in ks {
        let next = lk_envelope(phi, es, level, k, v)?;
        if let Some(prev) = &u_l {
            let rise = next.values.iter().zip(&prev.values).map(|(a, b)| a.to_f64() - b.to_f64()).fold(f64::NEG_INFINITY, f64::max);
            if rise > 1e-10 {
                return Err(Error::Invariant(format!("u_(L,k) rises by {rise:e} at k = {k}")));
            }
        }
        u_l = Some(next);
    }
    let u_l = u_l.expect("nonempty levels");
    let omega = relative_extremal(es, &g, &cone)?.field;
    let depth = -omega.values[probe].to_f64();
    let at = |f: &GridFunction| f.values[probe].to_f64();
    let separation = at(&u_phi) - at(&u_l);
    let bound = level * depth - (at(v) - at(&u_phi));
    let mut boundary_mismatch = 0.0f64;
    for (p, &i) in g.boundary.iter().enumerate() {
        if es[p] || !phi.values[p].is_finite() {
            continue;
        }
        let d = phi.values[p].to_f64();
        boundary_mismatch = boundary_mismatch.max((at_node(&u_phi, i) - d).abs()).max((at_node(&u_l, i) - d).abs());
    }
    let majorant_excess = (0..g.len())
        .map(|i| at_node(&u_l, i) - (level * at_node(&omega, i) + at_node(v, i)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(NonUniqueness { u_phi, u_l, probe, depth, separation, bound, boundary_mismatch, majorant_excess })
}

fn at_node(f: &GridFunction, i: usize) -> f64 {
    f.values[i].to_f64()
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyVerdict {
    pub unique: bool,
    pub evidence: f64,
    pub separation: f64,
}

impl DichotomyVerdict {
    pub fn line(&self) -> String {
        format!(
            "dichotomy: {}, evidence: {:e}, separation: {:e}",
            if self.unique { "unique" } else { "nonunique" },
            self.evidence,
            self.separation
        )
    }
}

#[derive(Debug, Clone)]
pub struct DichotomyRun {
    pub verdict: DichotomyVerdict,
    pub solution: GridFunction,
    pub second: Option<GridFunction>,
    pub maximality: Option<MaximalityReport>,
}

/// Runs the path selected by the b-pluripolarity of `e_phi`.
pub fn dichotomy(
    phi: &BoundaryTrace,
    e_phi: &[bool],
    level: f64,
    v: &GridFunction,
    ks: &[f64],
    probe: usize,
    probes: usize,
    seed: u64,
) -> Result<DichotomyRun> {
    let g: &Arc<Grid2D> = &phi.grid;
    let (bpp, evidence) = is_bpluripolar(e_phi, g, &default_cone(g))?;
    if bpp {
        let u = maximal_envelope(phi, &harmonic_majorant(phi)?, &default_cone(g))?;
        let rep = check_maximality(&u, probes, seed)?;
        if !rep.maximal {
            return Err(Error::Invariant(format!("envelope failed the maximality check (drift {:e})", rep.max_drift())));
        }
        let verdict = DichotomyVerdict { unique: true, evidence, separation: 0.0 };
        return Ok(DichotomyRun { verdict, solution: u, second: None, maximality: Some(rep) });
    }
    let nu = nonuniqueness_maximal(phi, e_phi, level, v, ks, probe)?;
    if !(nu.separation > 0.0) {
        return Err(Error::Invariant(format!("second solution not separated ({:e})", nu.separation)));
    }
    let verdict = DichotomyVerdict { unique: false, evidence, separation: nu.separation };
    Ok(DichotomyRun { verdict, solution: nu.u_phi, second: Some(nu.u_l), maximality: None })
}
