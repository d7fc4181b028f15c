//! Perron-type upper envelopes under a cone constraint.

mod cone;
mod solver;

pub use cone::{stencil, Average, ConeConstraint, ConeKind, DIRECTIONS};

use crate::error::{Error, Result};
use crate::grid::{build_grid, BoundaryTrace, DomainSpec, Grid2D, GridFunction, Layout, ToricFace};
use crate::xreal::XReal;
use solver::Problem;
use std::sync::Arc;

pub const TOL_ENV: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    pub tol: f64,
    /// Defaults to 200 times the larger grid dimension.
    pub max_iter: Option<usize>,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions { tol: TOL_ENV, max_iter: None }
    }
}

impl EnvelopeOptions {
    fn cap(&self, grid: &Grid2D) -> usize {
        self.max_iter.unwrap_or(200 * grid.spec.nx.max(grid.spec.ny))
    }
}

#[derive(Debug, Clone)]
pub struct ObstacleSpec {
    /// Upper obstacle on all nodes; `+inf` where unconstrained.
    pub obstacle: GridFunction,
    pub boundary: BoundaryTrace,
    /// Penalty set as a mask over boundary positions.
    pub penalty: Vec<bool>,
    pub level: f64,
}

impl ObstacleSpec {
    pub fn new(obstacle: GridFunction, boundary: BoundaryTrace) -> Result<Self> {
        if !Arc::ptr_eq(&obstacle.grid, &boundary.grid) && *obstacle.grid != *boundary.grid {
            return Err(Error::GridMismatch("obstacle and boundary data live on different grids".into()));
        }
        let n = boundary.len();
        Ok(ObstacleSpec { obstacle, boundary, penalty: vec![false; n], level: 0.0 })
    }

    pub fn with_penalty(mut self, mask: &[bool], level: f64) -> Result<Self> {
        if mask.len() != self.boundary.len() {
            return Err(Error::GridMismatch(format!("penalty mask has {} entries, boundary {}", mask.len(), self.boundary.len())));
        }
        if mask.iter().any(|&b| b) && level <= 0.0 {
            return Err(Error::Precondition(format!("penalty level {level} must be positive")));
        }
        self.penalty = mask.to_vec();
        self.level = level;
        Ok(self)
    }

    fn grid(&self) -> &Arc<Grid2D> {
        &self.obstacle.grid
    }

    /// Values held on boundary nodes and the obstacle on free nodes.
    fn pinned(&self) -> Result<Vec<f64>> {
        let g = self.grid();
        let mut held = vec![f64::NAN; g.len()];
        for (p, &i) in g.boundary.iter().enumerate() {
            let data = self.boundary.values[p];
            let v = if self.penalty[p] {
                data.min(XReal::Finite(-self.level))
            } else {
                data
            };
            let v = v.min(self.obstacle.values[i]);
            held[i] = match v {
                XReal::Finite(x) => x,
                XReal::NegInf if self.penalty[p] => -self.level,
                _ => {
                    return Err(Error::Precondition(format!(
                        "boundary value {} at node {i} must be finite off the penalty set",
                        v.token()
                    )))
                }
            };
        }
        for &i in &g.interior {
            held[i] = match self.obstacle.values[i] {
                XReal::NegInf => return Err(Error::Precondition(format!("obstacle is -inf at node {i}"))),
                v => v.to_f64(),
            };
        }
        Ok(held)
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub field: GridFunction,
    pub iterations: usize,
    pub final_update: f64,
    /// Nodes where the obstacle binds.
    pub active: Vec<bool>,
    /// (iteration, sup update) per step.
    pub log: Vec<(usize, f64)>,
}

impl EnvelopeResult {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("iteration,sup_update\n");
        for (k, d) in &self.log {
            s.push_str(&format!("{k},{d:e}\n"));
        }
        s
    }

    pub fn value(&self, i: usize) -> f64 {
        self.field.values[i].to_f64()
    }
}

/// Envelope on `free` with every other node held at `values`; `obstacle` is full length.
pub fn envelope_on(
    grid: &Arc<Grid2D>,
    cone: &ConeConstraint,
    free: &[usize],
    obstacle: &[f64],
    values: &[f64],
    opts: EnvelopeOptions,
) -> Result<EnvelopeResult> {
    cone.validate(grid)?;
    let mut top = f64::NEG_INFINITY;
    let mut is_free = vec![false; grid.len()];
    for &i in free {
        is_free[i] = true;
    }
    let constraints = free.iter().map(|&i| stencil(grid, cone, i)).collect::<Result<Vec<_>>>()?;
    for (c, &i) in constraints.iter().zip(free) {
        for &(j, _) in c.iter().flatten() {
            if !is_free[j] {
                if !values[j].is_finite() {
                    return Err(Error::Precondition(format!("held value at node {j} is not finite")));
                }
                top = top.max(values[j]);
            }
        }
        if obstacle[i] == f64::NEG_INFINITY || obstacle[i].is_nan() {
            return Err(Error::Precondition(format!("obstacle at node {i} is not usable")));
        }
    }
    let mut start = values.to_vec();
    for &i in free {
        start[i] = obstacle[i].min(top);
    }
    let problem = Problem { free: free.to_vec(), constraints, obstacle: free.iter().map(|&i| obstacle[i]).collect(), start };
    let s = problem.solve(opts.tol, opts.cap(grid))?;
    let mut active = vec![false; grid.len()];
    for (k, &i) in free.iter().enumerate() {
        active[i] = s.active[k];
    }
    let field = GridFunction::from_f64(grid.clone(), &s.values)?;
    Ok(EnvelopeResult { field, iterations: s.iterations, final_update: s.final_update, active, log: s.log })
}

pub fn upper_envelope(cone: &ConeConstraint, obs: &ObstacleSpec) -> Result<EnvelopeResult> {
    upper_envelope_with(cone, obs, EnvelopeOptions::default())
}

pub fn upper_envelope_with(cone: &ConeConstraint, obs: &ObstacleSpec, opts: EnvelopeOptions) -> Result<EnvelopeResult> {
    let g = obs.grid().clone();
    let held = obs.pinned()?;
    let obstacle: Vec<f64> = obs.obstacle.values.iter().map(|v| v.to_f64()).collect();
    envelope_on(&g, cone, &g.interior, &obstacle, &held, opts)
}

/// Extremal function of a boundary set: obstacle 0, data 0, pinned at -1 on `e`.
pub fn relative_extremal(e: &[bool], grid: &Arc<Grid2D>, cone: &ConeConstraint) -> Result<EnvelopeResult> {
    penalized_singularity_envelope(e, 1.0, cone, &GridFunction::constant(grid.clone(), XReal::Finite(0.0)))
}

/// Largest cone field below `upper` whose boundary values are at most `-level` on `e`.
pub fn penalized_singularity_envelope(
    e: &[bool],
    level: f64,
    cone: &ConeConstraint,
    upper: &GridFunction,
) -> Result<EnvelopeResult> {
    if level <= 0.0 {
        return Err(Error::Precondition(format!("penalty level {level} must be positive")));
    }
    let obs = ObstacleSpec::new(upper.clone(), upper.trace())?.with_penalty(e, level)?;
    upper_envelope(cone, &obs)
}

pub fn delta_bpp(grid: &Grid2D) -> f64 {
    (4.0 / grid.boundary.len() as f64).max(1e-3)
}

/// Numerical b-pluripolarity test; returns the verdict and the evidence `sup |ω*|`.
///
/// On the disk the sup runs over nodes with `r <= 1/2`. On the toric window the
/// evidence is the extrapolation `2ω*(2X) - ω*(X)` in the window size `X`
/// (leading term of ω* is `x/X` near a face), taken over nodes with `x, y >= -1`.
pub fn is_bpluripolar(e: &[bool], grid: &Arc<Grid2D>, cone: &ConeConstraint) -> Result<(bool, f64)> {
    if e.len() != grid.boundary.len() {
        return Err(Error::GridMismatch(format!("mask has {} entries, boundary {}", e.len(), grid.boundary.len())));
    }
    if !e.iter().any(|&b| b) {
        return Ok((true, 0.0));
    }
    let w = relative_extremal(e, grid, cone)?;
    let evidence = match &grid.layout {
        Layout::Polar(_) => grid
            .interior
            .iter()
            .filter(|&&i| grid.nodes[i].x.hypot(grid.nodes[i].y) <= 0.5 + 1e-12)
            .map(|&i| w.value(i).abs())
            .fold(0.0, f64::max),
        Layout::Lattice(l) => {
            let big = doubled_window(grid)?;
            let eb = transfer_mask(e, grid, &big)?;
            let wb = relative_extremal(&eb, &big, cone)?;
            let bl = big.lattice().expect("lattice");
            let shift = (bl.n - l.n) as isize;
            let mut sup = 0.0f64;
            for &i in &grid.interior {
                let n = &grid.nodes[i];
                if n.x < -1.0 || n.y < -1.0 {
                    continue;
                }
                let (ci, cj) = l.coords[i];
                let j = bl
                    .node_at(ci as isize + shift, cj as isize + shift)
                    .ok_or_else(|| Error::Invariant("windows do not nest".into()))?;
                sup = sup.max((2.0 * wb.value(j) - w.value(i)).abs());
            }
            sup
        }
    };
    Ok((evidence < delta_bpp(grid), evidence))
}

/// Same lattice step, window twice as wide.
fn doubled_window(grid: &Grid2D) -> Result<Arc<Grid2D>> {
    let l = grid.lattice().ok_or_else(|| Error::Unsupported("window doubling needs a lattice".into()))?;
    let steps = l.n - 1 - l.reach;
    let spec = DomainSpec::toric(2 * steps + 1 + l.reach, 2.0 * l.x_max);
    build_grid(spec)
}

/// Carry a boundary mask to another toric window by face and nearest parameter.
pub fn transfer_mask(e: &[bool], from: &Grid2D, to: &Grid2D) -> Result<Vec<bool>> {
    let (lf, lt) = match (from.lattice(), to.lattice()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Unsupported("mask transfer needs two lattices".into())),
    };
    let face_of = |l: &crate::grid::LatticeLayout, i: usize| l.face[i].unwrap_or(ToricFace::Curve);
    let mut out = Vec::with_capacity(to.boundary.len());
    for (p, &i) in to.boundary.iter().enumerate() {
        let f = face_of(lt, i);
        let t = to.boundary_param[p];
        let mut best = (f64::INFINITY, false);
        for (q, &k) in from.boundary.iter().enumerate() {
            if face_of(lf, k) != f {
                continue;
            }
            let d = (from.boundary_param[q] - t).abs();
            if d < best.0 {
                best = (d, e[q]);
            }
        }
        out.push(best.1);
    }
    Ok(out)
}

/// Largest violation of the averaging constraints and of the monotone constraints.
pub fn cone_violation(f: &GridFunction, cone: &ConeConstraint) -> Result<(f64, f64)> {
    let g = &f.grid;
    cone.validate(g)?;
    let u = f.to_f64();
    let (mut avg, mut mono) = (0.0f64, 0.0f64);
    for &i in &g.interior {
        for c in stencil(g, cone, i)? {
            let a: f64 = c.iter().map(|&(j, w)| w * u[j]).sum();
            let v = u[i] - a;
            if c.len() == 1 {
                mono = mono.max(v);
            } else {
                avg = avg.max(v);
            }
        }
    }
    Ok((avg, mono))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk::harmonic_measure;

    fn zero(g: &Arc<Grid2D>) -> GridFunction {
        GridFunction::constant(g.clone(), XReal::Finite(0.0))
    }

    fn arc(g: &Grid2D, a: f64, b: f64) -> Vec<bool> {
        g.boundary_param.iter().map(|&t| t >= a && t < b).collect()
    }

    #[test]
    fn zero_obstacle_zero_data() {
        let g = build_grid(DomainSpec::disk(16, 8, 16)).unwrap();
        let z = zero(&g);
        let r = upper_envelope(&ConeConstraint::subharmonic(), &ObstacleSpec::new(z.clone(), z.trace()).unwrap()).unwrap();
        assert_eq!(r.field.sup_diff(&z), 0.0);
    }

    #[test]
    fn cos_data_gives_re_z() {
        let g = build_grid(DomainSpec::disk(64, 32, 128)).unwrap();
        let inf = GridFunction::constant(g.clone(), XReal::PosInf);
        let data = BoundaryTrace::from_fn(g.clone(), |t, _, _| XReal::Finite(t.cos()));
        let r = upper_envelope(&ConeConstraint::subharmonic(), &ObstacleSpec::new(inf, data).unwrap()).unwrap();
        let err = g.interior.iter().map(|&i| (r.value(i) - g.nodes[i].x).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        assert!(r.final_update <= TOL_ENV);
    }

    #[test]
    fn toric_affine_is_fixed() {
        let g = build_grid(DomainSpec::toric(32, 5.0)).unwrap();
        let inf = GridFunction::constant(g.clone(), XReal::PosInf);
        let data = BoundaryTrace::from_fn(g.clone(), |_, x, _| XReal::Finite(x));
        let r = upper_envelope(&ConeConstraint::toric(), &ObstacleSpec::new(inf, data).unwrap()).unwrap();
        let err = g.interior.iter().map(|&i| (r.value(i) - g.nodes[i].x).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn extremal_trivial_sets() {
        let g = build_grid(DomainSpec::disk(16, 8, 32)).unwrap();
        let c = ConeConstraint::subharmonic();
        let none = relative_extremal(&vec![false; g.boundary.len()], &g, &c).unwrap();
        assert!(none.field.values.iter().all(|v| v.to_f64() == 0.0));
        let all = relative_extremal(&vec![true; g.boundary.len()], &g, &c).unwrap();
        assert!(all.field.values.iter().all(|v| (v.to_f64() + 1.0).abs() < 1e-12));
    }

    #[test]
    fn half_arc_matches_harmonic_measure() {
        let g = build_grid(DomainSpec::disk(64, 32, 64)).unwrap();
        let e = arc(&g, 0.0, std::f64::consts::PI);
        let w = relative_extremal(&e, &g, &ConeConstraint::subharmonic()).unwrap();
        let center = w.value(g.polar().unwrap().center.unwrap());
        assert!((center + 0.5).abs() < 2e-2, "{center}");
        let hm = harmonic_measure(&g, &e, 0.0, 0.0).unwrap();
        assert!((center + hm).abs() < 2e-2);
    }

    #[test]
    fn penalty_scales_and_orders() {
        let g = build_grid(DomainSpec::toric(24, 4.0)).unwrap();
        let l = g.lattice().unwrap();
        let e: Vec<bool> = g.boundary.iter().map(|&i| l.face[i] == Some(ToricFace::X)).collect();
        let c = ConeConstraint::toric();
        let u1 = relative_extremal(&e, &g, &c).unwrap();
        let u3 = penalized_singularity_envelope(&e, 3.0, &c, &zero(&g)).unwrap();
        for i in 0..g.len() {
            assert!((u3.value(i) - 3.0 * u1.value(i)).abs() < 1e-10);
            assert!(u3.value(i) <= u1.value(i) + 1e-12);
        }
        let (a, m) = cone_violation(&u3.field, &c).unwrap();
        assert!(a < 1e-12 && m < 1e-12);
    }

    #[test]
    fn bpluripolar_verdicts() {
        let g = build_grid(DomainSpec::disk(256, 32, 256)).unwrap();
        let c = ConeConstraint::subharmonic();
        let mut one = vec![false; g.boundary.len()];
        one[0] = true;
        let (yes, ev) = is_bpluripolar(&one, &g, &c).unwrap();
        assert!(yes && ev <= delta_bpp(&g), "{ev}");
        let (no, ev) = is_bpluripolar(&arc(&g, 0.0, std::f64::consts::PI), &g, &c).unwrap();
        // the sup over r <= 1/2 sits above the center value 1/2
        assert!(!no && ev >= 0.5 && ev < 1.0, "{ev}");
        assert_eq!(is_bpluripolar(&vec![false; g.boundary.len()], &g, &c).unwrap(), (true, 0.0));
    }

    #[test]
    fn toric_face_versus_curve_arc() {
        let g = build_grid(DomainSpec::toric(66, 8.0)).unwrap();
        let l = g.lattice().unwrap();
        let c = ConeConstraint::toric();
        let face: Vec<bool> = g.boundary.iter().map(|&i| l.face[i] == Some(ToricFace::X)).collect();
        let (yes, ev) = is_bpluripolar(&face, &g, &c).unwrap();
        assert!(yes, "{ev}");
        let curve: Vec<bool> = g
            .boundary
            .iter()
            .zip(&g.boundary_param)
            .map(|(&i, &t)| l.face[i] == Some(ToricFace::Curve) && (0.4..1.2).contains(&t))
            .collect();
        let (no, ev) = is_bpluripolar(&curve, &g, &c).unwrap();
        assert!(!no, "{ev}");
    }
}
