//! Propagating singularity masks and the continuity region of solutions.

use crate::envelope::{is_bpluripolar, penalized_singularity_envelope, stencil, ConeConstraint, TOL_ENV};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, GridFunction, Layout};
use crate::xreal::XReal;
use serde::Serialize;
use std::sync::Arc;

pub const THETA: f64 = 0.5;
pub const THETA_DEEP: f64 = 0.9;
pub const DEFAULT_LEVELS: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone)]
pub struct HullEstimate {
    pub grid: Arc<Grid2D>,
    pub levels: Vec<f64>,
    pub theta: f64,
    pub theta_deep: f64,
    /// `{env_L <= -theta L}` per level, over all nodes (boundary nodes never set).
    pub masks: Vec<Vec<bool>>,
    /// Intersection over levels.
    pub limit: Vec<bool>,
    /// `{env_L <= -(1 - theta_deep) L}` intersected over levels.
    pub deep: Vec<bool>,
    pub envelopes: Vec<GridFunction>,
}

impl HullEstimate {
    pub fn is_nested(&self) -> bool {
        self.masks.windows(2).all(|w| w[1].iter().zip(&w[0]).all(|(&b, &a)| !b || a))
    }

    pub fn count(mask: &[bool]) -> usize {
        mask.iter().filter(|&&b| b).count()
    }
}

/// Mask estimates of the propagating set of `e` from penalized envelopes below 0.
pub fn propagating_set(e: &[bool], grid: &Arc<Grid2D>, cone: &ConeConstraint, levels: &[f64]) -> Result<HullEstimate> {
    propagating_set_with(e, grid, cone, levels, THETA, THETA_DEEP)
}

pub fn propagating_set_with(
    e: &[bool],
    grid: &Arc<Grid2D>,
    cone: &ConeConstraint,
    levels: &[f64],
    theta: f64,
    theta_deep: f64,
) -> Result<HullEstimate> {
    if levels.is_empty() || levels.windows(2).any(|w| !(w[1] > w[0])) || levels[0] <= 0.0 {
        return Err(Error::Precondition("levels must be positive and strictly increasing".into()));
    }
    if !(0.0 < theta && theta < 1.0 && 0.0 < theta_deep && theta_deep < 1.0) {
        return Err(Error::Precondition("thresholds must lie in (0, 1)".into()));
    }
    let (ok, ev) = is_bpluripolar(e, grid, cone)?;
    if !ok {
        return Err(Error::Precondition(format!("hull defined only for b-pluripolar E (evidence {ev:e})")));
    }
    let zero = GridFunction::constant(grid.clone(), XReal::Finite(0.0));
    let mut masks = Vec::new();
    let mut envelopes = Vec::new();
    let mut limit = vec![true; grid.len()];
    let mut deep = vec![true; grid.len()];
    for &l in levels {
        let env = if e.iter().any(|&b| b) { penalized_singularity_envelope(e, l, cone, &zero)?.field } else { zero.clone() };
        let mut m = vec![false; grid.len()];
        // env_L scales with L, and nodes often sit exactly on a level set;
        // values within solver tolerance of a threshold count as on it
        let slack = TOL_ENV * l;
        for &i in &grid.interior {
            let v = env.values[i].to_f64();
            m[i] = v <= -theta * l + slack;
            limit[i] &= m[i];
            deep[i] &= v <= -(1.0 - theta_deep) * l + slack;
        }
        masks.push(m);
        envelopes.push(env);
    }
    for &i in &grid.boundary {
        limit[i] = false;
        deep[i] = false;
    }
    Ok(HullEstimate { grid: grid.clone(), levels: levels.to_vec(), theta, theta_deep, masks, limit, deep, envelopes })
}

/// Mask nodes with a neighbour outside the mask.
pub fn outline(grid: &Grid2D, mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i] && patch(grid, i).iter().any(|&k| !mask[k])).collect()
}

/// Nodes of the one-cell patch around `i`: 3x3 on the lattice, stencil neighbours on polar grids.

fn patch(grid: &Grid2D, i: usize) -> Vec<usize> {
    match &grid.layout {
        Layout::Lattice(l) => {
            let (ci, cj) = l.coords[i];
            let mut out = Vec::with_capacity(9);
            for dj in -1..=1 {
                for di in -1..=1 {
                    if let Some(k) = l.node_at(ci as isize + di, cj as isize + dj) {
                        out.push(k);
                    }
                }
            }
            out
        }
        Layout::Polar(_) => {
            let mut out = vec![i];
            if grid.is_interior(i) {
                if let Ok(s) = stencil(grid, &ConeConstraint::subharmonic(), i) {
                    out.extend(s[0].iter().map(|&(k, _)| k));
                }
            }
            out
        }
    }
}

pub fn dilate(grid: &Grid2D, mask: &[bool]) -> Vec<bool> {
    let mut out = mask.to_vec();
    for i in 0..grid.len() {
        if mask[i] {
            for k in patch(grid, i) {
                out[k] = true;
            }
        }
    }
    out
}

/// Node distance in cells: Chebyshev lattice steps, or Euclidean distance over `h` on polar grids.
fn cell_distance(grid: &Grid2D, a: usize, b: usize) -> f64 {
    match &grid.layout {
        Layout::Lattice(l) => {
            let (p, q) = (l.coords[a], l.coords[b]);
            (p.0 as f64 - q.0 as f64).abs().max((p.1 as f64 - q.1 as f64).abs())
        }
        Layout::Polar(_) => {
            let (p, q) = (&grid.nodes[a], &grid.nodes[b]);
            (p.x - q.x).hypot(p.y - q.y) / grid.h()
        }
    }
}

pub fn hausdorff_cells(grid: &Grid2D, a: &[bool], b: &[bool]) -> f64 {
    let sa: Vec<usize> = (0..grid.len()).filter(|&i| a[i]).collect();
    let sb: Vec<usize> = (0..grid.len()).filter(|&i| b[i]).collect();
    match (sa.is_empty(), sb.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let one_way = |x: &[usize], y: &[usize]| {
        x.iter().map(|&i| y.iter().map(|&j| cell_distance(grid, i, j)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one_way(&sa, &sb).max(one_way(&sb, &sa))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureReport {
    pub equal: bool,
    pub hausdorff_cells: f64,
    pub limit_nodes: usize,
    pub deep_closure_nodes: usize,
    pub passed: bool,
}

/// Compares the limit mask with the one-cell closure of the deep mask.
pub fn hull_closure_check(est: &HullEstimate) -> ClosureReport {
    let closure = dilate(&est.grid, &est.deep);
    let d = hausdorff_cells(&est.grid, &est.limit, &closure);
    ClosureReport {
        equal: est.limit == closure,
        hausdorff_cells: d,
        limit_nodes: HullEstimate::count(&est.limit),
        deep_closure_nodes: HullEstimate::count(&closure),
        passed: d <= 1.0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub sup_oscillation: f64,
    pub argmax: Option<usize>,
    pub h: f64,
    pub bound: f64,
    pub checked_nodes: usize,
    pub violation: bool,
}

/// Local 3x3 oscillation on interior nodes outside the dilated limit mask.
pub fn continuity_region(u: &GridFunction, est: &HullEstimate, c_cont: f64) -> Result<ContinuityReport> {
    if *u.grid != *est.grid {
        return Err(Error::GridMismatch("field and hull on different grids".into()));
    }
    let g = &u.grid;
    let excluded = dilate(g, &est.limit);
    let (mut sup, mut arg, mut count) = (0.0f64, None, 0);
    for &i in &g.interior {
        if excluded[i] {
            continue;
        }
        let vals: Vec<f64> = patch(g, i).iter().map(|&k| u.values[k].to_f64()).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            continue;
        }
        count += 1;
        let osc = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if osc > sup {
            sup = osc;
            arg = Some(i);
        }
    }
    let h = g.h();
    Ok(ContinuityReport { sup_oscillation: sup, argmax: arg, h, bound: c_cont * h, checked_nodes: count, violation: sup > c_cont * h })
}

/// Oscillation ratio between a grid and its refinement; halving within 25% passes.
pub fn oscillation_halves(coarse: &ContinuityReport, fine: &ContinuityReport) -> (f64, bool) {
    let r = coarse.sup_oscillation / fine.sup_oscillation;
    (r, (1.5..=2.5).contains(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec, ToricFace};

    #[test]
    fn empty_set_gives_empty_masks() {
        let g = build_grid(DomainSpec::disk(32, 8, 32)).unwrap();
        let est = propagating_set(&vec![false; g.boundary.len()], &g, &ConeConstraint::subharmonic(), &DEFAULT_LEVELS).unwrap();
        assert!(est.masks.iter().all(|m| HullEstimate::count(m) == 0));
        assert!(hull_closure_check(&est).passed);
    }

    #[test]
    fn single_disk_node_does_not_propagate() {
        let g = build_grid(DomainSpec::disk(256, 32, 256)).unwrap();
        let mut e = vec![false; g.boundary.len()];
        e[0] = true;
        let est = propagating_set(&e, &g, &ConeConstraint::subharmonic(), &DEFAULT_LEVELS).unwrap();
        assert_eq!(HullEstimate::count(&est.limit), 0);
        assert!(est.is_nested());
    }

    #[test]
    fn arc_is_refused() {
        let g = build_grid(DomainSpec::disk(64, 16, 64)).unwrap();
        let e: Vec<bool> = g.boundary_param.iter().map(|&t| t < std::f64::consts::PI).collect();
        assert!(propagating_set(&e, &g, &ConeConstraint::subharmonic(), &DEFAULT_LEVELS).is_err());
    }

    #[test]
    fn toric_face_slab() {
        let g = build_grid(DomainSpec::toric(66, 8.0)).unwrap();
        let l = g.lattice().unwrap();
        let e: Vec<bool> = g.boundary.iter().map(|&i| l.face[i] == Some(ToricFace::X)).collect();
        let est = propagating_set(&e, &g, &ConeConstraint::toric(), &DEFAULT_LEVELS).unwrap();
        assert!(est.is_nested());
        for &i in &g.interior {
            let x = g.nodes[i].x;
            if x <= -8.0 + 1.0 {
                assert!(est.limit[i], "node {i} at x = {x}");
            }
            if x >= -1.0 {
                assert!(!est.limit[i]);
            }
        }
    }

    #[test]
    fn planted_jump_is_flagged() {
        let g = build_grid(DomainSpec::toric(34, 4.0)).unwrap();
        let est = propagating_set(&vec![false; g.boundary.len()], &g, &ConeConstraint::toric(), &[1.0]).unwrap();
        let smooth = GridFunction::from_fn(g.clone(), |x, y| XReal::Finite(x + 0.5 * y));
        assert!(!continuity_region(&smooth, &est, 4.0).unwrap().violation);
        let jump = GridFunction::from_fn(g.clone(), |x, y| XReal::Finite(x + 0.5 * y + if x > -2.0 { 1.0 } else { 0.0 }));
        assert!(continuity_region(&jump, &est, 4.0).unwrap().violation);
    }
}
