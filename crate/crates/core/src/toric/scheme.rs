use crate::envelope::{cone_violation, upper_envelope, ConeConstraint, ObstacleSpec, DIRECTIONS};
use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, Grid2D, GridFunction, LatticeLayout};
use crate::linalg::solve_averaging;
use crate::xreal::XReal;
use rayon::prelude::*;
use std::sync::Arc;

/// Orthogonal direction pairs (indices into `DIRECTIONS`), equal lengths within a pair.
pub const PAIRS: [(usize, usize); 4] = [(0, 1), (2, 3), (4, 7), (5, 6)];

pub const TOL_MA: f64 = 1e-10;
/// Cone tolerance for fields fed to the operator.
pub const CONE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ToricField {
    pub field: GridFunction,
    pub convexity_violation: f64,
    pub monotonicity_violation: f64,
}

impl ToricField {
    pub fn new(field: GridFunction) -> Result<Self> {
        let (c, m) = cone_violation(&field, &ConeConstraint::toric())?;
        Ok(ToricField { field, convexity_violation: c, monotonicity_violation: m })
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.field.grid
    }

    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violation <= CONE_TOL
    }
}

#[derive(Debug, Clone)]
pub struct MeasureDensity {
    pub grid: Arc<Grid2D>,
    /// Density per node; zero off the interior.
    pub density: Vec<f64>,
    pub cell_area: f64,
    pub total_mass: f64,
    pub pluripolar_charge: bool,
}

impl MeasureDensity {
    pub fn from_density(grid: Arc<Grid2D>, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} densities for {} nodes", density.len(), grid.len())));
        }
        if let Some(v) = density.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Precondition(format!("density {v} is negative")));
        }
        let h = grid.h();
        let mut density = density;
        for (i, d) in density.iter_mut().enumerate() {
            if !grid.is_interior(i) {
                *d = 0.0;
            }
        }
        let pluripolar_charge = density.iter().any(|d| d.is_infinite());
        let total_mass = density.iter().sum::<f64>() * h * h;
        Ok(MeasureDensity { grid, density, cell_area: h * h, total_mass, pluripolar_charge })
    }

    pub fn zero(grid: Arc<Grid2D>) -> Self {
        let n = grid.len();
        Self::from_density(grid, vec![0.0; n]).expect("zero density")
    }

    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let d = grid.nodes.iter().map(|n| f(n.x, n.y)).collect();
        Self::from_density(grid, d)
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.density[i] * self.cell_area
    }
}

fn lattice(grid: &Grid2D) -> Result<&LatticeLayout> {
    grid.lattice().ok_or_else(|| Error::Unsupported("Monge-Ampere scheme needs the toric lattice".into()))
}

/// Neighbour indices `(+e, -e)` for each of the eight directions at node `i`.
fn neighbours(l: &LatticeLayout, i: usize) -> Result<[(usize, usize); 8]> {
    let (ci, cj) = l.coords[i];
    let mut out = [(0, 0); 8];
    for (d, &(dx, dy)) in DIRECTIONS.iter().enumerate() {
        let p = l.node_at(ci as isize + dx, cj as isize + dy);
        let m = l.node_at(ci as isize - dx, cj as isize - dy);
        match (p, m) {
            (Some(p), Some(m)) => out[d] = (p, m),
            _ => return Err(Error::Invariant(format!("node {i} too close to the lattice edge"))),
        }
    }
    Ok(out)
}

fn len2(d: usize) -> f64 {
    let (x, y) = DIRECTIONS[d];
    (x * x + y * y) as f64
}

/// Discrete determinant at one node: min over pairs of products of positive second differences.
fn det_at(u: &[f64], nb: &[(usize, usize); 8], i: usize, h: f64) -> f64 {
    let second = |d: usize| ((u[nb[d].0] + u[nb[d].1] - 2.0 * u[i]) / (len2(d) * h * h)).max(0.0);
    PAIRS.iter().map(|&(a, b)| second(a) * second(b)).fold(f64::INFINITY, f64::min)
}

/// Per-node Monge-Ampere density of the reduced profile.
pub fn ma_operator(f: &ToricField) -> Result<MeasureDensity> {
    if f.convexity_violation > CONE_TOL {
        return Err(Error::Precondition(format!("field violates convexity by {:e}", f.convexity_violation)));
    }
    let g = f.grid();
    let l = lattice(g)?;
    let u = f.field.to_f64();
    let h = g.h();
    let mut d = vec![0.0; g.len()];
    let vals: Vec<(usize, f64)> = g
        .interior
        .par_iter()
        .map(|&i| neighbours(l, i).map(|nb| (i, det_at(&u, &nb, i, h))))
        .collect::<Result<_>>()?;
    for (i, v) in vals {
        d[i] = v;
    }
    MeasureDensity::from_density(g.clone(), d)
}

#[derive(Debug, Clone)]
pub enum Init {
    /// Homogeneous (convex) envelope of the boundary data.
    ConvexHull,
    /// Constant equal to the largest boundary value.
    BoundaryMax,
    /// Caller start; must lie above the solution.
    Given(GridFunction),
}

#[derive(Debug, Clone, Copy)]
pub struct MaOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MaOptions {
    fn default() -> Self {
        MaOptions { tol: TOL_MA, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct MaSolve {
    pub field: ToricField,
    pub iterations: usize,
    /// Final sup-norm fixed-point residual.
    pub residual: f64,
    pub history: Vec<f64>,
}

struct Local {
    nb: Vec<[(usize, usize); 8]>,
    /// Per free node and pair: `density * |e|^4 h^4 / 4`.
    c: Vec<[f64; 4]>,
}

impl Local {
    /// Fixed-point map value at free node `k`, with the minimizing pair and its weights.
    fn update(&self, u: &[f64], k: usize) -> (f64, usize, f64, f64, f64) {
        let nb = &self.nb[k];
        let mut best = (f64::INFINITY, 0, 0.5, 0.5, 0.0);
        for (p, &(da, db)) in PAIRS.iter().enumerate() {
            let a = 0.5 * (u[nb[da].0] + u[nb[da].1]);
            let b = 0.5 * (u[nb[db].0] + u[nb[db].1]);
            let half = 0.5 * (a - b);
            let s = (half * half + self.c[k][p]).sqrt();
            let g = 0.5 * (a + b) - s;
            if g < best.0 {
                let (wa, wb, r) = if s > 0.0 { (0.5 - half / (2.0 * s), 0.5 + half / (2.0 * s), -self.c[k][p] / s) } else { (0.5, 0.5, 0.0) };
                best = (g, p, wa, wb, r);
            }
        }
        best
    }
}

fn sup_residual(local: &Local, free: &[usize], u: &[f64]) -> f64 {
    (0..free.len()).into_par_iter().map(|k| (local.update(u, k).0 - u[free[k]]).abs()).reduce(|| 0.0, f64::max)
}

fn jacobi(local: &Local, free: &[usize], u: &[f64]) -> (Vec<f64>, f64) {
    let vals: Vec<f64> = (0..free.len()).into_par_iter().map(|k| local.update(u, k).0).collect();
    let mut next = u.to_vec();
    let mut diff = 0.0f64;
    for (k, &i) in free.iter().enumerate() {
        diff = diff.max((vals[k] - u[i]).abs());
        next[i] = vals[k];
    }
    (next, diff)
}

/// Dirichlet problem `ma_operator(u) = mu`, `u = phi` on the boundary collar.
pub fn solve_dirichlet_bounded(phi: &BoundaryTrace, mu: &MeasureDensity, init: Init) -> Result<MaSolve> {
    solve_dirichlet_with(phi, mu, init, MaOptions::default())
}

pub fn solve_dirichlet_with(phi: &BoundaryTrace, mu: &MeasureDensity, init: Init, opts: MaOptions) -> Result<MaSolve> {
    let g = phi.grid.clone();
    if *mu.grid != *g {
        return Err(Error::GridMismatch("density and data on different grids".into()));
    }
    let l = lattice(&g)?;
    if phi.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("bounded solve needs finite boundary data".into()));
    }
    if mu.pluripolar_charge {
        return Err(Error::Precondition("density charges a pluripolar set".into()));
    }
    let h = g.h();
    let free = g.interior.clone();
    let nb = free.iter().map(|&i| neighbours(l, i)).collect::<Result<Vec<_>>>()?;
    let c = free
        .iter()
        .map(|&i| {
            let mut c = [0.0; 4];
            for (p, &(da, _)) in PAIRS.iter().enumerate() {
                let l2 = len2(da) * h * h;
                c[p] = mu.density[i] * l2 * l2 / 4.0;
            }
            c
        })
        .collect();
    let local = Local { nb, c };
    let mut u = match init {
        Init::ConvexHull => {
            let inf = GridFunction::constant(g.clone(), XReal::PosInf);
            upper_envelope(&ConeConstraint::convex(8), &ObstacleSpec::new(inf, phi.clone())?)?.field.to_f64()
        }
        Init::BoundaryMax => {
            let top = phi.values.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
            let mut u = vec![top; g.len()];
            for (p, &i) in g.boundary.iter().enumerate() {
                u[i] = phi.values[p].to_f64();
            }
            u
        }
        Init::Given(f) => {
            f.same_grid(&GridFunction::constant(g.clone(), XReal::Finite(0.0)))?;
            let mut u = f.to_f64();
            for (p, &i) in g.boundary.iter().enumerate() {
                u[i] = phi.values[p].to_f64();
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Precondition("start field must be finite".into()));
            }
            u
        }
    };
    let chain = (free.len() as f64).sqrt().ceil() as usize;
    let mut history = Vec::new();
    let mut res = sup_residual(&local, &free, &u);
    history.push(res);
    let mut iterations = 0;
    let mut theta = 1.0;
    // Newton steps on the concave fixed-point map
    while res > opts.tol && iterations < opts.max_iter {
        let mut rows = Vec::with_capacity(free.len());
        let mut rhs = Vec::with_capacity(free.len());
        for k in 0..free.len() {
            let (_, p, wa, wb, r) = local.update(&u, k);
            let (da, db) = PAIRS[p];
            let nb = &local.nb[k];
            rows.push(vec![(nb[da].0, 0.5 * wa), (nb[da].1, 0.5 * wa), (nb[db].0, 0.5 * wb), (nb[db].1, 0.5 * wb)]);
            rhs.push(r);
        }
        let step = solve_averaging(&free, &rows, &rhs, &u)?;
        let mut cand: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + theta * (b - a)).collect();
        for _ in 0..chain {
            let (next, diff) = jacobi(&local, &free, &cand);
            cand = next;
            if diff <= opts.tol {
                break;
            }
        }
        let r = sup_residual(&local, &free, &cand);
        iterations += 1;
        if !r.is_finite() {
            return Err(Error::NoConvergence { iterations, residual: r });
        }
        if r > res && theta > 1e-3 {
            theta *= 0.5;
            history.push(r);
            continue;
        }
        theta = 1.0;
        u = cand;
        let stalled = r > 0.5 * res;
        res = r;
        history.push(res);
        if stalled {
            // quadratic phase is over; finish with plain sweeps
            break;
        }
    }
    while res > opts.tol && iterations < opts.max_iter {
        let (next, diff) = jacobi(&local, &free, &u);
        u = next;
        res = diff;
        iterations += 1;
        history.push(res);
    }
    if res > opts.tol {
        return Err(Error::NoConvergence { iterations, residual: res });
    }
    let field = ToricField::new(GridFunction::from_f64(g, &u)?)?;
    Ok(MaSolve { field, iterations, residual: res, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};

    fn field(g: &Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> ToricField {
        ToricField::new(GridFunction::from_fn(g.clone(), |x, y| XReal::Finite(f(x, y)))).unwrap()
    }

    #[test]
    fn operator_on_closed_forms() {
        let g = build_grid(DomainSpec::toric(40, 4.0)).unwrap();
        let q = ma_operator(&field(&g, |x, y| 0.5 * (x * x + y * y))).unwrap();
        assert!(g.interior.iter().all(|&i| (q.density[i] - 1.0).abs() < 1e-9));
        let a = ma_operator(&field(&g, |x, _| x)).unwrap();
        assert!(g.interior.iter().all(|&i| a.density[i].abs() < 1e-9));
        let e = ma_operator(&field(&g, |x, y| (2.0 * x).exp() + (2.0 * y).exp())).unwrap();
        let h = g.h();
        for &i in &g.interior {
            let n = &g.nodes[i];
            let exact = 16.0 * (2.0 * n.x + 2.0 * n.y).exp();
            assert!((e.density[i] - exact).abs() <= exact * h * h, "node {i}");
        }
    }

    #[test]
    fn homogeneous_affine_is_exact() {
        let g = build_grid(DomainSpec::toric(32, 4.0)).unwrap();
        let phi = BoundaryTrace::from_fn(g.clone(), |_, x, _| XReal::Finite(x));
        let s = solve_dirichlet_bounded(&phi, &MeasureDensity::zero(g.clone()), Init::BoundaryMax).unwrap();
        let err = g.interior.iter().map(|&i| (s.field.field.values[i].to_f64() - g.nodes[i].x).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn quadratic_is_recovered() {
        let g = build_grid(DomainSpec::toric(34, 4.0)).unwrap();
        let q = |x: f64, y: f64| 0.5 * (x * x + y * y);
        let phi = BoundaryTrace::from_fn(g.clone(), |_, x, y| XReal::Finite(q(x, y)));
        let mu = MeasureDensity::from_fn(g.clone(), |_, _| 1.0).unwrap();
        let s = solve_dirichlet_bounded(&phi, &mu, Init::ConvexHull).unwrap();
        let err = g.interior.iter().map(|&i| (s.field.field.values[i].to_f64() - q(g.nodes[i].x, g.nodes[i].y)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let t = solve_dirichlet_bounded(&phi, &mu, Init::BoundaryMax).unwrap();
        assert!(t.field.field.sup_diff(&s.field.field) < 1e-7);
    }

    #[test]
    fn cone_violation_is_rejected() {
        let g = build_grid(DomainSpec::toric(24, 3.0)).unwrap();
        assert!(ma_operator(&field(&g, |x, y| -(x * x + y * y))).is_err());
    }
}
