use super::{Grid2D, Layout};
use crate::error::{Error, Result};
use crate::xreal::XReal;
use std::f64::consts::PI;
use std::sync::Arc;

/// Node values on a grid, with explicit infinity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Arc<Grid2D>,
    pub values: Vec<XReal>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid2D>, values: Vec<XReal>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: Arc<Grid2D>, v: XReal) -> Self {
        let n = grid.len();
        GridFunction { grid, values: vec![v; n] }
    }

    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64) -> XReal) -> Self {
        let values = grid.nodes.iter().map(|n| f(n.x, n.y)).collect();
        GridFunction { grid, values }
    }

    pub fn from_f64(grid: Arc<Grid2D>, v: &[f64]) -> Result<Self> {
        Self::new(grid, v.iter().map(|&x| XReal::from(x)).collect())
    }

    /// Float view with IEEE infinities.
    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64()).collect()
    }

    pub fn value(&self, i: usize) -> XReal {
        self.values[i]
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    fn zip(&self, other: &GridFunction, f: impl Fn(XReal, XReal) -> Result<XReal>) -> Result<GridFunction> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect::<Result<_>>()?;
        Ok(GridFunction { grid: self.grid.clone(), values })
    }

    pub fn try_add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, XReal::try_add)
    }

    pub fn try_sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, XReal::try_sub)
    }

    pub fn max(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, |a, b| Ok(a.max(b)))
    }

    pub fn min(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, |a, b| Ok(a.min(b)))
    }

    pub fn try_scale(&self, s: f64) -> Result<GridFunction> {
        let values = self.values.iter().map(|v| v.try_scale(s)).collect::<Result<_>>()?;
        Ok(GridFunction { grid: self.grid.clone(), values })
    }

    /// Sup norm of the difference over the given nodes. Infinite entries must agree in flag.
    pub fn sup_diff_on(&self, other: &GridFunction, nodes: &[usize]) -> f64 {
        nodes
            .iter()
            .map(|&i| match (self.values[i], other.values[i]) {
                (XReal::Finite(a), XReal::Finite(b)) => (a - b).abs(),
                (a, b) if a == b => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    pub fn sup_diff(&self, other: &GridFunction) -> f64 {
        let all: Vec<usize> = (0..self.grid.len()).collect();
        self.sup_diff_on(other, &all)
    }

    /// Boundary trace of this field.
    pub fn trace(&self) -> BoundaryTrace {
        let values: Vec<XReal> = self.grid.boundary.iter().map(|&i| self.values[i]).collect();
        let singular = values.iter().map(|v| !v.is_finite()).collect();
        BoundaryTrace { grid: self.grid.clone(), values, singular }
    }
}

/// Values at boundary nodes together with the exceptional mask `E_phi`.
/// Every infinite entry is in the mask; the mask may also hold finite nodes
/// (discontinuity points).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub grid: Arc<Grid2D>,
    pub values: Vec<XReal>,
    pub singular: Vec<bool>,
}

impl BoundaryTrace {
    pub fn new(grid: Arc<Grid2D>, values: Vec<XReal>, singular: Vec<bool>) -> Result<Self> {
        let nb = grid.boundary.len();
        if values.len() != nb || singular.len() != nb {
            return Err(Error::GridMismatch(format!("trace of length {} for {nb} boundary nodes", values.len())));
        }
        if let Some(k) = values.iter().zip(&singular).position(|(v, &s)| !v.is_finite() && !s) {
            return Err(Error::InvalidTrace(format!("boundary node {k} is infinite but not in the exceptional set")));
        }
        Ok(BoundaryTrace { grid, values, singular })
    }

    /// Samples `f(param, x, y)` at every boundary node; infinities join the exceptional set.
    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64, f64) -> XReal) -> Self {
        let values: Vec<XReal> = grid
            .boundary
            .iter()
            .zip(&grid.boundary_param)
            .map(|(&i, &t)| f(t, grid.nodes[i].x, grid.nodes[i].y))
            .collect();
        let singular = values.iter().map(|v| !v.is_finite()).collect();
        BoundaryTrace { grid, values, singular }
    }

    /// Adds finite nodes to the exceptional set.
    pub fn with_exceptional(mut self, extra: &[bool]) -> Result<Self> {
        if extra.len() != self.singular.len() {
            return Err(Error::GridMismatch("exceptional mask length".into()));
        }
        for (s, &e) in self.singular.iter_mut().zip(extra) {
            *s |= e;
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(XReal) -> XReal) -> BoundaryTrace {
        let values: Vec<XReal> = self.values.iter().map(|&v| f(v)).collect();
        let singular = values.iter().zip(&self.singular).map(|(v, &s)| s || !v.is_finite()).collect();
        BoundaryTrace { grid: self.grid.clone(), values, singular }
    }

    /// Extends the trace to a grid function, with `fill` at interior nodes.
    pub fn to_field(&self, fill: XReal) -> GridFunction {
        let mut values = vec![fill; self.grid.len()];
        for (p, &i) in self.grid.boundary.iter().enumerate() {
            values[i] = self.values[p];
        }
        GridFunction { grid: self.grid.clone(), values }
    }
}

fn lerp(a: XReal, b: XReal, t: f64) -> Result<XReal> {
    if t <= 0.0 {
        return Ok(a);
    }
    if t >= 1.0 {
        return Ok(b);
    }
    a.try_scale(1.0 - t)?.try_add(b.try_scale(t)?)
}

/// Value at an arbitrary point: bilinear in `(r, angle)` for polar grids, in `(x, y)` on the lattice.
pub fn interpolate(f: &GridFunction, x: f64, y: f64) -> Result<XReal> {
    let g = &f.grid;
    if !g.contains(x, y) {
        return Err(Error::OutsideDomain(x, y));
    }
    match &g.layout {
        Layout::Polar(p) => {
            let r = x.hypot(y).min(1.0);
            let mut a = y.atan2(x);
            if a < 0.0 {
                a += 2.0 * PI;
            }
            let m = p.n_angular;
            let on_ring = |start: usize, count: usize| -> Result<XReal> {
                let s = a / (2.0 * PI) * count as f64;
                let k = (s.floor() as usize) % count;
                lerp(f.values[start + k], f.values[start + (k + 1) % count], s - s.floor())
            };
            let on_shell = |j: usize| on_ring(p.shell_node(j, 0), m);
            let outer = || on_ring(p.outer_start, p.n_boundary);
            let last = p.n_radial - 1;
            if r >= p.radii[last] {
                let t = (r - p.radii[last]) / (1.0 - p.radii[last]);
                return lerp(on_shell(last)?, outer()?, t);
            }
            if r < p.radii[0] {
                let (inner_val, r0) = match (p.center, p.inner) {
                    (Some(c), _) => (f.values[c], 0.0),
                    (None, Some((start, r0))) => (on_ring(start, p.n_boundary)?, r0),
                    _ => unreachable!("polar grid without center or inner ring"),
                };
                let t = (r - r0) / (p.radii[0] - r0);
                return lerp(inner_val, on_shell(0)?, t);
            }
            let j = p.radii.partition_point(|&rj| rj <= r) - 1;
            let t = (r - p.radii[j]) / (p.radii[j + 1] - p.radii[j]);
            lerp(on_shell(j)?, on_shell(j + 1)?, t)
        }
        Layout::Lattice(l) => {
            let s = (x + l.x_max) / l.h;
            let t = (y + l.x_max) / l.h;
            let (i, j) = (s.floor() as isize, t.floor() as isize);
            let corner = |di: isize, dj: isize| {
                l.node_at(i + di, j + dj).map(|k| f.values[k]).ok_or(Error::OutsideDomain(x, y))
            };
            let (fs, ft) = (s - s.floor(), t - t.floor());
            let bottom = lerp(corner(0, 0)?, corner(1, 0)?, fs)?;
            let top = lerp(corner(0, 1)?, corner(1, 1)?, fs)?;
            lerp(bottom, top, ft)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};

    #[test]
    fn trace_rejects_unflagged_infinity() {
        let g = build_grid(DomainSpec::disk(8, 4, 8)).unwrap();
        let mut v = vec![XReal::ZERO; 8];
        v[3] = XReal::PosInf;
        assert!(BoundaryTrace::new(g.clone(), v.clone(), vec![false; 8]).is_err());
        let mut s = vec![false; 8];
        s[3] = true;
        assert!(BoundaryTrace::new(g, v, s).is_ok());
    }

    #[test]
    fn interpolation_is_exact_on_lattice_affine() {
        let g = build_grid(DomainSpec::toric(32, 6.0)).unwrap();
        let f = GridFunction::from_fn(g, |x, y| XReal::Finite(2.0 * x - 0.5 * y + 1.0));
        let v = interpolate(&f, -2.337, -1.1).unwrap().as_finite().unwrap();
        assert!((v - (2.0 * -2.337 + 0.55 + 1.0)).abs() < 1e-12);
        assert!(interpolate(&f, 0.5, 0.5).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_polar_affine() {
        let g = build_grid(DomainSpec::disk(32, 16, 64)).unwrap();
        let f = GridFunction::from_fn(g, |x, y| XReal::Finite(3.0 * x.hypot(y) + 1.0));
        for (x, y) in [(0.3, 0.2), (0.01, 0.0), (0.0, 0.999), (-0.7, -0.1)] {
            let v = interpolate(&f, x, y).unwrap().as_finite().unwrap();
            assert!((v - (3.0 * f64::hypot(x, y) + 1.0)).abs() < 1e-12, "{x} {y}");
        }
        assert!(interpolate(&f, 1.1, 0.0).is_err());
    }
}
