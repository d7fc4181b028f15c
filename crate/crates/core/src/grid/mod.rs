//! Discretized domains: polar grids for the disk and annulus, and the truncated
//! log-coordinate lattice for the toric ball.

mod field;
mod io;
pub(crate) mod quadrature;

pub use field::{interpolate, BoundaryTrace, GridFunction};
pub use io::{field_from_csv, field_to_csv};
pub use quadrature::{boundary_quadrature, singular_fit, SingularFit};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Aliasing budget for the periodic trapezoid rule. The outermost shell of a disk
/// grid sits where `r^N` drops below this, so boundary sums stay spectrally accurate.
pub const ALIAS_BUDGET: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    UnitDisk,
    Annulus { r_inner: f64 },
    ToricBallLog { x_max: f64 },
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::UnitDisk => "unit-disk",
            DomainKind::Annulus { .. } => "annulus",
            DomainKind::ToricBallLog { .. } => "toric-ball-log",
        }
    }
}

/// Domain kind plus resolution. For polar grids `nx` counts angles and `ny` shells;
/// for the toric lattice both count nodes per axis and must agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub kind: DomainKind,
    pub nx: usize,
    pub ny: usize,
    /// Nodes per boundary circle (polar grids only). Defaults to `nx`.
    #[serde(default)]
    pub n_boundary: Option<usize>,
}

impl DomainSpec {
    pub fn disk(n_angular: usize, n_radial: usize, n_boundary: usize) -> Self {
        DomainSpec { kind: DomainKind::UnitDisk, nx: n_angular, ny: n_radial, n_boundary: Some(n_boundary) }
    }

    pub fn annulus(r_inner: f64, n_angular: usize, n_radial: usize, n_boundary: usize) -> Self {
        DomainSpec { kind: DomainKind::Annulus { r_inner }, nx: n_angular, ny: n_radial, n_boundary: Some(n_boundary) }
    }

    pub fn toric(n: usize, x_max: f64) -> Self {
        DomainSpec { kind: DomainKind::ToricBallLog { x_max }, nx: n, ny: n, n_boundary: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRole {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    pub role: NodeRole,
}

/// Where a boundary node sits on the toric lattice boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToricFace {
    /// Truncation face `x = -x_max` (and its collar layers).
    X,
    /// Truncation face `y = -x_max`.
    Y,
    /// Collar of the curve `e^{2x} + e^{2y} = 1`.
    Curve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarLayout {
    pub n_angular: usize,
    pub n_radial: usize,
    pub n_boundary: usize,
    /// Shell radii, increasing.
    pub radii: Vec<f64>,
    pub center: Option<usize>,
    /// Node index of shell 0, angle 0. Shell `j`, angle `m` is `shell_start + j*n_angular + m`.
    pub shell_start: usize,
    /// Node index of the first node on the unit circle.
    pub outer_start: usize,
    /// Inner circle (annulus): start index and radius.
    pub inner: Option<(usize, f64)>,
}

impl PolarLayout {
    pub fn shell_node(&self, j: usize, m: usize) -> usize {
        self.shell_start + j * self.n_angular + (m % self.n_angular)
    }

    /// Boundary ring nodes per grid angle.
    pub fn ring_stride(&self) -> usize {
        self.n_boundary / self.n_angular
    }

    pub fn outer_node(&self, k: usize) -> usize {
        self.outer_start + (k % self.n_boundary)
    }

    pub fn boundary_angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_boundary as f64
    }

    pub fn grid_angle(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.n_angular as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLayout {
    pub n: usize,
    pub h: f64,
    pub x_max: f64,
    /// Stencil reach in lattice steps.
    pub reach: usize,
    /// Lattice site `i + n*j` to node index.
    pub site: Vec<Option<usize>>,
    /// Node index to lattice coordinates.
    pub coords: Vec<(usize, usize)>,
    /// Face tag per node (`None` for interior nodes).
    pub face: Vec<Option<ToricFace>>,
}

impl LatticeLayout {
    pub fn coord(&self, i: usize) -> f64 {
        -self.x_max + i as f64 * self.h
    }

    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.n || j as usize >= self.n {
            return None;
        }
        self.site[i as usize + self.n * j as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Polar(PolarLayout),
    Lattice(LatticeLayout),
}

/// A built grid. Interior and boundary index lists are disjoint and cover all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub spec: DomainSpec,
    pub nodes: Vec<Node>,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    /// Boundary parameter per entry of `boundary` (angle on circles).
    pub boundary_param: Vec<f64>,
    /// Position of a node inside `boundary`, if it is a boundary node.
    pub boundary_pos: Vec<Option<usize>>,
    pub layout: Layout,
}

impl Grid2D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.nodes[i].role == NodeRole::Interior
    }

    /// Characteristic spacing: the lattice step, or the radial shell gap for polar grids.
    pub fn h(&self) -> f64 {
        match &self.layout {
            Layout::Lattice(l) => l.h,
            Layout::Polar(p) => {
                let r0 = p.inner.map(|(_, r)| r).unwrap_or(0.0);
                (p.radii[p.n_radial - 1] - r0) / p.n_radial as f64
            }
        }
    }

    pub fn polar(&self) -> Option<&PolarLayout> {
        match &self.layout {
            Layout::Polar(p) => Some(p),
            _ => None,
        }
    }

    pub fn lattice(&self) -> Option<&LatticeLayout> {
        match &self.layout {
            Layout::Lattice(l) => Some(l),
            _ => None,
        }
    }

    /// Number of shell nodes of a polar grid (excludes the disk center).
    pub fn shell_node_count(&self) -> usize {
        self.polar().map(|p| p.n_angular * p.n_radial).unwrap_or(0)
    }

    /// True if the point lies in the closed (truncated) domain.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        const SLACK: f64 = 1e-12;
        match self.spec.kind {
            DomainKind::UnitDisk => x.hypot(y) <= 1.0 + SLACK,
            DomainKind::Annulus { r_inner } => {
                let r = x.hypot(y);
                r <= 1.0 + SLACK && r >= r_inner - SLACK
            }
            DomainKind::ToricBallLog { x_max } => {
                x >= -x_max - SLACK && y >= -x_max - SLACK && (2.0 * x).exp() + (2.0 * y).exp() <= 1.0 + SLACK
            }
        }
    }
}

/// Outermost shell radius of a disk grid.
pub fn disk_outer_shell(n_radial: usize, n_boundary: usize) -> f64 {
    let geometric = n_radial as f64 / (n_radial as f64 + 1.0);
    let alias = ALIAS_BUDGET.powf(1.0 / n_boundary as f64);
    geometric.min(alias)
}

pub fn build_grid(spec: DomainSpec) -> Result<Arc<Grid2D>> {
    match spec.kind {
        DomainKind::UnitDisk => build_polar(spec, None),
        DomainKind::Annulus { r_inner } => {
            if !(r_inner > 0.0 && r_inner < 1.0) {
                return Err(Error::InvalidDomain(format!("inner radius {r_inner} not in (0, 1)")));
            }
            build_polar(spec, Some(r_inner))
        }
        DomainKind::ToricBallLog { x_max } => build_lattice(spec, x_max, 2),
    }
    .map(Arc::new)
}

fn build_polar(spec: DomainSpec, r_inner: Option<f64>) -> Result<Grid2D> {
    let (m, nr) = (spec.nx, spec.ny);
    if m < 3 || nr < 1 {
        return Err(Error::InvalidDomain(format!("polar grid needs >= 3 angles and >= 1 shell, got {m}x{nr}")));
    }
    let nb = spec.n_boundary.unwrap_or(m);
    if nb < m || nb % m != 0 {
        return Err(Error::InvalidDomain(format!("boundary count {nb} must be a positive multiple of {m}")));
    }
    let radii: Vec<f64> = match r_inner {
        None => {
            let r_out = disk_outer_shell(nr, nb);
            (1..=nr).map(|j| r_out * j as f64 / nr as f64).collect()
        }
        Some(r0) => (1..=nr).map(|j| r0 + (1.0 - r0) * j as f64 / (nr as f64 + 1.0)).collect(),
    };
    let mut nodes = Vec::new();
    let center = if r_inner.is_none() {
        nodes.push(Node { x: 0.0, y: 0.0, role: NodeRole::Interior });
        Some(0)
    } else {
        None
    };
    let shell_start = nodes.len();
    for &r in &radii {
        for k in 0..m {
            let a = 2.0 * PI * k as f64 / m as f64;
            nodes.push(Node { x: r * a.cos(), y: r * a.sin(), role: NodeRole::Interior });
        }
    }
    let mut boundary = Vec::new();
    let mut boundary_param = Vec::new();
    let outer_start = nodes.len();
    let mut push_ring = |nodes: &mut Vec<Node>, r: f64| {
        for k in 0..nb {
            let a = 2.0 * PI * k as f64 / nb as f64;
            boundary.push(nodes.len());
            boundary_param.push(a);
            nodes.push(Node { x: r * a.cos(), y: r * a.sin(), role: NodeRole::Boundary });
        }
    };
    push_ring(&mut nodes, 1.0);
    let inner = r_inner.map(|r0| {
        let start = nodes.len();
        push_ring(&mut nodes, r0);
        (start, r0)
    });
    let interior = (0..outer_start).collect();
    let mut boundary_pos = vec![None; nodes.len()];
    for (p, &i) in boundary.iter().enumerate() {
        boundary_pos[i] = Some(p);
    }
    let layout = Layout::Polar(PolarLayout {
        n_angular: m,
        n_radial: nr,
        n_boundary: nb,
        radii,
        center,
        shell_start,
        outer_start,
        inner,
    });
    Ok(Grid2D { spec, nodes, interior, boundary, boundary_param, boundary_pos, layout })
}

fn build_lattice(spec: DomainSpec, x_max: f64, reach: usize) -> Result<Grid2D> {
    let n = spec.nx;
    if spec.ny != n {
        return Err(Error::InvalidDomain(format!("toric lattice must be square, got {}x{}", spec.nx, spec.ny)));
    }
    if n < 2 * reach + 4 {
        return Err(Error::InvalidDomain(format!("toric lattice needs at least {} nodes per axis", 2 * reach + 4)));
    }
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::InvalidDomain(format!("window {x_max} must be positive")));
    }
    let h = x_max / (n - 1 - reach) as f64;
    let coord = |i: usize| -x_max + i as f64 * h;
    let inside = |i: usize, j: usize| (2.0 * coord(i)).exp() + (2.0 * coord(j)).exp() < 1.0;
    let is_interior = |i: usize, j: usize| i >= reach && j >= reach && inside(i, j);
    let mut role = vec![None; n * n];
    for j in 0..n {
        for i in 0..n {
            if is_interior(i, j) {
                role[i + n * j] = Some(NodeRole::Interior);
            }
        }
    }
    let r = reach as isize;
    for j in 0..n {
        for i in 0..n {
            if role[i + n * j].is_some() {
                continue;
            }
            let near = (-r..=r).any(|dj| {
                (-r..=r).any(|di| {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n && is_interior(a as usize, b as usize)
                })
            });
            if near {
                role[i + n * j] = Some(NodeRole::Boundary);
            }
        }
    }
    let mut nodes = Vec::new();
    let mut site = vec![None; n * n];
    let mut coords = Vec::new();
    let mut face = Vec::new();
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut boundary_param = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let Some(ro) = role[i + n * j] else { continue };
            let idx = nodes.len();
            site[i + n * j] = Some(idx);
            coords.push((i, j));
            let (x, y) = (coord(i), coord(j));
            nodes.push(Node { x, y, role: ro });
            match ro {
                NodeRole::Interior => {
                    interior.push(idx);
                    face.push(None);
                }
                NodeRole::Boundary => {
                    boundary.push(idx);
                    let f = if i < reach {
                        ToricFace::X
                    } else if j < reach {
                        ToricFace::Y
                    } else {
                        ToricFace::Curve
                    };
                    boundary_param.push(match f {
                        ToricFace::X => y,
                        ToricFace::Y => x,
                        ToricFace::Curve => y.exp().atan2(x.exp()),
                    });
                    face.push(Some(f));
                }
            }
        }
    }
    let mut boundary_pos = vec![None; nodes.len()];
    for (p, &i) in boundary.iter().enumerate() {
        boundary_pos[i] = Some(p);
    }
    let layout = Layout::Lattice(LatticeLayout { n, h, x_max, reach, site, coords, face });
    Ok(Grid2D { spec, nodes, interior, boundary, boundary_param, boundary_pos, layout })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_counts() {
        let g = build_grid(DomainSpec::disk(16, 16, 16)).unwrap();
        assert_eq!(g.shell_node_count(), 256);
        assert_eq!(g.boundary.len(), 16);
        assert_eq!(g.interior.len() + g.boundary.len(), g.len());
    }

    #[test]
    fn annulus_has_two_rings() {
        let g = build_grid(DomainSpec::annulus(0.5, 32, 32, 32)).unwrap();
        assert_eq!(g.boundary.len(), 64);
        assert!(g.polar().unwrap().center.is_none());
    }

    #[test]
    fn toric_interior_inside_curve() {
        let g = build_grid(DomainSpec::toric(64, 8.0)).unwrap();
        for &i in &g.interior {
            let n = g.nodes[i];
            assert!((2.0 * n.x).exp() + (2.0 * n.y).exp() < 1.0);
        }
        let l = g.lattice().unwrap();
        assert!((l.coord(0) + 8.0).abs() < 1e-15);
        assert!(!g.boundary.is_empty());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(build_grid(DomainSpec::disk(16, 16, 24)).is_err());
        assert!(build_grid(DomainSpec::annulus(1.5, 8, 8, 8)).is_err());
        assert!(build_grid(DomainSpec { kind: DomainKind::ToricBallLog { x_max: 8.0 }, nx: 32, ny: 16, n_boundary: None }).is_err());
    }
}
