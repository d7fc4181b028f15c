use crate::error::{Error, Result};
use crate::grid::{Grid2D, Layout};
use serde::{Deserialize, Serialize};

/// Lattice directions in the order used everywhere: axes, diagonals, knight moves.
pub const DIRECTIONS: [(isize, isize); 8] = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeKind {
    /// Node value at most the weighted stencil average (polar 5-point, or lattice 5-point).
    Subharmonic2d,
    /// Midpoint convexity along `d` directions plus nondecreasing in both coordinates.
    ConvexMonotoneToric,
    /// Midpoint convexity only; used for profiles that are not monotone.
    ConvexToric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeConstraint {
    pub kind: ConeKind,
    /// Stencil reach in lattice steps.
    pub width: usize,
    /// Number of convexity directions.
    pub directions: usize,
}

impl ConeConstraint {
    pub fn subharmonic() -> Self {
        ConeConstraint { kind: ConeKind::Subharmonic2d, width: 1, directions: 4 }
    }

    pub fn toric() -> Self {
        Self::toric_with(8)
    }

    pub fn toric_with(directions: usize) -> Self {
        let width = if directions > 4 { 2 } else { 1 };
        ConeConstraint { kind: ConeKind::ConvexMonotoneToric, width, directions }
    }

    pub fn convex(directions: usize) -> Self {
        ConeConstraint { kind: ConeKind::ConvexToric, ..Self::toric_with(directions) }
    }

    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        match (self.kind, &grid.layout) {
            (ConeKind::Subharmonic2d, _) => Ok(()),
            (_, Layout::Polar(_)) => Err(Error::Unsupported("convex cones need the toric lattice".into())),
            (_, Layout::Lattice(l)) => {
                if ![2, 4, 8].contains(&self.directions) {
                    return Err(Error::Precondition(format!("{} stencil directions; use 2, 4 or 8", self.directions)));
                }
                if self.width > l.reach {
                    return Err(Error::Precondition("stencil wider than the lattice collar".into()));
                }
                Ok(())
            }
        }
    }
}

/// One linear constraint `u_i <= sum w_k u_{j_k}` with `sum w_k = 1`.
pub type Average = Vec<(usize, f64)>;

/// Constraints of the cone at interior node `i`.
pub fn stencil(grid: &Grid2D, cone: &ConeConstraint, i: usize) -> Result<Vec<Average>> {
    match (&grid.layout, cone.kind) {
        (Layout::Polar(p), _) => {
            let m = p.n_angular;
            if Some(i) == p.center {
                let w = 1.0 / m as f64;
                return Ok(vec![(0..m).map(|a| (p.shell_node(0, a), w)).collect()]);
            }
            let local = i - p.shell_start;
            let (j, a) = (local / m, local % m);
            let r = p.radii[j];
            let stride = p.ring_stride();
            let (outer, d_out) = if j + 1 < p.n_radial {
                (p.shell_node(j + 1, a), p.radii[j + 1] - r)
            } else {
                (p.outer_node(a * stride), 1.0 - r)
            };
            let (inner, d_in) = match (j, p.center, p.inner) {
                (0, Some(c), _) => (c, r),
                (0, None, Some((start, r0))) => (start + a * stride, r - r0),
                _ => (p.shell_node(j - 1, a), r - p.radii[j - 1]),
            };
            let span = 0.5 * (d_out + d_in);
            let w_out = (r + 0.5 * d_out) / (r * d_out * span);
            let w_in = (r - 0.5 * d_in) / (r * d_in * span);
            let dalpha = 2.0 * std::f64::consts::PI / m as f64;
            let w_ang = 1.0 / (r * r * (2.0 - 2.0 * dalpha.cos()));
            let total = w_out + w_in + 2.0 * w_ang;
            Ok(vec![vec![
                (outer, w_out / total),
                (inner, w_in / total),
                (p.shell_node(j, a + 1), w_ang / total),
                (p.shell_node(j, a + m - 1), w_ang / total),
            ]])
        }
        (Layout::Lattice(l), kind) => {
            let (ci, cj) = l.coords[i];
            let (ci, cj) = (ci as isize, cj as isize);
            let at = |di: isize, dj: isize| {
                l.node_at(ci + di, cj + dj)
                    .ok_or_else(|| Error::Invariant(format!("stencil of node {i} leaves the lattice")))
            };
            let mut out = Vec::new();
            if kind == ConeKind::Subharmonic2d {
                out.push(vec![(at(1, 0)?, 0.25), (at(-1, 0)?, 0.25), (at(0, 1)?, 0.25), (at(0, -1)?, 0.25)]);
                return Ok(out);
            }
            for &(dx, dy) in &DIRECTIONS[..cone.directions] {
                out.push(vec![(at(dx, dy)?, 0.5), (at(-dx, -dy)?, 0.5)]);
            }
            if kind == ConeKind::ConvexMonotoneToric {
                out.push(vec![(at(1, 0)?, 1.0)]);
                out.push(vec![(at(0, 1)?, 1.0)]);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};

    #[test]
    fn polar_stencil_is_exact_on_re_z() {
        let g = build_grid(DomainSpec::disk(24, 10, 48)).unwrap();
        let cone = ConeConstraint::subharmonic();
        for &i in &g.interior {
            let st = stencil(&g, &cone, i).unwrap();
            let avg: f64 = st[0].iter().map(|&(k, w)| w * g.nodes[k].x).sum();
            assert!((avg - g.nodes[i].x).abs() < 1e-13, "node {i}");
            assert!(st[0].iter().all(|&(_, w)| w > 0.0));
        }
    }

    #[test]
    fn toric_stencil_counts() {
        let g = build_grid(DomainSpec::toric(24, 6.0)).unwrap();
        let i = g.interior[g.interior.len() / 2];
        assert_eq!(stencil(&g, &ConeConstraint::toric(), i).unwrap().len(), 10);
        assert_eq!(stencil(&g, &ConeConstraint::convex(4), i).unwrap().len(), 4);
        assert!(ConeConstraint::toric().validate(&build_grid(DomainSpec::disk(8, 4, 8)).unwrap()).is_err());
    }
}
