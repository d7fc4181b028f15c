use super::scheme::{solve_dirichlet_bounded, Init, MeasureDensity, ToricField};
use crate::envelope::{is_bpluripolar, upper_envelope, ConeConstraint, ObstacleSpec};
use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, GridFunction};
use crate::xreal::XReal;

pub const LADDER_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MAProblem {
    /// May be infinite on the singular set `E_phi`.
    pub phi: BoundaryTrace,
    pub mu: MeasureDensity,
    /// Strictly positive, concave and nonincreasing in both coordinates.
    pub majorant: Option<GridFunction>,
    pub minorant: Option<GridFunction>,
}

impl MAProblem {
    pub fn new(phi: BoundaryTrace, mu: MeasureDensity) -> Result<Self> {
        if *phi.grid != *mu.grid {
            return Err(Error::GridMismatch("data and density on different grids".into()));
        }
        let singular: Vec<bool> = phi.values.iter().map(|v| !v.is_finite()).collect();
        if singular.iter().any(|&s| s) {
            let (ok, ev) = is_bpluripolar(&singular, &phi.grid, &ConeConstraint::toric())?;
            if !ok {
                return Err(Error::Precondition(format!("singular set of the data is not b-pluripolar (evidence {ev:e})")));
            }
        }
        Ok(MAProblem { phi, mu, majorant: None, minorant: None })
    }

    pub fn with_majorant(mut self, v: GridFunction) -> Result<Self> {
        if v.values.iter().any(|x| !(x.to_f64() > 0.0) || !x.is_finite()) {
            return Err(Error::Precondition("majorant must be finite and strictly positive".into()));
        }
        self.majorant = Some(v);
        Ok(self)
    }

    pub fn with_minorant(mut self, m: GridFunction) -> Self {
        self.minorant = Some(m);
        self
    }
}

#[derive(Debug, Clone)]
pub struct MaLadder {
    pub levels: Vec<f64>,
    pub rungs: Vec<ToricField>,
    /// Sup distance between consecutive rungs (first entry 0).
    pub steps: Vec<f64>,
    /// Upper ladder only: sup |w_k - U_k| per rung.
    pub identity_gaps: Vec<f64>,
    pub limit: GridFunction,
    /// Last step, a proxy for the distance to the limit.
    pub residual: f64,
}

impl MaLadder {
    pub fn residual_csv(&self) -> String {
        let mut s = String::from("k,sup_residual\n");
        for (k, d) in self.levels.iter().zip(&self.steps) {
            s.push_str(&format!("{k},{d:e}\n"));
        }
        s
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() || levels.windows(2).any(|w| !(w[1] > w[0])) || levels.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Precondition("levels must be positive and strictly increasing".into()));
    }
    Ok(())
}

fn solve_rungs(prob: &MAProblem, levels: &[f64], clip: impl Fn(XReal, f64) -> XReal) -> Result<Vec<ToricField>> {
    levels
        .iter()
        .map(|&k| {
            let data = prob.phi.map(|v| clip(v, k));
            Ok(solve_dirichlet_bounded(&data, &prob.mu, Init::ConvexHull)?.field)
        })
        .collect()
}

fn steps(rungs: &[ToricField]) -> Vec<f64> {
    std::iter::once(0.0).chain(rungs.windows(2).map(|w| w[1].field.sup_diff(&w[0].field))).collect()
}

/// Decreasing ladder with data `max(phi, -k)`.
pub fn lower_truncation_ladder(prob: &MAProblem, levels: &[f64]) -> Result<MaLadder> {
    check_levels(levels)?;
    if prob.phi.values.contains(&XReal::PosInf) {
        return Err(Error::Precondition("lower ladder needs data bounded above".into()));
    }
    let minorant = prob.minorant.as_ref().ok_or_else(|| Error::Precondition("lower ladder needs a minorant".into()))?;
    let rungs = solve_rungs(prob, levels, |v, k| v.max(XReal::Finite(-k)))?;
    for (r, w) in rungs.iter().enumerate().skip(1) {
        let rise = w
            .field
            .values
            .iter()
            .zip(&rungs[r - 1].field.values)
            .map(|(a, b)| a.to_f64() - b.to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        if rise > LADDER_TOL {
            return Err(Error::Invariant(format!("rung {r} rises by {rise:e}")));
        }
    }
    for (r, w) in rungs.iter().enumerate() {
        let dip = w
            .field
            .values
            .iter()
            .zip(&minorant.values)
            .map(|(a, m)| m.to_f64() - a.to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        if dip > LADDER_TOL {
            return Err(Error::Invariant(format!("rung {r} dips {dip:e} below the minorant")));
        }
    }
    let steps = steps(&rungs);
    let limit = rungs.last().expect("nonempty").field.clone();
    Ok(MaLadder { levels: levels.to_vec(), residual: *steps.last().unwrap(), rungs, steps, identity_gaps: Vec::new(), limit })
}

/// Increasing ladder with data `min(phi, M_k)`, checking `max(U - v/M_k, U_k) = U_k`.
pub fn upper_truncation_ladder(prob: &MAProblem, levels: &[f64]) -> Result<MaLadder> {
    check_levels(levels)?;
    let v = prob.majorant.as_ref().ok_or_else(|| Error::Precondition("upper ladder needs a majorant".into()))?;
    let rungs = solve_rungs(prob, levels, |x, k| x.min(XReal::Finite(k)))?;
    for (r, w) in rungs.iter().enumerate().skip(1) {
        let drop = w
            .field
            .values
            .iter()
            .zip(&rungs[r - 1].field.values)
            .map(|(a, b)| b.to_f64() - a.to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        if drop > LADDER_TOL {
            return Err(Error::Invariant(format!("rung {r} drops by {drop:e}")));
        }
    }
    let top = rungs.last().expect("nonempty").field.to_f64();
    let vv = v.to_f64();
    let mut identity_gaps = Vec::new();
    for (w, &k) in rungs.iter().zip(levels) {
        let u = w.field.to_f64();
        let gap = (0..u.len()).map(|i| (top[i] - vv[i] / k).max(u[i]) - u[i]).fold(0.0, f64::max);
        if gap > IDENTITY_TOL {
            return Err(Error::Invariant(format!("w_k differs from U_k by {gap:e} at level {k}")));
        }
        identity_gaps.push(gap);
    }
    let steps = steps(&rungs);
    let limit = rungs.last().expect("nonempty").field.clone();
    Ok(MaLadder { levels: levels.to_vec(), residual: *steps.last().unwrap(), rungs, steps, identity_gaps, limit })
}

/// Coordinatewise harmonic (5-point Laplace) extension of finite data.
pub fn laplace_extension(phi: &BoundaryTrace) -> Result<GridFunction> {
    let inf = GridFunction::constant(phi.grid.clone(), XReal::PosInf);
    Ok(upper_envelope(&ConeConstraint::subharmonic(), &ObstacleSpec::new(inf, phi.clone())?)?.field)
}
