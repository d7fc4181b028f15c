use crate::error::{Error, Result};
use crate::grid::{singular_fit, BoundaryTrace, GridFunction, Layout, PolarLayout, SingularFit};
use crate::xreal::XReal;
use rayon::prelude::*;
use std::f64::consts::PI;

/// zeta'(-2), the leading correction constant of the trapezoid rule for `ln|t|` integrands.
const ZETA_PRIME_M2: f64 = -0.030_448_457_058_393_270_78;

/// Truncated Poisson integral over the unit circle, evaluable at any interior point.
#[derive(Debug, Clone)]
pub struct PoissonIntegral {
    cos: Vec<f64>,
    sin: Vec<f64>,
    /// Data with singular nodes replaced by their regularized value.
    data: Vec<f64>,
    fits: Vec<(usize, SingularFit)>,
}

/// Which part of the data to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Full,
    Positive,
    Negative,
}

impl PoissonIntegral {
    pub fn new(trace: &BoundaryTrace) -> Result<Self> {
        Self::build(trace, false)
    }

    /// Like `new`, but singular nodes whose neighbourhood is not integrable keep their
    /// infinite value, so only truncated integrals are meaningful.
    pub fn new_truncated(trace: &BoundaryTrace) -> Result<Self> {
        Self::build(trace, true)
    }

    fn build(trace: &BoundaryTrace, allow_divergent: bool) -> Result<Self> {
        let p = disk_layout(trace)?;
        let n = p.n_boundary;
        let (vals, sing) = (&trace.values[..n], &trace.singular[..n]);
        let mut data = Vec::with_capacity(n);
        let mut fits = Vec::new();
        for (k, v) in vals.iter().enumerate() {
            match v {
                XReal::Finite(x) => data.push(*x),
                _ => match singular_fit(vals, sing, k) {
                    Ok(fit) => {
                        fits.push((k, fit));
                        data.push(fit.value);
                    }
                    Err(Error::NotQuasibounded(_)) if allow_divergent => data.push(v.to_f64()),
                    Err(e) => return Err(e),
                },
            }
        }
        let angles: Vec<f64> = (0..n).map(|k| p.boundary_angle(k)).collect();
        Ok(PoissonIntegral {
            cos: angles.iter().map(|a| a.cos()).collect(),
            sin: angles.iter().map(|a| a.sin()).collect(),
            data,
            fits,
        })
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    fn kernel(&self, x: f64, y: f64, k: usize) -> f64 {
        let r2 = x * x + y * y;
        (1.0 - r2) / (1.0 - 2.0 * (x * self.cos[k] + y * self.sin[k]) + r2)
    }

    /// Effective value of singular node `s` as seen from `(x, y)`: the regularized value
    /// plus the next trapezoid correction for the logarithmic part, folded into the node weight.
    fn effective(&self, x: f64, y: f64, s: usize, fit: &SingularFit) -> f64 {
        if fit.a == 0.0 {
            return fit.value;
        }
        let n = self.n() as f64;
        let h = 2.0 * PI / n;
        let r2 = x * x + y * y;
        let c = x * self.cos[s] + y * self.sin[s];
        let sn = x * self.sin[s] - y * self.cos[s];
        let d = 1.0 - 2.0 * c + r2;
        let (d1, d2) = (2.0 * sn, 2.0 * c);
        let pk = (1.0 - r2) / d;
        let p2 = (1.0 - r2) * (2.0 * d1 * d1 / (d * d * d) - d2 / (d * d));
        let corr = h * h * h * ZETA_PRIME_M2 * fit.a * p2 / (2.0 * PI);
        fit.value + corr * n / pk
    }

    fn node_values(&self, x: f64, y: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut fi = 0;
        (0..self.n()).map(move |k| {
            let v = if fi < self.fits.len() && self.fits[fi].0 == k {
                fi += 1;
                self.effective(x, y, k, &self.fits[fi - 1].1)
            } else {
                self.data[k]
            };
            (self.kernel(x, y, k), v)
        })
    }

    /// `(1/2pi) * integral of P_z * phi` at an interior point.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let s: f64 = self.node_values(x, y).map(|(p, v)| p * v).sum();
        s / self.n() as f64
    }

    /// Positive and negative part rungs for every level at one point.
    pub fn eval_levels(&self, x: f64, y: f64, levels: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pos = vec![0.0; levels.len()];
        let mut neg = vec![0.0; levels.len()];
        for (p, v) in self.node_values(x, y) {
            if v > 0.0 {
                for (acc, &k) in pos.iter_mut().zip(levels) {
                    *acc += p * v.min(k);
                }
            } else if v < 0.0 {
                for (acc, &k) in neg.iter_mut().zip(levels) {
                    *acc += p * v.max(-k);
                }
            }
        }
        let n = self.n() as f64;
        pos.iter_mut().chain(neg.iter_mut()).for_each(|a| *a /= n);
        (pos, neg)
    }
}

pub(crate) fn disk_layout(trace: &BoundaryTrace) -> Result<&PolarLayout> {
    match &trace.grid.layout {
        Layout::Polar(p) if p.center.is_some() => Ok(p),
        _ => Err(Error::Unsupported("Poisson integrals are implemented for the unit disk only".into())),
    }
}

/// Harmonic extension of the boundary data at every interior node.
pub fn poisson_solve(phi: &BoundaryTrace) -> Result<GridFunction> {
    let pi = PoissonIntegral::new(phi)?;
    let g = phi.grid.clone();
    let vals: Vec<f64> = g.interior.par_iter().map(|&i| pi.eval(g.nodes[i].x, g.nodes[i].y)).collect();
    let mut out = phi.to_field(XReal::ZERO);
    for (&i, v) in g.interior.iter().zip(vals) {
        out.values[i] = XReal::Finite(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Bounded solutions for clamped data, one per level.
#[derive(Debug, Clone)]
pub struct TruncationLadder {
    pub levels: Vec<f64>,
    /// Data `min(k, max(phi, 0))`: increasing in `k`.
    pub positive: Vec<GridFunction>,
    /// Data `max(-k, min(phi, 0))`: decreasing in `k`.
    pub negative: Vec<GridFunction>,
    pub sum: Vec<GridFunction>,
    /// Sup over interior nodes of `|sum_k - sum_{k-1}|` (the first entry is `sup |sum_0|`).
    pub residuals: Vec<f64>,
    /// `|sum_last - sum_k|` at the disk center.
    pub base_gaps: Vec<f64>,
}

impl TruncationLadder {
    pub fn direction(&self, part: Part) -> Direction {
        match part {
            Part::Negative => Direction::Decreasing,
            _ => Direction::Increasing,
        }
    }

    /// Rows `k, sup_residual, base_gap`.
    pub fn residual_csv(&self) -> String {
        let mut s = String::from("k,sup_residual,base_gap\n");
        for ((k, r), b) in self.levels.iter().zip(&self.residuals).zip(&self.base_gaps) {
            s.push_str(&format!("{k},{r:.17e},{b:.17e}\n"));
        }
        s
    }

    /// Largest violation of node-wise monotonicity of either part.
    pub fn monotonicity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.positive.windows(2) {
            for (a, b) in w[0].values.iter().zip(&w[1].values) {
                worst = worst.max(a.to_f64() - b.to_f64());
            }
        }
        for w in self.negative.windows(2) {
            for (a, b) in w[0].values.iter().zip(&w[1].values) {
                worst = worst.max(b.to_f64() - a.to_f64());
            }
        }
        worst
    }
}

/// Levels at which the base-point gap of each ladder part first drops below `2^-j`,
/// for `j = 1..=max_terms`, followed by a level above every data value.
/// Coincident levels are separated by `1e-9` to keep the list strictly increasing.
pub fn adaptive_levels(phi: &BoundaryTrace, base: (f64, f64), max_terms: usize) -> Result<Vec<f64>> {
    let pi = PoissonIntegral::new(phi)?;
    let (bx, by) = base;
    let bound = pi.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
        + pi.fits.iter().map(|(s, f)| pi.effective(bx, by, *s, f).abs()).fold(0.0, f64::max)
        + 1.0;
    let (tp, tn) = pi.eval_levels(bx, by, &[bound]);
    let gap = |k: f64| {
        let (p, n) = pi.eval_levels(bx, by, &[k]);
        ((tp[0] - p[0]).max(0.0), (n[0] - tn[0]).max(0.0))
    };
    let mut raw = Vec::new();
    for j in 1..=max_terms {
        let tol = 0.5f64.powi(j as i32);
        for part in 0..2 {
            let pick = |k: f64| if part == 0 { gap(k).0 } else { gap(k).1 };
            if pick(0.0) <= tol {
                raw.push(0.0);
                continue;
            }
            let (mut lo, mut hi) = (0.0, bound);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if pick(mid) <= tol {
                    hi = mid
                } else {
                    lo = mid
                }
            }
            raw.push(hi);
        }
    }
    raw.sort_by(f64::total_cmp);
    raw.push(bound);
    let mut levels: Vec<f64> = Vec::with_capacity(raw.len());
    for k in raw {
        let k = match levels.last() {
            Some(&l) if k <= l => l + 1e-9,
            _ => k,
        };
        levels.push(k);
    }
    Ok(levels)
}

pub fn truncation_ladder(phi: &BoundaryTrace, levels: &[f64]) -> Result<TruncationLadder> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] < 0.0 {
        return Err(Error::Precondition("ladder levels must be nonnegative and strictly increasing".into()));
    }
    let pi = PoissonIntegral::new_truncated(phi)?;
    let g = phi.grid.clone();
    let m = levels.len();
    let rows: Vec<(Vec<f64>, Vec<f64>)> =
        g.interior.par_iter().map(|&i| pi.eval_levels(g.nodes[i].x, g.nodes[i].y, levels)).collect();
    let rung = |k: f64, positive: bool| {
        phi.map(|v| {
            let c = v.clamp_level(k);
            XReal::Finite(if positive { c.max(0.0) } else { c.min(0.0) })
        })
        .to_field(XReal::ZERO)
    };
    let mut positive = Vec::with_capacity(m);
    let mut negative = Vec::with_capacity(m);
    let mut sum = Vec::with_capacity(m);
    for (r, &k) in levels.iter().enumerate() {
        let mut p = rung(k, true);
        let mut q = rung(k, false);
        for (&i, row) in g.interior.iter().zip(&rows) {
            p.values[i] = XReal::Finite(row.0[r]);
            q.values[i] = XReal::Finite(row.1[r]);
        }
        sum.push(p.try_add(&q)?);
        positive.push(p);
        negative.push(q);
    }
    let center = g.polar().and_then(|p| p.center).expect("disk grid has a center");
    let last = sum[m - 1].values[center].to_f64();
    let mut residuals = Vec::with_capacity(m);
    for r in 0..m {
        let prev = if r == 0 { None } else { Some(&sum[r - 1]) };
        let res = g
            .interior
            .iter()
            .map(|&i| (sum[r].values[i].to_f64() - prev.map_or(0.0, |p| p.values[i].to_f64())).abs())
            .fold(0.0, f64::max);
        residuals.push(res);
    }
    let base_gaps = sum.iter().map(|s| (last - s.values[center].to_f64()).abs()).collect();
    Ok(TruncationLadder { levels: levels.to_vec(), positive, negative, sum, residuals, base_gaps })
}
