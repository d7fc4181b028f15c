use super::{BoundaryTrace, Layout};
use crate::error::{Error, Result};
use crate::xreal::XReal;
use std::f64::consts::PI;

/// Local model `a*ln|t| + b + c*t^2` of the data around a singular ring node,
/// fitted from symmetric neighbor averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Node value that makes the periodic trapezoid rule consistent with the model.
    pub value: f64,
}

fn usable(values: &[XReal], singular: &[bool], k: usize) -> Option<f64> {
    if singular[k] {
        None
    } else {
        values[k].as_finite()
    }
}

/// Fit around singular node `s` of a periodic ring of `values`.
pub fn singular_fit(values: &[XReal], singular: &[bool], s: usize) -> Result<SingularFit> {
    let n = values.len();
    let h = 2.0 * PI / n as f64;
    let at = |off: isize| usable(values, singular, (s as isize + off).rem_euclid(n as isize) as usize);
    let mut pairs = Vec::new();
    for j in 1..=3isize.min(n as isize / 2 - 1) {
        match (at(j), at(-j)) {
            (Some(p), Some(q)) => pairs.push(0.5 * (p + q)),
            _ => break,
        }
    }
    if pairs.len() == 3 {
        let (m1, m2, m3) = (pairs[0], pairs[1], pairs[2]);
        let (d1, d2) = (m1 - m2, m2 - m3);
        // Ratio 3 corresponds to a |t|^-1 profile, the edge of integrability.
        if d1 * d2 > 0.0 && d1.abs() >= 3.0 * d2.abs() {
            return Err(Error::NotQuasibounded(format!(
                "data near boundary node {s} grows at least like 1/|t|"
            )));
        }
        let l = |j: f64| (j * h).ln();
        let q = |j: f64| (j * h) * (j * h);
        let rows = [[l(1.0), 1.0, q(1.0), m1], [l(2.0), 1.0, q(2.0), m2], [l(3.0), 1.0, q(3.0), m3]];
        let [a, b, c] = solve3(rows);
        return Ok(SingularFit { a, b, c, value: b + a * (h / (2.0 * PI)).ln() });
    }
    if let Some(&m1) = pairs.first() {
        return Ok(SingularFit { a: 0.0, b: m1, c: 0.0, value: m1 });
    }
    let side = |dir: isize| (1..n as isize).find_map(|j| at(dir * j));
    match (side(1), side(-1)) {
        (Some(p), Some(q)) => {
            let v = 0.5 * (p + q);
            Ok(SingularFit { a: 0.0, b: v, c: 0.0, value: v })
        }
        _ => Err(Error::InvalidTrace("no finite boundary data to regularize against".into())),
    }
}

fn solve3(mut m: [[f64; 4]; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][3] - s) / m[row][row];
    }
    x
}

/// Node values of a ring with singular nodes replaced by their regularized values.
pub(crate) fn regularized_ring(values: &[XReal], singular: &[bool]) -> Result<(Vec<f64>, Vec<(usize, SingularFit)>)> {
    let mut out = Vec::with_capacity(values.len());
    let mut fits = Vec::new();
    for (k, v) in values.iter().enumerate() {
        match v {
            XReal::Finite(x) => out.push(*x),
            _ => {
                let fit = singular_fit(values, singular, k)?;
                fits.push((k, fit));
                out.push(fit.value);
            }
        }
    }
    Ok((out, fits))
}

/// Arc-length integral of a boundary trace by the periodic trapezoid rule.
pub fn boundary_quadrature(g: &BoundaryTrace) -> Result<f64> {
    let Layout::Polar(p) = &g.grid.layout else {
        return Err(Error::Unsupported("boundary quadrature on the toric lattice".into()));
    };
    let nb = p.n_boundary;
    let mut total = 0.0;
    let rings: Vec<(usize, f64)> = std::iter::once((0, 1.0)).chain(p.inner.map(|(_, r)| (nb, r))).collect();
    for (offset, radius) in rings {
        let vals = &g.values[offset..offset + nb];
        let sing = &g.singular[offset..offset + nb];
        let (reg, _) = regularized_ring(vals, sing)?;
        total += radius * 2.0 * PI / nb as f64 * reg.iter().sum::<f64>();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};

    #[test]
    fn constant_one_gives_circumference() {
        let g = build_grid(DomainSpec::disk(64, 8, 64)).unwrap();
        let t = BoundaryTrace::from_fn(g, |_, _, _| XReal::Finite(1.0));
        assert!((boundary_quadrature(&t).unwrap() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn log_singularity_integrates_to_zero() {
        let g = build_grid(DomainSpec::disk(64, 8, 512)).unwrap();
        let t = BoundaryTrace::from_fn(g, |th, _, _| {
            if th == 0.0 {
                XReal::NegInf
            } else {
                XReal::Finite((2.0 * (th / 2.0).sin().abs()).ln())
            }
        });
        assert!(boundary_quadrature(&t).unwrap().abs() < 2e-3);
    }

    #[test]
    fn fit_recovers_log_coefficient() {
        let n = 256;
        let h = 2.0 * PI / n as f64;
        let vals: Vec<XReal> = (0..n)
            .map(|k| {
                let t = if k <= n / 2 { k as f64 * h } else { (k as f64 - n as f64) * h };
                if k == 0 {
                    XReal::PosInf
                } else {
                    XReal::Finite(-2.0 * t.abs().ln() + 0.5)
                }
            })
            .collect();
        let mut sing = vec![false; n];
        sing[0] = true;
        let f = singular_fit(&vals, &sing, 0).unwrap();
        assert!((f.a + 2.0).abs() < 1e-9 && (f.b - 0.5).abs() < 1e-9);
    }

    #[test]
    fn inverse_power_is_rejected() {
        let n = 128;
        let h = 2.0 * PI / n as f64;
        let vals: Vec<XReal> = (0..n)
            .map(|k| {
                let j = k.min(n - k) as f64;
                if k == 0 {
                    XReal::PosInf
                } else {
                    XReal::Finite(1.0 / (j * h).powf(1.5))
                }
            })
            .collect();
        let mut sing = vec![false; n];
        sing[0] = true;
        assert!(matches!(singular_fit(&vals, &sing, 0), Err(Error::NotQuasibounded(_))));
    }
}
