//! Banded LU without pivoting, for M-matrices arising from monotone stencils.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band: entry (i, j) lives at `i * width + (j + kl - i)`.
    data: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        Banded { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        i * self.width() + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Solves `A x = b` in place, destroying the factor storage.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let piv = self.data[self.idx(k, k)];
            if !(piv.abs() > 1e-300) {
                return Err(Error::Invariant(format!("singular policy matrix at row {k}")));
            }
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku).min(n - 1);
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let f = self.data[ik] / piv;
                if f == 0.0 {
                    continue;
                }
                self.data[ik] = f;
                let (ri, rk) = (self.idx(i, k + 1), self.idx(k, k + 1));
                for t in 0..last_col - k {
                    self.data[ri + t] -= f * self.data[rk + t];
                }
                b[i] -= f * b[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + ku).min(n - 1);
            let base = self.idx(k, k);
            let mut s = b[k];
            for t in 1..=last_col - k {
                s -= self.data[base + t] * b[k + t];
            }
            b[k] = s / self.data[base];
        }
        Ok(())
    }
}

/// Solves `u_i - sum_j w_ij u_j = rhs_i` for the nodes in `free`; nodes not in
/// `free` keep their entry of `held`. Returns the full vector.
pub fn solve_averaging(free: &[usize], rows: &[Vec<(usize, f64)>], rhs: &[f64], held: &[f64]) -> Result<Vec<f64>> {
    let mut pos = vec![usize::MAX; held.len()];
    for (k, &i) in free.iter().enumerate() {
        pos[i] = k;
    }
    let (mut kl, mut ku) = (0, 0);
    for (k, row) in rows.iter().enumerate() {
        for &(j, _) in row {
            let q = pos[j];
            if q != usize::MAX {
                if q < k {
                    kl = kl.max(k - q);
                } else {
                    ku = ku.max(q - k);
                }
            }
        }
    }
    let n = free.len();
    let mut a = Banded::new(n, kl, ku);
    let mut b = rhs.to_vec();
    for (k, row) in rows.iter().enumerate() {
        a.add(k, k, 1.0);
        for &(j, w) in row {
            if pos[j] == usize::MAX {
                b[k] += w * held[j];
            } else {
                a.add(k, pos[j], -w);
            }
        }
    }
    a.solve(&mut b)?;
    let mut out = held.to_vec();
    for (k, &i) in free.iter().enumerate() {
        out[i] = b[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_laplacian() {
        let n = 50;
        let mut a = Banded::new(n, 1, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        // u = x(1-x) sampled gives a constant second difference.
        let h = 1.0 / (n + 1) as f64;
        let mut b = vec![2.0 * h * h; n];
        a.solve(&mut b).unwrap();
        for (i, v) in b.iter().enumerate() {
            let x = (i + 1) as f64 * h;
            assert!((v - x * (1.0 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_band_matches_dense() {
        let n = 30;
        let (kl, ku) = (4, 7);
        let mut a = Banded::new(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j { 20.0 } else { -(((i * 7 + j * 3) % 5) as f64) * 0.3 };
                a.add(i, j, v);
                dense[i][j] = v;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum()).collect();
        a.solve(&mut b).unwrap();
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }
}
