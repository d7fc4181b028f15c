use super::cone::Average;
use crate::error::{Error, Result};
use crate::linalg::solve_averaging;
use rayon::prelude::*;

/// Discrete obstacle problem `u_i = min(obs_i, min_c avg_c(u))` on free nodes,
/// with every other node held at a finite value.
pub(crate) struct Problem {
    pub free: Vec<usize>,
    pub constraints: Vec<Vec<Average>>,
    /// Per free node; `+inf` means no obstacle.
    pub obstacle: Vec<f64>,
    /// Full-length start vector; entries off `free` are the held values.
    pub start: Vec<f64>,
}

pub(crate) struct Solved {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub final_update: f64,
    /// Obstacle binds (per free node).
    pub active: Vec<bool>,
    pub log: Vec<(usize, f64)>,
}

const SELF: usize = usize::MAX;

impl Problem {
    /// Jacobi sweep value and the minimizing choice (`SELF` for the obstacle).
    /// Ties go to the previous constraint, then to any constraint over the obstacle.
    fn operator(&self, u: &[f64], k: usize, prefer: usize) -> (f64, usize) {
        let mut best = (f64::INFINITY, SELF);
        for (c, con) in self.constraints[k].iter().enumerate() {
            let v: f64 = con.iter().map(|&(j, w)| w * u[j]).sum();
            if v < best.0 {
                best = (v, c);
            }
        }
        let tie = 1e-14 * (1.0 + best.0.abs());
        if prefer != SELF && prefer != best.1 {
            let v: f64 = self.constraints[k][prefer].iter().map(|&(j, w)| w * u[j]).sum();
            if v <= best.0 + tie {
                best.1 = prefer;
            }
        }
        if self.obstacle[k] < best.0 - tie || best.1 == SELF {
            best = (self.obstacle[k], SELF);
        } else {
            best.0 = best.0.min(self.obstacle[k]);
        }
        best
    }

    fn sweep(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let new: Vec<f64> =
            (0..self.free.len()).into_par_iter().map(|k| self.operator(u, k, SELF).0).collect();
        let mut next = u.to_vec();
        let mut diff = 0.0f64;
        for (k, &i) in self.free.iter().enumerate() {
            diff = diff.max((new[k] - u[i]).abs());
            next[i] = new[k];
        }
        (next, diff)
    }

    /// Solve the linear system fixed by one choice per free node.
    fn policy_solve(&self, u: &[f64], policy: &[usize]) -> Result<Vec<f64>> {
        let mut rows = Vec::with_capacity(policy.len());
        let mut rhs = Vec::with_capacity(policy.len());
        for (k, &p) in policy.iter().enumerate() {
            if p == SELF {
                rows.push(Vec::new());
                rhs.push(self.obstacle[k]);
            } else {
                rows.push(self.constraints[k][p].clone());
                rhs.push(0.0);
            }
        }
        solve_averaging(&self.free, &rows, &rhs, u)
    }

    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<Solved> {
        let mut u = self.start.clone();
        let mut log = Vec::new();
        let mut iterations = 0;
        let mut policy = vec![SELF; self.free.len()];
        let chain = (self.free.len() as f64).sqrt().ceil() as usize;
        // policy iteration from above; each step is order-preserving and nonincreasing
        loop {
            let choice: Vec<(f64, usize)> =
                (0..self.free.len()).into_par_iter().map(|k| self.operator(&u, k, policy[k])).collect();
            let update = self.free.iter().zip(&choice).map(|(&i, c)| (c.0 - u[i]).abs()).fold(0.0, f64::max);
            let next: Vec<usize> = choice.iter().map(|c| c.1).collect();
            let settled = next == policy && iterations > 0;
            policy = next;
            iterations += 1;
            log.push((iterations, update));
            if update <= tol || settled || iterations >= max_iter {
                break;
            }
            let cand = self.policy_solve(&u, &policy)?;
            if cand.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invariant("policy system produced a non-finite value".into()));
            }
            u = cand;
            // cheap sweeps carry policy switches along chains between solves
            for _ in 0..chain {
                let (next, diff) = self.sweep(&u);
                u = next;
                iterations += 1;
                log.push((iterations, diff));
                if diff <= tol {
                    break;
                }
            }
        }
        // plain Jacobi sweeps confirm the fixed point
        let mut final_update = f64::INFINITY;
        while iterations < max_iter {
            let (next, diff) = self.sweep(&u);
            u = next;
            iterations += 1;
            log.push((iterations, diff));
            final_update = diff;
            if diff <= tol {
                break;
            }
        }
        if final_update > tol {
            return Err(Error::NoConvergence { iterations, residual: final_update });
        }
        let active = (0..self.free.len())
            .map(|k| {
                let i = self.free[k];
                self.obstacle[k].is_finite() && (u[i] - self.obstacle[k]).abs() <= tol.max(1e-12)
            })
            .collect();
        Ok(Solved { values: u, iterations, final_update, active, log })
    }

    /// Smallest slack `avg_c(u) - u_i` over all constraints.
    #[cfg(test)]
    pub fn min_slack(&self, u: &[f64]) -> f64 {
        let mut slack = f64::INFINITY;
        for (k, &i) in self.free.iter().enumerate() {
            for c in &self.constraints[k] {
                let avg: f64 = c.iter().map(|&(j, w)| w * u[j]).sum();
                slack = slack.min(avg - u[i]);
            }
        }
        slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_convex_envelope() {
        // 0..=10 with ends held at 0 and 1 and an obstacle dip at 5
        let n = 11;
        let free: Vec<usize> = (1..n - 1).collect();
        let constraints = free.iter().map(|&i| vec![vec![(i - 1, 0.5), (i + 1, 0.5)]]).collect();
        let mut obstacle = vec![f64::INFINITY; free.len()];
        obstacle[4] = -1.0;
        let mut start = vec![-1.0; n];
        start[0] = 0.0;
        start[n - 1] = 1.0;
        let p = Problem { free, constraints, obstacle, start };
        let s = p.solve(1e-12, 1000).unwrap();
        assert!((s.values[5] + 1.0).abs() < 1e-12);
        assert!((s.values[2] - (-0.4)).abs() < 1e-12);
        assert!((s.values[8] - (-1.0 + 2.0 * 3.0 / 5.0)).abs() < 1e-12);
        assert!(s.active[4]);
        assert!(p.min_slack(&s.values) > -1e-12);
    }
}
