//! Two-variable working-set solver for the box- and equality-constrained
//! SVM dual with per-sample upper bounds:
//!
//! ```text
//! min_a  1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a_i <= C_i,   Q_ij = y_i y_j K_ij
//! ```
//!
//! The first index is the maximal KKT violator, the second the
//! second-order best partner among violators.

const TAU: f64 = 1e-12;

pub struct DualSolver<'a> {
    kernel: &'a [Vec<f64>],
    y: &'a [f64],
    upper: Vec<f64>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub converged: bool,
    pub kkt_gap: f64,
}

impl<'a> DualSolver<'a> {
    /// `kernel[i][j]` must hold `K(x_i, x_j)` for all `i, j < y.len()`.
    /// `alpha0` must be feasible.
    pub fn new(kernel: &'a [Vec<f64>], y: &'a [f64], upper: Vec<f64>, alpha0: Vec<f64>) -> Self {
        let n = y.len();
        assert_eq!(upper.len(), n);
        assert_eq!(alpha0.len(), n);
        let mut grad = vec![-1.0; n];
        for (j, &aj) in alpha0.iter().enumerate() {
            if aj != 0.0 {
                let row = &kernel[j];
                for (i, g) in grad.iter_mut().enumerate() {
                    *g += y[i] * y[j] * row[i] * aj;
                }
            }
        }
        Self {
            kernel,
            y,
            upper,
            alpha: alpha0,
            grad,
            iterations: 0,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn into_alpha(self) -> Vec<f64> {
        self.alpha
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Raises upper bounds; the current point stays feasible.
    pub fn raise_upper(&mut self, upper: Vec<f64>) {
        debug_assert!(upper.iter().zip(&self.upper).all(|(n, o)| n >= o));
        self.upper = upper;
    }

    fn is_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.upper[t]
    }

    fn is_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Dual objective in maximization form, `e'a - 1/2 a'Qa`.
    pub fn objective(&self) -> f64 {
        -0.5 * self
            .alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>()
    }

    /// Maximal KKT violation `m(a) - M(a)`.
    pub fn kkt_gap(&self) -> f64 {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        for t in 0..self.y.len() {
            let v = -self.y[t] * self.grad[t];
            let up = if self.y[t] > 0.0 { !self.is_upper(t) } else { !self.is_lower(t) };
            let low = if self.y[t] > 0.0 { !self.is_lower(t) } else { !self.is_upper(t) };
            if up {
                gmax = gmax.max(v);
            }
            if low {
                gmin = gmin.min(v);
            }
        }
        if gmax.is_finite() && gmin.is_finite() {
            gmax - gmin
        } else {
            0.0
        }
    }

    fn select(&self, tolerance: f64) -> Option<(usize, usize)> {
        let n = self.y.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if self.y[t] > 0.0 {
                if !self.is_upper(t) && -self.grad[t] >= gmax {
                    gmax = -self.grad[t];
                    i = t;
                }
            } else if !self.is_lower(t) && self.grad[t] >= gmax {
                gmax = self.grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            return None;
        }
        let ki = &self.kernel[i];
        let kii = ki[i];
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..n {
            let grad_diff = if self.y[t] > 0.0 {
                if self.is_lower(t) {
                    continue;
                }
                gmax2 = gmax2.max(self.grad[t]);
                gmax + self.grad[t]
            } else {
                if self.is_upper(t) {
                    continue;
                }
                gmax2 = gmax2.max(-self.grad[t]);
                gmax - self.grad[t]
            };
            if grad_diff > 0.0 {
                let quad = kii + self.kernel[t][t] - 2.0 * ki[t];
                let gain = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if gain <= best {
                    best = gain;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tolerance || j == usize::MAX {
            None
        } else {
            Some((i, j))
        }
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let (y, k) = (self.y, self.kernel);
        let (ci, cj) = (self.upper[i], self.upper[j]);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let kij = k[i][j];
        let (mut ai, mut aj) = (old_i, old_j);
        let quad = {
            let q = k[i][i] + k[j][j] - 2.0 * kij;
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if y[i] != y[j] {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        // exact box
        ai = ai.clamp(0.0, ci);
        aj = aj.clamp(0.0, cj);
        self.alpha[i] = ai;
        self.alpha[j] = aj;

        let di = (ai - old_i) * y[i];
        let dj = (aj - old_j) * y[j];
        let (ki, kj) = (&k[i], &k[j]);
        for t in 0..y.len() {
            self.grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
    }

    /// One pairwise update. Returns `false` once the KKT gap is below
    /// `tolerance` (nothing was changed).
    pub fn step(&mut self, tolerance: f64) -> bool {
        match self.select(tolerance) {
            Some((i, j)) => {
                self.update_pair(i, j);
                self.iterations += 1;
                true
            }
            None => false,
        }
    }

    pub fn solve(&mut self, tolerance: f64, max_iters: usize) -> SolveStats {
        let start = self.iterations;
        let mut converged = false;
        while self.iterations - start < max_iters {
            if !self.step(tolerance) {
                converged = true;
                break;
            }
        }
        SolveStats {
            iterations: self.iterations - start,
            converged,
            kkt_gap: self.kkt_gap(),
        }
    }

    /// Bias `b` of the decision function `sum a_j y_j K(x, x_j) + b`.
    pub fn bias(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free_count = 0usize;
        for t in 0..self.y.len() {
            let yg = self.y[t] * self.grad[t];
            if self.is_upper(t) {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.is_lower(t) {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free_count += 1;
                free_sum += yg;
            }
        }
        let rho = if free_count > 0 {
            free_sum / free_count as f64
        } else {
            0.5 * (ub + lb)
        };
        -rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rbf_gram(xs: &[f64], sigma: f64) -> Vec<Vec<f64>> {
        xs.iter()
            .map(|a| xs.iter().map(|b| (-(a - b).powi(2) / (sigma * sigma)).exp()).collect())
            .collect()
    }

    #[test]
    fn separable_pair_has_closed_form_solution() {
        // Two points, K = [[1, k], [k, 1]]: alpha = 2 / (2 - 2k), b = 0.
        let k = rbf_gram(&[0.0, 1.0], 1.0);
        let y = [1.0, -1.0];
        let mut s = DualSolver::new(&k, &y, vec![1e6; 2], vec![0.0; 2]);
        let stats = s.solve(1e-12, 1000);
        assert!(stats.converged);
        let expected = 1.0 / (1.0 - k[0][1]);
        assert!((s.alpha()[0] - expected).abs() < 1e-9);
        assert!((s.alpha()[1] - expected).abs() < 1e-9);
        assert!(s.bias().abs() < 1e-9);
    }

    #[test]
    fn objective_is_nondecreasing() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let y: Vec<f64> = xs.iter().map(|x| if x.cos() > 0.0 { 1.0 } else { -1.0 }).collect();
        let k = rbf_gram(&xs, 0.5);
        let upper: Vec<f64> = y.iter().map(|&l| if l > 0.0 { 2.0 } else { 50.0 }).collect();
        let mut s = DualSolver::new(&k, &y, upper, vec![0.0; xs.len()]);
        let mut last = s.objective();
        while s.step(1e-10) {
            let now = s.objective();
            assert!(now >= last - 1e-9 * last.abs().max(1.0), "{now} < {last}");
            last = now;
        }
        assert!(s.kkt_gap() < 1e-10);
    }
}
