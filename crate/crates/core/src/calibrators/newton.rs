//! Damped Newton solver for ridge-regularized logistic likelihoods.
//!
//! Minimises the mean cross-entropy `-(1/n) Σ [t ln σ(z) + (1 - t) ln(1 - σ(z))]`
//! with `z = wᵀx` over soft targets `t ∈ [0, 1]`, plus an optional ridge on
//! selected coefficients.

#![allow(clippy::needless_range_loop)]

pub(crate) struct LogisticProblem<'a> {
    /// One feature row per instance; the intercept column, if any, is included.
    pub rows: &'a [Vec<f64>],
    pub targets: &'a [f64],
    /// Per-coefficient L2 penalty (same length as a row).
    pub ridge: Vec<f64>,
}

pub(crate) struct NewtonOutcome {
    pub weights: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem<'_> {
    fn dim(&self) -> usize {
        self.ridge.len()
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let n = self.rows.len() as f64;
        let mut total = 0.0;
        for (x, &t) in self.rows.iter().zip(self.targets) {
            let z = dot(w, x);
            // -t ln σ(z) - (1 - t) ln σ(-z) = softplus(z) - t z
            total += softplus(z) - t * z;
        }
        let penalty: f64 = w.iter().zip(&self.ridge).map(|(wi, r)| 0.5 * r * wi * wi).sum();
        total / n + penalty
    }

    fn gradient_hessian(&self, w: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let k = self.dim();
        let n = self.rows.len() as f64;
        let mut g = vec![0.0; k];
        let mut h = vec![vec![0.0; k]; k];
        for (x, &t) in self.rows.iter().zip(self.targets) {
            let p = sigmoid(dot(w, x));
            let r = p - t;
            let v = p * (1.0 - p);
            for i in 0..k {
                g[i] += r * x[i];
                for j in 0..=i {
                    h[i][j] += v * x[i] * x[j];
                }
            }
        }
        for i in 0..k {
            g[i] = g[i] / n + self.ridge[i] * w[i];
            for j in 0..=i {
                h[i][j] /= n;
                h[j][i] = h[i][j];
            }
            h[i][i] += self.ridge[i];
        }
        (g, h)
    }

    pub fn solve(&self, init: Vec<f64>, max_iter: usize, tol: f64) -> NewtonOutcome {
        let mut w = init;
        let mut f = self.objective(&w);
        for it in 0..max_iter {
            let (g, mut h) = self.gradient_hessian(&w);
            let grad_norm = norm(&g);
            if grad_norm <= tol {
                return NewtonOutcome {
                    weights: w,
                    grad_norm,
                    iterations: it,
                    converged: true,
                };
            }
            // Keep the Hessian positive definite when the data is (nearly) separable.
            for (i, row) in h.iter_mut().enumerate() {
                row[i] += 1e-12;
            }
            let step = match solve_linear(h, g.iter().map(|v| -v).collect()) {
                Some(d) => d,
                None => g.iter().map(|v| -v).collect(),
            };
            let slope = dot(&g, &step);
            if grad_norm < 1e-6 {
                // inside the quadratic-convergence basin the objective change is
                // below f64 resolution, so take the full step
                for (wi, di) in w.iter_mut().zip(&step) {
                    *wi += di;
                }
                f = self.objective(&w);
                continue;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha >= 1e-10 {
                let cand: Vec<f64> = w.iter().zip(&step).map(|(wi, di)| wi + alpha * di).collect();
                let fc = self.objective(&cand);
                if fc <= f + 1e-4 * alpha * slope {
                    w = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return NewtonOutcome {
                    weights: w,
                    grad_norm,
                    iterations: it,
                    converged: false,
                };
            }
        }
        let (g, _) = self.gradient_hessian(&w);
        let grad_norm = norm(&g);
        NewtonOutcome {
            weights: w,
            grad_norm,
            iterations: max_iter,
            converged: grad_norm <= tol,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting. `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_linear(a, vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn recovers_intercept_only_rate() {
        let rows = vec![vec![1.0]; 10];
        let targets: Vec<f64> = (0..10).map(|i| if i < 3 { 1.0 } else { 0.0 }).collect();
        let out = LogisticProblem { rows: &rows, targets: &targets, ridge: vec![0.0] }.solve(vec![0.0], 100, 1e-12);
        assert!(out.converged);
        assert!((sigmoid(out.weights[0]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
