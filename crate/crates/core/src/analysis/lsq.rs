//! Weighted nonlinear least squares (Levenberg–Marquardt on the Gauss–Newton
//! normal equations).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A scalar model `y = f(x; p)` with an analytic Jacobian.
pub trait LsqModel {
    fn n_params(&self) -> usize;

    fn value(&self, x: f64, params: &[f64]) -> f64;

    /// Writes `∂f/∂p_j` into `out` (length `n_params`).
    fn gradient(&self, x: f64, params: &[f64], out: &mut [f64]);

    /// Size of the largest term summed into `value`; sets the rounding
    /// error of `value` when terms cancel.
    fn magnitude(&self, x: f64, params: &[f64]) -> f64 {
        self.value(x, params).abs()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Largest accepted `|g_j| / sqrt(H_jj · χ²)` at convergence.
    pub gradient_tolerance: f64,
    pub initial_lambda: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-10,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LsqSolution {
    pub params: Vec<f64>,
    /// Inverse of the weighted Gauss–Newton normal matrix at the optimum.
    pub covariance: DMatrix<f64>,
    pub chi_square: f64,
    pub iterations: usize,
    pub relative_gradient: f64,
}

struct Normal {
    chi2: f64,
    noise: f64,
    h: DMatrix<f64>,
    g: DVector<f64>,
}

/// χ² and a bound on its rounding error, `4ε Σ w |r| (|y| + |f|)` with `|f|`
/// replaced by the model's term magnitude.
fn chi_square<M: LsqModel>(model: &M, xs: &[f64], ys: &[f64], ws: &[f64], p: &[f64]) -> (f64, f64) {
    let mut chi2 = 0.0;
    let mut noise = 0.0;
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let f = model.value(x, p);
        let r = y - f;
        chi2 += w * r * r;
        noise += w * r.abs() * (y.abs() + model.magnitude(x, p).max(f.abs()));
    }
    (chi2, 4.0 * f64::EPSILON * noise)
}

fn normal_equations<M: LsqModel>(
    model: &M,
    xs: &[f64],
    ys: &[f64],
    ws: &[f64],
    p: &[f64],
) -> Normal {
    let m = model.n_params();
    let mut h = DMatrix::zeros(m, m);
    let mut g = DVector::zeros(m);
    let mut grad = vec![0.0; m];
    let (chi2, noise) = chi_square(model, xs, ys, ws, p);
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let f = model.value(x, p);
        let r = y - f;
        model.gradient(x, p, &mut grad);
        for i in 0..m {
            g[i] += w * r * grad[i];
            for j in 0..=i {
                h[(i, j)] += w * grad[i] * grad[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            h[(j, i)] = h[(i, j)];
        }
    }
    Normal { chi2, noise, h, g }
}

/// `max_j |g_j| / sqrt(H_jj χ²)`, the cosine between the residual and each
/// Jacobian column; zero columns are skipped.
fn relative_gradient(n: &Normal) -> f64 {
    if n.chi2 <= 0.0 {
        return 0.0;
    }
    (0..n.g.len())
        .filter(|&j| n.h[(j, j)] > 0.0)
        .map(|j| n.g[j].abs() / (n.h[(j, j)] * n.chi2).sqrt())
        .fold(0.0, f64::max)
}

fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.lu().solve(b)
}

/// Pseudo-inverse of the normal matrix; directions the data do not constrain
/// get zero variance instead of blowing up.
pub(crate) fn covariance_from_normal(h: &DMatrix<f64>) -> DMatrix<f64> {
    let max_diag = h.diagonal().iter().copied().fold(0.0, f64::max);
    if max_diag <= 0.0 {
        return DMatrix::zeros(h.nrows(), h.ncols());
    }
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.pseudo_inverse(smax * 1e-14)
        .unwrap_or_else(|_| DMatrix::zeros(h.nrows(), h.ncols()))
}

/// Minimizes `Σ w (y − f(x; p))²` from the starting point `p0`.
pub fn minimize<M: LsqModel>(
    model: &M,
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
    p0: &[f64],
    opts: &LsqOptions,
) -> Result<LsqSolution> {
    let m = model.n_params();
    if p0.len() != m || xs.len() != ys.len() || xs.len() != weights.len() {
        return Err(Error::InvalidInput(
            "inconsistent least-squares dimensions".into(),
        ));
    }
    if xs.len() < m {
        return Err(Error::InvalidInput(format!(
            "{} points cannot constrain {m} parameters",
            xs.len()
        )));
    }
    let exact_floor = 1e-26 * ys.iter().zip(weights).map(|(y, w)| w * y * y).sum::<f64>();

    let mut p = p0.to_vec();
    let mut normal = normal_equations(model, xs, ys, weights, &p);
    let mut lambda = opts.initial_lambda;
    let mut iterations = 0;
    // a nearly undamped step that moves no model value beyond its rounding
    // error: residuals are at the resolution of the data
    let mut stalled = false;

    loop {
        let rel = relative_gradient(&normal);
        if rel <= opts.gradient_tolerance || normal.chi2 <= exact_floor || stalled {
            let covariance = covariance_from_normal(&normal.h);
            return Ok(LsqSolution {
                params: p,
                covariance,
                chi_square: normal.chi2,
                iterations,
                relative_gradient: rel,
            });
        }
        if iterations >= opts.max_iterations {
            return Err(Error::FitFailed(format!(
                "no convergence after {iterations} iterations (relative gradient {rel:e})"
            )));
        }
        iterations += 1;

        let max_diag = normal.h.diagonal().iter().copied().fold(0.0, f64::max);
        let floor = max_diag * 1e-12;
        let accepted = loop {
            let mut a = normal.h.clone();
            for j in 0..m {
                a[(j, j)] += lambda * normal.h[(j, j)].max(floor);
            }
            if let Some(step) = solve(a, &normal.g) {
                let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let (chi2, noise) = chi_square(model, xs, ys, weights, &trial);
                // near the optimum the true decrease drops below the rounding
                // error of χ², so changes within that error are accepted
                if chi2.is_finite() && chi2 <= normal.chi2 + normal.noise + noise {
                    stalled = lambda <= opts.initial_lambda
                        && xs.iter().all(|&x| {
                            let moved = (model.value(x, &trial) - model.value(x, &p)).abs();
                            moved <= 4.0 * f64::EPSILON * model.magnitude(x, &p)
                        });
                    lambda = (lambda * 0.1).max(1e-15);
                    break Some(trial);
                }
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                break None;
            }
        };
        match accepted {
            Some(trial) => {
                p = trial;
                normal = normal_equations(model, xs, ys, weights, &p);
            }
            None => {
                return Err(Error::FitFailed(format!(
                    "step rejected at maximum damping (relative gradient {rel:e})"
                )))
            }
        }
    }
}

/// `1 / max(N, 1)` Poisson weights.
pub fn poisson_weights(counts: &[f64]) -> Vec<f64> {
    counts.iter().map(|&n| 1.0 / n.max(1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;

    impl LsqModel for Line {
        fn n_params(&self) -> usize {
            2
        }
        fn value(&self, x: f64, p: &[f64]) -> f64 {
            p[0] + p[1] * x
        }
        fn gradient(&self, x: f64, _p: &[f64], out: &mut [f64]) {
            out[0] = 1.0;
            out[1] = x;
        }
    }

    struct Exponential;

    impl LsqModel for Exponential {
        fn n_params(&self) -> usize {
            2
        }
        fn value(&self, x: f64, p: &[f64]) -> f64 {
            p[0] * (-p[1] * x).exp()
        }
        fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
            let e = (-p[1] * x).exp();
            out[0] = e;
            out[1] = -p[0] * x * e;
        }
    }

    #[test]
    fn weighted_line_matches_closed_form() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [1.1, 2.9, 5.2, 6.8, 9.1];
        let ws = [1.0, 2.0, 1.0, 0.5, 1.0];
        let sol = minimize(&Line, &xs, &ys, &ws, &[0.0, 0.0], &LsqOptions::default()).unwrap();
        // closed-form weighted regression
        let sw: f64 = ws.iter().sum();
        let sx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x).sum();
        let sy: f64 = ys.iter().zip(&ws).map(|(y, w)| w * y).sum();
        let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x * x).sum();
        let sxy: f64 = xs
            .iter()
            .zip(ys.iter())
            .zip(&ws)
            .map(|((x, y), w)| w * x * y)
            .sum();
        let det = sw * sxx - sx * sx;
        let slope = (sw * sxy - sx * sy) / det;
        let icpt = (sxx * sy - sx * sxy) / det;
        assert!((sol.params[0] - icpt).abs() < 1e-10);
        assert!((sol.params[1] - slope).abs() < 1e-10);
        assert!((sol.covariance[(1, 1)] - sw / det).abs() < 1e-12);
        assert!(sol.relative_gradient <= 1e-10);
    }

    #[test]
    fn exponential_from_poor_start() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
        let ws = vec![1.0; xs.len()];
        let sol = minimize(
            &Exponential,
            &xs,
            &ys,
            &ws,
            &[1.0, 0.1],
            &LsqOptions::default(),
        )
        .unwrap();
        assert!((sol.params[0] - 3.0).abs() < 1e-9);
        assert!((sol.params[1] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        assert!(minimize(
            &Line,
            &[1.0],
            &[1.0],
            &[1.0],
            &[0.0, 0.0],
            &LsqOptions::default()
        )
        .is_err());
    }
}
