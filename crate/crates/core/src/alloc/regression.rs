use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evidence-maximisation settings. The four gamma hyperpriors follow the
/// usual weakly informative defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeOptions {
    pub max_iter: u32,
    /// Stop once the coefficient vector moves by less than this, relative.
    pub tol: f64,
    pub alpha_1: f64,
    pub alpha_2: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    /// Skip the evidence updates and use these (noise, weight) precisions.
    pub fixed: Option<(f64, f64)>,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions {
            max_iter: 300,
            tol: 1e-6,
            alpha_1: 1e-6,
            alpha_2: 1e-6,
            lambda_1: 1e-6,
            lambda_2: 1e-6,
            fixed: None,
        }
    }
}

/// Linear model on z-scored features with an unpenalised intercept.
/// Features with zero variance in the training data get a zero scale and
/// are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeModel {
    /// On standardised features.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Noise precision.
    pub alpha: f64,
    /// Weight precision.
    pub lambda: f64,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub iterations: u32,
    pub converged: bool,
}

impl RidgeModel {
    /// A model given directly in raw feature units.
    pub fn linear(intercept: f64, coefficients: &[f64]) -> Self {
        RidgeModel {
            coefficients: coefficients.to_vec(),
            intercept,
            alpha: 1.0,
            lambda: 1.0,
            x_mean: vec![0.0; coefficients.len()],
            x_scale: vec![1.0; coefficients.len()],
            iterations: 0,
            converged: true,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + x.iter()
                .zip(&self.coefficients)
                .zip(self.x_mean.iter().zip(&self.x_scale))
                .filter(|(_, (_, s))| **s > 0.0)
                .map(|((xi, c), (m, s))| c * (xi - m) / s)
                .sum::<f64>()
    }

    /// Coefficients and intercept in raw feature units.
    pub fn raw_coefficients(&self) -> (f64, Vec<f64>) {
        let mut intercept = self.intercept;
        let coefs = self
            .coefficients
            .iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(c, (m, s))| {
                if *s > 0.0 {
                    intercept -= c * m / s;
                    c / s
                } else {
                    0.0
                }
            })
            .collect();
        (intercept, coefs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.coefficients.len();
        if self.x_mean.len() != n || self.x_scale.len() != n {
            return Err(Error::Schema("coefficient and normalisation lengths differ".into()));
        }
        if !(self.alpha > 0.0 && self.lambda > 0.0) {
            return Err(Error::Schema("precisions must be positive".into()));
        }
        let finite = self
            .coefficients
            .iter()
            .chain(&self.x_mean)
            .chain(&self.x_scale)
            .all(|v| v.is_finite());
        if !finite || !self.intercept.is_finite() || self.x_scale.iter().any(|s| *s < 0.0) {
            return Err(Error::Schema("non-finite or negative model parameters".into()));
        }
        Ok(())
    }
}

/// Population mean and standard deviation per column.
fn standardise(rows: &[Vec<f64>], p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let scale = (0..p)
        .map(|j| {
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            // relative cut so constant columns with float noise count as constant
            if sd <= 1e-12 * mean[j].abs().max(1.0) {
                0.0
            } else {
                sd
            }
        })
        .collect();
    (mean, scale)
}

/// Bayesian ridge regression: the posterior mean for the (noise, weight)
/// precisions that maximise the marginal likelihood, found by fixed-point
/// iteration.
pub fn fit_ridge(x: &[Vec<f64>], y: &[f64], opts: &RidgeOptions) -> Result<RidgeModel> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Regression(format!(
            "need at least 2 samples with targets, got {n}"
        )));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Regression("ragged feature rows".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Regression("non-finite feature or target".into()));
    }
    let (x_mean, x_scale) = standardise(x, p);
    let active: Vec<usize> = (0..p).filter(|&j| x_scale[j] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::Regression("every feature is constant".into()));
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xs = DMatrix::from_fn(n, active.len(), |i, k| {
        let j = active[k];
        (x[i][j] - x_mean[j]) / x_scale[j]
    });
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let xty = xs.transpose() * &yc;
    let eig = SymmetricEigen::new(xs.transpose() * &xs);
    let ev = eig.eigenvalues.map(|v| v.max(0.0));
    let vt_xty = eig.eigenvectors.transpose() * &xty;
    let solve = |ratio: f64| -> DVector<f64> {
        let scaled = DVector::from_iterator(ev.len(), vt_xty.iter().zip(ev.iter()).map(|(b, e)| b / (e + ratio)));
        &eig.eigenvectors * scaled
    };

    let (alpha, lambda, coef, iterations, converged) = match opts.fixed {
        Some((alpha, lambda)) => {
            if !(alpha > 0.0 && lambda > 0.0) {
                return Err(Error::Regression("fixed precisions must be positive".into()));
            }
            (alpha, lambda, solve(lambda / alpha), 0, true)
        }
        None => {
            let var_y = yc.norm_squared() / n as f64;
            let mut alpha = 1.0 / (var_y + f64::EPSILON);
            let mut lambda = 1.0;
            let mut coef = solve(lambda / alpha);
            let mut iterations = 0;
            let mut converged = false;
            while iterations < opts.max_iter {
                iterations += 1;
                let gamma: f64 = ev.iter().map(|e| alpha * e / (lambda + alpha * e)).sum();
                let rss = (&yc - &xs * &coef).norm_squared();
                lambda = (gamma + 2.0 * opts.lambda_1) / (coef.norm_squared() + 2.0 * opts.lambda_2);
                alpha = (n as f64 - gamma + 2.0 * opts.alpha_1) / (rss + 2.0 * opts.alpha_2);
                let next = solve(lambda / alpha);
                let moved = (&next - &coef).norm();
                let size = next.norm().max(f64::MIN_POSITIVE);
                coef = next;
                if moved <= opts.tol * size {
                    converged = true;
                    break;
                }
            }
            (alpha, lambda, coef, iterations, converged)
        }
    };
    let mut coefficients = vec![0.0; p];
    for (k, &j) in active.iter().enumerate() {
        coefficients[j] = coef[k];
    }
    Ok(RidgeModel {
        coefficients,
        intercept: y_mean,
        alpha,
        lambda,
        x_mean,
        x_scale,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn data(n: usize, f: impl Fn(f64, f64) -> f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, ((i * 7) % 11) as f64]).collect();
        let y = x.iter().map(|r| f(r[0], r[1])).collect();
        (x, y)
    }

    #[test]
    fn recovers_noiseless_linear_data() {
        let (x, y) = data(40, |a, b| 3.0 + 2.0 * a - 0.5 * b);
        let m = fit_ridge(&x, &y, &RidgeOptions::default()).unwrap();
        let (b0, c) = m.raw_coefficients();
        assert_relative_eq!(b0, 3.0, max_relative = 1e-6);
        assert_relative_eq!(c[0], 2.0, max_relative = 1e-6);
        assert_relative_eq!(c[1], -0.5, max_relative = 1e-6);
        assert!(m.converged);
        assert_relative_eq!(m.predict(&x[5]), y[5], max_relative = 1e-6);
    }

    #[test]
    fn zero_features_predict_intercept_of_raw_model() {
        let m = RidgeModel::linear(4.5, &[1.0, 2.0]);
        assert_eq!(m.predict(&[0.0, 0.0]), 4.5);
    }

    #[test]
    fn constant_features_are_ignored() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 7.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let m = fit_ridge(&x, &y, &RidgeOptions::default()).unwrap();
        assert_eq!(m.coefficients[1], 0.0);
        assert_eq!(m.x_scale[1], 0.0);
        let all_const: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0, 7.0]).collect();
        assert!(fit_ridge(&all_const, &y, &RidgeOptions::default()).is_err());
    }

    #[test]
    fn slope_approaches_generator_as_noise_precision_grows() {
        let (x, y) = data(20, |a, _| 2.0 * a);
        let x1: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0]]).collect();
        let mut last = f64::INFINITY;
        for alpha in [1e-2, 1.0, 1e2, 1e6] {
            let opts = RidgeOptions {
                fixed: Some((alpha, 1.0)),
                ..RidgeOptions::default()
            };
            let slope = fit_ridge(&x1, &y, &opts).unwrap().raw_coefficients().1[0];
            let err = (slope - 2.0).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit_ridge(&[vec![1.0]], &[1.0], &RidgeOptions::default()).is_err());
        assert!(fit_ridge(&[vec![1.0], vec![f64::NAN]], &[1.0, 2.0], &RidgeOptions::default()).is_err());
    }
}
