use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Newton iterations stop once the gradient norm falls below this.
pub const LOGREG_GRAD_TOL: f64 = 1e-6;
const MAX_NEWTON_ITERS: usize = 100;

/// L2-regularized binary logistic regression minimizing
/// `(1/n) sum_i log(1 + exp(-y_i (w.x_i + b))) + (reg/2) (|w|^2 + b^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLogReg {
    pub weights: DVector<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl BinaryLogReg {
    pub fn decision(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.weights).add_scalar(self.intercept)
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.decision(x).map(sigmoid)
    }

    /// The regularized training objective at this model.
    pub fn objective(&self, x: &DMatrix<f64>, y: &[bool], reg: f64) -> f64 {
        let z = self.decision(x);
        let loss: f64 = z
            .iter()
            .zip(y)
            .map(|(&z, &pos)| softplus(if pos { -z } else { z }))
            .sum();
        loss / y.len() as f64
            + 0.5 * reg * (self.weights.norm_squared() + self.intercept * self.intercept)
    }
}

fn check_inputs(x: &DMatrix<f64>, n_targets: usize, reg: f64) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::param(
            "logistic regression needs at least one sample and one feature",
        ));
    }
    if x.nrows() != n_targets {
        return Err(Error::param(format!(
            "{} samples but {n_targets} targets",
            x.nrows()
        )));
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::param("regularization strength must be positive"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("features must be finite"));
    }
    Ok(())
}

/// Damped Newton method on the strictly convex objective; deterministic.
pub fn train_binary_logreg(x: &DMatrix<f64>, y: &[bool], reg: f64) -> Result<BinaryLogReg> {
    check_inputs(x, y.len(), reg)?;
    let (n, d) = (x.nrows(), x.ncols());
    // augmented design with a trailing intercept column
    let xa = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[(i, j)] } else { 1.0 });
    let sign = DVector::from_iterator(n, y.iter().map(|&p| if p { 1.0 } else { -1.0 }));
    let inv_n = 1.0 / n as f64;
    let objective = |theta: &DVector<f64>| {
        let z = &xa * theta;
        z.iter()
            .zip(sign.iter())
            .map(|(&z, &s)| softplus(-s * z))
            .sum::<f64>()
            * inv_n
            + 0.5 * reg * theta.norm_squared()
    };

    let mut theta = DVector::zeros(d + 1);
    let mut value = objective(&theta);
    let mut iterations = 0;
    for it in 0..MAX_NEWTON_ITERS {
        let z = &xa * &theta;
        // d/dz softplus(-s z) = -s sigmoid(-s z)
        let r = DVector::from_iterator(
            n,
            z.iter()
                .zip(sign.iter())
                .map(|(&z, &s)| -s * sigmoid(-s * z)),
        );
        let grad = xa.tr_mul(&r) * inv_n + &theta * reg;
        iterations = it;
        if grad.norm() < LOGREG_GRAD_TOL {
            break;
        }
        let curvature: Vec<f64> = z
            .iter()
            .map(|&z| sigmoid(z) * sigmoid(-z) * inv_n)
            .collect();
        let mut weighted = xa.clone();
        for (i, c) in curvature.iter().enumerate() {
            weighted.row_mut(i).scale_mut(*c);
        }
        let mut hess = xa.tr_mul(&weighted);
        for k in 0..=d {
            hess[(k, k)] += reg;
        }
        let step = hess
            .cholesky()
            .ok_or_else(|| {
                Error::Numerical("logistic-regression Hessian is not positive definite".into())
            })?
            .solve(&grad);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let candidate = &theta - &step * t;
            let v = objective(&candidate);
            if v <= value - 1e-4 * t * slope || t < 1e-10 {
                theta = candidate;
                value = v;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(BinaryLogReg {
        weights: theta.rows(0, d).into_owned(),
        intercept: theta[d],
        iterations,
    })
}

/// One binary model per label; `None` for labels without a positive
/// training example.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrModel {
    pub models: Vec<Option<BinaryLogReg>>,
}

impl OvrModel {
    /// `n x label_count` probabilities; NaN for labels without a model.
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::from_element(x.nrows(), self.models.len(), f64::NAN);
        for (l, m) in self.models.iter().enumerate() {
            if let Some(m) = m {
                out.set_column(l, &m.predict_proba(x));
            }
        }
        out
    }

    pub fn skipped(&self) -> usize {
        self.models.iter().filter(|m| m.is_none()).count()
    }
}

/// One-vs-rest training over `label_count` labels; `targets[i]` holds the
/// labels of sample `i`.
pub fn train_ovr_logreg(
    x: &DMatrix<f64>,
    targets: &[Vec<usize>],
    label_count: usize,
    reg: f64,
) -> Result<OvrModel> {
    check_inputs(x, targets.len(), reg)?;
    let models = (0..label_count)
        .into_par_iter()
        .map(|l| {
            let y: Vec<bool> = targets.iter().map(|t| t.contains(&l)).collect();
            if !y.iter().any(|&p| p) {
                log::warn!("label {l} has no training example; it will never be predicted");
                return Ok(None);
            }
            train_binary_logreg(x, &y, reg).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OvrModel { models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_toy_set_is_fit() {
        let x = DMatrix::from_row_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [false, false, false, true, true, true];
        let m = train_binary_logreg(&x, &y, 1e-3).unwrap();
        let p = m.predict_proba(&x);
        for (pi, &yi) in p.iter().zip(&y) {
            assert_eq!(*pi > 0.5, yi);
        }
    }

    #[test]
    fn all_negative_label_stays_below_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(15, 3, |_, _| rng.random_range(-1.0..1.0));
        let m = train_binary_logreg(&x, &[false; 15], 1.0).unwrap();
        assert!(m.predict_proba(&x).iter().all(|&p| p < 0.5));
    }

    #[test]
    fn matches_gradient_descent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-2.0..2.0));
        let y: Vec<bool> = (0..20).map(|_| rng.random::<bool>()).collect();
        let reg = 0.1;
        let m = train_binary_logreg(&x, &y, reg).unwrap();
        // plain gradient descent with a fixed step well under 1/Lipschitz
        let mut theta = [0.0f64; 4];
        for _ in 0..100_000 {
            let mut g = [0.0; 4];
            for i in 0..20 {
                let z = theta[3] + (0..3).map(|k| theta[k] * x[(i, k)]).sum::<f64>();
                let s = if y[i] { 1.0 } else { -1.0 };
                let r = -s / (1.0 + (s * z).exp()) / 20.0;
                for k in 0..3 {
                    g[k] += r * x[(i, k)];
                }
                g[3] += r;
            }
            for k in 0..4 {
                theta[k] -= 0.25 * (g[k] + reg * theta[k]);
            }
        }
        let oracle = BinaryLogReg {
            weights: DVector::from_row_slice(&theta[..3]),
            intercept: theta[3],
            iterations: 0,
        };
        assert!((m.objective(&x, &y, reg) - oracle.objective(&x, &y, reg)).abs() < 1e-6);
        assert!((m.weights.clone() - oracle.weights.clone()).norm() < 1e-5);
    }

    #[test]
    fn duplicated_training_set_gives_same_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(12, 2, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<bool> = (0..12).map(|i| i % 3 == 0).collect();
        let xx = DMatrix::from_fn(24, 2, |i, j| x[(i % 12, j)]);
        let yy: Vec<bool> = (0..24).map(|i| y[i % 12]).collect();
        let a = train_binary_logreg(&x, &y, 0.5).unwrap();
        let b = train_binary_logreg(&xx, &yy, 0.5).unwrap();
        assert!((a.decision(&x) - b.decision(&x)).abs().max() < 1e-6);
    }

    #[test]
    fn ovr_skips_absent_labels_and_rejects_bad_features() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let m = train_ovr_logreg(&x, &[vec![0], vec![0], vec![2]], 3, 1.0).unwrap();
        assert_eq!(m.skipped(), 1);
        assert!(m.predict_proba(&x).column(1).iter().all(|p| p.is_nan()));
        let bad = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(train_ovr_logreg(&bad, &[vec![0]], 1, 1.0).is_err());
    }
}
