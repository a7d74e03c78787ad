//! Loss minimizers: truncated SVD for the warped Frobenius loss and
//! full-batch gradient descent for the row-wise KL loss.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::proximity::{ProximityMatrix, Storage};
use crate::svd::{truncated_svd, LinearOperator, SvdConfig};
use crate::warping::{WarpFamily, WarpSpec};

/// Dual embeddings: `f` describes in-edge behaviour, `f_hat` out-edge
/// behaviour; a node's representation is their concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    pub f: DMatrix<f64>,
    pub f_hat: DMatrix<f64>,
    /// Singular values behind an SVD solution (empty for descent solutions).
    pub singular_values: Vec<f64>,
}

impl EmbeddingPair {
    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn dim(&self) -> usize {
        self.f.ncols()
    }

    /// `F F_hat^T`
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.f * self.f_hat.transpose()
    }

    /// `[F | F_hat]`, one row per node.
    pub fn features(&self) -> DMatrix<f64> {
        let (n, k) = (self.n(), self.dim());
        DMatrix::from_fn(n, 2 * k, |i, c| {
            if c < k {
                self.f[(i, c)]
            } else {
                self.f_hat[(i, c - k)]
            }
        })
    }
}

/// Splits a truncated SVD `U S V^T` into `F = U S^(1/2)`, `F_hat = V S^(1/2)`.
pub fn factorize(
    op: &impl LinearOperator,
    dim: usize,
    svd: &SvdConfig,
    seed: u64,
) -> Result<EmbeddingPair> {
    let t = truncated_svd(op, dim, svd, seed)?;
    let mut f = t.u;
    let mut f_hat = t.v;
    for (c, &s) in t.singular_values.iter().enumerate() {
        let r = s.sqrt();
        f.column_mut(c).scale_mut(r);
        f_hat.column_mut(c).scale_mut(r);
    }
    Ok(EmbeddingPair {
        f,
        f_hat,
        singular_values: t.singular_values,
    })
}

/// Dense factorization target `g^-1(Pi)`: non-zero entries are unwarped,
/// zero entries take [`WarpSpec::floor_value`] (`-c` for the exponential
/// warp).
pub fn warped_target(pi: &ProximityMatrix, spec: &WarpSpec) -> Result<DMatrix<f64>> {
    let floor = spec.floor_value();
    let mut z = match pi.storage() {
        Storage::Dense(m) => m.clone(),
        Storage::Sparse(m) => m.to_dense(),
    };
    for v in z.iter_mut() {
        if *v < 0.0 {
            return Err(Error::param(
                "warped factorization needs a non-negative proximity matrix",
            ));
        }
        *v = if *v == 0.0 { floor } else { spec.unwarp(*v)? };
    }
    Ok(z)
}

/// Minimizes `||F F_hat^T - g^-1(Pi)||_F^2` by rank-`dim` truncated SVD.
pub fn warped_frobenius_solve(
    pi: &ProximityMatrix,
    spec: &WarpSpec,
    dim: usize,
    svd: &SvdConfig,
    seed: u64,
) -> Result<EmbeddingPair> {
    if matches!(spec.family, WarpFamily::Sigmoid) {
        return Err(Error::Unsupported(
            "the sigmoid warp is only paired with the KL loss".into(),
        ));
    }
    if dim == 0 || dim > pi.n() {
        return Err(Error::param(format!(
            "embedding dimension {dim} must lie in 1..={}",
            pi.n()
        )));
    }
    let z = warped_target(pi, spec)?;
    factorize(&z, dim, svd, seed)
}

/// Natural log of the warp, evaluated stably.
fn ln_warp(spec: &WarpSpec, x: f64) -> Result<f64> {
    match spec.family {
        WarpFamily::Ibc { gamma } if gamma == 0.0 => Ok(x),
        WarpFamily::Ibc { gamma } => {
            if 1.0 + gamma * x <= 0.0 {
                return Err(Error::Domain { gamma, x });
            }
            Ok((gamma * x).ln_1p() / gamma)
        }
        // -ln(1 + e^-x)
        WarpFamily::Sigmoid => Ok(-((-x).max(0.0) + (-(x.abs())).exp().ln_1p())),
    }
}

/// Row-normalized proximity, erroring on rows that sum to zero.
fn row_distributions(pi: &ProximityMatrix) -> Result<DMatrix<f64>> {
    let mut p = pi.to_dense();
    for i in 0..p.nrows() {
        let total: f64 = p.row(i).sum();
        if !(total > 0.0) {
            return Err(Error::ZeroRow { node: i });
        }
        if p.row(i).iter().any(|&v| v < 0.0) {
            return Err(Error::param(
                "KL loss needs a non-negative proximity matrix",
            ));
        }
        p.row_mut(i).unscale_mut(total);
    }
    Ok(p)
}

/// Row-normalized `log g(S)` of a score matrix.
fn log_model_rows(scores: &DMatrix<f64>, spec: &WarpSpec) -> Result<DMatrix<f64>> {
    let mut lq = scores.clone();
    for v in lq.iter_mut() {
        *v = ln_warp(spec, *v)?;
    }
    for i in 0..lq.nrows() {
        let max = lq.row(i).max();
        let lse = max + lq.row(i).iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        lq.row_mut(i).add_scalar_mut(-lse);
    }
    Ok(lq)
}

fn kl_from_parts(p: &DMatrix<f64>, lq: &DMatrix<f64>) -> f64 {
    p.iter()
        .zip(lq.iter())
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &l)| pv * (pv.ln() - l))
        .sum()
}

/// `sum_i KL(Pi_i / |Pi_i| || Y_i / |Y_i|)` with `Y = g(F F_hat^T)`.
pub fn kl_loss(pi: &ProximityMatrix, pair: &EmbeddingPair, spec: &WarpSpec) -> Result<f64> {
    let p = row_distributions(pi)?;
    let lq = log_model_rows(&pair.reconstruct(), spec)?;
    Ok(kl_from_parts(&p, &lq))
}

/// KL loss together with its gradients with respect to `F` and `F_hat`.
pub fn kl_gradient(
    pi: &ProximityMatrix,
    f: &DMatrix<f64>,
    f_hat: &DMatrix<f64>,
    spec: &WarpSpec,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    let p = row_distributions(pi)?;
    kl_gradient_rows(&p, f, f_hat, spec)
}

fn kl_gradient_rows(
    p: &DMatrix<f64>,
    f: &DMatrix<f64>,
    f_hat: &DMatrix<f64>,
    spec: &WarpSpec,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    let scores = f * f_hat.transpose();
    let lq = log_model_rows(&scores, spec)?;
    let loss = kl_from_parts(p, &lq);
    // dL/dS_ij = (q_ij - p_ij) g'(S_ij) / g(S_ij)
    let mut g = lq.map(f64::exp) - p;
    for (gv, &s) in g.iter_mut().zip(scores.iter()) {
        *gv *= spec.log_derivative(s)?;
    }
    let grad_f = &g * f_hat;
    let grad_f_hat = g.tr_mul(f);
    Ok((loss, grad_f, grad_f_hat))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDescentConfig {
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the relative decrease of an accepted step falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for KlDescentConfig {
    fn default() -> Self {
        KlDescentConfig {
            step_size: 0.5,
            max_iters: 20_000,
            tolerance: 1e-12,
            seed: 42,
        }
    }
}

/// Full-batch gradient descent on the KL loss from a seeded Gaussian start
/// (standard deviation `0.1 / sqrt(dim)`). Steps that increase the loss are
/// rejected and the step size halved; accepted steps grow it by 10%.
/// Returns the best iterate.
pub fn kl_descent(
    pi: &ProximityMatrix,
    spec: &WarpSpec,
    dim: usize,
    cfg: &KlDescentConfig,
) -> Result<EmbeddingPair> {
    match spec.family {
        WarpFamily::Ibc { gamma } if gamma != 0.0 => {
            return Err(Error::Unsupported(
                "KL descent is implemented for the exponential and sigmoid warps".into(),
            ))
        }
        _ => {}
    }
    if !(cfg.step_size > 0.0 && cfg.tolerance > 0.0) {
        return Err(Error::param("step size and tolerance must be positive"));
    }
    let n = pi.n();
    if dim == 0 || dim > n {
        return Err(Error::param(format!(
            "embedding dimension {dim} must lie in 1..={n}"
        )));
    }
    let p = row_distributions(pi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 0.1 / (dim as f64).sqrt()).expect("valid normal");
    let mut f = DMatrix::from_fn(n, dim, |_, _| normal.sample(&mut rng));
    let mut f_hat = DMatrix::from_fn(n, dim, |_, _| normal.sample(&mut rng));

    let (mut loss, mut gf, mut gh) = kl_gradient_rows(&p, &f, &f_hat, spec)?;
    if !loss.is_finite() {
        return Err(Error::Numerical(
            "KL loss is not finite at the initial point".into(),
        ));
    }
    let mut step = cfg.step_size;
    for iter in 0..cfg.max_iters {
        let f_next = &f - &gf * step;
        let h_next = &f_hat - &gh * step;
        let (next_loss, ngf, ngh) = kl_gradient_rows(&p, &f_next, &h_next, spec)?;
        if !next_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "KL descent diverged at iteration {iter} with step size {step:.3e}"
            )));
        }
        if next_loss <= loss {
            let decrease = loss - next_loss;
            f = f_next;
            f_hat = h_next;
            gf = ngf;
            gh = ngh;
            loss = next_loss;
            step *= 1.1;
            if decrease <= cfg.tolerance * loss.max(f64::MIN_POSITIVE) || loss < 1e-15 {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
    }
    Ok(EmbeddingPair {
        f,
        f_hat,
        singular_values: Vec::new(),
    })
}
