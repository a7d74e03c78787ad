//! Truncated SVD by seeded randomized subspace iteration.
//!
//! A Gaussian test block of width `k + oversample` is pushed through
//! `A` and `A^T` until the leading `k` Ritz values stop moving (after at
//! least `power_iters` sweeps). The small projected problem is solved
//! densely. Works against any [`LinearOperator`], so dense targets and
//! sparse walk-estimated targets share one code path.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A x`
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `A^T x`
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }

    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(x)
    }
}

/// A sparse matrix together with its transpose.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    a: CsrMatrix,
    a_t: CsrMatrix,
}

impl SparseOperator {
    pub fn new(a: CsrMatrix) -> Self {
        let a_t = a.transpose();
        SparseOperator { a, a_t }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }
}

impl LinearOperator for SparseOperator {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }

    fn ncols(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.a.mul_dense(x)
    }

    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.a_t.mul_dense(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdConfig {
    pub oversample: usize,
    /// Minimum number of power sweeps.
    pub power_iters: usize,
    /// Convergence threshold on the change of the leading Ritz values,
    /// relative to the largest one. Zero or less runs exactly
    /// `power_iters` sweeps, which bounds the cost to a fixed number of
    /// operator products.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig {
            oversample: 8,
            power_iters: 6,
            tol: 1e-10,
            max_iters: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `m x k`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// `n x k`, orthonormal columns.
    pub v: DMatrix<f64>,
    pub iterations: usize,
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Thin SVD of a tall matrix with singular values sorted in decreasing order.
fn sorted_thin_svd(m: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V^T").transpose();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, c| u[(i, order[c])]);
    let v = DMatrix::from_fn(v.nrows(), order.len(), |i, c| v[(i, order[c])]);
    let s = order.iter().map(|&c| s[c]).collect();
    (u, s, v)
}

/// Rank-`k` truncated SVD of `op`.
///
/// Each left singular vector is sign-normalized so that its largest
/// magnitude entry (first one on ties) is positive; the matching right
/// vector is flipped with it.
pub fn truncated_svd(
    op: &impl LinearOperator,
    k: usize,
    cfg: &SvdConfig,
    seed: u64,
) -> Result<TruncatedSvd> {
    let (m, n) = (op.nrows(), op.ncols());
    if k == 0 || k > m.min(n) {
        return Err(Error::param(format!(
            "rank {k} must lie in 1..={}",
            m.min(n)
        )));
    }
    let width = (k + cfg.oversample).min(m.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(n, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(op.apply(&omega));

    let mut previous: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;
    for iter in 0..cfg.max_iters.max(cfg.power_iters + 1) {
        // z = A^T q, so z^T = q^T A is the projected problem
        let z = op.apply_t(&q);
        let (zu, s, zv) = sorted_thin_svd(z.clone());
        let converged = cfg.tol <= 0.0
            || match &previous {
                Some(prev) => {
                    let scale = s[0].max(f64::MIN_POSITIVE);
                    last_change = s[..k]
                        .iter()
                        .zip(&prev[..k])
                        .map(|(a, b)| (a - b).abs() / scale)
                        .fold(0.0, f64::max);
                    last_change <= cfg.tol
                }
                None => false,
            };
        if (converged && iter >= cfg.power_iters) || width == m.min(n) && iter >= cfg.power_iters {
            // q^T A = zv diag(s) zu^T
            let mut u = (&q * zv).columns(0, k).into_owned();
            let mut v = zu.columns(0, k).into_owned();
            for c in 0..k {
                let col = u.column(c);
                let (mut at, mut best) = (0, 0.0f64);
                for (i, &x) in col.iter().enumerate() {
                    if x.abs() > best {
                        best = x.abs();
                        at = i;
                    }
                }
                if col[at] < 0.0 {
                    u.column_mut(c).neg_mut();
                    v.column_mut(c).neg_mut();
                }
            }
            return Ok(TruncatedSvd {
                u,
                singular_values: s[..k].to_vec(),
                v,
                iterations: iter,
            });
        }
        previous = Some(s);
        q = orthonormalize(op.apply(&orthonormalize(z)));
    }
    Err(Error::Numerical(format!(
        "truncated SVD did not converge in {} iterations (last relative change of leading singular values {last_change:.3e}, tolerance {:.1e})",
        cfg.max_iters, cfg.tol
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn full_rank_reconstructs_exactly() {
        let a = random_matrix(7, 7, 1);
        let svd = truncated_svd(&a, 7, &SvdConfig::default(), 3).unwrap();
        let rec = &svd.u
            * DMatrix::from_diagonal(&svd.singular_values.clone().into())
            * svd.v.transpose();
        assert!((rec - &a).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn matches_dense_singular_values() {
        let a = random_matrix(40, 30, 2);
        let svd = truncated_svd(&a, 5, &SvdConfig::default(), 9).unwrap();
        let mut dense: Vec<f64> = a.singular_values().iter().copied().collect();
        dense.sort_by(|x, y| y.total_cmp(x));
        for (s, d) in svd.singular_values.iter().zip(&dense) {
            assert!((s - d).abs() < 1e-8 * dense[0], "{s} vs {d}");
        }
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn factors_are_orthonormal_and_sign_fixed() {
        let a = random_matrix(25, 20, 4);
        let svd = truncated_svd(&a, 4, &SvdConfig::default(), 1).unwrap();
        let eye = DMatrix::<f64>::identity(4, 4);
        assert!((svd.u.tr_mul(&svd.u) - &eye).abs().max() < 1e-8);
        assert!((svd.v.tr_mul(&svd.v) - &eye).abs().max() < 1e-8);
        for c in 0..4 {
            let col = svd.u.column(c);
            let big = col
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn sparse_and_dense_operators_agree() {
        let mut a = random_matrix(30, 30, 5);
        a.iter_mut().enumerate().for_each(|(i, v)| {
            if i % 3 != 0 {
                *v = 0.0
            }
        });
        let sparse = SparseOperator::new(CsrMatrix::from_dense(&a));
        let cfg = SvdConfig::default();
        let d = truncated_svd(&a, 3, &cfg, 8).unwrap();
        let s = truncated_svd(&sparse, 3, &cfg, 8).unwrap();
        for (x, y) in d.singular_values.iter().zip(&s.singular_values) {
            assert!((x - y).abs() < 1e-9 * x);
        }
        assert!((d.u - s.u).abs().max() < 1e-6);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = random_matrix(20, 15, 6);
        let x = truncated_svd(&a, 3, &SvdConfig::default(), 2).unwrap();
        let y = truncated_svd(&a, 3, &SvdConfig::default(), 2).unwrap();
        assert_eq!(x.u, y.u);
        assert_eq!(x.singular_values, y.singular_values);
    }

    #[test]
    fn rank_out_of_range() {
        let a = random_matrix(4, 3, 0);
        assert!(truncated_svd(&a, 0, &SvdConfig::default(), 0).is_err());
        assert!(truncated_svd(&a, 4, &SvdConfig::default(), 0).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = random_matrix(60, 60, 7);
        let cfg = SvdConfig {
            oversample: 0,
            power_iters: 0,
            tol: 1e-15,
            max_iters: 2,
        };
        match truncated_svd(&a, 10, &cfg, 0) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("did not converge")),
            other => panic!("{other:?}"),
        }
    }
}
