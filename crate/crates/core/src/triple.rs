//! Embedding objectives as (proximity, warp, loss) triples, with the
//! presets that reproduce DeepWalk, node2vec, LINE and matrix
//! factorization.

use crate::error::Result;
use crate::graph::{transition_matrix, DanglingPolicy, Graph};
use crate::proximity::{adjacency, fsmt_edge_state, fst, ProximityMatrix};
use crate::solver::{
    kl_descent, kl_loss, warped_frobenius_solve, warped_target, EmbeddingPair, KlDescentConfig,
};
use crate::svd::SvdConfig;
use crate::warping::WarpSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Row-normalized KL divergence.
    Kl,
    /// `||F F_hat^T - g^-1(Pi)||_F^2`.
    WarpedFrobenius,
}

#[derive(Debug, Clone)]
pub struct Triple {
    pub proximity: ProximityMatrix,
    pub warp: WarpSpec,
    pub loss: Loss,
}

impl Triple {
    /// Finite-step proximity, exponential warp, KL loss.
    pub fn deepwalk(g: &Graph, steps: usize) -> Result<Self> {
        Ok(Triple {
            proximity: fst(&transition_matrix(g, DanglingPolicy::SelfLoop), steps)?,
            warp: WarpSpec::exponential(),
            loss: Loss::Kl,
        })
    }

    /// Memory-modulated finite-step proximity, exponential warp, KL loss.
    pub fn node2vec(g: &Graph, steps: usize, p: f64, q: f64) -> Result<Self> {
        Ok(Triple {
            proximity: fsmt_edge_state(g, p, q, steps, DanglingPolicy::SelfLoop)?,
            warp: WarpSpec::exponential(),
            loss: Loss::Kl,
        })
    }

    /// Transition matrix, sigmoid warp, KL loss.
    pub fn line(g: &Graph) -> Self {
        Triple {
            proximity: transition_matrix(g, DanglingPolicy::SelfLoop),
            warp: WarpSpec::sigmoid(),
            loss: Loss::Kl,
        }
    }

    /// Adjacency matrix, linear warp `1 + x`, warped Frobenius loss.
    pub fn matrix_factorization(g: &Graph) -> Self {
        Triple {
            proximity: adjacency(g),
            warp: WarpSpec::linear(),
            loss: Loss::WarpedFrobenius,
        }
    }

    pub fn objective(&self, pair: &EmbeddingPair) -> Result<f64> {
        match self.loss {
            Loss::Kl => kl_loss(&self.proximity, pair, &self.warp),
            Loss::WarpedFrobenius => {
                let z = warped_target(&self.proximity, &self.warp)?;
                Ok((pair.reconstruct() - z).norm_squared())
            }
        }
    }

    /// Minimizes the objective: truncated SVD for the Frobenius loss,
    /// gradient descent for KL.
    pub fn solve(
        &self,
        dim: usize,
        svd: &SvdConfig,
        kl: &KlDescentConfig,
    ) -> Result<EmbeddingPair> {
        match self.loss {
            Loss::Kl => kl_descent(&self.proximity, &self.warp, dim, kl),
            Loss::WarpedFrobenius => {
                warped_frobenius_solve(&self.proximity, &self.warp, dim, svd, kl.seed)
            }
        }
    }
}
