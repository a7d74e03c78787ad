//! UltimateWalk: clipped-log factorization of the finite-step proximity,
//! either in closed form or from random-walk visit counts, plus split
//! averaging and a scaling benchmark.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{transition_matrix, DanglingPolicy, Graph};
use crate::proximity::{
    fsmt_edge_state, fsmt_walk_estimate, fst, fst_walk_estimate, ProximityMatrix, VisitCounts,
};
use crate::solver::{factorize, warped_frobenius_solve, EmbeddingPair};
use crate::sparse::CsrMatrix;
use crate::svd::{SparseOperator, SvdConfig};
use crate::warping::{WarpSpec, DEFAULT_CLIP_C};

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    /// Walk length `L`.
    pub walk_length: usize,
    /// Trials per start node `m`.
    pub trials: usize,
    /// Split count `T`; must divide `trials`.
    pub splits: usize,
    /// Return factor.
    pub p: f64,
    /// In-out factor.
    pub q: f64,
    pub clip_c: f64,
    pub seed: u64,
    /// Embedding dimension `K`.
    pub dim: usize,
    pub dangling: DanglingPolicy,
    /// Largest node count accepted by the closed form.
    pub closed_cap: usize,
    /// Factorization settings. The default runs a fixed number of sweeps:
    /// leading singular values of walk proximities are often nearly
    /// degenerate, and waiting for them to settle costs more sweeps the
    /// larger the graph.
    pub svd: SvdConfig,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_length: 7,
            trials: 50,
            splits: 1,
            p: 1.0,
            q: 1.0,
            clip_c: DEFAULT_CLIP_C,
            seed: 42,
            dim: 64,
            dangling: DanglingPolicy::SelfLoop,
            closed_cap: 20_000,
            svd: SvdConfig {
                power_iters: 20,
                tol: 0.0,
                ..SvdConfig::default()
            },
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length == 0 {
            return Err(Error::param("walk length must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::param("number of trials must be at least 1"));
        }
        if self.splits == 0 || self.trials % self.splits != 0 {
            return Err(Error::param(format!(
                "split count {} must be positive and divide the trial count {}",
                self.splits, self.trials
            )));
        }
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return Err(Error::param(
                "memory factors p and q must be positive and finite",
            ));
        }
        if !(self.clip_c > 0.0) {
            return Err(Error::param("clip constant must be positive"));
        }
        if self.dim == 0 {
            return Err(Error::param("embedding dimension must be at least 1"));
        }
        Ok(())
    }

    fn has_memory(&self) -> bool {
        self.p != 1.0 || self.q != 1.0
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        self.validate()?;
        if g.n() == 0 {
            return Err(Error::EmptyGraph);
        }
        if g.n() < self.dim {
            return Err(Error::param(format!(
                "graph has {} nodes, fewer than the embedding dimension {}",
                g.n(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Exact finite-step proximity: plain when `p = q = 1`, memory-modulated
/// otherwise.
pub fn closed_proximity(g: &Graph, cfg: &WalkConfig) -> Result<ProximityMatrix> {
    cfg.validate()?;
    if cfg.has_memory() {
        fsmt_edge_state(g, cfg.p, cfg.q, cfg.walk_length, cfg.dangling)
    } else {
        fst(&transition_matrix(g, cfg.dangling), cfg.walk_length)
    }
}

/// Warped Frobenius embedding of the closed-form proximity under any IBC
/// warp; `ultimatewalk_closed` is the exponential case.
pub fn gemd_closed(g: &Graph, cfg: &WalkConfig, spec: &WarpSpec) -> Result<EmbeddingPair> {
    cfg.check_graph(g)?;
    if g.n() > cfg.closed_cap {
        return Err(Error::Capacity(format!(
            "closed form needs a dense {n} x {n} matrix and is capped at {} nodes; use the scalable mode",
            cfg.closed_cap,
            n = g.n()
        )));
    }
    let pi = closed_proximity(g, cfg)?;
    warped_frobenius_solve(&pi, spec, cfg.dim, &cfg.svd, cfg.seed)
}

/// Rank-`K` factorization of `Z = log(Pi)` with `-c` where `Pi` is zero.
pub fn ultimatewalk_closed(g: &Graph, cfg: &WalkConfig) -> Result<EmbeddingPair> {
    gemd_closed(g, cfg, &WarpSpec::exponential().with_clip(cfg.clip_c)?)
}

/// Sparse proxy target `g^-1(S/m) - floor` on the observed support, zero
/// elsewhere. For the exponential warp this is `log(S/m) + c`.
pub fn shifted_target(estimate: &ProximityMatrix, spec: &WarpSpec) -> Result<CsrMatrix> {
    let floor = spec.floor_value();
    let s = estimate.to_sparse();
    let mut triplets = Vec::with_capacity(s.nnz());
    for (i, j, v) in s.triplets() {
        triplets.push((i, j, spec.unwarp(v)? - floor));
    }
    Ok(CsrMatrix::from_triplets(s.nrows(), s.ncols(), &triplets))
}

/// Visit counts from the walker matching the configured memory factors.
pub fn visit_counts(g: &Graph, cfg: &WalkConfig) -> Result<VisitCounts> {
    if cfg.has_memory() {
        fsmt_walk_estimate(g, cfg)
    } else {
        fst_walk_estimate(g, cfg)
    }
}

fn proxy(g: &Graph, cfg: &WalkConfig, spec: &WarpSpec) -> Result<CsrMatrix> {
    shifted_target(&visit_counts(g, cfg)?.estimate(), spec)
}

/// Scalable embedding under an arbitrary IBC warp.
pub fn gemd_scalable(g: &Graph, cfg: &WalkConfig, spec: &WarpSpec) -> Result<EmbeddingPair> {
    cfg.check_graph(g)?;
    if cfg.splits > 1 {
        return split_average_with(g, cfg, spec);
    }
    let z = proxy(g, cfg, spec)?;
    factorize(&SparseOperator::new(z), cfg.dim, &cfg.svd, cfg.seed)
}

/// Random-walk estimate `S/m` of the proximity, factorized through the
/// sparse proxy `(log(S/m) + c)` on observed entries. The `+c` shift is kept.
pub fn ultimatewalk_scalable(g: &Graph, cfg: &WalkConfig) -> Result<EmbeddingPair> {
    let single = WalkConfig {
        splits: 1,
        ..cfg.clone()
    };
    gemd_scalable(g, &single, &WarpSpec::exponential().with_clip(cfg.clip_c)?)
}

/// Which UltimateWalk variant produces an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbedMode {
    Closed,
    #[default]
    Scalable,
}

/// Embedding under the warp `spec` by the chosen variant (split averaging applies
/// to the scalable variant when `cfg.splits > 1`).
pub fn embed(
    g: &Graph,
    cfg: &WalkConfig,
    spec: &WarpSpec,
    mode: EmbedMode,
) -> Result<EmbeddingPair> {
    match mode {
        EmbedMode::Closed => gemd_closed(g, cfg, spec),
        EmbedMode::Scalable => gemd_scalable(g, cfg, spec),
    }
}

/// Seed of split `t`: a SplitMix64 finalization of `(seed, t)`.
pub fn split_seed(seed: u64, t: usize) -> u64 {
    let mut z = seed ^ (t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Average of the per-split proxies built from `T` independent runs of
/// `m / T` trials each. Entries a split never observed count as zero.
pub fn averaged_proxy(g: &Graph, cfg: &WalkConfig, spec: &WarpSpec) -> Result<CsrMatrix> {
    cfg.validate()?;
    let per_split = cfg.trials / cfg.splits;
    let parts: Vec<CsrMatrix> = (0..cfg.splits)
        .into_par_iter()
        .map(|t| {
            let split = WalkConfig {
                trials: per_split,
                splits: 1,
                seed: split_seed(cfg.seed, t),
                ..cfg.clone()
            };
            proxy(g, &split, spec)
        })
        .collect::<Result<_>>()?;
    let mut sum = parts[0].clone();
    for part in &parts[1..] {
        sum = sum.add(part);
    }
    Ok(sum.scale(1.0 / cfg.splits as f64))
}

fn split_average_with(g: &Graph, cfg: &WalkConfig, spec: &WarpSpec) -> Result<EmbeddingPair> {
    let z = averaged_proxy(g, cfg, spec)?;
    factorize(&SparseOperator::new(z), cfg.dim, &cfg.svd, cfg.seed)
}

/// Data-split averaging. `T = 1` is exactly [`ultimatewalk_scalable`].
pub fn split_average(g: &Graph, cfg: &WalkConfig) -> Result<EmbeddingPair> {
    cfg.check_graph(g)?;
    if cfg.splits == 1 {
        return ultimatewalk_scalable(g, cfg);
    }
    split_average_with(g, cfg, &WarpSpec::exponential().with_clip(cfg.clip_c)?)
}

/// Maximum-likelihood estimate of `mu` for i.i.d. log-normal samples with
/// log-mean `mu`: the mean of the logs.
pub fn mle_log_mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::param("need at least one sample"));
    }
    if samples.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::param("log-normal samples must be positive"));
    }
    Ok(samples.iter().map(|x| x.ln()).sum::<f64>() / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    pub nodes: usize,
    pub edges: usize,
    pub seconds: f64,
}

/// Wall time of the scalable pipeline on `generator(size)` for each size.
/// Graph generation is not timed.
pub fn benchmark_scaling(
    generator: impl Fn(usize) -> Result<Graph>,
    sizes: &[usize],
    cfg: &WalkConfig,
) -> Result<Vec<BenchRow>> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("benchmark sizes must be ascending"));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let g = generator(size)?;
        let start = Instant::now();
        split_average(&g, cfg)?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!(
            "benchmark size {size}: {} edges in {seconds:.3}s",
            g.edge_count()
        );
        rows.push(BenchRow {
            size,
            nodes: g.n(),
            edges: g.edge_count(),
            seconds,
        });
    }
    Ok(rows)
}
