//! Monte-Carlo visit counts from first- and second-order random walks.
//!
//! Every `(start node, trial)` pair draws from its own position of a ChaCha
//! keystream: the key comes from the seed, the stream id is the start node
//! and the word offset is derived from the trial index. Results therefore do
//! not depend on how start nodes are scheduled across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::fsmt::MemoryBias;
use super::{ProximityKind, ProximityMatrix, ProximityParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::CsrMatrix;
use crate::ultimatewalk::WalkConfig;

/// Keystream words reserved per trial.
const TRIAL_STRIDE: u128 = 1 << 40;

/// Sparse visit counts `S[i, j]`: visits to `j` over all trials started at `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitCounts {
    rows: Vec<Vec<(usize, u32)>>,
    pub trials: usize,
    pub walk_length: usize,
    pub seed: u64,
    memory: Option<(f64, f64)>,
}

impl VisitCounts {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, u32)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |e| e.0)
            .map_or(0, |k| row[k].1)
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.rows[i].iter().map(|e| e.1 as u64).sum()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `S / m`, the estimate of the (memory-modulated) finite-step matrix.
    pub fn estimate(&self) -> ProximityMatrix {
        let m = self.trials as f64;
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&(j, c)| (j, c as f64 / m)).collect())
            .collect();
        let (kind, p, q) = match self.memory {
            Some((p, q)) => (ProximityKind::EstimatedFsmt, Some(p), Some(q)),
            None => (ProximityKind::EstimatedFst, None, None),
        };
        ProximityMatrix::sparse(
            CsrMatrix::from_rows(self.n(), rows),
            kind,
            ProximityParams {
                steps: Some(self.walk_length),
                trials: Some(self.trials),
                p,
                q,
                ..Default::default()
            },
        )
    }
}

struct Sampler {
    rows: Vec<Vec<(usize, f64)>>,
    cumulative: Vec<Vec<f64>>,
    bias: Option<MemoryBias>,
}

#[inline]
fn pick(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().unwrap();
    let target = u * total;
    cumulative
        .partition_point(|&c| c <= target)
        .min(cumulative.len() - 1)
}

impl Sampler {
    fn new(g: &Graph, cfg: &WalkConfig, memory: bool) -> Result<Self> {
        let rows = g.effective_rows(cfg.dangling);
        let cumulative = rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|&(_, w)| {
                        acc += w;
                        acc
                    })
                    .collect()
            })
            .collect();
        let bias = if memory {
            Some(MemoryBias::new(g, cfg.p, cfg.q)?)
        } else {
            None
        };
        Ok(Sampler {
            rows,
            cumulative,
            bias,
        })
    }

    fn walk(
        &self,
        start: usize,
        steps: usize,
        rng: &mut ChaCha8Rng,
        scratch: &mut Vec<f64>,
        visits: &mut Vec<usize>,
    ) {
        let mut prev: Option<usize> = None;
        let mut cur = start;
        for _ in 0..steps {
            let row = &self.rows[cur];
            if row.is_empty() {
                return;
            }
            let u: f64 = rng.random();
            let idx = match (&self.bias, prev) {
                (Some(bias), Some(t)) => {
                    scratch.clear();
                    let mut acc = 0.0;
                    for &(j, w) in row {
                        acc += w * bias.factor(t, j);
                        scratch.push(acc);
                    }
                    pick(scratch, u)
                }
                _ => pick(&self.cumulative[cur], u),
            };
            let next = row[idx].0;
            visits.push(next);
            prev = Some(cur);
            cur = next;
        }
    }
}

fn simulate(g: &Graph, cfg: &WalkConfig, memory: bool) -> Result<VisitCounts> {
    if cfg.trials == 0 {
        return Err(Error::param("number of trials must be at least 1"));
    }
    if cfg.walk_length == 0 {
        return Err(Error::param("walk length must be at least 1"));
    }
    let sampler = Sampler::new(g, cfg, memory)?;
    let rows = (0..g.n())
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(scratch, visits), start| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(start as u64);
                visits.clear();
                for trial in 0..cfg.trials {
                    rng.set_word_pos(trial as u128 * TRIAL_STRIDE);
                    sampler.walk(start, cfg.walk_length, &mut rng, scratch, visits);
                }
                visits.sort_unstable();
                let mut row: Vec<(usize, u32)> = Vec::new();
                for &v in visits.iter() {
                    match row.last_mut() {
                        Some((j, c)) if *j == v => *c += 1,
                        _ => row.push((v, 1)),
                    }
                }
                row
            },
        )
        .collect();
    Ok(VisitCounts {
        rows,
        trials: cfg.trials,
        walk_length: cfg.walk_length,
        seed: cfg.seed,
        memory: memory.then_some((cfg.p, cfg.q)),
    })
}

/// Visit counts of `trials` independent first-order walks of `walk_length`
/// steps from every node.
pub fn fst_walk_estimate(g: &Graph, cfg: &WalkConfig) -> Result<VisitCounts> {
    simulate(g, cfg, false)
}

/// Visit counts of second-order walks: the first step is first-order, after
/// which stepping from `k` to `j` having arrived from `t` is weighted by
/// `A[k, j]` times `1/p` (return to `t`), `1` (`j` adjacent to `t`) or `1/q`.
pub fn fsmt_walk_estimate(g: &Graph, cfg: &WalkConfig) -> Result<VisitCounts> {
    simulate(g, cfg, true)
}
