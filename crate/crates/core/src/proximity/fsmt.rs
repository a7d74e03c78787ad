//! Memory-modulated (second-order) transition matrices.
//!
//! Walker states are pairs `(current, previous)`. The operator form indexes
//! them as `current * n + previous`, which gives the block layout
//! `W = [W_{i,k}]` with `W_{i,k}` mapping states whose current node is `k`
//! to states whose current node is `i`. The operator form is quadratic in
//! `n` and only built for validation-sized graphs; [`fsmt_edge_state`]
//! evaluates the same matrix over arc states for larger graphs.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{ProximityKind, ProximityMatrix, ProximityParams};
use crate::error::{Error, Result};
use crate::graph::{bfs_distances, transition_matrix, DanglingPolicy, Graph};
use crate::sparse::CsrMatrix;

/// Largest graph for which [`fsmt_operators`] builds the `n^2 x n^2` operator.
pub const DEFAULT_FSMT_CAP: usize = 64;

/// Return/in-out factors of a second-order walk.
#[derive(Debug, Clone)]
pub(crate) struct MemoryBias {
    neighbors: Vec<Vec<usize>>,
    inv_p: f64,
    inv_q: f64,
}

impl MemoryBias {
    pub(crate) fn new(g: &Graph, p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite() && q > 0.0 && q.is_finite()) {
            return Err(Error::param(format!(
                "memory factors must be positive, got p = {p}, q = {q}"
            )));
        }
        Ok(MemoryBias {
            neighbors: g.undirected_neighbors(),
            inv_p: 1.0 / p,
            inv_q: 1.0 / q,
        })
    }

    /// Factor applied to stepping onto `next` when the walker came from
    /// `prev`. Every such `next` is within two hops of `prev`.
    #[inline]
    pub(crate) fn factor(&self, prev: usize, next: usize) -> f64 {
        if next == prev {
            self.inv_p
        } else if self.neighbors[prev].binary_search(&next).is_ok() {
            1.0
        } else {
            self.inv_q
        }
    }
}

/// Sparse operators whose product yields the memory-modulated proximity.
#[derive(Debug, Clone)]
pub struct FsmtOperators {
    n: usize,
    p: f64,
    q: f64,
    /// `n x n`: `1/p` on the diagonal, `1` between adjacent nodes, `1/q` at
    /// hop distance two, `0` elsewhere.
    pub memory: CsrMatrix,
    /// `n x n^2`: row `s` holds the first-step distribution from `s`,
    /// landing in states `(k, s)` with probability `P[s, k]`.
    pub initial: CsrMatrix,
    /// `n x n^2`: `I_n (x) 1_n^T`, summing states by current node.
    pub merge: CsrMatrix,
    /// `n^2 x n^2` column-stochastic transition between reachable states.
    pub expanded: CsrMatrix,
}

impl FsmtOperators {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn state(&self, current: usize, previous: usize) -> usize {
        current * self.n + previous
    }
}

pub fn fsmt_operators(g: &Graph, p: f64, q: f64) -> Result<FsmtOperators> {
    fsmt_operators_with(g, p, q, DanglingPolicy::SelfLoop, DEFAULT_FSMT_CAP)
}

pub fn fsmt_operators_with(
    g: &Graph,
    p: f64,
    q: f64,
    dangling: DanglingPolicy,
    cap: usize,
) -> Result<FsmtOperators> {
    let n = g.n();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if n > cap {
        return Err(Error::Capacity(format!(
            "graph has {n} nodes; the explicit memory operators are limited to {cap} nodes, \
             use the edge-state evaluation or fsmt_walk_estimate instead"
        )));
    }
    let bias = MemoryBias::new(g, p, q)?;

    let mut memory = Vec::new();
    for i in 0..n {
        for (k, d) in bfs_distances(&bias.neighbors, i).into_iter().enumerate() {
            let v = match d {
                Some(0) => 1.0 / p,
                Some(1) => 1.0,
                Some(2) => 1.0 / q,
                _ => continue,
            };
            memory.push((i, k, v));
        }
    }
    let memory = CsrMatrix::from_triplets(n, n, &memory);

    let rows = g.effective_rows(dangling);
    let trans = transition_matrix(g, dangling).to_sparse();
    let nn = n * n;

    let mut initial = Vec::new();
    for s in 0..n {
        let (ks, ps) = trans.row(s);
        for (&k, &pk) in ks.iter().zip(ps) {
            initial.push((s, k as usize * n + s, pk));
        }
    }
    let initial = CsrMatrix::from_triplets(n, nn, &initial);

    let merge: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |t| (i, i * n + t, 1.0)))
        .collect();
    let merge = CsrMatrix::from_triplets(n, nn, &merge);

    // column (k, prev) exists for every arc prev -> k
    let mut expanded = Vec::new();
    for (prev, row) in rows.iter().enumerate() {
        for &(k, _) in row {
            let out = &rows[k];
            let total: f64 = out.iter().map(|&(i, a)| a * memory.get(prev, i)).sum();
            if total <= 0.0 {
                continue;
            }
            for &(i, a) in out {
                let w = a * memory.get(prev, i) / total;
                if w != 0.0 {
                    expanded.push((i * n + k, k * n + prev, w));
                }
            }
        }
    }
    let expanded = CsrMatrix::from_triplets(nn, nn, &expanded);

    Ok(FsmtOperators {
        n,
        p,
        q,
        memory,
        initial,
        merge,
        expanded,
    })
}

/// Memory-modulated proximity from the explicit operators: accumulates
/// `Q^T, W Q^T, ..., W^(steps-1) Q^T`, merges states by current node and
/// returns the result with start nodes as rows.
pub fn fsmt(ops: &FsmtOperators, steps: usize) -> Result<ProximityMatrix> {
    if steps == 0 {
        return Err(Error::param("walk length must be at least 1"));
    }
    let mut state = ops.initial.transpose();
    let mut acc = state.clone();
    for _ in 1..steps {
        state = ops.expanded.mul_sparse(&state, 0.0);
        acc = acc.add(&state);
    }
    // (visited x start) -> (start x visited)
    let merged = ops.merge.mul_sparse(&acc, 0.0).transpose();
    Ok(ProximityMatrix::sparse(
        merged,
        ProximityKind::Fsmt,
        ProximityParams {
            steps: Some(steps),
            p: Some(ops.p),
            q: Some(ops.q),
            ..Default::default()
        },
    ))
}

/// Exact memory-modulated proximity propagated over arc states, one start
/// node at a time. Costs `O(steps * sum_k indeg(k) outdeg(k))` per start
/// node and needs no quadratic operator.
pub fn fsmt_edge_state(
    g: &Graph,
    p: f64,
    q: f64,
    steps: usize,
    dangling: DanglingPolicy,
) -> Result<ProximityMatrix> {
    if steps == 0 {
        return Err(Error::param("walk length must be at least 1"));
    }
    let n = g.n();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let bias = MemoryBias::new(g, p, q)?;
    let rows = g.effective_rows(dangling);

    // arc index = state (target, source); arcs grouped by source
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut target = Vec::new();
    for row in &rows {
        target.extend(row.iter().map(|e| e.0));
        offsets.push(target.len());
    }
    let first_step: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            let total: f64 = row.iter().map(|e| e.1).sum();
            row.iter().map(|e| e.1 / total).collect()
        })
        .collect();
    // probabilities of leaving arc state (src -> k) along each arc out of k
    let mut step_probs: Vec<Vec<f64>> = Vec::with_capacity(target.len());
    for (src, row) in rows.iter().enumerate() {
        for &(k, _) in row {
            let out = &rows[k];
            let weights: Vec<f64> = out.iter().map(|&(j, a)| a * bias.factor(src, j)).collect();
            let total: f64 = weights.iter().sum();
            step_probs.push(if total > 0.0 {
                weights.into_iter().map(|w| w / total).collect()
            } else {
                vec![0.0; out.len()]
            });
        }
    }

    let visit_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut visits = vec![0.0; n];
            let mut mass = vec![0.0; target.len()];
            for (a, &pr) in (offsets[s]..offsets[s + 1]).zip(&first_step[s]) {
                mass[a] = pr;
                visits[target[a]] += pr;
            }
            let mut next = vec![0.0; target.len()];
            for _ in 1..steps {
                for (a, &m) in mass.iter().enumerate() {
                    if m == 0.0 {
                        continue;
                    }
                    let k = target[a];
                    for (b, &pr) in (offsets[k]..offsets[k + 1]).zip(&step_probs[a]) {
                        next[b] += m * pr;
                    }
                }
                for (b, &m) in next.iter().enumerate() {
                    visits[target[b]] += m;
                }
                std::mem::swap(&mut mass, &mut next);
                next.iter_mut().for_each(|v| *v = 0.0);
            }
            visits
        })
        .collect();

    let mut out = DMatrix::zeros(n, n);
    for (s, row) in visit_rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[(s, j)] = v;
        }
    }
    Ok(ProximityMatrix::dense(
        out,
        ProximityKind::Fsmt,
        ProximityParams {
            steps: Some(steps),
            p: Some(p),
            q: Some(q),
            ..Default::default()
        },
    ))
}
