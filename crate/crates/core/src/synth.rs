//! Seeded synthetic graph families used by tests, sweeps and benchmarks.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Undirected stochastic block model with unit weights. Returns the graph
/// and each node's block.
pub fn sbm(sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<(Graph, Vec<usize>)> {
    check_prob(p_in)?;
    check_prob(p_out)?;
    let blocks: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = blocks.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if blocks[i] == blocks[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok((Graph::from_edges(n, edges, false)?, blocks))
}

/// Degree-corrected block model: the edge probability between `i` and `j`
/// is `min(1, theta_i theta_j p)` with `p` the within/between rate and
/// `theta` drawn log-normal (`sigma`) and rescaled to mean one.
pub fn degree_corrected_sbm(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    sigma: f64,
    seed: u64,
) -> Result<(Graph, Vec<usize>)> {
    check_prob(p_in)?;
    check_prob(p_out)?;
    let blocks: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = blocks.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = LogNormal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut theta: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let mean = theta.iter().sum::<f64>() / n.max(1) as f64;
    theta.iter_mut().for_each(|t| *t /= mean);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let base = if blocks[i] == blocks[j] { p_in } else { p_out };
            if rng.random::<f64>() < (theta[i] * theta[j] * base).min(1.0) {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok((Graph::from_edges(n, edges, false)?, blocks))
}

/// Four-block benchmark graph used by the ablation studies: a degree-corrected
/// block model (`p_in` 0.04, `p_out` 0.0067, propensity sigma 1.0) with
/// log-normal edge weights (sigma 1.5), restricted to its largest component.
/// Returns the graph and the block of each kept node.
pub fn weighted_blocks(block_size: usize, seed: u64) -> Result<(Graph, Vec<usize>)> {
    let (g, blocks) = degree_corrected_sbm(&[block_size; 4], 0.04, 0.0067, 1.0, seed)?;
    let g = log_normal_weights(&g, 1.5, seed + 1000)?;
    let (g, kept) = largest_component(&g)?;
    Ok((g, kept.iter().map(|&v| blocks[v]).collect()))
}

/// Uniform random undirected graph with exactly `m` distinct non-loop edges.
pub fn gnm(n: usize, m: usize, seed: u64) -> Result<Graph> {
    let max = n * n.saturating_sub(1) / 2;
    if m > max {
        return Err(Error::param(format!(
            "{m} edges do not fit in a simple graph on {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push((key.0, key.1, 1.0));
        }
    }
    Graph::from_edges(n, edges, false)
}

/// Erdős–Rényi graph, directed or undirected, with random weights in
/// `[0.5, 2)`.
pub fn random_graph(n: usize, p: f64, directed: bool, seed: u64) -> Result<Graph> {
    check_prob(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || (!directed && j < i) {
                continue;
            }
            if rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(0.5..2.0)));
            }
        }
    }
    Graph::from_edges(n, edges, directed)
}

/// Two disjoint unit-weight cliques on `k` nodes each; nodes `0..k` form
/// the first.
pub fn two_cliques(k: usize) -> Result<Graph> {
    let mut edges = Vec::new();
    for base in [0, k] {
        for i in 0..k {
            for j in i + 1..k {
                edges.push((base + i, base + j, 1.0));
            }
        }
    }
    Graph::from_edges(2 * k, edges, false)
}

/// Same topology with every edge weight replaced by a log-normal draw.
pub fn log_normal_weights(g: &Graph, sigma: f64, seed: u64) -> Result<Graph> {
    let dist = LogNormal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(usize, usize, f64)> = g
        .arcs()
        .filter(|&(i, j, _)| g.is_directed() || i <= j)
        .map(|(i, j, _)| (i, j, dist.sample(&mut rng)))
        .collect();
    Graph::from_edges(g.n(), edges, g.is_directed())
}

/// Uniform random labelled tree (random Prüfer sequence).
pub fn random_tree(n: usize, seed: u64) -> Result<Graph> {
    if n <= 2 {
        return path(n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: std::collections::BTreeSet<usize> =
        (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = leaves
            .pop_first()
            .expect("a Prüfer sequence always leaves a leaf");
        edges.push((leaf, c, 1.0));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let last: Vec<usize> = leaves.into_iter().collect();
    edges.push((last[0], last[1], 1.0));
    Graph::from_edges(n, edges, false)
}

pub fn path(n: usize) -> Result<Graph> {
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i, 1.0)), false)
}

pub fn complete(n: usize) -> Result<Graph> {
    Graph::from_edges(
        n,
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))),
        false,
    )
}

/// Subgraph induced by the largest connected component of the undirected
/// view (lowest node index wins ties), with the kept original indices in
/// increasing order.
pub fn largest_component(g: &Graph) -> Result<(Graph, Vec<usize>)> {
    let nb = g.undirected_neighbors();
    let mut comp = vec![usize::MAX; g.n()];
    let mut best: (usize, usize) = (0, 0);
    let mut next = 0;
    for s in 0..g.n() {
        if comp[s] != usize::MAX {
            continue;
        }
        let dist = crate::graph::bfs_distances(&nb, s);
        let mut size = 0;
        for (v, d) in dist.iter().enumerate() {
            if d.is_some() {
                comp[v] = next;
                size += 1;
            }
        }
        if size > best.1 {
            best = (next, size);
        }
        next += 1;
    }
    let kept: Vec<usize> = (0..g.n()).filter(|&v| comp[v] == best.0).collect();
    let mut new_index = vec![usize::MAX; g.n()];
    for (k, &v) in kept.iter().enumerate() {
        new_index[v] = k;
    }
    let edges: Vec<_> = g
        .arcs()
        .filter(|&(i, j, _)| new_index[i] != usize::MAX && (g.is_directed() || i <= j))
        .map(|(i, j, w)| (new_index[i], new_index[j], w))
        .collect();
    let ids = kept.iter().map(|&v| g.node_id(v).to_string()).collect();
    Ok((Graph::with_ids(ids, edges, g.is_directed())?, kept))
}

/// Randomly permutes node indices of `g`; returns the graph and the
/// permutation (`old -> new`).
pub fn shuffle_nodes(g: &Graph, seed: u64) -> Result<(Graph, Vec<usize>)> {
    let mut perm: Vec<usize> = (0..g.n()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let edges: Vec<_> = g
        .arcs()
        .filter(|&(i, j, _)| g.is_directed() || i <= j)
        .map(|(i, j, w)| (perm[i], perm[j], w))
        .collect();
    Ok((Graph::from_edges(g.n(), edges, g.is_directed())?, perm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::exact_diameter;

    #[test]
    fn sbm_blocks_and_determinism() {
        let (g, blocks) = sbm(&[10, 20], 0.5, 0.0, 1).unwrap();
        assert_eq!(g.n(), 30);
        assert_eq!(blocks.iter().filter(|&&b| b == 1).count(), 20);
        for (i, j, _) in g.arcs() {
            assert_eq!(blocks[i], blocks[j]);
        }
        let (h, _) = sbm(&[10, 20], 0.5, 0.0, 1).unwrap();
        assert_eq!(g.arcs().collect::<Vec<_>>(), h.arcs().collect::<Vec<_>>());
    }

    #[test]
    fn gnm_edge_count() {
        let g = gnm(100, 300, 3).unwrap();
        assert_eq!(g.edge_count(), 300);
        assert!(gnm(3, 4, 0).is_err());
    }

    #[test]
    fn trees_have_n_minus_one_edges_and_are_connected() {
        for seed in 0..20 {
            let g = random_tree(25, seed).unwrap();
            assert_eq!(g.edge_count(), 24);
            assert!(exact_diameter(&g) < 25);
            let nb = g.undirected_neighbors();
            let d = crate::graph::bfs_distances(&nb, 0);
            assert!(d.iter().all(Option::is_some));
        }
    }

    #[test]
    fn largest_component_keeps_biggest_piece() {
        let g = Graph::from_edges(6, [(0, 1, 1.0), (2, 3, 1.0), (3, 4, 2.0)], false).unwrap();
        let (h, kept) = largest_component(&g).unwrap();
        assert_eq!(kept, vec![2, 3, 4]);
        assert_eq!(h.edge_count(), 2);
        assert_eq!(h.weight(1, 2), 2.0);
        assert_eq!(h.node_id(0), "2");
    }

    #[test]
    fn clique_and_weight_shapes() {
        let g = two_cliques(5).unwrap();
        assert_eq!(g.edge_count(), 20);
        let w = log_normal_weights(&g, 1.0, 2).unwrap();
        assert_eq!(w.edge_count(), 20);
        for (i, j, v) in w.arcs() {
            assert_eq!(v, w.weight(j, i));
        }
        assert_eq!(complete(4).unwrap().edge_count(), 6);
        assert_eq!(exact_diameter(&path(5).unwrap()), 4);
    }
}
