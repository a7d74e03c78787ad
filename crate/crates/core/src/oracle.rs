//! Slow reference computations used to validate the fast paths: dense
//! matrix powers, truncated series and exhaustive walk enumeration. Only
//! meant for graphs with a handful of nodes.

use nalgebra::DMatrix;

use crate::graph::{DanglingPolicy, Graph};

/// `sum_{l=1..steps} P^l` by repeated dense products.
pub fn dense_fst(p: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let mut term = p.clone();
    let mut acc = p.clone();
    for _ in 1..steps {
        term = &term * p;
        acc += &term;
    }
    acc
}

/// First `terms` terms of `sum_{l>=1} alpha^(l-1) P^l`.
pub fn ist_series(p: &DMatrix<f64>, alpha: f64, terms: usize) -> DMatrix<f64> {
    let mut term = p.clone();
    let mut acc = p.clone();
    for _ in 1..terms {
        term = &term * p * alpha;
        acc += &term;
    }
    acc
}

/// Upper bound on the absolute entry of the series tail after `terms`
/// terms for a row-stochastic `P`: `sum_{l>terms} alpha^(l-1)`.
pub fn ist_tail_bound(alpha: f64, terms: usize) -> f64 {
    alpha.powi(terms as i32) / (1.0 - alpha)
}

fn weight_rows(g: &Graph, dangling: DanglingPolicy) -> Vec<Vec<(usize, f64)>> {
    (0..g.n())
        .map(|i| {
            let (nb, w) = g.neighbors(i);
            let row: Vec<(usize, f64)> = nb.iter().copied().zip(w.iter().copied()).collect();
            if row.is_empty() && dangling == DanglingPolicy::SelfLoop {
                vec![(i, 1.0)]
            } else {
                row
            }
        })
        .collect()
}

/// All-pairs hop distances of the undirected view (Floyd–Warshall).
fn hop_distances(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (i, j, _) in g.arcs() {
        if i != j {
            d[i][j] = 1;
            d[j][i] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Expected visit counts of second-order walks, obtained by enumerating
/// every walk of `steps` steps from every start node together with its
/// probability. Cost grows as `degree^steps`.
pub fn enumerate_fsmt(
    g: &Graph,
    p: f64,
    q: f64,
    steps: usize,
    dangling: DanglingPolicy,
) -> DMatrix<f64> {
    let rows = weight_rows(g, dangling);
    let dist = hop_distances(g);
    let bias = |prev: usize, next: usize| match dist[prev][next] {
        0 => 1.0 / p,
        1 => 1.0,
        _ => 1.0 / q,
    };
    let n = g.n();
    let mut out = DMatrix::zeros(n, n);

    #[allow(clippy::too_many_arguments)]
    fn walk(
        start: usize,
        cur: usize,
        prev: Option<usize>,
        prob: f64,
        left: usize,
        rows: &[Vec<(usize, f64)>],
        bias: &dyn Fn(usize, usize) -> f64,
        out: &mut DMatrix<f64>,
    ) {
        if left == 0 {
            return;
        }
        let weights: Vec<(usize, f64)> = rows[cur]
            .iter()
            .map(|&(j, a)| (j, prev.map_or(a, |t| a * bias(t, j))))
            .collect();
        let total: f64 = weights.iter().map(|e| e.1).sum();
        if total <= 0.0 {
            return;
        }
        for (j, w) in weights {
            let pj = prob * w / total;
            out[(start, j)] += pj;
            walk(start, j, Some(cur), pj, left - 1, rows, bias, out);
        }
    }

    for s in 0..n {
        walk(s, s, None, 1.0, steps, &rows, &bias, &mut out);
    }
    out
}

/// Per-walk mean and variance of the number of visits to `j` during a
/// first-order walk of `steps` steps from `i`, by exhaustive enumeration.
pub fn fst_visit_moments(
    g: &Graph,
    steps: usize,
    dangling: DanglingPolicy,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let rows = weight_rows(g, dangling);
    let n = g.n();
    let mut mean = DMatrix::zeros(n, n);
    let mut second = DMatrix::zeros(n, n);

    fn walk(
        cur: usize,
        prob: f64,
        left: usize,
        visits: &mut Vec<f64>,
        rows: &[Vec<(usize, f64)>],
        acc: &mut dyn FnMut(f64, &[f64]),
    ) {
        if left == 0 {
            acc(prob, visits);
            return;
        }
        let total: f64 = rows[cur].iter().map(|e| e.1).sum();
        if total <= 0.0 {
            acc(prob, visits);
            return;
        }
        for &(j, a) in &rows[cur] {
            visits[j] += 1.0;
            walk(j, prob * a / total, left - 1, visits, rows, acc);
            visits[j] -= 1.0;
        }
    }

    for s in 0..n {
        let mut visits = vec![0.0; n];
        let mut acc = |prob: f64, v: &[f64]| {
            for (j, &c) in v.iter().enumerate() {
                mean[(s, j)] += prob * c;
                second[(s, j)] += prob * c * c;
            }
        };
        walk(s, 1.0, steps, &mut visits, &rows, &mut acc);
    }
    let variance = second - mean.component_mul(&mean);
    (mean, variance.map(|v| v.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_visit_moments() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)], false).unwrap();
        let (mean, var) = fst_visit_moments(&g, 2, DanglingPolicy::SelfLoop);
        // from 0: always 0 -> 1, then 0 or 2
        assert_eq!(
            mean.row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.5, 1.0, 0.5]
        );
        assert_eq!(var[(0, 1)], 0.0);
        assert_eq!(var[(0, 2)], 0.25);
    }

    #[test]
    fn enumeration_without_memory_is_the_power_sum() {
        let g = Graph::from_edges(
            4,
            [
                (0, 1, 1.0),
                (1, 2, 2.0),
                (2, 3, 1.0),
                (3, 0, 0.5),
                (0, 2, 1.0),
            ],
            false,
        )
        .unwrap();
        let p = crate::graph::transition_matrix(&g, DanglingPolicy::SelfLoop).to_dense();
        let e = enumerate_fsmt(&g, 1.0, 1.0, 4, DanglingPolicy::SelfLoop);
        assert!((e - dense_fst(&p, 4)).amax() < 1e-12);
    }
}
