//! Weighted directed graphs, edge-list ingestion and the elementary matrices
//! (adjacency, degree, transition, Laplacian).

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::proximity::{ProximityKind, ProximityMatrix, ProximityParams};
use crate::sparse::CsrMatrix;

/// How rows of zero out-degree are treated when normalizing into a
/// transition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DanglingPolicy {
    /// A node without out-edges moves to itself with probability one.
    #[default]
    SelfLoop,
    /// A node without out-edges keeps an all-zero row; walkers stop there.
    ZeroRow,
}

/// Sparse weighted graph. Undirected graphs are stored as symmetric
/// directed graphs.
#[derive(Debug, Clone)]
pub struct Graph {
    directed: bool,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    node_ids: Vec<String>,
    index: HashMap<String, usize>,
}

/// Out-degrees `D[i,i] = sum_j A[i,j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeView {
    pub out_degree: Vec<f64>,
}

impl Graph {
    /// Builds a graph on nodes `0..n` labelled by their index.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        directed: bool,
    ) -> Result<Self> {
        let ids = (0..n).map(|i| i.to_string()).collect();
        Self::with_ids(ids, edges, directed)
    }

    /// Builds a graph whose node `i` carries the external identifier `ids[i]`.
    pub fn with_ids(
        ids: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        directed: bool,
    ) -> Result<Self> {
        let n = ids.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (s, t, w) in edges {
            if s >= n || t >= n {
                return Err(Error::param(format!(
                    "edge ({s}, {t}) references a node outside 0..{n}"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::param(format!(
                    "edge ({s}, {t}) has non-positive or non-finite weight {w}"
                )));
            }
            rows[s].push((t, w));
            if !directed && s != t {
                rows[t].push((s, w));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (t, w) in row {
                if targets.len() > *offsets.last().unwrap() && *targets.last().unwrap() == t {
                    *weights.last_mut().unwrap() += w;
                } else {
                    targets.push(t);
                    weights.push(w);
                }
            }
            offsets.push(targets.len());
        }
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(Graph {
            directed,
            offsets,
            targets,
            weights,
            node_ids: ids,
            index,
        })
    }

    /// Reads a `src dst [weight]` edge list. Node indices follow the order
    /// in which identifiers first appear.
    pub fn load_edge_list(path: impl AsRef<Path>, directed: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, directed).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }

    pub fn parse_edge_list(text: &str, directed: bool) -> Result<Self> {
        let mut ids: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut intern = |name: &str| -> usize {
            if let Some(&i) = index.get(name) {
                return i;
            }
            ids.push(name.to_string());
            index.insert(name.to_string(), ids.len() - 1);
            ids.len() - 1
        };
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: "<input>".into(),
            line,
            msg,
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let weight = match fields.len() {
                2 => 1.0,
                3 => {
                    let w: f64 = fields[2].parse().map_err(|_| {
                        parse_err(
                            lineno + 1,
                            format!("weight {:?} is not a number", fields[2]),
                        )
                    })?;
                    if !(w.is_finite() && w > 0.0) {
                        return Err(parse_err(
                            lineno + 1,
                            format!("weight {w} must be positive and finite"),
                        ));
                    }
                    w
                }
                k => {
                    return Err(parse_err(
                        lineno + 1,
                        format!("expected 2 or 3 fields, found {k}"),
                    ))
                }
            };
            let s = intern(fields[0]);
            let t = intern(fields[1]);
            edges.push((s, t, weight));
        }
        Self::with_ids(ids, edges, directed)
    }

    /// Writes the graph back as an edge list; undirected edges are written once.
    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for (s, t, w) in self.arcs() {
            if !self.directed && t < s {
                continue;
            }
            writeln!(out, "{}\t{}\t{}", self.node_ids[s], self.node_ids[t], w)
                .expect("write to Vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    /// Number of edges as given on input: arcs for directed graphs, unordered
    /// pairs (self-loops counted once) for undirected ones.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.arc_count()
        } else {
            self.arcs().filter(|&(s, t, _)| s <= t).count()
        }
    }

    pub fn neighbors(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.targets[r.clone()], &self.weights[r])
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (ts, ws) = self.neighbors(i);
        ts.binary_search(&j).map_or(0.0, |k| ws[k])
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            let (ts, ws) = self.neighbors(i);
            ts.iter().zip(ws).map(move |(&t, &w)| (i, t, w))
        })
    }

    pub fn out_degree(&self, i: usize) -> f64 {
        self.neighbors(i).1.iter().sum()
    }

    pub fn degrees(&self) -> DegreeView {
        DegreeView {
            out_degree: (0..self.n()).map(|i| self.out_degree(i)).collect(),
        }
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.node_ids[i]
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn adjacency(&self) -> CsrMatrix {
        let t: Vec<_> = self.arcs().collect();
        CsrMatrix::from_triplets(self.n(), self.n(), &t)
    }

    /// Arcs after applying the dangling policy: under `SelfLoop`, every node
    /// without out-edges gains a unit self-loop.
    pub(crate) fn effective_rows(&self, policy: DanglingPolicy) -> Vec<Vec<(usize, f64)>> {
        (0..self.n())
            .map(|i| {
                let (ts, ws) = self.neighbors(i);
                if ts.is_empty() && policy == DanglingPolicy::SelfLoop {
                    vec![(i, 1.0)]
                } else {
                    ts.iter().copied().zip(ws.iter().copied()).collect()
                }
            })
            .collect()
    }

    /// Sorted neighbor sets of the unweighted undirected view, without self-loops.
    pub fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb: Vec<Vec<usize>> = vec![Vec::new(); self.n()];
        for (s, t, _) in self.arcs() {
            if s != t {
                nb[s].push(t);
                nb[t].push(s);
            }
        }
        for row in &mut nb {
            row.sort_unstable();
            row.dedup();
        }
        nb
    }
}

/// Hop distances from `src` in an unweighted adjacency structure.
pub fn bfs_distances(neighbors: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; neighbors.len()];
    let mut queue = VecDeque::new();
    dist[src] = Some(0);
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &neighbors[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn farthest(neighbors: &[Vec<usize>], src: usize) -> (usize, usize) {
    bfs_distances(neighbors, src)
        .into_iter()
        .enumerate()
        .filter_map(|(v, d)| d.map(|d| (v, d)))
        .fold(
            (src, 0),
            |best, (v, d)| if d > best.1 { (v, d) } else { best },
        )
}

/// Row-normalized transition matrix `P = D^-1 A`.
pub fn transition_matrix(g: &Graph, dangling: DanglingPolicy) -> ProximityMatrix {
    let rows = g
        .effective_rows(dangling)
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().map(|e| e.1).sum();
            row.into_iter().map(|(j, w)| (j, w / total)).collect()
        })
        .collect();
    ProximityMatrix::sparse(
        CsrMatrix::from_rows(g.n(), rows),
        ProximityKind::Transition,
        ProximityParams::default(),
    )
}

/// Graph Laplacian `L = D - A`.
pub fn laplacian(g: &Graph) -> ProximityMatrix {
    let mut triplets: Vec<_> = g.arcs().map(|(s, t, w)| (s, t, -w)).collect();
    triplets.extend((0..g.n()).map(|i| (i, i, g.out_degree(i))));
    ProximityMatrix::sparse(
        CsrMatrix::from_triplets(g.n(), g.n(), &triplets),
        ProximityKind::Laplacian,
        ProximityParams::default(),
    )
}

/// Double-sweep BFS lower bound on the hop diameter of the undirected view.
/// On disconnected graphs this is the largest value over the components the
/// sampled start nodes reach.
pub fn estimate_diameter(g: &Graph, samples: usize, seed: u64) -> Result<usize> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    if samples == 0 {
        return Err(Error::param(
            "diameter estimation needs at least one sample",
        ));
    }
    let nb = g.undirected_neighbors();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0;
    for _ in 0..samples {
        let start = rng.random_range(0..g.n());
        let (far, d1) = farthest(&nb, start);
        let (_, d2) = farthest(&nb, far);
        best = best.max(d1).max(d2);
    }
    Ok(best)
}

/// Exact hop diameter of the undirected view by BFS from every node
/// (largest finite distance when disconnected).
pub fn exact_diameter(g: &Graph) -> usize {
    let nb = g.undirected_neighbors();
    (0..g.n()).map(|s| farthest(&nb, s).1).max().unwrap_or(0)
}
