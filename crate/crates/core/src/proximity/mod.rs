//! Node-proximity matrices: closed forms (transition powers, geometric
//! series, memory-modulated walks) and random-walk estimates of them.

mod fsmt;
mod walk;

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::{dense_mul_sparse_t, CsrMatrix};

pub use fsmt::{
    fsmt, fsmt_edge_state, fsmt_operators, fsmt_operators_with, FsmtOperators, DEFAULT_FSMT_CAP,
};
pub use walk::{fsmt_walk_estimate, fst_walk_estimate, VisitCounts};

/// Entries of transition powers below this magnitude are dropped after each
/// multiply.
pub const DROP_TOLERANCE: f64 = 1e-12;

/// Term density above which power accumulation switches to dense storage.
const DENSE_SWITCH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProximityKind {
    Adjacency,
    Laplacian,
    Transition,
    Fst,
    Ist,
    Fsmt,
    EstimatedFst,
    EstimatedFsmt,
    /// Supplied directly by the caller.
    Custom,
}

/// Parameters a proximity matrix was built with; unused ones stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProximityParams {
    pub steps: Option<usize>,
    pub alpha: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Sparse(CsrMatrix),
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    values: Storage,
    kind: ProximityKind,
    params: ProximityParams,
}

impl ProximityMatrix {
    pub fn sparse(m: CsrMatrix, kind: ProximityKind, params: ProximityParams) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "proximity matrices are square");
        ProximityMatrix {
            values: Storage::Sparse(m),
            kind,
            params,
        }
    }

    pub fn dense(m: DMatrix<f64>, kind: ProximityKind, params: ProximityParams) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "proximity matrices are square");
        ProximityMatrix {
            values: Storage::Dense(m),
            kind,
            params,
        }
    }

    pub fn n(&self) -> usize {
        match &self.values {
            Storage::Sparse(m) => m.nrows(),
            Storage::Dense(m) => m.nrows(),
        }
    }

    pub fn kind(&self) -> ProximityKind {
        self.kind
    }

    pub fn params(&self) -> &ProximityParams {
        &self.params
    }

    pub fn storage(&self) -> &Storage {
        &self.values
    }

    pub fn as_sparse(&self) -> Option<&CsrMatrix> {
        match &self.values {
            Storage::Sparse(m) => Some(m),
            Storage::Dense(_) => None,
        }
    }

    pub fn as_dense(&self) -> Option<&DMatrix<f64>> {
        match &self.values {
            Storage::Dense(m) => Some(m),
            Storage::Sparse(_) => None,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.values {
            Storage::Sparse(m) => m.to_dense(),
            Storage::Dense(m) => m.clone(),
        }
    }

    pub fn to_sparse(&self) -> CsrMatrix {
        match &self.values {
            Storage::Sparse(m) => m.clone(),
            Storage::Dense(m) => CsrMatrix::from_dense(m),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.values {
            Storage::Sparse(m) => m.get(i, j),
            Storage::Dense(m) => m[(i, j)],
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        match &self.values {
            Storage::Sparse(m) => m.row_sums(),
            Storage::Dense(m) => m.row_iter().map(|r| r.sum()).collect(),
        }
    }

    /// All non-zero entries in row-major order.
    pub fn nonzero_values(&self) -> Vec<f64> {
        match &self.values {
            Storage::Sparse(m) => m.values().iter().copied().filter(|&v| v != 0.0).collect(),
            Storage::Dense(m) => m
                .transpose()
                .iter()
                .copied()
                .filter(|&v| v != 0.0)
                .collect(),
        }
    }

    /// Writes the non-zero entries as `i<TAB>j<TAB>value` lines.
    pub fn write_triples(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        let sparse = self.to_sparse();
        for (i, j, v) in sparse.triplets() {
            writeln!(out, "{i}\t{j}\t{v}").expect("write to Vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// The raw weighted adjacency matrix as a proximity.
pub fn adjacency(g: &Graph) -> ProximityMatrix {
    ProximityMatrix::sparse(
        g.adjacency(),
        ProximityKind::Adjacency,
        ProximityParams::default(),
    )
}

enum Term {
    Sparse(CsrMatrix),
    Dense(DMatrix<f64>),
}

fn drop_small(m: &mut DMatrix<f64>) {
    m.iter_mut().for_each(|v| {
        if v.abs() < DROP_TOLERANCE {
            *v = 0.0
        }
    });
}

/// Finite-step transition matrix `sum_{l=1..steps} P^l`.
///
/// Entry `(i, j)` is the expected number of visits to `j` during a
/// `steps`-long walk from `i`. Powers are accumulated by sparse products;
/// once a power becomes dense enough the accumulation continues in dense
/// storage.
pub fn fst(transition: &ProximityMatrix, steps: usize) -> Result<ProximityMatrix> {
    if steps == 0 {
        return Err(Error::param("walk length must be at least 1"));
    }
    let n = transition.n();
    let p = transition.to_sparse();
    let p_t = p.transpose();
    let dense_at = (DENSE_SWITCH * (n * n) as f64) as usize;

    let mut term = Term::Sparse(p.clone());
    let mut acc = Term::Sparse(p.clone());
    for _ in 1..steps {
        term = match term {
            Term::Sparse(t) => {
                let next = t.mul_sparse(&p, DROP_TOLERANCE);
                if next.nnz() > dense_at {
                    Term::Dense(next.to_dense())
                } else {
                    Term::Sparse(next)
                }
            }
            Term::Dense(t) => {
                let mut next = dense_mul_sparse_t(&t, &p_t);
                drop_small(&mut next);
                Term::Dense(next)
            }
        };
        acc = match (acc, &term) {
            (Term::Sparse(a), Term::Sparse(t)) => Term::Sparse(a.add(t)),
            (Term::Sparse(a), Term::Dense(t)) => Term::Dense(a.to_dense() + t),
            (Term::Dense(a), Term::Sparse(t)) => Term::Dense(a + t.to_dense()),
            (Term::Dense(a), Term::Dense(t)) => Term::Dense(a + t),
        };
    }
    let params = ProximityParams {
        steps: Some(steps),
        ..Default::default()
    };
    Ok(match acc {
        Term::Sparse(a) => ProximityMatrix::sparse(a, ProximityKind::Fst, params),
        Term::Dense(a) => ProximityMatrix::dense(a, ProximityKind::Fst, params),
    })
}

const IST_BLOCK: usize = 64;

/// Infinite-step transition matrix `sum_{l>=1} alpha^(l-1) P^l`, evaluated
/// as `(X - I) / alpha` where `(I - alpha P) X = I` is solved one block of
/// right-hand-side columns at a time against a single LU factorization.
pub fn ist(transition: &ProximityMatrix, alpha: f64) -> Result<ProximityMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let n = transition.n();
    let system = DMatrix::<f64>::identity(n, n) - transition.to_dense() * alpha;
    let lu = system.lu();
    let blocks: Vec<(usize, DMatrix<f64>)> = (0..n)
        .step_by(IST_BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let width = IST_BLOCK.min(n - start);
            let mut rhs = DMatrix::zeros(n, width);
            for c in 0..width {
                rhs[(start + c, c)] = 1.0;
            }
            let x = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("I - alpha P is singular".into()))?;
            Ok((start, x))
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(n, n);
    for (start, x) in blocks {
        out.columns_mut(start, x.ncols()).copy_from(&x);
    }
    for i in 0..n {
        out[(i, i)] -= 1.0;
    }
    out /= alpha;
    Ok(ProximityMatrix::dense(
        out,
        ProximityKind::Ist,
        ProximityParams {
            alpha: Some(alpha),
            ..Default::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{transition_matrix, DanglingPolicy};
    use nalgebra::dmatrix;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)], false).unwrap()
    }

    fn power_sum(p: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
        let mut term = p.clone();
        let mut acc = p.clone();
        for _ in 1..steps {
            term = &term * p;
            acc += &term;
        }
        acc
    }

    #[test]
    fn fst_of_one_step_is_transition() {
        let p = transition_matrix(&path3(), DanglingPolicy::SelfLoop);
        assert_eq!(fst(&p, 1).unwrap().to_dense(), p.to_dense());
    }

    #[test]
    fn fst_on_path_two_steps() {
        let p = transition_matrix(&path3(), DanglingPolicy::SelfLoop);
        let pi = fst(&p, 2).unwrap().to_dense();
        let oracle = power_sum(&p.to_dense(), 2);
        assert!((pi.clone() - oracle).abs().max() < 1e-15);
        // P = [0 1 0; .5 0 .5; 0 1 0], P^2 = [.5 0 .5; 0 1 0; .5 0 .5]
        assert_eq!(
            pi.row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.5, 1.0, 0.5]
        );
        assert_eq!(
            pi.row(1).iter().copied().collect::<Vec<_>>(),
            vec![0.5, 1.0, 0.5]
        );
    }

    #[test]
    fn fst_rejects_zero_steps() {
        let p = transition_matrix(&path3(), DanglingPolicy::SelfLoop);
        assert!(matches!(fst(&p, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn fst_switches_to_dense_without_changing_values() {
        // complete graph: P^2 is fully dense
        let edges = (0..6).flat_map(|i| ((i + 1)..6).map(move |j| (i, j, 1.0 + (i * j) as f64)));
        let g = Graph::from_edges(6, edges, false).unwrap();
        let p = transition_matrix(&g, DanglingPolicy::SelfLoop);
        let pi = fst(&p, 5).unwrap();
        assert!(pi.as_dense().is_some());
        let oracle = power_sum(&p.to_dense(), 5);
        assert!((pi.to_dense() - oracle).abs().max() < 1e-12);
    }

    #[test]
    fn ist_on_swap_graph() {
        let g = Graph::from_edges(2, [(0, 1, 1.0)], false).unwrap();
        let p = transition_matrix(&g, DanglingPolicy::SelfLoop);
        let pi = ist(&p, 0.5).unwrap().to_dense();
        let expected = dmatrix![2.0 / 3.0, 4.0 / 3.0; 4.0 / 3.0, 2.0 / 3.0];
        assert!((pi.clone() - expected).abs().max() < 1e-12);

        // truncated series oracle
        let pd = p.to_dense();
        let mut term = pd.clone();
        let mut series = pd.clone();
        for l in 2..=60 {
            term = &term * &pd;
            series += &term * 0.5f64.powi(l - 1);
        }
        assert!((pi - series).abs().max() < 1e-9);
    }

    #[test]
    fn ist_near_zero_alpha_is_transition() {
        let p = transition_matrix(&path3(), DanglingPolicy::SelfLoop);
        let pi = ist(&p, 1e-8).unwrap().to_dense();
        assert!((pi - p.to_dense()).abs().max() < 1e-6);
    }

    #[test]
    fn ist_rejects_alpha_outside_unit_interval() {
        let p = transition_matrix(&path3(), DanglingPolicy::SelfLoop);
        for a in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(ist(&p, a), Err(Error::Parameter(_))), "{a}");
        }
    }

    #[test]
    fn ist_row_sums() {
        let g = Graph::from_edges(
            4,
            [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 0.5)],
            true,
        )
        .unwrap();
        let p = transition_matrix(&g, DanglingPolicy::SelfLoop);
        let alpha = 0.85;
        for s in ist(&p, alpha).unwrap().row_sums() {
            assert!((s - 1.0 / (1.0 - alpha)).abs() < 1e-9);
        }
    }

    #[test]
    fn triples_dump_lists_nonzeros() {
        let p = transition_matrix(&path3(), DanglingPolicy::SelfLoop);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsv");
        p.write_triples(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "0\t1\t1\n1\t0\t0.5\n1\t2\t0.5\n2\t1\t1\n");
    }
}
