use gemd::graph::{transition_matrix, DanglingPolicy, Graph};
use gemd::oracle::{dense_fst, enumerate_fsmt, fst_visit_moments, ist_series, ist_tail_bound};
use gemd::proximity::{
    fsmt, fsmt_edge_state, fsmt_operators, fsmt_operators_with, fsmt_walk_estimate, fst,
    fst_walk_estimate, ist,
};
use gemd::synth::random_graph;
use gemd::ultimatewalk::WalkConfig;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fst_matches_dense_powers(n in 1usize..30, density in 0.05f64..0.6, directed: bool, steps in 1usize..8, seed: u64) {
        let g = random_graph(n, density, directed, seed).unwrap();
        let p = transition_matrix(&g, DanglingPolicy::SelfLoop);
        let got = fst(&p, steps).unwrap().to_dense();
        let want = dense_fst(&p.to_dense(), steps);
        prop_assert!((got - want).amax() < 1e-9);
    }

    #[test]
    fn fst_rows_sum_to_walk_length(n in 2usize..25, seed: u64, steps in 1usize..10) {
        let g = random_graph(n, 0.2, true, seed).unwrap();
        let pi = fst(&transition_matrix(&g, DanglingPolicy::SelfLoop), steps).unwrap();
        for s in pi.row_sums() {
            prop_assert!((s - steps as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn ist_within_series_tail_bound() {
    for seed in 0..10 {
        let g = random_graph(25, 0.15, seed % 2 == 0, seed).unwrap();
        let p = transition_matrix(&g, DanglingPolicy::SelfLoop);
        for alpha in [0.3, 0.85, 0.95] {
            let got = ist(&p, alpha).unwrap().to_dense();
            let series = ist_series(&p.to_dense(), alpha, 200);
            let bound = ist_tail_bound(alpha, 200) + 1e-9;
            assert!((got - series).amax() <= bound, "seed {seed}, alpha {alpha}");
        }
    }
}

#[test]
fn fsmt_matches_walk_enumeration() {
    for seed in 0..12 {
        let n = 3 + (seed as usize % 6);
        let g = random_graph(n, 0.45, seed % 3 == 0, seed).unwrap();
        for (p, q) in [(1.0, 1.0), (0.25, 4.0), (3.0, 0.5)] {
            for steps in [1, 2, 4] {
                let want = enumerate_fsmt(&g, p, q, steps, DanglingPolicy::SelfLoop);
                let ops = fsmt_operators(&g, p, q).unwrap();
                let got = fsmt(&ops, steps).unwrap().to_dense();
                assert!(
                    (&got - &want).amax() < 1e-9,
                    "operators, seed {seed} p {p} q {q} L {steps}"
                );
                let arc = fsmt_edge_state(&g, p, q, steps, DanglingPolicy::SelfLoop)
                    .unwrap()
                    .to_dense();
                assert!(
                    (arc - &want).amax() < 1e-9,
                    "arc states, seed {seed} p {p} q {q} L {steps}"
                );
            }
        }
    }
}

#[test]
fn fsmt_zero_row_policy_matches_enumeration() {
    let g = Graph::from_edges(
        5,
        [
            (0, 1, 1.0),
            (1, 2, 2.0),
            (2, 0, 1.0),
            (1, 3, 1.0),
            (3, 4, 1.0),
        ],
        true,
    )
    .unwrap();
    let want = enumerate_fsmt(&g, 0.5, 2.0, 4, DanglingPolicy::ZeroRow);
    let ops = fsmt_operators_with(&g, 0.5, 2.0, DanglingPolicy::ZeroRow, 64).unwrap();
    assert!((fsmt(&ops, 4).unwrap().to_dense() - &want).amax() < 1e-9);
    let arc = fsmt_edge_state(&g, 0.5, 2.0, 4, DanglingPolicy::ZeroRow)
        .unwrap()
        .to_dense();
    assert!((arc - want).amax() < 1e-9);
}

#[test]
fn fsmt_without_memory_equals_fst() {
    for seed in 0..50u64 {
        let n = 2 + (seed as usize * 7) % 19;
        let g = random_graph(n, 0.3, seed % 2 == 1, seed).unwrap();
        let ops = fsmt_operators(&g, 1.0, 1.0).unwrap();
        let p = transition_matrix(&g, DanglingPolicy::SelfLoop);
        for steps in [1, 3, 7] {
            let diff =
                (fsmt(&ops, steps).unwrap().to_dense() - fst(&p, steps).unwrap().to_dense()).amax();
            assert!(diff < 1e-10, "seed {seed}, L {steps}: {diff}");
        }
    }
}

fn ten_node_fixture() -> Graph {
    Graph::from_edges(
        10,
        [
            (0, 1, 1.0),
            (1, 2, 2.0),
            (2, 3, 1.0),
            (3, 4, 0.5),
            (4, 0, 1.0),
            (0, 5, 1.0),
            (5, 6, 3.0),
            (6, 7, 1.0),
            (7, 8, 1.0),
            (8, 9, 1.0),
            (9, 5, 2.0),
            (2, 7, 1.0),
        ],
        false,
    )
    .unwrap()
}

#[test]
fn walk_estimate_within_clt_envelope() {
    let g = ten_node_fixture();
    let (mean, var) = fst_visit_moments(&g, 3, DanglingPolicy::SelfLoop);
    let m = 10_000;
    let mut inside = 0;
    for seed in 0..20 {
        let cfg = WalkConfig {
            walk_length: 3,
            trials: m,
            seed,
            ..Default::default()
        };
        let est = fst_walk_estimate(&g, &cfg).unwrap().estimate().to_dense();
        let ok = (0..10).all(|i| {
            (0..10).all(|j| {
                (est[(i, j)] - mean[(i, j)]).abs() <= 5.0 * (var[(i, j)] / m as f64).sqrt() + 1e-12
            })
        });
        inside += ok as usize;
    }
    assert!(inside >= 19, "{inside}/20 seeds inside the envelope");
}

#[test]
fn memory_walks_converge_to_fsmt() {
    let g = ten_node_fixture();
    let want = enumerate_fsmt(&g, 0.5, 2.0, 3, DanglingPolicy::SelfLoop);
    let cfg = WalkConfig {
        walk_length: 3,
        trials: 20_000,
        p: 0.5,
        q: 2.0,
        ..Default::default()
    };
    let est = fsmt_walk_estimate(&g, &cfg).unwrap().estimate().to_dense();
    // visits per walk are bounded by 3, so 5 sigma is at most 5 * 3 / sqrt(m)
    assert!((est - want).amax() < 5.0 * 3.0 / (20_000f64).sqrt());
}

#[test]
fn walk_counts_are_deterministic_and_total_m_times_l() {
    let g = ten_node_fixture();
    let cfg = WalkConfig {
        walk_length: 5,
        trials: 40,
        seed: 9,
        ..Default::default()
    };
    let a = fst_walk_estimate(&g, &cfg).unwrap();
    let b = fst_walk_estimate(&g, &cfg).unwrap();
    assert_eq!(a, b);
    for i in 0..10 {
        assert_eq!(a.row_total(i), 200);
    }
}
