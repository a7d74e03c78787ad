use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gemd::graph::Graph;
use gemd::io::write_embedding;
use gemd::solver::EmbeddingPair;
use gemd::synth::{sbm, weighted_blocks};
use nalgebra::DMatrix;
use serde_json::Value;

fn gemd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gemd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `g` and its block labels; returns (edge list, labels) paths.
fn write_fixture(dir: &Path, g: &Graph, blocks: &[usize]) -> (PathBuf, PathBuf) {
    let edges = dir.join("graph.tsv");
    g.write_edge_list(&edges).unwrap();
    let labels = dir.join("labels.tsv");
    let text: String = (0..g.n())
        .map(|i| format!("{}\tblock{}\n", g.node_id(i), blocks[i]))
        .collect();
    fs::write(&labels, text).unwrap();
    (edges, labels)
}

fn small_sbm(dir: &Path, per_block: usize) -> (PathBuf, PathBuf) {
    let (g, blocks) = sbm(&[per_block, per_block], 0.15, 0.01, 7).unwrap();
    let (g, kept) = gemd::synth::largest_component(&g).unwrap();
    let blocks: Vec<usize> = kept.iter().map(|&v| blocks[v]).collect();
    write_fixture(dir, &g, &blocks)
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn one_click_embed_uses_the_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = small_sbm(dir.path(), 60);
    let emb = dir.path().join("emb.tsv");
    ok(&gemd(&["embed", "--input", s(&edges), "--output", s(&emb)]));

    let text = fs::read_to_string(&emb).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split('\t').count(), 1 + 2 * 64);
    let g = Graph::load_edge_list(&edges, false).unwrap();
    assert_eq!(lines.count(), g.n());

    let m = manifest(&dir.path().join("emb.tsv.manifest.json"));
    let c = &m["config"];
    assert_eq!(c["mode"], "scalable");
    assert_eq!(c["walk_length"], 7);
    assert_eq!(c["trials"], 50);
    assert_eq!(c["dim"], 64);
    assert_eq!(c["gamma"], 0.0);
    assert_eq!(c["clip_c"], 100.0);
    assert_eq!(c["p"], 1.0);
    assert_eq!(c["q"], 1.0);
    assert_eq!(c["seed"], 42);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    for stage in ["load", "resolve", "embed", "write"] {
        assert!(m["timings"][stage].as_f64().unwrap() >= 0.0);
    }
    let digests: Vec<&Value> = m["outputs"].as_object().unwrap().values().collect();
    assert_eq!(digests[0].as_str().unwrap().len(), 64);
    assert!(!dir.path().join("emb.tsv.tmp").exists());
}

#[test]
fn embeddings_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = small_sbm(dir.path(), 60);
    let paths: Vec<PathBuf> = (0..3)
        .map(|i| dir.path().join(format!("e{i}.tsv")))
        .collect();
    ok(&gemd(&[
        "embed",
        "--input",
        s(&edges),
        "--output",
        s(&paths[0]),
    ]));
    ok(&gemd(&[
        "embed",
        "--input",
        s(&edges),
        "--output",
        s(&paths[1]),
    ]));
    ok(&gemd(&[
        "--threads",
        "1",
        "embed",
        "--input",
        s(&edges),
        "--output",
        s(&paths[2]),
    ]));
    let first = fs::read(&paths[0]).unwrap();
    assert_eq!(first, fs::read(&paths[1]).unwrap());
    assert_eq!(first, fs::read(&paths[2]).unwrap());
}

#[test]
fn manifest_rerun_reproduces_digests() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = small_sbm(dir.path(), 60);
    let emb = dir.path().join("emb.tsv");
    ok(&gemd(&[
        "embed",
        "--input",
        s(&edges),
        "--output",
        s(&emb),
        "--dim",
        "8",
        "--walk-length",
        "auto",
        "--gamma",
        "auto",
    ]));
    let m_path = dir.path().join("emb.tsv.manifest.json");
    let m = manifest(&m_path);
    assert_eq!(m["config"]["walk_length_rule"], "auto");
    assert_eq!(m["config"]["gamma_rule"], "auto");

    let again = dir.path().join("again.tsv");
    let stdout = ok(&gemd(&[
        "embed",
        "--from-manifest",
        s(&m_path),
        "--output",
        s(&again),
    ]));
    let digest = m["outputs"]
        .as_object()
        .unwrap()
        .values()
        .next()
        .unwrap()
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(stdout.trim(), format!("reproduced {digest}"));
    assert_eq!(fs::read(&emb).unwrap(), fs::read(&again).unwrap());
    let rerun = manifest(&dir.path().join("again.tsv.manifest.json"));
    assert_eq!(rerun["config"]["walk_length"], m["config"]["walk_length"]);
    assert_eq!(rerun["config"]["gamma"], m["config"]["gamma"]);

    // a changed input is refused
    fs::write(&edges, "a b\n").unwrap();
    let out = gemd(&[
        "embed",
        "--from-manifest",
        s(&m_path),
        "--output",
        s(&again),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("changed since the manifest"));
}

#[test]
fn closed_mode_keeps_node_order() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = small_sbm(dir.path(), 150);
    let a = dir.path().join("closed.tsv");
    let b = dir.path().join("scalable.tsv");
    ok(&gemd(&[
        "embed",
        "--input",
        s(&edges),
        "--output",
        s(&a),
        "--mode",
        "closed",
    ]));
    ok(&gemd(&["embed", "--input", s(&edges), "--output", s(&b)]));
    let ids = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split('\t').next().unwrap().to_string())
            .collect()
    };
    assert_eq!(ids(&a), ids(&b));
    assert!(ids(&a).len() > 250);
    assert_eq!(
        manifest(&dir.path().join("closed.tsv.manifest.json"))["config"]["mode"],
        "closed"
    );
}

#[test]
fn errors_exit_one_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = gemd(&[
        "embed",
        "--input",
        s(&missing),
        "--output",
        s(&dir.path().join("e.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(s(&missing)), "{err}");
    assert!(!err.contains("panicked"));

    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "a b\nb c 2 9\n").unwrap();
    let out = gemd(&[
        "embed",
        "--input",
        s(&bad),
        "--output",
        s(&dir.path().join("e.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("{}:2", s(&bad))));

    let out = gemd(&[
        "embed",
        "--input",
        s(&bad),
        "--output",
        "x",
        "--walk-length",
        "seven",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_on_one_hot_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let n = 80;
    let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let onehot = DMatrix::from_fn(n, 4, |i, c| if i % 4 == c { 1.0 } else { 0.0 });
    let pair = EmbeddingPair {
        f: onehot.clone(),
        f_hat: onehot,
        singular_values: vec![],
    };
    let emb = dir.path().join("emb.tsv");
    write_embedding(&emb, &ids, &pair).unwrap();
    let labels = dir.path().join("labels.tsv");
    fs::write(
        &labels,
        ids.iter()
            .enumerate()
            .map(|(i, id)| format!("{id}\tc{}\n", i % 4))
            .collect::<String>(),
    )
    .unwrap();
    let scores = dir.path().join("scores.tsv");
    let stdout = ok(&gemd(&[
        "eval",
        "--embedding",
        s(&emb),
        "--labels",
        s(&labels),
        "--output",
        s(&scores),
    ]));
    let micro: f64 = stdout
        .split("Micro-F1 ")
        .nth(1)
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(micro >= 0.95, "{stdout}");
    assert_eq!(fs::read_to_string(&scores).unwrap().lines().count(), 21);
}

#[test]
fn bench_emits_one_row_per_size() {
    let stdout = ok(&gemd(&["bench", "--sizes", "1e3,2e3,4e3", "--trials", "5"]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "edges\tseconds");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1000\t"));
}

#[test]
fn gamma_sweep_peaks_at_the_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let (g, blocks) = weighted_blocks(50, 1).unwrap();
    let (edges, labels) = write_fixture(dir.path(), &g, &blocks);
    let table = dir.path().join("sweep.tsv");
    ok(&gemd(&[
        "sweep",
        "--input",
        s(&edges),
        "--labels",
        s(&labels),
        "--axis",
        "gamma",
        "--grid",
        "-1,0,1",
        "--mode",
        "closed",
        "--dim",
        "8",
        "--walk-length",
        "7",
        "--output",
        s(&table),
    ]));
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let micro: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(rows[1][0], "0");
    assert!(micro[1] >= micro[0] && micro[1] >= micro[2], "{micro:?}");
}

#[test]
fn help_is_available_per_subcommand() {
    for sub in ["embed", "eval", "sweep", "bench"] {
        let stdout = ok(&gemd(&[sub, "--help"]));
        assert!(stdout.contains("Usage"));
    }
}
