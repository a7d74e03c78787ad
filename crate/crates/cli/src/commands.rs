use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use gemd::eval::{
    ablation_sweep, run_experiment, write_sweep_tsv, ExperimentConfig, LabelSet, SweepAxis,
};
use gemd::graph::{estimate_diameter, DanglingPolicy, Graph};
use gemd::io::{read_embedding, write_embedding};
use gemd::svd::SvdConfig;
use gemd::synth::gnm;
use gemd::ultimatewalk::{
    benchmark_scaling, closed_proximity, embed as embed_graph, visit_counts, EmbedMode, WalkConfig,
};
use gemd::warping::{auto_gamma, WarpSpec, DEFAULT_GAMMA_SAMPLES};

use crate::manifest::{
    sha256_file, with_suffix, write_atomic, GraphSummary, ResolvedConfig, RunManifest, SvdSettings,
};
use crate::{BenchArgs, EmbedArgs, EvalArgs, Mode, ProtocolArgs, SweepArgs, WalkArgs};

/// Double-sweep starts used by `--walk-length auto`.
const DIAMETER_SAMPLES: usize = 16;

fn embed_mode(mode: Mode) -> EmbedMode {
    match mode {
        Mode::Closed => EmbedMode::Closed,
        Mode::Scalable => EmbedMode::Scalable,
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Closed => "closed",
        Mode::Scalable => "scalable",
    }
}

fn load_graph(path: &Path, directed: bool) -> Result<Graph> {
    let g = Graph::load_edge_list(path, directed)?;
    log::info!(
        "{}: {} nodes, {} edges",
        path.display(),
        g.n(),
        g.edge_count()
    );
    Ok(g)
}

/// Walk configuration and warp with every `auto` resolved against `g`.
struct Resolved {
    walk: WalkConfig,
    warp: WarpSpec,
    walk_length_rule: &'static str,
    gamma_rule: &'static str,
}

fn resolve(args: &WalkArgs, g: &Graph) -> Result<Resolved> {
    let mut walk = WalkConfig {
        dim: args.dim,
        trials: args.trials,
        splits: args.splits,
        p: args.p,
        q: args.q,
        clip_c: args.clip_c,
        seed: args.seed,
        ..Default::default()
    };
    let walk_length_rule = if args.walk_length == "auto" {
        walk.walk_length = estimate_diameter(g, DIAMETER_SAMPLES, args.seed)?.max(1);
        log::info!("estimated diameter: walk length {}", walk.walk_length);
        "auto"
    } else {
        walk.walk_length = args.walk_length.parse().with_context(|| {
            format!(
                "--walk-length must be a positive integer or `auto`, got `{}`",
                args.walk_length
            )
        })?;
        "fixed"
    };
    walk.validate()?;

    let (gamma, gamma_rule) = if args.gamma == "auto" {
        let pi = match args.mode {
            Mode::Closed => closed_proximity(g, &walk)?,
            Mode::Scalable => visit_counts(g, &walk)?.estimate(),
        };
        let choice = auto_gamma(&pi, DEFAULT_GAMMA_SAMPLES, args.seed)?;
        if !choice.bracketed {
            log::warn!(
                "skewness does not change sign on [-1, 1]; using gamma = {} (skewness {:.3})",
                choice.gamma,
                choice.skewness
            );
        }
        (choice.gamma, "auto")
    } else {
        let gamma: f64 = args
            .gamma
            .parse()
            .with_context(|| format!("--gamma must be a number or `auto`, got `{}`", args.gamma))?;
        (gamma, "fixed")
    };
    let warp = WarpSpec::ibc(gamma).with_clip(args.clip_c)?;
    Ok(Resolved {
        walk,
        warp,
        walk_length_rule,
        gamma_rule,
    })
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).with_context(|| format!("cannot resolve {}", path.display()))
}

fn fixed_args(c: &ResolvedConfig) -> Result<WalkArgs> {
    let mode = match c.mode.as_str() {
        "closed" => Mode::Closed,
        "scalable" => Mode::Scalable,
        other => bail!("manifest names an unknown mode `{other}`"),
    };
    if c.dangling != "self-loop" {
        bail!(
            "manifest names an unsupported dangling policy `{}`",
            c.dangling
        );
    }
    Ok(WalkArgs {
        directed: c.directed,
        dim: c.dim,
        walk_length: c.walk_length.to_string(),
        trials: c.trials,
        splits: c.splits,
        p: c.p,
        q: c.q,
        gamma: c.gamma.to_string(),
        clip_c: c.clip_c,
        seed: c.seed,
        mode,
    })
}

pub fn embed(args: EmbedArgs) -> Result<()> {
    let (input, output, walk_args, recorded, svd) = match &args.from_manifest {
        Some(path) => {
            let m = RunManifest::load(path)?;
            let output = args
                .output
                .clone()
                .unwrap_or_else(|| m.config.output.clone());
            let svd = SvdConfig {
                oversample: m.config.svd.oversample,
                power_iters: m.config.svd.power_iters,
                tol: m.config.svd.tol,
                max_iters: m.config.svd.max_iters,
            };
            (
                m.config.input.clone(),
                output,
                fixed_args(&m.config)?,
                Some(m),
                svd,
            )
        }
        None => (
            args.input.clone().expect("clap requires --input"),
            args.output.clone().expect("clap requires --output"),
            args.walk.clone(),
            None,
            SvdConfig::default(),
        ),
    };
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| with_suffix(&output, ".manifest.json"));
    let mut timings = BTreeMap::new();

    let start = Instant::now();
    let input_digest = sha256_file(&input)?;
    if let Some(m) = &recorded {
        let key = input.display().to_string();
        if m.inputs.get(&key) != Some(&input_digest) {
            bail!(
                "{} changed since the manifest was written (digest {input_digest})",
                input.display()
            );
        }
    }
    let g = load_graph(&input, walk_args.directed)?;
    timings.insert("load".to_string(), start.elapsed().as_secs_f64());

    let start = Instant::now();
    let mut resolved = resolve(&walk_args, &g)?;
    resolved.walk.svd = svd;
    timings.insert("resolve".to_string(), start.elapsed().as_secs_f64());

    let start = Instant::now();
    let pair = embed_graph(
        &g,
        &resolved.walk,
        &resolved.warp,
        embed_mode(walk_args.mode),
    )?;
    timings.insert("embed".to_string(), start.elapsed().as_secs_f64());

    let start = Instant::now();
    write_atomic(&output, |tmp| {
        Ok(write_embedding(tmp, g.node_ids(), &pair)?)
    })?;
    timings.insert("write".to_string(), start.elapsed().as_secs_f64());
    let output_digest = sha256_file(&output)?;

    if let Some(m) = &recorded {
        let expected = m
            .outputs
            .get(&m.config.output.display().to_string())
            .context("manifest records no embedding digest")?;
        if *expected != output_digest {
            bail!(
                "re-run of {} does not reproduce the recorded embedding: {} vs {expected}",
                input.display(),
                output_digest
            );
        }
        println!("reproduced {output_digest}");
    }

    let w = &resolved.walk;
    let input_abs = absolute(&input)?;
    let output_abs = absolute(&output)?;
    let manifest = RunManifest {
        tool: "gemd".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "embed".to_string(),
        config: ResolvedConfig {
            input: input_abs.clone(),
            output: output_abs.clone(),
            directed: walk_args.directed,
            mode: mode_name(walk_args.mode).to_string(),
            dim: w.dim,
            walk_length: w.walk_length,
            walk_length_rule: resolved.walk_length_rule.to_string(),
            trials: w.trials,
            splits: w.splits,
            p: w.p,
            q: w.q,
            gamma: resolved.warp.gamma().expect("inverse Box-Cox warp"),
            gamma_rule: resolved.gamma_rule.to_string(),
            clip_c: w.clip_c,
            seed: w.seed,
            dangling: match w.dangling {
                DanglingPolicy::SelfLoop => "self-loop".to_string(),
                DanglingPolicy::ZeroRow => "zero-row".to_string(),
            },
            closed_cap: w.closed_cap,
            svd: SvdSettings {
                oversample: w.svd.oversample,
                power_iters: w.svd.power_iters,
                tol: w.svd.tol,
                max_iters: w.svd.max_iters,
            },
        },
        graph: GraphSummary {
            nodes: g.n(),
            edges: g.edge_count(),
        },
        inputs: BTreeMap::from([(input_abs.display().to_string(), input_digest)]),
        outputs: BTreeMap::from([(output_abs.display().to_string(), output_digest)]),
        timings,
    };
    manifest.save(&manifest_path)?;
    log::info!("wrote {} and {}", output.display(), manifest_path.display());
    Ok(())
}

fn experiment_config(p: &ProtocolArgs, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        ratio: p.ratio,
        repeats: p.repeats,
        seed,
        reg: p.reg,
        standardize: !p.no_standardize,
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let (ids, features) = read_embedding(&args.embedding)?;
    let labels = LabelSet::load(&args.protocol.labels, &ids)?;
    let report = run_experiment(
        &features,
        &labels,
        &experiment_config(&args.protocol, args.seed),
    )?;
    println!("{report}");
    if let Some(path) = &args.output {
        let mut out = std::io::BufWriter::new(create(path)?);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "repeat\tmacro_f1\tmicro_f1")?;
            for (r, s) in report.splits.iter().enumerate() {
                writeln!(out, "{r}\t{}\t{}", s.macro_f1, s.micro_f1)?;
            }
            out.flush()
        };
        write().with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let g = load_graph(&args.input, args.walk.directed)?;
    let labels = LabelSet::load(&args.protocol.labels, g.node_ids())?;
    let grid = SweepAxis::parse(&args.axis)?.parse_grid(&args.grid)?;
    let resolved = resolve(&args.walk, &g)?;
    let exp = experiment_config(&args.protocol, args.walk.seed);
    let rows = ablation_sweep(
        &g,
        &labels,
        &grid,
        &resolved.walk,
        &resolved.warp,
        embed_mode(args.walk.mode),
        &exp,
    )?;
    match &args.output {
        Some(path) => write_sweep_tsv(&rows, std::io::BufWriter::new(create(path)?))
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => write_sweep_tsv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v: f64 = s
                .parse()
                .with_context(|| format!("size `{s}` is not a number"))?;
            if !(v >= 1.0 && v.fract() == 0.0 && v.is_finite()) {
                bail!("size `{s}` must be a positive whole number");
            }
            Ok(v as usize)
        })
        .collect()
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let sizes = parse_sizes(&args.sizes)?;
    if !(args.edges_per_node > 0.0) {
        bail!("--edges-per-node must be positive");
    }
    let cfg = WalkConfig {
        dim: args.dim,
        walk_length: args.walk_length,
        trials: args.trials,
        seed: args.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let ratio = args.edges_per_node;
    let seed = args.seed;
    let rows = benchmark_scaling(
        |edges| {
            let nodes = ((edges as f64 / ratio).ceil() as usize).max(args.dim);
            gnm(nodes, edges, seed)
        },
        &sizes,
        &cfg,
    )?;
    let mut text = String::from("edges\tseconds\n");
    for r in &rows {
        text += &format!("{}\t{}\n", r.edges, r.seconds);
    }
    match &args.output {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}
