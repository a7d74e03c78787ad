use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::labels::LabelSet;
use super::logreg::train_ovr_logreg;
use super::metrics::{f1_scores, predict_multilabel, F1Scores};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ultimatewalk::{embed, EmbedMode, WalkConfig};
use crate::warping::WarpSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    /// Fraction of labeled nodes revealed for training.
    pub ratio: f64,
    pub repeats: usize,
    pub seed: u64,
    /// L2 strength of the per-label logistic regressions.
    pub reg: f64,
    /// Standardize features with training-split statistics.
    pub standardize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ratio: 0.5,
            repeats: 20,
            seed: 42,
            reg: 1.0,
            standardize: true,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::param(format!(
                "labeling ratio {} must lie in (0, 1)",
                self.ratio
            )));
        }
        if self.repeats == 0 {
            return Err(Error::param("repeats must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub macro_mean: f64,
    pub macro_sd: f64,
    pub micro_mean: f64,
    pub micro_sd: f64,
    /// Scores of each repeat, in repeat order.
    pub splits: Vec<F1Scores>,
    /// Labels skipped for lack of a training example, summed over repeats.
    pub skipped_labels: usize,
}

/// Mean and sample standard deviation (zero for a single value).
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Macro-F1 {:.4} ± {:.4}, Micro-F1 {:.4} ± {:.4} over {} repeats",
            self.macro_mean,
            self.macro_sd,
            self.micro_mean,
            self.micro_sd,
            self.splits.len()
        )?;
        if self.skipped_labels > 0 {
            write!(f, " ({} label skips)", self.skipped_labels)?;
        }
        Ok(())
    }
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

fn standardize(train: &mut DMatrix<f64>, test: &mut DMatrix<f64>) {
    let n = train.nrows() as f64;
    for c in 0..train.ncols() {
        let mean = train.column(c).sum() / n;
        let var = train
            .column(c)
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for m in [&mut *train, &mut *test] {
            m.column_mut(c)
                .iter_mut()
                .for_each(|v| *v = (*v - mean) / sd);
        }
    }
}

/// Repeated random train/test splits of the labeled nodes: fit one-vs-rest
/// logistic regression on `ratio` of them, predict the top-`k_i` labels of
/// the rest (with `k_i` the node's true label count) and score.
pub fn run_experiment(
    features: &DMatrix<f64>,
    labels: &LabelSet,
    cfg: &ExperimentConfig,
) -> Result<Report> {
    cfg.validate()?;
    if features.nrows() != labels.n() {
        return Err(Error::param(format!(
            "{} feature rows but {} labeled-node slots",
            features.nrows(),
            labels.n()
        )));
    }
    if labels.used_label_count() < 2 {
        return Err(Error::param(
            "classification needs at least two distinct labels",
        ));
    }
    let nodes = labels.labeled_nodes();
    let n_train = ((cfg.ratio * nodes.len() as f64).round() as usize).clamp(1, nodes.len() - 1);

    let results = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let mut order = nodes.clone();
            order.shuffle(&mut rng);
            let (train, test) = order.split_at(n_train);
            let mut x_train = select_rows(features, train);
            let mut x_test = select_rows(features, test);
            if cfg.standardize {
                standardize(&mut x_train, &mut x_test);
            }
            let y_train: Vec<Vec<usize>> =
                train.iter().map(|&i| labels.labels(i).to_vec()).collect();
            let model = train_ovr_logreg(&x_train, &y_train, labels.label_count(), cfg.reg)?;
            let truth: Vec<Vec<usize>> = test.iter().map(|&i| labels.labels(i).to_vec()).collect();
            let k: Vec<usize> = truth.iter().map(Vec::len).collect();
            let predicted = predict_multilabel(&model.predict_proba(&x_test), &k);
            Ok((
                f1_scores(&truth, &predicted, labels.label_count()),
                model.skipped(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let splits: Vec<F1Scores> = results.iter().map(|r| r.0).collect();
    let skipped_labels = results.iter().map(|r| r.1).sum();
    if skipped_labels > 0 {
        log::warn!(
            "{skipped_labels} label(s) had no training example in some split and were skipped"
        );
    }
    let (macro_mean, macro_sd) = mean_sd(&splits.iter().map(|s| s.macro_f1).collect::<Vec<_>>());
    let (micro_mean, micro_sd) = mean_sd(&splits.iter().map(|s| s.micro_f1).collect::<Vec<_>>());
    Ok(Report {
        macro_mean,
        macro_sd,
        micro_mean,
        micro_sd,
        splits,
        skipped_labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    WalkLength,
    Gamma,
    Memory,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "walk_length" | "walk-length" | "L" => Ok(SweepAxis::WalkLength),
            "gamma" => Ok(SweepAxis::Gamma),
            "memory" => Ok(SweepAxis::Memory),
            other => Err(Error::param(format!(
                "unknown sweep axis `{other}` (expected walk_length, gamma or memory)"
            ))),
        }
    }

    /// Parses a comma-separated grid. Walk lengths also accept `a..b`
    /// (inclusive); a memory grid `v1,v2,...` expands to all `(p, q)` pairs.
    pub fn parse_grid(self, text: &str) -> Result<Vec<SweepPoint>> {
        let bad = |s: &str| Error::param(format!("bad grid value `{s}`"));
        let floats = || -> Result<Vec<f64>> {
            text.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad(s)))
                .collect()
        };
        let grid = match self {
            SweepAxis::WalkLength => {
                let mut out = Vec::new();
                for part in text.split(',') {
                    let part = part.trim();
                    if let Some((a, b)) = part.split_once("..") {
                        let a: usize = a.parse().map_err(|_| bad(part))?;
                        let b: usize = b.parse().map_err(|_| bad(part))?;
                        out.extend((a..=b).map(SweepPoint::WalkLength));
                    } else {
                        out.push(SweepPoint::WalkLength(part.parse().map_err(|_| bad(part))?));
                    }
                }
                out
            }
            SweepAxis::Gamma => floats()?.into_iter().map(SweepPoint::Gamma).collect(),
            SweepAxis::Memory => {
                let v = floats()?;
                v.iter()
                    .flat_map(|&p| v.iter().map(move |&q| SweepPoint::Memory { p, q }))
                    .collect()
            }
        };
        if grid.is_empty() {
            return Err(Error::param("sweep grid is empty"));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepPoint {
    WalkLength(usize),
    Gamma(f64),
    Memory { p: f64, q: f64 },
}

impl SweepPoint {
    pub fn axis(&self) -> SweepAxis {
        match self {
            SweepPoint::WalkLength(_) => SweepAxis::WalkLength,
            SweepPoint::Gamma(_) => SweepAxis::Gamma,
            SweepPoint::Memory { .. } => SweepAxis::Memory,
        }
    }
}

impl fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepPoint::WalkLength(l) => write!(f, "{l}"),
            SweepPoint::Gamma(g) => write!(f, "{g}"),
            SweepPoint::Memory { p, q } => write!(f, "{p},{q}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub report: Report,
}

/// Runs [`run_experiment`] on the embedding produced at every grid point,
/// all other settings held at `walk` / `warp`.
pub fn ablation_sweep(
    g: &Graph,
    labels: &LabelSet,
    grid: &[SweepPoint],
    walk: &WalkConfig,
    warp: &WarpSpec,
    mode: EmbedMode,
    exp: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    let Some(first) = grid.first() else {
        return Err(Error::param("sweep grid is empty"));
    };
    if grid.iter().any(|p| p.axis() != first.axis()) {
        return Err(Error::param("a sweep grid must vary a single axis"));
    }
    grid.iter()
        .map(|&point| {
            let mut cfg = walk.clone();
            let mut spec = *warp;
            match point {
                SweepPoint::WalkLength(l) => cfg.walk_length = l,
                SweepPoint::Gamma(gamma) => spec = WarpSpec::ibc(gamma).with_clip(warp.clip_c)?,
                SweepPoint::Memory { p, q } => {
                    cfg.p = p;
                    cfg.q = q;
                }
            }
            let pair = embed(g, &cfg, &spec, mode)?;
            let report = run_experiment(&pair.features(), labels, exp)?;
            log::info!("sweep point {point}: {report}");
            Ok(SweepRow { point, report })
        })
        .collect()
}

/// `value, macro_mean, macro_sd, micro_mean, micro_sd` with a header line.
pub fn write_sweep_tsv(rows: &[SweepRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "value\tmacro_mean\tmacro_sd\tmicro_mean\tmicro_sd")?;
    for row in rows {
        let r = &row.report;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            row.point, r.macro_mean, r.macro_sd, r.micro_mean, r.micro_sd
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(labels: &LabelSet) -> DMatrix<f64> {
        DMatrix::from_fn(labels.n(), labels.label_count(), |i, l| {
            if labels.labels(i).contains(&l) {
                1.0
            } else {
                0.0
            }
        })
    }

    fn blocks(n: usize, k: usize) -> LabelSet {
        LabelSet::from_classes(&(0..n).map(|i| i % k).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn one_hot_features_are_near_perfect() {
        let labels = blocks(60, 3);
        let r = run_experiment(&one_hot(&labels), &labels, &ExperimentConfig::default()).unwrap();
        assert!(r.micro_mean >= 0.95, "{r}");
    }

    #[test]
    fn zero_features_do_not_beat_the_prior() {
        let labels = blocks(60, 3);
        let r = run_experiment(
            &DMatrix::zeros(60, 4),
            &labels,
            &ExperimentConfig::default(),
        )
        .unwrap();
        // constant scores put every node in the same top-1 class: macro F1 = (1/3)(2/4) = 1/6 at best
        assert!(r.macro_mean <= 0.5 + 1e-12, "{r}");
    }

    #[test]
    fn reproducible() {
        let labels = blocks(40, 2);
        let x = DMatrix::from_fn(40, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let cfg = ExperimentConfig {
            repeats: 5,
            ..Default::default()
        };
        assert_eq!(
            run_experiment(&x, &labels, &cfg).unwrap(),
            run_experiment(&x, &labels, &cfg).unwrap()
        );
    }

    #[test]
    fn config_and_label_checks() {
        let labels = blocks(10, 2);
        let x = DMatrix::zeros(10, 1);
        assert!(run_experiment(
            &x,
            &labels,
            &ExperimentConfig {
                ratio: 1.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(run_experiment(
            &x,
            &labels,
            &ExperimentConfig {
                repeats: 0,
                ..Default::default()
            }
        )
        .is_err());
        let single = LabelSet::from_classes(&[0; 10]).unwrap();
        assert!(run_experiment(&x, &single, &ExperimentConfig::default()).is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(SweepAxis::WalkLength.parse_grid("1..3,7").unwrap().len(), 4);
        assert_eq!(SweepAxis::Memory.parse_grid("0.5,1,2").unwrap().len(), 9);
        assert_eq!(
            SweepAxis::Gamma.parse_grid("-1,0,1").unwrap()[0],
            SweepPoint::Gamma(-1.0)
        );
        assert!(SweepAxis::Gamma.parse_grid("x").is_err());
        assert!(SweepAxis::parse("beta").is_err());
    }

    #[test]
    fn tsv_has_one_row_per_point() {
        let labels = blocks(20, 2);
        let g = crate::synth::two_cliques(10).unwrap();
        let walk = WalkConfig {
            dim: 2,
            ..Default::default()
        };
        let exp = ExperimentConfig {
            repeats: 2,
            ..Default::default()
        };
        let grid = SweepAxis::Gamma.parse_grid("0,1").unwrap();
        let rows = ablation_sweep(
            &g,
            &labels,
            &grid,
            &walk,
            &WarpSpec::exponential(),
            EmbedMode::Closed,
            &exp,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sweep_tsv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
