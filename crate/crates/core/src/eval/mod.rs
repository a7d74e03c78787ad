//! Multi-label node classification: one-vs-rest logistic regression,
//! Macro/Micro F1, labeled-ratio experiments and ablation sweeps.

mod experiment;
mod labels;
mod logreg;
mod metrics;

pub use experiment::{
    ablation_sweep, run_experiment, write_sweep_tsv, ExperimentConfig, Report, SweepAxis,
    SweepPoint, SweepRow,
};
pub use labels::LabelSet;
pub use logreg::{train_binary_logreg, train_ovr_logreg, BinaryLogReg, OvrModel, LOGREG_GRAD_TOL};
pub use metrics::{f1_scores, predict_multilabel, F1Scores};
