use nalgebra::DMatrix;

/// For each row, the `k[i]` labels of highest probability (ties to the
/// lower label id). NaN columns are never predicted, so a row may receive
/// fewer than `k[i]` labels.
pub fn predict_multilabel(probs: &DMatrix<f64>, k: &[usize]) -> Vec<Vec<usize>> {
    assert_eq!(probs.nrows(), k.len(), "one label count per row");
    (0..probs.nrows())
        .map(|i| {
            let mut order: Vec<usize> = (0..probs.ncols())
                .filter(|&l| !probs[(i, l)].is_nan())
                .collect();
            order.sort_by(|&a, &b| probs[(i, b)].total_cmp(&probs[(i, a)]).then(a.cmp(&b)));
            order.truncate(k[i]);
            order.sort_unstable();
            order
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Macro F1 averages per-label F1 over all `label_count` labels (a label
/// never true nor predicted scores 0); Micro F1 pools the counts.
pub fn f1_scores(truth: &[Vec<usize>], predicted: &[Vec<usize>], label_count: usize) -> F1Scores {
    assert_eq!(
        truth.len(),
        predicted.len(),
        "same nodes in truth and prediction"
    );
    let mut tp = vec![0usize; label_count];
    let mut fp = vec![0usize; label_count];
    let mut fn_ = vec![0usize; label_count];
    for (t, p) in truth.iter().zip(predicted) {
        for &l in p {
            if t.contains(&l) {
                tp[l] += 1;
            } else {
                fp[l] += 1;
            }
        }
        for &l in t {
            if !p.contains(&l) {
                fn_[l] += 1;
            }
        }
    }
    let macro_f1 = if label_count == 0 {
        0.0
    } else {
        (0..label_count)
            .map(|l| f1(tp[l], fp[l], fn_[l]))
            .sum::<f64>()
            / label_count as f64
    };
    let sum = |v: &[usize]| v.iter().sum::<usize>();
    F1Scores {
        macro_f1,
        micro_f1: f1(sum(&tp), sum(&fp), sum(&fn_)),
    }
}
