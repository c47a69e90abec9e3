//! Multi-label node classification harness: train/test split, one-vs-rest
//! logistic regression on the embeddings, micro/macro F1.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::LabelSet;
use crate::privacy::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Proportion of labeled vertices used for training.
    pub train_ratio: f64,
    pub seed: u64,
}

/// One binary logistic model per label seen in training data.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    /// Per-label weights, `dim + 1` with bias last; `None` when the label had
    /// no positives in training data.
    weights: Vec<Option<Vec<f64>>>,
    pub skipped_labels: Vec<usize>,
    dim: usize,
}

const L2_PENALTY: f64 = 1e-4;
const MAX_ITERS: usize = 500;
const GRAD_TOL: f64 = 1e-6;
const SPLIT_STREAM: u64 = 0x5011;

/// Uniform random split of the labeled vertices, disjoint and exhaustive.
pub fn split(labeled_vertices: &[usize], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) {
        return Err(Error::DegenerateSplit(format!(
            "train ratio {} outside (0,1)",
            spec.train_ratio
        )));
    }
    let mut order = labeled_vertices.to_vec();
    let mut rng = RandomSource::new(spec.seed, SPLIT_STREAM);
    rng.shuffle(&mut order);
    let n_train = (spec.train_ratio * order.len() as f64).round() as usize;
    if n_train == 0 || n_train == order.len() {
        return Err(Error::DegenerateSplit(format!(
            "ratio {} leaves an empty side over {} vertices",
            spec.train_ratio,
            order.len()
        )));
    }
    let test = order.split_off(n_train);
    Ok((order, test))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-30.0, 30.0)).exp())
}

/// Regularized mean log-loss and its gradient for one binary label.
fn logistic_loss_grad(
    weights: &[f64],
    features: &[Vec<f64>],
    targets: &[f64],
) -> (f64, Vec<f64>) {
    let n = features.len() as f64;
    let dim = weights.len();
    let mut grad = vec![0.0; dim];
    let mut loss = 0.0;
    for (x, &t) in features.iter().zip(targets) {
        let z: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
        let pred = sigmoid(z);
        loss -= t * pred.max(1e-300).ln() + (1.0 - t) * (1.0 - pred).max(1e-300).ln();
        let g = pred - t;
        for (gi, &xi) in grad.iter_mut().zip(x) {
            *gi += g * xi;
        }
    }
    loss /= n;
    for (gi, &w) in grad.iter_mut().zip(weights) {
        *gi = *gi / n + L2_PENALTY * w;
    }
    loss += 0.5 * L2_PENALTY * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad)
}

/// Fit one-vs-rest logistic regression by full-batch gradient descent.
/// Labels with no positive training example are skipped and recorded.
pub fn train_classifier(
    embeddings: &EmbeddingMatrix,
    labels: &LabelSet,
    train_set: &[usize],
) -> Result<ClassifierModel> {
    let dim = embeddings.dim;
    let features: Vec<Vec<f64>> = train_set
        .iter()
        .map(|&v| {
            let mut x = embeddings.input_row(v).to_vec();
            x.push(1.0); // bias
            x
        })
        .collect();
    // Step size from the logistic smoothness bound over these features.
    let max_norm_sq = features
        .iter()
        .map(|x| x.iter().map(|a| a * a).sum::<f64>())
        .fold(0.0f64, f64::max);
    let lr = 1.0 / (max_norm_sq / 4.0 + L2_PENALTY).max(1e-12);

    let mut weights = Vec::with_capacity(labels.num_labels());
    let mut skipped = Vec::new();
    for label in 0..labels.num_labels() {
        let targets: Vec<f64> = train_set
            .iter()
            .map(|&v| if labels.of(v).contains(&label) { 1.0 } else { 0.0 })
            .collect();
        if !targets.iter().any(|&t| t > 0.0) {
            skipped.push(label);
            weights.push(None);
            continue;
        }
        let mut w = vec![0.0; dim + 1];
        for _ in 0..MAX_ITERS {
            let (_, grad) = logistic_loss_grad(&w, &features, &targets);
            let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < GRAD_TOL {
                break;
            }
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= lr * gi;
            }
        }
        weights.push(Some(w));
    }
    Ok(ClassifierModel {
        weights,
        skipped_labels: skipped,
        dim,
    })
}

impl ClassifierModel {
    /// Per-label probabilities for one vertex; untrained labels score 0.
    pub fn probabilities(&self, embeddings: &EmbeddingMatrix, vertex: usize) -> Vec<f64> {
        let mut x = embeddings.input_row(vertex).to_vec();
        debug_assert_eq!(x.len(), self.dim);
        x.push(1.0);
        self.weights
            .iter()
            .map(|w| match w {
                Some(w) => sigmoid(x.iter().zip(w).map(|(a, b)| a * b).sum()),
                None => 0.0,
            })
            .collect()
    }

    pub fn num_labels(&self) -> usize {
        self.weights.len()
    }
}

/// Top-`k_i` prediction with oracle label counts: each test vertex with `k_i`
/// true labels receives its `k_i` highest-probability labels, ties by
/// ascending label id.
pub fn predict(
    model: &ClassifierModel,
    embeddings: &EmbeddingMatrix,
    test_set: &[usize],
    labels: &LabelSet,
) -> Vec<BTreeSet<usize>> {
    test_set
        .iter()
        .map(|&v| {
            let k = labels.of(v).len().min(model.num_labels());
            if k == 0 {
                return BTreeSet::new();
            }
            let probs = model.probabilities(embeddings, v);
            let mut order: Vec<usize> = (0..probs.len()).collect();
            order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
            order.into_iter().take(k).collect()
        })
        .collect()
}

/// Pooled-count F1 across all labels.
pub fn micro_f1(predictions: &[BTreeSet<usize>], truth: &[BTreeSet<usize>]) -> f64 {
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (pred, real) in predictions.iter().zip(truth) {
        tp += pred.intersection(real).count();
        fp += pred.difference(real).count();
        fnn += real.difference(pred).count();
    }
    f1_from_counts(tp, fp, fnn)
}

/// Unweighted mean of per-label F1; a label with no positives and no
/// predictions contributes 0.
pub fn macro_f1(predictions: &[BTreeSet<usize>], truth: &[BTreeSet<usize>], num_labels: usize) -> f64 {
    if num_labels == 0 {
        return 0.0;
    }
    let per_label = per_label_f1(predictions, truth, num_labels);
    per_label.iter().sum::<f64>() / num_labels as f64
}

pub fn per_label_f1(
    predictions: &[BTreeSet<usize>],
    truth: &[BTreeSet<usize>],
    num_labels: usize,
) -> Vec<f64> {
    (0..num_labels)
        .map(|label| {
            let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
            for (pred, real) in predictions.iter().zip(truth) {
                match (pred.contains(&label), real.contains(&label)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fnn += 1,
                    (false, false) => {}
                }
            }
            f1_from_counts(tp, fp, fnn)
        })
        .collect()
}

fn f1_from_counts(tp: usize, fp: usize, fnn: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fnn) as f64;
    2.0 * p * r / (p + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{init_embeddings, SkipGramConfig};

    fn labelset(assignments: &[(usize, &[usize])], n: usize, num_labels: usize) -> LabelSet {
        let mut labels = vec![BTreeSet::new(); n];
        for &(v, ls) in assignments {
            labels[v] = ls.iter().copied().collect();
        }
        LabelSet::from_labels(labels, num_labels)
    }

    #[test]
    fn split_half() {
        let vertices: Vec<usize> = (0..100).collect();
        let spec = SplitSpec { train_ratio: 0.5, seed: 1 };
        let (train, test) = split(&vertices, &spec).unwrap();
        assert_eq!(train.len(), 50);
        assert_eq!(test.len(), 50);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, vertices);
    }

    #[test]
    fn split_deterministic() {
        let vertices: Vec<usize> = (0..30).collect();
        let spec = SplitSpec { train_ratio: 0.4, seed: 7 };
        assert_eq!(split(&vertices, &spec).unwrap(), split(&vertices, &spec).unwrap());
    }

    #[test]
    fn split_degenerate() {
        let vertices = vec![0, 1];
        assert!(split(&vertices, &SplitSpec { train_ratio: 0.01, seed: 0 }).is_err());
        assert!(split(&vertices, &SplitSpec { train_ratio: 1.5, seed: 0 }).is_err());
    }

    /// Embeddings where vertex v's first feature encodes its class.
    fn separable_embeddings(n: usize) -> EmbeddingMatrix {
        let config = SkipGramConfig {
            dim: 2,
            ..Default::default()
        };
        let mut rng = RandomSource::new(0, 0);
        let mut m = init_embeddings(n, &config, &mut rng).unwrap();
        for v in 0..n {
            // first half class 0, second half class 1
            m.input_row_mut(v)[0] = if v < n / 2 { -1.0 } else { 1.0 };
        }
        m
    }

    #[test]
    fn separable_case_perfect_accuracy() {
        let n = 20;
        let m = separable_embeddings(n);
        let assignments: Vec<(usize, Vec<usize>)> =
            (0..n).map(|v| (v, vec![usize::from(v >= n / 2)])).collect();
        let refs: Vec<(usize, &[usize])> = assignments
            .iter()
            .map(|(v, ls)| (*v, ls.as_slice()))
            .collect();
        let labels = labelset(&refs, n, 2);
        let train: Vec<usize> = (0..n).collect();
        let model = train_classifier(&m, &labels, &train).unwrap();
        assert!(model.skipped_labels.is_empty());
        let preds = predict(&model, &m, &train, &labels);
        let truth: Vec<BTreeSet<usize>> = train.iter().map(|&v| labels.of(v).clone()).collect();
        assert_eq!(micro_f1(&preds, &truth), 1.0);
        assert_eq!(macro_f1(&preds, &truth, 2), 1.0);
    }

    #[test]
    fn all_negative_label_skipped() {
        let n = 10;
        let m = separable_embeddings(n);
        let labels = labelset(&(0..n).map(|v| (v, &[0usize][..])).collect::<Vec<_>>(), n, 3);
        let model = train_classifier(&m, &labels, &(0..n).collect::<Vec<_>>()).unwrap();
        assert_eq!(model.skipped_labels, vec![1, 2]);
    }

    #[test]
    fn optimizer_descends() {
        let n = 16;
        let m = separable_embeddings(n);
        let labels = labelset(
            &(0..n).map(|v| (v, if v % 2 == 0 { &[0usize][..] } else { &[][..] })).collect::<Vec<_>>(),
            n,
            1,
        );
        let train: Vec<usize> = (0..n).collect();
        let features: Vec<Vec<f64>> = train
            .iter()
            .map(|&v| {
                let mut x = m.input_row(v).to_vec();
                x.push(1.0);
                x
            })
            .collect();
        let targets: Vec<f64> = train
            .iter()
            .map(|&v| if labels.of(v).contains(&0) { 1.0 } else { 0.0 })
            .collect();
        let (initial, _) = logistic_loss_grad(&vec![0.0; 3], &features, &targets);
        let model = train_classifier(&m, &labels, &train).unwrap();
        let w = model.weights[0].as_ref().unwrap();
        let (final_loss, _) = logistic_loss_grad(w, &features, &targets);
        assert!(final_loss <= initial, "{final_loss} > {initial}");
    }

    #[test]
    fn predict_top_k_rules() {
        let n = 4;
        let m = separable_embeddings(n);
        let labels = labelset(&[(0, &[0usize, 1, 2][..]), (1, &[][..]), (2, &[0][..])], n, 3);
        let model = train_classifier(&m, &labels, &[0, 2]).unwrap();
        // k = 0 -> empty; k = num_labels -> all labels
        let preds = predict(&model, &m, &[1, 0], &labels);
        assert!(preds[0].is_empty());
        assert_eq!(preds[1].len(), 3);
    }

    #[test]
    fn f1_hand_example() {
        // label 0: TP=1 FP=1 FN=0; label 1: TP=1 FP=0 FN=1 -> micro = macro = 2/3
        let predictions: Vec<BTreeSet<usize>> = vec![
            [0].into_iter().collect(),
            [0].into_iter().collect(),
            [1].into_iter().collect(),
        ];
        let truth: Vec<BTreeSet<usize>> = vec![
            [0].into_iter().collect(),
            [1].into_iter().collect(),
            [1].into_iter().collect(),
        ];
        let micro = micro_f1(&predictions, &truth);
        let macro_ = macro_f1(&predictions, &truth, 2);
        assert!((micro - 2.0 / 3.0).abs() < 1e-12, "micro {micro}");
        assert!((macro_ - 2.0 / 3.0).abs() < 1e-12, "macro {macro_}");
    }

    #[test]
    fn f1_perfect_and_disjoint() {
        let a: Vec<BTreeSet<usize>> = vec![[0].into_iter().collect(), [1].into_iter().collect()];
        assert_eq!(micro_f1(&a, &a), 1.0);
        assert_eq!(macro_f1(&a, &a, 2), 1.0);
        let b: Vec<BTreeSet<usize>> = vec![[1].into_iter().collect(), [0].into_iter().collect()];
        assert_eq!(micro_f1(&a, &b), 0.0);
        assert_eq!(macro_f1(&a, &b, 2), 0.0);
    }

    #[test]
    fn micro_equals_macro_single_label() {
        let preds: Vec<BTreeSet<usize>> = vec![
            [0].into_iter().collect(),
            BTreeSet::new(),
            [0].into_iter().collect(),
        ];
        let truth: Vec<BTreeSet<usize>> = vec![
            [0].into_iter().collect(),
            [0].into_iter().collect(),
            BTreeSet::new(),
        ];
        assert!((micro_f1(&preds, &truth) - macro_f1(&preds, &truth, 1)).abs() < 1e-12);
    }
}
