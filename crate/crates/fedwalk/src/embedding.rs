//! SkipGram trainer with negative sampling: maps walk corpora to the
//! |V| x d embedding matrix.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    /// Embedding dimension.
    pub dim: usize,
    /// Window radius around each center position.
    pub window: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub epochs: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 128,
            window: 10,
            negatives: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            epochs: 1,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.window < 1 || self.negatives < 1 || self.epochs < 1 {
            return Err(Error::InvalidConfig(
                "dim, window, negatives and epochs must be >= 1".into(),
            ));
        }
        if !(self.lr_start >= self.lr_end && self.lr_end > 0.0) {
            return Err(Error::InvalidConfig(
                "learning rates must satisfy lr_start >= lr_end > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Input vectors are the published embedding; output vectors are the context
/// weights. Both stored flat, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub num_vertices: usize,
    pub dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn input_row(&self, v: usize) -> &[f64] {
        &self.input[v * self.dim..(v + 1) * self.dim]
    }

    pub fn input_row_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.input[v * self.dim..(v + 1) * self.dim]
    }

    pub fn output_row(&self, v: usize) -> &[f64] {
        &self.output[v * self.dim..(v + 1) * self.dim]
    }

    pub fn output_row_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.output[v * self.dim..(v + 1) * self.dim]
    }

    pub fn all_finite(&self) -> bool {
        self.input.iter().chain(self.output.iter()).all(|x| x.is_finite())
    }

    /// Text output: first line `|V| d`, then `vertex_id f1 ... fd` per line.
    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.num_vertices, self.dim)?;
        for v in 0..self.num_vertices {
            let row: Vec<String> = self.input_row(v).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{} {}", v, row.join(" "))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = std::io::BufReader::new(file)
            .lines()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Ok(t) => {
                    let t = t.trim().to_string();
                    if t.is_empty() || t.starts_with('#') {
                        None
                    } else {
                        Some(Ok((i + 1, t)))
                    }
                }
                Err(e) => Some(Err(Error::Io {
                    path: path.to_path_buf(),
                    source: e,
                })),
            });
        let (line_no, header) = lines.next().ok_or_else(|| Error::BadFormat {
            path: path.to_path_buf(),
            message: "empty embedding file".into(),
        })??;
        let mut toks = header.split_whitespace();
        let n: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(line_no, "bad vertex count".into()))?;
        let dim: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(line_no, "bad dimension".into()))?;
        let mut input = vec![0.0; n * dim];
        let mut seen = vec![false; n];
        for item in lines {
            let (line_no, text) = item?;
            let mut toks = text.split_whitespace();
            let v: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(line_no, "bad vertex id".into()))?;
            if v >= n {
                return Err(bad(line_no, format!("vertex {v} out of range")));
            }
            for i in 0..dim {
                input[v * dim + i] = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(line_no, format!("missing component {i}")))?;
            }
            seen[v] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::BadFormat {
                path: path.to_path_buf(),
                message: "missing embedding rows".into(),
            });
        }
        Ok(EmbeddingMatrix {
            num_vertices: n,
            dim,
            input,
            output: vec![0.0; n * dim],
        })
    }
}

/// Input vectors uniform in (-0.5/d, 0.5/d); output vectors zero.
pub fn init_embeddings(
    num_vertices: usize,
    config: &SkipGramConfig,
    rng: &mut RandomSource,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    let d = config.dim;
    let scale = 1.0 / d as f64;
    let input = (0..num_vertices * d)
        .map(|_| (rng.uniform_f64() - 0.5) * scale)
        .collect();
    Ok(EmbeddingMatrix {
        num_vertices,
        dim: d,
        input,
        output: vec![0.0; num_vertices * d],
    })
}

// sigma(30) differs from 1 by ~1e-13; clamping keeps ln() finite.
const SIGMOID_CLAMP: f64 = 30.0;

fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// Negative-sampling loss of one (center, context, negatives) triple:
/// `-ln sigma(u_ctx . v) - sum_neg ln sigma(-u_neg . v)`.
pub fn pair_loss(
    matrix: &EmbeddingMatrix,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> f64 {
    let v = matrix.input_row(center);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = -sigmoid(dot(matrix.output_row(context), v)).ln();
    for &neg in negatives {
        loss -= sigmoid(-dot(matrix.output_row(neg), v)).ln();
    }
    loss
}

/// One SGD step on a positive pair with its negative samples. Returns the
/// pre-update loss; only the touched rows change.
pub fn sgd_pair_step(
    matrix: &mut EmbeddingMatrix,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let d = matrix.dim;
    let loss = pair_loss(matrix, center, context, negatives);

    let mut center_grad = vec![0.0; d];
    {
        let (inputs, outputs) = (&matrix.input, &mut matrix.output);
        let v = &inputs[center * d..(center + 1) * d];
        let mut apply = |row: usize, target: f64| {
            let u = &mut outputs[row * d..(row + 1) * d];
            let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
            // d(loss)/d(dot) = sigma(dot) - target
            let g = sigmoid(dot) - target;
            for i in 0..d {
                center_grad[i] += g * u[i];
                u[i] -= lr * g * v[i];
            }
        };
        apply(context, 1.0);
        for &neg in negatives {
            apply(neg, 0.0);
        }
    }
    let v = &mut matrix.input[center * d..(center + 1) * d];
    for i in 0..d {
        v[i] -= lr * center_grad[i];
    }
    loss
}

/// Negative-sampling table over the unigram^(3/4) distribution of corpus
/// vertices.
pub struct NegativeTable {
    cumulative: Vec<f64>,
    vertices: Vec<usize>,
}

impl NegativeTable {
    pub fn build(corpus: &[Vec<usize>], num_vertices: usize) -> Result<Self> {
        let mut counts = vec![0u64; num_vertices];
        for walk in corpus {
            for &v in walk {
                counts[v] += 1;
            }
        }
        let mut cumulative = Vec::new();
        let mut vertices = Vec::new();
        let mut acc = 0.0;
        for (v, &c) in counts.iter().enumerate() {
            if c > 0 {
                acc += (c as f64).powf(0.75);
                cumulative.push(acc);
                vertices.push(v);
            }
        }
        if vertices.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(NegativeTable { cumulative, vertices })
    }

    pub fn sample(&self, rng: &mut RandomSource) -> usize {
        let total = *self.cumulative.last().unwrap();
        let target = rng.uniform_f64() * total;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        self.vertices[idx.min(self.vertices.len() - 1)]
    }
}

/// Train on the completed corpus. Each walk position pairs the center with
/// every vertex within the window radius; the learning rate decays linearly
/// from `lr_start` to `lr_end` across all (epoch, position) steps.
/// Single-threaded and bit-reproducible under a fixed seed.
pub fn train(
    corpus: &[Vec<usize>],
    num_vertices: usize,
    config: &SkipGramConfig,
    rng: &mut RandomSource,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    if corpus.is_empty() || corpus.iter().all(|w| w.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let mut matrix = init_embeddings(num_vertices, config, rng)?;
    train_into(&mut matrix, corpus, config, rng)?;
    Ok(matrix)
}

/// Training loop over an already-initialized matrix.
pub fn train_into(
    matrix: &mut EmbeddingMatrix,
    corpus: &[Vec<usize>],
    config: &SkipGramConfig,
    rng: &mut RandomSource,
) -> Result<f64> {
    let table = NegativeTable::build(corpus, matrix.num_vertices)?;
    let positions: usize = corpus.iter().map(|w| w.len()).sum();
    let total_steps = (positions * config.epochs) as f64;
    let mut step = 0usize;
    let mut total_loss = 0.0;
    let mut pairs = 0u64;
    let mut negatives = vec![0usize; config.negatives];

    for _ in 0..config.epochs {
        for walk in corpus {
            for (pos, &center) in walk.iter().enumerate() {
                let lr = config.lr_start
                    + (config.lr_end - config.lr_start) * (step as f64 / total_steps);
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window).min(walk.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = walk[ctx_pos];
                    for slot in negatives.iter_mut() {
                        // avoid using the positive context as its own negative
                        let mut neg = table.sample(rng);
                        for _ in 0..8 {
                            if neg != context {
                                break;
                            }
                            neg = table.sample(rng);
                        }
                        *slot = neg;
                    }
                    total_loss += sgd_pair_step(matrix, center, context, &negatives, lr);
                    pairs += 1;
                }
                step += 1;
            }
        }
    }
    Ok(total_loss / pairs.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dim: usize) -> SkipGramConfig {
        SkipGramConfig {
            dim,
            window: 2,
            negatives: 3,
            lr_start: 0.05,
            lr_end: 0.001,
            epochs: 1,
        }
    }

    #[test]
    fn init_shape_and_range() {
        let mut rng = RandomSource::new(1, 0);
        let config = small_config(128);
        let m = init_embeddings(50, &config, &mut rng).unwrap();
        assert_eq!(m.num_vertices, 50);
        assert_eq!(m.dim, 128);
        let bound = 0.5 / 128.0;
        for v in 0..50 {
            assert!(m.input_row(v).iter().all(|x| x.abs() < bound));
            assert!(m.output_row(v).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn init_deterministic() {
        let config = small_config(16);
        let a = init_embeddings(10, &config, &mut RandomSource::new(9, 2)).unwrap();
        let b = init_embeddings(10, &config, &mut RandomSource::new(9, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_at_origin() {
        // all-zero vectors: sigma(0) = 0.5, loss = -(1 + negatives) ln(0.5)
        let config = small_config(8);
        let m = EmbeddingMatrix {
            num_vertices: 5,
            dim: 8,
            input: vec![0.0; 40],
            output: vec![0.0; 40],
        };
        let negs = [2, 3, 4];
        let loss = pair_loss(&m, 0, 1, &negs);
        let expected = -((1 + negs.len()) as f64) * 0.5f64.ln();
        assert!((loss - expected).abs() < 1e-12);
        let _ = config;
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dim = 4;
        let mut rng = RandomSource::new(21, 0);
        for case in 0..20 {
            let mut m = EmbeddingMatrix {
                num_vertices: 6,
                dim,
                input: (0..24).map(|_| rng.uniform_f64() - 0.5).collect(),
                output: (0..24).map(|_| rng.uniform_f64() - 0.5).collect(),
            };
            let (center, context) = (case % 6, (case + 1) % 6);
            let negatives = [(case + 2) % 6, (case + 3) % 6];

            // analytic gradient from a unit step at tiny lr
            let lr = 1.0;
            let before = m.clone();
            sgd_pair_step(&mut m, center, context, &negatives, lr);
            let h = 1e-6;
            let check = |row_of_input: bool, row: usize, i: usize| {
                let idx = row * dim + i;
                let analytic = if row_of_input {
                    (before.input[idx] - m.input[idx]) / lr
                } else {
                    (before.output[idx] - m.output[idx]) / lr
                };
                let mut plus = before.clone();
                let mut minus = before.clone();
                if row_of_input {
                    plus.input[idx] += h;
                    minus.input[idx] -= h;
                } else {
                    plus.output[idx] += h;
                    minus.output[idx] -= h;
                }
                let numeric = (pair_loss(&plus, center, context, &negatives)
                    - pair_loss(&minus, center, context, &negatives))
                    / (2.0 * h);
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    (numeric - analytic).abs() / denom < 1e-4,
                    "grad mismatch case {case}: {analytic} vs {numeric}"
                );
            };
            for i in 0..dim {
                check(true, center, i);
                check(false, context, i);
                check(false, negatives[0], i);
            }
        }
    }

    #[test]
    fn repeated_updates_raise_dot_product() {
        let dim = 8;
        let mut rng = RandomSource::new(22, 0);
        let mut m = EmbeddingMatrix {
            num_vertices: 4,
            dim,
            input: (0..32).map(|_| (rng.uniform_f64() - 0.5) * 0.1).collect(),
            output: (0..32).map(|_| (rng.uniform_f64() - 0.5) * 0.1).collect(),
        };
        let dot = |m: &EmbeddingMatrix| {
            m.input_row(0)
                .iter()
                .zip(m.output_row(1))
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let mut last = dot(&m);
        for _ in 0..100 {
            sgd_pair_step(&mut m, 0, 1, &[2, 3], 0.1);
            let now = dot(&m);
            assert!(now >= last - 1e-12, "dot product fell: {last} -> {now}");
            last = now;
        }
        assert!(last > 0.5);
    }

    #[test]
    fn training_separates_cliques() {
        // corpus of walks confined to two disjoint 10-vertex cliques
        let mut rng = RandomSource::new(23, 0);
        let mut corpus = Vec::new();
        for start in 0..20usize {
            let block = start / 10;
            for _ in 0..8 {
                let mut walk = vec![start];
                for _ in 0..15 {
                    walk.push(block * 10 + rng.uniform_index(10));
                }
                corpus.push(walk);
            }
        }
        let config = SkipGramConfig {
            dim: 16,
            window: 4,
            negatives: 5,
            lr_start: 0.05,
            lr_end: 0.001,
            epochs: 2,
        };
        let m = train(&corpus, 20, &config, &mut rng).unwrap();
        assert!(m.all_finite());

        let cosine = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        };
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for u in 0..20 {
            for v in 0..u {
                let c = cosine(m.input_row(u), m.input_row(v));
                if u / 10 == v / 10 {
                    intra.push(c);
                } else {
                    inter.push(c);
                }
            }
        }
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(
            mean(&intra) > mean(&inter),
            "intra {} <= inter {}",
            mean(&intra),
            mean(&inter)
        );
    }

    #[test]
    fn training_deterministic() {
        let corpus = vec![vec![0, 1, 2, 1, 0], vec![2, 0, 1, 2, 2]];
        let config = small_config(8);
        let a = train(&corpus, 3, &config, &mut RandomSource::new(5, 3)).unwrap();
        let b = train(&corpus, 3, &config, &mut RandomSource::new(5, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_decreases_over_epochs() {
        let mut rng = RandomSource::new(30, 0);
        let corpus: Vec<Vec<usize>> = (0..10)
            .map(|_| (0..12).map(|_| rng.uniform_index(8)).collect())
            .collect();
        let config = SkipGramConfig {
            dim: 8,
            window: 3,
            negatives: 3,
            lr_start: 0.05,
            lr_end: 0.01,
            epochs: 1,
        };
        let mut matrix = init_embeddings(8, &config, &mut rng).unwrap();
        let mut losses = Vec::new();
        for _ in 0..10 {
            losses.push(train_into(&mut matrix, &corpus, &config, &mut rng).unwrap());
        }
        assert!(
            losses.last().unwrap() < losses.first().unwrap(),
            "losses {losses:?}"
        );
        assert!(matrix.all_finite());
    }

    #[test]
    fn empty_corpus_rejected() {
        let config = small_config(4);
        assert!(matches!(
            train(&[], 3, &config, &mut RandomSource::new(0, 0)).unwrap_err(),
            Error::EmptyCorpus
        ));
    }

    #[test]
    fn single_vertex_corpus_touches_one_row() {
        let corpus = vec![vec![0usize, 0, 0]];
        let config = small_config(4);
        let mut rng = RandomSource::new(31, 0);
        let init = init_embeddings(3, &config, &mut RandomSource::new(31, 0)).unwrap();
        let trained = train(&corpus, 3, &config, &mut rng).unwrap();
        // untouched vertices keep their initialization
        assert_eq!(trained.input_row(1), init.input_row(1));
        assert_eq!(trained.input_row(2), init.input_row(2));
    }

    #[test]
    fn save_load_round_trip() {
        let mut rng = RandomSource::new(32, 0);
        let config = small_config(6);
        let m = init_embeddings(7, &config, &mut rng).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, &buf).unwrap();
        let loaded = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!(loaded.num_vertices, 7);
        assert_eq!(loaded.dim, 6);
        for v in 0..7 {
            for (a, b) in m.input_row(v).iter().zip(loaded.input_row(v)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
