//! Simulated server/device orchestration: the HCT construction protocol and
//! the walk protocol as explicit message exchanges, with full traffic
//! accounting. Devices are passive actors invoked by a scheduler; the server
//! side only ever consumes message payloads, never raw adjacency lists.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{self, EmbeddingMatrix, SkipGramConfig};
use crate::error::{Error, Result};
use crate::eval;
use crate::graph::{Graph, LabelSet};
use crate::hct::{
    self, assign_bins, build_hct, default_bin_count, BinAssignment, DegreeVector,
    DissimilarityMatrix, Hct, OrderedDegreeMatrix,
};
use crate::privacy::RandomSource;
use crate::walker::{
    self, run_walk_traced, CommStats, EncoderTable, PredictorRecords,
    WalkConfig, WalkContext, WalkSequence, BYTES_PER_ID, BYTES_PER_REAL, BYTES_PER_TUPLE,
    WALK_STREAM_BASE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    GroupPlan,
    DegreeVector,
    VectorDictionary,
    DegreeMatrix,
    HctBroadcast,
    WalkDispatch,
    WalkHop,
    WalkUpload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    Device(usize),
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub payload_bytes: u64,
}

impl Message {
    fn fmt_endpoint(e: Endpoint) -> String {
        match e {
            Endpoint::Server => "SERVER".to_string(),
            Endpoint::Device(d) => d.to_string(),
        }
    }

    /// Line-delimited record: `kind src dst bytes`.
    pub fn write_log<W: Write>(log: &[Message], mut w: W) -> std::io::Result<()> {
        for m in log {
            let kind = match m.kind {
                MessageKind::GroupPlan => "group-plan",
                MessageKind::DegreeVector => "degree-vector",
                MessageKind::VectorDictionary => "vector-dictionary",
                MessageKind::DegreeMatrix => "degree-matrix",
                MessageKind::HctBroadcast => "hct-broadcast",
                MessageKind::WalkDispatch => "walk-dispatch",
                MessageKind::WalkHop => "walk-hop",
                MessageKind::WalkUpload => "walk-upload",
            };
            writeln!(
                w,
                "{} {} {} {}",
                kind,
                Self::fmt_endpoint(m.src),
                Self::fmt_endpoint(m.dst),
                m.payload_bytes
            )?;
        }
        Ok(())
    }
}

/// Resolved run configuration; defaults follow the reference hyperparameters
/// (l=40, w=10, d=128, gamma=80, epsilon=2, p=0.2, k=floor(ln |V|)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Bin count; `None` means floor(ln |V|).
    pub k: Option<usize>,
    pub epsilon: f64,
    pub walk_length: usize,
    pub p: f64,
    pub gamma: usize,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub epochs: usize,
    pub seed: u64,
    pub train_ratios: Vec<f64>,
    pub predictor_records: PredictorRecords,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: None,
            epsilon: 2.0,
            walk_length: 40,
            p: 0.2,
            gamma: 80,
            dim: 128,
            window: 10,
            negatives: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            epochs: 1,
            seed: 0,
            train_ratios: vec![0.5],
            predictor_records: PredictorRecords::SkippedHop,
        }
    }
}

impl RunConfig {
    pub fn bin_count(&self, num_vertices: usize) -> usize {
        self.k.unwrap_or_else(|| default_bin_count(num_vertices))
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            len: self.walk_length,
            epsilon: self.epsilon,
            p: self.p,
            gamma: self.gamma,
            predictor_records: self.predictor_records,
        }
    }

    pub fn skipgram_config(&self) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            epochs: self.epochs,
        }
    }

    /// Parse a flat `key = value` config file; `#` comments allowed.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = RunConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected `key = value`".into(),
            })?;
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            config.set(key.trim(), value.trim()).map_err(|e| bad(e))?;
        }
        Ok(config)
    }

    /// Apply one `key = value` setting; shared by file parsing and flags.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let bad = || format!("bad value {value:?} for {key}");
        match key {
            "k" => self.k = Some(value.parse().map_err(|_| bad())?),
            "epsilon" => self.epsilon = value.parse().map_err(|_| bad())?,
            "walk_length" | "l" => self.walk_length = value.parse().map_err(|_| bad())?,
            "p" => self.p = value.parse().map_err(|_| bad())?,
            "gamma" => self.gamma = value.parse().map_err(|_| bad())?,
            "dim" | "d" => self.dim = value.parse().map_err(|_| bad())?,
            "window" | "w" => self.window = value.parse().map_err(|_| bad())?,
            "negatives" => self.negatives = value.parse().map_err(|_| bad())?,
            "lr_start" => self.lr_start = value.parse().map_err(|_| bad())?,
            "lr_end" => self.lr_end = value.parse().map_err(|_| bad())?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "train_ratios" => {
                self.train_ratios = value
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad())?;
            }
            "predictor_records" => {
                self.predictor_records = match value {
                    "skipped-hop" => PredictorRecords::SkippedHop,
                    "predicted-hop" => PredictorRecords::PredictedHop,
                    _ => return Err(format!("bad value {value:?} for {key}")),
                };
            }
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// FNV-1a hash of the resolved configuration, echoed into outputs.
    pub fn hash(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

// Stream layout for protocol randomness; walk streams live above
// WALK_STREAM_BASE.
const STREAM_BINS: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_DEVICE_BASE: u64 = 1000;

/// Outputs of the HCT construction protocol.
pub struct HctArtifacts {
    pub bins: BinAssignment,
    pub vectors: Vec<DegreeVector>,
    pub dissim: DissimilarityMatrix,
    pub hct: Hct,
}

/// Execute the HCT protocol: bin plan broadcast, per-device noised degree
/// vectors, dictionary broadcast, per-device ordered matrices, then
/// server-side dissimilarity and clustering. The server consumes only the
/// uploaded payloads.
pub fn run_hct_protocol(
    graph: &Graph,
    config: &RunConfig,
) -> Result<(HctArtifacts, Vec<Message>)> {
    let n = graph.num_vertices();
    let k = config.bin_count(n);
    let mut log = Vec::new();

    // Server: group the vertices into bins.
    let mut server_rng = RandomSource::new(config.seed, STREAM_BINS);
    let bins = assign_bins(n, k, &mut server_rng)?;

    // Round 1: plan broadcast, noised vector upload.
    let plan_bytes = n as u64 * BYTES_PER_ID;
    let vector_bytes = k as u64 * BYTES_PER_REAL;
    let mut vectors: Vec<DegreeVector> = Vec::with_capacity(n);
    for device in 0..n {
        log.push(Message {
            kind: MessageKind::GroupPlan,
            src: Endpoint::Server,
            dst: Endpoint::Device(device),
            payload_bytes: plan_bytes,
        });
        // Device side: count neighbors per bin and noise the counts.
        let view = graph.device_view(device);
        let mut device_rng =
            RandomSource::new(config.seed, STREAM_DEVICE_BASE + device as u64);
        let vector = hct::local_degree_vector(&view, &bins, config.epsilon, &mut device_rng)?;
        log.push(Message {
            kind: MessageKind::DegreeVector,
            src: Endpoint::Device(device),
            dst: Endpoint::Server,
            payload_bytes: vector_bytes,
        });
        vectors.push(vector);
    }

    // Round 2: dictionary broadcast, ordered matrix upload.
    let dictionary: HashMap<usize, DegreeVector> =
        vectors.iter().cloned().enumerate().collect();
    let dictionary_bytes = n as u64 * vector_bytes;
    let mut matrices: Vec<OrderedDegreeMatrix> = Vec::with_capacity(n);
    for device in 0..n {
        log.push(Message {
            kind: MessageKind::VectorDictionary,
            src: Endpoint::Server,
            dst: Endpoint::Device(device),
            payload_bytes: dictionary_bytes,
        });
        let view = graph.device_view(device);
        let matrix = if view.neighbors.is_empty() {
            OrderedDegreeMatrix::zero_row(k)
        } else {
            hct::ordered_degree_matrix(&view, &dictionary)?
        };
        log.push(Message {
            kind: MessageKind::DegreeMatrix,
            src: Endpoint::Device(device),
            dst: Endpoint::Server,
            payload_bytes: matrix.num_rows() as u64 * k as u64 * BYTES_PER_REAL,
        });
        matrices.push(matrix);
    }

    // Server side: dissimilarity matrix and clustering over payloads only.
    let dissim = hct::dissimilarity_matrix(&matrices)?;
    let hct = build_hct(&dissim);
    Ok((
        HctArtifacts {
            bins,
            vectors,
            dissim,
            hct,
        },
        log,
    ))
}

/// Execute the walk protocol: artifact broadcast, then `gamma` dispatch
/// rounds over shuffled non-isolated vertices.
pub fn run_walk_protocol(
    graph: &Graph,
    artifacts: &HctArtifacts,
    config: &RunConfig,
) -> Result<(Vec<WalkSequence>, CommStats, Vec<Message>)> {
    let walk_config = config.walk_config();
    walk_config.validate()?;
    let n = graph.num_vertices();
    let views = graph.device_views();
    let encoder = EncoderTable::build(&artifacts.dissim, &artifacts.hct, config.epsilon)?;
    let ctx = WalkContext {
        views: &views,
        vectors: &artifacts.vectors,
        dissim: &artifacts.dissim,
        tree: &artifacts.hct,
        bins: &artifacts.bins,
        encoder: &encoder,
    };

    let mut log = Vec::new();
    let mut stats = CommStats::default();
    let broadcast_bytes =
        artifacts.dissim.payload_bytes() as u64 + artifacts.hct.payload_bytes() as u64;
    for device in 0..n {
        log.push(Message {
            kind: MessageKind::HctBroadcast,
            src: Endpoint::Server,
            dst: Endpoint::Device(device),
            payload_bytes: broadcast_bytes,
        });
    }
    stats.server_to_device += n as u64;
    stats.payload_bytes += broadcast_bytes * n as u64;

    let base_rng = RandomSource::new(config.seed, 0);
    let mut shuffle_rng = base_rng.derive(u64::MAX);
    let starts = graph.non_isolated();
    let mut corpus = Vec::with_capacity(starts.len() * config.gamma);
    let mut walk_id: u64 = 0;
    for _ in 0..config.gamma {
        let mut order = starts.clone();
        shuffle_rng.shuffle(&mut order);
        for start in order {
            log.push(Message {
                kind: MessageKind::WalkDispatch,
                src: Endpoint::Server,
                dst: Endpoint::Device(start),
                payload_bytes: BYTES_PER_TUPLE,
            });
            stats.server_to_device += 1;
            stats.payload_bytes += BYTES_PER_TUPLE;

            let mut walk_rng = base_rng.derive(WALK_STREAM_BASE + walk_id);
            let (seq, walk_stats, hops) =
                run_walk_traced(start, &walk_config, &ctx, &mut walk_rng)?;
            for hop in &hops {
                log.push(Message {
                    kind: MessageKind::WalkHop,
                    src: Endpoint::Device(hop.src),
                    dst: Endpoint::Device(hop.dst),
                    payload_bytes: hop.payload_bytes,
                });
            }
            let final_device = *seq.true_path.last().expect("non-empty walk");
            log.push(Message {
                kind: MessageKind::WalkUpload,
                src: Endpoint::Device(final_device),
                dst: Endpoint::Server,
                payload_bytes: seq.encoded.len() as u64 * BYTES_PER_ID,
            });
            stats.merge(&walk_stats);
            corpus.push(seq);
            walk_id += 1;
        }
    }
    Ok((corpus, stats, log))
}

/// Metrics for one train ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub train_ratio: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_label_f1: Vec<f64>,
    pub skipped_labels: Vec<usize>,
}

/// Consolidated run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub config: RunConfig,
    pub config_hash: String,
    pub num_vertices: usize,
    pub num_edges: usize,
    pub num_walks: usize,
    pub comm: CommStats,
    /// Headline per-walk metric: observed device-to-device mean vs closed form.
    pub observed_messages_per_walk: f64,
    pub expected_messages_per_walk: f64,
    /// The O(|V|^2) artifact broadcast, excluded from the per-walk metric.
    pub broadcast_bytes: u64,
    pub metrics: Vec<MetricsReport>,
    /// Thresholding rule used by the evaluation harness.
    pub prediction_rule: String,
}

pub struct PipelineArtifacts {
    pub hct: HctArtifacts,
    pub corpus: Vec<WalkSequence>,
    pub embeddings: EmbeddingMatrix,
    pub message_log: Vec<Message>,
    pub report: PipelineReport,
}

/// Full run: HCT protocol, walk protocol, SkipGram training, then
/// classification metrics for each configured train ratio.
pub fn run_pipeline(
    graph: &Graph,
    labels: Option<&LabelSet>,
    config: &RunConfig,
) -> Result<PipelineArtifacts> {
    let stage = |stage: &'static str| move |source: Error| Error::Stage {
        stage,
        source: Box::new(source),
    };

    let (hct_artifacts, mut log) = run_hct_protocol(graph, config).map_err(stage("hct"))?;
    let (corpus, comm, walk_log) =
        run_walk_protocol(graph, &hct_artifacts, config).map_err(stage("walk"))?;
    log.extend(walk_log);

    let sequences: Vec<Vec<usize>> = corpus.iter().map(|w| w.encoded.clone()).collect();
    let mut train_rng = RandomSource::new(config.seed, STREAM_TRAIN);
    let embeddings = embedding::train(
        &sequences,
        graph.num_vertices(),
        &config.skipgram_config(),
        &mut train_rng,
    )
    .map_err(stage("embed"))?;

    let mut metrics = Vec::new();
    if let Some(labels) = labels {
        for &train_ratio in &config.train_ratios {
            metrics.push(
                evaluate(&embeddings, labels, train_ratio, config.seed)
                    .map_err(stage("eval"))?,
            );
        }
    }

    let num_walks = corpus.len();
    let broadcast_bytes = (hct_artifacts.dissim.payload_bytes()
        + hct_artifacts.hct.payload_bytes()) as u64
        * graph.num_vertices() as u64;
    let report = PipelineReport {
        seed: config.seed,
        config: config.clone(),
        config_hash: format!("{:016x}", config.hash()),
        num_vertices: graph.num_vertices(),
        num_edges: graph.num_edges(),
        num_walks,
        comm,
        observed_messages_per_walk: comm.device_to_device as f64 / num_walks.max(1) as f64,
        expected_messages_per_walk: walker::expected_messages_recurrence(
            config.walk_length,
            config.p,
        ),
        broadcast_bytes,
        metrics,
        prediction_rule: "top-k by classifier probability, k = true label count".into(),
    };
    Ok(PipelineArtifacts {
        hct: hct_artifacts,
        corpus,
        embeddings,
        message_log: log,
        report,
    })
}

/// Split, fit, predict, score for one train ratio.
pub fn evaluate(
    embeddings: &EmbeddingMatrix,
    labels: &LabelSet,
    train_ratio: f64,
    seed: u64,
) -> Result<MetricsReport> {
    let labeled = labels.labeled_vertices();
    let spec = eval::SplitSpec { train_ratio, seed };
    let (train_set, test_set) = eval::split(&labeled, &spec)?;
    let model = eval::train_classifier(embeddings, labels, &train_set)?;
    let predictions = eval::predict(&model, embeddings, &test_set, labels);
    let truth: Vec<_> = test_set.iter().map(|&v| labels.of(v).clone()).collect();
    Ok(MetricsReport {
        train_ratio,
        micro_f1: eval::micro_f1(&predictions, &truth),
        macro_f1: eval::macro_f1(&predictions, &truth, labels.num_labels()),
        per_label_f1: eval::per_label_f1(&predictions, &truth, labels.num_labels()),
        skipped_labels: model.skipped_labels.clone(),
    })
}

/// Centralized reference: plain unbiased random walks, no encoding, same
/// trainer. Used for head-to-head comparisons.
pub fn centralized_corpus(
    graph: &Graph,
    walk_length: usize,
    gamma: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let base = RandomSource::new(seed, 0);
    let mut shuffle_rng = base.derive(u64::MAX);
    let starts = graph.non_isolated();
    let mut corpus = Vec::with_capacity(starts.len() * gamma);
    let mut walk_id = 0u64;
    for _ in 0..gamma {
        let mut order = starts.clone();
        shuffle_rng.shuffle(&mut order);
        for start in order {
            let mut rng = base.derive(WALK_STREAM_BASE + walk_id);
            let mut walk = Vec::with_capacity(walk_length);
            let mut current = start;
            walk.push(current);
            for _ in 1..walk_length {
                let nbrs = graph.neighbors(current);
                current = nbrs[rng.uniform_index(nbrs.len())];
                walk.push(current);
            }
            corpus.push(walk);
            walk_id += 1;
        }
    }
    corpus
}

/// The walker's standalone corpus generator, wired to protocol artifacts.
pub fn corpus_context<'a>(
    graph: &Graph,
    artifacts: &'a HctArtifacts,
    views: &'a [crate::graph::DeviceView],
    encoder: &'a EncoderTable,
) -> WalkContext<'a> {
    let _ = graph;
    WalkContext {
        views,
        vectors: &artifacts.vectors,
        dissim: &artifacts.dissim,
        tree: &artifacts.hct,
        bins: &artifacts.bins,
        encoder,
    }
}

/// Structural visibility audit over a message log: device-to-device traffic
/// may only be walk hops, and only uploads/dispatches touch the server.
pub fn audit_visibility(log: &[Message]) -> std::result::Result<(), String> {
    for m in log {
        match (m.src, m.dst) {
            (Endpoint::Device(_), Endpoint::Device(_)) => {
                if m.kind != MessageKind::WalkHop {
                    return Err(format!("device-to-device message of kind {:?}", m.kind));
                }
            }
            (Endpoint::Device(_), Endpoint::Server) => {
                if !matches!(
                    m.kind,
                    MessageKind::DegreeVector | MessageKind::DegreeMatrix | MessageKind::WalkUpload
                ) {
                    return Err(format!("unexpected upload kind {:?}", m.kind));
                }
            }
            (Endpoint::Server, Endpoint::Device(_)) => {
                if !matches!(
                    m.kind,
                    MessageKind::GroupPlan
                        | MessageKind::VectorDictionary
                        | MessageKind::HctBroadcast
                        | MessageKind::WalkDispatch
                ) {
                    return Err(format!("unexpected broadcast kind {:?}", m.kind));
                }
            }
            (Endpoint::Server, Endpoint::Server) => {
                return Err("server-to-server message".into());
            }
        }
    }
    Ok(())
}

pub use walker::generate_corpus;
