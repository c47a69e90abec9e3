//! Command-line driver for the fedwalk library: run individual stages or the
//! full pipeline, with a flat `key = value` config file, flag overrides, and
//! reproducible seeded outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fedwalk::federation::{self, HctArtifacts, Message, RunConfig};
use fedwalk::graph::{Graph, LabelSet};
use fedwalk::hct::{DissimilarityMatrix, Hct};
use fedwalk::walker::{self, expected_messages, expected_savings};
use fedwalk::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "fedwalk", version, about = "Federated DP node embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every stage; values override the config file, which
/// overrides built-in defaults.
#[derive(Args, Debug)]
struct ConfigFlags {
    /// Flat key = value config file (or set FEDWALK_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Privacy budget
    #[arg(long)]
    epsilon: Option<f64>,
    /// Walk length (vertices per walk)
    #[arg(long)]
    l: Option<usize>,
    /// Predictor trigger probability
    #[arg(long)]
    p: Option<f64>,
    /// Walks per vertex
    #[arg(long)]
    gamma: Option<usize>,
    /// Bin count (default: floor(ln |V|))
    #[arg(long)]
    k: Option<usize>,
    /// Embedding dimension
    #[arg(long)]
    dim: Option<usize>,
    /// SkipGram window size
    #[arg(long)]
    window: Option<usize>,
    /// Comma-separated train ratios for evaluation
    #[arg(long)]
    train_ratios: Option<String>,
    /// Extra `key=value` overrides (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (stages are currently sequential; accepted for
    /// interface stability)
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl ConfigFlags {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let path = self
            .config
            .clone()
            .or_else(|| std::env::var_os("FEDWALK_CONFIG").map(PathBuf::from));
        let mut config = match path {
            Some(p) => RunConfig::load(&p).map_err(data_err)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(epsilon) = self.epsilon {
            config.epsilon = epsilon;
        }
        if let Some(l) = self.l {
            config.walk_length = l;
        }
        if let Some(p) = self.p {
            config.p = p;
        }
        if let Some(gamma) = self.gamma {
            config.gamma = gamma;
        }
        if let Some(k) = self.k {
            config.k = Some(k);
        }
        if let Some(dim) = self.dim {
            config.dim = dim;
        }
        if let Some(window) = self.window {
            config.window = window;
        }
        if let Some(ratios) = &self.train_ratios {
            config
                .set("train_ratios", ratios)
                .map_err(|e| usage_err(anyhow::anyhow!(e)))?;
        }
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| usage_err(anyhow::anyhow!("--set expects KEY=VALUE, got {pair:?}")))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| usage_err(anyhow::anyhow!(e)))?;
        }
        if self.threads == 0 {
            return Err(usage_err(anyhow::anyhow!("--threads must be >= 1")));
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the hierarchy-context tree over a graph
    Hct {
        /// Edge-list file (one `u v` pair per line)
        #[arg(long)]
        edges: PathBuf,
        /// Output dissimilarity matrix (binary)
        #[arg(long)]
        out_dissim: PathBuf,
        /// Output tree (text)
        #[arg(long)]
        out_tree: PathBuf,
        /// Optional message log (line-delimited)
        #[arg(long)]
        out_log: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Generate encoded random walks
    Walk {
        #[arg(long)]
        edges: PathBuf,
        /// Reuse a saved dissimilarity matrix (otherwise rebuilt from seed)
        #[arg(long)]
        dissim: Option<PathBuf>,
        /// Reuse a saved tree (otherwise rebuilt from seed)
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Output corpus (one walk per line)
        #[arg(long)]
        out_corpus: PathBuf,
        /// Output communication report (JSON)
        #[arg(long)]
        out_comm: Option<PathBuf>,
        #[arg(long)]
        out_log: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Train SkipGram embeddings from a walk corpus
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        /// Edge-list file fixing the vertex universe
        #[arg(long)]
        edges: PathBuf,
        /// Output embeddings (text: `|V| d` header then one row per vertex)
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Score embeddings with one-vs-rest logistic regression
    Eval {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        edges: PathBuf,
        /// Label file (`vertex l1,l2,...` per line)
        #[arg(long)]
        labels: PathBuf,
        /// Output metrics JSON (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Run every stage end to end
    Pipeline {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Directory for all artifacts
        #[arg(long, default_value = "fedwalk-out")]
        out_dir: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Print expected per-walk message counts and savings
    Theory {
        /// Walk lengths (comma-separated)
        #[arg(long, default_value = "40")]
        l: String,
        /// Trigger probabilities (comma-separated)
        #[arg(long, default_value = "0,0.1,0.2,0.3,0.4")]
        p: String,
        /// Vertex count for the total-savings column
        #[arg(long, default_value_t = 1)]
        num_vertices: usize,
        /// Walks per vertex for the total-savings column
        #[arg(long, default_value_t = 1)]
        gamma: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed echoed into the provenance header of `--out`
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

// Exit-code tagging: usage=1, data=2, internal=3, carried through anyhow.
#[derive(Debug)]
struct Coded {
    code: u8,
    inner: anyhow::Error,
}

impl std::fmt::Display for Coded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.inner)
    }
}

impl std::error::Error for Coded {}

fn usage_err(inner: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(Coded { code: 1, inner })
}

fn data_err<E: Into<anyhow::Error>>(inner: E) -> anyhow::Error {
    anyhow::Error::new(Coded {
        code: 2,
        inner: inner.into(),
    })
}

fn classify(err: &anyhow::Error) -> u8 {
    if let Some(coded) = err.downcast_ref::<Coded>() {
        return coded.code;
    }
    if err.downcast_ref::<Error>().is_some() || err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; everything else is usage.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fedwalk: error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn header(config: &RunConfig) -> String {
    format!(
        "# fedwalk {VERSION} config={:016x} seed={}",
        config.hash(),
        config.seed
    )
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(data_err).with_context(
        || format!("creating {}", path.display()),
    )?))
}

fn load_graph(path: &Path) -> anyhow::Result<Graph> {
    Graph::load_edge_list(path)
        .map_err(data_err)
        .with_context(|| format!("loading edge list {}", path.display()))
}

fn write_log(path: &Path, log: &[Message], config: &RunConfig) -> anyhow::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header(config))?;
    Message::write_log(log, &mut w)?;
    w.flush()?;
    Ok(())
}

fn hct_inputs(
    graph: &Graph,
    config: &RunConfig,
    dissim: &Option<PathBuf>,
    tree: &Option<PathBuf>,
) -> anyhow::Result<(HctArtifacts, Vec<Message>)> {
    let (mut artifacts, log) = federation::run_hct_protocol(graph, config).map_err(data_err)?;
    if let Some(path) = dissim {
        let (loaded, _, _) = DissimilarityMatrix::load(path).map_err(data_err)?;
        if loaded.num_vertices() != graph.num_vertices() {
            bail!(data_err(anyhow::anyhow!(
                "dissimilarity matrix covers {} vertices, graph has {}",
                loaded.num_vertices(),
                graph.num_vertices()
            )));
        }
        artifacts.dissim = loaded;
    }
    if let Some(path) = tree {
        let loaded = Hct::load(path).map_err(data_err)?;
        if loaded.num_leaves() != graph.num_vertices() {
            bail!(data_err(anyhow::anyhow!(
                "tree has {} leaves, graph has {} vertices",
                loaded.num_leaves(),
                graph.num_vertices()
            )));
        }
        artifacts.hct = loaded;
    }
    Ok((artifacts, log))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Hct {
            edges,
            out_dissim,
            out_tree,
            out_log,
            flags,
        } => {
            let config = flags.resolve()?;
            let graph = load_graph(&edges)?;
            let k = config.bin_count(graph.num_vertices());
            let (artifacts, log) =
                federation::run_hct_protocol(&graph, &config).map_err(data_err)?;
            artifacts
                .dissim
                .save(&out_dissim, k, config.epsilon)
                .map_err(data_err)?;
            let mut w = create(&out_tree)?;
            writeln!(w, "{}", header(&config))?;
            artifacts.hct.save(&mut w)?;
            w.flush()?;
            if let Some(path) = out_log {
                write_log(&path, &log, &config)?;
            }
            println!(
                "hct: {} vertices, {} bins, {} messages",
                graph.num_vertices(),
                k,
                log.len()
            );
            Ok(())
        }
        Command::Walk {
            edges,
            dissim,
            tree,
            out_corpus,
            out_comm,
            out_log,
            flags,
        } => {
            let config = flags.resolve()?;
            let graph = load_graph(&edges)?;
            let (artifacts, _) = hct_inputs(&graph, &config, &dissim, &tree)?;
            let (corpus, stats, log) =
                federation::run_walk_protocol(&graph, &artifacts, &config).map_err(data_err)?;
            let mut w = create(&out_corpus)?;
            writeln!(w, "{}", header(&config))?;
            walker::write_corpus(&corpus, &mut w)?;
            w.flush()?;
            if let Some(path) = out_comm {
                let mut w = create(&path)?;
                serde_json::to_writer_pretty(&mut w, &stats)?;
                writeln!(w)?;
                w.flush()?;
            }
            if let Some(path) = out_log {
                write_log(&path, &log, &config)?;
            }
            println!(
                "walk: {} walks, {:.3} device-to-device messages per walk",
                corpus.len(),
                stats.device_to_device as f64 / corpus.len().max(1) as f64
            );
            Ok(())
        }
        Command::Embed {
            corpus,
            edges,
            out,
            flags,
        } => {
            let config = flags.resolve()?;
            let graph = load_graph(&edges)?;
            let walks = walker::read_corpus(&corpus).map_err(data_err)?;
            for walk in &walks {
                for &v in walk {
                    if v >= graph.num_vertices() {
                        bail!(data_err(anyhow::anyhow!(
                            "corpus vertex {v} outside graph of {} vertices",
                            graph.num_vertices()
                        )));
                    }
                }
            }
            let mut rng = fedwalk::privacy::RandomSource::new(config.seed, 2);
            let embeddings = fedwalk::embedding::train(
                &walks,
                graph.num_vertices(),
                &config.skipgram_config(),
                &mut rng,
            )
            .map_err(data_err)?;
            let mut w = create(&out)?;
            writeln!(w, "{}", header(&config))?;
            embeddings.save(&mut w)?;
            w.flush()?;
            println!(
                "embed: {} vertices at dimension {}",
                embeddings.num_vertices,
                embeddings.dim
            );
            Ok(())
        }
        Command::Eval {
            embeddings,
            edges,
            labels,
            out,
            flags,
        } => {
            let config = flags.resolve()?;
            let graph = load_graph(&edges)?;
            let labels = LabelSet::load(&labels, &graph).map_err(data_err)?;
            let embeddings =
                fedwalk::embedding::EmbeddingMatrix::load(&embeddings).map_err(data_err)?;
            if embeddings.num_vertices != graph.num_vertices() {
                bail!(data_err(anyhow::anyhow!(
                    "embeddings cover {} vertices, graph has {}",
                    embeddings.num_vertices,
                    graph.num_vertices()
                )));
            }
            let mut reports = Vec::new();
            for &ratio in &config.train_ratios {
                reports.push(
                    federation::evaluate(&embeddings, &labels, ratio, config.seed)
                        .map_err(data_err)?,
                );
            }
            let json = serde_json::to_string_pretty(&reports)?;
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    writeln!(w, "{json}")?;
                    w.flush()?;
                }
                None => println!("{json}"),
            }
            for r in &reports {
                println!(
                    "eval: T_R={:.2} micro-F1={:.4} macro-F1={:.4}",
                    r.train_ratio, r.micro_f1, r.macro_f1
                );
            }
            Ok(())
        }
        Command::Pipeline {
            edges,
            labels,
            out_dir,
            flags,
        } => {
            let config = flags.resolve()?;
            let graph = load_graph(&edges)?;
            let labels = labels
                .map(|p| LabelSet::load(&p, &graph).map_err(data_err))
                .transpose()?;
            std::fs::create_dir_all(&out_dir).map_err(data_err)?;
            let artifacts =
                federation::run_pipeline(&graph, labels.as_ref(), &config).map_err(data_err)?;

            let k = config.bin_count(graph.num_vertices());
            artifacts
                .hct
                .dissim
                .save(&out_dir.join("dissim.bin"), k, config.epsilon)
                .map_err(data_err)?;
            let mut w = create(&out_dir.join("tree.txt"))?;
            writeln!(w, "{}", header(&config))?;
            artifacts.hct.hct.save(&mut w)?;
            w.flush()?;
            let mut w = create(&out_dir.join("corpus.txt"))?;
            writeln!(w, "{}", header(&config))?;
            walker::write_corpus(&artifacts.corpus, &mut w)?;
            w.flush()?;
            let mut w = create(&out_dir.join("embeddings.txt"))?;
            writeln!(w, "{}", header(&config))?;
            artifacts.embeddings.save(&mut w)?;
            w.flush()?;
            write_log(&out_dir.join("messages.log"), &artifacts.message_log, &config)?;
            let mut w = create(&out_dir.join("report.json"))?;
            serde_json::to_writer_pretty(&mut w, &artifacts.report)?;
            writeln!(w)?;
            w.flush()?;

            println!(
                "pipeline: {} walks, {:.3} observed vs {:.3} expected messages per walk",
                artifacts.report.num_walks,
                artifacts.report.observed_messages_per_walk,
                artifacts.report.expected_messages_per_walk
            );
            for m in &artifacts.report.metrics {
                println!(
                    "pipeline: T_R={:.2} micro-F1={:.4} macro-F1={:.4}",
                    m.train_ratio, m.micro_f1, m.macro_f1
                );
            }
            println!("pipeline: artifacts in {}", out_dir.display());
            Ok(())
        }
        Command::Theory {
            l,
            p,
            num_vertices,
            gamma,
            out,
            seed,
        } => {
            let config = RunConfig {
                seed,
                ..RunConfig::default()
            };
            let ls = parse_list::<usize>(&l).map_err(usage_err)?;
            let ps = parse_list::<f64>(&p).map_err(usage_err)?;
            for &p in &ps {
                if !(0.0..=1.0).contains(&p) {
                    return Err(usage_err(anyhow::anyhow!("p must be in [0, 1], got {p}")));
                }
            }
            let table = theory_table(&ls, &ps, num_vertices, gamma);
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    writeln!(w, "{}", header(&config))?;
                    write!(w, "{table}")?;
                    w.flush()?;
                }
                None => print!("{table}"),
            }
            Ok(())
        }
    }
}

fn parse_list<T: std::str::FromStr>(text: &str) -> anyhow::Result<Vec<T>> {
    let items: Vec<T> = text
        .split(',')
        .map(|t| t.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow::anyhow!("bad list {text:?}"))?;
    if items.is_empty() {
        bail!("empty list");
    }
    Ok(items)
}

/// Closed-form expected messages and savings per (l, p) grid point, plus the
/// projected total over `num_vertices * gamma` walks.
fn theory_table(ls: &[usize], ps: &[f64], num_vertices: usize, gamma: usize) -> String {
    let mut out = String::new();
    out.push_str("l        p      E_l  savings/walk    total savings\n");
    for &l in ls {
        for &p in ps {
            let e = expected_messages(l, p);
            let per_walk = (l as f64 - 1.0) - e;
            let total = expected_savings(l, p, num_vertices, gamma);
            out.push_str(&format!(
                "{l:<6} {p:>4.2} {e:>8.2} {per_walk:>13.2} {total:>16.2}\n"
            ));
        }
    }
    out
}
