use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use hvgraph::artifact::ModelArtifact;
use hvgraph::embeddings::Codebooks;
use hvgraph::encoder::{Encoder, Weighting};
use hvgraph::experiment::{
    encode_corpus, encoding_fingerprint, read_encoded, run_bench, run_seed_encoded, write_encoded,
    EncodedHeader, ExperimentConfig, RunReport,
};
use hvgraph::explain::{self, DistanceTarget, ExplainOptions, VoteMode};
use hvgraph::hv::Hypervector;
use hvgraph::tu::{load_tu_dataset, split_corpus, TuCorpus};

#[derive(Parser)]
#[command(
    name = "hvgraph",
    version,
    about = "Hypervector graph encoding + Coalesced Tsetlin Machine experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model (first seed), report accuracy and save it.
    Train {
        #[command(flatten)]
        exp: ExpArgs,
        /// Encoded-corpus cache; reused when its fingerprint matches, written otherwise.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Repeat split/train/evaluate over every seed and report mean ± std.
    Bench {
        #[command(flatten)]
        exp: ExpArgs,
    },
    /// Accuracy of a saved model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Evaluate on the test part of the split drawn with the model's seed.
        #[arg(long, default_value_t = 0.7)]
        train_frac: f64,
    },
    /// Decode a prediction to its most influential node.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// 0-based graph index.
        #[arg(long)]
        graph: usize,
        #[arg(long, value_enum, default_value_t = Target::Role)]
        target: Target,
        #[arg(long, value_enum, default_value_t = Votes::Weighted)]
        votes: Votes,
    },
    /// Encode every graph and write `graph<TAB>label<TAB>hex` records.
    Encode {
        #[command(flatten)]
        exp: ExpArgs,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long, default_value = "data")]
    dataset_dir: PathBuf,
    #[arg(long, default_value = "MUTAG")]
    dataset: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Uniform,
    Rank,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Role,
    Messages,
}

#[derive(Clone, Copy, ValueEnum)]
enum Votes {
    Weighted,
    Unweighted,
}

#[derive(Args, Clone)]
struct ExpArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Named base configuration; individual flags override it.
    #[arg(long, value_enum, default_value_t = Preset::Paper)]
    preset: Preset,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    clauses: Option<usize>,
    #[arg(long)]
    threshold: Option<i32>,
    /// Specificity.
    #[arg(long = "s")]
    specificity: Option<f64>,
    #[arg(long)]
    max_literals: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    train_frac: Option<f64>,
    /// Comma-separated seeds, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    #[arg(long)]
    codebook_seed: Option<u64>,
    /// Stratify the split by class.
    #[arg(long)]
    stratify: bool,
    /// Output path (model, report or encoded corpus depending on the command).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExpArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match self.preset {
            Preset::Paper => ExperimentConfig::paper(&self.data.dataset_dir, &self.data.dataset),
        };
        macro_rules! apply {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        apply!(dim => dim, sparsity => sparsity, clauses => clauses, threshold => threshold,
            specificity => specificity, max_literals => max_literals, epochs => epochs,
            layers => layers, train_frac => train_fraction, seeds => seeds, codebook_seed => codebook_seed);
        if let Some(w) = self.weighting {
            cfg.weighting = match w {
                WeightingArg::Uniform => Weighting::Uniform,
                WeightingArg::Rank => Weighting::Rank,
            };
        }
        cfg.stratify = self.stratify;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(data: &DataArgs) -> Result<TuCorpus> {
    let started = Instant::now();
    let corpus = load_tu_dataset(&data.dataset_dir, &data.dataset).with_context(|| {
        format!(
            "loading {} from {}",
            data.dataset,
            data.dataset_dir.display()
        )
    })?;
    info!(
        "loaded {} graphs, {} classes in {:.2}s",
        corpus.len(),
        corpus.num_classes(),
        started.elapsed().as_secs_f64()
    );
    Ok(corpus)
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(exp: &ExpArgs, cache: Option<&Path>) -> Result<()> {
    let cfg = exp.config()?;
    let corpus = load(&exp.data)?;
    let seed = cfg.seeds[0];
    let split = split_corpus(&corpus, cfg.train_fraction, seed, cfg.stratify)?;
    let params = cfg.codebook_params(&corpus, &split.train);
    let enc_cfg = cfg.encoder_config();
    let fingerprint = encoding_fingerprint(&params, &enc_cfg);

    let started = Instant::now();
    let cached = match cache.filter(|p| p.exists()) {
        Some(path) => {
            let (header, _, vectors) = read_encoded(path)?;
            if header.fingerprint == fingerprint && vectors.len() == corpus.len() {
                info!("reusing encoded corpus {}", path.display());
                Some(vectors)
            } else {
                info!("cache {} is stale, re-encoding", path.display());
                None
            }
        }
        None => None,
    };
    let vectors = match cached {
        Some(v) => v,
        None => {
            let (_, vectors) = encode_corpus(&corpus, &params, enc_cfg)?;
            if let Some(path) = cache {
                let header = EncodedHeader {
                    dataset: corpus.name.clone(),
                    dim: cfg.dim,
                    k: cfg.k(),
                    fingerprint,
                };
                let labels: Vec<usize> = corpus.graphs.iter().map(|g| g.label).collect();
                write_encoded(path, &header, &labels, &vectors)?;
            }
            vectors
        }
    };
    let encode_secs = started.elapsed().as_secs_f64();

    let run = run_seed_encoded(&corpus, &cfg, seed, split, params, &vectors, encode_secs)?;
    let out = exp
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out/model.hvg"));
    let artifact = ModelArtifact {
        dataset: corpus.name.clone(),
        class_values: corpus.class_values.clone(),
        codebooks: run.codebooks.clone(),
        encoder: run.encoder,
        model: run.model,
    };
    artifact
        .save(&out)
        .with_context(|| format!("saving model to {}", out.display()))?;

    let accs = [run.report.test_accuracy];
    let report = RunReport {
        dataset: corpus.name.clone(),
        config: cfg.summary(),
        seeds: vec![run.report],
        mean: accs[0],
        std: 0.0,
        wall_secs: started.elapsed().as_secs_f64(),
    };
    print!("{}", report.table());
    print!("{}", report.records());
    println!("model path={}", out.display());
    Ok(())
}

fn cmd_bench(exp: &ExpArgs) -> Result<()> {
    let cfg = exp.config()?;
    let corpus = load(&exp.data)?;
    let report = run_bench(&corpus, &cfg)?;
    print!("{}", report.table());
    print!("{}", report.records());
    if let Some(out) = &exp.out {
        write_out(out, &report.records())?;
    }
    Ok(())
}

fn load_model(path: &Path, data: &DataArgs) -> Result<(ModelArtifact, TuCorpus, Encoder)> {
    let artifact =
        ModelArtifact::load(path).with_context(|| format!("loading model {}", path.display()))?;
    let corpus = load(data)?;
    if corpus.num_classes().max(2) != artifact.model.config().classes {
        bail!(
            "model has {} classes, dataset {} has {}",
            artifact.model.config().classes,
            corpus.name,
            corpus.num_classes()
        );
    }
    let mut encoder = Encoder::new(
        artifact.encoder,
        Codebooks::build(artifact.codebooks.clone())?,
    )?;
    encoder.prepare(&corpus.graphs);
    Ok((artifact, corpus, encoder))
}

fn cmd_eval(model: &Path, data: &DataArgs, train_frac: f64) -> Result<()> {
    let (artifact, corpus, encoder) = load_model(model, data)?;
    let vectors = encoder.encode_vectors(&corpus.graphs)?;
    let labelled = |idx: &mut dyn Iterator<Item = usize>| -> Vec<(Hypervector, usize)> {
        idx.map(|i| (vectors[i].clone(), corpus.graphs[i].label))
            .collect()
    };
    let all = labelled(&mut (0..corpus.len()));
    let split = split_corpus(&corpus, train_frac, artifact.model.config().seed, false)?;
    let test = labelled(&mut split.test.iter().copied());
    println!(
        "eval dataset={} graphs={} accuracy={:.6} test_graphs={} test_accuracy={:.6}",
        corpus.name,
        all.len(),
        artifact.model.accuracy(&all)?,
        test.len(),
        artifact.model.accuracy(&test)?
    );
    Ok(())
}

fn cmd_explain(
    model: &Path,
    data: &DataArgs,
    graph: usize,
    target: Target,
    votes: Votes,
) -> Result<()> {
    let (artifact, corpus, encoder) = load_model(model, data)?;
    let Some(g) = corpus.graphs.get(graph) else {
        bail!(
            "invalid argument: graph index {graph} out of range (corpus has {})",
            corpus.len()
        );
    };
    let encoded = encoder.encode(g)?;
    let opts = ExplainOptions {
        sparsity: artifact.codebooks.k as f64 / artifact.codebooks.dim as f64,
        votes: match votes {
            Votes::Weighted => VoteMode::Weighted,
            Votes::Unweighted => VoteMode::Unweighted,
        },
        target: match target {
            Target::Role => DistanceTarget::Role,
            Target::Messages => DistanceTarget::Messages,
        },
    };
    let explanation = explain::explain(&artifact.model, &encoder, g, &encoded, &opts)?;
    print!("{}", explanation.report(graph, g));
    Ok(())
}

fn cmd_encode(exp: &ExpArgs) -> Result<()> {
    let cfg = exp.config()?;
    let corpus = load(&exp.data)?;
    let split = split_corpus(&corpus, cfg.train_fraction, cfg.seeds[0], cfg.stratify)?;
    let params = cfg.codebook_params(&corpus, &split.train);
    let enc_cfg = cfg.encoder_config();
    let (_, vectors) = encode_corpus(&corpus, &params, enc_cfg)?;
    let out = exp
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("out/{}.encoded.tsv", corpus.name)));
    let header = EncodedHeader {
        dataset: corpus.name.clone(),
        dim: cfg.dim,
        k: cfg.k(),
        fingerprint: encoding_fingerprint(&params, &enc_cfg),
    };
    let labels: Vec<usize> = corpus.graphs.iter().map(|g| g.label).collect();
    write_encoded(&out, &header, &labels, &vectors)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "encoded dataset={} graphs={} dim={} path={}",
        corpus.name,
        vectors.len(),
        cfg.dim,
        out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Train { exp, cache } => cmd_train(exp, cache.as_deref()),
        Command::Bench { exp } => cmd_bench(exp),
        Command::Eval {
            model,
            data,
            train_frac,
        } => cmd_eval(model, data, *train_frac),
        Command::Explain {
            model,
            data,
            graph,
            target,
            votes,
        } => cmd_explain(model, data, *graph, *target, *votes),
        Command::Encode { exp } => cmd_encode(exp),
    }
}
