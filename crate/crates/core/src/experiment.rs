//! End-to-end experiment protocol: split, build codebooks from the training
//! part, encode, train, evaluate, repeat over seeds.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::cotm::{CotmConfig, CotmModel};
use crate::embeddings::{attribute_bounds, CodebookParams, Codebooks};
use crate::encoder::{Encoder, EncoderConfig, Weighting};
use crate::error::{invalid, Error, Result};
use crate::hv::Hypervector;
use crate::seed;
use crate::tu::{split_corpus, Split, TuCorpus};

pub const DEFAULT_CODEBOOK_SEED: u64 = 0x5eed;

/// Every knob of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_dir: PathBuf,
    pub dataset: String,
    pub dim: usize,
    pub sparsity: f64,
    pub clauses: usize,
    pub threshold: i32,
    pub specificity: f64,
    pub max_literals: usize,
    pub epochs: usize,
    pub layers: usize,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub weighting: Weighting,
    pub codebook_seed: u64,
    pub stratify: bool,
    pub states_per_action: u32,
    pub boost_true_positive: bool,
}

impl ExperimentConfig {
    /// The fixed configuration used for every dataset in the benchmark:
    /// D=6400 at 20% sparsity, 500 clauses, T=1000, s=2.0, at most 50
    /// literals per clause, 4 epochs, 70/30 split, seeds 1..=10.
    pub fn paper(dataset_dir: impl Into<PathBuf>, dataset: impl Into<String>) -> Self {
        Self {
            dataset_dir: dataset_dir.into(),
            dataset: dataset.into(),
            dim: 6400,
            sparsity: 0.2,
            clauses: 500,
            threshold: 1000,
            specificity: 2.0,
            max_literals: 50,
            epochs: 4,
            layers: 2,
            seeds: (1..=10).collect(),
            train_fraction: 0.7,
            weighting: Weighting::Uniform,
            codebook_seed: DEFAULT_CODEBOOK_SEED,
            stratify: false,
            states_per_action: 128,
            boost_true_positive: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || !self.dim.is_multiple_of(64) {
            return Err(invalid(format!(
                "dimension {} must be a positive multiple of 64",
                self.dim
            )));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 0.5) {
            return Err(invalid(format!(
                "sparsity {} outside (0, 0.5]",
                self.sparsity
            )));
        }
        if self.seeds.is_empty() {
            return Err(invalid("need at least one seed"));
        }
        self.encoder_config().validate()?;
        self.cotm_config(2, 0).validate()
    }

    /// Active bits per vector, `round(sparsity * D)`.
    pub fn k(&self) -> usize {
        (self.sparsity * self.dim as f64).round() as usize
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            layers: self.layers,
            weighting: self.weighting,
        }
    }

    pub fn cotm_config(&self, classes: usize, seed: u64) -> CotmConfig {
        CotmConfig {
            clauses: self.clauses,
            threshold: self.threshold,
            specificity: self.specificity,
            max_literals: self.max_literals,
            classes,
            states_per_action: self.states_per_action,
            epochs: self.epochs,
            seed,
            boost_true_positive: self.boost_true_positive,
        }
    }

    /// Codebook parameters with attribute bounds taken from the training graphs.
    pub fn codebook_params(&self, corpus: &TuCorpus, train: &[usize]) -> CodebookParams {
        let mut params = CodebookParams::new(self.codebook_seed, self.dim, self.k());
        let graphs = || train.iter().map(|&i| &corpus.graphs[i]);
        if corpus.manifest.node_attributes {
            params.node_attr_bounds = attribute_bounds(
                graphs().flat_map(|g| g.nodes.iter().map(|n| n.attributes.as_slice())),
            );
        }
        if corpus.manifest.edge_attributes {
            params.edge_attr_bounds = attribute_bounds(
                graphs().flat_map(|g| g.edges.iter().map(|e| e.attributes.as_slice())),
            );
        }
        params
    }

    pub fn summary(&self) -> String {
        format!(
            "dataset={} dim={} sparsity={} clauses={} threshold={} s={} max_literals={} epochs={} layers={} \
             train_frac={} weighting={} codebook_seed={} states_per_action={} seeds={}",
            self.dataset,
            self.dim,
            self.sparsity,
            self.clauses,
            self.threshold,
            self.specificity,
            self.max_literals,
            self.epochs,
            self.layers,
            self.train_fraction,
            self.weighting,
            self.codebook_seed,
            self.states_per_action,
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        )
    }
}

/// Stable identifier of an encoding: any change to the codebook or encoder
/// parameters changes it.
pub fn encoding_fingerprint(params: &CodebookParams, cfg: &EncoderConfig) -> u64 {
    let text = format!(
        "{}|{}|{}|{}|{}|{:?}|{:?}|{:?}|{:?}|{}|{}",
        params.seed,
        params.dim,
        params.k,
        params.scalar_levels,
        params.rank_levels,
        params.alpha.to_bits(),
        params.beta.to_bits(),
        params
            .node_attr_bounds
            .iter()
            .map(|(a, b)| (a.to_bits(), b.to_bits()))
            .collect::<Vec<_>>(),
        params
            .edge_attr_bounds
            .iter()
            .map(|(a, b)| (a.to_bits(), b.to_bits()))
            .collect::<Vec<_>>(),
        cfg.layers,
        cfg.weighting
    );
    seed::fnv1a64(text.as_bytes())
}

/// Builds an encoder and encodes the whole corpus.
pub fn encode_corpus(
    corpus: &TuCorpus,
    params: &CodebookParams,
    cfg: EncoderConfig,
) -> Result<(Encoder, Vec<Hypervector>)> {
    let mut encoder = Encoder::new(cfg, Codebooks::build(params.clone())?)?;
    encoder.prepare(&corpus.graphs);
    let vectors = encoder.encode_vectors(&corpus.graphs)?;
    Ok((encoder, vectors))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedReport {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub encode_secs: f64,
    pub train_secs: f64,
    pub eval_secs: f64,
}

/// Result of one seeded run, including everything needed to persist it.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub model: CotmModel,
    pub codebooks: CodebookParams,
    pub encoder: EncoderConfig,
    pub split: Split,
    pub report: SeedReport,
}

/// Runs split, train and evaluation for one seed on pre-encoded vectors.
pub fn run_seed_encoded(
    corpus: &TuCorpus,
    cfg: &ExperimentConfig,
    seed: u64,
    split: Split,
    codebooks: CodebookParams,
    vectors: &[Hypervector],
    encode_secs: f64,
) -> Result<TrainedRun> {
    if vectors.len() != corpus.len() {
        return Err(invalid("encoded vector count differs from corpus size"));
    }
    let labelled = |idx: &[usize]| -> Vec<(Hypervector, usize)> {
        idx.iter()
            .map(|&i| (vectors[i].clone(), corpus.graphs[i].label))
            .collect()
    };
    let train = labelled(&split.train);
    let test = labelled(&split.test);

    let classes = corpus.num_classes().max(2);
    let mut model = CotmModel::new(cfg.cotm_config(classes, seed), cfg.dim)?;
    let mut rng = seed::stream(seed, "cotm_train", 0);
    let started = Instant::now();
    model.fit(&train, cfg.epochs, &mut rng)?;
    let train_secs = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let train_accuracy = model.accuracy(&train)?;
    let test_accuracy = model.accuracy(&test)?;
    let eval_secs = started.elapsed().as_secs_f64();

    Ok(TrainedRun {
        model,
        codebooks,
        encoder: cfg.encoder_config(),
        report: SeedReport {
            seed,
            train_size: split.train.len(),
            test_size: split.test.len(),
            train_accuracy,
            test_accuracy,
            encode_secs,
            train_secs,
            eval_secs,
        },
        split,
    })
}

/// Full run for one seed, encoding from scratch.
pub fn run_seed(corpus: &TuCorpus, cfg: &ExperimentConfig, seed: u64) -> Result<TrainedRun> {
    cfg.validate()?;
    let split = split_corpus(corpus, cfg.train_fraction, seed, cfg.stratify)?;
    let params = cfg.codebook_params(corpus, &split.train);
    let started = Instant::now();
    let (_, vectors) = encode_corpus(corpus, &params, cfg.encoder_config())?;
    let encode_secs = started.elapsed().as_secs_f64();
    run_seed_encoded(corpus, cfg, seed, split, params, &vectors, encode_secs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub dataset: String,
    pub config: String,
    pub seeds: Vec<SeedReport>,
    pub mean: f64,
    pub std: f64,
    pub wall_secs: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every configured seed, sharing encodings between seeds whose
/// codebooks coincide. Seeds run in parallel.
pub fn run_bench(corpus: &TuCorpus, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut plans = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let split = split_corpus(corpus, cfg.train_fraction, seed, cfg.stratify)?;
        let params = cfg.codebook_params(corpus, &split.train);
        plans.push((seed, split, params));
    }

    let enc_cfg = cfg.encoder_config();
    let mut encodings: HashMap<u64, (Vec<Hypervector>, f64)> = HashMap::new();
    for (_, _, params) in &plans {
        let key = encoding_fingerprint(params, &enc_cfg);
        if let std::collections::hash_map::Entry::Vacant(slot) = encodings.entry(key) {
            let t = Instant::now();
            let (_, vectors) = encode_corpus(corpus, params, enc_cfg)?;
            slot.insert((vectors, t.elapsed().as_secs_f64()));
        }
    }

    let seeds = plans
        .into_par_iter()
        .map(|(seed, split, params)| {
            let (vectors, secs) = &encodings[&encoding_fingerprint(&params, &enc_cfg)];
            run_seed_encoded(corpus, cfg, seed, split, params, vectors, *secs).map(|r| r.report)
        })
        .collect::<Result<Vec<_>>>()?;

    let accs: Vec<f64> = seeds.iter().map(|s| s.test_accuracy).collect();
    let (mean, std) = mean_std(&accs);
    Ok(RunReport {
        dataset: corpus.name.clone(),
        config: cfg.summary(),
        seeds,
        mean,
        std,
        wall_secs: started.elapsed().as_secs_f64(),
    })
}

impl RunReport {
    /// Human-readable table with one row per seed and a mean ± std footer.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6}  {:>6}  {:>6}  {:>9}  {:>9}  {:>8}  {:>8}",
            "seed", "train", "test", "train_acc", "test_acc", "enc_s", "fit_s"
        );
        for s in &self.seeds {
            let _ = writeln!(
                out,
                "{:>6}  {:>6}  {:>6}  {:>9.4}  {:>9.4}  {:>8.2}  {:>8.2}",
                s.seed,
                s.train_size,
                s.test_size,
                s.train_accuracy,
                s.test_accuracy,
                s.encode_secs,
                s.train_secs
            );
        }
        let _ = writeln!(
            out,
            "{:<12} {:.1} ± {:.1}",
            self.dataset,
            100.0 * self.mean,
            100.0 * self.std
        );
        out
    }

    /// Machine-readable `key=value` records: one `config`, one `seed` per
    /// run and a closing `summary`.
    pub fn records(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config {}", self.config);
        for s in &self.seeds {
            let _ = writeln!(
                out,
                "seed seed={} train_size={} test_size={} train_acc={:.6} test_acc={:.6} encode_secs={:.3} train_secs={:.3} eval_secs={:.3}",
                s.seed, s.train_size, s.test_size, s.train_accuracy, s.test_accuracy, s.encode_secs, s.train_secs, s.eval_secs
            );
        }
        let _ = writeln!(
            out,
            "summary dataset={} runs={} mean={:.6} std={:.6} wall_secs={:.3}",
            self.dataset,
            self.seeds.len(),
            self.mean,
            self.std,
            self.wall_secs
        );
        out
    }
}

/// Header of an encoded corpus file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedHeader {
    pub dataset: String,
    pub dim: usize,
    pub k: usize,
    pub fingerprint: u64,
}

const ENCODED_MAGIC: &str = "# hvgraph encoded corpus v1";

/// Writes `graph<TAB>label<TAB>hex` records after a two-line header.
pub fn write_encoded(
    path: &Path,
    header: &EncodedHeader,
    labels: &[usize],
    vectors: &[Hypervector],
) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{ENCODED_MAGIC}")?;
    writeln!(
        out,
        "# dataset={} dim={} k={} fingerprint={:016x}",
        header.dataset, header.dim, header.k, header.fingerprint
    )?;
    for (i, (label, v)) in labels.iter().zip(vectors).enumerate() {
        writeln!(out, "{i}\t{label}\t{}", v.to_hex())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_encoded(path: &Path) -> Result<(EncodedHeader, Vec<usize>, Vec<Hypervector>)> {
    let file = fs::File::open(path).map_err(|source| Error::Load {
        path: path.to_owned(),
        source,
    })?;
    let format = |line: usize, message: String| Error::Format {
        file: path.to_owned(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let magic = lines.next().transpose()?.unwrap_or_default();
    if magic.trim() != ENCODED_MAGIC {
        return Err(format(1, "not an encoded corpus file".into()));
    }
    let meta = lines.next().transpose()?.unwrap_or_default();
    let fields: HashMap<&str, &str> = meta
        .trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let get = |key: &str| {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| format(2, format!("missing {key}")))
    };
    let parse_usize = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|e| format(2, format!("bad {key}: {e}")))
    };
    let header = EncodedHeader {
        dataset: get("dataset")?.to_owned(),
        dim: parse_usize("dim")?,
        k: parse_usize("k")?,
        fingerprint: u64::from_str_radix(get("fingerprint")?, 16)
            .map_err(|e| format(2, format!("bad fingerprint: {e}")))?,
    };
    let mut labels = Vec::new();
    let mut vectors = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let no = i + 3;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(format(no, "expected three tab-separated fields".into()));
        }
        labels.push(
            parts[1]
                .parse()
                .map_err(|e| format(no, format!("bad label: {e}")))?,
        );
        vectors.push(
            Hypervector::from_hex(header.dim, parts[2]).map_err(|e| format(no, e.to_string()))?,
        );
    }
    Ok((header, labels, vectors))
}
