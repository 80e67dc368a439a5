//! Reader and writer for the TUDataset plain-text graph format.
//!
//! A dataset `DS` is a directory of comma-separated text files:
//!
//! | file | lines | content |
//! |---|---|---|
//! | `DS_A.txt` | one per directed edge | `i, j` global 1-based node ids |
//! | `DS_graph_indicator.txt` | one per node | 1-based graph id |
//! | `DS_graph_labels.txt` | one per graph | class value |
//! | `DS_node_labels.txt` | one per node, optional | integer label |
//! | `DS_edge_labels.txt` | one per edge, optional | integer label |
//! | `DS_node_attributes.txt` | one per node, optional | comma-separated reals |
//! | `DS_edge_attributes.txt` | one per edge, optional | comma-separated reals |

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;

use crate::error::{invalid, Error, Result};
use crate::graph::{AttributedGraph, EdgeRecord, NodeRecord, PageRankParams};
use crate::seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FeatureManifest {
    pub node_labels: bool,
    pub node_attributes: bool,
    pub edge_labels: bool,
    pub edge_attributes: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuCorpus {
    pub name: String,
    pub graphs: Vec<AttributedGraph>,
    pub manifest: FeatureManifest,
    /// Original graph label value of each class id, ascending.
    pub class_values: Vec<i64>,
}

impl TuCorpus {
    pub fn num_classes(&self) -> usize {
        self.class_values.len()
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

struct TextFile {
    path: PathBuf,
    lines: Vec<(usize, String)>,
}

impl TextFile {
    fn read(path: PathBuf) -> Result<Self> {
        let text = fs::read_to_string(&path).map_err(|source| Error::Load {
            path: path.clone(),
            source,
        })?;
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim().to_owned()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Ok(Self { path, lines })
    }

    fn optional(path: PathBuf) -> Result<Option<Self>> {
        if path.exists() {
            Self::read(path).map(Some)
        } else {
            Ok(None)
        }
    }

    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Format {
            file: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn expect_len(&self, n: usize, what: &str) -> Result<()> {
        if self.lines.len() != n {
            let line = self.lines.last().map_or(0, |l| l.0);
            return Err(self.error(
                line,
                format!("expected {n} lines ({what}), found {}", self.lines.len()),
            ));
        }
        Ok(())
    }

    fn ints(&self) -> Result<Vec<i64>> {
        self.lines
            .iter()
            .map(|(no, l)| {
                l.parse::<i64>()
                    .map_err(|e| self.error(*no, format!("expected an integer, got {l:?}: {e}")))
            })
            .collect()
    }

    fn fields(&self, no: usize, line: &str) -> Result<Vec<f64>> {
        line.split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .map_err(|e| self.error(no, format!("expected a number, got {f:?}: {e}")))
            })
            .collect()
    }

    fn rows(&self) -> Result<Vec<Vec<f64>>> {
        let mut arity = None;
        self.lines
            .iter()
            .map(|(no, l)| {
                let row = self.fields(*no, l)?;
                match arity {
                    None => arity = Some(row.len()),
                    Some(a) if a != row.len() => {
                        return Err(self
                            .error(*no, format!("expected {a} attributes, found {}", row.len())));
                    }
                    _ => {}
                }
                Ok(row)
            })
            .collect()
    }
}

fn file_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

/// Parses dataset `name` under `dir` and ranks every graph by PageRank.
/// `dir` may hold the files directly or a `name/` subdirectory holding them.
pub fn load_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<TuCorpus> {
    let dir = dir.as_ref();
    let nested = dir.join(name);
    let dir = if !file_path(dir, name, "A").exists() && file_path(&nested, name, "A").exists() {
        nested.as_path()
    } else {
        dir
    };
    let adjacency = TextFile::read(file_path(dir, name, "A"))?;
    let indicator = TextFile::read(file_path(dir, name, "graph_indicator"))?;
    let graph_labels = TextFile::read(file_path(dir, name, "graph_labels"))?;
    let node_labels = TextFile::optional(file_path(dir, name, "node_labels"))?;
    let edge_labels = TextFile::optional(file_path(dir, name, "edge_labels"))?;
    let node_attrs = TextFile::optional(file_path(dir, name, "node_attributes"))?;
    let edge_attrs = TextFile::optional(file_path(dir, name, "edge_attributes"))?;

    let graph_of: Vec<i64> = indicator.ints()?;
    let n = graph_of.len();
    let labels = graph_labels.ints()?;
    let num_graphs = labels.len();
    let distinct: BTreeSet<i64> = graph_of.iter().copied().collect();
    if let Some((no, _)) = indicator
        .lines
        .iter()
        .zip(&graph_of)
        .find(|(_, &g)| g < 1 || g as usize > num_graphs)
        .map(|(l, g)| (l.0, g))
    {
        return Err(indicator.error(no, format!("graph id outside 1..={num_graphs}")));
    }
    if distinct.len() != num_graphs {
        return Err(graph_labels.error(
            0,
            format!(
                "{num_graphs} graph labels but {} distinct graph ids",
                distinct.len()
            ),
        ));
    }

    let node_label_values = match &node_labels {
        Some(f) => {
            f.expect_len(n, "one per node")?;
            Some(f.ints()?)
        }
        None => None,
    };
    let node_attr_rows = match &node_attrs {
        Some(f) => {
            f.expect_len(n, "one per node")?;
            Some(f.rows()?)
        }
        None => None,
    };

    // Global node id -> (graph, local index).
    let mut local = vec![0usize; n];
    let mut nodes: Vec<Vec<NodeRecord>> = vec![Vec::new(); num_graphs];
    for (v, &g) in graph_of.iter().enumerate() {
        let g = (g - 1) as usize;
        local[v] = nodes[g].len();
        nodes[g].push(NodeRecord::new(
            node_label_values.as_ref().map(|l| l[v]),
            node_attr_rows
                .as_ref()
                .map_or_else(Vec::new, |r| r[v].clone()),
        ));
    }

    let m = adjacency.lines.len();
    let edge_label_values = match &edge_labels {
        Some(f) => {
            f.expect_len(m, "one per edge")?;
            Some(f.ints()?)
        }
        None => None,
    };
    let edge_attr_rows = match &edge_attrs {
        Some(f) => {
            f.expect_len(m, "one per edge")?;
            Some(f.rows()?)
        }
        None => None,
    };

    let mut edges: Vec<Vec<EdgeRecord>> = vec![Vec::new(); num_graphs];
    for (i, (no, line)) in adjacency.lines.iter().enumerate() {
        let ends = adjacency.fields(*no, line)?;
        if ends.len() != 2 || ends.iter().any(|x| x.fract() != 0.0) {
            return Err(adjacency.error(*no, format!("expected two node ids, got {line:?}")));
        }
        let (s, t) = (ends[0] as i64, ends[1] as i64);
        if s < 1 || t < 1 || s as usize > n || t as usize > n {
            return Err(adjacency.error(*no, format!("node id outside 1..={n}")));
        }
        let (s, t) = (s as usize - 1, t as usize - 1);
        if graph_of[s] != graph_of[t] {
            return Err(adjacency.error(
                *no,
                format!("edge joins graph {} and graph {}", graph_of[s], graph_of[t]),
            ));
        }
        edges[(graph_of[s] - 1) as usize].push(EdgeRecord {
            source: local[s],
            target: local[t],
            label: edge_label_values.as_ref().map(|l| l[i]),
            attributes: edge_attr_rows
                .as_ref()
                .map_or_else(Vec::new, |r| r[i].clone()),
        });
    }

    let class_values: Vec<i64> = labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_of: HashMap<i64, usize> = class_values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();

    let mut added = 0;
    let params = PageRankParams::default();
    let graphs = nodes
        .into_iter()
        .zip(edges)
        .zip(&labels)
        .map(|((nodes, mut edges), label)| {
            added += symmetrize(&mut edges);
            let mut g = AttributedGraph::new(nodes, edges, class_of[label])?;
            g.rank_nodes(&params);
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    if added > 0 {
        warn!("{name}: added {added} missing reverse edges");
    }

    Ok(TuCorpus {
        name: name.to_owned(),
        graphs,
        manifest: FeatureManifest {
            node_labels: node_labels.is_some(),
            node_attributes: node_attrs.is_some(),
            edge_labels: edge_labels.is_some(),
            edge_attributes: edge_attrs.is_some(),
        },
        class_values,
    })
}

/// Appends a reverse copy for every directed edge lacking one. Returns the
/// number of edges added.
fn symmetrize(edges: &mut Vec<EdgeRecord>) -> usize {
    let mut count: HashMap<(usize, usize), isize> = HashMap::new();
    for e in edges.iter() {
        *count.entry((e.source, e.target)).or_default() += 1;
    }
    let mut extra = Vec::new();
    let mut done = BTreeSet::new();
    for e in edges.iter() {
        let key = (e.source, e.target);
        if e.source == e.target || !done.insert(key) {
            continue;
        }
        let deficit = count[&key] - count.get(&(e.target, e.source)).copied().unwrap_or(0);
        for _ in 0..deficit.max(0) {
            extra.push(EdgeRecord {
                source: e.target,
                target: e.source,
                ..e.clone()
            });
        }
    }
    let added = extra.len();
    edges.extend(extra);
    added
}

fn fmt_row(row: &[f64]) -> String {
    row.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes a corpus back to TU files under `dir`, creating it if needed.
pub fn write_tu_dataset(corpus: &TuCorpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let name = &corpus.name;
    let create = |suffix: &str| -> Result<BufWriter<fs::File>> {
        Ok(BufWriter::new(fs::File::create(file_path(
            dir, name, suffix,
        ))?))
    };
    let mf = corpus.manifest;
    let mut a = create("A")?;
    let mut indicator = create("graph_indicator")?;
    let mut glabels = create("graph_labels")?;
    let mut nlabels = mf.node_labels.then(|| create("node_labels")).transpose()?;
    let mut elabels = mf.edge_labels.then(|| create("edge_labels")).transpose()?;
    let mut nattrs = mf
        .node_attributes
        .then(|| create("node_attributes"))
        .transpose()?;
    let mut eattrs = mf
        .edge_attributes
        .then(|| create("edge_attributes"))
        .transpose()?;

    let mut offset = 1;
    for (gi, g) in corpus.graphs.iter().enumerate() {
        writeln!(glabels, "{}", corpus.class_values[g.label])?;
        for node in &g.nodes {
            writeln!(indicator, "{}", gi + 1)?;
            if let Some(f) = nlabels.as_mut() {
                writeln!(f, "{}", node.label.unwrap_or(0))?;
            }
            if let Some(f) = nattrs.as_mut() {
                writeln!(f, "{}", fmt_row(&node.attributes))?;
            }
        }
        for e in &g.edges {
            writeln!(a, "{}, {}", e.source + offset, e.target + offset)?;
            if let Some(f) = elabels.as_mut() {
                writeln!(f, "{}", e.label.unwrap_or(0))?;
            }
            if let Some(f) = eattrs.as_mut() {
                writeln!(f, "{}", fmt_row(&e.attributes))?;
            }
        }
        offset += g.node_count();
    }
    for f in [Some(&mut a), Some(&mut indicator), Some(&mut glabels)]
        .into_iter()
        .chain([
            nlabels.as_mut(),
            elabels.as_mut(),
            nattrs.as_mut(),
            eattrs.as_mut(),
        ])
        .flatten()
    {
        f.flush()?;
    }
    Ok(())
}

/// Train/test graph indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniformly shuffled split with `floor(train_fraction * n)` training graphs.
/// With `stratify`, the floor rule is applied per class instead.
pub fn split_corpus(
    corpus: &TuCorpus,
    train_fraction: f64,
    seed: u64,
    stratify: bool,
) -> Result<Split> {
    let labels: Vec<usize> = corpus.graphs.iter().map(|g| g.label).collect();
    split_indices(&labels, train_fraction, seed, stratify)
}

pub fn split_indices(
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
    stratify: bool,
) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut rng = seed::stream(seed, "split", 0);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut rng);
    let cut = |len: usize| (train_fraction * len as f64).floor() as usize;
    let (train, test) = if stratify {
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in 0..classes {
            let members: Vec<usize> = order.iter().copied().filter(|&i| labels[i] == c).collect();
            let k = cut(members.len());
            train.extend_from_slice(&members[..k]);
            test.extend_from_slice(&members[k..]);
        }
        (train, test)
    } else {
        let k = cut(order.len());
        (order[..k].to_vec(), order[k..].to_vec())
    };
    if train.is_empty() || test.is_empty() {
        return Err(invalid(format!(
            "{} graphs cannot be split into non-empty parts at fraction {train_fraction}",
            labels.len()
        )));
    }
    Ok(Split { train, test })
}
