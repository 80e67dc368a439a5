//! Graph to hypervector encoding by symbolic message passing.
//!
//! A node is encoded as `psi(v) = label(v) ^ attrs(v) ^ importance(v)`. Every
//! directed edge `e = (v, u)` emits a message
//! `psi(v) ^ label(e) ^ attrs(e) ^ role(e) ^ psi(u) ^ role(v)` and all
//! messages are bundled back to `K` active bits. The optional third layer
//! extends each message along one more outgoing edge of its target.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::embeddings::{Codebooks, EDGE_LABEL, EDGE_ROLE, NODE_LABEL};
use crate::error::{invalid, Error, Result};
use crate::graph::AttributedGraph;
use crate::hv::{self, bind_assign, Hypervector, VoteVector};

/// Vote weight each message contributes to the bundle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Weighting {
    /// Every message counts once.
    #[default]
    Uniform,
    /// `max(1, Q - bucket(source))`: central sources weigh more.
    Rank,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Uniform => "uniform",
            Weighting::Rank => "rank",
        })
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "rank" => Ok(Weighting::Rank),
            other => Err(invalid(format!("unknown weighting mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    pub layers: usize,
    pub weighting: Weighting,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            weighting: Weighting::Uniform,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.layers) {
            return Err(invalid(format!(
                "layers must be 2 or 3, got {}",
                self.layers
            )));
        }
        Ok(())
    }
}

/// One bundled contribution to a graph vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    /// Node whose role vector is bound into the message.
    pub source: usize,
    /// Intermediate node for depth-3 messages.
    pub via: Option<usize>,
    pub target: usize,
    /// 1 for edgeless fallback node vectors, 2 for edge messages, 3 for two-hop messages.
    pub depth: u8,
    pub weight: u64,
    pub message: Hypervector,
    pub source_role: Hypervector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedGraph {
    pub vector: Hypervector,
    pub provenance: Vec<Provenance>,
    pub label: usize,
}

impl EncodedGraph {
    /// Re-bundles the recorded contributions.
    pub fn rebundle(&self, k: usize) -> Result<Hypervector> {
        let mut votes = VoteVector::new(self.vector.dim());
        for p in &self.provenance {
            votes.accumulate(&p.message, p.weight)?;
        }
        hv::bundle(&votes, k)
    }
}

#[derive(Clone, Debug)]
pub struct Encoder {
    config: EncoderConfig,
    books: Codebooks,
}

impl Encoder {
    pub fn new(config: EncoderConfig, books: Codebooks) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, books })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn books(&self) -> &Codebooks {
        &self.books
    }

    /// Materializes every categorical key the given graphs will touch.
    pub fn prepare<'a>(&mut self, graphs: impl IntoIterator<Item = &'a AttributedGraph>) {
        let q = self.books.rank_levels();
        let cat = &mut self.books.categorical;
        for g in graphs {
            for node in &g.nodes {
                if let Some(l) = node.label {
                    cat.materialize(NODE_LABEL, l);
                }
            }
            for e in &g.edges {
                if let Some(l) = e.label {
                    cat.materialize(EDGE_LABEL, l);
                }
                let key = (g.rank_bucket(e.source, q) * q + g.rank_bucket(e.target, q)) as i64;
                cat.materialize(EDGE_ROLE, key);
            }
        }
    }

    /// Importance role vector of node `v`: the interval level of its rank bucket.
    pub fn node_role<'a>(&'a self, g: &AttributedGraph, v: usize) -> &'a Hypervector {
        self.books
            .importance
            .embed(g.rank_bucket(v, self.books.rank_levels()) as i64)
    }

    /// Role vector of an edge, keyed by the rank buckets of its endpoints.
    pub fn edge_role<'a>(&'a self, g: &AttributedGraph, edge: usize) -> Cow<'a, Hypervector> {
        let q = self.books.rank_levels();
        let e = &g.edges[edge];
        let key = g.rank_bucket(e.source, q) * q + g.rank_bucket(e.target, q);
        self.books.categorical.embed(EDGE_ROLE, key as i64)
    }

    /// Node encoding `psi(v)`. Absent label or attributes are omitted.
    pub fn encode_node(&self, g: &AttributedGraph, v: usize) -> Result<Hypervector> {
        if !g.is_ranked() {
            return Err(invalid("graph must be ranked before encoding"));
        }
        let node = &g.nodes[v];
        let mut out = self.node_role(g, v).clone();
        if let Some(l) = node.label {
            bind_assign(&mut out, &self.books.categorical.embed(NODE_LABEL, l))?;
        }
        if let Some(a) = self.books.node_attrs.embed(&node.attributes)? {
            bind_assign(&mut out, &a)?;
        }
        Ok(out)
    }

    /// Label, attribute and role factors of an edge, bound together.
    fn edge_factor(&self, g: &AttributedGraph, edge: usize) -> Result<Hypervector> {
        let e = &g.edges[edge];
        let mut out = self.edge_role(g, edge).into_owned();
        if let Some(l) = e.label {
            bind_assign(&mut out, &self.books.categorical.embed(EDGE_LABEL, l))?;
        }
        if let Some(a) = self.books.edge_attrs.embed(&e.attributes)? {
            bind_assign(&mut out, &a)?;
        }
        Ok(out)
    }

    fn message_with(
        &self,
        g: &AttributedGraph,
        edge: usize,
        psi: &[Hypervector],
    ) -> Result<Hypervector> {
        let e = &g.edges[edge];
        let mut m = self.edge_factor(g, edge)?;
        bind_assign(&mut m, &psi[e.source])?;
        bind_assign(&mut m, &psi[e.target])?;
        bind_assign(&mut m, self.node_role(g, e.source))?;
        Ok(m)
    }

    /// Message emitted along edge index `edge`.
    pub fn encode_message(&self, g: &AttributedGraph, edge: usize) -> Result<Hypervector> {
        let e = &g.edges[edge];
        let mut psi = vec![Hypervector::zeros(self.books.dim()); g.node_count()];
        psi[e.source] = self.encode_node(g, e.source)?;
        psi[e.target] = self.encode_node(g, e.target)?;
        self.message_with(g, edge, &psi)
    }

    fn weight_for(&self, g: &AttributedGraph, v: usize) -> u64 {
        match self.config.weighting {
            Weighting::Uniform => 1,
            Weighting::Rank => {
                let q = self.books.rank_levels();
                q.saturating_sub(g.rank_bucket(v, q)).max(1) as u64
            }
        }
    }

    /// Encodes a ranked graph with the configured number of layers.
    pub fn encode(&self, g: &AttributedGraph) -> Result<EncodedGraph> {
        self.encode_layers(g, self.config.layers)
    }

    fn encode_layers(&self, g: &AttributedGraph, layers: usize) -> Result<EncodedGraph> {
        if !g.is_ranked() {
            return Err(invalid("graph must be ranked before encoding"));
        }
        let psi = (0..g.node_count())
            .map(|v| self.encode_node(g, v))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..g.node_count()).collect();
        order.sort_by_key(|&v| (g.nodes[v].rank, v));

        let mut provenance = Vec::new();
        if g.edges.is_empty() {
            for &v in &order {
                provenance.push(Provenance {
                    source: v,
                    via: None,
                    target: v,
                    depth: 1,
                    weight: self.weight_for(g, v),
                    message: psi[v].clone(),
                    source_role: self.node_role(g, v).clone(),
                });
            }
        } else {
            let out = g.out_edges();
            for &v in &order {
                for &ei in &out[v] {
                    let e = &g.edges[ei];
                    let message = self.message_with(g, ei, &psi)?;
                    if layers == 3 {
                        for &ej in &out[e.target] {
                            let w = g.edges[ej].target;
                            if w == v {
                                continue;
                            }
                            let mut hop = message.clone();
                            bind_assign(&mut hop, &self.edge_factor(g, ej)?)?;
                            bind_assign(&mut hop, &psi[w])?;
                            provenance.push(Provenance {
                                source: v,
                                via: Some(e.target),
                                target: w,
                                depth: 3,
                                weight: self.weight_for(g, v),
                                message: hop,
                                source_role: self.node_role(g, v).clone(),
                            });
                        }
                    }
                    provenance.push(Provenance {
                        source: v,
                        via: None,
                        target: e.target,
                        depth: 2,
                        weight: self.weight_for(g, v),
                        message,
                        source_role: self.node_role(g, v).clone(),
                    });
                }
            }
        }

        let mut votes = VoteVector::new(self.books.dim());
        for p in &provenance {
            votes.accumulate(&p.message, p.weight)?;
        }
        Ok(EncodedGraph {
            vector: hv::bundle(&votes, self.books.k())?,
            provenance,
            label: g.label,
        })
    }

    /// Encodes many graphs in parallel, keeping only the bundled vectors.
    pub fn encode_vectors(&self, graphs: &[AttributedGraph]) -> Result<Vec<Hypervector>> {
        graphs
            .par_iter()
            .map(|g| self.encode(g).map(|e| e.vector))
            .collect()
    }
}
