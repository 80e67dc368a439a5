//! Backward decoding of a prediction to the node that most influenced it.
//!
//! The positive literals of the clauses that fire for the predicted class
//! are tallied into a vote vector, the top `round(sparsity * D)` bits are
//! kept, and the node whose role vector (or message) lies nearest in
//! Hamming distance is reported.

use std::fmt::Write as _;

use crate::cotm::{ClauseBank, CotmModel};
use crate::encoder::{EncodedGraph, Encoder};
use crate::error::{check_dims, invalid, Result};
use crate::graph::AttributedGraph;
use crate::hv::{self, hamming, Hypervector, VoteVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VoteMode {
    /// Each active clause adds its weight to every positive literal.
    #[default]
    Weighted,
    /// Each active clause adds 1.
    Unweighted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceTarget {
    /// Compare against each node's importance role vector.
    #[default]
    Role,
    /// Compare against the messages each node emitted; the closest one counts.
    Messages,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplainOptions {
    pub sparsity: f64,
    pub votes: VoteMode,
    pub target: DistanceTarget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub predicted: usize,
    pub active: Vec<(usize, i32)>,
    pub votes: VoteVector,
    pub v_pred: Hypervector,
    pub distances: Vec<usize>,
    pub winner: usize,
}

/// Tallies included positive literals of the given clauses. Negated
/// literals carry no location and are skipped.
pub fn aggregate_literal_votes(
    bank: &ClauseBank,
    active: &[(usize, i32)],
    mode: VoteMode,
) -> VoteVector {
    let mut votes = VoteVector::new(bank.dim());
    for &(clause, weight) in active {
        let amount = match mode {
            VoteMode::Weighted => u64::from(weight.unsigned_abs()),
            VoteMode::Unweighted => 1,
        };
        for j in bank.positive_literals(clause) {
            votes.add(j, amount);
        }
    }
    votes
}

/// Keeps the `round(sparsity * D)` most voted bits.
pub fn binarize_votes(votes: &VoteVector, sparsity: f64) -> Result<Hypervector> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(invalid(format!("sparsity {sparsity} outside (0, 1]")));
    }
    let k = (sparsity * votes.dim() as f64).round() as usize;
    hv::bundle(votes, k)
}

/// Hamming distance from `v_pred` to each candidate and the argmin (lowest
/// index on ties).
pub fn nearest(v_pred: &Hypervector, candidates: &[Hypervector]) -> Result<(Vec<usize>, usize)> {
    if candidates.is_empty() {
        return Err(invalid("no candidates to compare against"));
    }
    let distances = candidates
        .iter()
        .map(|c| hamming(v_pred, c))
        .collect::<Result<Vec<_>>>()?;
    let winner = argmin(&distances);
    Ok((distances, winner))
}

fn argmin(values: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Full decoding pipeline for one encoded graph.
pub fn explain(
    model: &CotmModel,
    encoder: &Encoder,
    graph: &AttributedGraph,
    encoded: &EncodedGraph,
    opts: &ExplainOptions,
) -> Result<Explanation> {
    check_dims(model.dim(), encoded.vector.dim())?;
    let predicted = model.predict(&encoded.vector)?;
    let active = model.active_clauses(&encoded.vector, predicted)?;
    let votes = aggregate_literal_votes(model.bank(), &active, opts.votes);
    let v_pred = binarize_votes(&votes, opts.sparsity)?;
    let n = graph.node_count();
    let (distances, winner) = match opts.target {
        DistanceTarget::Role => {
            let roles: Vec<Hypervector> = (0..n)
                .map(|v| encoder.node_role(graph, v).clone())
                .collect();
            nearest(&v_pred, &roles)?
        }
        DistanceTarget::Messages => {
            let mut distances = vec![v_pred.dim(); n];
            for p in &encoded.provenance {
                let d = hamming(&v_pred, &p.message)?;
                distances[p.source] = distances[p.source].min(d);
            }
            let winner = argmin(&distances);
            (distances, winner)
        }
    };
    Ok(Explanation {
        predicted,
        active,
        votes,
        v_pred,
        distances,
        winner,
    })
}

impl Explanation {
    /// The `n` most voted bits as `(bit, count)`, highest first.
    pub fn top_literals(&self, n: usize) -> Vec<(usize, u64)> {
        let mut bits: Vec<(usize, u64)> = self
            .votes
            .counts()
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .collect();
        bits.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        bits.truncate(n);
        bits
    }

    /// Line-oriented `key=value` report.
    pub fn report(&self, graph_index: usize, graph: &AttributedGraph) -> String {
        let mut out = String::new();
        let fmt_label = |l: Option<i64>| l.map_or_else(|| "-".to_owned(), |l| l.to_string());
        let _ = writeln!(
            out,
            "explanation graph={graph_index} predicted={} true={} active_clauses={}",
            self.predicted,
            graph.label,
            self.active.len()
        );
        let top: Vec<String> = self
            .top_literals(10)
            .iter()
            .map(|(b, c)| format!("{b}:{c}"))
            .collect();
        let _ = writeln!(
            out,
            "votes total={} top={}",
            self.votes.counts().iter().sum::<u64>(),
            top.join(",")
        );
        for (v, d) in self.distances.iter().enumerate() {
            let node = &graph.nodes[v];
            let _ = writeln!(
                out,
                "node index={v} label={} rank={} distance={d}",
                fmt_label(node.label),
                node.rank
            );
        }
        let w = &graph.nodes[self.winner];
        let _ = writeln!(
            out,
            "winner node={} label={} rank={} distance={}",
            self.winner,
            fmt_label(w.label),
            w.rank,
            self.distances[self.winner]
        );
        out
    }
}
