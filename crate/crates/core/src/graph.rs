//! Attributed graphs and PageRank-based node ordering.

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NodeRecord {
    pub label: Option<i64>,
    pub attributes: Vec<f64>,
    /// PageRank score.
    pub importance: f64,
    /// Position in descending-importance order, 0 = most important.
    pub rank: usize,
}

impl NodeRecord {
    pub fn new(label: Option<i64>, attributes: Vec<f64>) -> Self {
        Self {
            label,
            attributes,
            importance: 0.0,
            rank: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub source: usize,
    pub target: usize,
    pub label: Option<i64>,
    pub attributes: Vec<f64>,
}

impl EdgeRecord {
    pub fn new(source: usize, target: usize) -> Self {
        Self {
            source,
            target,
            label: None,
            attributes: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: i64) -> Self {
        self.label = Some(label);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PageRankParams {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PageRankParams {
    fn default() -> Self {
        Self {
            damping: 0.85,
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    /// Class id (0-based).
    pub label: usize,
    ranked: bool,
}

impl AttributedGraph {
    pub fn new(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>, label: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("a graph needs at least one node"));
        }
        let n = nodes.len();
        if let Some(e) = edges.iter().find(|e| e.source >= n || e.target >= n) {
            return Err(invalid(format!(
                "edge ({}, {}) references a node outside 0..{n}",
                e.source, e.target
            )));
        }
        Ok(Self {
            nodes,
            edges,
            label,
            ranked: false,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_ranked(&self) -> bool {
        self.ranked
    }

    /// Runs PageRank and assigns ranks.
    pub fn rank_nodes(&mut self, params: &PageRankParams) {
        let scores = pagerank(self, params);
        for (node, s) in self.nodes.iter_mut().zip(scores) {
            node.importance = s;
        }
        self.assign_ranks();
    }

    /// Ranks from the current importance scores; ties go to the lower index.
    pub fn assign_ranks(&mut self) {
        let scores: Vec<f64> = self.nodes.iter().map(|n| n.importance).collect();
        for (node, r) in self.nodes.iter_mut().zip(ranks_from_scores(&scores)) {
            node.rank = r;
        }
        self.ranked = true;
    }

    /// Marks ranks set by hand as valid. They must form a permutation.
    pub fn set_ranks(&mut self, ranks: &[usize]) -> Result<()> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        if ranks.len() != n {
            return Err(invalid("rank list length differs from node count"));
        }
        for &r in ranks {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(invalid("ranks must be a permutation of 0..n"));
            }
        }
        for (node, &r) in self.nodes.iter_mut().zip(ranks) {
            node.rank = r;
        }
        self.ranked = true;
        Ok(())
    }

    /// Rank bucket `floor(rank * levels / n)` of node `v`.
    pub fn rank_bucket(&self, v: usize, levels: usize) -> usize {
        self.nodes[v].rank * levels / self.nodes.len()
    }

    /// Outgoing edge indices per node, in edge order.
    pub fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.source].push(i);
        }
        out
    }
}

/// Rank positions from scores: rank 0 is the highest score, ties by index.
pub fn ranks_from_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (r, &v) in order.iter().enumerate() {
        ranks[v] = r;
    }
    ranks
}

/// Power-iteration PageRank over the directed edge list. Parallel edges
/// count with multiplicity; dangling mass is spread uniformly.
pub fn pagerank(g: &AttributedGraph, params: &PageRankParams) -> Vec<f64> {
    let n = g.nodes.len();
    let uniform = 1.0 / n as f64;
    let mut out_degree = vec![0usize; n];
    for e in &g.edges {
        out_degree[e.source] += 1;
    }
    let mut rank = vec![uniform; n];
    let mut next = vec![0.0; n];
    for _ in 0..params.max_iter {
        let dangling: f64 = (0..n)
            .filter(|&v| out_degree[v] == 0)
            .map(|v| rank[v])
            .sum();
        let base = (1.0 - params.damping) * uniform + params.damping * dangling * uniform;
        next.iter_mut().for_each(|x| *x = base);
        for e in &g.edges {
            next[e.target] += params.damping * rank[e.source] / out_degree[e.source] as f64;
        }
        let change: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if change < params.tol {
            break;
        }
    }
    let total: f64 = rank.iter().sum();
    rank.iter().map(|r| r / total).collect()
}
