//! Oracle checks shared by the acceptance target and the per-topic suites.
//!
//! Every check returns `Ok(detail)` on success and `Err(detail)` on the
//! first mismatch, so the acceptance runner can print one line per check.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hvgraph::cotm::{ClassWeights, ClauseBank, CotmConfig, CotmModel};
use hvgraph::embeddings::{
    keyed_vector, CodebookParams, Codebooks, LinearCodebook, LinearParams, EDGE_LABEL, EDGE_ROLE,
    NODE_LABEL,
};
use hvgraph::encoder::{Encoder, EncoderConfig, Weighting};
use hvgraph::experiment::{run_bench, ExperimentConfig};
use hvgraph::explain::{aggregate_literal_votes, binarize_votes, nearest, VoteMode};
use hvgraph::graph::{pagerank, AttributedGraph, EdgeRecord, NodeRecord, PageRankParams};
use hvgraph::hv::{bind, bundle, hamming, random_sparse};
use hvgraph::tu::{load_tu_dataset, write_tu_dataset};
use hvgraph::{seed, Hypervector, VoteVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = std::result::Result<String, String>;

pub fn data_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    dir.canonicalize().unwrap_or(dir)
}

fn fail(msg: impl std::fmt::Display) -> String {
    msg.to_string()
}

// ---------------------------------------------------------------------------
// Hypervector algebra

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

/// Three random sparse vectors sharing a dimension.
fn triple() -> impl Strategy<Value = (Hypervector, Hypervector, Hypervector)> {
    (1usize..700, any::<u64>()).prop_map(|(dim, s)| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let draw = |rng: &mut ChaCha8Rng| {
            let k = rng.gen_range(1..=dim);
            random_sparse(dim, k, rng).unwrap()
        };
        (draw(&mut rng), draw(&mut rng), draw(&mut rng))
    })
}

/// Vote counts with many ties, plus a `k` within range.
fn votes() -> impl Strategy<Value = (Vec<u64>, usize)> {
    (1usize..400, 0u64..6, any::<u64>()).prop_map(|(dim, spread, s)| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let counts = (0..dim).map(|_| rng.gen_range(0..=spread)).collect();
        (counts, rng.gen_range(0..=dim))
    })
}

fn sorted_top_k(counts: &[u64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut top = order[..k].to_vec();
    top.sort_unstable();
    top
}

fn run_property<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> std::result::Result<(), TestCaseError>,
) -> std::result::Result<(), String> {
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

pub fn hv_algebra(cases: u32) -> Check {
    run_property("bind invertibility", cases, triple(), |(a, b, _)| {
        prop_assert_eq!(bind(&bind(&a, &b).unwrap(), &b).unwrap(), a);
        Ok(())
    })?;
    run_property(
        "bind commutativity/associativity",
        cases,
        triple(),
        |(a, b, c)| {
            prop_assert_eq!(bind(&a, &b).unwrap(), bind(&b, &a).unwrap());
            let left = bind(&bind(&a, &b).unwrap(), &c).unwrap();
            let right = bind(&a, &bind(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
            Ok(())
        },
    )?;
    run_property("hamming metric axioms", cases, triple(), |(a, b, c)| {
        let ab = hamming(&a, &b).unwrap();
        prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
        prop_assert_eq!(ab, hamming(&b, &a).unwrap());
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
        Ok(())
    })?;
    run_property("bundle popcount", cases, votes(), |(counts, k)| {
        let out = bundle(&VoteVector::from_counts(counts), k).unwrap();
        prop_assert_eq!(out.popcount(), k);
        Ok(())
    })?;
    run_property("bundle tie rule", cases, votes(), |(counts, k)| {
        let votes = VoteVector::from_counts(counts.clone());
        let first = bundle(&votes, k).unwrap();
        prop_assert_eq!(&first, &bundle(&votes, k).unwrap());
        prop_assert_eq!(first.ones().collect::<Vec<_>>(), sorted_top_k(&counts, k));
        Ok(())
    })?;
    Ok(format!("5 properties x {cases} cases"))
}

// ---------------------------------------------------------------------------
// Linear embedding locality

pub fn linear_locality(seeds: u64) -> Check {
    let (dim, k) = (6400, 1280);
    let params = LinearParams::new(0.0, 1.0);
    let swaps = params.swaps(k);
    let mut gap_sums = [0f64; 11];
    for s in 0..seeds {
        let book = LinearCodebook::build(params, dim, k, &mut seed::stream(s, "locality", 0))
            .map_err(fail)?;
        let levels = book.levels();
        for (i, pair) in levels.windows(2).enumerate() {
            let d = hamming(&pair[0], &pair[1]).map_err(fail)?;
            if d != 2 * swaps {
                return Err(format!(
                    "seed {s}: levels {i}->{} at distance {d}, want {}",
                    i + 1,
                    2 * swaps
                ));
            }
        }
        for (gap, sum) in gap_sums.iter_mut().enumerate().skip(1) {
            *sum += hamming(&levels[0], &levels[gap]).map_err(fail)? as f64;
        }
    }
    let means: Vec<f64> = gap_sums[1..].iter().map(|s| s / seeds as f64).collect();
    if let Some(w) = means.windows(2).position(|w| w[1] <= w[0]) {
        return Err(format!(
            "mean distance not increasing at gap {}: {means:?}",
            w + 2
        ));
    }
    Ok(format!(
        "step distance 2S={} over {seeds} seeds; gap means {:.0}..{:.0}",
        2 * swaps,
        means[0],
        means[9]
    ))
}

// ---------------------------------------------------------------------------
// CoTM brute-force equivalence

pub struct RandomModel {
    pub model: CotmModel,
    pub dim: usize,
    /// include[c][l] for literal `l` of clause `c`.
    pub include: Vec<Vec<bool>>,
    pub weights: Vec<Vec<i32>>,
}

pub fn random_model(rng: &mut ChaCha8Rng) -> RandomModel {
    let dim = rng.gen_range(1..=32);
    let clauses = rng.gen_range(1..=16);
    let classes = rng.gen_range(1..=3);
    let n = 1u32 << rng.gen_range(0..=7);
    // Sparse inclusion so that clauses actually fire on some inputs.
    let p_include = rng.gen_range(0.0..0.3);
    let config = CotmConfig {
        clauses,
        classes,
        threshold: 16,
        states_per_action: n,
        ..CotmConfig::default()
    };
    let mut bank = ClauseBank::new(clauses, dim, n).unwrap();
    let mut include = vec![vec![false; 2 * dim]; clauses];
    for (c, row) in include.iter_mut().enumerate() {
        for (l, inc) in row.iter_mut().enumerate() {
            let state = if rng.gen_bool(p_include) {
                rng.gen_range(n + 1..=2 * n)
            } else {
                rng.gen_range(1..=n)
            };
            bank.set_state(c, l, state).unwrap();
            *inc = state > n;
        }
    }
    let weights: Vec<Vec<i32>> = (0..classes)
        .map(|_| (0..clauses).map(|_| rng.gen_range(-16..=16)).collect())
        .collect();
    let flat = weights.iter().flatten().copied().collect();
    let model = CotmModel::from_parts(
        config,
        bank,
        ClassWeights::from_vec(classes, clauses, flat).unwrap(),
    )
    .unwrap();
    RandomModel {
        model,
        dim,
        include,
        weights,
    }
}

/// Clause outputs by direct evaluation of every included literal.
pub fn brute_outputs(m: &RandomModel, x: &[bool], training: bool) -> Vec<bool> {
    m.include
        .iter()
        .map(|row| {
            let mut any = false;
            for (l, &inc) in row.iter().enumerate() {
                if !inc {
                    continue;
                }
                any = true;
                let value = if l < m.dim { x[l] } else { !x[l - m.dim] };
                if !value {
                    return false;
                }
            }
            any || training
        })
        .collect()
}

pub fn brute_sums(m: &RandomModel, x: &[bool]) -> Vec<i64> {
    let out = brute_outputs(m, x, false);
    m.weights
        .iter()
        .map(|row| {
            row.iter()
                .zip(&out)
                .filter(|(_, &o)| o)
                .map(|(&w, _)| i64::from(w))
                .sum()
        })
        .collect()
}

fn brute_argmax(sums: &[i64]) -> usize {
    let mut best = 0;
    for (i, &s) in sums.iter().enumerate() {
        if s > sums[best] {
            best = i;
        }
    }
    best
}

pub fn cotm_oracle(models: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc07);
    let mut inputs_checked = 0usize;
    for i in 0..models {
        let m = random_model(&mut rng);
        let inputs: Vec<Vec<bool>> = if m.dim <= 10 {
            (0..1u32 << m.dim)
                .map(|bits| (0..m.dim).map(|j| bits >> j & 1 == 1).collect())
                .collect()
        } else {
            (0..256)
                .map(|_| {
                    let p = rng.gen_range(0.05..0.95);
                    (0..m.dim).map(|_| rng.gen_bool(p)).collect()
                })
                .collect()
        };
        for x in &inputs {
            let bits: Vec<u8> = x.iter().map(|&b| u8::from(b)).collect();
            let hv = Hypervector::from_bits(&bits);
            let want = brute_sums(&m, x);
            let got = m.model.class_sums(&hv).map_err(fail)?;
            if got != want {
                return Err(format!(
                    "model {i}, input {bits:?}: sums {got:?}, brute force {want:?}"
                ));
            }
            let predicted = m.model.predict(&hv).map_err(fail)?;
            if predicted != brute_argmax(&want) {
                return Err(format!(
                    "model {i}: predicted {predicted}, brute force {}",
                    brute_argmax(&want)
                ));
            }
            if m.model.clause_outputs(&hv, true).map_err(fail)? != brute_outputs(&m, x, true) {
                return Err(format!("model {i}: training-mode clause outputs differ"));
            }
            inputs_checked += 1;
        }
    }
    Ok(format!(
        "{models} models, {inputs_checked} inputs, exact match"
    ))
}

// ---------------------------------------------------------------------------
// Encoder oracles

pub const TOY_DIM: usize = 12;
pub const TOY_K: usize = 3;
pub const TOY_SEED: u64 = 7;

/// Bitwise XOR of 0/1 arrays, independent of the library's word layout.
pub fn xor_bits(parts: &[&[u8]]) -> Vec<u8> {
    let mut out = vec![0u8; parts[0].len()];
    for p in parts {
        for (o, &b) in out.iter_mut().zip(p.iter()) {
            *o ^= b;
        }
    }
    out
}

/// Top-`k` of per-bit sums with lowest-index tie-break, on 0/1 arrays.
pub fn bundle_bits(parts: &[Vec<u8>], weights: &[u64], k: usize) -> Vec<u8> {
    let mut counts = vec![0u64; parts[0].len()];
    for (p, &w) in parts.iter().zip(weights) {
        for (c, &b) in counts.iter_mut().zip(p) {
            *c += u64::from(b) * w;
        }
    }
    let mut out = vec![0u8; counts.len()];
    for i in sorted_top_k(&counts, k) {
        out[i] = 1;
    }
    out
}

pub struct Toy {
    pub graph: AttributedGraph,
    pub books: Codebooks,
}

/// Path a -> b -> c with node labels, two node attributes, edge labels and
/// one edge attribute; ranks fixed by hand to b, a, c.
pub fn toy_path() -> Toy {
    let nodes = vec![
        NodeRecord::new(Some(1), vec![0.25, 1.5]),
        NodeRecord::new(Some(2), vec![0.75, 0.0]),
        NodeRecord::new(Some(1), vec![1.0, 2.0]),
    ];
    let mut ab = EdgeRecord::new(0, 1).with_label(5);
    ab.attributes = vec![0.1];
    let mut bc = EdgeRecord::new(1, 2).with_label(6);
    bc.attributes = vec![0.9];
    let mut graph = AttributedGraph::new(nodes, vec![ab, bc], 0).unwrap();
    graph.set_ranks(&[1, 0, 2]).unwrap();
    let mut params = CodebookParams::new(TOY_SEED, TOY_DIM, TOY_K);
    // At K=3 the default rates round to zero swaps per level.
    params.alpha = 0.3;
    params.node_attr_bounds = vec![(0.0, 1.0), (0.0, 2.0)];
    params.edge_attr_bounds = vec![(0.0, 1.0)];
    Toy {
        graph,
        books: Codebooks::build(params).unwrap(),
    }
}

fn cat(ns: &str, label: i64) -> Vec<u8> {
    keyed_vector(TOY_SEED, TOY_DIM, TOY_K, ns, label).to_bits()
}

/// Hand recomputation of the toy node encodings.
pub fn toy_psi(toy: &Toy, v: usize) -> Vec<u8> {
    let node = &toy.graph.nodes[v];
    let q = toy.books.rank_levels();
    let attrs = &toy.books.node_attrs;
    let parts: Vec<Vec<u8>> = node
        .attributes
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            xor_bits(&[
                &attrs.codebook(j).embed(x).to_bits(),
                &attrs.role(j).to_bits(),
            ])
        })
        .collect();
    let attr = bundle_bits(&parts, &vec![1; parts.len()], TOY_K);
    let role = toy
        .books
        .importance
        .embed((node.rank * q / 3) as i64)
        .to_bits();
    xor_bits(&[&cat(NODE_LABEL, node.label.unwrap()), &attr, &role])
}

fn toy_edge_factor(toy: &Toy, e: usize) -> Vec<u8> {
    let edge = &toy.graph.edges[e];
    let q = toy.books.rank_levels();
    let bucket = |v: usize| toy.graph.nodes[v].rank * q / 3;
    let role = cat(
        EDGE_ROLE,
        (bucket(edge.source) * q + bucket(edge.target)) as i64,
    );
    let attrs = &toy.books.edge_attrs;
    let attr = bundle_bits(
        &[xor_bits(&[
            &attrs.codebook(0).embed(edge.attributes[0]).to_bits(),
            &attrs.role(0).to_bits(),
        ])],
        &[1],
        TOY_K,
    );
    xor_bits(&[&role, &cat(EDGE_LABEL, edge.label.unwrap()), &attr])
}

pub fn toy_message(toy: &Toy, e: usize) -> Vec<u8> {
    let edge = &toy.graph.edges[e];
    let q = toy.books.rank_levels();
    let src_role = toy
        .books
        .importance
        .embed((toy.graph.nodes[edge.source].rank * q / 3) as i64)
        .to_bits();
    xor_bits(&[
        &toy_psi(toy, edge.source),
        &toy_edge_factor(toy, e),
        &toy_psi(toy, edge.target),
        &src_role,
    ])
}

fn encoder(toy: &Toy, layers: usize) -> Encoder {
    let mut enc = Encoder::new(
        EncoderConfig {
            layers,
            weighting: Weighting::Uniform,
        },
        toy.books.clone(),
    )
    .unwrap();
    enc.prepare([&toy.graph]);
    enc
}

pub fn encoder_hand_oracles() -> Check {
    let toy = toy_path();
    let enc2 = encoder(&toy, 2);
    for v in 0..3 {
        let got = enc2.encode_node(&toy.graph, v).map_err(fail)?.to_bits();
        if got != toy_psi(&toy, v) {
            return Err(format!("psi({v}) = {got:?}, hand {:?}", toy_psi(&toy, v)));
        }
    }
    let m_ab = toy_message(&toy, 0);
    let m_bc = toy_message(&toy, 1);
    if enc2.encode_message(&toy.graph, 0).map_err(fail)?.to_bits() != m_ab {
        return Err("message a->b differs from hand XOR chain".into());
    }
    let two = enc2.encode(&toy.graph).map_err(fail)?;
    if two.vector.to_bits() != bundle_bits(&[m_ab.clone(), m_bc.clone()], &[1, 1], TOY_K) {
        return Err("2-layer graph vector differs from hand bundle".into());
    }

    let three = encoder(&toy, 3).encode(&toy.graph).map_err(fail)?;
    let deep: Vec<_> = three.provenance.iter().filter(|p| p.depth == 3).collect();
    if deep.len() != 1 {
        return Err(format!(
            "path graph has {} layer-3 messages, want 1",
            deep.len()
        ));
    }
    let hop = xor_bits(&[&m_ab, &toy_edge_factor(&toy, 1), &toy_psi(&toy, 2)]);
    if deep[0].message.to_bits() != hop {
        return Err("layer-3 message differs from hand XOR chain".into());
    }
    if three.vector.to_bits() != bundle_bits(&[hop, m_ab, m_bc], &[1, 1, 1], TOY_K) {
        return Err("3-layer graph vector differs from hand bundle".into());
    }
    Ok("node, 2-layer and 3-layer XOR chains at D=12".into())
}

/// Random connected-ish labeled graph with attributes, symmetric edges.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> AttributedGraph {
    let nodes = (0..n)
        .map(|_| NodeRecord::new(Some(rng.gen_range(0..4)), vec![rng.gen(), rng.gen()]))
        .collect();
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        let l = rng.gen_range(0..3);
        edges.push(EdgeRecord::new(u, v).with_label(l));
        edges.push(EdgeRecord::new(v, u).with_label(l));
    }
    for _ in 0..n / 2 {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v {
            edges.push(EdgeRecord::new(u, v).with_label(0));
            edges.push(EdgeRecord::new(v, u).with_label(0));
        }
    }
    AttributedGraph::new(nodes, edges, 0).unwrap()
}

fn full_books(seed: u64) -> Codebooks {
    let mut params = CodebookParams::new(seed, 6400, 1280);
    params.node_attr_bounds = vec![(0.0, 1.0), (0.0, 1.0)];
    Codebooks::build(params).unwrap()
}

fn encode_with(books: &Codebooks, layers: usize, g: &AttributedGraph) -> Hypervector {
    let mut enc = Encoder::new(
        EncoderConfig {
            layers,
            weighting: Weighting::Uniform,
        },
        books.clone(),
    )
    .unwrap();
    enc.prepare([g]);
    enc.encode(g).unwrap().vector
}

pub fn isomorphic_copies(trials: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x150);
    for t in 0..trials {
        let n = rng.gen_range(2..9);
        let mut g = random_graph(&mut rng, n);
        g.rank_nodes(&PageRankParams::default());
        // perm[old] = new
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let mut nodes = vec![NodeRecord::new(None, vec![]); n];
        let mut ranks = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            nodes[new] = g.nodes[old].clone();
            ranks[new] = g.nodes[old].rank;
        }
        let mut edges: Vec<EdgeRecord> = g
            .edges
            .iter()
            .map(|e| {
                let mut c = e.clone();
                c.source = perm[e.source];
                c.target = perm[e.target];
                c
            })
            .collect();
        rand::seq::SliceRandom::shuffle(edges.as_mut_slice(), &mut rng);
        let mut copy = AttributedGraph::new(nodes, edges, 0).unwrap();
        copy.set_ranks(&ranks).unwrap();
        let books = full_books(t);
        for layers in [2, 3] {
            if encode_with(&books, layers, &g) != encode_with(&books, layers, &copy) {
                return Err(format!(
                    "trial {t}: {layers}-layer encodings of isomorphic copies differ"
                ));
            }
        }
    }
    Ok(format!(
        "{trials} relabeled copies, 2 and 3 layers identical"
    ))
}

pub fn edge_deletion_sensitivity(seeds: u64) -> Check {
    let mut changed = 0;
    for s in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut g = random_graph(&mut rng, 6);
        g.rank_nodes(&PageRankParams::default());
        let books = full_books(s);
        let before = encode_with(&books, 2, &g);
        let pairs = g.edges.len() / 2;
        let drop = 2 * rng.gen_range(0..pairs);
        let mut edges = g.edges.clone();
        edges.drain(drop..drop + 2);
        let mut h = AttributedGraph::new(g.nodes.clone(), edges, 0).unwrap();
        h.rank_nodes(&PageRankParams::default());
        if encode_with(&books, 2, &h) != before {
            changed += 1;
        }
    }
    let need = seeds * 99 / 100;
    if changed >= need {
        Ok(format!("{changed}/{seeds} seeds changed v_G"))
    } else {
        Err(format!(
            "only {changed}/{seeds} seeds changed v_G, need {need}"
        ))
    }
}

// ---------------------------------------------------------------------------
// PageRank

type Edges = Vec<(usize, usize)>;

/// Column-stochastic transition matrix with dangling columns spread uniformly.
fn transition(n: usize, edges: &[(usize, usize)]) -> nalgebra::DMatrix<f64> {
    let mut out = vec![0usize; n];
    for &(s, _) in edges {
        out[s] += 1;
    }
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for &(s, t) in edges {
        m[(t, s)] += 1.0 / out[s] as f64;
    }
    for s in (0..n).filter(|&s| out[s] == 0) {
        for t in 0..n {
            m[(t, s)] += 1.0 / n as f64;
        }
    }
    m
}

/// Dense power iteration `r <- (1-d)/n + d M r` with the same stopping rule.
pub fn pagerank_dense(n: usize, edges: &[(usize, usize)], params: &PageRankParams) -> Vec<f64> {
    use nalgebra::DVector;
    let m = transition(n, edges) * params.damping;
    let teleport = DVector::<f64>::from_element(n, (1.0 - params.damping) / n as f64);
    let mut r = DVector::<f64>::from_element(n, 1.0 / n as f64);
    for _ in 0..params.max_iter {
        let next = &m * &r + &teleport;
        let change = (&next - &r).abs().sum();
        r = next;
        if change < params.tol {
            break;
        }
    }
    let total = r.sum();
    r.iter().map(|x| x / total).collect()
}

/// Exact stationary vector from a dense linear solve.
pub fn pagerank_solve(n: usize, edges: &[(usize, usize)], d: f64) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let a = DMatrix::<f64>::identity(n, n) - transition(n, edges) * d;
    let b = DVector::<f64>::from_element(n, (1.0 - d) / n as f64);
    let r = a.lu().solve(&b).expect("PageRank system is non-singular");
    let total = r.sum();
    r.iter().map(|x| x / total).collect()
}

fn max_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn plain_graph(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
    AttributedGraph::new(
        (0..n).map(|_| NodeRecord::new(None, vec![])).collect(),
        edges.iter().map(|&(s, t)| EdgeRecord::new(s, t)).collect(),
        0,
    )
    .unwrap()
}

pub fn pagerank_oracle(graphs: usize) -> Check {
    let params = PageRankParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a9e);
    let mut worst = 0f64;
    let mut worst_exact = 0f64;
    for i in 0..graphs {
        let n = rng.gen_range(1..=20);
        let density = rng.gen_range(0.0..0.4);
        let mut edges = Vec::new();
        for s in 0..n {
            for t in 0..n {
                if rng.gen_bool(density) {
                    edges.push((s, t));
                }
            }
        }
        // A few parallel edges.
        for _ in 0..rng.gen_range(0..3) {
            if let Some(&e) = edges.get(rng.gen_range(0..edges.len().max(1))) {
                edges.push(e);
            }
        }
        let got = pagerank(&plain_graph(n, &edges), &params);
        let err = max_error(&got, &pagerank_dense(n, &edges, &params));
        worst = worst.max(err);
        if err > 1e-8 {
            return Err(format!(
                "graph {i} (n={n}, {} edges): max error {err:e}",
                edges.len()
            ));
        }
        // 100 iterations at d=0.85 leave at most ~2 * 0.85^100 of L1 residue.
        let exact = max_error(&got, &pagerank_solve(n, &edges, params.damping));
        worst_exact = worst_exact.max(exact);
        if exact > 1e-6 {
            return Err(format!(
                "graph {i} (n={n}): {exact:e} away from the exact fixed point"
            ));
        }
        if (got.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(format!("graph {i}: scores do not sum to 1"));
        }
    }

    let cycle = |n: usize| (0..n).map(|v| (v, (v + 1) % n)).collect::<Vec<_>>();
    let complete = |n: usize| {
        (0..n)
            .flat_map(|s| (0..n).filter(move |&t| t != s).map(move |t| (s, t)))
            .collect::<Vec<_>>()
    };
    let symmetric: [(&str, usize, Edges); 5] = [
        ("edgeless 4", 4, vec![]),
        ("edgeless 1", 1, vec![]),
        ("3-cycle", 3, cycle(3)),
        ("7-cycle", 7, cycle(7)),
        ("K5", 5, complete(5)),
    ];
    for (name, n, edges) in symmetric {
        let scores = pagerank(&plain_graph(n, &edges), &params);
        if scores.iter().any(|&s| s != scores[0]) || (scores[0] - 1.0 / n as f64).abs() > 1e-15 {
            return Err(format!("{name}: scores {scores:?} not uniform"));
        }
    }
    Ok(format!(
        "{graphs} random graphs, max error {worst:.1e} vs dense iteration, {worst_exact:.1e} vs exact solve; symmetric cases uniform"
    ))
}

// ---------------------------------------------------------------------------
// TU parser round trip

pub fn round_trip(dir: &Path, name: &str) -> Check {
    let first = load_tu_dataset(dir, name).map_err(fail)?;
    let tmp = tempfile::tempdir().map_err(fail)?;
    write_tu_dataset(&first, tmp.path()).map_err(fail)?;
    let second = load_tu_dataset(tmp.path(), name).map_err(fail)?;
    if first != second {
        return Err(format!("{name}: corpus changed after write and re-read"));
    }
    let edges: usize = first.graphs.iter().map(|g| g.edges.len()).sum();
    Ok(format!(
        "{name}: {} graphs, {edges} directed edges",
        first.len()
    ))
}

/// Writes a small dataset whose edge file mixes `i, j` and `i,j` lines and
/// omits some reverse edges.
pub fn write_adversarial_fixture(dir: &Path) -> std::io::Result<()> {
    let files = [
        ("A", "1, 2\n2,1\n2, 3\n4,5\n5, 6\n6,4\n7, 7\n"),
        ("graph_indicator", "1\n1\n1\n2\n2\n2\n3\n"),
        ("graph_labels", "-1\n1\n-1\n"),
        ("node_labels", "0\n1\n0\n2\n2\n1\n0\n"),
        ("edge_labels", "1\n1\n2\n0\n1\n2\n0\n"),
        (
            "node_attributes",
            "0.5, 1\n0.25,2\n1, 0\n0.1,0.2\n0.3, 0.4\n0.5,0.6\n0, 0\n",
        ),
    ];
    for (suffix, body) in files {
        fs::write(dir.join(format!("ADV_{suffix}.txt")), body)?;
    }
    Ok(())
}

pub fn tu_round_trips() -> Check {
    let mutag = round_trip(&data_dir(), "MUTAG")?;
    let tmp = tempfile::tempdir().map_err(fail)?;
    write_adversarial_fixture(tmp.path()).map_err(fail)?;
    let adv = round_trip(tmp.path(), "ADV")?;
    let corpus = load_tu_dataset(tmp.path(), "ADV").map_err(fail)?;
    // 7 listed edges; 1->2 and its reverse are present, the self loop needs
    // none, and 2->3, 4->5, 5->6, 6->4 each gain a reverse.
    let edges: usize = corpus.graphs.iter().map(|g| g.edges.len()).sum();
    if edges != 11 {
        return Err(format!(
            "adversarial fixture symmetrized to {edges} edges, want 11"
        ));
    }
    Ok(format!("{mutag}; {adv}"))
}

// ---------------------------------------------------------------------------
// Worked explanation example

pub const WORKED_VOTES: [u64; 12] = [10, 20, 50, 80, 23, 1, 0, 0, 0, 1, 45, 0];

pub fn worked_roles() -> [Hypervector; 3] {
    [
        Hypervector::from_bits(&[0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 1, 0]),
        Hypervector::from_bits(&[0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1]),
        Hypervector::from_bits(&[0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 1, 0]),
    ]
}

/// Bank where clause `j` holds the single literal `x_j`; in weighted form
/// its class-0 weight is the target count, in unweighted form bit `j` gets
/// that many unit-weight clauses.
pub fn worked_model(mode: VoteMode) -> CotmModel {
    let clauses: Vec<(usize, i32)> = match mode {
        VoteMode::Weighted => WORKED_VOTES
            .iter()
            .enumerate()
            .map(|(j, &c)| (j, c as i32))
            .collect(),
        VoteMode::Unweighted => WORKED_VOTES
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat_n((j, 1), c as usize))
            .collect(),
    };
    let config = CotmConfig {
        clauses: clauses.len(),
        classes: 2,
        ..CotmConfig::default()
    };
    let mut bank = ClauseBank::new(clauses.len(), 12, config.states_per_action).unwrap();
    let mut weights = ClassWeights::zeros(2, clauses.len());
    for (c, &(bit, w)) in clauses.iter().enumerate() {
        bank.set_included(c, bit, true).unwrap();
        weights.set(c, 0, w);
        weights.set(c, 1, -1);
    }
    CotmModel::from_parts(config, bank, weights).unwrap()
}

pub fn worked_example() -> Check {
    let x = Hypervector::from_bits(&[1; 12]);
    for mode in [VoteMode::Weighted, VoteMode::Unweighted] {
        let model = worked_model(mode);
        let predicted = model.predict(&x).map_err(fail)?;
        let active = model.active_clauses(&x, predicted).map_err(fail)?;
        let votes = aggregate_literal_votes(model.bank(), &active, mode);
        if votes.counts() != WORKED_VOTES {
            return Err(format!("{mode:?} votes {:?}", votes.counts()));
        }
        let v_pred = binarize_votes(&votes, 1.0 / 3.0).map_err(fail)?;
        let bits: Vec<usize> = v_pred.ones().collect();
        if bits != [2, 3, 4, 10] {
            return Err(format!("{mode:?} binarized to {bits:?}"));
        }
        let (distances, winner) = nearest(&v_pred, &worked_roles()).map_err(fail)?;
        // v1 differs from v_pred in exactly bits 3 and 5.
        if distances != [2, 6, 0] || winner != 2 {
            return Err(format!(
                "{mode:?} distances {distances:?}, winner v{}",
                winner + 1
            ));
        }
    }
    Ok("bits {2,3,4,10}; distances v1=2 v2=6 v3=0; winner v3".into())
}

// ---------------------------------------------------------------------------
// Benchmarks

pub fn dataset_present(name: &str) -> Option<PathBuf> {
    let dir = data_dir();
    [dir.clone(), dir.join(name)]
        .into_iter()
        .find(|d| d.join(format!("{name}_A.txt")).exists())
}

pub enum Bench {
    Pass(String),
    Fail(String),
    Skip(String),
}

pub fn benchmark(name: &str, min_mean: f64, max_secs: f64) -> Bench {
    let Some(dir) = dataset_present(name) else {
        return Bench::Skip(format!("{name} not found under {}", data_dir().display()));
    };
    let started = Instant::now();
    let corpus = match load_tu_dataset(&dir, name) {
        Ok(c) => c,
        Err(e) => return Bench::Fail(e.to_string()),
    };
    let cfg = ExperimentConfig::paper(&dir, name);
    let report = match run_bench(&corpus, &cfg) {
        Ok(r) => r,
        Err(e) => return Bench::Fail(e.to_string()),
    };
    let secs = started.elapsed().as_secs_f64();
    let detail = format!(
        "mean {:.3} +/- {:.3} over {} seeds in {secs:.1}s (need >= {min_mean:.2}, <= {max_secs:.0}s)",
        report.mean,
        report.std,
        report.seeds.len()
    );
    if report.mean >= min_mean && secs <= max_secs {
        Bench::Pass(detail)
    } else {
        Bench::Fail(detail)
    }
}
