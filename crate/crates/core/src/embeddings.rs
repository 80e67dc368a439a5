//! Codebooks mapping feature values to hypervectors.
//!
//! Three strategies are provided: categorical (one independent random vector
//! per key), interval (one independent random vector per discrete level) and
//! linear (a chain of level vectors where neighbouring levels share most of
//! their active bits). All codebooks are pure functions of their parameters
//! and master seed.

use std::borrow::Cow;
use std::collections::HashMap;

use rand::seq::index;

use crate::error::{invalid, Result};
use crate::hv::{self, bind, Hypervector, VoteVector};
use crate::seed::{self, Rng};

pub const NODE_LABEL: &str = "node_label";
pub const EDGE_LABEL: &str = "edge_label";
pub const EDGE_ROLE: &str = "edge_role";
pub const IMPORTANCE: &str = "importance";
pub const NODE_ATTR_DIM: &str = "node_attr_dim";
pub const EDGE_ATTR_DIM: &str = "edge_attr_dim";
const NODE_ATTR_LEVELS: &str = "node_attr_levels";
const EDGE_ATTR_LEVELS: &str = "edge_attr_levels";

pub const DEFAULT_SCALAR_LEVELS: usize = 100;
pub const DEFAULT_RANK_LEVELS: usize = 32;
pub const DEFAULT_ALPHA: f64 = 0.02;
pub const DEFAULT_BETA: f64 = 0.005;

fn check_shape(dim: usize, k: usize) -> Result<()> {
    if dim == 0 || k == 0 || k > dim {
        return Err(invalid(format!("need 0 < k <= dim, got k={k}, dim={dim}")));
    }
    Ok(())
}

/// The vector for key `(namespace, label)` under `master`.
pub fn keyed_vector(master: u64, dim: usize, k: usize, namespace: &str, label: i64) -> Hypervector {
    hv::random_sparse(dim, k, &mut seed::stream(master, namespace, label))
        .expect("codebook shape validated at construction")
}

/// Lazily materialized mapping from `(namespace, label)` keys to vectors.
///
/// Lookups never fail: keys that were not materialized are generated on the
/// fly from their seed stream, so the cache only affects speed.
#[derive(Clone, Debug)]
pub struct CategoricalCodebook {
    dim: usize,
    k: usize,
    seed: u64,
    cache: HashMap<(String, i64), Hypervector>,
}

impl CategoricalCodebook {
    pub fn new(dim: usize, k: usize, seed: u64) -> Result<Self> {
        check_shape(dim, k)?;
        Ok(Self {
            dim,
            k,
            seed,
            cache: HashMap::new(),
        })
    }

    pub fn materialize(&mut self, namespace: &str, label: i64) {
        let (dim, k, seed) = (self.dim, self.k, self.seed);
        self.cache
            .entry((namespace.to_owned(), label))
            .or_insert_with(|| keyed_vector(seed, dim, k, namespace, label));
    }

    pub fn embed(&self, namespace: &str, label: i64) -> Cow<'_, Hypervector> {
        match self.cache.get(&(namespace.to_owned(), label)) {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(keyed_vector(self.seed, self.dim, self.k, namespace, label)),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }

    pub fn materialized(&self) -> impl Iterator<Item = (&(String, i64), &Hypervector)> {
        self.cache.iter()
    }
}

/// Quantization and flip parameters for a linear codebook.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearParams {
    pub lower: f64,
    pub upper: f64,
    pub levels: usize,
    /// Continuity flip rate, applied to `K`.
    pub alpha: f64,
    /// Noise flip rate, applied to `K`.
    pub beta: f64,
}

impl LinearParams {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            levels: DEFAULT_SCALAR_LEVELS,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }

    /// Bits swapped between consecutive levels: `round((alpha + beta) * k)`.
    pub fn swaps(&self, k: usize) -> usize {
        ((self.alpha + self.beta) * k as f64).round() as usize
    }
}

/// Chain of level vectors over `[lower, upper]`.
#[derive(Clone, Debug)]
pub struct LinearCodebook {
    params: LinearParams,
    levels: Vec<Hypervector>,
}

impl LinearCodebook {
    /// Samples level 0 at random, then derives each next level by turning off
    /// `S` random active bits and turning on `S` random inactive ones.
    pub fn build(params: LinearParams, dim: usize, k: usize, rng: &mut Rng) -> Result<Self> {
        check_shape(dim, k)?;
        let LinearParams {
            lower,
            upper,
            levels,
            alpha,
            beta,
        } = params;
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(invalid(format!(
                "linear domain needs a < b, got [{lower}, {upper}]"
            )));
        }
        if levels < 2 {
            return Err(invalid(format!(
                "linear codebook needs q >= 2, got {levels}"
            )));
        }
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(invalid("flip rates must be non-negative"));
        }
        let swaps = params.swaps(k);
        if swaps == 0 || swaps > k || swaps > dim - k {
            return Err(invalid(format!(
                "flip count {swaps} must lie in 1..={} for k={k}, dim={dim}",
                k.min(dim - k)
            )));
        }

        let mut chain = Vec::with_capacity(levels);
        chain.push(hv::random_sparse(dim, k, rng)?);
        for _ in 1..levels {
            let prev = chain.last().expect("non-empty");
            let active: Vec<usize> = prev.ones().collect();
            let inactive: Vec<usize> = (0..dim).filter(|&i| !prev.get(i)).collect();
            let mut next = prev.clone();
            for i in index::sample(rng, active.len(), swaps) {
                next.set(active[i], false);
            }
            for i in index::sample(rng, inactive.len(), swaps) {
                next.set(inactive[i], true);
            }
            chain.push(next);
        }
        Ok(Self {
            params,
            levels: chain,
        })
    }

    pub fn params(&self) -> &LinearParams {
        &self.params
    }

    pub fn levels(&self) -> &[Hypervector] {
        &self.levels
    }

    /// Partition index of `x`, clamped to the domain and capped at `Q - 1`.
    pub fn level_of(&self, x: f64) -> usize {
        let LinearParams { lower, upper, .. } = self.params;
        let q = self.levels.len();
        let x = if x.is_nan() {
            lower
        } else {
            x.clamp(lower, upper)
        };
        let delta = (upper - lower) / q as f64;
        (((x - lower) / delta).floor() as usize).min(q - 1)
    }

    pub fn embed(&self, x: f64) -> &Hypervector {
        &self.levels[self.level_of(x)]
    }
}

/// Independent random vector per discrete level.
#[derive(Clone, Debug)]
pub struct IntervalCodebook {
    levels: Vec<Hypervector>,
}

impl IntervalCodebook {
    pub fn build(levels: usize, dim: usize, k: usize, seed: u64) -> Result<Self> {
        check_shape(dim, k)?;
        if levels == 0 {
            return Err(invalid("interval codebook needs at least one level"));
        }
        Ok(Self {
            levels: (0..levels)
                .map(|q| keyed_vector(seed, dim, k, IMPORTANCE, q as i64))
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Out-of-range levels clamp to the nearest valid level.
    pub fn embed(&self, level: i64) -> &Hypervector {
        let top = self.levels.len() as i64 - 1;
        &self.levels[level.clamp(0, top) as usize]
    }
}

/// Dimension-wise embedding of real attribute vectors: each coordinate's
/// level vector is bound with a per-coordinate role vector and the results
/// are bundled back to `K` active bits.
#[derive(Clone, Debug)]
pub struct AttributeEmbedding {
    k: usize,
    dims: Vec<(LinearCodebook, Hypervector)>,
}

impl AttributeEmbedding {
    fn build(
        bounds: &[(f64, f64)],
        template: LinearParams,
        dim: usize,
        k: usize,
        master: u64,
        levels_ns: &str,
        role_ns: &str,
    ) -> Result<Self> {
        let dims = bounds
            .iter()
            .enumerate()
            .map(|(j, &(lower, upper))| {
                let params = LinearParams {
                    lower,
                    upper,
                    ..template
                };
                let book = LinearCodebook::build(
                    params,
                    dim,
                    k,
                    &mut seed::stream(master, levels_ns, j as i64),
                )?;
                Ok((book, keyed_vector(master, dim, k, role_ns, j as i64)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k, dims })
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn codebook(&self, j: usize) -> &LinearCodebook {
        &self.dims[j].0
    }

    pub fn role(&self, j: usize) -> &Hypervector {
        &self.dims[j].1
    }

    /// `None` when there is nothing to embed.
    pub fn embed(&self, attrs: &[f64]) -> Result<Option<Hypervector>> {
        if attrs.is_empty() || self.dims.is_empty() {
            return Ok(None);
        }
        if attrs.len() != self.dims.len() {
            return Err(invalid(format!(
                "attribute vector has {} entries, codebook expects {}",
                attrs.len(),
                self.dims.len()
            )));
        }
        let dim = self.dims[0].1.dim();
        let mut votes = VoteVector::new(dim);
        for (x, (book, role)) in attrs.iter().zip(&self.dims) {
            votes.accumulate(&bind(book.embed(*x), role)?, 1)?;
        }
        Ok(Some(hv::bundle(&votes, self.k)?))
    }
}

/// Everything needed to rebuild a set of codebooks bit-identically.
#[derive(Clone, Debug, PartialEq)]
pub struct CodebookParams {
    pub seed: u64,
    pub dim: usize,
    pub k: usize,
    pub scalar_levels: usize,
    pub rank_levels: usize,
    pub alpha: f64,
    pub beta: f64,
    pub node_attr_bounds: Vec<(f64, f64)>,
    pub edge_attr_bounds: Vec<(f64, f64)>,
}

impl CodebookParams {
    pub fn new(seed: u64, dim: usize, k: usize) -> Self {
        Self {
            seed,
            dim,
            k,
            scalar_levels: DEFAULT_SCALAR_LEVELS,
            rank_levels: DEFAULT_RANK_LEVELS,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            node_attr_bounds: Vec::new(),
            edge_attr_bounds: Vec::new(),
        }
    }
}

/// Min/max per coordinate over a set of attribute vectors. Degenerate
/// coordinates (constant or absent) are widened to `[lo, lo + 1]`.
pub fn attribute_bounds<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Vec<(f64, f64)> {
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    for row in rows {
        if bounds.len() < row.len() {
            bounds.resize(row.len(), (f64::INFINITY, f64::NEG_INFINITY));
        }
        for (b, &x) in bounds.iter_mut().zip(row) {
            if x.is_finite() {
                b.0 = b.0.min(x);
                b.1 = b.1.max(x);
            }
        }
    }
    bounds
        .into_iter()
        .map(|(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) if lo < hi => (lo, hi),
            (true, _) => (lo, lo + 1.0),
            _ => (0.0, 1.0),
        })
        .collect()
}

/// The full set of codebooks used by the graph encoder.
#[derive(Clone, Debug)]
pub struct Codebooks {
    params: CodebookParams,
    pub categorical: CategoricalCodebook,
    pub importance: IntervalCodebook,
    pub node_attrs: AttributeEmbedding,
    pub edge_attrs: AttributeEmbedding,
}

impl Codebooks {
    pub fn build(params: CodebookParams) -> Result<Self> {
        let CodebookParams { seed, dim, k, .. } = params;
        let template = LinearParams {
            lower: 0.0,
            upper: 1.0,
            levels: params.scalar_levels,
            alpha: params.alpha,
            beta: params.beta,
        };
        let node_attrs = AttributeEmbedding::build(
            &params.node_attr_bounds,
            template,
            dim,
            k,
            seed,
            NODE_ATTR_LEVELS,
            NODE_ATTR_DIM,
        )?;
        let edge_attrs = AttributeEmbedding::build(
            &params.edge_attr_bounds,
            template,
            dim,
            k,
            seed,
            EDGE_ATTR_LEVELS,
            EDGE_ATTR_DIM,
        )?;
        Ok(Self {
            categorical: CategoricalCodebook::new(dim, k, seed)?,
            importance: IntervalCodebook::build(params.rank_levels, dim, k, seed)?,
            node_attrs,
            edge_attrs,
            params,
        })
    }

    pub fn params(&self) -> &CodebookParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn rank_levels(&self) -> usize {
        self.params.rank_levels
    }
}
