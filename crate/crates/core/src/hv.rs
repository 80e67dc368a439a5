//! Sparse binary hypervectors and their algebra.
//!
//! A [`Hypervector`] is a bit-packed vector of dimension `D`. Vectors sampled
//! from a codebook or produced by [`bundle`] carry exactly `K` active bits;
//! [`bind`] (XOR) does not preserve `K` and densifies its output, so
//! sparsity is only restored at the next bundle.

use std::fmt;

use rand::Rng;

use crate::error::{check_dims, invalid, Result};

const WORD_BITS: usize = 64;

fn words_for(dim: usize) -> usize {
    dim.div_ceil(WORD_BITS)
}

/// Fixed-dimension binary vector stored as 64-bit words, least significant
/// bit first. Bits past `dim` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Hypervector {
    dim: usize,
    words: Vec<u64>,
}

impl Hypervector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            words: vec![0; words_for(dim)],
        }
    }

    pub fn from_indices(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v = Self::zeros(dim);
        for i in indices {
            if i >= dim {
                return Err(invalid(format!(
                    "bit index {i} out of range for dimension {dim}"
                )));
            }
            v.set(i, true);
        }
        Ok(v)
    }

    /// Builds a vector from a slice of 0/1 values.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b != 0);
        }
        v
    }

    pub fn from_words(dim: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(dim) {
            return Err(invalid(format!(
                "{} words cannot hold a {dim}-bit vector",
                words.len()
            )));
        }
        let mut v = Self { dim, words };
        v.clear_tail();
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.dim, "bit {i} out of range");
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.dim, "bit {i} out of range");
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD_BITS + bit)
            })
        })
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.dim).map(|i| u8::from(self.get(i))).collect()
    }

    /// Lowercase hex of the packed words, each word big-endian, words in order.
    pub fn to_hex(&self) -> String {
        self.words.iter().map(|w| format!("{w:016x}")).collect()
    }

    pub fn from_hex(dim: usize, hex: &str) -> Result<Self> {
        let hex = hex.trim();
        if hex.len() != words_for(dim) * 16 {
            return Err(invalid(format!(
                "hex payload of {} chars does not match dimension {dim}",
                hex.len()
            )));
        }
        let words = (0..hex.len())
            .step_by(16)
            .map(|i| u64::from_str_radix(&hex[i..i + 16], 16))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("bad hex payload: {e}")))?;
        Self::from_words(dim, words)
    }

    fn clear_tail(&mut self) {
        let rem = self.dim % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for Hypervector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim <= 64 {
            let bits: String = (0..self.dim)
                .map(|i| if self.get(i) { '1' } else { '0' })
                .collect();
            write!(f, "Hypervector({bits})")
        } else {
            write!(
                f,
                "Hypervector(dim={}, popcount={})",
                self.dim,
                self.popcount()
            )
        }
    }
}

/// Samples a vector with exactly `k` active bits chosen uniformly.
pub fn random_sparse<R: Rng + ?Sized>(dim: usize, k: usize, rng: &mut R) -> Result<Hypervector> {
    if dim == 0 || k == 0 || k > dim {
        return Err(invalid(format!("need 0 < k <= dim, got k={k}, dim={dim}")));
    }
    let picks = rand::seq::index::sample(rng, dim, k);
    Hypervector::from_indices(dim, picks.iter())
}

/// Element-wise XOR.
pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    check_dims(a.dim, b.dim)?;
    Ok(Hypervector {
        dim: a.dim,
        words: a.words.iter().zip(&b.words).map(|(x, y)| x ^ y).collect(),
    })
}

/// In-place XOR, `a ^= b`.
pub fn bind_assign(a: &mut Hypervector, b: &Hypervector) -> Result<()> {
    check_dims(a.dim, b.dim)?;
    a.words.iter_mut().zip(&b.words).for_each(|(x, y)| *x ^= y);
    Ok(())
}

/// Number of differing bits.
pub fn hamming(a: &Hypervector, b: &Hypervector) -> Result<usize> {
    check_dims(a.dim, b.dim)?;
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Per-bit vote counts accumulated from weighted hypervectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteVector {
    counts: Vec<u64>,
}

impl VoteVector {
    pub fn new(dim: usize) -> Self {
        Self {
            counts: vec![0; dim],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn add(&mut self, index: usize, amount: u64) {
        self.counts[index] += amount;
    }

    /// `counts[j] += weight * v[j]`.
    pub fn accumulate(&mut self, v: &Hypervector, weight: u64) -> Result<()> {
        check_dims(self.dim(), v.dim)?;
        if weight == 0 {
            return Err(invalid("accumulate weight must be positive"));
        }
        for i in v.ones() {
            self.counts[i] += weight;
        }
        Ok(())
    }
}

/// Keeps the `k` highest-count positions. Ties at the cut go to the lowest
/// bit index, so the output always has exactly `k` bits set.
pub fn bundle(votes: &VoteVector, k: usize) -> Result<Hypervector> {
    let dim = votes.dim();
    if k > dim {
        return Err(invalid(format!("bundle k={k} exceeds dimension {dim}")));
    }
    let mut order: Vec<usize> = (0..dim).collect();
    if k == 0 {
        return Ok(Hypervector::zeros(dim));
    }
    if k < dim {
        // (count desc, index asc) is a strict total order, so selection is deterministic.
        order.select_nth_unstable_by(k - 1, |&a, &b| {
            votes.counts[b].cmp(&votes.counts[a]).then(a.cmp(&b))
        });
    }
    Hypervector::from_indices(dim, order[..k].iter().copied())
}

/// Unweighted bundle of a set of vectors.
pub fn bundle_all<'a>(
    vectors: impl IntoIterator<Item = &'a Hypervector>,
    dim: usize,
    k: usize,
) -> Result<Hypervector> {
    let mut votes = VoteVector::new(dim);
    for v in vectors {
        votes.accumulate(v, 1)?;
    }
    bundle(&votes, k)
}
