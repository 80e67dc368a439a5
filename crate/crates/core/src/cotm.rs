//! Coalesced Tsetlin Machine.
//!
//! One clause bank is shared by all classes; each class holds a signed
//! integer weight per clause and scores an input by the weighted sum of the
//! clauses that fire.
//!
//! Automaton states live in bit-sliced form: for each clause, plane `p`
//! holds bit `p` of the (zero-based) state of every literal, 64 literals to
//! a word. A literal is included when the top plane bit is set, so the
//! include mask of a clause is simply its top plane. Increments and
//! decrements are saturating ripple-carry adds over the planes.

use rand::seq::index;
use rand::{Rng, RngCore};

use crate::error::{check_dims, invalid, Result};
use crate::hv::Hypervector;
use crate::seed::{self, Rng as StreamRng};

/// Bits of probability resolution for random literal masks.
const MASK_PRECISION: u32 = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct CotmConfig {
    pub clauses: usize,
    /// Vote clipping bound `T`.
    pub threshold: i32,
    /// Specificity `s`.
    pub specificity: f64,
    pub max_literals: usize,
    pub classes: usize,
    /// States per action `N`; automata move in `1..=2N`. Must be a power of two.
    pub states_per_action: u32,
    pub epochs: usize,
    pub seed: u64,
    pub boost_true_positive: bool,
}

impl Default for CotmConfig {
    fn default() -> Self {
        Self {
            clauses: 500,
            threshold: 1000,
            specificity: 2.0,
            max_literals: 50,
            classes: 2,
            states_per_action: 128,
            epochs: 4,
            seed: 0,
            boost_true_positive: true,
        }
    }
}

impl CotmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clauses == 0 {
            return Err(invalid("need at least one clause"));
        }
        if self.threshold < 1 {
            return Err(invalid("threshold must be >= 1"));
        }
        // Written this way so that NaN is rejected too.
        if !matches!(
            self.specificity.partial_cmp(&1.0),
            Some(std::cmp::Ordering::Greater)
        ) {
            return Err(invalid("specificity must be > 1"));
        }
        if self.classes == 0 {
            return Err(invalid("need at least one class"));
        }
        let n = self.states_per_action;
        if !n.is_power_of_two() || !(1..=1 << 15).contains(&n) {
            return Err(invalid(
                "states per action must be a power of two in 1..=32768",
            ));
        }
        Ok(())
    }
}

/// Automaton states for every (clause, literal) pair.
///
/// Literal `l < D` is input bit `l`; literal `D + j` is the negation of bit `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClauseBank {
    clauses: usize,
    dim: usize,
    state_bits: usize,
    /// Words per plane: `2 * ceil(D / 64)`.
    plane_words: usize,
    planes: Vec<u64>,
}

impl ClauseBank {
    /// All automata start at state `N`, the last exclude state.
    pub fn new(clauses: usize, dim: usize, states_per_action: u32) -> Result<Self> {
        if !states_per_action.is_power_of_two() || !(1..=1 << 15).contains(&states_per_action) {
            return Err(invalid(
                "states per action must be a power of two in 1..=32768",
            ));
        }
        if dim == 0 {
            return Err(invalid("clause bank needs a positive dimension"));
        }
        let state_bits = (2 * states_per_action).trailing_zeros() as usize;
        let plane_words = 2 * dim.div_ceil(64);
        let mut bank = Self {
            clauses,
            dim,
            state_bits,
            plane_words,
            planes: vec![0; clauses * state_bits * plane_words],
        };
        let valid = bank.valid_mask();
        for c in 0..clauses {
            for p in 0..state_bits - 1 {
                bank.plane_mut(c, p).copy_from_slice(&valid);
            }
        }
        Ok(bank)
    }

    pub fn clauses(&self) -> usize {
        self.clauses
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn literals(&self) -> usize {
        2 * self.dim
    }

    pub fn states_per_action(&self) -> u32 {
        1 << (self.state_bits - 1)
    }

    fn half(&self) -> usize {
        self.plane_words / 2
    }

    fn plane(&self, c: usize, p: usize) -> &[u64] {
        let start = (c * self.state_bits + p) * self.plane_words;
        &self.planes[start..start + self.plane_words]
    }

    fn plane_mut(&mut self, c: usize, p: usize) -> &mut [u64] {
        let start = (c * self.state_bits + p) * self.plane_words;
        &mut self.planes[start..start + self.plane_words]
    }

    fn include_plane(&self, c: usize) -> &[u64] {
        self.plane(c, self.state_bits - 1)
    }

    /// Mask of real literal slots (the packed tails are padding).
    fn valid_mask(&self) -> Vec<u64> {
        let half = self.half();
        let mut half_mask = vec![u64::MAX; half];
        if !self.dim.is_multiple_of(64) {
            half_mask[half - 1] = (1u64 << (self.dim % 64)) - 1;
        }
        let mut mask = half_mask.clone();
        mask.extend(half_mask);
        mask
    }

    fn slot(&self, literal: usize) -> (usize, u64) {
        assert!(literal < self.literals(), "literal {literal} out of range");
        let (base, j) = if literal < self.dim {
            (0, literal)
        } else {
            (self.half(), literal - self.dim)
        };
        (base + j / 64, 1u64 << (j % 64))
    }

    /// Packed literal values `[x, !x]` for an input.
    pub fn literal_words(&self, x: &Hypervector) -> Result<Vec<u64>> {
        check_dims(self.dim, x.dim())?;
        let valid = self.valid_mask();
        let mut lits = Vec::with_capacity(self.plane_words);
        lits.extend_from_slice(x.words());
        lits.extend(
            x.words()
                .iter()
                .zip(&valid[self.half()..])
                .map(|(w, m)| !w & m),
        );
        Ok(lits)
    }

    /// State of one automaton, in `1..=2N`.
    pub fn state(&self, clause: usize, literal: usize) -> u32 {
        let (w, bit) = self.slot(literal);
        (0..self.state_bits)
            .map(|p| u32::from(self.plane(clause, p)[w] & bit != 0) << p)
            .sum::<u32>()
            + 1
    }

    pub fn set_state(&mut self, clause: usize, literal: usize, state: u32) -> Result<()> {
        let max = 2 * self.states_per_action();
        if !(1..=max).contains(&state) {
            return Err(invalid(format!("state {state} outside 1..={max}")));
        }
        let (w, bit) = self.slot(literal);
        let stored = state - 1;
        for p in 0..self.state_bits {
            let word = &mut self.plane_mut(clause, p)[w];
            if stored >> p & 1 == 1 {
                *word |= bit;
            } else {
                *word &= !bit;
            }
        }
        Ok(())
    }

    /// Moves a literal just across the include (`N + 1`) or exclude (`N`) boundary.
    pub fn set_included(&mut self, clause: usize, literal: usize, include: bool) -> Result<()> {
        let n = self.states_per_action();
        self.set_state(clause, literal, if include { n + 1 } else { n })
    }

    pub fn is_included(&self, clause: usize, literal: usize) -> bool {
        let (w, bit) = self.slot(literal);
        self.include_plane(clause)[w] & bit != 0
    }

    pub fn included_count(&self, clause: usize) -> usize {
        self.include_plane(clause)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Included literals in ascending literal order.
    pub fn included_literals(&self, clause: usize) -> Vec<usize> {
        let half = self.half();
        let mut out = Vec::new();
        for (wi, &w) in self.include_plane(clause).iter().enumerate() {
            let mut rest = w;
            while rest != 0 {
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                out.push(if wi < half {
                    wi * 64 + bit
                } else {
                    self.dim + (wi - half) * 64 + bit
                });
            }
        }
        out
    }

    /// Included positive literals, i.e. input bit indices the clause requires set.
    pub fn positive_literals(&self, clause: usize) -> impl Iterator<Item = usize> + '_ {
        self.included_literals(clause)
            .into_iter()
            .filter(|&l| l < self.dim)
    }

    pub fn states(&self, clause: usize) -> Vec<u32> {
        (0..self.literals())
            .map(|l| self.state(clause, l))
            .collect()
    }

    /// Clause output on packed literals. An empty clause outputs 1 while
    /// training and 0 at inference.
    pub fn eval_literals(&self, clause: usize, lits: &[u64], training: bool) -> bool {
        let mut any = false;
        for (&inc, &lit) in self.include_plane(clause).iter().zip(lits) {
            if inc & !lit != 0 {
                return false;
            }
            any |= inc != 0;
        }
        any || training
    }

    pub fn eval(&self, clause: usize, x: &Hypervector, training: bool) -> Result<bool> {
        let lits = self.literal_words(x)?;
        Ok(self.eval_literals(clause, &lits, training))
    }

    fn increment(&mut self, c: usize, mask: &[u64]) {
        let bits = self.state_bits;
        for (w, &m) in mask.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let mut carry = m;
            for p in 0..bits {
                let word = &mut self.plane_mut(c, p)[w];
                let next = *word ^ carry;
                carry &= *word;
                *word = next;
                if carry == 0 {
                    break;
                }
            }
            if carry != 0 {
                // Saturated: wrapped to zero, restore the maximum.
                for p in 0..bits {
                    self.plane_mut(c, p)[w] |= carry;
                }
            }
        }
    }

    fn decrement(&mut self, c: usize, mask: &[u64]) {
        let bits = self.state_bits;
        for (w, &m) in mask.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let mut borrow = m;
            for p in 0..bits {
                let word = &mut self.plane_mut(c, p)[w];
                let next = *word ^ borrow;
                borrow &= !*word;
                *word = next;
                if borrow == 0 {
                    break;
                }
            }
            if borrow != 0 {
                for p in 0..bits {
                    self.plane_mut(c, p)[w] &= !borrow;
                }
            }
        }
    }

    /// Increments under a literal budget: if the step would push the clause
    /// past `max_literals` included literals, only a random subset of the
    /// include-crossing automata may move.
    fn increment_capped<R: Rng + ?Sized>(
        &mut self,
        c: usize,
        mask: &mut [u64],
        max_literals: usize,
        rng: &mut R,
    ) {
        let top = self.state_bits - 1;
        let mut crossing: Vec<u64> = mask
            .iter()
            .zip(self.plane(c, top))
            .map(|(m, inc)| m & !inc)
            .collect();
        for p in 0..top {
            crossing
                .iter_mut()
                .zip(self.plane(c, p))
                .for_each(|(x, w)| *x &= w);
        }
        let total: usize = crossing.iter().map(|w| w.count_ones() as usize).sum();
        let budget = max_literals.saturating_sub(self.included_count(c));
        if total > budget {
            let mut positions = Vec::with_capacity(total);
            for (wi, &w) in crossing.iter().enumerate() {
                let mut rest = w;
                while rest != 0 {
                    positions.push((wi, rest & rest.wrapping_neg()));
                    rest &= rest - 1;
                }
            }
            mask.iter_mut().zip(&crossing).for_each(|(m, x)| *m &= !x);
            for i in index::sample(rng, positions.len(), budget) {
                let (wi, bit) = positions[i];
                mask[wi] |= bit;
            }
        }
        self.increment(c, mask);
    }

    /// Clamps every automaton of a clause to the exclude half, emptying it.
    pub fn reset_clause(&mut self, c: usize) {
        let valid = self.valid_mask();
        let top = self.state_bits - 1;
        for p in 0..top {
            self.plane_mut(c, p).copy_from_slice(&valid);
        }
        self.plane_mut(c, top).iter_mut().for_each(|w| *w = 0);
    }
}

/// Fills `out` with independent bits that are 1 with probability `p`,
/// resolved to `MASK_PRECISION` bits by composing uniform words.
fn fill_bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64, valid: &[u64], out: &mut [u64]) {
    let scale = 1u64 << MASK_PRECISION;
    let q = (p.clamp(0.0, 1.0) * scale as f64).round() as u64;
    if q == 0 {
        out.iter_mut().for_each(|w| *w = 0);
        return;
    }
    if q >= scale {
        out.copy_from_slice(valid);
        return;
    }
    let low = q.trailing_zeros();
    for (w, &m) in out.iter_mut().zip(valid) {
        let mut acc = 0u64;
        for bit in low..MASK_PRECISION {
            let r = rng.next_u64();
            acc = if q >> bit & 1 == 1 { acc | r } else { acc & r };
        }
        *w = acc & m;
    }
}

/// Per-class integer clause weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassWeights {
    classes: usize,
    clauses: usize,
    weights: Vec<i32>,
}

impl ClassWeights {
    pub fn zeros(classes: usize, clauses: usize) -> Self {
        Self {
            classes,
            clauses,
            weights: vec![0; classes * clauses],
        }
    }

    pub fn from_vec(classes: usize, clauses: usize, weights: Vec<i32>) -> Result<Self> {
        if weights.len() != classes * clauses {
            return Err(invalid("weight table has the wrong size"));
        }
        Ok(Self {
            classes,
            clauses,
            weights,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, clause: usize, class: usize) -> i32 {
        self.weights[class * self.clauses + clause]
    }

    pub fn set(&mut self, clause: usize, class: usize, w: i32) {
        self.weights[class * self.clauses + clause] = w;
    }

    pub fn class_row(&self, class: usize) -> &[i32] {
        &self.weights[class * self.clauses..(class + 1) * self.clauses]
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.weights
    }
}

/// A clause bank with its class weights and training configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct CotmModel {
    config: CotmConfig,
    bank: ClauseBank,
    weights: ClassWeights,
}

impl CotmModel {
    /// Fresh model: every clause empty, weights drawn uniformly from {-1, +1}.
    pub fn new(config: CotmConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let bank = ClauseBank::new(config.clauses, dim, config.states_per_action)?;
        let mut rng = seed::stream(config.seed, "cotm_weights", 0);
        let weights = (0..config.classes * config.clauses)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        let weights = ClassWeights::from_vec(config.classes, config.clauses, weights)?;
        Ok(Self {
            config,
            bank,
            weights,
        })
    }

    pub fn from_parts(config: CotmConfig, bank: ClauseBank, weights: ClassWeights) -> Result<Self> {
        config.validate()?;
        if bank.clauses() != config.clauses
            || weights.classes != config.classes
            || weights.clauses != config.clauses
        {
            return Err(invalid("model parts disagree with the configuration"));
        }
        if bank.states_per_action() != config.states_per_action {
            return Err(invalid("bank state depth disagrees with the configuration"));
        }
        Ok(Self {
            config,
            bank,
            weights,
        })
    }

    pub fn config(&self) -> &CotmConfig {
        &self.config
    }

    pub fn bank(&self) -> &ClauseBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut ClauseBank {
        &mut self.bank
    }

    pub fn weights(&self) -> &ClassWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut ClassWeights {
        &mut self.weights
    }

    pub fn dim(&self) -> usize {
        self.bank.dim()
    }

    pub fn clause_outputs(&self, x: &Hypervector, training: bool) -> Result<Vec<bool>> {
        let lits = self.bank.literal_words(x)?;
        Ok((0..self.bank.clauses())
            .map(|c| self.bank.eval_literals(c, &lits, training))
            .collect())
    }

    fn sums_from_outputs(&self, outputs: &[bool]) -> Vec<i64> {
        (0..self.config.classes)
            .map(|y| {
                self.weights
                    .class_row(y)
                    .iter()
                    .zip(outputs)
                    .filter(|(_, &o)| o)
                    .map(|(&w, _)| i64::from(w))
                    .sum()
            })
            .collect()
    }

    /// Unclipped weighted clause sums, one per class.
    pub fn class_sums(&self, x: &Hypervector) -> Result<Vec<i64>> {
        Ok(self.sums_from_outputs(&self.clause_outputs(x, false)?))
    }

    /// Highest class sum; ties go to the lowest class id.
    pub fn predict(&self, x: &Hypervector) -> Result<usize> {
        Ok(argmax(&self.class_sums(x)?))
    }

    /// Clauses that fire on `x` and carry positive weight for `class`.
    pub fn active_clauses(&self, x: &Hypervector, class: usize) -> Result<Vec<(usize, i32)>> {
        if class >= self.config.classes {
            return Err(invalid(format!("class {class} out of range")));
        }
        Ok(self
            .clause_outputs(x, false)?
            .into_iter()
            .enumerate()
            .filter(|&(c, fired)| fired && self.weights.get(c, class) > 0)
            .map(|(c, _)| (c, self.weights.get(c, class)))
            .collect())
    }

    pub fn accuracy(&self, data: &[(Hypervector, usize)]) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0;
        for (x, y) in data {
            if self.predict(x)? == *y {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }

    /// One pass over `data` in a fresh random order.
    pub fn train_epoch(
        &mut self,
        data: &[(Hypervector, usize)],
        rng: &mut StreamRng,
    ) -> Result<()> {
        if data.is_empty() {
            return Err(invalid("cannot train on an empty dataset"));
        }
        if let Some((_, y)) = data.iter().find(|(_, y)| *y >= self.config.classes) {
            return Err(invalid(format!(
                "label {y} >= class count {}",
                self.config.classes
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
        let mut scratch = Scratch::new(&self.bank);
        for i in order {
            let (x, y) = &data[i];
            self.train_sample(x, *y, rng, &mut scratch)?;
        }
        Ok(())
    }

    pub fn fit(
        &mut self,
        data: &[(Hypervector, usize)],
        epochs: usize,
        rng: &mut StreamRng,
    ) -> Result<()> {
        for _ in 0..epochs {
            self.train_epoch(data, rng)?;
        }
        Ok(())
    }

    fn train_sample(
        &mut self,
        x: &Hypervector,
        y: usize,
        rng: &mut StreamRng,
        scratch: &mut Scratch,
    ) -> Result<()> {
        let lits = self.bank.literal_words(x)?;
        let outputs: Vec<bool> = (0..self.bank.clauses())
            .map(|c| self.bank.eval_literals(c, &lits, true))
            .collect();
        let sums = self.sums_from_outputs(&outputs);
        let t = i64::from(self.config.threshold);

        let mut passes = vec![(y, true)];
        if self.config.classes > 1 {
            let mut neg = rng.gen_range(0..self.config.classes - 1);
            if neg >= y {
                neg += 1;
            }
            passes.push((neg, false));
        }

        for (class, toward) in passes {
            let clipped = sums[class].clamp(-t, t);
            let p = if toward {
                (t - clipped) as f64 / (2 * t) as f64
            } else {
                (t + clipped) as f64 / (2 * t) as f64
            };
            for (c, &fired) in outputs.iter().enumerate() {
                if rng.gen::<f64>() >= p {
                    continue;
                }
                let w = self.weights.get(c, class);
                if toward == (w >= 0) {
                    self.type_i(c, &lits, fired, rng, scratch);
                } else {
                    self.type_ii(c, &lits, fired, rng, scratch);
                }
                if fired {
                    self.weights
                        .set(c, class, if toward { w + 1 } else { w - 1 });
                }
            }
        }
        Ok(())
    }

    /// Recognition feedback: reinforce literals that match a firing clause,
    /// let everything else drift toward exclusion with probability `1/s`.
    fn type_i(
        &mut self,
        c: usize,
        lits: &[u64],
        fired: bool,
        rng: &mut StreamRng,
        scratch: &mut Scratch,
    ) {
        let s = self.config.specificity;
        fill_bernoulli(rng, 1.0 / s, &scratch.valid, &mut scratch.forget);
        if fired {
            if self.config.boost_true_positive {
                scratch.remember.copy_from_slice(lits);
            } else {
                fill_bernoulli(rng, (s - 1.0) / s, &scratch.valid, &mut scratch.remember);
                scratch
                    .remember
                    .iter_mut()
                    .zip(lits)
                    .for_each(|(m, l)| *m &= l);
            }
            scratch
                .forget
                .iter_mut()
                .zip(lits)
                .for_each(|(m, l)| *m &= !l);
            let mut remember = std::mem::take(&mut scratch.remember);
            self.bank
                .increment_capped(c, &mut remember, self.config.max_literals, rng);
            scratch.remember = remember;
        }
        self.bank.decrement(c, &scratch.forget);
    }

    /// Rejection feedback: a firing clause includes excluded literals that
    /// are 0 on this input, so it stops firing here.
    fn type_ii(
        &mut self,
        c: usize,
        lits: &[u64],
        fired: bool,
        rng: &mut StreamRng,
        scratch: &mut Scratch,
    ) {
        if !fired {
            return;
        }
        let include = self.bank.include_plane(c);
        for (((m, l), inc), v) in scratch
            .remember
            .iter_mut()
            .zip(lits)
            .zip(include)
            .zip(&scratch.valid)
        {
            *m = !l & !inc & v;
        }
        let mut mask = std::mem::take(&mut scratch.remember);
        self.bank
            .increment_capped(c, &mut mask, self.config.max_literals, rng);
        scratch.remember = mask;
    }
}

struct Scratch {
    valid: Vec<u64>,
    remember: Vec<u64>,
    forget: Vec<u64>,
}

impl Scratch {
    fn new(bank: &ClauseBank) -> Self {
        Self {
            valid: bank.valid_mask(),
            remember: vec![0; bank.plane_words],
            forget: vec![0; bank.plane_words],
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[i64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
