//! Versioned binary model artifact.
//!
//! Layout (all integers little-endian); see `docs/model-format.md`:
//!
//! ```text
//! magic     8 bytes  "HVGCOTM\0"
//! version   u8       1
//! codebooks seed u64, dim u32, k u32, scalar_levels u32, rank_levels u32,
//!           alpha f64, beta f64,
//!           node bound count u32, (lo f64, hi f64)*,
//!           edge bound count u32, (lo f64, hi f64)*
//! encoder   layers u8, weighting u8 (0 uniform, 1 rank)
//! cotm      clauses u32, threshold i32, specificity f64, max_literals u32,
//!           classes u32, states_per_action u32, epochs u32, seed u64, boost u8
//! dataset   name length u32, UTF-8 name, class count u32, class value i64*
//! states    width u8 (1 or 2), then clauses x 2D values (state - 1), clause-major
//! weights   classes x clauses i32, class-major
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::cotm::{ClassWeights, ClauseBank, CotmConfig, CotmModel};
use crate::embeddings::CodebookParams;
use crate::encoder::{EncoderConfig, Weighting};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HVGCOTM\0";
pub const VERSION: u8 = 1;

/// A trained model plus what is needed to encode new graphs for it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelArtifact {
    pub dataset: String,
    pub class_values: Vec<i64>,
    pub codebooks: CodebookParams,
    pub encoder: EncoderConfig,
    pub model: CotmModel,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Artifact(msg.into())
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| corrupt(format!("{n} does not fit in u32")))
}

impl ModelArtifact {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u8(VERSION)?;

        let cb = &self.codebooks;
        w.write_u64::<LE>(cb.seed)?;
        for v in [cb.dim, cb.k, cb.scalar_levels, cb.rank_levels] {
            w.write_u32::<LE>(u32_of(v)?)?;
        }
        w.write_f64::<LE>(cb.alpha)?;
        w.write_f64::<LE>(cb.beta)?;
        for bounds in [&cb.node_attr_bounds, &cb.edge_attr_bounds] {
            w.write_u32::<LE>(u32_of(bounds.len())?)?;
            for &(lo, hi) in bounds {
                w.write_f64::<LE>(lo)?;
                w.write_f64::<LE>(hi)?;
            }
        }

        w.write_u8(self.encoder.layers as u8)?;
        w.write_u8(match self.encoder.weighting {
            Weighting::Uniform => 0,
            Weighting::Rank => 1,
        })?;

        let c = self.model.config();
        w.write_u32::<LE>(u32_of(c.clauses)?)?;
        w.write_i32::<LE>(c.threshold)?;
        w.write_f64::<LE>(c.specificity)?;
        w.write_u32::<LE>(u32_of(c.max_literals)?)?;
        w.write_u32::<LE>(u32_of(c.classes)?)?;
        w.write_u32::<LE>(c.states_per_action)?;
        w.write_u32::<LE>(u32_of(c.epochs)?)?;
        w.write_u64::<LE>(c.seed)?;
        w.write_u8(u8::from(c.boost_true_positive))?;

        w.write_u32::<LE>(u32_of(self.dataset.len())?)?;
        w.write_all(self.dataset.as_bytes())?;
        w.write_u32::<LE>(u32_of(self.class_values.len())?)?;
        for &v in &self.class_values {
            w.write_i64::<LE>(v)?;
        }

        let bank = self.model.bank();
        let wide = 2 * bank.states_per_action() > 256;
        w.write_u8(if wide { 2 } else { 1 })?;
        for clause in 0..bank.clauses() {
            for s in bank.states(clause) {
                if wide {
                    w.write_u16::<LE>((s - 1) as u16)?;
                } else {
                    w.write_u8((s - 1) as u8)?;
                }
            }
        }
        for &wt in self.model.weights().as_slice() {
            w.write_i32::<LE>(wt)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic header"));
        }
        let version = r.read_u8()?;
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }

        let seed = r.read_u64::<LE>()?;
        let dim = r.read_u32::<LE>()? as usize;
        let k = r.read_u32::<LE>()? as usize;
        let scalar_levels = r.read_u32::<LE>()? as usize;
        let rank_levels = r.read_u32::<LE>()? as usize;
        let alpha = r.read_f64::<LE>()?;
        let beta = r.read_f64::<LE>()?;
        let read_bounds = |r: &mut R| -> Result<Vec<(f64, f64)>> {
            let n = r.read_u32::<LE>()?;
            (0..n)
                .map(|_| Ok((r.read_f64::<LE>()?, r.read_f64::<LE>()?)))
                .collect()
        };
        let node_attr_bounds = read_bounds(r)?;
        let edge_attr_bounds = read_bounds(r)?;
        let codebooks = CodebookParams {
            seed,
            dim,
            k,
            scalar_levels,
            rank_levels,
            alpha,
            beta,
            node_attr_bounds,
            edge_attr_bounds,
        };

        let layers = r.read_u8()? as usize;
        let weighting = match r.read_u8()? {
            0 => Weighting::Uniform,
            1 => Weighting::Rank,
            other => return Err(corrupt(format!("unknown weighting code {other}"))),
        };
        let encoder = EncoderConfig { layers, weighting };
        encoder.validate()?;

        let config = CotmConfig {
            clauses: r.read_u32::<LE>()? as usize,
            threshold: r.read_i32::<LE>()?,
            specificity: r.read_f64::<LE>()?,
            max_literals: r.read_u32::<LE>()? as usize,
            classes: r.read_u32::<LE>()? as usize,
            states_per_action: r.read_u32::<LE>()?,
            epochs: r.read_u32::<LE>()? as usize,
            seed: r.read_u64::<LE>()?,
            boost_true_positive: r.read_u8()? != 0,
        };
        config.validate()?;

        let name_len = r.read_u32::<LE>()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let dataset = String::from_utf8(name).map_err(|_| corrupt("dataset name is not UTF-8"))?;
        let classes = r.read_u32::<LE>()?;
        let class_values = (0..classes)
            .map(|_| r.read_i64::<LE>())
            .collect::<std::io::Result<Vec<_>>>()?;

        let width = r.read_u8()?;
        let mut bank = ClauseBank::new(config.clauses, dim, config.states_per_action)?;
        let literals = bank.literals();
        for clause in 0..config.clauses {
            for literal in 0..literals {
                let stored = match width {
                    1 => u32::from(r.read_u8()?),
                    2 => u32::from(r.read_u16::<LE>()?),
                    other => return Err(corrupt(format!("bad state width {other}"))),
                };
                bank.set_state(clause, literal, stored + 1)
                    .map_err(|e| corrupt(e.to_string()))?;
            }
        }
        let weights = (0..config.classes * config.clauses)
            .map(|_| r.read_i32::<LE>())
            .collect::<std::io::Result<Vec<_>>>()?;
        let weights = ClassWeights::from_vec(config.classes, config.clauses, weights)?;
        let model = CotmModel::from_parts(config, bank, weights)?;

        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(corrupt("trailing bytes after weights"));
        }
        Ok(Self {
            dataset,
            class_values,
            codebooks,
            encoder,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|source| Error::Load {
            path: path.to_owned(),
            source,
        })?;
        Self::read_from(&mut BufReader::new(file))
    }
}
