//! Self-describing binary checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//! `"CGCK"`, version, entry count, then per entry the name length, the
//! UTF-8 name, the rank, each dimension, and the raw `f32` data. Strings
//! are stored one byte per float; integers and RNG states are bit-cast
//! into 32-bit words.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::networks::{ModelState, Network, NetworkSpec};
use crate::objectives::LossBreakdown;
use crate::tensor::Tensor;
use crate::trainer::{
    AdamState, Buffers, Optimizers, ReplayBuffer, RngState, StepRecord, Trainer, TrainingConfig,
};

use super::config::{training_from_text, training_to_text};

pub const MAGIC: &[u8; 4] = b"CGCK";
pub const VERSION: u32 = 1;

const NETS: [&str; 4] = ["G", "F", "D_X", "D_Y"];

/// The ordered named tensors of a checkpoint file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckpointRecord {
    pub entries: Vec<(String, Tensor<f32>)>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}

fn words_tensor(words: &[u32]) -> Tensor<f32> {
    Tensor::new(vec![words.len()], words.iter().map(|&w| f32::from_bits(w)).collect())
        .expect("rank-1 shape")
}

fn string_tensor(s: &str) -> Tensor<f32> {
    Tensor::new(vec![s.len()], s.bytes().map(f32::from).collect()).expect("rank-1 shape")
}

fn u64_words(v: u64) -> [u32; 2] {
    [v as u32, (v >> 32) as u32]
}

fn f64_words(v: f64) -> [u32; 2] {
    u64_words(v.to_bits())
}

impl CheckpointRecord {
    pub fn push(&mut self, name: impl Into<String>, t: Tensor<f32>) {
        self.entries.push((name.into(), t));
    }

    pub fn push_words(&mut self, name: impl Into<String>, words: &[u32]) {
        self.push(name, words_tensor(words));
    }

    pub fn push_str(&mut self, name: impl Into<String>, s: &str) {
        self.push(name, string_tensor(s));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<f32>> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| corrupt(format!("missing entry `{name}`")))
    }

    pub fn words(&self, name: &str) -> Result<Vec<u32>> {
        Ok(self.get(name)?.data().iter().map(|v| v.to_bits()).collect())
    }

    fn fixed_words<const N: usize>(&self, name: &str) -> Result<[u32; N]> {
        let w = self.words(name)?;
        w.as_slice()
            .try_into()
            .map_err(|_| corrupt(format!("`{name}` has {} words, expected {N}", w.len())))
    }

    fn u64_of(&self, name: &str) -> Result<u64> {
        let [lo, hi] = self.fixed_words::<2>(name)?;
        Ok(lo as u64 | (hi as u64) << 32)
    }

    pub fn string(&self, name: &str) -> Result<String> {
        let bytes = self
            .get(name)?
            .data()
            .iter()
            .map(|&v| {
                if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                    Ok(v as u8)
                } else {
                    Err(corrupt(format!("`{name}` holds a non-byte value {v}")))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        String::from_utf8(bytes).map_err(|_| corrupt(format!("`{name}` is not UTF-8")))
    }

    fn collect_prefixed(&self, prefix: &str) -> Vec<Tensor<f32>> {
        self.entries
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, t)| t.clone())
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let count = u32::try_from(self.entries.len()).map_err(|_| Error::invalid("too many entries"))?;
        out.extend_from_slice(&count.to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                let d = u32::try_from(d).map_err(|_| Error::invalid("dimension exceeds u32"))?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(corrupt("bad magic, not a checkpoint file"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(corrupt(format!(
                "unsupported checkpoint version {version} (this build reads {VERSION})"
            )));
        }
        let count = r.u32("entry count")?;
        let mut entries = Vec::new();
        for i in 0..count {
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "entry name")?)
                .map_err(|_| corrupt(format!("entry {i} name is not UTF-8")))?
                .to_string();
            let rank = r.u32("rank")? as usize;
            if rank > 8 {
                return Err(corrupt(format!("`{name}` has implausible rank {rank}")));
            }
            let shape = (0..rank)
                .map(|_| r.u32("dimension").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&n| n <= (r.bytes.len() - r.pos) / 4)
                .ok_or_else(|| corrupt(format!("`{name}` is truncated")))?;
            let data = r
                .take(numel * 4, "tensor data")?
                .chunks_exact(4)
                .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            entries.push((name, Tensor::new(shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(CheckpointRecord { entries })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(corrupt(format!("truncated while reading {what} at byte {}", self.pos)));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn push_model(rec: &mut CheckpointRecord, model: &ModelState) {
    rec.push_str("meta.generator", &model.g.spec.descriptor());
    rec.push_str("meta.discriminator", &model.d_x.spec.descriptor());
    rec.push_words("meta.model_seed", &u64_words(model.seed));
    for (net, n) in model.networks() {
        for (shape, p) in n.param_shapes().iter().zip(&n.params) {
            rec.push(format!("param.{net}.{}", shape.name), p.clone());
        }
    }
}

fn read_model(rec: &CheckpointRecord) -> Result<ModelState> {
    let gen = NetworkSpec::from_descriptor(&rec.string("meta.generator")?)
        .map_err(|e| corrupt(format!("generator spec: {e}")))?;
    let disc = NetworkSpec::from_descriptor(&rec.string("meta.discriminator")?)
        .map_err(|e| corrupt(format!("discriminator spec: {e}")))?;
    let net = |name: &str, spec: &NetworkSpec| -> Result<Network> {
        let params = spec
            .param_shapes()
            .iter()
            .map(|s| rec.get(&format!("param.{name}.{}", s.name)).cloned())
            .collect::<Result<Vec<_>>>()?;
        Network::from_parts(spec.clone(), params).map_err(|e| corrupt(format!("{name}: {e}")))
    };
    Ok(ModelState {
        g: net("G", &gen)?,
        f: net("F", &gen)?,
        d_x: net("D_X", &disc)?,
        d_y: net("D_Y", &disc)?,
        seed: rec.u64_of("meta.model_seed")?,
    })
}

const HISTORY_WORDS: usize = 24;

fn history_tensor(history: &[StepRecord]) -> Tensor<f32> {
    let mut words = Vec::with_capacity(history.len() * HISTORY_WORDS);
    for r in history {
        let l = &r.losses;
        words.extend(u64_words(r.step as u64));
        words.extend(u64_words(r.epoch as u64));
        for v in [
            r.lr, l.gan_g, l.gan_f, l.disc_x, l.disc_y, l.cyc, l.idt, l.total_gen, l.lambda,
            l.lambda_identity,
        ] {
            words.extend(f64_words(v));
        }
    }
    let data = words.into_iter().map(f32::from_bits).collect();
    Tensor::new(vec![history.len(), HISTORY_WORDS], data).expect("history shape")
}

fn read_history(t: &Tensor<f32>) -> Result<Vec<StepRecord>> {
    if t.shape().len() != 2 || t.shape()[1] != HISTORY_WORDS {
        return Err(corrupt(format!("history has shape {:?}", t.shape())));
    }
    let words: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
    Ok(words
        .chunks(HISTORY_WORDS)
        .map(|w| {
            let u = |i: usize| w[i] as u64 | (w[i + 1] as u64) << 32;
            let f = |k: usize| f64::from_bits(u(4 + 2 * k));
            StepRecord {
                step: u(0) as usize,
                epoch: u(2) as usize,
                lr: f(0),
                losses: LossBreakdown {
                    gan_g: f(1),
                    gan_f: f(2),
                    disc_x: f(3),
                    disc_y: f(4),
                    cyc: f(5),
                    idt: f(6),
                    total_gen: f(7),
                    lambda: f(8),
                    lambda_identity: f(9),
                },
            }
        })
        .collect())
}

/// Everything needed to resume `trainer` bit-exactly.
pub fn trainer_record(trainer: &Trainer) -> CheckpointRecord {
    let mut rec = CheckpointRecord::default();
    push_model(&mut rec, &trainer.model);
    rec.push_str("meta.config", &training_to_text(&trainer.config));
    rec.push_words("meta.epoch", &u64_words(trainer.epoch as u64));
    rec.push_words("meta.step", &u64_words(trainer.step as u64));
    let opt = &trainer.optimizers;
    for (net, adam) in NETS.iter().zip([&opt.g, &opt.f, &opt.d_x, &opt.d_y]) {
        rec.push_words(format!("adam.{net}.t"), &u64_words(adam.t));
        for (i, (m, v)) in adam.m.iter().zip(&adam.v).enumerate() {
            rec.push(format!("adam.{net}.m.{i:04}"), m.clone());
            rec.push(format!("adam.{net}.v.{i:04}"), v.clone());
        }
    }
    for (tag, buf) in [("x", &trainer.buffers.x), ("y", &trainer.buffers.y)] {
        rec.push_words(format!("buffer.{tag}.rng"), &RngState::capture(buf.rng()).to_words());
        for (i, img) in buf.images().iter().enumerate() {
            rec.push(format!("buffer.{tag}.image.{i:04}"), img.clone());
        }
    }
    rec.push_words("rng.data", &RngState::capture(&trainer.data_rng).to_words());
    rec.push("history", history_tensor(&trainer.history));
    rec
}

fn read_adam(rec: &CheckpointRecord, net: &str, params: &[Tensor<f32>]) -> Result<AdamState> {
    let m = rec.collect_prefixed(&format!("adam.{net}.m."));
    let v = rec.collect_prefixed(&format!("adam.{net}.v."));
    if m.len() != params.len() || v.len() != params.len() {
        return Err(corrupt(format!("optimizer state of {net} does not match its parameters")));
    }
    for ((p, m), v) in params.iter().zip(&m).zip(&v) {
        if m.shape() != p.shape() || v.shape() != p.shape() {
            return Err(corrupt(format!("optimizer moment shape mismatch in {net}")));
        }
    }
    Ok(AdamState { m, v, t: rec.u64_of(&format!("adam.{net}.t"))? })
}

pub fn trainer_from_record(rec: &CheckpointRecord) -> Result<Trainer> {
    let config: TrainingConfig = training_from_text(&rec.string("meta.config")?)
        .map_err(|e| corrupt(format!("config snapshot: {e}")))?;
    let model = read_model(rec)?;
    let optimizers = Optimizers {
        g: read_adam(rec, "G", &model.g.params)?,
        f: read_adam(rec, "F", &model.f.params)?,
        d_x: read_adam(rec, "D_X", &model.d_x.params)?,
        d_y: read_adam(rec, "D_Y", &model.d_y.params)?,
    };
    let buffer = |tag: &str| -> Result<ReplayBuffer> {
        let rng = RngState::from_words(&rec.fixed_words::<14>(&format!("buffer.{tag}.rng"))?).restore();
        let images = rec.collect_prefixed(&format!("buffer.{tag}.image."));
        if images.len() > config.buffer_capacity {
            return Err(corrupt(format!("buffer {tag} exceeds its capacity")));
        }
        Ok(ReplayBuffer::from_parts(config.buffer_capacity, images, rng))
    };
    let buffers = Buffers { x: buffer("x")?, y: buffer("y")? };
    Ok(Trainer {
        data_rng: RngState::from_words(&rec.fixed_words::<14>("rng.data")?).restore(),
        epoch: rec.u64_of("meta.epoch")? as usize,
        step: rec.u64_of("meta.step")? as usize,
        history: read_history(rec.get("history")?)?,
        config,
        model,
        optimizers,
        buffers,
    })
}

pub fn save_checkpoint(path: &Path, trainer: &Trainer) -> Result<()> {
    write_atomic(path, &trainer_record(trainer).to_bytes()?)
}

pub fn read_record(path: &Path) -> Result<CheckpointRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    CheckpointRecord::from_bytes(&bytes).map_err(|e| match e {
        Error::Corrupt(m) => Error::Corrupt(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
    trainer_from_record(&read_record(path)?)
}

/// Reads only the networks and, when present, the trained resolution.
pub fn load_model(path: &Path) -> Result<(ModelState, Option<usize>)> {
    let rec = read_record(path)?;
    let model = read_model(&rec)?;
    let resolution = match rec.string("meta.config") {
        Ok(text) => Some(training_from_text(&text).map_err(|e| corrupt(e.to_string()))?.resolution),
        Err(_) => None,
    };
    Ok((model, resolution))
}

/// A record holding only a model, as used by `translate`.
pub fn model_record(model: &ModelState) -> CheckpointRecord {
    let mut rec = CheckpointRecord::default();
    push_model(&mut rec, model);
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{make_synthetic_pair, SyntheticKind};
    use crate::objectives::Variant;
    use crate::trainer::NoCheckpoints;

    fn small_trainer() -> (Trainer, crate::datasets::DomainDataset, crate::datasets::DomainDataset) {
        let cfg = TrainingConfig {
            resolution: 32,
            base_filters: 4,
            disc_filters: 4,
            residual_blocks: Some(1),
            epochs_constant: 1,
            epochs_decay: 2,
            buffer_capacity: 3,
            variant: Variant::Full,
            lambda_identity: 1.0,
            seed: 3,
            ..Default::default()
        };
        let (dx, dy, _) = make_synthetic_pair(SyntheticKind::Invert, 2, 32, 0).unwrap();
        (Trainer::new(cfg).unwrap(), dx, dy)
    }

    #[test]
    fn header_layout() {
        let mut rec = CheckpointRecord::default();
        rec.push("w", Tensor::new(vec![2], vec![1.0, -2.0]).unwrap());
        let b = rec.to_bytes().unwrap();
        let mut expected = b"CGCK".to_vec();
        for w in [1u32, 1, 1] {
            expected.extend(w.to_le_bytes());
        }
        expected.push(b'w');
        for w in [1u32, 2] {
            expected.extend(w.to_le_bytes());
        }
        expected.extend(1.0f32.to_le_bytes());
        expected.extend((-2.0f32).to_le_bytes());
        assert_eq!(b, expected);
    }

    #[test]
    fn save_load_save_is_byte_identical_and_resumes_exactly() {
        let (mut t, dx, dy) = small_trainer();
        t.train_until(&dx, &dy, 1, &mut NoCheckpoints).unwrap();
        let a = trainer_record(&t).to_bytes().unwrap();
        let back = trainer_from_record(&CheckpointRecord::from_bytes(&a).unwrap()).unwrap();
        assert_eq!(trainer_record(&back).to_bytes().unwrap(), a);

        let mut uninterrupted = t.clone();
        uninterrupted.train(&dx, &dy, &mut NoCheckpoints).unwrap();
        let mut resumed = back;
        resumed.train(&dx, &dy, &mut NoCheckpoints).unwrap();
        assert_eq!(resumed.history, uninterrupted.history);
        assert_eq!(resumed.model, uninterrupted.model);
    }

    #[test]
    fn corruption_is_reported_not_panicked() {
        let (t, _, _) = small_trainer();
        let bytes = trainer_record(&t).to_bytes().unwrap();
        for cut in [0, 3, 7, 11, 20, bytes.len() / 2, bytes.len() - 1] {
            let err = CheckpointRecord::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Corrupt(_)), "cut {cut}: {err}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(CheckpointRecord::from_bytes(&bad), Err(Error::Corrupt(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        let err = CheckpointRecord::from_bytes(&bad).unwrap_err();
        assert!(err.to_string().contains("version 2"), "{err}");
        let mut long = bytes;
        long.push(0);
        assert!(matches!(CheckpointRecord::from_bytes(&long), Err(Error::Corrupt(_))));
    }

    #[test]
    fn missing_entries_are_corruption() {
        let (t, _, _) = small_trainer();
        let mut rec = trainer_record(&t);
        rec.entries.retain(|(n, _)| n != "rng.data");
        assert!(matches!(trainer_from_record(&rec), Err(Error::Corrupt(_))));
    }

    #[test]
    fn model_only_record_loads() {
        let (t, _, _) = small_trainer();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.cgck");
        write_atomic(&path, &model_record(&t.model).to_bytes().unwrap()).unwrap();
        let (m, res) = load_model(&path).unwrap();
        assert_eq!(m, t.model);
        assert_eq!(res, None);
        save_checkpoint(&path, &t).unwrap();
        assert_eq!(load_model(&path).unwrap().1, Some(32));
    }
}
