//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "HGCK"  u32 version  u32 count
//! count × { u32 name_len, name bytes, u32 rank, rank × u32 extent, f64 values }
//! ```
//!
//! Everything, including run metadata, is stored as named tensors. Integers
//! wider than 32 bits are split into 32-bit pieces (least significant first)
//! so they survive the trip through `f64` exactly; the experiment config is
//! stored one byte per value.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::optim::AdamState;
use crate::rng::{self, StreamState};
use crate::tensor::Tensor;
use crate::training::{Networks, Optimizers, Trainer};

pub const MAGIC: &[u8; 4] = b"HGCK";
pub const VERSION: u32 = 1;

pub type NamedTensors = Vec<(String, Tensor)>;

pub fn encode(tensors: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<NamedTensors> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::IncompatibleCheckpoint(format!(
            "format version {version}, this build reads {VERSION}"
        )));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::Format(format!("tensor name: {e}")))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|e| e as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        if n.checked_mul(8).is_none_or(|b| b > bytes.len()) {
            return Err(Error::Format(format!("tensor {name} is larger than the file")));
        }
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let t = Tensor::new(shape, data).map_err(|e| Error::Format(format!("tensor {name}: {e}")))?;
        out.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(out)
}

fn u64_parts(v: u64) -> Vec<f64> {
    vec![(v & 0xffff_ffff) as f64, (v >> 32) as f64]
}

fn parts_to_u128(parts: &[f64]) -> Result<u128> {
    let mut v: u128 = 0;
    for (i, &p) in parts.iter().enumerate() {
        if !(0.0..=u32::MAX as f64).contains(&p) || p.fract() != 0.0 {
            return Err(Error::Format(format!("integer piece {p} out of range")));
        }
        v |= (p as u128) << (32 * i);
    }
    Ok(v)
}

fn rng_tensor(s: StreamState) -> Tensor {
    let mut v = u64_parts(s.seed);
    v.extend(u64_parts(s.stream));
    v.extend(u64_parts(s.word_pos as u64));
    v.extend(u64_parts((s.word_pos >> 64) as u64));
    Tensor::vector(v)
}

fn rng_from(t: &Tensor) -> Result<StreamState> {
    let d = t.data();
    if d.len() != 8 {
        return Err(Error::Format("stream state needs 8 pieces".into()));
    }
    Ok(StreamState {
        seed: parts_to_u128(&d[0..2])? as u64,
        stream: parts_to_u128(&d[2..4])? as u64,
        word_pos: parts_to_u128(&d[4..8])?,
    })
}

/// Everything needed to resume or evaluate a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub step: u64,
    pub nets: Networks,
    pub opts: Optimizers,
    pub data_rng: StreamState,
    pub latent_rng: StreamState,
}

struct Lookup {
    items: NamedTensors,
    next: usize,
}

impl Lookup {
    // Entries are read in write order; a name out of place means the file
    // was written for a different layout.
    fn expect(&mut self, name: &str) -> Result<Tensor> {
        match self.items.get(self.next) {
            Some((n, t)) if n == name => {
                self.next += 1;
                Ok(t.clone())
            }
            Some((n, _)) => Err(Error::IncompatibleCheckpoint(format!("expected tensor {name}, found {n}"))),
            None => Err(Error::IncompatibleCheckpoint(format!("missing tensor {name}"))),
        }
    }

    fn expect_shaped(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let t = self.expect(name)?;
        if t.shape() != shape {
            return Err(Error::IncompatibleCheckpoint(format!(
                "tensor {name} has shape {:?}, config implies {shape:?}",
                t.shape()
            )));
        }
        Ok(t)
    }
}

fn push_adam(out: &mut NamedTensors, prefix: &str, st: &AdamState) {
    for (i, m) in st.m.iter().enumerate() {
        out.push((format!("adam.{prefix}.m{i}"), m.clone()));
    }
    for (i, v) in st.v.iter().enumerate() {
        out.push((format!("adam.{prefix}.v{i}"), v.clone()));
    }
    out.push((format!("adam.{prefix}.t"), Tensor::vector(u64_parts(st.t))));
}

fn read_adam(l: &mut Lookup, prefix: &str, st: &mut AdamState) -> Result<()> {
    for i in 0..st.m.len() {
        let shape = st.m[i].shape().to_vec();
        st.m[i] = l.expect_shaped(&format!("adam.{prefix}.m{i}"), &shape)?;
    }
    for i in 0..st.v.len() {
        let shape = st.v[i].shape().to_vec();
        st.v[i] = l.expect_shaped(&format!("adam.{prefix}.v{i}"), &shape)?;
    }
    st.t = parts_to_u128(l.expect_shaped(&format!("adam.{prefix}.t"), &[2])?.data())? as u64;
    Ok(())
}

impl Checkpoint {
    /// Snapshot of `trainer`; `config` supplies the non-training sections.
    pub fn from_trainer(trainer: &Trainer, config: &ExperimentConfig) -> Self {
        let mut config = config.clone();
        config.training = trainer.config.clone();
        let seed = trainer.config.seed;
        Self {
            config,
            step: trainer.steps_done(),
            nets: trainer.nets.clone(),
            opts: trainer.opts.clone(),
            data_rng: rng::state_of(seed, trainer.data_rng()),
            latent_rng: rng::state_of(seed, trainer.latent_rng()),
        }
    }

    pub fn into_trainer(self) -> Result<Trainer> {
        Trainer::resume(
            self.config.training,
            self.nets,
            self.opts,
            self.step,
            rng::restore(self.data_rng),
            rng::restore(self.latent_rng),
        )
    }

    pub fn to_tensors(&self) -> NamedTensors {
        let mut out: NamedTensors = Vec::new();
        let text = self.config.serialize();
        out.push(("meta.config".into(), Tensor::vector(text.bytes().map(f64::from).collect())));
        out.push(("meta.variant".into(), Tensor::vector(vec![f64::from(self.config.training.variant.code())])));
        out.push(("meta.step".into(), Tensor::vector(u64_parts(self.step))));
        out.push(("meta.rng.data".into(), rng_tensor(self.data_rng)));
        out.push(("meta.rng.latent".into(), rng_tensor(self.latent_rng)));
        let nets = [
            ("generator", &self.nets.generator.net),
            ("discriminator", &self.nets.discriminator.net),
            ("autoregressive", &self.nets.autoregressive.net),
        ];
        for (prefix, net) in nets {
            for (name, p) in net.param_names(prefix).into_iter().zip(net.params()) {
                out.push((name, p.clone()));
            }
        }
        push_adam(&mut out, "generator", &self.opts.generator);
        push_adam(&mut out, "discriminator", &self.opts.discriminator);
        push_adam(&mut out, "autoregressive", &self.opts.autoregressive);
        out
    }

    pub fn from_tensors(items: NamedTensors) -> Result<Self> {
        let mut l = Lookup { items, next: 0 };
        let text: String = l
            .expect("meta.config")?
            .data()
            .iter()
            .map(|&b| {
                if (0.0..=255.0).contains(&b) && b.fract() == 0.0 {
                    Ok(b as u8 as char)
                } else {
                    Err(Error::Format("config bytes out of range".into()))
                }
            })
            .collect::<Result<_>>()?;
        let config = ExperimentConfig::parse(&text)?;
        let variant = l.expect_shaped("meta.variant", &[1])?.data()[0];
        if variant != f64::from(config.training.variant.code()) {
            return Err(Error::IncompatibleCheckpoint("variant tag disagrees with the stored config".into()));
        }
        let step = parts_to_u128(l.expect_shaped("meta.step", &[2])?.data())? as u64;
        let data_rng = rng_from(&l.expect_shaped("meta.rng.data", &[8])?)?;
        let latent_rng = rng_from(&l.expect_shaped("meta.rng.latent", &[8])?)?;

        let dataset = config.training.dataset.build()?;
        let mut nets = Networks::new(&dataset, &config.training.model, config.training.seed)?;
        {
            let Networks {
                generator,
                discriminator,
                autoregressive,
            } = &mut nets;
            for (prefix, net) in [
                ("generator", &mut generator.net),
                ("discriminator", &mut discriminator.net),
                ("autoregressive", &mut autoregressive.net),
            ] {
                let names = net.param_names(prefix);
                for (name, p) in names.iter().zip(net.params_mut()) {
                    let shape = p.shape().to_vec();
                    *p = l.expect_shaped(name, &shape)?;
                }
            }
        }
        let mut opts = Optimizers::new(&nets);
        read_adam(&mut l, "generator", &mut opts.generator)?;
        read_adam(&mut l, "discriminator", &mut opts.discriminator)?;
        read_adam(&mut l, "autoregressive", &mut opts.autoregressive)?;
        if let Some((name, _)) = l.items.get(l.next) {
            return Err(Error::IncompatibleCheckpoint(format!("unexpected tensor {name}")));
        }
        Ok(Self {
            config,
            step,
            nets,
            opts,
            data_rng,
            latent_rng,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(&self.to_tensors())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_tensors(decode(bytes)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
