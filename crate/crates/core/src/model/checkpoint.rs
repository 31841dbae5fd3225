//! Checkpoint files: spec, parameters, optimizer state and training history.
//!
//! ```text
//! "A3DW" | u16 version | u64 spec hash | u32 len + spec text
//! u32 epoch | u32 tensor count | { u16 len + name | u8 rank | u32 extents | f32 values }
//! u8 has optimizer | [f64 lr, beta1, beta2, eps | u64 step | f32 m, v per tensor]
//! u32 epochs | { u32 epoch | f64 train loss, train acc, val loss, val acc (NaN if absent) }
//! u16 label count | { u16 len + name } | u16 len + input kind
//! u64 FNV-1a checksum of everything before it
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::spec::fnv1a;
use super::train::EpochMetrics;
use super::{Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{AdamConfig, AdamState, Tensor};
use crate::video::Reader;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"A3DW";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub epoch: usize,
    pub params: Vec<(String, Tensor<f32>)>,
    pub optimizer: Option<AdamState<f32>>,
    pub history: Vec<EpochMetrics>,
    /// Class names, indexed by network output.
    pub labels: Vec<String>,
    /// Which input the network was trained on (`rgb`, `bs` or `mhi`).
    pub input: String,
}

impl Checkpoint {
    pub fn from_network(net: &Network, epoch: usize, labels: Vec<String>, input: impl Into<String>) -> Self {
        Checkpoint {
            spec: net.spec().clone(),
            epoch,
            params: net.params().into_iter().map(|(n, t)| (n, Tensor::new(t.shape(), t.data().to_vec()).unwrap())).collect(),
            optimizer: None,
            history: Vec::new(),
            labels,
            input: input.into(),
        }
    }

    /// Rebuilds the network; parameter names and shapes must match the spec.
    pub fn network(&self) -> Result<Network> {
        let mut net = Network::new(&self.spec, 0)?;
        let expected: Vec<(String, Vec<usize>)> =
            net.params().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        if expected.len() != self.params.len() {
            return Err(Error::Incompatible(format!(
                "checkpoint has {} tensors, the spec needs {}",
                self.params.len(),
                expected.len()
            )));
        }
        for ((name, shape), (have, t)) in expected.iter().zip(&self.params) {
            if name != have || shape.as_slice() != t.shape() {
                return Err(Error::Incompatible(format!(
                    "tensor '{have}' {:?} where the spec expects '{name}' {shape:?}",
                    t.shape()
                )));
            }
        }
        net.set_params(self.params.iter().map(|(_, t)| t.clone()).collect())?;
        Ok(net)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u16(CHECKPOINT_VERSION);
        w.u64(self.spec.hash());
        w.str32(&self.spec.canonical())?;
        w.u32(self.epoch)?;
        w.u32(self.params.len())?;
        for (name, t) in &self.params {
            w.str16(name)?;
            w.0.push(u8::try_from(t.rank()).map_err(|_| Error::Config("tensor rank above 255".into()))?);
            for &d in t.shape() {
                w.u32(d)?;
            }
            w.f32s(t.data());
        }
        match &self.optimizer {
            None => w.0.push(0),
            Some(opt) => {
                if opt.m.len() != self.params.len() || opt.v.len() != self.params.len() {
                    return Err(Error::Dimension("optimizer state does not cover every tensor".into()));
                }
                w.0.push(1);
                for v in [opt.config.lr, opt.config.beta1, opt.config.beta2, opt.config.eps] {
                    w.f64(v);
                }
                w.u64(opt.step);
                for (i, (_, t)) in self.params.iter().enumerate() {
                    if opt.m[i].len() != t.len() || opt.v[i].len() != t.len() {
                        return Err(Error::Dimension(format!("optimizer moments of tensor {i} have the wrong length")));
                    }
                    w.f32s(&opt.m[i]);
                    w.f32s(&opt.v[i]);
                }
            }
        }
        w.u32(self.history.len())?;
        for m in &self.history {
            w.u32(m.epoch)?;
            for v in [m.train_loss, m.train_accuracy, m.val_loss.unwrap_or(f64::NAN), m.val_accuracy.unwrap_or(f64::NAN)] {
                w.f64(v);
            }
        }
        w.u16(u16::try_from(self.labels.len()).map_err(|_| Error::Config("more than 65535 labels".into()))?);
        for l in &self.labels {
            w.str16(l)?;
        }
        w.str16(&self.input)?;
        let sum = fnv1a(&w.0);
        w.u64(sum);
        Ok(w.0)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::format(origin, "not a checkpoint (bad magic)"));
        }
        let corrupt = |what: &str| Error::Corrupt(format!("{}: {what}", origin.display()));
        let truncated = |_| corrupt("file is truncated");
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u16().map_err(truncated)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(origin, format!("unsupported checkpoint version {version}")));
        }
        if bytes.len() < 14 {
            return Err(corrupt("file is truncated"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored_sum = u64::from_le_bytes(tail.try_into().unwrap());
        let hash = r.u64().map_err(truncated)?;
        let text_len = r.u32().map_err(truncated)? as usize;
        let text = std::str::from_utf8(r.take(text_len).map_err(truncated)?).map_err(|_| corrupt("spec is not UTF-8"));
        if fnv1a(body) != stored_sum {
            return Err(corrupt("checksum mismatch (file is truncated or damaged)"));
        }
        let spec = NetworkSpec::parse_canonical(text?)?;
        if spec.hash() != hash {
            return Err(corrupt("spec hash does not match the stored spec"));
        }
        let mut r = Reader { bytes: body, pos: r.pos };
        let epoch = r.u32().map_err(truncated)? as usize;
        let count = r.u32().map_err(truncated)? as usize;
        let mut params = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = read_str16(&mut r).ok_or_else(|| corrupt("bad tensor name"))?;
            let rank = r.take(1).map_err(truncated)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32().map_err(truncated)? as usize);
            }
            let n: usize = shape.iter().product();
            let data = read_f32s(&mut r, n).ok_or_else(|| corrupt("tensor data is truncated"))?;
            params.push((name, Tensor::new(&shape, data)?));
        }
        let optimizer = match r.take(1).map_err(truncated)?[0] {
            0 => None,
            1 => {
                let mut c = [0.0; 4];
                for v in &mut c {
                    *v = r.f64().map_err(truncated)?;
                }
                let config = AdamConfig { lr: c[0], beta1: c[1], beta2: c[2], eps: c[3] };
                let step = r.u64().map_err(truncated)?;
                let (mut m, mut v) = (Vec::new(), Vec::new());
                for (_, t) in &params {
                    m.push(read_f32s(&mut r, t.len()).ok_or_else(|| corrupt("optimizer state is truncated"))?);
                    v.push(read_f32s(&mut r, t.len()).ok_or_else(|| corrupt("optimizer state is truncated"))?);
                }
                Some(AdamState { config, step, m, v })
            }
            _ => return Err(corrupt("bad optimizer flag")),
        };
        let epochs = r.u32().map_err(truncated)? as usize;
        let mut history = Vec::with_capacity(epochs.min(1 << 16));
        for _ in 0..epochs {
            let epoch = r.u32().map_err(truncated)? as usize;
            let mut v = [0.0; 4];
            for x in &mut v {
                *x = r.f64().map_err(truncated)?;
            }
            let opt = |x: f64| if x.is_nan() { None } else { Some(x) };
            history.push(EpochMetrics { epoch, train_loss: v[0], train_accuracy: v[1], val_loss: opt(v[2]), val_accuracy: opt(v[3]) });
        }
        let nlabels = r.u16().map_err(truncated)? as usize;
        let mut labels = Vec::with_capacity(nlabels);
        for _ in 0..nlabels {
            labels.push(read_str16(&mut r).ok_or_else(|| corrupt("bad label"))?);
        }
        let input = read_str16(&mut r).ok_or_else(|| corrupt("bad input kind"))?;
        if r.pos != body.len() {
            return Err(corrupt("unexpected trailing bytes"));
        }
        Ok(Checkpoint { spec, epoch, params, optimizer, history, labels, input })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Checkpoint::from_bytes(&bytes, path)
    }

    /// Loads a checkpoint and insists it was written for `spec`.
    pub fn load_for(path: &Path, spec: &NetworkSpec) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        if ck.spec.hash() != spec.hash() {
            return Err(Error::Incompatible(format!(
                "{} holds a {} network with spec hash {:016x}, expected {} with {:016x}",
                path.display(),
                ck.spec.mode,
                ck.spec.hash(),
                spec.mode,
                spec.hash()
            )));
        }
        Ok(ck)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Config(format!("{v} does not fit in 32 bits")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn str16(&mut self, s: &str) -> Result<()> {
        self.u16(u16::try_from(s.len()).map_err(|_| Error::Config(format!("string '{s}' is too long")))?);
        self.0.extend_from_slice(s.as_bytes());
        Ok(())
    }
    fn str32(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.0.extend_from_slice(s.as_bytes());
        Ok(())
    }
}

fn read_str16(r: &mut Reader) -> Option<String> {
    let len = r.u16().ok()? as usize;
    String::from_utf8(r.take(len).ok()?.to_vec()).ok()
}

fn read_f32s(r: &mut Reader, n: usize) -> Option<Vec<f32>> {
    let raw = r.take(n.checked_mul(4)?).ok()?;
    Some(raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mode;

    fn small() -> Checkpoint {
        let net = Network::new(&NetworkSpec::compact(Mode::TwoD, 3), 9).unwrap();
        let mut ck = Checkpoint::from_network(&net, 4, vec!["a".into(), "b".into(), "c".into()], "mhi");
        ck.history.push(EpochMetrics { epoch: 1, train_loss: 0.5, train_accuracy: 0.75, val_loss: None, val_accuracy: None });
        ck
    }

    #[test]
    fn bytes_roundtrip() {
        let ck = small();
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap(), Path::new("mem")).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn truncation_and_damage_are_corruption() {
        let bytes = small().to_bytes().unwrap();
        for cut in [10, 100, bytes.len() / 2, bytes.len() - 1] {
            let err = Checkpoint::from_bytes(&bytes[..cut], Path::new("mem")).unwrap_err();
            assert!(matches!(err, Error::Corrupt(_)), "cut {cut}: {err}");
        }
        let mut flipped = bytes.clone();
        flipped[300] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&flipped, Path::new("mem")), Err(Error::Corrupt(_))));
        flipped = bytes;
        flipped[1] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&flipped, Path::new("mem")), Err(Error::Format { .. })));
    }
}
