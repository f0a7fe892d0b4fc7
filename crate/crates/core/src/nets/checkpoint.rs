//! EDGC checkpoint container.
//!
//! Little-endian. Bytes 0..4 magic `EDGC`, then version (u32, = 1) and record
//! count (u32). Each record is: name length (u32), UTF-8 name, rank (u32),
//! `rank` extents (u32 each), then the `f32` payload in row-major order.
//!
//! Record naming: a parameter `p` is followed by its Adam moments `p.m1` and
//! `p.m2`; a batch-norm layer `b` stores `b.running_mean`, `b.running_var`
//! and `b.updates` (rank 1, one value); the Adam step counter is the rank-0
//! record `opt.t`.

use std::path::Path;

use crate::tensor::{BatchNormState, Tensor};

use super::{ModelParams, NetError};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"EDGC";
pub const CHECKPOINT_VERSION: u32 = 1;
const STEP_RECORD: &str = "opt.t";
/// Largest step count an `f32` record holds exactly.
const MAX_STEP: u64 = 1 << 24;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn record(&mut self, name: &str, shape: &[usize], data: impl Iterator<Item = f32>) {
        self.u32(name.len() as u32);
        self.0.extend_from_slice(name.as_bytes());
        self.u32(shape.len() as u32);
        for &e in shape {
            self.u32(e as u32);
        }
        for v in data {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn encode_checkpoint(params: &ModelParams) -> Result<Vec<u8>, NetError> {
    if params.step > MAX_STEP {
        return Err(NetError::Contract(format!("step {} exceeds the checkpoint limit", params.step)));
    }
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(&CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    let count = 3 * params.len() + 3 * params.norms.len() + 1;
    w.u32(count as u32);
    for p in params.params() {
        let shape = p.value.shape();
        w.record(&p.name, shape, p.value.data().iter().copied());
        w.record(&format!("{}.m1", p.name), shape, p.m1.iter().copied());
        w.record(&format!("{}.m2", p.name), shape, p.m2.iter().copied());
    }
    for (name, s) in &params.norms {
        let c = [s.channels()];
        w.record(&format!("{name}.running_mean"), &c, s.mean.iter().map(|&v| v as f32));
        w.record(&format!("{name}.running_var"), &c, s.var.iter().map(|&v| v as f32));
        w.record(&format!("{name}.updates"), &[1], std::iter::once(s.updates as f32));
    }
    w.record(STEP_RECORD, &[], std::iter::once(params.step as f32));
    Ok(w.0)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], NetError> {
        if self.bytes.len() - self.at < n {
            return Err(NetError::Checkpoint(format!("truncated at byte {}", self.at)));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn record(&mut self) -> Result<(String, Vec<usize>, Vec<f32>), NetError> {
        let len = self.u32()? as usize;
        let start = self.at;
        let name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| NetError::Checkpoint(format!("record name at byte {start} is not UTF-8")))?
            .to_string();
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(NetError::Checkpoint(format!("{name}: rank {rank} too large")));
        }
        let shape = (0..rank).map(|_| self.u32().map(|e| e as usize)).collect::<Result<Vec<_>, _>>()?;
        let numel = shape.iter().try_fold(1usize, |a, &e| a.checked_mul(e));
        let numel = numel
            .filter(|&n| n.checked_mul(4).is_some_and(|b| b <= self.bytes.len()))
            .ok_or_else(|| NetError::Checkpoint(format!("{name}: payload size overflows")))?;
        let data = self
            .take(numel * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((name, shape, data))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams, NetError> {
    let mut r = Reader { bytes, at: 0 };
    let magic = r.take(4)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(NetError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NetError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        records.push(r.record()?);
    }
    if r.at != bytes.len() {
        return Err(NetError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
    }

    let mut out = ModelParams::new();
    let mut step = None;
    let mut it = records.into_iter();
    while let Some((name, shape, data)) = it.next() {
        if name == STEP_RECORD {
            if !shape.is_empty() {
                return Err(NetError::Checkpoint("opt.t must be a scalar".into()));
            }
            step = Some(data[0] as u64);
        } else if let Some(layer) = name.strip_suffix(".running_mean") {
            let mut next = |suffix: &str| -> Result<Vec<f32>, NetError> {
                match it.next() {
                    Some((n, _, d)) if n == format!("{layer}.{suffix}") => Ok(d),
                    _ => Err(NetError::Checkpoint(format!("{layer}: expected {suffix} record"))),
                }
            };
            let var = next("running_var")?;
            let updates = next("updates")?;
            if var.len() != data.len() || updates.len() != 1 {
                return Err(NetError::Checkpoint(format!("{layer}: inconsistent statistics")));
            }
            let mut state = BatchNormState::new(data.len());
            state.mean = data.iter().map(|&v| v as f64).collect();
            state.var = var.iter().map(|&v| v as f64).collect();
            state.updates = updates[0] as u64;
            out.norms.insert(layer.to_string(), state);
        } else {
            let tensor = Tensor::new(shape.clone(), data)
                .map_err(|e| NetError::Checkpoint(format!("{name}: {e}")))?;
            out.insert(&name, tensor)?;
            let i = out.len() - 1;
            for (suffix, slot) in [("m1", 0), ("m2", 1)] {
                match it.next() {
                    Some((n, s, d)) if n == format!("{name}.{suffix}") && s == shape => {
                        let p = &mut out.params_mut()[i];
                        if slot == 0 {
                            p.m1 = d;
                        } else {
                            p.m2 = d;
                        }
                    }
                    _ => return Err(NetError::Checkpoint(format!("{name}: expected {suffix} record"))),
                }
            }
        }
    }
    out.step = step.ok_or_else(|| NetError::Checkpoint("missing opt.t record".into()))?;
    Ok(out)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ModelParams) -> Result<(), NetError> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(params)?).map_err(|e| NetError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams, NetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| NetError::io(path, e))?;
    decode_checkpoint(&bytes)
}
