//! Binary layout:
//!
//! ```text
//! magic   8 bytes  "SRDQNNET"
//! version u32 LE
//! count   u32 LE   number of layer sizes (layers + 1)
//! sizes   count × u64 LE
//! per layer: weights (in × out, row-major by input) then biases, f64 LE
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::network::{Layer, QNetwork};
use super::NeuralError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SRDQNNET";
pub const CHECKPOINT_VERSION: u32 = 1;

impl QNetwork {
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.sizes();
        let mut out = Vec::with_capacity(16 + sizes.len() * 8 + self.num_params() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in sizes {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<QNetwork, NeuralError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(NeuralError::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        if count < 2 {
            return Err(NeuralError::Checkpoint(format!("{count} layer sizes")));
        }
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count {
            let s = r.u64()?;
            if s == 0 || s > u32::MAX as u64 {
                return Err(NeuralError::Checkpoint(format!("implausible layer size {s}")));
            }
            sizes.push(s as usize);
        }
        let mut layers = Vec::with_capacity(count - 1);
        for w in sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let weights = r.f64s(inputs * outputs)?;
            let b = r.f64s(outputs)?;
            layers.push(Layer {
                inputs,
                outputs,
                w: weights,
                b,
            });
        }
        if r.pos != bytes.len() {
            return Err(NeuralError::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(QNetwork { layers })
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<QNetwork, NeuralError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        QNetwork::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NeuralError::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NeuralError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| NeuralError::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
