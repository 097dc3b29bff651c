//! Epoch-boundary checkpoints.
//!
//! ```text
//! "MDCK" | version u32 | config fingerprint u64 | seed u64 | mode name (u8 len + bytes)
//! epochs done u64 | iterations done u64 | optimizer iter u64
//! params | velocity flag u8 [+ params]
//! loss bank (see LossBank::to_bytes)
//! tracker flag u8 [+ min f64 + max f64]
//! ```
//!
//! `params` is `layers u32`, then per layer `fan_in u32, fan_out u32`, weights
//! and biases as f64. All integers little-endian. Random streams are keyed by
//! `(seed, purpose, epoch, sample id)` and carry no state of their own, so the
//! seed plus the epoch counter restore them.

use std::path::Path;

use super::Trainer;
use crate::cli::config::TrainConfig;
use crate::error::{Error, Result};
use crate::lossbank::LossBank;
use crate::numerics::{Layer, Matrix, OptimizerState, ParameterSet};
use crate::scheduler::CapabilityTracker;
use crate::synthdata::generate_dataset;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MDCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_params(out: &mut Vec<u8>, p: &ParameterSet) {
    out.extend_from_slice(&(p.layers().len() as u32).to_le_bytes());
    for l in p.layers() {
        out.extend_from_slice(&(l.fan_in() as u32).to_le_bytes());
        out.extend_from_slice(&(l.fan_out() as u32).to_le_bytes());
        for v in l.weight.data().iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self.bytes.get(self.at..self.at + n).ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn params(&mut self) -> Result<ParameterSet> {
        let n = self.u32()? as usize;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let (fi, fo) = (self.u32()? as usize, self.u32()? as usize);
            let weight = (0..fi * fo).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..fo).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(Layer { weight: Matrix::from_vec(fi, fo, weight)?, bias });
        }
        ParameterSet::from_layers(layers)
    }
}

impl Trainer {
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.cfg.fingerprint().to_le_bytes());
        out.extend_from_slice(&self.cfg.seed.to_le_bytes());
        let mode = self.cfg.mode.name().as_bytes();
        out.push(mode.len() as u8);
        out.extend_from_slice(mode);
        out.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        out.extend_from_slice(&(self.iter as u64).to_le_bytes());
        out.extend_from_slice(&self.opt.iter.to_le_bytes());
        put_params(&mut out, &self.params);
        match self.opt.velocity() {
            Some(v) => {
                out.push(1);
                put_params(&mut out, v);
            }
            None => out.push(0),
        }
        out.extend_from_slice(&self.bank.to_bytes());
        match self.tracker.extrema() {
            Some((lo, hi)) => {
                out.push(1);
                out.extend_from_slice(&lo.to_le_bytes());
                out.extend_from_slice(&hi.to_le_bytes());
            }
            None => out.push(0),
        }
        out
    }

    /// Rebuild a trainer from [`checkpoint_bytes`](Self::checkpoint_bytes).
    /// The config must match the one the checkpoint was written with,
    /// including mode and seed.
    pub fn resume(cfg: &TrainConfig, bytes: &[u8]) -> Result<Trainer> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        if r.u64()? != cfg.fingerprint() {
            return Err(Error::Format("checkpoint was written with a different configuration".into()));
        }
        if r.u64()? != cfg.seed {
            return Err(Error::Format("checkpoint seed differs from config seed".into()));
        }
        let len = r.u8()? as usize;
        if r.take(len)? != cfg.mode.name().as_bytes() {
            return Err(Error::Format("checkpoint mode differs from config mode".into()));
        }
        let epoch = r.u64()? as usize;
        let iter = r.u64()? as usize;
        let opt_iter = r.u64()?;
        let params = r.params()?;
        let velocity = match r.u8()? {
            0 => None,
            _ => Some(r.params()?),
        };
        let (bank, used) = LossBank::from_bytes(&bytes[r.at..])?;
        r.at += used;
        let tracker = match r.u8()? {
            0 => CapabilityTracker::from_extrema(None),
            _ => {
                let lo = r.f64()?;
                let hi = r.f64()?;
                CapabilityTracker::from_extrema(Some((lo, hi)))
            }
        };
        if r.at != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        if epoch > cfg.epochs {
            return Err(Error::Format(format!("checkpoint is at epoch {epoch}, beyond the configured {}", cfg.epochs)));
        }

        let mut data_cfg = cfg.data.clone();
        data_cfg.seed = cfg.seed;
        let mut t = Trainer::with_params(cfg, generate_dataset(&data_cfg)?, params)?;
        if bank.len() != t.bank.len() {
            return Err(Error::Format("checkpoint bank size differs from n_train".into()));
        }
        t.bank = bank;
        t.tracker = tracker;
        t.opt =
            OptimizerState::new(cfg.base_lr, cfg.momentum, cfg.weight_decay, cfg.poly_power, cfg.total_iters() as u64)?
                .restore(opt_iter, velocity)?;
        t.epoch = epoch;
        t.iter = iter;
        Ok(t)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.checkpoint_bytes())?;
        Ok(())
    }

    pub fn load_checkpoint(cfg: &TrainConfig, path: &Path) -> Result<Trainer> {
        Trainer::resume(cfg, &std::fs::read(path)?)
    }
}
