//! Binary checkpoints.
//!
//! Layout, all little-endian: magic `CGRL`, `u32` format version, `u64`
//! gradient step, `u32` length plus UTF-8 config echo (TOML), `u32` record
//! count, then per record `u32` name length, name, `u32` rank, `u64` dims,
//! `f64` data. Records are sorted by name; online weights are prefixed
//! `online/`, target weights `target/`, VGAE weights `vgae/`.

use std::io::{Read, Write};
use std::path::Path;

use cgrl_agent::{CausalModel, D3qn};
use cgrl_core::{Params64, Tensor64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::{io_err, HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"CGRL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub config: ExperimentConfig,
    pub params: Params64,
}

impl Checkpoint {
    pub fn capture(config: &ExperimentConfig, agent: &D3qn, causal: Option<&CausalModel>) -> Self {
        let mut params = Params64::new();
        params.extend_prefixed("online/", &agent.online);
        params.extend_prefixed("target/", &agent.target);
        if let Some(c) = causal {
            params.extend_prefixed("vgae/", &c.params);
        }
        Self { step: agent.steps, config: config.clone(), params }
    }

    /// Rebuilds the agent (and the causal model if one was saved).
    /// Optimizer moments are not stored, so they restart from zero.
    pub fn restore(&self) -> Result<(D3qn, Option<CausalModel>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = D3qn::new(self.config.policy.clone(), self.config.trainer.clone(), &mut rng)?;
        agent.online = self.part("online/", &agent.online)?;
        agent.target = self.part("target/", &agent.target)?;
        agent.steps = self.step;
        let causal = match &self.config.cdrl {
            Some(cfg) if self.params.names().any(|n| n.starts_with("vgae/")) => {
                let mut m = CausalModel::new(cfg.clone(), &mut rng)?;
                m.params = self.part("vgae/", &m.params)?;
                Some(m)
            }
            _ => None,
        };
        Ok((agent, causal))
    }

    fn part(&self, prefix: &str, like: &Params64) -> Result<Params64> {
        let p = self.params.strip_prefix(prefix);
        let same = p.len() == like.len()
            && like.iter().all(|(n, t)| p.get(n).is_some_and(|q| q.shape() == t.shape()));
        if !same {
            return Err(HarnessError::Format(format!("checkpoint {prefix} weights do not match the configured network")));
        }
        Ok(p)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        put_str(&mut out, &self.config.echo());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in self.params.iter() {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(HarnessError::Format("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != VERSION {
            return Err(HarnessError::Format(format!("unsupported checkpoint version {version}")));
        }
        let step = u64::from_le_bytes(take(&mut r)?);
        let config = ExperimentConfig::from_toml(&get_str(&mut r)?)?;
        let count = u32::from_le_bytes(take(&mut r)?);
        let mut params = Params64::new();
        for _ in 0..count {
            let name = get_str(&mut r)?;
            let rank = u32::from_le_bytes(take(&mut r)?) as usize;
            let shape = (0..rank)
                .map(|_| take(&mut r).map(|b| u64::from_le_bytes(b) as usize))
                .collect::<Result<Vec<_>>>()?;
            let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let len = len.filter(|&l| l.saturating_mul(8) <= r.len()).ok_or_else(truncated)?;
            let data = (0..len).map(|_| take(&mut r).map(f64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
            params.insert(name, Tensor64::new(shape, data)?);
        }
        if !r.is_empty() {
            return Err(HarnessError::Format("trailing bytes after checkpoint records".into()));
        }
        Ok(Self { step, config, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(io_err(path))?;
        f.write_all(&self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(io_err(path))?)
    }
}

fn truncated() -> HarnessError {
    HarnessError::Format("truncated checkpoint".into())
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| truncated())
}

fn take<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    read_exact(r, &mut b)?;
    Ok(b)
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn get_str(r: &mut &[u8]) -> Result<String> {
    let n = u32::from_le_bytes(take(r)?) as usize;
    if n > r.len() {
        return Err(truncated());
    }
    let mut b = vec![0u8; n];
    read_exact(r, &mut b)?;
    String::from_utf8(b).map_err(|_| HarnessError::Format("checkpoint string is not UTF-8".into()))
}
