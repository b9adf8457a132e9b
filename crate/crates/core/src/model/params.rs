//! Named parameter tensors, the Adam optimizer, and the binary weight file.
//!
//! Weight file layout (all integers little-endian):
//!
//! ```text
//! "MSTW"  u32 version  u32 tensor-count
//! per tensor: u32 name-len, name bytes, u32 rank, rank × u64 dims, f64 payload (row-major)
//! u64 FNV-1a checksum of every preceding byte
//! ```

use std::io::{self, Read, Write};

use rand::Rng;
use thiserror::Error;

use super::tensor::Matrix;

const MAGIC: &[u8; 4] = b"MSTW";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("not a weight file (bad magic)")]
    Magic,
    #[error("unsupported weight file version {0}")]
    Version(u32),
    #[error("weight file checksum mismatch")]
    Checksum,
    #[error("weight file is malformed: {0}")]
    Malformed(String),
    #[error("missing tensor {0}")]
    Missing(String),
    #[error("tensor {name} has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Matrix>,
    frozen: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn add(&mut self, name: &str, m: Matrix) -> usize {
        assert!(self.index(name).is_none(), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.tensors.push(m);
        self.frozen.push(false);
        self.tensors.len() - 1
    }

    /// Uniform in ±1/sqrt(fan_in).
    pub fn add_uniform<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> usize {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, Matrix::from_vec(rows, cols, data))
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn get(&self, i: usize) -> &Matrix {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.tensors[i]
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn set_frozen(&mut self, i: usize, frozen: bool) {
        self.frozen[i] = frozen;
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (name, t) in self.names.iter().zip(&self.tensors) {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&2u32.to_le_bytes());
            buf.extend_from_slice(&(t.rows as u64).to_le_bytes());
            buf.extend_from_slice(&(t.cols as u64).to_le_bytes());
            for x in &t.data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        let sum = fnv1a(&buf);
        buf.extend_from_slice(&sum.to_le_bytes());
        w.write_all(&buf)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<ParamStore, WeightsError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() < 4 || &buf[..4] != MAGIC {
            return Err(WeightsError::Magic);
        }
        if buf.len() < 20 {
            return Err(WeightsError::Malformed("truncated".into()));
        }
        let (body, tail) = buf.split_at(buf.len() - 8);
        if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
            return Err(WeightsError::Checksum);
        }
        let mut cur = Cursor { buf: body, pos: 4 };
        let version = cur.u32()?;
        if version != VERSION {
            return Err(WeightsError::Version(version));
        }
        let count = cur.u32()? as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let name = String::from_utf8(cur.bytes(len)?.to_vec())
                .map_err(|_| WeightsError::Malformed("tensor name is not UTF-8".into()))?;
            let rank = cur.u32()? as usize;
            let dims: Vec<usize> = (0..rank).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<_, _>>()?;
            let (rows, cols) = match dims.as_slice() {
                [] => (1, 1),
                [c] => (1, *c),
                [r, c] => (*r, *c),
                _ => return Err(WeightsError::Malformed(format!("rank {rank} tensor {name}"))),
            };
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| WeightsError::Malformed("tensor too large".into()))?;
            let raw = cur.bytes(n.checked_mul(8).ok_or_else(|| WeightsError::Malformed("tensor too large".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if store.index(&name).is_some() {
                return Err(WeightsError::Malformed(format!("duplicate tensor {name}")));
            }
            store.add(&name, Matrix::from_vec(rows, cols, data));
        }
        if cur.pos != body.len() {
            return Err(WeightsError::Malformed("trailing bytes".into()));
        }
        Ok(store)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], WeightsError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| WeightsError::Malformed("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WeightsError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.9,
            eps: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> AdamState {
        let zeros = || store.tensors().iter().map(|t| Matrix::zeros(t.rows, t.cols)).collect();
        AdamState {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update. Frozen tensors are left untouched.
pub fn adam_step(store: &mut ParamStore, grads: &[Matrix], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(grads.len(), store.len(), "gradient count");
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..store.len() {
        if store.frozen[i] {
            continue;
        }
        let (p, g) = (&mut store.tensors[i], &grads[i]);
        assert_eq!(p.shape(), g.shape(), "gradient shape for {}", store.names[i]);
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for k in 0..p.len() {
            let gk = g.data[k];
            m.data[k] = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * gk;
            v.data[k] = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * gk * gk;
            let mhat = m.data[k] / c1;
            let vhat = v.data[k] / c2;
            p.data[k] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}
