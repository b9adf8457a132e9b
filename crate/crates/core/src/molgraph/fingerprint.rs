//! Per-atom circular (Morgan/ECFP-style) fingerprints.

use thiserror::Error;

use super::{sssr, MolGraph};

pub const DEFAULT_WIDTH: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("fingerprint widths differ: {0} vs {1}")]
pub struct WidthMismatch(pub usize, pub usize);

/// FNV-1a over little-endian words followed by a splitmix64 finalizer.
/// Platform independent.
pub fn stable_hash(words: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// `ids[r][i]` is the identifier of the radius-`r` environment of atom `i`.
pub fn morgan_identifiers(m: &MolGraph, radius: usize) -> Vec<Vec<u64>> {
    let n = m.atom_count();
    let rings = sssr(m);
    let mut ids: Vec<Vec<u64>> = Vec::with_capacity(radius + 1);
    ids.push(
        (0..n)
            .map(|i| {
                let a = m.atom(i);
                stable_hash(&[
                    a.element.atomic_number() as u64,
                    a.formal_charge as i64 as u64,
                    m.degree(i) as u64,
                    a.implicit_h as u64,
                    a.is_aromatic as u64,
                    rings.atom_in_ring[i] as u64,
                ])
            })
            .collect(),
    );
    for r in 1..=radius {
        let prev = &ids[r - 1];
        let next = (0..n)
            .map(|i| {
                let mut env: Vec<(u64, u64)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bi)| (m.bond(bi).code() as u64, prev[j]))
                    .collect();
                env.sort_unstable();
                let mut words = vec![prev[i], r as u64];
                for (c, id) in env {
                    words.push(c);
                    words.push(id);
                }
                stable_hash(&words)
            })
            .collect();
        ids.push(next);
    }
    ids
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomFingerprint {
    words: Vec<u64>,
    width: usize,
    pub radius: usize,
}

impl AtomFingerprint {
    pub fn empty(width: usize, radius: usize) -> AtomFingerprint {
        AtomFingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
            radius,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> Vec<usize> {
        (0..self.width).filter(|&b| self.contains(b)).collect()
    }

    pub fn union_with(&mut self, other: &AtomFingerprint) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn from_bits(width: usize, bits: &[usize]) -> AtomFingerprint {
        let mut f = AtomFingerprint::empty(width, 0);
        for &b in bits {
            f.set(b % width);
        }
        f
    }
}

fn fold(ids: &[Vec<u64>], atom: usize, width: usize) -> AtomFingerprint {
    let mut f = AtomFingerprint::empty(width, ids.len() - 1);
    for layer in ids {
        f.set((layer[atom] % width as u64) as usize);
    }
    f
}

pub fn atom_fingerprint(m: &MolGraph, atom_idx: usize, radius: usize) -> AtomFingerprint {
    fold(&morgan_identifiers(m, radius), atom_idx, DEFAULT_WIDTH)
}

/// Whole-molecule fingerprint: the union of every atom's environments.
pub fn molecule_fingerprint(m: &MolGraph, radius: usize) -> AtomFingerprint {
    let mut f = AtomFingerprint::empty(DEFAULT_WIDTH, radius);
    for a in atom_fingerprints(m, radius) {
        f.union_with(&a);
    }
    f
}

/// Fingerprints of every atom, sharing one identifier pass.
pub fn atom_fingerprints(m: &MolGraph, radius: usize) -> Vec<AtomFingerprint> {
    let ids = morgan_identifiers(m, radius);
    (0..m.atom_count()).map(|i| fold(&ids, i, DEFAULT_WIDTH)).collect()
}

pub fn tanimoto(f1: &AtomFingerprint, f2: &AtomFingerprint) -> Result<f64, WidthMismatch> {
    if f1.width != f2.width {
        return Err(WidthMismatch(f1.width, f2.width));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (a, b) in f1.words.iter().zip(&f2.words) {
        inter += (a & b).count_ones();
        union += (a | b).count_ones();
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
