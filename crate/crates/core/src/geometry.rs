//! Fragment positions and distance matrices for the attention bias.
//!
//! Atom coordinates come from a small deterministic spring embedding (unit
//! bond lengths, soft repulsion between non-bonded atoms). The relaxed
//! variant also pulls atoms two bonds apart toward the 120 degree distance.
//! Coordinates are kept on the partial molecule and extended after each
//! dock: a new atom starts next to its already placed neighbors.

use std::str::FromStr;

use crate::molgraph::{stable_hash, MolGraph};
use crate::story::{PartialMolecule, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Topological,
    ForceRelaxed,
    None,
}

impl FromStr for ProviderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "topological" => Ok(ProviderKind::Topological),
            "force-relaxed" => Ok(ProviderKind::ForceRelaxed),
            "none" => Ok(ProviderKind::None),
            _ => Err(format!("unknown geometry provider {s}")),
        }
    }
}

impl ProviderKind {
    pub fn name(self) -> &'static str {
        match self {
            ProviderKind::Topological => "topological",
            ProviderKind::ForceRelaxed => "force-relaxed",
            ProviderKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryProvider {
    pub kind: ProviderKind,
    pub iterations: usize,
    pub step: f64,
    pub repulsion: f64,
    pub seed: u64,
}

impl GeometryProvider {
    pub fn new(kind: ProviderKind) -> GeometryProvider {
        GeometryProvider {
            kind,
            iterations: 120,
            step: 0.1,
            repulsion: 0.2,
            seed: 0,
        }
    }
}

impl Default for GeometryProvider {
    fn default() -> Self {
        GeometryProvider::new(ProviderKind::Topological)
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn centroid(points: impl IntoIterator<Item = [f64; 3]>) -> [f64; 3] {
    let mut c = [0.0; 3];
    let mut n = 0.0;
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
        n += 1.0;
    }
    if n > 0.0 {
        c.map(|x| x / n)
    } else {
        c
    }
}

/// Deterministic unit vector for atom `i`.
fn direction(seed: u64, i: usize) -> [f64; 3] {
    let h = |k: u64| (stable_hash(&[seed, i as u64, k]) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
    let v = [h(0), h(1), h(2)];
    let n = norm(v);
    if n < 1e-9 {
        [1.0, 0.0, 0.0]
    } else {
        v.map(|x| x / n)
    }
}

impl GeometryProvider {
    /// Place atoms without coordinates, then relax the whole molecule.
    pub fn embed(&self, m: &mut MolGraph) {
        let n = m.atom_count();
        let mut coords = m.coords.take().unwrap_or_default();
        let mut placed = vec![false; n];
        for p in placed.iter_mut().take(coords.len().min(n)) {
            *p = true;
        }
        coords.resize(n, [0.0; 3]);
        loop {
            let mut progress = false;
            for i in 0..n {
                if placed[i] {
                    continue;
                }
                let nbrs: Vec<[f64; 3]> = m
                    .neighbors(i)
                    .iter()
                    .filter(|&&(j, _)| placed[j])
                    .map(|&(j, _)| coords[j])
                    .collect();
                let anchor_count = nbrs.len();
                if anchor_count == 0 && placed.iter().any(|&p| p) {
                    continue;
                }
                let base = centroid(nbrs);
                let d = direction(self.seed, i);
                coords[i] = if placed.iter().any(|&p| p) {
                    [base[0] + d[0], base[1] + d[1], base[2] + d[2]]
                } else {
                    [0.0; 3]
                };
                placed[i] = true;
                progress = true;
            }
            if !progress {
                break;
            }
        }
        if self.kind != ProviderKind::None {
            self.relax(m, &mut coords);
        }
        m.coords = Some(coords);
    }

    fn relax(&self, m: &MolGraph, x: &mut [[f64; 3]]) {
        let n = m.atom_count();
        let mut bonded = vec![vec![0u8; n]; n];
        for b in m.bonds() {
            bonded[b.a][b.b] = 1;
            bonded[b.b][b.a] = 1;
        }
        if self.kind == ProviderKind::ForceRelaxed {
            for c in 0..n {
                let nb: Vec<usize> = m.neighbors(c).iter().map(|&(j, _)| j).collect();
                for (p, &a) in nb.iter().enumerate() {
                    for &b in &nb[p + 1..] {
                        if bonded[a][b] == 0 {
                            bonded[a][b] = 2;
                            bonded[b][a] = 2;
                        }
                    }
                }
            }
        }
        let angle = 3f64.sqrt();
        for _ in 0..self.iterations {
            let mut force = vec![[0.0; 3]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let d = sub(x[i], x[j]);
                    let r = norm(d).max(1e-6);
                    // positive f pulls i toward j
                    let f = match bonded[i][j] {
                        1 => r - 1.0,
                        2 => 0.5 * (r - angle),
                        _ => -self.repulsion / (r * r + 0.1),
                    };
                    for k in 0..3 {
                        let g = f * d[k] / r;
                        force[i][k] -= g;
                        force[j][k] += g;
                    }
                }
            }
            for i in 0..n {
                for k in 0..3 {
                    x[i][k] += self.step * force[i][k].clamp(-1.0, 1.0);
                }
            }
        }
    }

    /// Refresh coordinates of a partial molecule after it changed.
    pub fn update(&self, pm: &mut PartialMolecule) {
        if self.kind == ProviderKind::None {
            pm.mol.coords = Some(vec![[0.0; 3]; pm.mol.atom_count()]);
        } else {
            self.embed(&mut pm.mol);
        }
    }

    /// One position per fragment instance: the centroid of its atoms.
    pub fn fragment_positions(&self, pm: &PartialMolecule) -> Vec<[f64; 3]> {
        match (&pm.mol.coords, self.kind) {
            (Some(c), k) if k != ProviderKind::None && c.len() == pm.mol.atom_count() => pm
                .instances
                .iter()
                .map(|inst| centroid(inst.atoms.iter().map(|&a| c[a])))
                .collect(),
            _ => vec![[0.0; 3]; pm.instances.len()],
        }
    }

    /// Distance from each fragment position to the focal attachment's centroid.
    pub fn attachment_distances(
        &self,
        pm: &PartialMolecule,
        focal: Point,
        positions: &[[f64; 3]],
    ) -> Vec<f64> {
        let at = match (&pm.mol.coords, self.kind) {
            (Some(c), k) if k != ProviderKind::None && c.len() == pm.mol.atom_count() => {
                centroid(pm.atoms_of(focal.inst, focal.at).into_iter().map(|a| c[a]))
            }
            _ => return vec![0.0; positions.len()],
        };
        positions.iter().map(|&p| norm(sub(p, at))).collect()
    }
}

/// Symmetric n x n Euclidean distance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

pub fn pairwise_distances(positions: &[[f64; 3]]) -> DistanceMatrix {
    let n = positions.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = norm(sub(positions[i], positions[j]));
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}
