//! Smallest set of smallest rings.
//!
//! Candidate cycles are built Horton-style (shortest path from a root to both
//! ends of an edge), sorted by length and then by their normalized atom
//! sequence, and accepted greedily while they stay linearly independent over
//! GF(2). The result is a minimum cycle basis with a deterministic tie-break.

use std::collections::VecDeque;

use super::MolGraph;

#[derive(Debug, Clone, Default)]
pub struct RingInfo {
    /// Each ring is an atom cycle starting at its smallest atom index and
    /// heading toward the smaller of that atom's two ring neighbors.
    pub rings: Vec<Vec<usize>>,
    pub atom_in_ring: Vec<bool>,
    pub bond_in_ring: Vec<bool>,
}

impl RingInfo {
    /// Bond indices of ring `r`, in traversal order.
    pub fn ring_bonds(&self, m: &MolGraph, r: usize) -> Vec<usize> {
        let ring = &self.rings[r];
        (0..ring.len())
            .map(|k| {
                m.bond_between(ring[k], ring[(k + 1) % ring.len()])
                    .expect("ring edges are bonds")
            })
            .collect()
    }
}

fn normalize_cycle(cycle: &[usize]) -> Vec<usize> {
    let n = cycle.len();
    let start = (0..n).min_by_key(|&i| cycle[i]).unwrap();
    let next = cycle[(start + 1) % n];
    let prev = cycle[(start + n - 1) % n];
    let mut out = Vec::with_capacity(n);
    if next <= prev {
        for k in 0..n {
            out.push(cycle[(start + k) % n]);
        }
    } else {
        for k in 0..n {
            out.push(cycle[(start + n - k) % n]);
        }
    }
    out
}

/// BFS parents from `root`, exploring neighbors in ascending index order.
fn bfs_tree(m: &MolGraph, root: usize) -> (Vec<usize>, Vec<usize>) {
    let n = m.atom_count();
    let mut parent = vec![usize::MAX; n];
    let mut dist = vec![usize::MAX; n];
    dist[root] = 0;
    let mut q = VecDeque::new();
    q.push_back(root);
    while let Some(u) = q.pop_front() {
        let mut nbrs: Vec<usize> = m.neighbors(u).iter().map(|&(v, _)| v).collect();
        nbrs.sort_unstable();
        for v in nbrs {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                parent[v] = u;
                q.push_back(v);
            }
        }
    }
    (parent, dist)
}

fn path_to_root(parent: &[usize], mut v: usize, root: usize) -> Vec<usize> {
    let mut p = vec![v];
    while v != root {
        v = parent[v];
        p.push(v);
    }
    p
}

/// Bitset over bond indices, used for GF(2) elimination.
#[derive(Clone)]
struct EdgeSet(Vec<u64>);

impl EdgeSet {
    fn new(n: usize) -> EdgeSet {
        EdgeSet(vec![0; n.div_ceil(64).max(1)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn xor(&mut self, o: &EdgeSet) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a ^= b;
        }
    }
    fn lowest(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }
}

pub fn sssr(m: &MolGraph) -> RingInfo {
    let n = m.atom_count();
    let nb = m.bond_count();
    let components = m.component_count();
    let target = (nb + components).saturating_sub(n);
    let mut info = RingInfo {
        rings: Vec::new(),
        atom_in_ring: vec![false; n],
        bond_in_ring: vec![false; nb],
    };
    if target == 0 {
        return info;
    }

    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        let (parent, dist) = bfs_tree(m, root);
        for b in m.bonds() {
            let (x, y) = (b.a, b.b);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x] == y || parent[y] == x {
                continue;
            }
            let px = path_to_root(&parent, x, root);
            let py = path_to_root(&parent, y, root);
            // paths may only meet at the root
            let mut seen = vec![false; n];
            for &a in &px {
                seen[a] = true;
            }
            if py.iter().filter(|&&a| seen[a]).count() != 1 {
                continue;
            }
            // root .. x, then y .. (child of root)
            let mut full: Vec<usize> = px.iter().rev().copied().collect();
            full.extend_from_slice(&py[..py.len() - 1]);
            if full.len() < 3 {
                continue;
            }
            candidates.push(normalize_cycle(&full));
        }
    }
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    candidates.dedup();

    let mut basis: Vec<(usize, EdgeSet)> = Vec::new();
    for cyc in candidates {
        let mut es = EdgeSet::new(nb);
        for k in 0..cyc.len() {
            let bi = m
                .bond_between(cyc[k], cyc[(k + 1) % cyc.len()])
                .expect("cycle edges are bonds");
            es.set(bi);
        }
        let original = es.clone();
        let mut reduced = es;
        loop {
            let Some(low) = reduced.lowest() else { break };
            match basis.iter().find(|(p, _)| *p == low) {
                Some((_, row)) => reduced.xor(row),
                None => break,
            }
        }
        if let Some(pivot) = reduced.lowest() {
            basis.push((pivot, reduced));
            for k in 0..cyc.len() {
                info.atom_in_ring[cyc[k]] = true;
            }
            for bi in 0..nb {
                if original.get(bi) {
                    info.bond_in_ring[bi] = true;
                }
            }
            info.rings.push(cyc);
            if info.rings.len() == target {
                break;
            }
        }
    }
    info
}
