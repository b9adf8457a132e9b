//! Canonical fragment identity and symmetry-aware attachment standardization.
//!
//! A fragment's canonical index system is the atom order of its canonical
//! SMILES. Maps between an extracted fragment and its canonical form are
//! recovered by testing cyclic shifts (both traversal directions for rings)
//! against per-atom fingerprint similarity. The standardization map sends
//! each atom to the smallest canonical index it can be relabeled to.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::fragmenter::{
    derive_attachments, generate_fragments, FragmentInstance, FragmentKind, GlobalAttachment,
};
use crate::molgraph::{
    atom_fingerprints, kekulize_bonds, parse_smiles, tanimoto, write_canonical_smiles, Atom,
    BondOrder, MolError, MolGraph,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonError {
    #[error(transparent)]
    Graph(#[from] MolError),
    #[error("canonical form of {0} does not reparse")]
    Reparse(String),
    #[error("no symmetry map relates the fragment to its canonical form")]
    NoMap,
    #[error("fragment of size {0} is neither a bond nor a simple ring")]
    Shape(usize),
}

/// An attachment tuple in some fragment's local index system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attach {
    One(usize),
    Two(usize, usize),
}

impl Attach {
    pub fn from_atoms(atoms: &[usize]) -> Option<Attach> {
        match *atoms {
            [a] => Some(Attach::One(a)),
            [a, b] => Some(Attach::Two(a, b)),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Attach::One(_) => 1,
            Attach::Two(..) => 2,
        }
    }

    pub fn atoms(self) -> Vec<usize> {
        match self {
            Attach::One(a) => vec![a],
            Attach::Two(a, b) => vec![a, b],
        }
    }

    pub fn map(self, f: impl Fn(usize) -> usize) -> Attach {
        match self {
            Attach::One(a) => Attach::One(f(a)),
            Attach::Two(a, b) => Attach::Two(f(a), f(b)),
        }
    }

    /// Pairs sorted ascending; single atoms unchanged.
    pub fn normalized(self) -> Attach {
        match self {
            Attach::Two(a, b) if a > b => Attach::Two(b, a),
            x => x,
        }
    }

    pub fn reversed(self) -> Attach {
        match self {
            Attach::Two(a, b) => Attach::Two(b, a),
            x => x,
        }
    }

    pub fn parse(s: &str) -> Option<Attach> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse().ok())
            .collect::<Option<Vec<_>>>()?;
        Attach::from_atoms(&parts)
    }
}

impl fmt::Display for Attach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attach::One(a) => write!(f, "{a}"),
            Attach::Two(a, b) => write!(f, "{a},{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFragment {
    pub smiles: String,
    pub kind: FragmentKind,
    /// Fragment graph in canonical index order, hydrogens filled.
    pub graph: MolGraph,
    /// Symmetry maps of the canonical graph onto itself, identity first.
    pub automorphisms: Vec<Vec<usize>>,
    pub std_map: Vec<usize>,
}

impl CanonicalFragment {
    pub fn size(&self) -> usize {
        self.graph.atom_count()
    }

    pub fn from_smiles(smiles: &str) -> Result<CanonicalFragment, CanonError> {
        let graph = parse_smiles(smiles).map_err(|_| CanonError::Reparse(smiles.to_string()))?;
        let kind = match (graph.atom_count(), graph.bond_count()) {
            (2, 1) => FragmentKind::Bond,
            (n, b) if n >= 3 && n == b && (0..n).all(|i| graph.degree(i) == 2) => {
                FragmentKind::Ring
            }
            (n, _) => return Err(CanonError::Shape(n)),
        };
        let automorphisms = recover_cyclic_maps(&graph, &graph)?;
        let std_map = build_standardization_map(&automorphisms);
        Ok(CanonicalFragment {
            smiles: smiles.to_string(),
            kind,
            graph,
            automorphisms,
            std_map,
        })
    }

    /// Elementwise standardization of a tuple.
    pub fn orbit_key(&self, a: Attach) -> Attach {
        a.map(|i| self.std_map[i])
    }

    /// Smallest image of the (unordered) tuple under the fragment's symmetry maps.
    pub fn orbit_min(&self, a: Attach) -> Attach {
        self.automorphisms
            .iter()
            .map(|p| a.map(|i| p[i]).normalized())
            .min()
            .expect("identity is always present")
    }

    /// Symmetry maps sending `from` onto `to` (as ordered tuples).
    pub fn maps_between(&self, from: Attach, to: Attach) -> Vec<&Vec<usize>> {
        self.automorphisms
            .iter()
            .filter(|p| from.map(|i| p[i]) == to)
            .collect()
    }
}

/// A fragment instance placed in its canonical index system.
#[derive(Debug, Clone)]
pub struct PlacedFragment {
    pub canonical: CanonicalFragment,
    /// `to_global[c]`: parent atom of canonical index `c`.
    pub to_global: Vec<usize>,
    /// All recovered canonical→local maps, first one used for `to_global`.
    pub possible_maps: Vec<Vec<usize>>,
}

impl PlacedFragment {
    pub fn to_canonical(&self, global: usize) -> Option<usize> {
        self.to_global.iter().position(|&g| g == global)
    }
}

/// Pi-need atoms joined by flagged bonds, matched as fully as possible.
fn max_match(m: &mut MolGraph, flagged: &[bool], pi: &[bool]) {
    let edges: Vec<usize> = (0..m.bond_count())
        .filter(|&bi| flagged[bi] && pi[m.bond(bi).a] && pi[m.bond(bi).b])
        .collect();
    fn best(
        m: &MolGraph,
        edges: &[usize],
        k: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        out: &mut Vec<usize>,
    ) {
        if k == edges.len() {
            if cur.len() > out.len() {
                *out = cur.clone();
            }
            return;
        }
        let b = m.bond(edges[k]);
        if !used[b.a] && !used[b.b] {
            used[b.a] = true;
            used[b.b] = true;
            cur.push(edges[k]);
            best(m, edges, k + 1, used, cur, out);
            cur.pop();
            used[b.a] = false;
            used[b.b] = false;
        }
        best(m, edges, k + 1, used, cur, out);
    }
    let mut chosen = Vec::new();
    best(
        m,
        &edges,
        0,
        &mut vec![false; m.atom_count()],
        &mut Vec::new(),
        &mut chosen,
    );
    for bi in chosen {
        m.bond_mut(bi).order = BondOrder::Double;
    }
}

/// Standalone graph of a fragment in its local index order.
///
/// Rings that are fully aromatic in the parent are re-kekulized on their own.
/// Partially aromatic rings (fused to an aromatic ring) keep one double bond
/// per parent pi atom where the ring allows it.
pub fn fragment_subgraph(fi: &FragmentInstance, m: &MolGraph) -> Result<MolGraph, CanonError> {
    let mut g = MolGraph::new();
    for &ga in &fi.global_atoms {
        let a = m.atom(ga);
        let mut na = Atom::new(a.element);
        na.formal_charge = a.formal_charge;
        g.add_atom(na);
    }
    let parent_bonds = fi.bonds(m);
    let n = fi.size();
    let mut flagged = Vec::new();
    for (k, &pb) in parent_bonds.iter().enumerate() {
        let (la, lb) = match fi.kind {
            FragmentKind::Bond => (0, 1),
            FragmentKind::Ring => (k, (k + 1) % n),
        };
        let b = m.bond(pb);
        let order = if b.is_aromatic { BondOrder::Single } else { b.order };
        g.add_bond(la, lb, order)?;
        flagged.push(b.is_aromatic);
    }
    if flagged.iter().any(|&f| f) {
        let parent_pi: Vec<bool> = fi
            .global_atoms
            .iter()
            .map(|&ga| {
                m.neighbors(ga).iter().any(|&(_, bi)| {
                    m.bond(bi).is_aromatic && m.bond(bi).order == BondOrder::Double
                })
            })
            .collect();
        let fully = flagged.iter().all(|&f| f);
        let kekulized = fully && {
            let mut trial = g.clone();
            kekulize_bonds(&mut trial, &flagged, &parent_pi).is_ok() && {
                g = trial;
                true
            }
        };
        if !kekulized {
            let pi: Vec<bool> = (0..n)
                .map(|i| {
                    parent_pi[i]
                        && !g
                            .neighbors(i)
                            .iter()
                            .any(|&(_, bi)| g.bond(bi).order != BondOrder::Single)
                })
                .collect();
            max_match(&mut g, &flagged, &pi);
        }
    }
    g.assign_implicit_h()?;
    g.perceive_aromaticity();
    Ok(g)
}

fn shift_order(n: usize) -> Vec<i64> {
    let mut s = vec![0i64];
    for k in 1..n as i64 {
        s.push(k);
        s.push(-k);
    }
    s
}

fn labels_match(a: &MolGraph, i: usize, b: &MolGraph, j: usize) -> bool {
    let (x, y) = (a.atom(i), b.atom(j));
    x.element == y.element
        && x.formal_charge == y.formal_charge
        && x.is_aromatic == y.is_aromatic
        && a.degree(i) == b.degree(j)
}

/// Maps `F` with `F[canonical] = local` that preserve atom labels, bond codes
/// and per-atom fingerprints (Tanimoto 1 at radius ceil(n/2)).
///
/// Enumeration order: identity orientation before reflected, shifts by
/// increasing |s| with positive first.
pub fn recover_cyclic_maps(
    frag_local: &MolGraph,
    frag_canonical: &MolGraph,
) -> Result<Vec<Vec<usize>>, CanonError> {
    let n = frag_canonical.atom_count();
    if frag_local.atom_count() != n || n < 2 {
        return Err(CanonError::NoMap);
    }
    let radius = n.div_ceil(2);
    let fl = atom_fingerprints(frag_local, radius);
    let fc = atom_fingerprints(frag_canonical, radius);
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for reflect in [false, true] {
        for s in shift_order(n) {
            let f: Vec<usize> = (0..n as i64)
                .map(|i| {
                    let base = if reflect { n as i64 - 1 - i } else { i };
                    (base + s).rem_euclid(n as i64) as usize
                })
                .collect();
            if !candidates.contains(&f) {
                candidates.push(f);
            }
        }
    }
    let maps: Vec<Vec<usize>> = candidates
        .into_iter()
        .filter(|f| {
            (0..n).all(|i| {
                labels_match(frag_canonical, i, frag_local, f[i])
                    && tanimoto(&fc[i], &fl[f[i]]).map_or(false, |t| t == 1.0)
            }) && frag_canonical.bonds().iter().all(|b| {
                frag_local
                    .bond_between(f[b.a], f[b.b])
                    .is_some_and(|lb| frag_local.bond(lb).code() == b.code())
            })
        })
        .collect();
    if maps.is_empty() {
        return Err(CanonError::NoMap);
    }
    Ok(maps)
}

/// `std[i] = min_j F0^-1(F_j(i))`.
pub fn build_standardization_map(maps: &[Vec<usize>]) -> Vec<usize> {
    let f0 = &maps[0];
    let mut inv0 = vec![0; f0.len()];
    for (i, &v) in f0.iter().enumerate() {
        inv0[v] = i;
    }
    (0..f0.len())
        .map(|i| maps.iter().map(|f| inv0[f[i]]).min().unwrap())
        .collect()
}

pub fn canonicalize_fragment(
    fi: &FragmentInstance,
    m: &MolGraph,
) -> Result<PlacedFragment, CanonError> {
    let local = fragment_subgraph(fi, m)?;
    let smiles = write_canonical_smiles(&local)?;
    let canonical = CanonicalFragment::from_smiles(&smiles)?;
    let possible_maps = recover_cyclic_maps(&local, &canonical.graph)?;
    let to_global = possible_maps[0]
        .iter()
        .map(|&l| fi.local_to_global(l))
        .collect();
    Ok(PlacedFragment {
        canonical,
        to_global,
        possible_maps,
    })
}

/// Fragments of a molecule, each placed in its canonical index system.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub fragments: Vec<FragmentInstance>,
    pub placed: Vec<PlacedFragment>,
    pub attachments: Vec<GlobalAttachment>,
}

impl Decomposition {
    /// Canonical tuple of `shared` (parent atoms, in order) within fragment `k`.
    pub fn canonical_tuple(&self, k: usize, shared: &[usize]) -> Option<Attach> {
        let idx: Option<Vec<usize>> = shared
            .iter()
            .map(|&g| self.placed[k].to_canonical(g))
            .collect();
        Attach::from_atoms(&idx?)
    }
}

pub fn decompose(m: &MolGraph) -> Result<Decomposition, CanonError> {
    m.require_connected()?;
    let fragments = generate_fragments(m);
    let placed = fragments
        .iter()
        .map(|f| canonicalize_fragment(f, m))
        .collect::<Result<Vec<_>, _>>()?;
    let attachments = derive_attachments(&fragments);
    Ok(Decomposition {
        fragments,
        placed,
        attachments,
    })
}

/// First-seen representative per (fragment, attachment orbit).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttachmentRegistry {
    reps: HashMap<(String, Attach), Attach>,
    order: Vec<(String, Attach)>,
}

impl AttachmentRegistry {
    pub fn new() -> AttachmentRegistry {
        AttachmentRegistry::default()
    }

    pub fn lookup(&self, cf: &CanonicalFragment, a: Attach) -> Option<Attach> {
        self.reps
            .get(&(cf.smiles.clone(), cf.orbit_min(a)))
            .copied()
    }

    /// Insert a representative directly (used when loading a vocabulary).
    pub fn insert(&mut self, cf: &CanonicalFragment, rep: Attach) {
        let key = (cf.smiles.clone(), cf.orbit_min(rep));
        if !self.reps.contains_key(&key) {
            self.reps.insert(key.clone(), rep);
            self.order.push(key);
        }
    }

    /// Representatives of one fragment, in registration order.
    pub fn representatives(&self, smiles: &str) -> Vec<Attach> {
        self.order
            .iter()
            .filter(|(s, _)| s == smiles)
            .map(|k| self.reps[k])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Representative of `canonical_atoms`' orbit, registering it if unseen.
pub fn standardize_attachment(
    canonical_atoms: Attach,
    cf: &CanonicalFragment,
    registry: &mut AttachmentRegistry,
) -> Attach {
    let rep = canonical_atoms.normalized();
    registry.insert(cf, rep);
    registry.lookup(cf, rep).expect("just registered")
}
