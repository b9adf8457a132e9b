//! Attributed molecular graphs, SMILES I/O, canonical ranking, valence
//! accounting and per-atom circular fingerprints.
//!
//! Bonds are stored in Kekulé form. Aromaticity is a perceived property
//! (`Atom::is_aromatic`, `Bond::is_aromatic`) refreshed by
//! [`MolGraph::perceive_aromaticity`]; the canonical writer relies on it so
//! that output never depends on which Kekulé structure the input used.

mod aromatic;
mod fingerprint;
mod parse;
mod ranks;
mod rings;
mod write;

pub use aromatic::{kekulize_bonds, perceive, Aromaticity};
pub use fingerprint::{
    atom_fingerprint, atom_fingerprints, molecule_fingerprint, morgan_identifiers, stable_hash, tanimoto, AtomFingerprint,
    WidthMismatch, DEFAULT_WIDTH as FINGERPRINT_WIDTH,
};
pub use parse::{parse_smiles, SmilesError, SmilesErrorKind};
pub use ranks::canonical_ranks;
pub use rings::{sssr, RingInfo};
pub use write::write_canonical_smiles;

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MolError {
    #[error("atom index {0} out of range")]
    AtomIndex(usize),
    #[error("bond endpoints must differ (atom {0})")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("valence violation at atom {atom} ({element}): bond order sum {used} exceeds {max}")]
    Valence {
        atom: usize,
        element: Element,
        used: u32,
        max: u32,
    },
    #[error("molecule is disconnected ({0} components)")]
    Disconnected(usize),
    #[error("molecule has no atoms")]
    Empty,
    #[error("no Kekulé structure exists for the aromatic system")]
    Kekulization,
}

/// Supported chemical elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    H,
    B,
    C,
    N,
    O,
    F,
    P,
    S,
    Cl,
    Br,
    I,
}

impl Element {
    pub fn from_symbol(sym: &str) -> Option<Element> {
        Some(match sym {
            "H" => Element::H,
            "B" => Element::B,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "F" => Element::F,
            "P" => Element::P,
            "S" => Element::S,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    /// Standard neutral valences, ascending.
    pub fn valences(self) -> &'static [u32] {
        match self {
            Element::H => &[1],
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
        }
    }

    /// Elements written without brackets when charge and H count allow it.
    pub fn in_organic_subset(self) -> bool {
        !matches!(self, Element::H)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Charge-adjusted valences (isoelectronic shift), ascending.
pub fn allowed_valences(element: Element, charge: i8) -> Vec<u32> {
    let c = charge as i32;
    let mut out: Vec<u32> = element
        .valences()
        .iter()
        .filter_map(|&v| {
            let v = v as i32;
            let adj = match element {
                Element::C | Element::H => v - c.abs(),
                Element::B => v - c,
                _ => v + c,
            };
            (adj >= 0).then_some(adj as u32)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn max_valence(element: Element, charge: i8) -> u32 {
    allowed_valences(element, charge).last().copied().unwrap_or(0)
}

/// Smallest allowed valence that accommodates `used`, if any.
pub fn default_valence(element: Element, charge: i8, used: u32) -> Option<u32> {
    allowed_valences(element, charge).into_iter().find(|&v| v >= used)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub is_aromatic: bool,
    pub implicit_h: u8,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            formal_charge: 0,
            is_aromatic: false,
            implicit_h: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    /// Only present transiently while parsing, before kekulization.
    Aromatic,
}

impl BondOrder {
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub is_aromatic: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    /// Kekulé-independent bond label: aromatic bonds get their own code.
    pub fn code(&self) -> u8 {
        if self.is_aromatic {
            4
        } else {
            self.order.valence() as u8
        }
    }
}

/// Attributed molecular graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    pub coords: Option<Vec<[f64; 3]>>,
}

impl MolGraph {
    pub fn new() -> MolGraph {
        MolGraph::default()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, MolError> {
        let n = self.atoms.len();
        if a >= n {
            return Err(MolError::AtomIndex(a));
        }
        if b >= n {
            return Err(MolError::AtomIndex(b));
        }
        if a == b {
            return Err(MolError::SelfBond(a));
        }
        if self.bond_between(a, b).is_some() {
            return Err(MolError::DuplicateBond(a.min(b), a.max(b)));
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond {
            a,
            b,
            order,
            is_aromatic: false,
        });
        self.adjacency[a].push((b, idx));
        self.adjacency[b].push((a, idx));
        Ok(idx)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn atom_mut(&mut self, i: usize) -> &mut Atom {
        &mut self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn bond_mut(&mut self, i: usize) -> &mut Bond {
        &mut self.bonds[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != Element::H).count()
    }

    /// (neighbor, bond index) pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| bi)
    }

    /// Sum of Kekulé bond orders at atom `i` (hydrogens excluded).
    pub fn explicit_valence(&self, i: usize) -> u32 {
        self.adjacency[i]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence())
            .sum()
    }

    /// Remaining bonding capacity; implicit hydrogens count as available.
    pub fn free_valence(&self, i: usize) -> u32 {
        let a = &self.atoms[i];
        max_valence(a.element, a.formal_charge).saturating_sub(self.explicit_valence(i))
    }

    pub fn total_h(&self, i: usize) -> u32 {
        self.atoms[i].implicit_h as u32
    }

    /// Fill every atom's implicit hydrogens to its smallest allowed valence.
    pub fn assign_implicit_h(&mut self) -> Result<(), MolError> {
        for i in 0..self.atoms.len() {
            let used = self.explicit_valence(i);
            let a = &self.atoms[i];
            let v = default_valence(a.element, a.formal_charge, used).ok_or(MolError::Valence {
                atom: i,
                element: a.element,
                used,
                max: max_valence(a.element, a.formal_charge),
            })?;
            self.atoms[i].implicit_h = (v - used) as u8;
        }
        Ok(())
    }

    /// Check bond-order sum + implicit H against the maximum valence of every atom.
    pub fn validate_valences(&self) -> Result<(), MolError> {
        for (i, a) in self.atoms.iter().enumerate() {
            let used = self.explicit_valence(i) + a.implicit_h as u32;
            let max = max_valence(a.element, a.formal_charge);
            if used > max {
                return Err(MolError::Valence {
                    atom: i,
                    element: a.element,
                    used,
                    max,
                });
            }
        }
        Ok(())
    }

    /// Connected components as a per-atom component id plus the count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = count;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn component_count(&self) -> usize {
        self.components().1
    }

    pub fn require_connected(&self) -> Result<(), MolError> {
        match self.component_count() {
            0 => Err(MolError::Empty),
            1 => Ok(()),
            k => Err(MolError::Disconnected(k)),
        }
    }

    /// Recompute aromatic flags on atoms and bonds from the current Kekulé structure.
    pub fn perceive_aromaticity(&mut self) {
        let rings = sssr(self);
        let arom = perceive(self, &rings);
        for (a, f) in self.atoms.iter_mut().zip(&arom.atoms) {
            a.is_aromatic = *f;
        }
        for (b, f) in self.bonds.iter_mut().zip(&arom.bonds) {
            b.is_aromatic = *f;
        }
    }

    /// Relabel atoms: new index of old atom `i` is `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![Atom::new(Element::C); self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old].clone();
        }
        let mut g = MolGraph::new();
        for a in atoms {
            g.add_atom(a);
        }
        for b in &self.bonds {
            let idx = g
                .add_bond(perm[b.a], perm[b.b], b.order)
                .expect("permutation preserves simple graph");
            g.bonds[idx].is_aromatic = b.is_aromatic;
        }
        if let Some(c) = &self.coords {
            let mut nc = vec![[0.0; 3]; c.len()];
            for (old, &new) in perm.iter().enumerate() {
                nc[new] = c[old];
            }
            g.coords = Some(nc);
        }
        g
    }
}
