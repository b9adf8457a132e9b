use std::fmt;

use crate::canon::Attach;
use crate::io::Vocabulary;
use crate::molgraph::{kekulize_bonds, max_valence, Atom, BondOrder, MolGraph};

use super::StoryError;

/// A concrete attachment point: canonical indices on one placed instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub inst: usize,
    pub at: Attach,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.inst, self.at)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Vocabulary fragment index.
    pub frag: usize,
    /// Molecule atom of each canonical index.
    pub atoms: Vec<usize>,
    /// Attachment points enumerated when the instance was placed.
    pub total_points: usize,
}

/// A growing molecule with its exploration queue.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMolecule {
    pub mol: MolGraph,
    pub instances: Vec<Instance>,
    pub queue: Vec<Point>,
    pub cauterized: Vec<Point>,
}

fn has_double(m: &MolGraph, i: usize, only: impl Fn(usize) -> bool) -> bool {
    m.neighbors(i)
        .iter()
        .any(|&(_, bi)| m.bond(bi).order == BondOrder::Double && only(bi))
}

impl PartialMolecule {
    pub fn start(vocab: &Vocabulary, frag: usize) -> PartialMolecule {
        let g = &vocab.fragment(frag).cf.graph;
        let mut mol = MolGraph::new();
        for a in g.atoms() {
            let mut na = a.clone();
            na.implicit_h = 0;
            mol.add_atom(na);
        }
        for b in g.bonds() {
            let bi = mol.add_bond(b.a, b.b, b.order).expect("fragment graph is simple");
            mol.bond_mut(bi).is_aromatic = b.is_aromatic;
        }
        let mut pm = PartialMolecule {
            mol,
            instances: vec![Instance {
                frag,
                atoms: (0..g.atom_count()).collect(),
                total_points: 0,
            }],
            queue: Vec::new(),
            cauterized: Vec::new(),
        };
        pm.add_points(vocab, 0);
        pm
    }

    fn point_open(&self, p: Point) -> bool {
        let atoms = &self.instances[p.inst].atoms;
        p.at.atoms().iter().all(|&c| self.mol.free_valence(atoms[c]) >= 1)
    }

    fn add_points(&mut self, vocab: &Vocabulary, inst: usize) {
        let frag = self.instances[inst].frag;
        let points = &vocab.fragment(frag).points;
        self.instances[inst].total_points = points.len();
        for &(at, _) in points {
            let p = Point { inst, at };
            if self.point_open(p) {
                self.queue.push(p);
            }
        }
    }

    fn prune(&mut self) {
        let queue = std::mem::take(&mut self.queue);
        self.queue = queue.into_iter().filter(|&p| self.point_open(p)).collect();
    }

    fn queue_position(&self, inst: usize, at: Attach) -> Result<usize, StoryError> {
        let p = Point {
            inst,
            at: at.normalized(),
        };
        self.queue
            .iter()
            .position(|&q| q == p)
            .ok_or(StoryError::FocalNotInQueue(p))
    }

    /// Molecule atoms of a concrete tuple on an instance.
    pub fn atoms_of(&self, inst: usize, at: Attach) -> Vec<usize> {
        at.atoms().iter().map(|&c| self.instances[inst].atoms[c]).collect()
    }

    /// Merge fragment `frag` into the molecule with `rep[k]` fused onto focal atom `k`.
    /// Orientation-preserving first, then reversed; first legal one wins.
    fn simulate(
        &self,
        vocab: &Vocabulary,
        inst: usize,
        focal: Attach,
        frag: usize,
        rep: Attach,
    ) -> Result<(MolGraph, Vec<usize>), StoryError> {
        if focal.arity() != rep.arity() {
            return Err(StoryError::ArityMismatch {
                focal: focal.arity(),
                incoming: rep.arity(),
            });
        }
        let g = &vocab.fragment(frag).cf.graph;
        let targets = self.atoms_of(inst, focal);
        let orientations = match rep {
            Attach::One(_) => vec![rep],
            Attach::Two(..) => vec![rep, rep.reversed()],
        };
        let mut last_err = None;
        for o in orientations {
            match self.merge(g, &o.atoms(), &targets) {
                Ok(r) => return Ok(r),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("at least one orientation"))
    }

    fn merge(
        &self,
        g: &MolGraph,
        incoming: &[usize],
        targets: &[usize],
    ) -> Result<(MolGraph, Vec<usize>), StoryError> {
        for (&c, &t) in incoming.iter().zip(targets) {
            let (a, b) = (g.atom(c), self.mol.atom(t));
            if a.element != b.element || a.formal_charge != b.formal_charge {
                return Err(StoryError::ElementMismatch {
                    focal: b.element.to_string(),
                    incoming: a.element.to_string(),
                });
            }
        }
        let mut out = self.mol.clone();
        let old_bonds = out.bond_count();
        let mut map = vec![usize::MAX; g.atom_count()];
        for (&c, &t) in incoming.iter().zip(targets) {
            map[c] = t;
            if g.atom(c).is_aromatic {
                out.atom_mut(t).is_aromatic = true;
            }
        }
        for c in 0..g.atom_count() {
            if map[c] == usize::MAX {
                let mut a: Atom = g.atom(c).clone();
                a.implicit_h = 0;
                map[c] = out.add_atom(a);
            }
        }
        let mut incoming_bond = vec![usize::MAX; g.bond_count()];
        let mut rekekulize = false;
        for (gbi, b) in g.bonds().iter().enumerate() {
            let (u, v) = (map[b.a], map[b.b]);
            match out.bond_between(u, v) {
                Some(bi) => {
                    incoming_bond[gbi] = bi;
                    let existing = out.bond(bi).clone();
                    if existing.is_aromatic || b.is_aromatic {
                        out.bond_mut(bi).is_aromatic = true;
                        rekekulize = true;
                    } else if existing.order != b.order {
                        return Err(StoryError::BondConflict);
                    }
                }
                None => {
                    let bi = out.add_bond(u, v, b.order)?;
                    out.bond_mut(bi).is_aromatic = b.is_aromatic;
                    incoming_bond[gbi] = bi;
                }
            }
        }
        if rekekulize {
            let flagged: Vec<bool> = out.bonds().iter().map(|b| b.is_aromatic).collect();
            let mut pi = vec![false; out.atom_count()];
            for (i, p) in pi.iter_mut().enumerate().take(self.mol.atom_count()) {
                *p = has_double(&self.mol, i, |bi| bi < old_bonds && flagged[bi]);
            }
            for c in 0..g.atom_count() {
                if has_double(g, c, |gbi| flagged[incoming_bond[gbi]]) {
                    pi[map[c]] = true;
                }
            }
            kekulize_bonds(&mut out, &flagged, &pi)?;
        }
        let check: Vec<usize> = if rekekulize {
            (0..out.atom_count()).collect()
        } else {
            targets.to_vec()
        };
        for i in check {
            let a = out.atom(i);
            let max = max_valence(a.element, a.formal_charge);
            let used = out.explicit_valence(i);
            if used > max {
                return Err(StoryError::Valence {
                    atom: i,
                    used,
                    max,
                });
            }
        }
        Ok((out, map))
    }

    /// Dock `frag` (fused through its representative `rep`) onto the focal
    /// tuple of instance `inst`. Returns the new instance id.
    pub fn dock(
        &mut self,
        vocab: &Vocabulary,
        inst: usize,
        focal: Attach,
        frag: usize,
        rep: Attach,
    ) -> Result<usize, StoryError> {
        let qpos = self.queue_position(inst, focal)?;
        if vocab.action_index(frag, rep).is_none() {
            return Err(StoryError::UnknownAttachment(
                vocab.fragment(frag).cf.smiles.clone(),
                rep,
            ));
        }
        let (mol, atoms) = self.simulate(vocab, inst, focal, frag, rep)?;
        self.mol = mol;
        self.queue.remove(qpos);
        self.instances.push(Instance {
            frag,
            atoms,
            total_points: 0,
        });
        let id = self.instances.len() - 1;
        self.add_points(vocab, id);
        self.prune();
        Ok(id)
    }

    pub fn cauterize(&mut self, inst: usize, focal: Attach) -> Result<(), StoryError> {
        let qpos = self.queue_position(inst, focal)?;
        let p = self.queue.remove(qpos);
        self.cauterized.push(p);
        Ok(())
    }

    /// Actions legal at `focal` (a queue entry), CAUTERIZE last.
    pub fn valid_actions(&self, vocab: &Vocabulary, focal: Point) -> Vec<usize> {
        let mut out = Vec::new();
        let targets = self.atoms_of(focal.inst, focal.at);
        for a in 0..vocab.action_count() {
            let (frag, rep) = vocab.action(a).unwrap();
            if rep.arity() != focal.at.arity() {
                continue;
            }
            let g = &vocab.fragment(frag).cf.graph;
            let ok = match rep {
                Attach::One(r) => {
                    let t = targets[0];
                    let (x, y) = (g.atom(r), self.mol.atom(t));
                    x.element == y.element
                        && x.formal_charge == y.formal_charge
                        && self.mol.explicit_valence(t) + g.explicit_valence(r)
                            <= max_valence(y.element, y.formal_charge)
                }
                Attach::Two(..) => self.simulate(vocab, focal.inst, focal.at, frag, rep).is_ok(),
            };
            if ok {
                out.push(a);
            }
        }
        out.push(vocab.cauterize_index());
        out
    }

    /// Raw (in use, free, cauterized) fractions of an instance's attachment points.
    pub fn saturation_raw(&self, inst: usize) -> [f64; 3] {
        let total = self.instances[inst].total_points;
        if total == 0 {
            return [1.0, 0.0, 0.0];
        }
        let free = self.queue.iter().filter(|p| p.inst == inst).count();
        let caut = self.cauterized.iter().filter(|p| p.inst == inst).count();
        let used = total - free - caut;
        let t = total as f64;
        [used as f64 / t, free as f64 / t, caut as f64 / t]
    }

    /// Saturation scaled to [-1, 1].
    pub fn saturation(&self, inst: usize) -> [f64; 3] {
        self.saturation_raw(inst).map(|x| 2.0 * x - 1.0)
    }

    /// Fill open valences with hydrogens and perceive aromaticity.
    pub fn finalize(&self) -> Result<MolGraph, StoryError> {
        let mut m = self.mol.clone();
        m.assign_implicit_h()?;
        m.perceive_aromaticity();
        m.validate_valences()?;
        Ok(m)
    }
}
