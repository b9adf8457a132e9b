//! Decomposition of a molecule into ring and bond fragments.
//!
//! SSSR rings come first (smallest first), then every bond whose two atoms do
//! not already lie together in one collected fragment. Every bond is owned
//! by exactly one fragment; fused rings share their fusion atoms and the bond
//! between them, which the first ring owns.

use crate::molgraph::{sssr, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FragmentKind {
    Ring,
    Bond,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentInstance {
    /// Parent atom indices in local order (ring traversal order for rings).
    pub global_atoms: Vec<usize>,
    pub kind: FragmentKind,
}

impl FragmentInstance {
    pub fn size(&self) -> usize {
        self.global_atoms.len()
    }

    pub fn local_to_global(&self, local: usize) -> usize {
        self.global_atoms[local]
    }

    pub fn global_to_local(&self, global: usize) -> Option<usize> {
        self.global_atoms.iter().position(|&g| g == global)
    }

    pub fn contains(&self, global: usize) -> bool {
        self.global_atoms.contains(&global)
    }

    /// Parent bond indices covered by this fragment.
    pub fn bonds(&self, m: &MolGraph) -> Vec<usize> {
        let n = self.size();
        match self.kind {
            FragmentKind::Bond => vec![m
                .bond_between(self.global_atoms[0], self.global_atoms[1])
                .expect("bond fragment atoms are bonded")],
            FragmentKind::Ring => (0..n)
                .map(|k| {
                    m.bond_between(self.global_atoms[k], self.global_atoms[(k + 1) % n])
                        .expect("ring edges are bonds")
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalAttachment {
    /// Indices into the fragment list, first < second.
    pub fragment_pair: (usize, usize),
    /// Shared parent atoms, in the local order of the first fragment.
    pub shared_atoms: Vec<usize>,
}

pub fn get_sssr(m: &MolGraph) -> Vec<Vec<usize>> {
    sssr(m).rings
}

pub fn generate_fragments(m: &MolGraph) -> Vec<FragmentInstance> {
    let mut frags: Vec<FragmentInstance> = get_sssr(m)
        .into_iter()
        .map(|ring| FragmentInstance {
            global_atoms: ring,
            kind: FragmentKind::Ring,
        })
        .collect();
    for b in m.bonds() {
        if frags.iter().any(|f| f.contains(b.a) && f.contains(b.b)) {
            continue;
        }
        frags.push(FragmentInstance {
            global_atoms: vec![b.a.min(b.b), b.a.max(b.b)],
            kind: FragmentKind::Bond,
        });
    }
    frags
}

/// Owning fragment of every bond: the first collected fragment containing
/// both endpoints. A fusion bond lies on two ring cycles but is owned once.
pub fn bond_owners(m: &MolGraph, frags: &[FragmentInstance]) -> Vec<Option<usize>> {
    m.bonds()
        .iter()
        .map(|b| frags.iter().position(|f| f.contains(b.a) && f.contains(b.b)))
        .collect()
}

pub fn derive_attachments(frags: &[FragmentInstance]) -> Vec<GlobalAttachment> {
    let mut out = Vec::new();
    for i in 0..frags.len() {
        for j in i + 1..frags.len() {
            let shared: Vec<usize> = frags[i]
                .global_atoms
                .iter()
                .copied()
                .filter(|&a| frags[j].contains(a))
                .collect();
            if !shared.is_empty() {
                out.push(GlobalAttachment {
                    fragment_pair: (i, j),
                    shared_atoms: shared,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn fused_pyrazine_molecule() {
        let m = parse_smiles("CC1Cc2nccnc2C1").unwrap();
        let f = generate_fragments(&m);
        let atoms: Vec<Vec<usize>> = f.iter().map(|f| f.global_atoms.clone()).collect();
        assert_eq!(atoms, vec![vec![1, 2, 3, 8, 9], vec![3, 4, 5, 6, 7, 8], vec![0, 1]]);
        let att = derive_attachments(&f);
        assert_eq!(att.len(), 2);
        assert_eq!(att[0].shared_atoms, vec![3, 8]);
        assert_eq!(att[1].shared_atoms, vec![1]);
    }

    #[test]
    fn cyclopentenedione_six_fragments() {
        let m = parse_smiles("O=C1CC(=O)C=C1C(=O)O").unwrap();
        let f = generate_fragments(&m);
        assert_eq!(f.len(), 6);
        assert_eq!(f.iter().filter(|f| f.kind == FragmentKind::Ring).count(), 1);
    }

    #[test]
    fn ethane_and_biphenyl() {
        let m = parse_smiles("CC").unwrap();
        let f = generate_fragments(&m);
        assert_eq!(f.len(), 1);
        assert!(derive_attachments(&f).is_empty());
        let m = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
        let f = generate_fragments(&m);
        assert_eq!(f.len(), 3);
        let att = derive_attachments(&f);
        assert_eq!(att.len(), 2);
        assert!(att.iter().all(|a| a.shared_atoms.len() == 1));
    }

    #[test]
    fn bonds_partitioned() {
        let m = parse_smiles("O=C(O)C1=Nc2c(cc(C(=O)O)c(C(=O)O)c2C(=O)O)C1").unwrap();
        let f = generate_fragments(&m);
        assert_eq!(f.len(), 14);
        let owners = bond_owners(&m, &f);
        assert!(owners.iter().all(|o| o.is_some()));
        for (k, fr) in f.iter().enumerate() {
            if fr.kind == FragmentKind::Bond {
                assert_eq!(owners[fr.bonds(&m)[0]], Some(k));
            }
        }
        let shared = (0..m.bond_count())
            .filter(|&b| f.iter().filter(|fr| fr.bonds(&m).contains(&b)).count() > 1)
            .count();
        assert_eq!(shared, 1);
    }
}
