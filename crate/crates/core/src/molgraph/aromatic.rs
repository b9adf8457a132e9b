use super::{BondOrder, Element, MolError, MolGraph, RingInfo};

/// Perceived aromaticity flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aromaticity {
    pub atoms: Vec<bool>,
    pub bonds: Vec<bool>,
}

/// Pi electrons an atom donates to a ring, or `None` if it rules the ring out.
fn ring_electrons(m: &MolGraph, rings: &RingInfo, i: usize) -> Option<u32> {
    let atom = m.atom(i);
    let mut ring_doubles = 0;
    for &(_, bi) in m.neighbors(i) {
        match m.bond(bi).order {
            BondOrder::Triple => return None,
            BondOrder::Double => {
                if !rings.bond_in_ring[bi] {
                    return None;
                }
                ring_doubles += 1;
            }
            _ => {}
        }
    }
    match ring_doubles {
        0 => {}
        1 => return Some(1),
        _ => return None,
    }
    let connections = m.degree(i) as u32 + atom.implicit_h as u32;
    match (atom.element, atom.formal_charge) {
        (Element::C, -1) => Some(2),
        (Element::C, 1) => Some(0),
        (Element::N | Element::P, 0) if connections == 3 => Some(2),
        (Element::N | Element::P, -1) if connections == 2 => Some(2),
        (Element::O | Element::S, 0) if m.degree(i) == 2 && atom.implicit_h == 0 => Some(2),
        (Element::B, 0) if connections == 3 => Some(0),
        _ => None,
    }
}

/// Per-ring Hückel perception over the SSSR: a ring is aromatic when every
/// atom is sp2-like and the ring holds 4n+2 pi electrons.
pub fn perceive(m: &MolGraph, rings: &RingInfo) -> Aromaticity {
    let mut out = Aromaticity {
        atoms: vec![false; m.atom_count()],
        bonds: vec![false; m.bond_count()],
    };
    for (r, ring) in rings.rings.iter().enumerate() {
        let mut total = 0;
        let mut ok = true;
        for &a in ring {
            match ring_electrons(m, rings, a) {
                Some(e) => total += e,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && total % 4 == 2 {
            for &a in ring {
                out.atoms[a] = true;
            }
            for bi in rings.ring_bonds(m, r) {
                out.bonds[bi] = true;
            }
        }
    }
    out
}

/// Assign double bonds so every `pi` atom gets exactly one double among the
/// flagged bonds. Flagged bonds not chosen become single.
pub fn kekulize_bonds(m: &mut MolGraph, flagged: &[bool], pi: &[bool]) -> Result<(), MolError> {
    let n = m.atom_count();
    let mut options: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (bi, b) in m.bonds().iter().enumerate() {
        if flagged[bi] && pi[b.a] && pi[b.b] {
            options[b.a].push((b.b, bi));
            options[b.b].push((b.a, bi));
        }
    }
    for o in options.iter_mut() {
        o.sort_unstable();
    }
    let mut matched = vec![usize::MAX; n];
    let todo: Vec<usize> = (0..n).filter(|&i| pi[i]).collect();
    if !search(&options, &todo, &mut matched) {
        return Err(MolError::Kekulization);
    }
    for (bi, f) in flagged.iter().enumerate() {
        if *f {
            m.bond_mut(bi).order = BondOrder::Single;
        }
    }
    for &i in &todo {
        let bi = matched[i];
        m.bond_mut(bi).order = BondOrder::Double;
    }
    Ok(())
}

// matched[i] holds the bond index chosen for atom i
fn search(options: &[Vec<(usize, usize)>], todo: &[usize], matched: &mut [usize]) -> bool {
    let mut best: Option<(usize, usize)> = None;
    for &i in todo {
        if matched[i] != usize::MAX {
            continue;
        }
        let avail = options[i].iter().filter(|&&(j, _)| matched[j] == usize::MAX).count();
        if avail == 0 {
            return false;
        }
        if best.map_or(true, |(_, c)| avail < c) {
            best = Some((i, avail));
        }
    }
    let Some((i, _)) = best else { return true };
    for &(j, bi) in &options[i] {
        if matched[j] != usize::MAX {
            continue;
        }
        matched[i] = bi;
        matched[j] = bi;
        if search(options, todo, matched) {
            return true;
        }
        matched[i] = usize::MAX;
        matched[j] = usize::MAX;
    }
    false
}

#[cfg(test)]
mod tests {
    use crate::molgraph::parse_smiles;

    fn aromatic_atoms(s: &str) -> usize {
        let m = parse_smiles(s).unwrap();
        m.atoms().iter().filter(|a| a.is_aromatic).count()
    }

    #[test]
    fn benzene_and_heteroaromatics() {
        assert_eq!(aromatic_atoms("C1=CC=CC=C1"), 6);
        assert_eq!(aromatic_atoms("c1ccncc1"), 6);
        assert_eq!(aromatic_atoms("c1cc[nH]c1"), 5);
        assert_eq!(aromatic_atoms("c1ccoc1"), 5);
        assert_eq!(aromatic_atoms("c1ccsc1"), 5);
    }

    #[test]
    fn non_aromatic_rings() {
        assert_eq!(aromatic_atoms("C1=CCC=C1"), 0);
        assert_eq!(aromatic_atoms("O=C1C=CC(=O)C=C1"), 0);
        assert_eq!(aromatic_atoms("C1CCCCC1"), 0);
    }

    #[test]
    fn fused_systems_independent_of_kekule_form() {
        assert_eq!(aromatic_atoms("C1=CC2=CC=CC=C2C=C1"), 10);
        assert_eq!(aromatic_atoms("C1=CC=C2C=CC=CC2=C1"), 10);
        // indane: only the benzene ring
        assert_eq!(aromatic_atoms("c1ccc2c(c1)CCC2"), 6);
        assert_eq!(aromatic_atoms("c1ccc2[nH]ccc2c1"), 9);
    }
}
