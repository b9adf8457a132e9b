//! SMILES reader for the subset documented in `docs/smiles-grammar.md`.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{
    aromatic::kekulize_bonds, default_valence, max_valence, Atom, BondOrder, Element, MolError,
    MolGraph,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("input must be ASCII")]
    NonAscii,
    #[error("unexpected character {0:?}")]
    Unexpected(char),
    #[error("unsupported element {0:?}")]
    UnsupportedElement(String),
    #[error("unsupported feature: {0}")]
    Unsupported(&'static str),
    #[error("bond symbol without a following atom")]
    DanglingBond,
    #[error("unclosed branch")]
    UnclosedBranch,
    #[error("unmatched ring-closure digit {0}")]
    UnmatchedRing(u32),
    #[error("conflicting bond symbols on ring closure {0}")]
    RingBondConflict(u32),
    #[error("unterminated bracket atom")]
    UnterminatedBracket,
    #[error(transparent)]
    Graph(#[from] MolError),
}

/// Parse failure; `position` is the 1-based character column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SMILES error at position {position}: {kind}")]
pub struct SmilesError {
    pub position: usize,
    pub kind: SmilesErrorKind,
}

fn err(pos: usize, kind: SmilesErrorKind) -> SmilesError {
    SmilesError {
        position: pos + 1,
        kind,
    }
}

struct ParsedAtom {
    atom: Atom,
    explicit_h: Option<u8>,
    pos: usize,
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    atoms: Vec<ParsedAtom>,
    bonds: Vec<(usize, usize, BondOrder, usize)>,
}

fn aromatic_element(c: u8) -> Option<Element> {
    Some(match c {
        b'b' => Element::B,
        b'c' => Element::C,
        b'n' => Element::N,
        b'o' => Element::O,
        b'p' => Element::P,
        b's' => Element::S,
        _ => return None,
    })
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn bare_atom(&mut self) -> Result<ParsedAtom, SmilesError> {
        let pos = self.i;
        let c = self.s[self.i];
        if let Some(el) = aromatic_element(c) {
            self.i += 1;
            let mut atom = Atom::new(el);
            atom.is_aromatic = true;
            return Ok(ParsedAtom {
                atom,
                explicit_h: None,
                pos,
            });
        }
        let two = self.s.get(self.i..self.i + 2);
        let (sym, len) = match two {
            Some(b"Cl") => ("Cl".to_string(), 2),
            Some(b"Br") => ("Br".to_string(), 2),
            _ => ((c as char).to_string(), 1),
        };
        let el = Element::from_symbol(&sym)
            .filter(|e| e.in_organic_subset())
            .ok_or_else(|| err(pos, SmilesErrorKind::UnsupportedElement(sym.clone())))?;
        self.i += len;
        Ok(ParsedAtom {
            atom: Atom::new(el),
            explicit_h: None,
            pos,
        })
    }

    fn bracket_atom(&mut self) -> Result<ParsedAtom, SmilesError> {
        let open = self.i;
        self.i += 1;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(err(self.i, SmilesErrorKind::Unsupported("isotopes")));
        }
        let pos = self.i;
        let c = self.peek().ok_or_else(|| err(open, SmilesErrorKind::UnterminatedBracket))?;
        let mut atom = if c.is_ascii_lowercase() {
            let next = self.s.get(self.i + 1).copied();
            if next.is_some_and(|n| n.is_ascii_lowercase()) {
                let sym = String::from_utf8_lossy(&self.s[self.i..self.i + 2]).into_owned();
                return Err(err(pos, SmilesErrorKind::UnsupportedElement(sym)));
            }
            let el = aromatic_element(c).ok_or_else(|| {
                err(pos, SmilesErrorKind::UnsupportedElement((c as char).to_string()))
            })?;
            self.i += 1;
            let mut a = Atom::new(el);
            a.is_aromatic = true;
            a
        } else if c.is_ascii_uppercase() {
            let mut len = 1;
            if self.s.get(self.i + 1).is_some_and(|n| n.is_ascii_lowercase()) {
                len = 2;
            }
            let sym = String::from_utf8_lossy(&self.s[self.i..self.i + len]).into_owned();
            let el = Element::from_symbol(&sym)
                .ok_or_else(|| err(pos, SmilesErrorKind::UnsupportedElement(sym.clone())))?;
            self.i += len;
            Atom::new(el)
        } else if c == b'*' {
            return Err(err(pos, SmilesErrorKind::Unsupported("wildcard atoms")));
        } else {
            return Err(err(pos, SmilesErrorKind::Unexpected(c as char)));
        };
        // chirality is accepted and ignored
        while self.peek() == Some(b'@') {
            self.i += 1;
        }
        let mut h = 0u8;
        if self.peek() == Some(b'H') {
            self.i += 1;
            h = 1;
            if let Some(d) = self.peek().filter(|c| c.is_ascii_digit()) {
                h = d - b'0';
                self.i += 1;
            }
        }
        let mut charge: i32 = 0;
        while let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.i += 1;
            if let Some(d) = self.peek().filter(|c| c.is_ascii_digit()) {
                charge += unit * (d - b'0') as i32;
                self.i += 1;
            } else {
                charge += unit;
            }
        }
        if self.peek() == Some(b':') {
            return Err(err(self.i, SmilesErrorKind::Unsupported("atom classes")));
        }
        if self.peek() != Some(b']') {
            return match self.peek() {
                None => Err(err(open, SmilesErrorKind::UnterminatedBracket)),
                Some(c) => Err(err(self.i, SmilesErrorKind::Unexpected(c as char))),
            };
        }
        self.i += 1;
        atom.formal_charge = charge.clamp(-8, 8) as i8;
        Ok(ParsedAtom {
            atom,
            explicit_h: Some(h),
            pos,
        })
    }

    fn ring_label(&mut self) -> Result<u32, SmilesError> {
        let c = self.s[self.i];
        if c == b'%' {
            let digits = self.s.get(self.i + 1..self.i + 3);
            match digits {
                Some(d) if d.iter().all(|c| c.is_ascii_digit()) => {
                    self.i += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(err(self.i, SmilesErrorKind::Unexpected('%'))),
            }
        } else {
            self.i += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondOrder, usize)> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();
        let mut rings: BTreeMap<u32, (usize, Option<BondOrder>, usize)> = BTreeMap::new();

        while let Some(c) = self.peek() {
            let pos = self.i;
            match c {
                b'[' | b'A'..=b'Z' | b'a'..=b'z' => {
                    let atom = if c == b'[' {
                        self.bracket_atom()?
                    } else {
                        self.bare_atom()?
                    };
                    let idx = self.atoms.len();
                    let aromatic = atom.atom.is_aromatic;
                    self.atoms.push(atom);
                    if let Some(p) = prev {
                        let order = match pending.take() {
                            Some((o, _)) => o,
                            None if aromatic && self.atoms[p].atom.is_aromatic => BondOrder::Aromatic,
                            None => BondOrder::Single,
                        };
                        self.bonds.push((p, idx, order, pos));
                    } else if let Some((_, bpos)) = pending {
                        return Err(err(bpos, SmilesErrorKind::DanglingBond));
                    }
                    prev = Some(idx);
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(err(pos, SmilesErrorKind::Unexpected(c as char)));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    pending = Some((order, pos));
                    self.i += 1;
                }
                b'(' => {
                    let p = prev.ok_or_else(|| err(pos, SmilesErrorKind::Unexpected('(')))?;
                    if pending.is_some() {
                        return Err(err(pos, SmilesErrorKind::Unexpected('(')));
                    }
                    branches.push((p, pos));
                    self.i += 1;
                }
                b')' => {
                    if let Some((_, bpos)) = pending {
                        return Err(err(bpos, SmilesErrorKind::DanglingBond));
                    }
                    let (p, _) = branches
                        .pop()
                        .ok_or_else(|| err(pos, SmilesErrorKind::Unexpected(')')))?;
                    prev = Some(p);
                    self.i += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let p = prev.ok_or_else(|| err(pos, SmilesErrorKind::Unexpected(c as char)))?;
                    let label = self.ring_label()?;
                    let sym = pending.take().map(|(o, _)| o);
                    match rings.remove(&label) {
                        Some((q, open_sym, _)) => {
                            let order = match (open_sym, sym) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(err(pos, SmilesErrorKind::RingBondConflict(label)))
                                }
                                (Some(a), _) | (None, Some(a)) => a,
                                (None, None)
                                    if self.atoms[p].atom.is_aromatic
                                        && self.atoms[q].atom.is_aromatic =>
                                {
                                    BondOrder::Aromatic
                                }
                                (None, None) => BondOrder::Single,
                            };
                            self.bonds.push((q, p, order, pos));
                        }
                        None => {
                            rings.insert(label, (p, sym, pos));
                        }
                    }
                }
                b'.' => {
                    if let Some((_, bpos)) = pending {
                        return Err(err(bpos, SmilesErrorKind::DanglingBond));
                    }
                    prev = None;
                    self.i += 1;
                }
                b'*' => return Err(err(pos, SmilesErrorKind::Unsupported("wildcard atoms"))),
                _ => return Err(err(pos, SmilesErrorKind::Unexpected(c as char))),
            }
        }
        if let Some((_, bpos)) = pending {
            return Err(err(bpos, SmilesErrorKind::DanglingBond));
        }
        if let Some(&(_, bpos)) = branches.last() {
            return Err(err(bpos, SmilesErrorKind::UnclosedBranch));
        }
        if let Some((&label, &(_, _, rpos))) = rings.iter().next() {
            return Err(err(rpos, SmilesErrorKind::UnmatchedRing(label)));
        }
        Ok(())
    }
}

/// Whether an aromatic atom must carry one double bond in the Kekulé form.
fn needs_pi(el: Element, charge: i8, explicit_h: Option<u8>, degree: usize) -> bool {
    match explicit_h {
        None => match el {
            Element::C => true,
            Element::N | Element::P => degree != 3,
            _ => false,
        },
        Some(h) => match el {
            Element::C => charge == 0,
            Element::N | Element::P => {
                charge == 1 || (charge == 0 && h == 0 && degree + (h as usize) != 3)
            }
            Element::O | Element::S => charge == 1,
            _ => false,
        },
    }
}

/// Parse a SMILES string into a Kekulé-form graph with implicit hydrogens
/// and perceived aromaticity.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    if text.is_empty() {
        return Err(err(0, SmilesErrorKind::Empty));
    }
    if let Some(p) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(err(p, SmilesErrorKind::NonAscii));
    }
    let mut p = Parser {
        s: text.as_bytes(),
        i: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
    };
    p.run()?;

    let mut m = MolGraph::new();
    for pa in &p.atoms {
        let mut a = pa.atom.clone();
        a.is_aromatic = false;
        m.add_atom(a);
    }
    let mut flagged = Vec::new();
    for &(a, b, order, pos) in &p.bonds {
        m.add_bond(a, b, order).map_err(|e| err(pos, e.into()))?;
        flagged.push(order == BondOrder::Aromatic);
    }
    let pi: Vec<bool> = p
        .atoms
        .iter()
        .enumerate()
        .map(|(i, pa)| {
            pa.atom.is_aromatic
                && needs_pi(pa.atom.element, pa.atom.formal_charge, pa.explicit_h, m.degree(i))
        })
        .collect();
    if flagged.iter().any(|&f| f) || pi.iter().any(|&f| f) {
        let first = p.atoms.iter().find(|a| a.atom.is_aromatic).map_or(0, |a| a.pos);
        kekulize_bonds(&mut m, &flagged, &pi).map_err(|e| err(first, e.into()))?;
    }
    for (i, pa) in p.atoms.iter().enumerate() {
        let used = m.explicit_valence(i);
        let (el, charge) = (pa.atom.element, pa.atom.formal_charge);
        let max = max_valence(el, charge);
        let violation = || {
            err(
                pa.pos,
                MolError::Valence {
                    atom: i,
                    element: el,
                    used,
                    max,
                }
                .into(),
            )
        };
        let h = match pa.explicit_h {
            Some(h) => {
                if used + h as u32 > max {
                    return Err(violation());
                }
                h
            }
            None => {
                let v = default_valence(el, charge, used).ok_or_else(violation)?;
                (v - used) as u8
            }
        };
        m.atom_mut(i).implicit_h = h;
    }
    m.perceive_aromaticity();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methane_has_four_hydrogens() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(m.atom_count(), 1);
        assert_eq!(m.atom(0).implicit_h, 4);
    }

    #[test]
    fn cyclopentenedione_acid_counts() {
        let m = parse_smiles("O=C1CC(=O)C=C1C(=O)O").unwrap();
        assert_eq!(m.heavy_atom_count(), 10);
        assert_eq!(m.bond_count(), 10);
        let rings = crate::molgraph::sssr(&m);
        assert_eq!(rings.rings.len(), 1);
        assert_eq!(rings.rings[0].len(), 5);
    }

    #[test]
    fn unsupported_element_position() {
        let e = parse_smiles("C1CC1X").unwrap_err();
        assert_eq!(e.position, 6);
        assert!(matches!(e.kind, SmilesErrorKind::UnsupportedElement(ref s) if s == "X"));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_smiles("").unwrap_err().kind, SmilesErrorKind::Empty));
        assert!(matches!(
            parse_smiles("C1CC").unwrap_err().kind,
            SmilesErrorKind::UnmatchedRing(1)
        ));
        assert!(matches!(
            parse_smiles("CC(C").unwrap_err().kind,
            SmilesErrorKind::UnclosedBranch
        ));
        assert!(matches!(
            parse_smiles("CC=").unwrap_err().kind,
            SmilesErrorKind::DanglingBond
        ));
        assert!(matches!(
            parse_smiles("[Na+]").unwrap_err().kind,
            SmilesErrorKind::UnsupportedElement(_)
        ));
        assert!(parse_smiles("CC)").is_err());
    }

    #[test]
    fn valence_violation() {
        let e = parse_smiles("C(C)(C)(C)(C)C").unwrap_err();
        assert!(matches!(e.kind, SmilesErrorKind::Graph(MolError::Valence { .. })));
        assert!(parse_smiles("O=O=O").is_err());
    }

    #[test]
    fn bracket_atoms_and_charges() {
        let m = parse_smiles("C[N+](C)(C)C").unwrap();
        assert_eq!(m.atom(1).formal_charge, 1);
        assert_eq!(m.atom(1).implicit_h, 0);
        let m = parse_smiles("CC(=O)[O-]").unwrap();
        assert_eq!(m.atom(3).formal_charge, -1);
        let m = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(m.atom(3).implicit_h, 1);
    }

    #[test]
    fn aromatic_input_is_kekulized() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let doubles = m.bonds().iter().filter(|b| b.order == BondOrder::Double).count();
        assert_eq!(doubles, 3);
        assert!(m.bonds().iter().all(|b| b.is_aromatic));
        for i in 0..6 {
            assert_eq!(m.atom(i).implicit_h, 1);
        }
    }

    #[test]
    fn unkekulizable_input_rejected() {
        assert!(parse_smiles("c1cccc1").is_err());
    }

    #[test]
    fn sulfur_valences() {
        let m = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(m.atom(1).implicit_h, 0);
        let m = parse_smiles("CS").unwrap();
        assert_eq!(m.atom(1).implicit_h, 1);
    }
}
