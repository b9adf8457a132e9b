//! Fragment and action vocabulary with a line-oriented text format.
//!
//! ```text
//! molstory-vocab 1
//! fragment <smiles> count=<n> std=<i,j,...>
//! attach <rep> count=<n>
//! ...
//! action <index> <fragment-index> <rep>
//! action <index> CAUTERIZE
//! ```
//!
//! `attach` lines belong to the preceding `fragment`. Fragments are ordered by
//! corpus count (descending) then SMILES; attachments by representative tuple.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::canon::{decompose, Attach, AttachmentRegistry, CanonError, CanonicalFragment};
use crate::fragmenter::FragmentKind;
use crate::molgraph::{parse_smiles, write_canonical_smiles, MolGraph};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("fragment {0} is not in the vocabulary")]
    UnknownFragment(String),
    #[error("attachment {1} of fragment {0} is not in the vocabulary")]
    UnknownAttachment(String, Attach),
    #[error(transparent)]
    Canon(#[from] CanonError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentEntry {
    pub cf: CanonicalFragment,
    pub count: usize,
    /// Registered representatives with corpus counts, sorted by tuple.
    pub attachments: Vec<(Attach, usize)>,
    /// Concrete points (normalized) whose orbit is registered, with their representative.
    pub points: Vec<(Attach, Attach)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    fragments: Vec<FragmentEntry>,
    index: HashMap<String, usize>,
    registry: AttachmentRegistry,
    actions: Vec<(usize, Attach)>,
    action_index: HashMap<(usize, Attach), usize>,
    attach_types: Vec<Attach>,
}

fn candidate_points(cf: &CanonicalFragment) -> Vec<Attach> {
    let n = cf.size();
    let mut out: Vec<Attach> = (0..n).map(Attach::One).collect();
    if cf.kind == FragmentKind::Ring {
        for i in 0..n {
            out.push(Attach::Two(i, (i + 1) % n).normalized());
        }
    }
    out
}

impl Vocabulary {
    fn assemble(
        mut entries: Vec<(CanonicalFragment, usize, Vec<(Attach, usize)>)>,
        registry: AttachmentRegistry,
    ) -> Vocabulary {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.smiles.cmp(&b.0.smiles)));
        let mut fragments = Vec::new();
        let mut index = HashMap::new();
        let mut actions = Vec::new();
        let mut action_index = HashMap::new();
        let mut types = Vec::new();
        for (fi, (cf, count, mut atts)) in entries.into_iter().enumerate() {
            atts.sort();
            let points = candidate_points(&cf)
                .into_iter()
                .filter_map(|p| registry.lookup(&cf, p).map(|r| (p, r)))
                .collect();
            for &(rep, _) in &atts {
                action_index.insert((fi, rep), actions.len());
                actions.push((fi, rep));
                types.push(rep);
            }
            index.insert(cf.smiles.clone(), fi);
            fragments.push(FragmentEntry {
                cf,
                count,
                attachments: atts,
                points,
            });
        }
        types.sort();
        types.dedup();
        Vocabulary {
            fragments,
            index,
            registry,
            actions,
            action_index,
            attach_types: types,
        }
    }

    /// Molecules are rebuilt from their canonical SMILES and processed in
    /// that order, so first-seen representatives depend neither on input
    /// order nor on atom numbering.
    pub fn build(molecules: &[MolGraph]) -> Result<Vocabulary, VocabError> {
        let mut keyed: Vec<(String, MolGraph)> = molecules
            .iter()
            .map(|m| {
                let s = write_canonical_smiles(m).map_err(CanonError::from)?;
                let g = parse_smiles(&s).map_err(|_| CanonError::Reparse(s.clone()))?;
                Ok((s, g))
            })
            .collect::<Result<_, VocabError>>()?;
        keyed.sort_by(|a, b| a.0.cmp(&b.0));

        let mut registry = AttachmentRegistry::new();
        let mut frags: BTreeMap<String, (CanonicalFragment, usize, BTreeMap<Attach, usize>)> =
            BTreeMap::new();
        for (_, m) in &keyed {
            let d = decompose(m)?;
            for p in &d.placed {
                let e = frags
                    .entry(p.canonical.smiles.clone())
                    .or_insert_with(|| (p.canonical.clone(), 0, BTreeMap::new()));
                e.1 += 1;
            }
            for att in &d.attachments {
                let (i, j) = att.fragment_pair;
                for k in [i, j] {
                    let Some(t) = d.canonical_tuple(k, &att.shared_atoms) else {
                        continue;
                    };
                    let cf = &d.placed[k].canonical;
                    let rep = crate::canon::standardize_attachment(t, cf, &mut registry);
                    *frags.get_mut(&cf.smiles).unwrap().2.entry(rep).or_insert(0) += 1;
                }
            }
        }
        let entries = frags
            .into_values()
            .map(|(cf, c, atts)| (cf, c, atts.into_iter().collect()))
            .collect();
        Ok(Vocabulary::assemble(entries, registry))
    }

    pub fn fragment_count(&self) -> usize {
        self.fragments.len()
    }

    pub fn fragments(&self) -> &[FragmentEntry] {
        &self.fragments
    }

    pub fn fragment(&self, i: usize) -> &FragmentEntry {
        &self.fragments[i]
    }

    pub fn fragment_index(&self, smiles: &str) -> Option<usize> {
        self.index.get(smiles).copied()
    }

    pub fn registry(&self) -> &AttachmentRegistry {
        &self.registry
    }

    /// Representative of a concrete tuple on fragment `frag`, if registered.
    pub fn representative(&self, frag: usize, a: Attach) -> Option<Attach> {
        self.registry.lookup(&self.fragments[frag].cf, a)
    }

    /// Number of (fragment, attachment) actions, excluding CAUTERIZE.
    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    /// Index of the CAUTERIZE action (always last).
    pub fn cauterize_index(&self) -> usize {
        self.actions.len()
    }

    pub fn action(&self, i: usize) -> Option<(usize, Attach)> {
        self.actions.get(i).copied()
    }

    pub fn action_index(&self, frag: usize, rep: Attach) -> Option<usize> {
        self.action_index.get(&(frag, rep)).copied()
    }

    pub fn attach_types(&self) -> &[Attach] {
        &self.attach_types
    }

    pub fn attach_type_index(&self, rep: Attach) -> Option<usize> {
        self.attach_types.binary_search(&rep).ok()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("molstory-vocab 1\n");
        for f in &self.fragments {
            let std: Vec<String> = f.cf.std_map.iter().map(|i| i.to_string()).collect();
            writeln!(s, "fragment {} count={} std={}", f.cf.smiles, f.count, std.join(",")).unwrap();
            for (a, c) in &f.attachments {
                writeln!(s, "attach {a} count={c}").unwrap();
            }
        }
        for (i, (f, a)) in self.actions.iter().enumerate() {
            writeln!(s, "action {i} {f} {a}").unwrap();
        }
        writeln!(s, "action {} CAUTERIZE", self.actions.len()).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Vocabulary, VocabError> {
        let err = |line: usize, msg: &str| VocabError::Format {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "molstory-vocab 1")) => {}
            _ => return Err(err(1, "missing header")),
        }
        let mut entries: Vec<(CanonicalFragment, usize, Vec<(Attach, usize)>)> = Vec::new();
        let mut registry = AttachmentRegistry::new();
        let mut actions = Vec::new();
        let count_field = |tok: Option<&str>, ln: usize| -> Result<usize, VocabError> {
            tok.and_then(|t| t.strip_prefix("count="))
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad count"))
        };
        for (ln0, line) in lines {
            let ln = ln0 + 1;
            let mut tok = line.split(' ');
            match tok.next() {
                Some("fragment") => {
                    let smiles = tok.next().ok_or_else(|| err(ln, "missing smiles"))?;
                    let count = count_field(tok.next(), ln)?;
                    let cf = CanonicalFragment::from_smiles(smiles)?;
                    let std: Vec<String> = cf.std_map.iter().map(|i| i.to_string()).collect();
                    if tok.next() != Some(&format!("std={}", std.join(","))) {
                        return Err(err(ln, "std map disagrees with fragment"));
                    }
                    entries.push((cf, count, Vec::new()));
                }
                Some("attach") => {
                    let a = tok
                        .next()
                        .and_then(Attach::parse)
                        .ok_or_else(|| err(ln, "bad attachment"))?;
                    let count = count_field(tok.next(), ln)?;
                    let e = entries.last_mut().ok_or_else(|| err(ln, "attach before fragment"))?;
                    registry.insert(&e.0, a);
                    e.2.push((a, count));
                }
                Some("action") => {
                    let rest: Vec<&str> = tok.collect();
                    actions.push(rest.join(" "));
                }
                _ => return Err(err(ln, "unknown record")),
            }
        }
        let v = Vocabulary::assemble(entries, registry);
        let expected: Vec<String> = v
            .actions
            .iter()
            .enumerate()
            .map(|(i, (f, a))| format!("{i} {f} {a}"))
            .chain([format!("{} CAUTERIZE", v.actions.len())])
            .collect();
        if actions != expected {
            return Err(err(0, "action table disagrees with fragments"));
        }
        Ok(v)
    }
}

/// Parse then build; unparseable entries are an error here (ingestion filters first).
pub fn build_vocabulary_from_smiles(smiles: &[&str]) -> Result<Vocabulary, VocabError> {
    let mols: Vec<MolGraph> = smiles
        .iter()
        .map(|s| parse_smiles(s).map_err(|e| VocabError::Format { line: 0, msg: e.to_string() }))
        .collect::<Result<_, _>>()?;
    Vocabulary::build(&mols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benzene_vocabulary() {
        let v = build_vocabulary_from_smiles(&["c1ccccc1"]).unwrap();
        assert_eq!(v.fragment_count(), 1);
        assert_eq!(v.action_count(), 0);
        assert_eq!(v.cauterize_index(), 0);
    }

    #[test]
    fn fused_pyrazine_vocabulary() {
        let v = build_vocabulary_from_smiles(&["CC1Cc2nccnc2C1"]).unwrap();
        assert_eq!(v.fragment_count(), 3);
        // two attachments, each registered on both of its fragments
        assert_eq!(v.registry().len(), 4);
        let pyr = v.fragment_index("c1cnccn1").unwrap();
        assert_eq!(v.fragment(pyr).attachments.len(), 1);
        assert_eq!(v.fragment(pyr).attachments[0].0.arity(), 2);
    }

    #[test]
    fn text_round_trip_and_order_invariance() {
        let a = ["Cc1ccccc1", "CC(=O)O", "c1ccc2ccccc2c1", "OCC1CCCCC1"];
        let mut b = a;
        b.reverse();
        let va = build_vocabulary_from_smiles(&a).unwrap();
        let vb = build_vocabulary_from_smiles(&b).unwrap();
        let ta = va.to_text();
        assert_eq!(ta, vb.to_text());
        let back = Vocabulary::from_text(&ta).unwrap();
        assert_eq!(back.to_text(), ta);
    }

    #[test]
    fn atom_numbering_does_not_matter() {
        let a = build_vocabulary_from_smiles(&["O=C1CC(=O)C=C1C(=O)O"]).unwrap();
        let b = build_vocabulary_from_smiles(&["C=1C(CC(C1C(=O)O)=O)=O"]).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }
}
