//! Molecular stories: unrolling a molecule into start/dock/cauterize steps
//! and replaying steps back into a molecule.
//!
//! Text format, one step per line:
//!
//! ```text
//! START <fragment-smiles>
//! DOCK <instance> <focal-tuple> <fragment-smiles> <representative>
//! CAUT <instance> <focal-tuple>
//! END <canonical-smiles>
//! ```
//!
//! Instances are numbered in placement order (the start fragment is 0).
//! Tuples are canonical indices of the focal instance, `3` or `3,4`.

mod partial;

pub use partial::{Instance, PartialMolecule, Point};

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::canon::{decompose, Attach, CanonError};
use crate::io::Vocabulary;
use crate::molgraph::{write_canonical_smiles, MolError, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoryError {
    #[error("focal point {0} is not in the exploration queue")]
    FocalNotInQueue(Point),
    #[error("arity mismatch: focal {focal}, incoming {incoming}")]
    ArityMismatch { focal: usize, incoming: usize },
    #[error("element mismatch: focal {focal}, incoming {incoming}")]
    ElementMismatch { focal: String, incoming: String },
    #[error("fused bond orders disagree")]
    BondConflict,
    #[error("valence violation at atom {atom}: {used} > {max}")]
    Valence { atom: usize, used: u32, max: u32 },
    #[error("fragment {0} is not in the vocabulary")]
    UnknownFragment(String),
    #[error("attachment {1} of fragment {0} is not in the vocabulary")]
    UnknownAttachment(String, Attach),
    #[error("story ended with {0} open queue entries")]
    QueueNotEmpty(usize),
    #[error("story line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("molecule cannot be decomposed into a story: {0}")]
    Decomposition(String),
    #[error("replayed molecule {got} differs from {expected}")]
    Mismatch { expected: String, got: String },
    #[error(transparent)]
    Mol(#[from] MolError),
    #[error(transparent)]
    Canon(#[from] CanonError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoryStep {
    Start {
        fragment: String,
    },
    Dock {
        inst: usize,
        focal: Attach,
        fragment: String,
        rep: Attach,
    },
    Cauterize {
        inst: usize,
        focal: Attach,
    },
}

impl StoryStep {
    pub fn focal(&self) -> Option<Point> {
        match *self {
            StoryStep::Start { .. } => None,
            StoryStep::Dock { inst, focal, .. } | StoryStep::Cauterize { inst, focal } => {
                Some(Point {
                    inst,
                    at: focal.normalized(),
                })
            }
        }
    }

    /// Action index of a dock or cauterize step.
    pub fn action(&self, vocab: &Vocabulary) -> Result<usize, StoryError> {
        match self {
            StoryStep::Start { fragment } => Err(StoryError::UnknownFragment(fragment.clone())),
            StoryStep::Cauterize { .. } => Ok(vocab.cauterize_index()),
            StoryStep::Dock { fragment, rep, .. } => {
                let f = vocab
                    .fragment_index(fragment)
                    .ok_or_else(|| StoryError::UnknownFragment(fragment.clone()))?;
                vocab
                    .action_index(f, *rep)
                    .ok_or_else(|| StoryError::UnknownAttachment(fragment.clone(), *rep))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Story {
    pub steps: Vec<StoryStep>,
    pub final_smiles: String,
}

impl Story {
    pub fn fragment_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| !matches!(s, StoryStep::Cauterize { .. }))
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for step in &self.steps {
            match step {
                StoryStep::Start { fragment } => writeln!(s, "START {fragment}"),
                StoryStep::Dock {
                    inst,
                    focal,
                    fragment,
                    rep,
                } => writeln!(s, "DOCK {inst} {focal} {fragment} {rep}"),
                StoryStep::Cauterize { inst, focal } => writeln!(s, "CAUT {inst} {focal}"),
            }
            .unwrap();
        }
        writeln!(s, "END {}", self.final_smiles).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Story, StoryError> {
        let mut steps = Vec::new();
        let mut final_smiles = None;
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| StoryError::Format {
                line: i + 1,
                msg: msg.to_string(),
            };
            if line.trim().is_empty() {
                continue;
            }
            if final_smiles.is_some() {
                return Err(err("content after END"));
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |t: &str| t.parse::<usize>().map_err(|_| err("bad instance index"));
            let tuple = |t: &str| Attach::parse(t).ok_or_else(|| err("bad tuple"));
            match tok.as_slice() {
                ["START", f] => steps.push(StoryStep::Start {
                    fragment: f.to_string(),
                }),
                ["DOCK", i, a, f, r] => steps.push(StoryStep::Dock {
                    inst: num(i)?,
                    focal: tuple(a)?,
                    fragment: f.to_string(),
                    rep: tuple(r)?,
                }),
                ["CAUT", i, a] => steps.push(StoryStep::Cauterize {
                    inst: num(i)?,
                    focal: tuple(a)?,
                }),
                ["END", s] => final_smiles = Some(s.to_string()),
                _ => return Err(err("unrecognized step")),
            }
        }
        let starts = steps
            .iter()
            .filter(|s| matches!(s, StoryStep::Start { .. }))
            .count();
        if starts != 1 || !matches!(steps.first(), Some(StoryStep::Start { .. })) {
            return Err(StoryError::Format {
                line: 1,
                msg: "START must appear exactly once, first".into(),
            });
        }
        Ok(Story {
            steps,
            final_smiles: final_smiles.ok_or(StoryError::Format {
                line: text.lines().count(),
                msg: "missing END".into(),
            })?,
        })
    }
}

fn fragment_of(vocab: &Vocabulary, smiles: &str) -> Result<usize, StoryError> {
    vocab
        .fragment_index(smiles)
        .ok_or_else(|| StoryError::UnknownFragment(smiles.to_string()))
}

/// Apply one step to a partial molecule (None for the start step).
pub fn apply_step(
    pm: Option<PartialMolecule>,
    step: &StoryStep,
    vocab: &Vocabulary,
) -> Result<PartialMolecule, StoryError> {
    match (pm, step) {
        (None, StoryStep::Start { fragment }) => {
            Ok(PartialMolecule::start(vocab, fragment_of(vocab, fragment)?))
        }
        (Some(mut pm), StoryStep::Dock {
            inst,
            focal,
            fragment,
            rep,
        }) => {
            pm.dock(vocab, *inst, *focal, fragment_of(vocab, fragment)?, *rep)?;
            Ok(pm)
        }
        (Some(mut pm), StoryStep::Cauterize { inst, focal }) => {
            pm.cauterize(*inst, *focal)?;
            Ok(pm)
        }
        _ => Err(StoryError::Format {
            line: 0,
            msg: "START must appear exactly once, first".into(),
        }),
    }
}

/// Replay every step, calling `visit` with the state before each non-start step.
pub fn replay_visit(
    story: &Story,
    vocab: &Vocabulary,
    mut visit: impl FnMut(&PartialMolecule, &StoryStep),
) -> Result<MolGraph, StoryError> {
    let mut pm: Option<PartialMolecule> = None;
    for step in &story.steps {
        if let Some(p) = &pm {
            visit(p, step);
        }
        pm = Some(apply_step(pm, step, vocab)?);
    }
    let pm = pm.ok_or(StoryError::Format {
        line: 0,
        msg: "empty story".into(),
    })?;
    if !pm.queue.is_empty() {
        return Err(StoryError::QueueNotEmpty(pm.queue.len()));
    }
    let m = pm.finalize()?;
    let got = write_canonical_smiles(&m)?;
    if got != story.final_smiles {
        return Err(StoryError::Mismatch {
            expected: story.final_smiles.clone(),
            got,
        });
    }
    Ok(m)
}

pub fn replay_story(story: &Story, vocab: &Vocabulary) -> Result<MolGraph, StoryError> {
    replay_visit(story, vocab, |_, _| {})
}

/// Decompose `m` and grow it back from a random start, exploring the queue
/// in random order. Symmetric fragments keep every source
/// correspondence that is still consistent; a choice is committed only when
/// a dock needs it.
pub fn unroll_story<R: Rng>(
    m: &MolGraph,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Story, StoryError> {
    let target = write_canonical_smiles(m)?;
    let d = decompose(m)?;
    let nf = d.fragments.len();
    let fidx: Vec<usize> = d
        .placed
        .iter()
        .map(|p| fragment_of(vocab, &p.canonical.smiles))
        .collect::<Result<_, _>>()?;
    let phi = |k: usize, alpha: &[usize], c: usize| d.placed[k].to_global[alpha[c]];

    let start = rng.gen_range(0..nf);
    let mut pm = PartialMolecule::start(vocab, fidx[start]);
    let mut steps = vec![StoryStep::Start {
        fragment: d.placed[start].canonical.smiles.clone(),
    }];
    let mut added = vec![false; nf];
    added[start] = true;
    let mut source = vec![start];
    let mut cands: Vec<Vec<usize>> =
        vec![(0..d.placed[start].canonical.automorphisms.len()).collect()];

    while !pm.queue.is_empty() {
        let p = pm.queue[rng.gen_range(0..pm.queue.len())];
        let k = source[p.inst];
        let auts = &d.placed[k].canonical.automorphisms;
        // (fragment smiles, representative, source index), location, target
        let mut best: Option<((String, Attach, usize), Vec<usize>)> = None;
        for &a in &cands[p.inst] {
            let loc: Vec<usize> = p.at.atoms().iter().map(|&c| phi(k, &auts[a], c)).collect();
            let mut set = loc.clone();
            set.sort_unstable();
            for att in &d.attachments {
                let (i, j) = att.fragment_pair;
                let other = match (i == k, j == k) {
                    (true, _) => j,
                    (_, true) => i,
                    _ => continue,
                };
                if added[other] {
                    continue;
                }
                let mut shared = att.shared_atoms.clone();
                shared.sort_unstable();
                if shared != set {
                    continue;
                }
                let t = d.canonical_tuple(other, &loc).expect("shared atoms lie in fragment");
                let rep = vocab.representative(fidx[other], t).ok_or_else(|| {
                    StoryError::UnknownAttachment(d.placed[other].canonical.smiles.clone(), t)
                })?;
                let key = (d.placed[other].canonical.smiles.clone(), rep, other);
                if best.as_ref().map_or(true, |(b, _)| key < *b) {
                    best = Some((key, loc.clone()));
                }
            }
        }
        let Some(((smiles, rep, other), loc)) = best else {
            pm.cauterize(p.inst, p.at)?;
            steps.push(StoryStep::Cauterize {
                inst: p.inst,
                focal: p.at,
            });
            continue;
        };
        cands[p.inst].retain(|&a| {
            p.at.atoms()
                .iter()
                .map(|&c| phi(k, &auts[a], c))
                .eq(loc.iter().copied())
        });
        let oauts = &d.placed[other].canonical.automorphisms;
        let matching = |want: &[usize]| -> Vec<usize> {
            (0..oauts.len())
                .filter(|&b| {
                    rep.atoms()
                        .iter()
                        .map(|&c| phi(other, &oauts[b], c))
                        .eq(want.iter().copied())
                })
                .collect()
        };
        let forward = matching(&loc);
        let (focal, new_cands) = if !forward.is_empty() {
            (p.at, forward)
        } else {
            let rev: Vec<usize> = loc.iter().rev().copied().collect();
            (p.at.reversed(), matching(&rev))
        };
        if new_cands.is_empty() {
            return Err(StoryError::Decomposition(format!(
                "no correspondence for {smiles} at {loc:?}"
            )));
        }
        pm.dock(vocab, p.inst, focal, fidx[other], rep)?;
        steps.push(StoryStep::Dock {
            inst: p.inst,
            focal,
            fragment: smiles,
            rep,
        });
        added[other] = true;
        source.push(other);
        cands.push(new_cands);
    }

    if let Some(k) = added.iter().position(|&a| !a) {
        return Err(StoryError::Decomposition(format!(
            "fragment {} never reached",
            d.placed[k].canonical.smiles
        )));
    }
    let got = write_canonical_smiles(&pm.finalize()?)?;
    if got != target {
        return Err(StoryError::Decomposition(format!(
            "regrown molecule {got} differs from {target}"
        )));
    }
    Ok(Story {
        steps,
        final_smiles: target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::build_vocabulary_from_smiles;
    use crate::molgraph::parse_smiles;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(smiles: &[&str], seeds: u64) {
        let v = build_vocabulary_from_smiles(smiles).unwrap();
        for s in smiles {
            let m = parse_smiles(s).unwrap();
            for seed in 0..seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let story = unroll_story(&m, &v, &mut rng)
                    .unwrap_or_else(|e| panic!("{s} seed {seed}: {e}"));
                let back = Story::from_text(&story.to_text()).unwrap();
                assert_eq!(back, story);
                replay_story(&story, &v).unwrap_or_else(|e| panic!("{s} seed {seed}: {e}"));
            }
        }
    }

    #[test]
    fn benzene_story_is_start_then_cauterize() {
        let v = build_vocabulary_from_smiles(&["c1ccccc1", "Cc1ccccc1"]).unwrap();
        let m = parse_smiles("c1ccccc1").unwrap();
        let story = unroll_story(&m, &v, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(story.steps.len(), 7);
        assert!(story.steps[1..]
            .iter()
            .all(|s| matches!(s, StoryStep::Cauterize { .. })));
    }

    #[test]
    fn fused_pyrazine_round_trip() {
        round_trip(&["CC1Cc2nccnc2C1"], 20);
        let v = build_vocabulary_from_smiles(&["CC1Cc2nccnc2C1"]).unwrap();
        let m = parse_smiles("CC1Cc2nccnc2C1").unwrap();
        let story = unroll_story(&m, &v, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(story.fragment_count(), 3);
    }

    #[test]
    fn assorted_round_trips() {
        round_trip(
            &[
                "O=C1CC(=O)C=C1C(=O)O",
                "O=C(O)C1=Nc2c(cc(C(=O)O)c(C(=O)O)c2C(=O)O)C1",
                "CC(C)(C)c1ccc(O)cc1",
                "c1ccc2ccccc2c1",
                "c1ccc2[nH]ccc2c1",
                "C1CCC2(CC1)CCCC2",
                "c1ccccc1-c1ccccc1",
                "CC1(C)CCCCC1",
                "O=S(=O)(O)c1ccccc1",
                "C1CCC2CCCCC2C1",
            ],
            10,
        );
    }

    #[test]
    fn deterministic_for_seed() {
        let v = build_vocabulary_from_smiles(&["CC(C)Cc1ccc(C(C)C(=O)O)cc1"]).unwrap();
        let m = parse_smiles("CC(C)Cc1ccc(C(C)C(=O)O)cc1").unwrap();
        let a = unroll_story(&m, &v, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = unroll_story(&m, &v, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }
}
