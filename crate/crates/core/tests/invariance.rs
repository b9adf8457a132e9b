use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use molstory::canon::decompose;
use molstory::io::{ingest_csv, Vocabulary};
use molstory::molgraph::{write_canonical_smiles, MolGraph};
use molstory::story::{replay_story, unroll_story, PartialMolecule, Story};

struct Corpus {
    mols: Vec<MolGraph>,
    vocab: Vocabulary,
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus.csv");
        let mols: Vec<MolGraph> = ingest_csv(&path).unwrap().records.into_iter().map(|r| r.mol).collect();
        let vocab = Vocabulary::build(&mols).unwrap();
        Corpus { mols, vocab }
    })
}

fn shuffled(m: &MolGraph, seed: u64) -> MolGraph {
    let mut perm: Vec<usize> = (0..m.atom_count()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    m.permuted(&perm)
}

fn fragment_multiset(m: &MolGraph) -> Vec<String> {
    let mut v: Vec<String> = decompose(m).unwrap().placed.into_iter().map(|p| p.canonical.smiles).collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_smiles_ignores_atom_order(i in 0usize..250, seed in any::<u64>()) {
        let c = corpus();
        let m = &c.mols[i % c.mols.len()];
        prop_assert_eq!(write_canonical_smiles(m).unwrap(), write_canonical_smiles(&shuffled(m, seed)).unwrap());
    }

    #[test]
    fn fragments_ignore_atom_order(i in 0usize..250, seed in any::<u64>()) {
        let c = corpus();
        let m = &c.mols[i % c.mols.len()];
        prop_assert_eq!(fragment_multiset(m), fragment_multiset(&shuffled(m, seed)));
    }

    #[test]
    fn unroll_replay_round_trip(i in 0usize..250, seed in any::<u64>(), perm in any::<u64>()) {
        let c = corpus();
        let m = shuffled(&c.mols[i % c.mols.len()], perm);
        let story = unroll_story(&m, &c.vocab, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let back = Story::from_text(&story.to_text()).unwrap();
        prop_assert_eq!(&back, &story);
        let rebuilt = replay_story(&back, &c.vocab).unwrap();
        prop_assert_eq!(write_canonical_smiles(&rebuilt).unwrap(), write_canonical_smiles(&m).unwrap());
    }

    #[test]
    fn cauterized_points_never_return(start in 0usize..64, seed in any::<u64>()) {
        let c = corpus();
        let v = &c.vocab;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pm = PartialMolecule::start(v, start % v.fragment_count());
        let mut gone = BTreeSet::new();
        while let Some(&focal) = pm.queue.get(rng.gen_range(0..pm.queue.len().max(1))) {
            let before = pm.queue.len();
            let mut actions = pm.valid_actions(v, focal);
            if pm.instances.len() >= 8 {
                actions = vec![v.cauterize_index()];
            }
            let a = actions[rng.gen_range(0..actions.len())];
            match v.action(a) {
                Some((frag, rep)) if pm.clone().dock(v, focal.inst, focal.at, frag, rep).is_ok() => {
                    pm.dock(v, focal.inst, focal.at, frag, rep).unwrap();
                }
                _ => {
                    pm.cauterize(focal.inst, focal.at).unwrap();
                    gone.insert(focal);
                    prop_assert_eq!(pm.queue.len(), before - 1);
                }
            }
            prop_assert!(pm.queue.iter().all(|p| !gone.contains(p)));
        }
        pm.finalize().unwrap().validate_valences().unwrap();
    }
}

#[test]
fn vocabulary_ignores_atom_order() {
    let c = corpus();
    let moved: Vec<MolGraph> = c.mols.iter().enumerate().map(|(i, m)| shuffled(m, 31 * i as u64 + 5)).collect();
    assert_eq!(Vocabulary::build(&moved).unwrap().to_text(), c.vocab.to_text());
}

#[test]
fn stories_vary_between_epochs() {
    let c = corpus();
    let multi: Vec<&MolGraph> = c.mols.iter().filter(|m| decompose(m).unwrap().placed.len() > 1).collect();
    let differ = multi
        .iter()
        .enumerate()
        .filter(|(i, m)| {
            let a = unroll_story(m, &c.vocab, &mut ChaCha8Rng::seed_from_u64(2 * *i as u64)).unwrap();
            let b = unroll_story(m, &c.vocab, &mut ChaCha8Rng::seed_from_u64(2 * *i as u64 + 1)).unwrap();
            a != b
        })
        .count();
    assert!(differ as f64 >= 0.9 * multi.len() as f64, "{differ} of {}", multi.len());
}
