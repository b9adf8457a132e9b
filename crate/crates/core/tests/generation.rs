use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use molstory::engine::{generate_from, sample_masked, sample_start_fragment, GenerateOptions, Standardizer, UniformModel};
use molstory::geometry::{GeometryProvider, ProviderKind};
use molstory::io::{build_vocabulary_from_smiles, Vocabulary};
use molstory::molgraph::{parse_smiles, write_canonical_smiles};
use molstory::story::PartialMolecule;

#[test]
fn top_k_start_is_uniform_over_the_k_best() {
    let probs = [0.05, 0.3, 0.02, 0.25, 0.2, 0.18];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0usize; 6];
    let n = 10_000;
    for _ in 0..n {
        counts[sample_start_fragment(&probs, 3, &mut rng)] += 1;
    }
    for i in [1, 3, 4] {
        let f = counts[i] as f64 / n as f64;
        assert!((f - 1.0 / 3.0).abs() < 0.02, "fragment {i}: {f}");
    }
    assert_eq!(counts[0] + counts[2] + counts[5], 0);
}

#[test]
fn masked_sampling_never_leaves_the_mask() {
    let logits = [5.0, -1.0, 0.3, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut hits = [0usize; 4];
    for _ in 0..4000 {
        hits[sample_masked(&logits, &[1, 2], &mut rng)] += 1;
    }
    assert_eq!(hits[0] + hits[3], 0);
    // softmax restricted to {1, 2}
    let p2 = 1.0 / (1.0 + (-1.3f64).exp());
    assert!((hits[2] as f64 / 4000.0 - p2).abs() < 0.03);
}

/// Probability of each final molecule under uniform logits: a uniformly
/// chosen queue entry, then a uniform choice among the actions that dock.
fn exact_law(vocab: &Vocabulary, pm: &PartialMolecule, max_fragments: usize, p: f64, out: &mut BTreeMap<String, f64>) {
    if pm.queue.is_empty() {
        let s = write_canonical_smiles(&pm.finalize().unwrap()).unwrap();
        *out.entry(s).or_default() += p;
        return;
    }
    let q = pm.queue.len() as f64;
    for &focal in &pm.queue {
        let mut next = Vec::new();
        if pm.instances.len() < max_fragments {
            for a in 0..vocab.action_count() {
                let (frag, rep) = vocab.action(a).unwrap();
                let mut child = pm.clone();
                if child.dock(vocab, focal.inst, focal.at, frag, rep).is_ok() {
                    next.push(child);
                }
            }
        }
        let mut caut = pm.clone();
        caut.cauterize(focal.inst, focal.at).unwrap();
        next.push(caut);
        let share = p / q / next.len() as f64;
        for child in &next {
            exact_law(vocab, child, max_fragments, share, out);
        }
    }
}

#[test]
fn uniform_model_follows_masked_uniform_law() {
    let vocab = build_vocabulary_from_smiles(&["CCO"]).unwrap();
    assert_eq!(vocab.action_count() + 1, 3);
    let start = vocab.fragment_index("CC").unwrap();
    let max_fragments = 3;

    let mut law = BTreeMap::new();
    exact_law(&vocab, &PartialMolecule::start(&vocab, start), max_fragments, 1.0, &mut law);
    assert!((law.values().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(law.len() >= 4);

    let st = Standardizer::fit(&[[0.0; 3]]);
    let provider = GeometryProvider::new(ProviderKind::None);
    let opts = GenerateOptions { top_k: 1, max_fragments };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20_000;
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..n {
        let (_, s) = generate_from(start, [0.0; 3], &UniformModel, &st, &vocab, &provider, &opts, &mut rng).unwrap();
        *seen.entry(s.final_smiles).or_default() += 1;
    }
    for s in seen.keys() {
        assert!(law.contains_key(s), "{s} is impossible under the exact law");
    }
    for (s, &p) in &law {
        let f = seen.get(s).copied().unwrap_or(0) as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() < 4.0 * sigma + 1e-9, "{s}: sampled {f}, exact {p}");
    }
}

#[test]
fn uniform_generation_is_valid_and_reproducible() {
    let smiles = [
        "CC(=O)Nc1ccc(O)cc1",
        "c1ccc2ccccc2c1",
        "OCC1CCCCC1",
        "CC1Cc2nccnc2C1",
        "O=C1CC(=O)C=C1C(=O)O",
        "Clc1ccncc1Br",
        "C1CCNCC1",
    ];
    let vocab = build_vocabulary_from_smiles(&smiles).unwrap();
    let st = Standardizer::fit(&[[0.0; 3]]);
    let provider = GeometryProvider::default();
    let opts = GenerateOptions { top_k: 3, max_fragments: 12 };
    let run = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..300)
            .map(|i| {
                let start = i % vocab.fragment_count();
                let (m, s) = generate_from(start, [0.0; 3], &UniformModel, &st, &vocab, &provider, &opts, &mut rng).unwrap();
                m.validate_valences().unwrap();
                let reread = parse_smiles(&s.final_smiles).unwrap();
                assert_eq!(write_canonical_smiles(&reread).unwrap(), s.final_smiles);
                assert!(s.fragment_count() <= opts.max_fragments);
                s.final_smiles
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(9), run(9));
}
