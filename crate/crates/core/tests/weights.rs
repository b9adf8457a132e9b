use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use molstory::engine::{story_samples, vocab_dims, InitializerBundle, ModelBundle, Standardizer};
use molstory::geometry::{GeometryProvider, ProviderKind};
use molstory::io::build_vocabulary_from_smiles;
use molstory::model::{FragmentInitializer, ModelConfig, StoryModel};
use molstory::molgraph::parse_smiles;
use molstory::story::unroll_story;

fn bundle() -> (molstory::io::Vocabulary, ModelBundle) {
    let vocab = build_vocabulary_from_smiles(&["CC1Cc2nccnc2C1", "OCC1CCCCC1"]).unwrap();
    let cfg = ModelConfig {
        frag_dim: 16,
        attach_dim: 8,
        heads: 4,
        layers: 2,
        hidden: 24,
        ..ModelConfig::default()
    };
    let mut model = StoryModel::new(cfg, vocab_dims(&vocab), 21);
    model.set_geometry_scale(0.37);
    let st = Standardizer {
        mean: [-1.5, 0.2, 2.0],
        std: [0.8, 1.0, 0.4],
    };
    let b = ModelBundle {
        model,
        standardizer: st,
        provider: ProviderKind::ForceRelaxed,
    };
    (vocab, b)
}

#[test]
fn model_bundle_round_trip() {
    let (vocab, b) = bundle();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    b.save(&path, &vocab).unwrap();
    let back = ModelBundle::load(&path, &vocab).unwrap();
    assert_eq!(back.model.cfg, b.model.cfg);
    assert_eq!(back.provider, b.provider);
    assert_eq!(back.standardizer, b.standardizer);
    assert_eq!(back.model.geometry_scale(), 0.37);

    let m = parse_smiles("CC1Cc2nccnc2C1").unwrap();
    let story = unroll_story(&m, &vocab, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let provider = GeometryProvider::new(ProviderKind::ForceRelaxed);
    for (x, _) in story_samples(&story, &vocab, &provider, [0.1, 0.0, -0.2]).unwrap() {
        assert_eq!(back.model.logits(&x), b.model.logits(&x));
    }
}

#[test]
fn initializer_bundle_round_trip() {
    let vocab = build_vocabulary_from_smiles(&["CCO", "c1ccccc1C"]).unwrap();
    let b = InitializerBundle {
        init: FragmentInitializer::new(5, vocab.fragment_count(), 2),
        standardizer: Standardizer::fit(&[[0.0, 1.0, 2.0], [1.0, 1.0, 4.0]]),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.bin");
    b.save(&path, &vocab).unwrap();
    let back = InitializerBundle::load(&path, &vocab).unwrap();
    let z = [0.3, -0.1, 0.9];
    assert_eq!(back.init.probabilities(z), b.init.probabilities(z));
    assert_eq!(back.standardizer, b.standardizer);
}

#[test]
fn damaged_or_mismatched_files_are_rejected() {
    let (vocab, b) = bundle();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    b.save(&path, &vocab).unwrap();
    let good = std::fs::read(&path).unwrap();

    let mut flipped = good.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x40;
    std::fs::write(&path, &flipped).unwrap();
    assert!(ModelBundle::load(&path, &vocab).is_err());

    std::fs::write(&path, &good[..good.len() - 9]).unwrap();
    assert!(ModelBundle::load(&path, &vocab).is_err());

    std::fs::write(&path, &good).unwrap();
    let other = build_vocabulary_from_smiles(&["CC1Cc2nccnc2C1"]).unwrap();
    let err = ModelBundle::load(&path, &other).unwrap_err();
    assert!(err.to_string().contains("different vocabulary"), "{err}");
    assert!(ModelBundle::load(&path, &vocab).is_ok());
}
