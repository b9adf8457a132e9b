//! Grow molecules for a property prompt.
//!
//! With a vocabulary, model and initializer file (as written by the `train`
//! and `train-init` commands) the trained model drives sampling; without them
//! every legal action is equally likely, over the bundled corpus vocabulary.
//!
//!     cargo run --example generate -- [count] [vocab model init]

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use molstory::engine::{
    generate, generate_from, sample_start_fragment, GenerateOptions, InitializerBundle, ModelBundle, Standardizer,
    UniformModel,
};
use molstory::geometry::GeometryProvider;
use molstory::io::{ingest_csv, Vocabulary};
use molstory::molgraph::MolGraph;
use molstory::story::Story;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let count: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus.csv");
    let records = ingest_csv(&corpus)?.records;
    let prompt = records[0].conditions();
    let opts = GenerateOptions {
        top_k: 3,
        max_fragments: 25,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let mut out: Vec<(MolGraph, Story)> = Vec::new();
    if let [_, _, v, w, i] = &args[..] {
        let vocab = Vocabulary::from_text(&std::fs::read_to_string(v)?)?;
        let mb = ModelBundle::load(Path::new(w), &vocab)?;
        let ib = InitializerBundle::load(Path::new(i), &vocab)?;
        let provider = GeometryProvider::new(mb.provider);
        for _ in 0..count {
            out.push(generate(prompt, &mb.model, &ib.init, &mb.standardizer, &vocab, &provider, &opts, &mut rng)?);
        }
    } else {
        let vocab = Vocabulary::build(&records.iter().map(|r| r.mol.clone()).collect::<Vec<_>>())?;
        let st = Standardizer::fit(&records.iter().map(|r| r.conditions()).collect::<Vec<_>>());
        let freq: Vec<f64> = vocab.fragments().iter().map(|f| f.count as f64).collect();
        let provider = GeometryProvider::default();
        for _ in 0..count {
            let start = sample_start_fragment(&freq, opts.top_k, &mut rng);
            out.push(generate_from(start, prompt, &UniformModel, &st, &vocab, &provider, &opts, &mut rng)?);
        }
    }
    println!("prompt {prompt:?}");
    for (m, story) in &out {
        let ok = m.validate_valences().is_ok();
        println!("{:>2} fragments  valid={ok}  {}", story.fragment_count(), story.final_smiles);
    }
    Ok(())
}
