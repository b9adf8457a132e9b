//! Train a small model and initializer on the bundled corpus, sweep the logS
//! prompt across its range and score generated molecules with the synthetic
//! fragment-count property. Prints the calibration CSV and the correlation
//! between prompt and mean prediction.
//!
//!     cargo run --release --example calibrate -- [epochs] [axis]

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use molstory::engine::{
    calibrate, generate, train, train_initializer, Axis, CalibrationConfig, GenerateOptions, SyntheticPredictor,
    TrainConfig,
};
use molstory::io::{ingest_csv, Vocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(15);
    let axis: Axis = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(Axis::LogS);

    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus.csv");
    let records = ingest_csv(&corpus)?.records;
    let vocab = Vocabulary::build(&records.iter().map(|r| r.mol.clone()).collect::<Vec<_>>())?;
    let cfg = TrainConfig {
        epochs,
        learning_rate: 2e-3,
        dropout: 0.1,
        frag_dim: 64,
        attach_dim: 16,
        heads: 4,
        hidden: 128,
        seed: 11,
        eval_every: 0,
        ..TrainConfig::default()
    };
    let trained = train(&records, &[], &vocab, &cfg, |m| {
        eprintln!("epoch {} loss {:.4}", m.epoch, m.loss);
        true
    });
    let (init, bce) = train_initializer(&records, &vocab, &trained.standardizer, &cfg);
    eprintln!("initializer bce {bce:.4}");

    let provider = cfg.geometry();
    let opts = GenerateOptions {
        top_k: cfg.top_k,
        max_fragments: cfg.max_fragments,
    };
    let gen = |c: [f64; 3], rng: &mut ChaCha8Rng| {
        generate(c, &trained.model, &init, &trained.standardizer, &vocab, &provider, &opts, rng)
    };
    let report = calibrate(&records, axis, gen, &SyntheticPredictor, &CalibrationConfig::default())
        .ok_or("empty corpus")?;
    print!("{}", report.to_csv());
    eprintln!("pearson(prompt, mean) = {:.3}, {} unique molecules", report.pearson(), report.unique_total);
    Ok(())
}
