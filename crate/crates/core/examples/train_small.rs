//! Memorize a handful of molecules: train on the first N corpus molecules
//! for a fixed number of optimizer steps and report next-action accuracy on
//! freshly drawn stories.
//!
//!     cargo run --release --example train_small -- [N] [steps] [lr] [batch]

use std::path::Path;

use molstory::engine::{accuracy, resample, train, TrainConfig};
use molstory::io::{ingest_csv, Vocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let steps: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let lr: f64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(2e-3);
    let batch: usize = args.get(4).map(|s| s.parse()).transpose()?.unwrap_or(32);

    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus.csv");
    // Positional isomers share fragment-count properties; keep the first
    // molecule of each condition vector so the prompt identifies it.
    let mut seen = std::collections::HashSet::new();
    let records: Vec<_> = ingest_csv(&corpus)?
        .records
        .into_iter()
        .filter(|r| seen.insert(r.conditions().map(f64::to_bits)))
        .take(n)
        .collect();
    let mols: Vec<_> = records.iter().map(|r| r.mol.clone()).collect();
    let vocab = Vocabulary::build(&mols)?;
    println!(
        "{} molecules, {} fragments, {} actions",
        records.len(),
        vocab.fragment_count(),
        vocab.action_count() + 1
    );

    let cfg = TrainConfig {
        epochs: usize::MAX,
        max_steps: steps,
        learning_rate: lr,
        lr_decay_steps: steps,
        batch_size: batch,
        dropout: 0.0,
        frag_dim: 64,
        attach_dim: 16,
        heads: 4,
        layers: 3,
        hidden: 128,
        seed: 7,
        eval_every: 10,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let trained = train(&records, &[], &vocab, &cfg, |m| {
        if let Some(acc) = m.train_accuracy {
            println!(
                "epoch {:3}  steps {:5}  loss {:.4}  acc {:.3}  ({:.1}s)",
                m.epoch,
                m.optimizer_steps,
                m.loss,
                acc,
                start.elapsed().as_secs_f64()
            );
        }
        true
    });

    let (mut hits, mut total) = (0.0, 0.0);
    for s in 0..10 {
        let (samples, _) = resample(&records, &vocab, &cfg, &trained.standardizer, 1_000_000 + s);
        hits += accuracy(&trained.model, &samples) * samples.len() as f64;
        total += samples.len() as f64;
    }
    println!("accuracy over 10 fresh story draws: {:.4} ({total} steps)", hits / total);
    Ok(())
}
