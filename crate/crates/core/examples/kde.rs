//! How well the training conditions cover a prompt: Gaussian KDE over the
//! standardized (logS, redox, SA) vectors of the bundled corpus.
//!
//!     cargo run --example kde -- -3.0 0.5 3.0

use std::path::Path;

use molstory::engine::{Kde, DEFAULT_BANDWIDTH};
use molstory::io::ingest_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus.csv");
    let conds: Vec<[f64; 3]> = ingest_csv(&corpus)?.records.iter().map(|r| r.conditions()).collect();
    let kde = Kde::fit(&conds, DEFAULT_BANDWIDTH).ok_or("empty corpus")?;

    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let prompt = match args[..] {
        [a, b, c] => [a, b, c],
        _ => conds[0],
    };
    println!("{} training points, h = {}", conds.len(), kde.bandwidth());
    println!("density at {prompt:?}: {:.6e}", kde.score(prompt));
    let far = [prompt[0] + 100.0, prompt[1], prompt[2]];
    println!("density at {far:?}: {:.6e}", kde.score(far));
    Ok(())
}
