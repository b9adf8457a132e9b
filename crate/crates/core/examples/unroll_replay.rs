//! Turn a molecule into a random fragment story, print it, and rebuild the
//! molecule from the story text alone.
//!
//!     cargo run --example unroll_replay -- "O=C1CC(=O)C=C1C(=O)O" 3

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use molstory::io::Vocabulary;
use molstory::molgraph::{parse_smiles, write_canonical_smiles};
use molstory::story::{replay_story, unroll_story, Story};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let smiles = args.get(1).cloned().unwrap_or_else(|| "O=C1CC(=O)C=C1C(=O)O".into());
    let seed: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(0);

    let m = parse_smiles(&smiles)?;
    let vocab = Vocabulary::build(std::slice::from_ref(&m))?;
    let story = unroll_story(&m, &vocab, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let text = story.to_text();
    print!("{text}");

    let rebuilt = replay_story(&Story::from_text(&text)?, &vocab)?;
    let (a, b) = (write_canonical_smiles(&m)?, write_canonical_smiles(&rebuilt)?);
    println!("original {a}\nreplayed {b}\n{}", if a == b { "match" } else { "MISMATCH" });
    Ok(())
}
