//! Regenerate `data/corpus.csv` from `data/corpus_smiles.txt`.
//!
//! Property columns are the synthetic weighted fragment counts, so the
//! calibration loop can be checked against a known ground truth. Molecules
//! that fail to parse or repeat an earlier entry are reported and left out.
//!
//! cargo run --example build_corpus

use std::fmt::Write as _;

use molstory::engine::predictors::SyntheticPredictor;
use molstory::molgraph::{parse_smiles, write_canonical_smiles};

fn main() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let text = std::fs::read_to_string(format!("{dir}/corpus_smiles.txt")).unwrap();
    let mut mols = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match parse_smiles(line) {
            Ok(m) if m.heavy_atom_count() <= 30 => mols.push((line.to_string(), m)),
            Ok(_) => eprintln!("skip {line}: too large"),
            Err(e) => eprintln!("skip {line}: {e}"),
        }
    }
    let mut out = String::from("smiles,logS,redox,sascore\n");
    let mut seen = std::collections::HashSet::new();
    let mut kept = 0;
    for (s, m) in &mols {
        let canon = write_canonical_smiles(m).unwrap();
        if !seen.insert(canon) {
            eprintln!("skip {s}: duplicate");
            continue;
        }
        let p = SyntheticPredictor::score(m).unwrap();
        writeln!(out, "{s},{:.4},{:.4},{:.4}", p[0], p[1], p[2]).unwrap();
        kept += 1;
    }
    std::fs::write(format!("{dir}/corpus.csv"), out).unwrap();
    println!("wrote {kept} molecules");
}
