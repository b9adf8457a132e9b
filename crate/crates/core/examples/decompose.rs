//! Split a molecule into ring and bond fragments and list how they attach.
//!
//!     cargo run --example decompose -- "CC1Cc2nccnc2C1"

use molstory::canon::decompose;
use molstory::molgraph::{parse_smiles, write_canonical_smiles};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let smiles = std::env::args().nth(1).unwrap_or_else(|| "CC1Cc2nccnc2C1".into());
    let m = parse_smiles(&smiles)?;
    println!("{} ({} heavy atoms, {} bonds)", write_canonical_smiles(&m)?, m.heavy_atom_count(), m.bond_count());

    let d = decompose(&m)?;
    for (k, (f, p)) in d.fragments.iter().zip(&d.placed).enumerate() {
        println!("  fragment {k}: {:<10} {:?} atoms {:?}", p.canonical.smiles, f.kind, f.global_atoms);
    }
    for att in &d.attachments {
        let (i, j) = att.fragment_pair;
        let ti = d.canonical_tuple(i, &att.shared_atoms);
        let tj = d.canonical_tuple(j, &att.shared_atoms);
        println!("  {i} <-> {j} via atoms {:?}: {:?} / {:?}", att.shared_atoms, ti, tj);
    }
    Ok(())
}
