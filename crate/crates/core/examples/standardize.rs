//! Symmetry of a fragment: the maps onto itself, the standardization map,
//! and which attachment tuples fall into the same class.
//!
//!     cargo run --example standardize -- "C1=CC=NCC1"

use std::collections::BTreeMap;

use molstory::canon::{Attach, CanonicalFragment};
use molstory::molgraph::{parse_smiles, write_canonical_smiles};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let input = std::env::args().nth(1).unwrap_or_else(|| "c1cnccn1".into());
    let cf = CanonicalFragment::from_smiles(&write_canonical_smiles(&parse_smiles(&input)?)?)?;
    println!("{} ({:?}, {} atoms)", cf.smiles, cf.kind, cf.size());
    for (i, p) in cf.automorphisms.iter().enumerate() {
        println!("  map {i}: {p:?}");
    }
    println!("  std_map: {:?}", cf.std_map);

    // Group every single atom and every bonded pair by symmetry class.
    let n = cf.size();
    let mut classes: BTreeMap<Attach, Vec<Attach>> = BTreeMap::new();
    let mut tuples: Vec<Attach> = (0..n).filter_map(|i| Attach::from_atoms(&[i])).collect();
    for b in 0..cf.graph.bond_count() {
        let bond = cf.graph.bond(b);
        tuples.extend(Attach::from_atoms(&[bond.a, bond.b]));
        tuples.extend(Attach::from_atoms(&[bond.b, bond.a]));
    }
    for t in tuples {
        classes.entry(cf.orbit_min(t)).or_default().push(t);
    }
    for (rep, members) in classes {
        println!("  class {rep}: {}", members.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "));
    }
    Ok(())
}
