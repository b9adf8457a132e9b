//! Property predictors used to score generated molecules.

use crate::canon::decompose;
use crate::fragmenter::FragmentKind;
use crate::molgraph::{molecule_fingerprint, tanimoto, AtomFingerprint, BondOrder, Element, MolGraph};

pub trait PropertyPredictor: Sync {
    /// Predicted (log-solubility, redox potential, SA score). `prompt` is the
    /// condition the molecule was generated for.
    fn predict(&self, m: &MolGraph, prompt: [f64; 3]) -> Option<[f64; 3]>;
}

/// Returns the prompt itself; a calibration self-test.
pub struct IdentityPredictor;

impl PropertyPredictor for IdentityPredictor {
    fn predict(&self, _m: &MolGraph, prompt: [f64; 3]) -> Option<[f64; 3]> {
        Some(prompt)
    }
}

/// Closed-form property: a weighted count of the molecule's fragments.
pub struct SyntheticPredictor;

/// Per-fragment contribution to (logS, redox, SA).
pub fn fragment_weights(g: &MolGraph, kind: FragmentKind) -> [f64; 3] {
    let hetero = g
        .atoms()
        .iter()
        .filter(|a| !matches!(a.element, Element::C | Element::H))
        .count();
    let polar = g
        .atoms()
        .iter()
        .any(|a| matches!(a.element, Element::O | Element::N));
    let halogen = g
        .atoms()
        .iter()
        .any(|a| matches!(a.element, Element::F | Element::Cl | Element::Br | Element::I));
    let nitrogen = g.atoms().iter().any(|a| a.element == Element::N);
    match kind {
        FragmentKind::Ring => {
            let aromatic = g.atoms().iter().all(|a| a.is_aromatic);
            let logs = if aromatic { -1.1 } else { -0.6 } + 0.3 * hetero as f64;
            let redox = if aromatic { -0.1 } else { 0.05 } + if nitrogen { 0.2 } else { 0.0 };
            let sa = 0.6 + 0.3 * (hetero > 0) as u8 as f64;
            [logs, redox, sa]
        }
        FragmentKind::Bond => {
            let order = g.bond(0).order;
            let carbonyl = order == BondOrder::Double && polar;
            let logs = if halogen {
                -0.7
            } else if polar {
                0.9
            } else {
                -0.25
            };
            let redox = if carbonyl {
                0.35
            } else if nitrogen {
                -0.2
            } else if halogen {
                0.1
            } else if polar {
                -0.15
            } else {
                0.0
            };
            let sa = 0.1 + 0.15 * (hetero > 0) as u8 as f64;
            [logs, redox, sa]
        }
    }
}

impl SyntheticPredictor {
    pub fn score(m: &MolGraph) -> Option<[f64; 3]> {
        let d = decompose(m).ok()?;
        let mut out = [0.0, 0.0, 1.0];
        for p in &d.placed {
            let w = fragment_weights(&p.canonical.graph, p.canonical.kind);
            for k in 0..3 {
                out[k] += w[k];
            }
        }
        Some(out)
    }
}

impl PropertyPredictor for SyntheticPredictor {
    fn predict(&self, m: &MolGraph, _prompt: [f64; 3]) -> Option<[f64; 3]> {
        SyntheticPredictor::score(m)
    }
}

/// Properties of the most similar training molecule (radius-2 fingerprints).
pub struct NearestNeighborPredictor {
    entries: Vec<(AtomFingerprint, [f64; 3])>,
}

impl NearestNeighborPredictor {
    pub fn new<'a>(data: impl IntoIterator<Item = (&'a MolGraph, [f64; 3])>) -> Self {
        NearestNeighborPredictor {
            entries: data
                .into_iter()
                .map(|(m, p)| (molecule_fingerprint(m, 2), p))
                .collect(),
        }
    }
}

impl PropertyPredictor for NearestNeighborPredictor {
    fn predict(&self, m: &MolGraph, _prompt: [f64; 3]) -> Option<[f64; 3]> {
        let f = molecule_fingerprint(m, 2);
        let mut best: Option<(f64, [f64; 3])> = None;
        for (g, p) in &self.entries {
            let s = tanimoto(&f, g).ok()?;
            if best.map_or(true, |(b, _)| s > b) {
                best = Some((s, *p));
            }
        }
        best.map(|(_, p)| p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn synthetic_counts_fragments() {
        let benzene = SyntheticPredictor::score(&parse_smiles("c1ccccc1").unwrap()).unwrap();
        assert!((benzene[0] + 1.1).abs() < 1e-12);
        let phenol = SyntheticPredictor::score(&parse_smiles("Oc1ccccc1").unwrap()).unwrap();
        assert!((phenol[0] - (-1.1 + 0.9)).abs() < 1e-12);
    }

    #[test]
    fn nearest_neighbor_recovers_training_value() {
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("c1ccccc1").unwrap();
        let nn = NearestNeighborPredictor::new([(&a, [1.0, 2.0, 3.0]), (&b, [4.0, 5.0, 6.0])]);
        assert_eq!(nn.predict(&b, [0.0; 3]), Some([4.0, 5.0, 6.0]));
        assert_eq!(IdentityPredictor.predict(&a, [7.0, 8.0, 9.0]), Some([7.0, 8.0, 9.0]));
    }
}
