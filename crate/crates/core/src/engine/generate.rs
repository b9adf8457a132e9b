//! Conditional generation: pick a start fragment, then grow the molecule one
//! queue entry at a time, sampling only among chemically legal actions.

use rand::Rng;

use super::features::{step_input, Standardizer};
use crate::geometry::GeometryProvider;
use crate::io::Vocabulary;
use crate::model::{FragmentInitializer, StoryModel};
use crate::molgraph::{write_canonical_smiles, MolGraph};
use crate::story::{PartialMolecule, Story, StoryError, StoryStep};

/// Uniform choice among the `k` most probable fragments (ties broken by
/// lower index).
pub fn sample_start_fragment<R: Rng>(probs: &[f64], k: usize, rng: &mut R) -> usize {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let k = k.clamp(1, probs.len());
    order[rng.gen_range(0..k)]
}

/// Sample an index from softmax(logits) restricted to `allowed`.
pub fn sample_masked<R: Rng>(logits: &[f64], allowed: &[usize], rng: &mut R) -> usize {
    let m = allowed
        .iter()
        .map(|&a| logits[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = allowed.iter().map(|&a| (logits[a] - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return allowed[i];
        }
        u -= x;
    }
    *allowed.last().expect("CAUTERIZE is always allowed")
}

/// Anything that scores the next action: the trained model, or a stand-in.
pub trait NextAction: Sync {
    fn logits(&self, pm: &PartialMolecule, focal: crate::story::Point, vocab: &Vocabulary, conditions: [f64; 3]) -> Vec<f64>;
}

/// Equal logits everywhere; masking alone shapes the distribution.
pub struct UniformModel;

impl NextAction for UniformModel {
    fn logits(&self, _pm: &PartialMolecule, _focal: crate::story::Point, vocab: &Vocabulary, _c: [f64; 3]) -> Vec<f64> {
        vec![0.0; vocab.action_count() + 1]
    }
}

/// A trained model together with the geometry it was trained on.
pub struct ModelScorer<'a> {
    pub model: &'a StoryModel,
    pub provider: GeometryProvider,
}

impl NextAction for ModelScorer<'_> {
    fn logits(&self, pm: &PartialMolecule, focal: crate::story::Point, vocab: &Vocabulary, conditions: [f64; 3]) -> Vec<f64> {
        self.model.logits(&step_input(pm, focal, vocab, &self.provider, conditions))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    pub top_k: usize,
    pub max_fragments: usize,
}

/// Grow one molecule from `start`. Conditions are raw values; the
/// standardizer maps them to model scale.
#[allow(clippy::too_many_arguments)]
pub fn generate_from<R: Rng>(
    start: usize,
    conditions: [f64; 3],
    scorer: &dyn NextAction,
    standardizer: &Standardizer,
    vocab: &Vocabulary,
    provider: &GeometryProvider,
    opts: &GenerateOptions,
    rng: &mut R,
) -> Result<(MolGraph, Story), StoryError> {
    let cond = standardizer.apply(conditions);
    let mut pm = PartialMolecule::start(vocab, start);
    provider.update(&mut pm);
    let mut steps = vec![StoryStep::Start {
        fragment: vocab.fragment(start).cf.smiles.clone(),
    }];
    let caut = vocab.cauterize_index();
    while !pm.queue.is_empty() {
        let focal = pm.queue[rng.gen_range(0..pm.queue.len())];
        let mut allowed = if pm.instances.len() >= opts.max_fragments {
            vec![caut]
        } else {
            pm.valid_actions(vocab, focal)
        };
        let logits = scorer.logits(&pm, focal, vocab, cond);
        loop {
            let a = sample_masked(&logits, &allowed, rng);
            if a == caut {
                pm.cauterize(focal.inst, focal.at)?;
                steps.push(StoryStep::Cauterize {
                    inst: focal.inst,
                    focal: focal.at,
                });
                break;
            }
            let (frag, rep) = vocab.action(a).expect("action index in range");
            match pm.dock(vocab, focal.inst, focal.at, frag, rep) {
                Ok(_) => {
                    provider.update(&mut pm);
                    steps.push(StoryStep::Dock {
                        inst: focal.inst,
                        focal: focal.at,
                        fragment: vocab.fragment(frag).cf.smiles.clone(),
                        rep,
                    });
                    break;
                }
                // the cheap single-atom legality check can pass an action
                // the full merge rejects; drop it and sample again
                Err(_) => allowed.retain(|&x| x != a),
            }
        }
    }
    let m = pm.finalize()?;
    let final_smiles = write_canonical_smiles(&m)?;
    Ok((m, Story { steps, final_smiles }))
}

/// Start from a top-k fragment of the initializer, then grow.
#[allow(clippy::too_many_arguments)]
pub fn generate<R: Rng>(
    conditions: [f64; 3],
    model: &StoryModel,
    init: &FragmentInitializer,
    standardizer: &Standardizer,
    vocab: &Vocabulary,
    provider: &GeometryProvider,
    opts: &GenerateOptions,
    rng: &mut R,
) -> Result<(MolGraph, Story), StoryError> {
    let probs = init.probabilities(standardizer.apply(conditions));
    let start = sample_start_fragment(&probs, opts.top_k, rng);
    let scorer = ModelScorer {
        model,
        provider: *provider,
    };
    generate_from(start, conditions, &scorer, standardizer, vocab, provider, opts, rng)
}
