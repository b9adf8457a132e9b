//! Model inputs from partial molecules, and training samples from stories.

use crate::geometry::{pairwise_distances, GeometryProvider};
use crate::io::Vocabulary;
use crate::model::{Matrix, StepInput};
use crate::story::{apply_step, PartialMolecule, Point, Story, StoryError, StoryStep};

/// Per-axis mean and standard deviation of the training conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Standardizer {
    /// A zero-variance axis gets unit scale.
    pub fn fit(points: &[[f64; 3]]) -> Standardizer {
        let n = points.len().max(1) as f64;
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for k in 0..3 {
            mean[k] = points.iter().map(|p| p[k]).sum::<f64>() / n;
            let var = points.iter().map(|p| (p[k] - mean[k]).powi(2)).sum::<f64>() / n;
            std[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|k| (x[k] - self.mean[k]) / self.std[k])
    }
}

/// Input for predicting the action at `focal`. Coordinates must already be
/// current (see [`GeometryProvider::update`]).
pub fn step_input(
    pm: &PartialMolecule,
    focal: Point,
    vocab: &Vocabulary,
    provider: &GeometryProvider,
    conditions: [f64; 3],
) -> StepInput {
    let pos = provider.fragment_positions(pm);
    let d = pairwise_distances(&pos);
    let frag = pm.instances[focal.inst].frag;
    let rep = vocab
        .representative(frag, focal.at)
        .expect("queued points have registered representatives");
    StepInput {
        fragments: pm.instances.iter().map(|i| i.frag).collect(),
        saturation: (0..pm.instances.len()).map(|i| pm.saturation(i)).collect(),
        distances: Matrix::from_vec(d.n, d.n, d.data),
        focal: focal.inst,
        attach_distances: provider.attachment_distances(pm, focal, &pos),
        attach_type: vocab.attach_type_index(rep).expect("representative is an attachment type"),
        conditions,
    }
}

/// Replay `story` with geometry updates, pairing each non-start state with
/// the action actually taken.
pub fn story_samples(
    story: &Story,
    vocab: &Vocabulary,
    provider: &GeometryProvider,
    conditions: [f64; 3],
) -> Result<Vec<(StepInput, usize)>, StoryError> {
    let mut out = Vec::with_capacity(story.steps.len());
    let mut pm: Option<PartialMolecule> = None;
    for step in &story.steps {
        if let (Some(p), Some(focal)) = (&pm, step.focal()) {
            out.push((step_input(p, focal, vocab, provider, conditions), step.action(vocab)?));
        }
        let mut next = apply_step(pm, step, vocab)?;
        if !matches!(step, StoryStep::Cauterize { .. }) {
            provider.update(&mut next);
        }
        pm = Some(next);
    }
    Ok(out)
}
