//! Dataset split and the training loop.
//!
//! Every epoch draws one fresh story per training molecule, so the model
//! sees a different exploration order of the same molecule each time.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::features::{story_samples, Standardizer};
use super::TrainConfig;
use crate::io::{DatasetRecord, Vocabulary};
use crate::model::{adam_step, AdamState, FragmentInitializer, Matrix, StepInput, StoryModel, VocabDims};
use crate::molgraph::stable_hash;
use crate::story::unroll_story;

/// Record indices of each split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle; the first `train_fraction` of records train, then up to
/// `validation_count` validation records are carved out of the remainder
/// (never more than half of it) and the rest is the test split.
pub fn split_dataset(n: usize, cfg: &TrainConfig) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(stable_hash(&[cfg.seed, 0x5917])));
    let n_train = ((n as f64) * cfg.train_fraction).floor() as usize;
    let rest = n - n_train;
    let n_val = cfg.validation_count.min(rest / 2);
    let n_test = rest - n_val;
    let mut train = idx[..n_train].to_vec();
    let mut validation = idx[n_train..n_train + n_val].to_vec();
    let mut test = idx[n_train + n_val..n_train + n_val + n_test].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Split {
        train,
        validation,
        test,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    /// Optimizer steps taken so far.
    pub optimizer_steps: u64,
    pub samples: usize,
    pub train_accuracy: Option<f64>,
    pub held_out_accuracy: Option<f64>,
    /// Molecules whose story could not be built (fragments outside the vocabulary).
    pub skipped: usize,
}

pub struct Trained {
    pub model: StoryModel,
    pub standardizer: Standardizer,
    pub metrics: Vec<EpochMetrics>,
}

pub fn vocab_dims(vocab: &Vocabulary) -> VocabDims {
    VocabDims {
        fragments: vocab.fragment_count(),
        attach_types: vocab.attach_types().len(),
        outputs: vocab.action_count() + 1,
    }
}

/// One freshly unrolled story per molecule, turned into (input, label)
/// samples. `stream` separates the draws of different epochs and splits.
pub fn resample(
    records: &[DatasetRecord],
    vocab: &Vocabulary,
    cfg: &TrainConfig,
    standardizer: &Standardizer,
    stream: u64,
) -> (Vec<(StepInput, usize)>, usize) {
    let provider = cfg.geometry();
    let per: Vec<Option<Vec<(StepInput, usize)>>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[cfg.seed, stream, i as u64]));
            let story = unroll_story(&r.mol, vocab, &mut rng).ok()?;
            story_samples(&story, vocab, &provider, standardizer.apply(r.conditions())).ok()
        })
        .collect();
    let skipped = per.iter().filter(|p| p.is_none()).count();
    (per.into_iter().flatten().flatten().collect(), skipped)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose highest logit is the label.
pub fn accuracy(model: &StoryModel, samples: &[(StepInput, usize)]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits: usize = samples
        .par_iter()
        .map(|(x, l)| (argmax(&model.logits(x)) == *l) as usize)
        .sum();
    hits as f64 / samples.len() as f64
}

/// Train from scratch. `on_epoch` sees each epoch's metrics and returns
/// false to stop early.
pub fn train(
    records: &[DatasetRecord],
    held_out: &[DatasetRecord],
    vocab: &Vocabulary,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics) -> bool,
) -> Trained {
    let conds: Vec<[f64; 3]> = records.iter().map(|r| r.conditions()).collect();
    let standardizer = Standardizer::fit(&conds);
    let mut model = StoryModel::new(cfg.model_config(), vocab_dims(vocab), stable_hash(&[cfg.seed, 1]));
    let mut adam = AdamState::new(&model.store);
    let mut adam_cfg = cfg.adam();
    let mut metrics = Vec::new();
    for epoch in 0..cfg.epochs {
        let (mut samples, skipped) = resample(records, vocab, cfg, &standardizer, 2 * epoch as u64 + 10);
        samples.shuffle(&mut ChaCha8Rng::seed_from_u64(stable_hash(&[cfg.seed, epoch as u64, 2])));
        let mut total = 0.0;
        let mut seen = 0;
        for (b, batch) in samples.chunks(cfg.batch_size).enumerate() {
            if cfg.max_steps > 0 && adam.steps() >= cfg.max_steps {
                break;
            }
            let seed = (cfg.dropout > 0.0).then(|| stable_hash(&[cfg.seed, epoch as u64, b as u64, 3]));
            let (loss, grads) = model.loss_and_grads(batch, seed);
            total += loss * batch.len() as f64;
            seen += batch.len();
            adam_cfg.lr = cfg.learning_rate_at(adam.steps());
            adam_step(&mut model.store, &grads, &mut adam, &adam_cfg);
        }
        let eval = cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs);
        let (train_accuracy, held_out_accuracy) = if eval {
            let (tr, _) = resample(records, vocab, cfg, &standardizer, 2 * epoch as u64 + 11);
            let ho = if held_out.is_empty() {
                None
            } else {
                let (h, _) = resample(held_out, vocab, cfg, &standardizer, 2 * epoch as u64 + 11);
                Some(accuracy(&model, &h))
            };
            (Some(accuracy(&model, &tr)), ho)
        } else {
            (None, None)
        };
        let m = EpochMetrics {
            epoch,
            loss: total / seen.max(1) as f64,
            optimizer_steps: adam.steps(),
            samples: seen,
            train_accuracy,
            held_out_accuracy,
            skipped,
        };
        let done = cfg.max_steps > 0 && adam.steps() >= cfg.max_steps;
        let go = on_epoch(&m) && !done;
        metrics.push(m);
        if !go {
            break;
        }
    }
    Trained {
        model,
        standardizer,
        metrics,
    }
}

/// Multi-hot fragment presence of each record over the vocabulary.
pub fn fragment_targets(records: &[DatasetRecord], vocab: &Vocabulary) -> Matrix {
    let nf = vocab.fragment_count();
    let mut t = Matrix::zeros(records.len(), nf);
    for (r, rec) in records.iter().enumerate() {
        if let Ok(d) = crate::canon::decompose(&rec.mol) {
            for p in &d.placed {
                if let Some(f) = vocab.fragment_index(&p.canonical.smiles) {
                    t.set(r, f, 1.0);
                }
            }
        }
    }
    t
}

/// Fit the start-fragment classifier on standardized conditions.
pub fn train_initializer(
    records: &[DatasetRecord],
    vocab: &Vocabulary,
    standardizer: &Standardizer,
    cfg: &TrainConfig,
) -> (FragmentInitializer, f64) {
    let mut conds = Matrix::zeros(records.len(), 3);
    for (i, r) in records.iter().enumerate() {
        conds.row_mut(i).copy_from_slice(&standardizer.apply(r.conditions()));
    }
    let targets = fragment_targets(records, vocab);
    let mut init = FragmentInitializer::new(cfg.init_hidden, vocab.fragment_count(), stable_hash(&[cfg.seed, 4]));
    let adam = crate::model::AdamConfig {
        lr: cfg.init_learning_rate,
        ..Default::default()
    };
    let loss = init.fit(&conds, &targets, cfg.init_steps, &adam);
    (init, loss)
}
