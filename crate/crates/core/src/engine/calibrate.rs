//! Prompt sweep: vary one condition across the dataset range, hold the
//! others at their mean, generate a batch per prompt and compare the
//! predicted property with the prompt.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kde::{Kde, DEFAULT_BANDWIDTH};
use super::predictors::PropertyPredictor;
use crate::io::DatasetRecord;
use crate::molgraph::{stable_hash, write_canonical_smiles, MolGraph};
use crate::story::{Story, StoryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    LogS,
    Redox,
    Sa,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::LogS => 0,
            Axis::Redox => 1,
            Axis::Sa => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::LogS => "logS",
            Axis::Redox => "redox",
            Axis::Sa => "sa",
        }
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Axis, String> {
        match s {
            "logS" | "logs" => Ok(Axis::LogS),
            "redox" => Ok(Axis::Redox),
            "sa" | "sascore" => Ok(Axis::Sa),
            _ => Err(format!("unknown axis {s} (expected logS, redox or sa)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    pub steps: usize,
    pub per_prompt: usize,
    pub seed: u64,
    pub bandwidth: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            steps: 30,
            per_prompt: 30,
            seed: 0,
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptRow {
    pub prompt: f64,
    /// Mean and deviation of the predicted property; NaN when nothing survived filtering.
    pub mean: f64,
    pub std: f64,
    pub unique: usize,
    pub kde_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub axis: Axis,
    pub rows: Vec<PromptRow>,
    pub novelty_ratio: f64,
    pub unique_total: usize,
}

/// Fixed-width rendering with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else { x.to_string() };
    }
    let r: f64 = format!("{x:.5e}").parse().unwrap();
    let s = r.to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

impl CalibrationReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("prompt,mean,std,unique_n,kde_density\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{},{}", sig6(r.prompt), sig6(r.mean), sig6(r.std), r.unique, sig6(r.kde_density)).unwrap();
        }
        writeln!(s, "# axis={} novelty_ratio={}", self.axis.name(), sig6(self.novelty_ratio)).unwrap();
        s
    }

    /// Pearson correlation of prompts and means over rows with a mean.
    pub fn pearson(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.mean.is_finite())
            .map(|r| (r.prompt, r.mean))
            .collect();
        pearson(&pts)
    }
}

pub fn pearson(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// `steps` evenly spaced values from the dataset minimum to maximum on the
/// axis; the other two axes sit at the dataset mean.
pub fn prompts(dataset: &[DatasetRecord], axis: Axis, steps: usize) -> Vec<[f64; 3]> {
    let k = axis.index();
    let n = dataset.len().max(1) as f64;
    let mean: [f64; 3] = [0, 1, 2].map(|j| dataset.iter().map(|r| r.conditions()[j]).sum::<f64>() / n);
    let lo = dataset.iter().map(|r| r.conditions()[k]).fold(f64::INFINITY, f64::min);
    let hi = dataset.iter().map(|r| r.conditions()[k]).fold(f64::NEG_INFINITY, f64::max);
    (0..steps)
        .map(|i| {
            let t = if steps > 1 { i as f64 / (steps - 1) as f64 } else { 0.0 };
            let mut c = mean;
            c[k] = lo + t * (hi - lo);
            c
        })
        .collect()
}

/// Run the sweep. `generate` produces one molecule for a raw prompt.
/// Duplicates within a prompt and single-fragment molecules are dropped
/// before prediction.
pub fn calibrate<G>(
    dataset: &[DatasetRecord],
    axis: Axis,
    generate: G,
    predictor: &dyn PropertyPredictor,
    cfg: &CalibrationConfig,
) -> Option<CalibrationReport>
where
    G: Fn([f64; 3], &mut ChaCha8Rng) -> Result<(MolGraph, Story), StoryError> + Sync,
{
    let conds: Vec<[f64; 3]> = dataset.iter().map(|r| r.conditions()).collect();
    let kde = Kde::fit(&conds, cfg.bandwidth)?;
    let known: BTreeSet<String> = dataset
        .iter()
        .filter_map(|r| write_canonical_smiles(&r.mol).ok())
        .collect();
    let k = axis.index();
    let ps = prompts(dataset, axis, cfg.steps);
    let per_prompt: Vec<(PromptRow, Vec<String>)> = ps
        .par_iter()
        .enumerate()
        .map(|(i, &prompt)| {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[cfg.seed, k as u64, i as u64]));
            let mut seen = BTreeSet::new();
            let mut values = Vec::new();
            for _ in 0..cfg.per_prompt {
                let Ok((m, story)) = generate(prompt, &mut rng) else { continue };
                if story.fragment_count() < 2 || !seen.insert(story.final_smiles.clone()) {
                    continue;
                }
                if let Some(p) = predictor.predict(&m, prompt) {
                    values.push(p[k]);
                }
            }
            let n = values.len() as f64;
            let (mean, std) = if values.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                // offsets from the first value keep a constant batch exact
                let mean = values[0] + values.iter().map(|v| v - values[0]).sum::<f64>() / n;
                (mean, (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
            };
            let row = PromptRow {
                prompt: prompt[k],
                mean,
                std,
                unique: seen.len(),
                kde_density: kde.score(prompt),
            };
            (row, seen.into_iter().collect())
        })
        .collect();
    let mut all = BTreeSet::new();
    let mut rows = Vec::with_capacity(per_prompt.len());
    for (row, smiles) in per_prompt {
        rows.push(row);
        all.extend(smiles);
    }
    let novel = all.iter().filter(|s| !known.contains(*s)).count();
    Some(CalibrationReport {
        axis,
        rows,
        novelty_ratio: if all.is_empty() { 0.0 } else { novel as f64 / all.len() as f64 },
        unique_total: all.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(-2.0), "-2");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(f64::NAN), "nan");
    }

    #[test]
    fn pearson_of_line() {
        assert!((pearson(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]) - 1.0).abs() < 1e-12);
        assert!((pearson(&[(0.0, 1.0), (1.0, -1.0)]) + 1.0).abs() < 1e-12);
    }
}
