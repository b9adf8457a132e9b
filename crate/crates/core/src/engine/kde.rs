//! Gaussian kernel density over standardized condition space.

use super::features::Standardizer;

#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    standardizer: Standardizer,
    points: Vec<[f64; 3]>,
    bandwidth: f64,
}

pub const DEFAULT_BANDWIDTH: f64 = 0.14;

impl Kde {
    /// Fit on raw conditions; each axis is standardized with the data's own
    /// mean and deviation first. None for an empty set or a bad bandwidth.
    pub fn fit(points: &[[f64; 3]], bandwidth: f64) -> Option<Kde> {
        if points.is_empty() || !(bandwidth > 0.0) {
            return None;
        }
        let standardizer = Standardizer::fit(points);
        Some(Kde {
            points: points.iter().map(|&p| standardizer.apply(p)).collect(),
            standardizer,
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Density at a raw condition vector, in standardized units.
    pub fn score(&self, x: [f64; 3]) -> f64 {
        self.score_standardized(self.standardizer.apply(x))
    }

    pub fn score_standardized(&self, z: [f64; 3]) -> f64 {
        let h = self.bandwidth;
        let norm = (2.0 * std::f64::consts::PI).powf(-1.5) / (h * h * h);
        let sum: f64 = self
            .points
            .iter()
            .map(|p| {
                let r2: f64 = (0..3).map(|k| ((z[k] - p[k]) / h).powi(2)).sum();
                (-0.5 * r2).exp()
            })
            .sum();
        norm * sum / self.points.len() as f64
    }
}
