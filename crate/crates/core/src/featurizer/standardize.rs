use serde::{Deserialize, Serialize};

use super::{FeatureVector, RAW_DIM};

/// Per-feature zero-mean, unit-variance scaling fitted on real (non-Empty)
/// values only. Constant features pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Default for Standardizer {
    fn default() -> Self {
        Standardizer {
            mean: vec![0.0; RAW_DIM],
            std: vec![1.0; RAW_DIM],
        }
    }
}

impl Standardizer {
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut sum = [0.0; RAW_DIM];
        let mut sq = [0.0; RAW_DIM];
        let mut n = [0usize; RAW_DIM];
        for fv in features {
            for (i, v) in fv.raw().iter().enumerate() {
                if let Some(x) = v {
                    sum[i] += x;
                    sq[i] += x * x;
                    n[i] += 1;
                }
            }
        }
        let mut out = Standardizer::default();
        for i in 0..RAW_DIM {
            if n[i] == 0 {
                continue;
            }
            let m = sum[i] / n[i] as f64;
            let sd = (sq[i] / n[i] as f64 - m * m).max(0.0).sqrt();
            // A constant feature would centre onto the Empty sentinel; leave
            // it unscaled so present and absent stay distinguishable.
            if sd > 1e-9 {
                out.mean[i] = m;
                out.std[i] = sd;
            }
        }
        out
    }

    pub fn apply(&self, i: usize, x: f64) -> f64 {
        (x - self.mean[i]) / self.std[i]
    }
}
