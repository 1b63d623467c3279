//! Emphasis Assignment models: per-macroblock distributions over the five
//! emphasis levels.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{MbFeatures, FEATURE_DIM};
use crate::codec::{EmphasisMap, NUM_LEVELS};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub type LevelDist = [f64; NUM_LEVELS];

pub trait EaModel: Send + Sync {
    fn predict(&self, features: &[MbFeatures]) -> Vec<LevelDist>;

    /// One descent step given d(loss)/d(logit) for every macroblock.
    fn apply_gradient(&mut self, features: &[MbFeatures], logit_grads: &[LevelDist], lr: f64);
}

pub fn softmax(logits: &LevelDist) -> LevelDist {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; NUM_LEVELS];
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Most probable level; ties resolve to the lower level.
pub fn argmax(dist: &LevelDist) -> u8 {
    let mut best = 0;
    for l in 1..NUM_LEVELS {
        if dist[l] > dist[best] {
            best = l;
        }
    }
    best as u8
}

pub fn assign_emphasis(model: &dyn EaModel, features: &Grid<MbFeatures>) -> EmphasisMap {
    let dists = model.predict(features.as_slice());
    let levels = dists.iter().map(argmax).collect();
    EmphasisMap::from_levels(features.rows(), features.cols(), levels).expect("argmax is a valid level")
}

/// Per-feature standardization constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: [f64; FEATURE_DIM],
    pub std: [f64; FEATURE_DIM],
}

impl Default for FeatureNorm {
    fn default() -> Self {
        Self {
            mean: [0.0; FEATURE_DIM],
            std: [1.0; FEATURE_DIM],
        }
    }
}

impl FeatureNorm {
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a MbFeatures>) -> Self {
        let mut n = 0usize;
        let mut sum = [0.0; FEATURE_DIM];
        let mut sq = [0.0; FEATURE_DIM];
        for f in features {
            n += 1;
            for d in 0..FEATURE_DIM {
                sum[d] += f.0[d];
                sq[d] += f.0[d] * f.0[d];
            }
        }
        if n == 0 {
            return Self::default();
        }
        let mut norm = Self::default();
        for d in 0..FEATURE_DIM {
            let m = sum[d] / n as f64;
            norm.mean[d] = m;
            norm.std[d] = (sq[d] / n as f64 - m * m).max(0.0).sqrt().max(1e-6);
        }
        norm
    }

    pub fn apply(&self, f: &MbFeatures) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            out[d] = (f.0[d] - self.mean[d]) / self.std[d];
        }
        out
    }
}

/// Multinomial logistic regression over standardized macroblock features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearEaModel {
    pub weights: [[f64; FEATURE_DIM]; NUM_LEVELS],
    pub bias: LevelDist,
    pub norm: FeatureNorm,
}

impl LinearEaModel {
    /// All-zero parameters: uniform predictions, argmax at level 0.
    pub fn zeros(norm: FeatureNorm) -> Self {
        Self {
            weights: [[0.0; FEATURE_DIM]; NUM_LEVELS],
            bias: [0.0; NUM_LEVELS],
            norm,
        }
    }

    pub fn logits(&self, f: &MbFeatures) -> LevelDist {
        let x = self.norm.apply(f);
        let mut z = self.bias;
        for (zl, w) in z.iter_mut().zip(&self.weights) {
            *zl += w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        }
        z
    }

    pub fn scale_parameters(&mut self, s: f64) {
        for w in &mut self.weights {
            for v in w.iter_mut() {
                *v *= s;
            }
        }
        for b in &mut self.bias {
            *b *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

impl EaModel for LinearEaModel {
    fn predict(&self, features: &[MbFeatures]) -> Vec<LevelDist> {
        features.iter().map(|f| softmax(&self.logits(f))).collect()
    }

    fn apply_gradient(&mut self, features: &[MbFeatures], logit_grads: &[LevelDist], lr: f64) {
        let mut gw = [[0.0; FEATURE_DIM]; NUM_LEVELS];
        let mut gb = [0.0; NUM_LEVELS];
        for (f, g) in features.iter().zip(logit_grads) {
            let x = self.norm.apply(f);
            for l in 0..NUM_LEVELS {
                gb[l] += g[l];
                for d in 0..FEATURE_DIM {
                    gw[l][d] += g[l] * x[d];
                }
            }
        }
        for l in 0..NUM_LEVELS {
            self.bias[l] -= lr * gb[l];
            for d in 0..FEATURE_DIM {
                self.weights[l][d] -= lr * gw[l][d];
            }
        }
    }
}
