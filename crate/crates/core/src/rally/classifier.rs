//! Linear hinge-loss classifier over chi-squared mapped HOG features.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::frames::{FrameStack, FrameView};
use crate::rng::CounterRng;

use super::chi2::{Chi2Map, MAP_WIDTH};
use super::hog::hog_descriptor;
use super::{ClassifierConfig, RallyError};

/// Learned weights over the mapped feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct RallyModel {
    pub weights: Vec<f32>,
    pub bias: f64,
    pub config: ClassifierConfig,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    config: ClassifierConfig,
    weights: String,
    bias: f64,
}

impl Serialize for RallyModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = self.weights.iter().flat_map(|w| w.to_le_bytes()).collect();
        StoredModel {
            config: self.config.clone(),
            weights: STANDARD.encode(bytes),
            bias: self.bias,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RallyModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let stored = StoredModel::deserialize(deserializer)?;
        let bytes = STANDARD.decode(stored.weights).map_err(D::Error::custom)?;
        if bytes.len() % 4 != 0 {
            return Err(D::Error::custom("weight payload is not a whole number of f32 values"));
        }
        let weights = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(RallyModel {
            weights,
            bias: stored.bias,
            config: stored.config,
        })
    }
}

impl RallyModel {
    pub fn feature_len(&self) -> usize {
        self.config.hog_len() * MAP_WIDTH
    }

    fn check(&self) -> Result<(), RallyError> {
        if self.weights.len() != self.feature_len() {
            return Err(RallyError::DimensionMismatch {
                expected: self.feature_len(),
                got: self.weights.len(),
            });
        }
        Ok(())
    }

    /// Signed decision value for an already mapped feature vector.
    pub fn margin_mapped(&self, mapped: &[f32]) -> f64 {
        dot32(&self.weights, mapped) + self.bias
    }

    /// Signed decision value for a HOG descriptor.
    pub fn margin(&self, map: &Chi2Map, descriptor: &[f32]) -> Result<f64, RallyError> {
        if descriptor.len() * MAP_WIDTH != self.weights.len() {
            return Err(RallyError::DimensionMismatch {
                expected: self.weights.len() / MAP_WIDTH,
                got: descriptor.len(),
            });
        }
        Ok(self.margin_mapped(&map.map(descriptor)?))
    }
}

fn dot32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

fn dot_f64(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * y).sum()
}

/// Pegasos stochastic subgradient descent on
/// `0.5 |w|^2 + C * sum_i max(0, 1 - y_i (w . phi(x_i) + b))`,
/// with the bias folded in as a constant unit feature.
pub fn train_rally_classifier(
    features: &[Vec<f32>],
    labels: &[i8],
    cfg: &ClassifierConfig,
) -> Result<RallyModel, RallyError> {
    cfg.validate()?;
    if features.len() != labels.len() {
        return Err(RallyError::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    if !labels.iter().any(|&l| l > 0) || !labels.iter().any(|&l| l <= 0) {
        return Err(RallyError::DegenerateData);
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(RallyError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }

    let map = Chi2Map::new(cfg.chi2_period)?;
    let mapped: Vec<Vec<f32>> = features
        .par_iter()
        .map(|f| map.map(f))
        .collect::<Result<_, _>>()?;
    let ys: Vec<f64> = labels.iter().map(|&l| if l > 0 { 1.0 } else { -1.0 }).collect();

    let sq_lens: Vec<f64> = mapped
        .iter()
        .map(|x| x.iter().map(|a| (*a as f64).powi(2)).sum::<f64>() + 1.0)
        .collect();

    let n = mapped.len();
    let lambda = 1.0 / (cfg.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let width = dim * MAP_WIDTH;
    // w = scale * v; the last slot of v is the bias weight
    let mut v = vec![0.0f64; width + 1];
    let mut scale = 1.0f64;
    let mut sq_norm = 0.0f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;

    for epoch in 0..cfg.epochs {
        CounterRng::new(cfg.seed, epoch as u64).shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &mapped[i];
            let mut raw = dot_f64(x, &v[..width]) + v[width];
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|c| *c = 0.0);
                scale = 1.0;
                sq_norm = 0.0;
                raw = 0.0;
            } else {
                scale *= shrink;
                sq_norm *= shrink * shrink;
            }
            if ys[i] * scale * raw < 1.0 {
                sq_norm += 2.0 * eta * ys[i] * scale * raw + eta * eta * sq_lens[i];
                let step = eta * ys[i] / scale;
                for (c, a) in v.iter_mut().zip(x) {
                    *c += step * *a as f64;
                }
                v[width] += step;
            }
            if sq_norm > radius * radius {
                scale *= radius / sq_norm.sqrt();
                sq_norm = radius * radius;
            }
            if scale < 1e-60 {
                v.iter_mut().for_each(|c| *c *= scale);
                scale = 1.0;
            }
        }
        sq_norm = scale * scale * v.iter().map(|c| c * c).sum::<f64>();
    }

    Ok(RallyModel {
        weights: v[..width].iter().map(|c| (c * scale) as f32).collect(),
        bias: v[width] * scale,
        config: cfg.clone(),
    })
}

/// HOG descriptor of every frame, computed in parallel.
pub fn stack_descriptors(stack: &FrameStack, cfg: &ClassifierConfig) -> Result<Vec<Vec<f32>>, RallyError> {
    (0..stack.count())
        .into_par_iter()
        .map(|t| hog_descriptor(stack.frame(t), cfg))
        .collect()
}

/// One `(label, margin)` pair per frame, label `+1` for rally frames.
pub fn classify_frames(stack: &FrameStack, model: &RallyModel) -> Result<Vec<(i8, f64)>, RallyError> {
    model.check()?;
    let map = Chi2Map::new(model.config.chi2_period)?;
    (0..stack.count())
        .into_par_iter()
        .map(|t| classify_frame(stack.frame(t), model, &map))
        .collect()
}

pub fn classify_frame(frame: FrameView<'_>, model: &RallyModel, map: &Chi2Map) -> Result<(i8, f64), RallyError> {
    let descriptor = hog_descriptor(frame, &model.config)?;
    let margin = model.margin(map, &descriptor)?;
    Ok((if margin > 0.0 { 1 } else { -1 }, margin))
}
