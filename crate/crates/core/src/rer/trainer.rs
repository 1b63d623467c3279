//! Training loop for emphasis assignment models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, MbFeatures};
use super::loss::rer_loss;
use super::model::{assign_emphasis, EaModel, FeatureNorm, LinearEaModel};
use super::proxy::{build_proxy_target, ProxyTarget, Routing};
use crate::codec::{MbLevelCache, QpTable, NUM_LEVELS};
use crate::error::{Error, Result};
use crate::frames::{classify_regions, RegionMap, Scene};
use crate::grid::Grid;
use crate::oracle::AccuracyOracle;
use crate::pet::{lowest_quality_encode_with, thresholds_from_ssim, PetThresholds};
use crate::quality::{per_mb_ssim, MbSsimGrid};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// Initial exploration probability.
    pub p0: f64,
    /// Subtracted from the exploration probability after every epoch.
    pub p_decay: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Alignment-loss weight indexed by the proxy level.
    pub penalty: [f64; NUM_LEVELS],
    pub lr_max: f64,
    pub lr_min: f64,
    /// Gradient steps taken on each frame's proxy target.
    pub steps_per_frame: usize,
    /// Accuracy margin: a map is acceptable when |acc_c − acc_r| ≤ tau.
    pub tau: f64,
    pub max_epochs: usize,
    /// Geometric ratio of the exploration step sampler.
    pub sampler_decay: f64,
    pub seed: u64,
    pub pct_roi: f64,
    pub pct_bg: f64,
    pub routing: Routing,
    /// Scale alignment gradients by (1 + |acc_c − acc_r|).
    pub accuracy_scaled_gradient: bool,
    /// Use the first training scene's thresholds for every scene.
    pub share_thresholds: bool,
    /// Consecutive in-margin validation epochs required before stopping.
    pub patience: usize,
    /// Relative change in mean emphasis below which it counts as plateaued.
    pub plateau_tol: f64,
    pub qp_table: QpTable,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            p0: 0.8,
            p_decay: 0.1,
            lambda1: 10.0,
            lambda2: 5.0,
            penalty: [1.0, 1.3, 1.6, 1.9, 2.2],
            lr_max: 0.05,
            lr_min: 1e-6,
            steps_per_frame: 200,
            tau: 0.02,
            max_epochs: 20,
            sampler_decay: 0.5,
            seed: 0,
            pct_roi: 0.9,
            pct_bg: 0.5,
            routing: Routing::RegionAware,
            accuracy_scaled_gradient: false,
            share_thresholds: false,
            patience: 2,
            plateau_tol: 0.01,
            qp_table: QpTable::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::invalid_config("p0 must lie in [0,1]"));
        }
        if self.p_decay < 0.0 {
            return Err(Error::invalid_config("p_decay must be non-negative"));
        }
        if self.tau < 0.0 {
            return Err(Error::invalid_config("tau must be non-negative"));
        }
        if self.penalty.windows(2).any(|w| w[1] <= w[0]) || self.penalty[0] <= 0.0 {
            return Err(Error::invalid_config("penalty must be positive and strictly increasing"));
        }
        if !(self.sampler_decay > 0.0 && self.sampler_decay < 1.0) {
            return Err(Error::invalid_config("sampler_decay must lie in (0,1)"));
        }
        if !(self.lr_max > 0.0 && self.lr_min > 0.0 && self.lr_min <= self.lr_max) {
            return Err(Error::invalid_config("learning rates must satisfy 0 < lr_min <= lr_max"));
        }
        if self.steps_per_frame == 0 {
            return Err(Error::invalid_config("steps_per_frame must be at least 1"));
        }
        if self.lambda1 < 0.0 || self.lambda2 <= 0.0 {
            return Err(Error::invalid_config("lambda weights must be non-negative (lambda2 > 0)"));
        }
        self.qp_table.validate()
    }

    /// Cosine annealing from `lr_max` at epoch 0 to `lr_min` at the last epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let span = self.max_epochs.saturating_sub(1).max(1) as f64;
        let t = (epoch as f64 / span).min(1.0);
        self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
    }

    /// Exploration probability in effect during `epoch`.
    pub fn exploration(&self, epoch: usize) -> f64 {
        (self.p0 - self.p_decay * epoch as f64).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub loss1: f64,
    pub loss2: f64,
    pub acc_c: f64,
    pub acc_r: f64,
    pub p: f64,
    pub mean_emphasis: f64,
    pub val_gap: f64,
    pub val_mean_emphasis: f64,
    pub lr: f64,
}

/// A frame with everything training and evaluation need precomputed.
#[derive(Clone, Debug)]
pub struct PreparedFrame {
    pub scene_index: usize,
    pub scene: Scene,
    pub regions: RegionMap,
    pub ssim_low: MbSsimGrid,
    pub features: Grid<MbFeatures>,
    pub acc_r: f64,
    pub cache: MbLevelCache,
}

impl PreparedFrame {
    pub fn new(scene: Scene, scene_index: usize, table: &QpTable, oracle: &dyn AccuracyOracle) -> Result<Self> {
        let low = lowest_quality_encode_with(&scene.frame, table);
        let ssim_low = per_mb_ssim(&scene.frame, &low)?;
        let features = extract_features(&scene.frame, &ssim_low)?;
        let regions = classify_regions(&scene.frame.grid(), &scene.gt_boxes);
        let acc_r = oracle.score(&scene.frame, &scene.gt_boxes);
        let cache = MbLevelCache::build(&scene.frame, table);
        Ok(Self {
            scene_index,
            scene,
            regions,
            ssim_low,
            features,
            acc_r,
            cache,
        })
    }

    pub fn accuracy(&self, levels: &[u8], oracle: &dyn AccuracyOracle) -> f64 {
        oracle.score(&self.cache.assemble(levels), &self.scene.gt_boxes)
    }
}

/// Prepares every frame of every sequence; frames keep their sequence index.
pub fn prepare_sequences(
    sequences: &[Vec<Scene>],
    table: &QpTable,
    oracle: &dyn AccuracyOracle,
) -> Result<Vec<PreparedFrame>> {
    let jobs: Vec<(usize, &Scene)> = sequences
        .iter()
        .enumerate()
        .flat_map(|(i, seq)| seq.iter().map(move |s| (i, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, s)| PreparedFrame::new(s.clone(), i, table, oracle))
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: LinearEaModel,
    pub log: Vec<EpochLog>,
    pub converged: bool,
}

/// Trains a fresh [`LinearEaModel`] whose feature normalization is fitted on
/// the training frames.
pub fn train(
    train_frames: &[PreparedFrame],
    val_frames: &[PreparedFrame],
    oracle: &dyn AccuracyOracle,
    cfg: &TrainerConfig,
) -> Result<TrainOutcome> {
    let norm = FeatureNorm::fit(train_frames.iter().flat_map(|f| f.features.iter()));
    let mut model = LinearEaModel::zeros(norm);
    let (log, converged) = train_model(&mut model, train_frames, val_frames, oracle, cfg)?;
    Ok(TrainOutcome { model, log, converged })
}

/// Per-scene (or shared) thresholds taken from each scene's first frame.
pub fn scene_thresholds(frames: &[PreparedFrame], cfg: &TrainerConfig) -> Result<Vec<PetThresholds>> {
    let n_scenes = frames.iter().map(|f| f.scene_index + 1).max().unwrap_or(0);
    let mut out: Vec<Option<PetThresholds>> = vec![None; n_scenes];
    for f in frames {
        if out[f.scene_index].is_none() {
            out[f.scene_index] = Some(thresholds_from_ssim(&f.ssim_low, cfg.pct_roi, cfg.pct_bg)?);
        }
    }
    let first = frames
        .first()
        .map(|f| out[f.scene_index].expect("set above"));
    Ok(out
        .into_iter()
        .map(|t| {
            let t = t.or(first).unwrap_or(PetThresholds { t_roi: 1.0, t_bg: 1.0, pct_roi: cfg.pct_roi, pct_bg: cfg.pct_bg });
            if cfg.share_thresholds { first.unwrap_or(t) } else { t }
        })
        .collect())
}

/// Corpus-level accuracy gap |mean acc_c − mean acc_r| and mean emphasis level
/// of the model's argmax maps.
pub fn evaluate_frames(model: &dyn EaModel, frames: &[PreparedFrame], oracle: &dyn AccuracyOracle) -> (f64, f64) {
    if frames.is_empty() {
        return (0.0, 0.0);
    }
    let per: Vec<(f64, f64, f64)> = frames
        .par_iter()
        .map(|f| {
            let em = assign_emphasis(model, &f.features);
            (f.accuracy(em.levels(), oracle), f.acc_r, em.mean_level())
        })
        .collect();
    let n = per.len() as f64;
    let mean = |k: fn(&(f64, f64, f64)) -> f64| per.iter().map(k).sum::<f64>() / n;
    ((mean(|p| p.0) - mean(|p| p.1)).abs(), mean(|p| p.2))
}

/// Runs the exploration/alignment loop on `model`.
///
/// Each epoch visits every training frame: the current argmax map is encoded
/// and scored, a proxy target is drawn, and the model descends the combined
/// loss. The exploration probability decays after each epoch. Training stops
/// once the validation accuracy gap has stayed within `tau` for `patience`
/// epochs and the mean emphasis is no longer falling, or at `max_epochs`.
pub fn train_model<M: EaModel>(
    model: &mut M,
    train_frames: &[PreparedFrame],
    val_frames: &[PreparedFrame],
    oracle: &dyn AccuracyOracle,
    cfg: &TrainerConfig,
) -> Result<(Vec<EpochLog>, bool)> {
    cfg.validate()?;
    if cfg.max_epochs == 0 {
        return Err(Error::Training {
            message: "no training performed (max_epochs = 0)".into(),
            log: Vec::new(),
        });
    }
    if train_frames.is_empty() {
        return Err(Error::invalid_input("empty training corpus"));
    }
    let thresholds = scene_thresholds(train_frames, cfg)?;
    let stop_frames = if val_frames.is_empty() { train_frames } else { val_frames };
    let mut log: Vec<EpochLog> = Vec::new();
    let mut in_margin = 0usize;
    for epoch in 0..cfg.max_epochs {
        let lr = cfg.learning_rate(epoch);
        let p = cfg.exploration(epoch);
        let (mut s_loss, mut s_l1, mut s_l2, mut s_acc_c, mut s_acc_r, mut s_em) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (fi, frame) in train_frames.iter().enumerate() {
            let feats = frame.features.as_slice();
            let mut pred = model.predict(feats);
            let em = assign_emphasis(model, &frame.features);
            let mut g = rng::stream(cfg.seed, &[epoch as u64, fi as u64]);
            let proxy = build_proxy_target(
                &em,
                &frame.regions,
                &frame.ssim_low,
                &thresholds[frame.scene_index],
                p,
                cfg.sampler_decay,
                cfg.routing,
                &mut g,
            )?;
            let acc_c = frame.accuracy(em.levels(), oracle);
            let first = rer_loss(&pred, &proxy, frame.acc_r, acc_c, cfg)?;
            if !first.loss.is_finite() {
                return Err(Error::Training {
                    message: format!("non-finite loss at epoch {epoch}, frame {fi}"),
                    log,
                });
            }
            s_loss += first.loss;
            s_l1 += first.loss1;
            s_l2 += first.loss2;
            s_acc_c += acc_c;
            s_acc_r += frame.acc_r;
            s_em += em.mean_level();
            let mut grads = first.grads;
            for step in 0..cfg.steps_per_frame {
                model.apply_gradient(feats, &grads, lr);
                if step + 1 < cfg.steps_per_frame {
                    pred = model.predict(feats);
                    grads = rer_loss(&pred, &proxy, frame.acc_r, acc_c, cfg)?.grads;
                }
            }
        }
        let n = train_frames.len() as f64;
        let (val_gap, val_em) = evaluate_frames(model, stop_frames, oracle);
        let entry = EpochLog {
            epoch,
            loss: s_loss / n,
            loss1: s_l1 / n,
            loss2: s_l2 / n,
            acc_c: s_acc_c / n,
            acc_r: s_acc_r / n,
            p,
            mean_emphasis: s_em / n,
            val_gap,
            val_mean_emphasis: val_em,
            lr,
        };
        if !entry.loss.is_finite() || !val_gap.is_finite() {
            log.push(entry);
            return Err(Error::Training {
                message: format!("divergence at epoch {epoch}"),
                log,
            });
        }
        let still_falling = log
            .last()
            .map(|prev| entry.val_mean_emphasis < prev.val_mean_emphasis * (1.0 - cfg.plateau_tol))
            .unwrap_or(true);
        in_margin = if val_gap <= cfg.tau { in_margin + 1 } else { 0 };
        log.push(entry);
        if in_margin >= cfg.patience && !still_falling {
            return Ok((log, true));
        }
    }
    Ok((log, false))
}

/// Alignment-only descent against fixed proxy targets. Returns the mean
/// `λ2·loss2` over the frames before training (index 0) and after each epoch.
pub fn train_frozen<M: EaModel>(
    model: &mut M,
    data: &[(Vec<MbFeatures>, ProxyTarget)],
    cfg: &TrainerConfig,
    epochs: usize,
    lr: f64,
) -> Result<Vec<f64>> {
    let eval = |model: &M| -> Result<f64> {
        let mut total = 0.0;
        for (feats, proxy) in data {
            total += cfg.lambda2 * rer_loss(&model.predict(feats), proxy, 0.0, 0.0, cfg)?.loss2;
        }
        Ok(total / data.len().max(1) as f64)
    };
    let mut curve = vec![eval(model)?];
    for _ in 0..epochs {
        for (feats, proxy) in data {
            for _ in 0..cfg.steps_per_frame {
                let out = rer_loss(&model.predict(feats), proxy, 0.0, 0.0, cfg)?;
                model.apply_gradient(feats, &out.grads, lr);
            }
        }
        curve.push(eval(model)?);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let cfg = TrainerConfig { max_epochs: 11, ..TrainerConfig::default() };
        assert!((cfg.learning_rate(0) - cfg.lr_max).abs() < 1e-15);
        assert!((cfg.learning_rate(10) - 1e-6).abs() < 1e-15);
        assert!(cfg.learning_rate(5) < cfg.learning_rate(4));
        assert!((cfg.exploration(0) - 0.8).abs() < 1e-12);
        assert!((cfg.exploration(3) - 0.5).abs() < 1e-12);
        assert_eq!(cfg.exploration(9), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainerConfig::default().validate().is_ok());
        assert!(TrainerConfig { p0: 1.5, ..Default::default() }.validate().is_err());
        assert!(TrainerConfig { tau: -0.1, ..Default::default() }.validate().is_err());
        assert!(TrainerConfig { penalty: [1.0, 1.0, 1.6, 1.9, 2.2], ..Default::default() }.validate().is_err());
    }

    fn small_frames(seed: u64, objects: usize) -> Vec<PreparedFrame> {
        use crate::frames::{generate_scene, SceneConfig};
        use crate::oracle::BlobDetector;
        let cfg = SceneConfig {
            width: 64,
            height: 64,
            min_objects: objects,
            max_objects: objects,
            ..SceneConfig::default()
        };
        let seqs: Vec<Vec<_>> = (0..4).map(|i| vec![generate_scene(seed + i, &cfg).unwrap()]).collect();
        prepare_sequences(&seqs, &QpTable::default(), &BlobDetector::default()).unwrap()
    }

    #[test]
    fn object_free_corpus_drifts_down() {
        let frames = small_frames(40, 0);
        let det = crate::oracle::BlobDetector::default();
        let cfg = TrainerConfig { max_epochs: 4, ..TrainerConfig::default() };
        let out = train(&frames, &[], &det, &cfg).unwrap();
        assert!(out.log.last().unwrap().val_mean_emphasis < 1.0);
    }

    #[test]
    fn same_seed_same_log() {
        let frames = small_frames(50, 1);
        let det = crate::oracle::BlobDetector::default();
        let cfg = TrainerConfig { max_epochs: 3, ..TrainerConfig::default() };
        let a = train(&frames, &[], &det, &cfg).unwrap();
        let b = train(&frames, &[], &det, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.model, b.model);
    }
}
