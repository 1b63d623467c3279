//! Region-aware emphasis routing: features, the emphasis-assignment model,
//! proxy-target exploration, the combined loss and the training loop.

pub mod features;
pub mod loss;
pub mod model;
pub mod objective;
pub mod proxy;
pub mod sampler;
pub mod trainer;

pub use features::{extract_features, MbFeatures, FEATURE_DIM};
pub use loss::{rer_loss, LossOutput};
pub use model::{argmax, assign_emphasis, softmax, EaModel, FeatureNorm, LevelDist, LinearEaModel};
pub use objective::{brute_force_optimum, evaluate_objective, BruteForceResult, Objective};
pub use proxy::{build_proxy_target, ProxyTarget, Routing};
pub use sampler::exponential_sample;
pub use trainer::{
    evaluate_frames, prepare_sequences, train, train_frozen, train_model, EpochLog, PreparedFrame, TrainOutcome,
    TrainerConfig,
};

use crate::codec::{EmphasisMap, QpTable};
use crate::error::Result;
use crate::frames::Frame;
use crate::pet::lowest_quality_encode_with;
use crate::quality::per_mb_ssim;

/// Features for an unseen frame followed by the model's argmax assignment.
pub fn predict_emphasis(model: &dyn EaModel, frame: &Frame, table: &QpTable) -> Result<EmphasisMap> {
    let low = lowest_quality_encode_with(frame, table);
    let ssim = per_mb_ssim(frame, &low)?;
    let feats = extract_features(frame, &ssim)?;
    Ok(assign_emphasis(model, &feats))
}
