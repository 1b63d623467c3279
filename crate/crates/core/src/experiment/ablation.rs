//! Routing × exploration-decay × execution-interval grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::sweep::{predict_sequence, TestSequence};
use crate::baselines::uniform_qp_search;
use crate::codec::{apply_emphasis_with, encode_frame};
use crate::error::Result;
use crate::oracle::AccuracyOracle;
use crate::rer::{train, PreparedFrame, Routing, TrainOutcome};

pub const DECAYS: [f64; 5] = [0.1, 0.15, 0.2, 0.25, 0.3];
pub const INTERVALS: [usize; 5] = [1, 2, 3, 4, 5];
pub const ROUTINGS: [Routing; 2] = [Routing::RegionAware, Routing::Uniform];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub routing: Routing,
    pub p_decay: f64,
    pub interval: usize,
    pub epochs: usize,
    pub converged: bool,
    pub mean_bits: f64,
    /// Mean bits relative to the per-frame uniform-QP search baseline.
    pub normalized_bits: f64,
    pub acc_c: f64,
    pub acc_r: f64,
    pub acc_gap: f64,
}

/// Mean bits, mean acc_c and mean acc_r of the trained model's maps.
pub fn evaluate_model(
    outcome: &TrainOutcome,
    test: &[TestSequence],
    interval: usize,
    cfg: &RunConfig,
    oracle: &dyn AccuracyOracle,
) -> Result<(f64, f64, f64)> {
    let table = &cfg.trainer.qp_table;
    let mut jobs = Vec::new();
    for seq in test {
        let maps = predict_sequence(&outcome.model, &seq.frames, interval, table)?;
        jobs.extend(seq.frames.iter().zip(maps));
    }
    let per: Vec<(f64, f64, f64)> = jobs
        .par_iter()
        .map(|(scene, em)| {
            let enc = encode_frame(&scene.frame, &apply_emphasis_with(em, table))?;
            Ok((
                enc.total_bits as f64,
                oracle.score(&enc.recon, &scene.gt_boxes),
                oracle.score(&scene.frame, &scene.gt_boxes),
            ))
        })
        .collect::<Result<_>>()?;
    let n = per.len().max(1) as f64;
    Ok((
        per.iter().map(|p| p.0).sum::<f64>() / n,
        per.iter().map(|p| p.1).sum::<f64>() / n,
        per.iter().map(|p| p.2).sum::<f64>() / n,
    ))
}

/// Trains one model per (routing, decay) cell and evaluates it at every
/// interval; rows come out in routing, decay, interval order.
pub fn run_ablation(
    train_frames: &[PreparedFrame],
    val_frames: &[PreparedFrame],
    test: &[TestSequence],
    cfg: &RunConfig,
    oracle: &dyn AccuracyOracle,
) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let table = &cfg.trainer.qp_table;
    let tau = cfg.trainer.tau;
    let uniform: Vec<f64> = test
        .par_iter()
        .flat_map(|s| s.frames.par_iter())
        .map(|scene| uniform_qp_search(scene, oracle, tau, table).map(|r| r.bits as f64))
        .collect::<Result<_>>()?;
    let uniform_mean = uniform.iter().sum::<f64>() / uniform.len().max(1) as f64;

    let cells: Vec<(Routing, f64)> = ROUTINGS
        .iter()
        .flat_map(|&r| DECAYS.iter().map(move |&d| (r, d)))
        .collect();
    let rows: Vec<Vec<AblationRow>> = cells
        .par_iter()
        .map(|&(routing, p_decay)| {
            let mut tc = cfg.trainer.clone();
            tc.routing = routing;
            tc.p_decay = p_decay;
            let outcome = train(train_frames, val_frames, oracle, &tc)?;
            INTERVALS
                .iter()
                .map(|&interval| {
                    let (mean_bits, acc_c, acc_r) = evaluate_model(&outcome, test, interval, cfg, oracle)?;
                    Ok(AblationRow {
                        routing,
                        p_decay,
                        interval,
                        epochs: outcome.log.len(),
                        converged: outcome.converged,
                        mean_bits,
                        normalized_bits: if uniform_mean > 0.0 { mean_bits / uniform_mean } else { 0.0 },
                        acc_c,
                        acc_r,
                        acc_gap: (acc_c - acc_r).abs(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}
