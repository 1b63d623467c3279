//! Corpus handling, training orchestration, sweeps, ablations and reports.

pub mod ablation;
pub mod config;
pub mod corpus;
pub mod heatmap;
pub mod sweep;

pub use ablation::{run_ablation, AblationRow};
pub use config::{BaselineConfig, RunConfig};
pub use corpus::{generate_corpus, load_corpus, split_scenes, write_corpus, GroundTruth, Split};
pub use heatmap::{render_emphasis, render_qp, AnyMap, RgbImage};
pub use sweep::{run_sweep, SweepReport, SweepRow, TestSequence};

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::Scene;
use crate::oracle::AccuracyOracle;
use crate::rer::{prepare_sequences, train, EpochLog, PreparedFrame, TrainOutcome};

pub const SCHEMA_VERSION: u32 = 1;

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let msg = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        _ => Error::parse(path.display().to_string(), msg),
    }
}

pub fn write_epoch_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    if log.is_empty() {
        // csv writes no header for zero records
        let header = "epoch,loss,loss1,loss2,acc_c,acc_r,p,mean_emphasis,val_gap,val_mean_emphasis,lr\n";
        return fs::write(path, header).map_err(|e| Error::io(path, e));
    }
    write_csv(path, log)
}

fn pick(corpus: &[Vec<Scene>], idx: &[usize]) -> Vec<Vec<Scene>> {
    idx.iter().map(|&i| corpus[i].clone()).collect()
}

/// Prepared train and validation frames for the seeded split of `corpus`.
pub fn prepare_split(
    corpus: &[Vec<Scene>],
    split: &Split,
    cfg: &RunConfig,
    oracle: &dyn AccuracyOracle,
) -> Result<(Vec<PreparedFrame>, Vec<PreparedFrame>)> {
    let table = &cfg.trainer.qp_table;
    Ok((
        prepare_sequences(&pick(corpus, &split.train), table, oracle)?,
        prepare_sequences(&pick(corpus, &split.val), table, oracle)?,
    ))
}

pub fn test_sequences(corpus: &[Vec<Scene>], split: &Split) -> Vec<TestSequence> {
    split
        .test
        .iter()
        .map(|&i| TestSequence {
            scene_id: i,
            frames: corpus[i].clone(),
        })
        .collect()
}

/// Splits `corpus`, trains on the train part and stops on the validation part.
pub fn train_on_corpus(corpus: &[Vec<Scene>], cfg: &RunConfig, oracle: &dyn AccuracyOracle) -> Result<TrainOutcome> {
    cfg.validate()?;
    let split = split_scenes(corpus.len(), cfg.seed);
    let (tr, va) = prepare_split(corpus, &split, cfg, oracle)?;
    train(&tr, &va, oracle, &cfg.trainer)
}
