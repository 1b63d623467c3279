//! Scene corpora on disk: one PGM plus one ground-truth JSON per frame.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::frames::{generate_sequence, BoundingBox, Frame, Scene};
use crate::rng;

/// Ground truth stored next to each frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scene: usize,
    pub frame: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub boxes: Vec<BoundingBox>,
}

pub fn scene_seed(run_seed: u64, scene: usize) -> u64 {
    rng::derive_seed(run_seed, &[0xC0_4905, scene as u64])
}

pub fn generate_corpus(cfg: &RunConfig) -> Result<Vec<Vec<Scene>>> {
    (0..cfg.scenes)
        .map(|i| generate_sequence(scene_seed(cfg.seed, i), &cfg.scene, cfg.frames_per_scene))
        .collect()
}

fn stem(scene: usize, frame: usize) -> String {
    format!("scene_{scene:03}_frame_{frame:03}")
}

pub fn write_corpus(dir: &Path, sequences: &[Vec<Scene>]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (si, seq) in sequences.iter().enumerate() {
        for (fi, scene) in seq.iter().enumerate() {
            let pgm = dir.join(format!("{}.pgm", stem(si, fi)));
            scene.frame.write_pgm(&pgm)?;
            let gt = GroundTruth {
                scene: si,
                frame: fi,
                seed: scene.seed,
                width: scene.frame.width(),
                height: scene.frame.height(),
                boxes: scene.gt_boxes.clone(),
            };
            let json = dir.join(format!("{}.json", stem(si, fi)));
            let text = serde_json::to_string_pretty(&gt).expect("ground truth serializes");
            fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
            written.push(pgm);
            written.push(json);
        }
    }
    Ok(written)
}

/// Reads every `*.json` ground-truth file in `dir` with its PGM and groups
/// the frames into sequences ordered by scene then frame index.
pub fn load_corpus(dir: &Path) -> Result<Vec<Vec<Scene>>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut jsons: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            jsons.push(path);
        }
    }
    jsons.sort();
    let mut by_scene: BTreeMap<usize, BTreeMap<usize, Scene>> = BTreeMap::new();
    for json in jsons {
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let gt: GroundTruth = serde_json::from_str(&text).map_err(|e| Error::parse(json.display().to_string(), e))?;
        let frame = Frame::read_pgm(&json.with_extension("pgm"))?;
        if frame.width() != gt.width || frame.height() != gt.height {
            return Err(Error::parse(
                json.display().to_string(),
                format!("frame is {}x{}, ground truth says {}x{}", frame.width(), frame.height(), gt.width, gt.height),
            ));
        }
        by_scene.entry(gt.scene).or_default().insert(
            gt.frame,
            Scene {
                frame,
                gt_boxes: gt.boxes,
                seed: gt.seed,
            },
        );
    }
    if by_scene.is_empty() {
        return Err(Error::invalid_input(format!("no ground-truth files in {}", dir.display())));
    }
    Ok(by_scene.into_values().map(|m| m.into_values().collect()).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded 70:20:10 split of scene indices. Every part is non-empty once there
/// are at least three scenes.
pub fn split_scenes(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, &[0x5_9117]));
    let mut n_val = ((n as f64) * 0.2).round() as usize;
    let mut n_test = ((n as f64) * 0.1).round() as usize;
    if n >= 3 {
        n_val = n_val.max(1);
        n_test = n_test.max(1);
    }
    let n_train = n.saturating_sub(n_val + n_test);
    let mut train = idx[..n_train].to_vec();
    let mut val = idx[n_train..n_train + n_val].to_vec();
    let mut test = idx[n_train + n_val..].to_vec();
    train.sort();
    val.sort();
    test.sort();
    Split { train, val, test }
}
