//! Method comparison on held-out sequences.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::SCHEMA_VERSION;
use crate::baselines::{
    binary_roi_assignment, evaluate_qp_map, uniform_qp_search, variance_aq_search, BaselineResult, Method,
};
use crate::codec::{apply_emphasis_with, write_qp_matrix, EmphasisMap, QpMap, QpTable};
use crate::error::{Error, Result};
use crate::frames::{classify_regions, Scene};
use crate::oracle::AccuracyOracle;
use crate::quality::{mean_ssim, per_mb_ssim, psnr};
use crate::rer::{predict_emphasis, EaModel};

pub const FRAME_RATE: f64 = 30.0;

/// A held-out sequence together with its corpus scene id.
#[derive(Clone, Debug)]
pub struct TestSequence {
    pub scene_id: usize,
    pub frames: Vec<Scene>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scene: usize,
    pub frame: usize,
    pub method: Method,
    pub bits: u64,
    pub bitrate_bps: f64,
    pub acc_r: f64,
    pub acc_c: f64,
    pub feasible: bool,
    pub mean_ssim: f64,
    pub psnr: f64,
    pub mean_qp: f64,
    pub emphasis_sum: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub frames: usize,
    pub total_bits: u64,
    pub mean_bits: f64,
    /// total_bits·30/frames
    pub bitrate_bps: f64,
    pub acc_r: f64,
    pub acc_c: f64,
    pub acc_gap: f64,
    pub feasible: bool,
    pub infeasible_frames: usize,
    pub mean_ssim: f64,
    pub mean_psnr: f64,
    pub savings_vs_uniform: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub tau: f64,
    pub interval: usize,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<MethodAggregate>,
    #[serde(skip)]
    pub qp_maps: Vec<(Method, Vec<QpMap>)>,
}

/// Emphasis maps for a sequence, predicting on frames 0, k, 2k, … and reusing
/// each prediction for the following frames.
pub fn predict_sequence(model: &dyn EaModel, frames: &[Scene], interval: usize, table: &QpTable) -> Result<Vec<EmphasisMap>> {
    if interval == 0 {
        return Err(Error::invalid_config("interval must be at least 1"));
    }
    let mut out: Vec<EmphasisMap> = Vec::with_capacity(frames.len());
    for (j, s) in frames.iter().enumerate() {
        if j % interval == 0 {
            out.push(predict_emphasis(model, &s.frame, table)?);
        } else {
            let prev = out[j - j % interval].clone();
            if prev.shape() != (s.frame.grid().rows, s.frame.grid().cols) {
                return Err(Error::invalid_input("frame size changes within a sequence"));
            }
            out.push(prev);
        }
    }
    Ok(out)
}

fn row_from(res: &BaselineResult, scene: &Scene, scene_id: usize, frame: usize, emphasis_sum: Option<u64>, tau: f64) -> Result<SweepRow> {
    Ok(SweepRow {
        scene: scene_id,
        frame,
        method: res.method,
        bits: res.bits,
        bitrate_bps: res.bits as f64 * FRAME_RATE,
        acc_r: res.acc_r,
        acc_c: res.acc_c,
        feasible: (res.acc_c - res.acc_r).abs() <= tau,
        mean_ssim: mean_ssim(&per_mb_ssim(&scene.frame, &res.recon)?),
        psnr: psnr(&scene.frame, &res.recon)?,
        mean_qp: res.qp_map.mean_qp(),
        emphasis_sum,
    })
}

pub fn enabled_methods(cfg: &RunConfig) -> Vec<Method> {
    let b = &cfg.baselines;
    Method::ALL
        .into_iter()
        .filter(|m| match m {
            Method::How2Compress => true,
            Method::UniformQp => b.uniform,
            Method::BinaryRoi => b.binary,
            Method::VarianceAq => b.variance_aq,
        })
        .collect()
}

fn evaluate_frame(
    method: Method,
    scene: &Scene,
    em: &EmphasisMap,
    cfg: &RunConfig,
    oracle: &dyn AccuracyOracle,
    tau: f64,
    acc_r: f64,
) -> Result<BaselineResult> {
    let table = &cfg.trainer.qp_table;
    let b = &cfg.baselines;
    match method {
        Method::How2Compress => evaluate_qp_map(method, scene, apply_emphasis_with(em, table), oracle, tau, acc_r),
        Method::UniformQp => uniform_qp_search(scene, oracle, tau, table),
        Method::BinaryRoi => {
            let regions = classify_regions(&scene.frame.grid(), &scene.gt_boxes);
            evaluate_qp_map(method, scene, binary_roi_assignment(&regions, &b.binary_roi)?, oracle, tau, acc_r)
        }
        Method::VarianceAq => variance_aq_search(scene, oracle, tau, &b.aq, b.aq_max_base, b.aq_min_base),
    }
}

/// Evaluates every enabled method on every frame of `sequences`.
pub fn run_sweep(
    model: &dyn EaModel,
    sequences: &[TestSequence],
    cfg: &RunConfig,
    oracle: &dyn AccuracyOracle,
    tau: f64,
) -> Result<SweepReport> {
    cfg.validate()?;
    let methods = enabled_methods(cfg);
    let mut jobs: Vec<(usize, usize, &Scene, EmphasisMap)> = Vec::new();
    for seq in sequences {
        let maps = predict_sequence(model, &seq.frames, cfg.interval, &cfg.trainer.qp_table)?;
        for (j, (scene, em)) in seq.frames.iter().zip(maps).enumerate() {
            jobs.push((seq.scene_id, j, scene, em));
        }
    }
    let per_frame: Vec<Vec<(SweepRow, QpMap)>> = jobs
        .par_iter()
        .map(|(sid, j, scene, em)| {
            let acc_r = oracle.score(&scene.frame, &scene.gt_boxes);
            methods
                .iter()
                .map(|&m| {
                    let res = evaluate_frame(m, scene, em, cfg, oracle, tau, acc_r)?;
                    let sum = (m == Method::How2Compress).then(|| em.emphasis_sum());
                    Ok((row_from(&res, scene, *sid, *j, sum, tau)?, res.qp_map))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut qp_maps: Vec<(Method, Vec<QpMap>)> = methods.iter().map(|&m| (m, Vec::new())).collect();
    for frame in per_frame {
        for (k, (row, qp)) in frame.into_iter().enumerate() {
            rows.push(row);
            qp_maps[k].1.push(qp);
        }
    }
    let aggregates = aggregate_rows(&rows, &methods, tau);
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        tau,
        interval: cfg.interval,
        rows,
        aggregates,
        qp_maps,
    })
}

/// Per-method aggregates recomputed from the rows. Feasibility is judged on
/// the corpus-level gap |mean acc_c − mean acc_r|.
pub fn aggregate_rows(rows: &[SweepRow], methods: &[Method], tau: f64) -> Vec<MethodAggregate> {
    let mut out: Vec<MethodAggregate> = methods
        .iter()
        .map(|&m| {
            let rs: Vec<&SweepRow> = rows.iter().filter(|r| r.method == m).collect();
            let n = rs.len();
            let nf = n.max(1) as f64;
            let total_bits: u64 = rs.iter().map(|r| r.bits).sum();
            let mean = |f: fn(&SweepRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / nf;
            let (acc_r, acc_c) = (mean(|r| r.acc_r), mean(|r| r.acc_c));
            MethodAggregate {
                method: m,
                frames: n,
                total_bits,
                mean_bits: total_bits as f64 / nf,
                bitrate_bps: total_bits as f64 * FRAME_RATE / nf,
                acc_r,
                acc_c,
                acc_gap: (acc_c - acc_r).abs(),
                feasible: (acc_c - acc_r).abs() <= tau,
                infeasible_frames: rs.iter().filter(|r| !r.feasible).count(),
                mean_ssim: mean(|r| r.mean_ssim),
                mean_psnr: mean(|r| r.psnr),
                savings_vs_uniform: None,
            }
        })
        .collect();
    if let Some(uniform) = out.iter().find(|a| a.method == Method::UniformQp).map(|a| a.total_bits) {
        for a in &mut out {
            if uniform > 0 {
                a.savings_vs_uniform = Some(1.0 - a.total_bits as f64 / uniform as f64);
            }
        }
    }
    out
}

impl SweepReport {
    pub fn aggregate(&self, method: Method) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            schema_version: u32,
            tau: f64,
            interval: usize,
            frames: usize,
            note: &'a str,
            methods: &'a [MethodAggregate],
        }
        let frames = self.aggregates.first().map(|a| a.frames).unwrap_or(0);
        let s = Summary {
            schema_version: self.schema_version,
            tau: self.tau,
            interval: self.interval,
            frames,
            note: "variance_aq_emulated is an emulation of codec variance AQ, not x264 output",
            methods: &self.aggregates,
        };
        serde_json::to_string_pretty(&s).expect("summary serializes") + "\n"
    }

    /// Writes `sweep_rows.csv`, `sweep_aggregates.csv`, `summary.json` and one
    /// `qp_matrix_<method>.txt` per method into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        super::write_csv(&dir.join("sweep_rows.csv"), &self.rows)?;
        super::write_csv(&dir.join("sweep_aggregates.csv"), &self.aggregates)?;
        let summary = dir.join("summary.json");
        fs::write(&summary, self.summary_json()).map_err(|e| Error::io(&summary, e))?;
        for (m, maps) in &self.qp_maps {
            write_qp_matrix(maps, &dir.join(format!("qp_matrix_{}.txt", m.as_str())))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::generate_sequence;
    use crate::oracle::BlobDetector;
    use crate::rer::{FeatureNorm, LinearEaModel};

    fn tiny_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.scene.width = 96;
        cfg.scene.height = 64;
        cfg.scene.min_objects = 1;
        cfg.scene.max_objects = 2;
        cfg
    }

    #[test]
    fn interval_reuses_predictions() {
        let cfg = tiny_cfg();
        let frames = generate_sequence(3, &cfg.scene, 5).unwrap();
        let mut model = LinearEaModel::zeros(FeatureNorm::default());
        model.bias = [0.0, 0.0, 1.0, 0.0, 0.0];
        model.weights[4][3] = -20.0;
        let table = QpTable::default();
        let every = predict_sequence(&model, &frames, 1, &table).unwrap();
        let reuse = predict_sequence(&model, &frames, 2, &table).unwrap();
        assert_eq!(reuse[1], every[0]);
        assert_eq!(reuse[2], every[2]);
        assert_eq!(reuse[3], every[2]);
        assert_eq!(reuse[4], every[4]);
        assert!(predict_sequence(&model, &frames, 0, &table).is_err());
    }

    #[test]
    fn report_structure_and_aggregates() {
        let cfg = tiny_cfg();
        let seqs: Vec<TestSequence> = (0..2)
            .map(|i| TestSequence {
                scene_id: 10 + i,
                frames: generate_sequence(40 + i as u64, &cfg.scene, 2).unwrap(),
            })
            .collect();
        let model = LinearEaModel::zeros(FeatureNorm::default());
        let rep = run_sweep(&model, &seqs, &cfg, &BlobDetector::default(), 0.02).unwrap();
        assert_eq!(rep.aggregates.len(), 4);
        assert_eq!(rep.rows.len(), 16);
        assert_eq!(rep.qp_maps.iter().map(|(_, v)| v.len()).collect::<Vec<_>>(), vec![4; 4]);
        assert_eq!(aggregate_rows(&rep.rows, &Method::ALL, 0.02), rep.aggregates);
        for a in &rep.aggregates {
            assert_eq!(a.feasible, a.acc_gap <= 0.02);
            assert!((a.bitrate_bps - a.total_bits as f64 * 30.0 / 4.0).abs() < 1e-9);
        }
        let u = rep.aggregate(Method::UniformQp).unwrap();
        assert_eq!(u.savings_vs_uniform, Some(0.0));
        // zero model predicts level 0 everywhere
        assert!(rep.rows.iter().filter(|r| r.method == Method::How2Compress).all(|r| r.emphasis_sum == Some(0)));
        let dir = tempfile::tempdir().unwrap();
        rep.write(dir.path()).unwrap();
        for f in ["sweep_rows.csv", "sweep_aggregates.csv", "summary.json", "qp_matrix_how2compress.txt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let summary: serde_json::Value = serde_json::from_str(&rep.summary_json()).unwrap();
        assert_eq!(summary["schema_version"], SCHEMA_VERSION);
    }

    #[test]
    fn disabled_baselines_are_skipped() {
        let mut cfg = tiny_cfg();
        cfg.baselines.variance_aq = false;
        cfg.baselines.binary = false;
        assert_eq!(enabled_methods(&cfg), vec![Method::How2Compress, Method::UniformQp]);
    }
}
