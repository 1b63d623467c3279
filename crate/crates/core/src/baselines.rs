//! Comparison strategies: frame-level uniform QP search, binary RoI/BG
//! assignment, and an emulation of variance-based codec AQ.

use serde::{Deserialize, Serialize};

use crate::codec::{encode_frame, QpMap, QpTable, MAX_QP};
use crate::error::{Error, Result};
use crate::frames::{Frame, Region, RegionMap, Scene, MB_PIXELS};
use crate::grid::Grid;
use crate::oracle::AccuracyOracle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "how2compress")]
    How2Compress,
    #[serde(rename = "uniform_qp")]
    UniformQp,
    #[serde(rename = "binary_roi")]
    BinaryRoi,
    #[serde(rename = "variance_aq_emulated")]
    VarianceAq,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::How2Compress, Method::UniformQp, Method::BinaryRoi, Method::VarianceAq];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::How2Compress => "how2compress",
            Method::UniformQp => "uniform_qp",
            Method::BinaryRoi => "binary_roi",
            Method::VarianceAq => "variance_aq_emulated",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineResult {
    pub method: Method,
    pub qp_map: QpMap,
    pub bits: u64,
    pub acc_c: f64,
    pub acc_r: f64,
    pub feasible: bool,
    pub recon: Frame,
}

/// Encodes `scene` with `qp_map` and scores it.
pub fn evaluate_qp_map(
    method: Method,
    scene: &Scene,
    qp_map: QpMap,
    oracle: &dyn AccuracyOracle,
    tau: f64,
    acc_r: f64,
) -> Result<BaselineResult> {
    let enc = encode_frame(&scene.frame, &qp_map)?;
    let acc_c = oracle.score(&enc.recon, &scene.gt_boxes);
    Ok(BaselineResult {
        method,
        qp_map,
        bits: enc.total_bits,
        acc_c,
        acc_r,
        feasible: (acc_c - acc_r).abs() <= tau,
        recon: enc.recon,
    })
}

/// Tries uniform emphasis levels from lowest quality upward and keeps the
/// first whose accuracy is within `tau`; falls back to the top level, flagged
/// infeasible.
pub fn uniform_qp_search(scene: &Scene, oracle: &dyn AccuracyOracle, tau: f64, table: &QpTable) -> Result<BaselineResult> {
    let g = scene.frame.grid();
    let acc_r = oracle.score(&scene.frame, &scene.gt_boxes);
    let mut last = None;
    for &qp in table.0.iter() {
        let res = evaluate_qp_map(Method::UniformQp, scene, QpMap::uniform(g.rows, g.cols, qp)?, oracle, tau, acc_r)?;
        if res.feasible {
            return Ok(res);
        }
        last = Some(res);
    }
    Ok(last.expect("table is non-empty"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinaryRoiConfig {
    pub qp_high_quality: u8,
    pub qp_low_quality: u8,
}

impl Default for BinaryRoiConfig {
    fn default() -> Self {
        Self {
            qp_high_quality: 30,
            qp_low_quality: 40,
        }
    }
}

pub fn binary_roi_assignment(regions: &RegionMap, cfg: &BinaryRoiConfig) -> Result<QpMap> {
    if cfg.qp_high_quality >= cfg.qp_low_quality {
        return Err(Error::invalid_config(format!(
            "high-quality QP {} must be below low-quality QP {}",
            cfg.qp_high_quality, cfg.qp_low_quality
        )));
    }
    if cfg.qp_low_quality > MAX_QP {
        return Err(Error::invalid_config("QP above 51"));
    }
    QpMap::from_grid(regions.map(|r| match r {
        Region::Roi => cfg.qp_high_quality,
        Region::Bg => cfg.qp_low_quality,
    }))
}

/// Which blocks the variance AQ emulation favours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AqDirection {
    /// x264-like: flat blocks receive lower QP, textured blocks higher.
    #[default]
    FlatFiner,
    /// Textured blocks receive lower QP, flat blocks higher.
    TexturedFiner,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AqConfig {
    pub strength: f64,
    pub clamp: i32,
    pub direction: AqDirection,
}

impl Default for AqConfig {
    fn default() -> Self {
        Self {
            strength: 1.0,
            clamp: 6,
            direction: AqDirection::FlatFiner,
        }
    }
}

fn log_variances(frame: &Frame) -> Grid<f64> {
    let g = frame.grid();
    Grid::from_fn(g.rows, g.cols, |r, c| {
        let b: [u8; MB_PIXELS] = frame.mb_block(r, c);
        let n = MB_PIXELS as f64;
        let mean = b.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = b.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        (var + 1.0).log2()
    })
}

/// Per-macroblock QP offsets `round(strength·(mean_frame(log2(var+1)) − log2(var_mb+1)))`
/// clamped to ±`clamp`; [`AqDirection::FlatFiner`] negates the offset.
pub fn variance_aq_offsets(frame: &Frame, cfg: &AqConfig) -> Grid<i32> {
    let lv = log_variances(frame);
    let mean = lv.iter().sum::<f64>() / lv.len() as f64;
    let sign = match cfg.direction {
        AqDirection::TexturedFiner => 1.0,
        AqDirection::FlatFiner => -1.0,
    };
    lv.map(|&v| ((sign * cfg.strength * (mean - v)).round() as i32).clamp(-cfg.clamp, cfg.clamp))
}

pub fn variance_aq(frame: &Frame, base_qp: u8, cfg: &AqConfig) -> Result<QpMap> {
    if !(6..=45).contains(&base_qp) {
        return Err(Error::invalid_input(format!("base QP {base_qp} outside [6,45]")));
    }
    QpMap::from_grid(
        variance_aq_offsets(frame, cfg).map(|&o| (base_qp as i32 + o).clamp(0, MAX_QP as i32) as u8),
    )
}

/// Lowers the AQ base QP one step at a time from `max_base` until accuracy is
/// within `tau`; falls back to `min_base`, flagged infeasible.
pub fn variance_aq_search(
    scene: &Scene,
    oracle: &dyn AccuracyOracle,
    tau: f64,
    cfg: &AqConfig,
    max_base: u8,
    min_base: u8,
) -> Result<BaselineResult> {
    let acc_r = oracle.score(&scene.frame, &scene.gt_boxes);
    let mut last = None;
    for base in (min_base..=max_base).rev() {
        let map = variance_aq(&scene.frame, base, cfg)?;
        let res = evaluate_qp_map(Method::VarianceAq, scene, map, oracle, tau, acc_r)?;
        if res.feasible {
            return Ok(res);
        }
        last = Some(res);
    }
    last.ok_or_else(|| Error::invalid_config("empty AQ base QP range"))
}
