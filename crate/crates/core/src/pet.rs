//! Percentile SSIM thresholds separating compression-resilient macroblocks
//! from sensitive ones.
//!
//! A representative frame is encoded at the lowest quality, every macroblock's
//! SSIM against the raw frame is collected and sorted ascending, and the two
//! thresholds are nearest-rank order statistics of that list.

use serde::{Deserialize, Serialize};

use crate::codec::{encode_frame, QpMap, QpTable};
use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::quality::{per_mb_ssim, MbSsimGrid};

pub const DEFAULT_PCT_ROI: f64 = 0.9;
pub const DEFAULT_PCT_BG: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetThresholds {
    pub t_roi: f64,
    pub t_bg: f64,
    pub pct_roi: f64,
    pub pct_bg: f64,
}

/// Reconstruction at uniform emphasis 0 (the table's base QP).
pub fn lowest_quality_encode(frame: &Frame) -> Frame {
    lowest_quality_encode_with(frame, &QpTable::default())
}

pub fn lowest_quality_encode_with(frame: &Frame, table: &QpTable) -> Frame {
    let g = frame.grid();
    let qp = QpMap::uniform(g.rows, g.cols, table.0[0]).expect("table QP is valid");
    encode_frame(frame, &qp).expect("uniform map matches grid").recon
}

/// Index `round(q·(n−1))` into an ascending list of length `n`.
pub fn nearest_rank_index(q: f64, n: usize) -> usize {
    debug_assert!(n > 0);
    ((q * (n - 1) as f64).round() as usize).min(n - 1)
}

fn check_pct(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid_input(format!("percentile {p} outside [0,1]")));
    }
    Ok(())
}

/// Thresholds from an already computed low-quality SSIM grid.
pub fn thresholds_from_ssim(ssim: &MbSsimGrid, pct_roi: f64, pct_bg: f64) -> Result<PetThresholds> {
    check_pct(pct_roi)?;
    check_pct(pct_bg)?;
    if ssim.is_empty() {
        return Err(Error::invalid_input("empty SSIM grid"));
    }
    let mut d: Vec<f64> = ssim.iter().copied().collect();
    d.sort_by(f64::total_cmp);
    Ok(PetThresholds {
        t_roi: d[nearest_rank_index(pct_roi, d.len())],
        t_bg: d[nearest_rank_index(pct_bg, d.len())],
        pct_roi,
        pct_bg,
    })
}

pub fn proxy_emphasis_threshold(raw: &Frame, low: &Frame, pct_roi: f64, pct_bg: f64) -> Result<PetThresholds> {
    let ssim = per_mb_ssim(raw, low)?;
    thresholds_from_ssim(&ssim, pct_roi, pct_bg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{generate_scene, SceneConfig};
    use crate::grid::Grid;
    use crate::quality::mean_ssim;
    use proptest::prelude::*;

    #[test]
    fn constant_distribution() {
        let g = Grid::filled(4, 4, 0.73);
        let t = thresholds_from_ssim(&g, 0.9, 0.5).unwrap();
        assert_eq!((t.t_roi, t.t_bg), (0.73, 0.73));
    }

    #[test]
    fn hundred_values() {
        let vals: Vec<f64> = (0..100).rev().map(|i| i as f64 / 100.0).collect();
        let g = Grid::from_vec(10, 10, vals).unwrap();
        let t = thresholds_from_ssim(&g, DEFAULT_PCT_ROI, DEFAULT_PCT_BG).unwrap();
        assert_eq!(t.t_roi, 0.89);
        assert_eq!(t.t_bg, 0.50);
    }

    #[test]
    fn invalid_inputs() {
        let empty: Grid<f64> = Grid::from_vec(0, 0, vec![]).unwrap();
        assert!(thresholds_from_ssim(&empty, 0.9, 0.5).is_err());
        assert!(thresholds_from_ssim(&Grid::filled(1, 1, 0.5), 1.1, 0.5).is_err());
    }

    #[test]
    fn lowest_quality_properties() {
        let s = generate_scene(1, &SceneConfig::default()).unwrap();
        let low = lowest_quality_encode(&s.frame);
        assert_eq!(low, lowest_quality_encode(&s.frame));
        assert!(mean_ssim(&per_mb_ssim(&s.frame, &low).unwrap()) < 1.0);
        let zero = Frame::filled(32, 32, 0).unwrap();
        assert_eq!(lowest_quality_encode(&zero), zero);
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_monotone(
            vals in prop::collection::vec(-1.0f64..1.0, 1..60),
            rot in 0usize..60,
            p1 in 0.0f64..1.0,
            p2 in 0.0f64..1.0,
        ) {
            let n = vals.len();
            let a = Grid::from_vec(1, n, vals.clone()).unwrap();
            let mut shifted = vals.clone();
            shifted.rotate_left(rot % n);
            let b = Grid::from_vec(n, 1, shifted).unwrap();
            let ta = thresholds_from_ssim(&a, p1, p2).unwrap();
            let tb = thresholds_from_ssim(&b, p1, p2).unwrap();
            prop_assert_eq!(ta, tb);
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let t = thresholds_from_ssim(&a, hi, lo).unwrap();
            prop_assert!(t.t_roi >= t.t_bg);
        }
    }
}
