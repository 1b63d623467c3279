//! Proxy emphasis targets built by region-aware dual exploration.

use rand::Rng;

use super::sampler::exponential_sample;
use crate::codec::{EmphasisMap, NUM_LEVELS};
use crate::error::Result;
use crate::frames::{Region, RegionMap};
use crate::grid::Grid;
use crate::pet::PetThresholds;
use crate::quality::MbSsimGrid;

pub type ProxyTarget = EmphasisMap;

const TOP: u8 = (NUM_LEVELS - 1) as u8;

/// How macroblocks are routed when building targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routing {
    /// RoI explores upward, BG explores downward.
    #[default]
    RegionAware,
    /// Every macroblock takes the BG branch (ablation without region routing).
    Uniform,
}

/// Builds the proxy target for one frame.
///
/// RoI: with probability `p`, and if its low-quality SSIM is at most `t_roi`,
/// sample upward from the current level; otherwise keep it.
/// BG: with probability `p`, and if its SSIM is at least `t_bg`, sample
/// downward; otherwise step one level down (floored at 0).
#[allow(clippy::too_many_arguments)]
pub fn build_proxy_target<R: Rng + ?Sized>(
    em: &EmphasisMap,
    regions: &RegionMap,
    mb_ssim_low: &MbSsimGrid,
    thr: &PetThresholds,
    p: f64,
    sampler_decay: f64,
    routing: Routing,
    rng: &mut R,
) -> Result<ProxyTarget> {
    em.grid().ensure_shape(regions, "region map")?;
    em.grid().ensure_shape(mb_ssim_low, "low-quality SSIM grid")?;
    let mut out = Vec::with_capacity(em.levels().len());
    for ((&level, &region), &ssim) in em.levels().iter().zip(regions.iter()).zip(mb_ssim_low.iter()) {
        let explore = rng.random::<f64>() < p;
        let region = match routing {
            Routing::RegionAware => region,
            Routing::Uniform => Region::Bg,
        };
        let target = match region {
            Region::Roi if explore && ssim <= thr.t_roi => exponential_sample(level, TOP, sampler_decay, rng)?,
            Region::Roi => level,
            Region::Bg if explore && ssim >= thr.t_bg => exponential_sample(level, 0, sampler_decay, rng)?,
            Region::Bg => level.saturating_sub(1),
        };
        out.push(target.min(TOP));
    }
    EmphasisMap::from_grid(Grid::from_vec(em.grid().rows(), em.grid().cols(), out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn thr(t_roi: f64, t_bg: f64) -> PetThresholds {
        PetThresholds { t_roi, t_bg, pct_roi: 0.9, pct_bg: 0.5 }
    }

    #[test]
    fn no_exploration() {
        let em = EmphasisMap::from_levels(2, 2, vec![0, 2, 4, 3]).unwrap();
        let regions = Grid::from_vec(2, 2, vec![Region::Roi, Region::Bg, Region::Roi, Region::Bg]).unwrap();
        let ssim = Grid::filled(2, 2, 0.1);
        let mut g = rng::stream(3, &[]);
        let proxy = build_proxy_target(&em, &regions, &ssim, &thr(0.5, 0.0), 0.0, 0.5, Routing::RegionAware, &mut g).unwrap();
        assert_eq!(proxy.levels(), &[0, 1, 4, 2]);
    }

    #[test]
    fn saturated_ends() {
        let mut g = rng::stream(4, &[]);
        let em = EmphasisMap::uniform(3, 3, 4).unwrap();
        let roi = Grid::filled(3, 3, Region::Roi);
        let low = Grid::filled(3, 3, 0.2);
        let p = build_proxy_target(&em, &roi, &low, &thr(0.5, 0.5), 1.0, 0.5, Routing::RegionAware, &mut g).unwrap();
        assert!(p.levels().iter().all(|&l| l == 4));
        let em = EmphasisMap::uniform(3, 3, 0).unwrap();
        let bg = Grid::filled(3, 3, Region::Bg);
        let high = Grid::filled(3, 3, 0.9);
        let p = build_proxy_target(&em, &bg, &high, &thr(0.5, 0.5), 1.0, 0.5, Routing::RegionAware, &mut g).unwrap();
        assert!(p.levels().iter().all(|&l| l == 0));
    }

    #[test]
    fn shape_mismatch() {
        let mut g = rng::stream(5, &[]);
        let em = EmphasisMap::uniform(2, 2, 1).unwrap();
        let r = Grid::filled(2, 3, Region::Bg);
        let s = Grid::filled(2, 2, 0.5);
        assert!(build_proxy_target(&em, &r, &s, &thr(0.5, 0.5), 0.5, 0.5, Routing::RegionAware, &mut g).is_err());
    }

    proptest! {
        #[test]
        fn routing_direction(
            levels in prop::collection::vec(0u8..5, 12),
            roi_mask in prop::collection::vec(any::<bool>(), 12),
            ssim in prop::collection::vec(-1.0f64..1.0, 12),
            p in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let em = EmphasisMap::from_levels(3, 4, levels.clone()).unwrap();
            let regions = Grid::from_vec(3, 4, roi_mask.iter().map(|&r| if r { Region::Roi } else { Region::Bg }).collect()).unwrap();
            let ssim = Grid::from_vec(3, 4, ssim).unwrap();
            let mut g = rng::stream(seed, &[]);
            let proxy = build_proxy_target(&em, &regions, &ssim, &thr(0.3, -0.2), p, 0.5, Routing::RegionAware, &mut g).unwrap();
            for i in 0..12 {
                let (before, after) = (levels[i], proxy.levels()[i]);
                prop_assert!(after <= 4);
                if roi_mask[i] {
                    prop_assert!(after >= before);
                } else {
                    prop_assert!(after <= before);
                }
            }
        }
    }
}
