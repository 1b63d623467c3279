//! SSIM (single window per macroblock) and PSNR.

use crate::error::{Error, Result};
use crate::frames::{Frame, MB_PIXELS};
use crate::grid::Grid;

pub const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
pub const PSNR_CAP_DB: f64 = 99.0;

pub type MbSsimGrid = Grid<f64>;

/// SSIM over one window using population statistics.
pub fn ssim_block(x: &[u8], y: &[u8]) -> f64 {
    assert_eq!(x.len(), y.len(), "ssim_block needs equal-sized windows");
    let n = x.len() as f64;
    let mx = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let my = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a as f64 - mx, b as f64 - my);
        vx += da * da;
        vy += db * db;
        cov += da * db;
    }
    vx /= n;
    vy /= n;
    cov /= n;
    ((2.0 * mx * my + C1) * (2.0 * cov + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2))
}

fn same_dims(a: &Frame, b: &Frame) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::invalid_input(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn per_mb_ssim(raw: &Frame, other: &Frame) -> Result<MbSsimGrid> {
    same_dims(raw, other)?;
    let grid = raw.grid();
    Ok(Grid::from_fn(grid.rows, grid.cols, |r, c| {
        let a: [u8; MB_PIXELS] = raw.mb_block(r, c);
        let b: [u8; MB_PIXELS] = other.mb_block(r, c);
        ssim_block(&a, &b)
    }))
}

pub fn mean_ssim(grid: &MbSsimGrid) -> f64 {
    grid.iter().sum::<f64>() / grid.len().max(1) as f64
}

pub fn mse(raw: &Frame, recon: &Frame) -> Result<f64> {
    same_dims(raw, recon)?;
    let sum: f64 = raw
        .luma()
        .iter()
        .zip(recon.luma())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / raw.luma().len() as f64)
}

/// PSNR in dB; identical frames report [`PSNR_CAP_DB`].
pub fn psnr(raw: &Frame, recon: &Frame) -> Result<f64> {
    let m = mse(raw, recon)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (255.0f64 * 255.0 / m).log10()).min(PSNR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_frame, QpMap};
    use crate::frames::{generate_scene, SceneConfig};
    use proptest::prelude::*;

    #[test]
    fn ssim_examples() {
        let x: Vec<u8> = (0..256).map(|i| (i * 37 % 256) as u8).collect();
        assert!((ssim_block(&x, &x) - 1.0).abs() < 1e-12);
        let zeros = [0u8; 256];
        let full = [255u8; 256];
        let expected = C1 / (255.0 * 255.0 + C1);
        assert!((ssim_block(&zeros, &full) - expected).abs() < 1e-12);
        assert!((expected - 9.9998e-5).abs() < 1e-8);
    }

    #[test]
    fn psnr_examples() {
        let a = Frame::filled(16, 16, 0).unwrap();
        let b = Frame::filled(16, 16, 255).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        assert!(psnr(&a, &b).unwrap().abs() < 1e-12);
        assert!(psnr(&a, &Frame::filled(16, 32, 0).unwrap()).is_err());
    }

    #[test]
    fn per_mb_grid_shape_and_identity() {
        let s = generate_scene(2, &SceneConfig::default()).unwrap();
        let g = per_mb_ssim(&s.frame, &s.frame).unwrap();
        assert_eq!(g.shape(), s.frame.grid().shape());
        assert!(g.iter().all(|v| (*v - 1.0).abs() < 1e-12));
        let low = encode_frame(&s.frame, &QpMap::uniform(16, 16, 45).unwrap()).unwrap().recon;
        let gl = per_mb_ssim(&s.frame, &low).unwrap();
        assert!(gl.iter().cloned().fold(f64::INFINITY, f64::min) < 1.0);
    }

    #[test]
    fn psnr_improves_with_quality() {
        let s = generate_scene(4, &SceneConfig::default()).unwrap();
        let g = s.frame.grid();
        let r30 = encode_frame(&s.frame, &QpMap::uniform(g.rows, g.cols, 30).unwrap()).unwrap().recon;
        let r45 = encode_frame(&s.frame, &QpMap::uniform(g.rows, g.cols, 45).unwrap()).unwrap().recon;
        assert!(psnr(&s.frame, &r30).unwrap() > psnr(&s.frame, &r45).unwrap());
    }

    proptest! {
        #[test]
        fn ssim_symmetric_and_bounded(a in prop::collection::vec(any::<u8>(), 256), b in prop::collection::vec(any::<u8>(), 256)) {
            let s1 = ssim_block(&a, &b);
            let s2 = ssim_block(&b, &a);
            prop_assert!((s1 - s2).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&s1));
        }
    }
}
