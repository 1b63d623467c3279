use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frames::{Frame, MB_PIXELS, MB_SIZE};
use crate::grid::Grid;
use crate::quality::MbSsimGrid;

pub const FEATURE_DIM: usize = 6;

/// Per-macroblock descriptor: mean, variance, gradient energy, low-quality
/// SSIM, row position, column position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MbFeatures(pub [f64; FEATURE_DIM]);

impl MbFeatures {
    pub const NAMES: [&'static str; FEATURE_DIM] =
        ["mean", "variance", "gradient", "ssim_low", "row", "col"];
}

pub fn extract_features(frame: &Frame, ssim_low: &MbSsimGrid) -> Result<Grid<MbFeatures>> {
    let grid = frame.grid();
    Grid::filled(grid.rows, grid.cols, ()).ensure_shape(ssim_low, "low-quality SSIM grid")?;
    Ok(Grid::from_fn(grid.rows, grid.cols, |r, c| {
        let block = frame.mb_block(r, c);
        let n = MB_PIXELS as f64;
        let mean = block.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = block.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let (x0, y0) = ((c * MB_SIZE) as isize, (r * MB_SIZE) as isize);
        let mut grad = 0.0;
        for dy in 0..MB_SIZE as isize {
            for dx in 0..MB_SIZE as isize {
                let (x, y) = (x0 + dx, y0 + dy);
                let p = frame.sample_clamped(x, y) as f64;
                grad += (frame.sample_clamped(x + 1, y) as f64 - p).abs();
                grad += (frame.sample_clamped(x, y + 1) as f64 - p).abs();
            }
        }
        MbFeatures([
            mean / 255.0,
            var / (255.0 * 255.0),
            grad / n / 255.0,
            *ssim_low.get(r, c),
            (r as f64 + 0.5) / grid.rows as f64,
            (c as f64 + 0.5) / grid.cols as f64,
        ])
    }))
}
