//! Intra-only block-transform codec simulator with per-macroblock QP control.
//!
//! Each macroblock is split into four 8×8 blocks which are level-shifted by
//! −128, transformed with an orthonormal DCT, quantized with step
//! `2^((qp−4)/6)` (round half away from zero) and costed with the run/level
//! model in [`entropy`]. Reconstruction reverses the path and clamps to 8 bits.

pub mod dct;
pub mod entropy;
pub mod maps;
pub mod qpmatrix;

pub use dct::{dct8_forward, dct8_inverse};
pub use entropy::{estimate_bits, ue_bits, EOB_BITS};
pub use maps::{EmphasisMap, QpMap};
pub use qpmatrix::{format_qp_matrix, parse_qp_matrix, read_qp_matrix, write_qp_matrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Frame, MB_PIXELS, MB_SIZE};
use crate::grid::Grid;

pub const MAX_QP: u8 = 51;
pub const NUM_LEVELS: usize = 5;

/// Emphasis level → QP lookup. Level 0 is the base (lowest quality).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QpTable(pub [u8; NUM_LEVELS]);

impl Default for QpTable {
    fn default() -> Self {
        QpTable([45, 43, 37, 34, 30])
    }
}

impl QpTable {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|&q| q > MAX_QP) {
            return Err(Error::invalid_config("QP table entries must be in [0,51]"));
        }
        if self.0.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid_config(
                "QP table must be non-increasing in emphasis level",
            ));
        }
        Ok(())
    }

    pub fn qp(&self, level: u8) -> Result<u8> {
        self.0
            .get(level as usize)
            .copied()
            .ok_or_else(|| Error::invalid_input(format!("emphasis level {level} outside 0..=4")))
    }
}

pub fn emphasis_to_qp(level: u8) -> Result<u8> {
    QpTable::default().qp(level)
}

pub fn qp_to_qstep(qp: u8) -> Result<f64> {
    if qp > MAX_QP {
        return Err(Error::invalid_input(format!("QP {qp} outside [0,51]")));
    }
    Ok(qstep(qp))
}

#[inline]
fn qstep(qp: u8) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

pub fn apply_emphasis(em: &EmphasisMap) -> QpMap {
    apply_emphasis_with(em, &QpTable::default())
}

pub fn apply_emphasis_with(em: &EmphasisMap, table: &QpTable) -> QpMap {
    QpMap::from_grid(em.grid().map(|&l| table.0[l as usize])).expect("table entries are valid QPs")
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodeResult {
    pub recon: Frame,
    pub total_bits: u64,
    pub mb_bits: Grid<u32>,
}

/// Encodes one 16×16 macroblock at `qp`; returns its reconstruction and bit cost.
pub fn encode_mb(block: &[u8; MB_PIXELS], qp: u8) -> ([u8; MB_PIXELS], u32) {
    let step = qstep(qp);
    let mut recon = [0u8; MB_PIXELS];
    let mut bits = 0;
    for sub in 0..4 {
        let (ox, oy) = ((sub % 2) * 8, (sub / 2) * 8);
        let mut samples = [0.0; 64];
        for y in 0..8 {
            for x in 0..8 {
                samples[y * 8 + x] = block[(oy + y) * MB_SIZE + ox + x] as f64 - 128.0;
            }
        }
        let coeffs = dct8_forward(&samples);
        let mut levels = [0i32; 64];
        let mut dequant = [0.0; 64];
        for i in 0..64 {
            // f64::round rounds half away from zero
            levels[i] = (coeffs[i] / step).round() as i32;
            dequant[i] = levels[i] as f64 * step;
        }
        bits += estimate_bits(&levels);
        let rec = dct8_inverse(&dequant);
        for y in 0..8 {
            for x in 0..8 {
                recon[(oy + y) * MB_SIZE + ox + x] = (rec[y * 8 + x] + 128.0).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    (recon, bits)
}

pub fn encode_frame(frame: &Frame, qp_map: &QpMap) -> Result<EncodeResult> {
    let grid = frame.grid();
    if qp_map.shape() != grid.shape() {
        return Err(Error::invalid_input(format!(
            "QP map shape {:?} does not match macroblock grid {:?}",
            qp_map.shape(),
            grid.shape()
        )));
    }
    let (pw, ph) = (grid.cols * MB_SIZE, grid.rows * MB_SIZE);
    let mut padded = vec![0u8; pw * ph];
    let mut mb_bits = Grid::filled(grid.rows, grid.cols, 0u32);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let (rec, bits) = encode_mb(&frame.mb_block(r, c), qp_map.qp(r, c));
            *mb_bits.get_mut(r, c) = bits;
            for y in 0..MB_SIZE {
                let dst = (r * MB_SIZE + y) * pw + c * MB_SIZE;
                padded[dst..dst + MB_SIZE].copy_from_slice(&rec[y * MB_SIZE..(y + 1) * MB_SIZE]);
            }
        }
    }
    let recon = Frame::new(pw, ph, padded)?.cropped(frame.width(), frame.height())?;
    let total_bits = mb_bits.iter().map(|&b| b as u64).sum();
    Ok(EncodeResult {
        recon,
        total_bits,
        mb_bits,
    })
}

/// Per-macroblock reconstructions and costs at each emphasis level, so that
/// any emphasis map can be assembled without re-encoding.
#[derive(Clone, Debug)]
pub struct MbLevelCache {
    width: usize,
    height: usize,
    cols: usize,
    recon: Vec<[[u8; MB_PIXELS]; NUM_LEVELS]>,
    bits: Vec<[u32; NUM_LEVELS]>,
}

impl MbLevelCache {
    pub fn build(frame: &Frame, table: &QpTable) -> Self {
        let grid = frame.grid();
        let mut recon = Vec::with_capacity(grid.mb_count());
        let mut bits = Vec::with_capacity(grid.mb_count());
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let block = frame.mb_block(r, c);
                let mut rl = [[0u8; MB_PIXELS]; NUM_LEVELS];
                let mut bl = [0u32; NUM_LEVELS];
                for (l, &qp) in table.0.iter().enumerate() {
                    let (rec, b) = encode_mb(&block, qp);
                    rl[l] = rec;
                    bl[l] = b;
                }
                recon.push(rl);
                bits.push(bl);
            }
        }
        Self {
            width: frame.width(),
            height: frame.height(),
            cols: grid.cols,
            recon,
            bits,
        }
    }

    pub fn mb_count(&self) -> usize {
        self.recon.len()
    }

    /// Writes the reconstruction for `levels` (row-major, one per MB) into `out`.
    pub fn assemble_into(&self, levels: &[u8], out: &mut Vec<u8>) {
        out.clear();
        out.resize(self.width * self.height, 0);
        for y in 0..self.height {
            let (r, dy) = (y / MB_SIZE, y % MB_SIZE);
            for x in 0..self.width {
                let mb = r * self.cols + x / MB_SIZE;
                out[y * self.width + x] = self.recon[mb][levels[mb] as usize][dy * MB_SIZE + x % MB_SIZE];
            }
        }
    }

    pub fn assemble(&self, levels: &[u8]) -> Frame {
        let mut buf = Vec::new();
        self.assemble_into(levels, &mut buf);
        Frame::new(self.width, self.height, buf).expect("cache dimensions are valid")
    }

    pub fn bits(&self, levels: &[u8]) -> u64 {
        levels
            .iter()
            .enumerate()
            .map(|(i, &l)| self.bits[i][l as usize] as u64)
            .sum()
    }
}
