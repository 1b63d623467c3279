//! Colour renderings of emphasis and QP maps.

use std::fs;
use std::path::Path;

use crate::codec::{EmphasisMap, QpMap, MAX_QP, NUM_LEVELS};
use crate::error::{Error, Result};
use crate::frames::MB_SIZE;

pub const LEGEND_HEIGHT: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

/// Blue (t = 0) to red (t = 1).
pub fn ramp(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    [(255.0 * t).round() as u8, 0, (255.0 * (1.0 - t)).round() as u8]
}

fn level_colour(level: u8) -> [u8; 3] {
    ramp(level as f64 / (NUM_LEVELS - 1) as f64)
}

/// Low QP (fine) renders red, high QP blue.
fn qp_colour(qp: u8) -> [u8; 3] {
    ramp(1.0 - qp as f64 / MAX_QP as f64)
}

fn render(rows: usize, cols: usize, tile: impl Fn(usize, usize) -> [u8; 3], legend: impl Fn(f64) -> [u8; 3]) -> RgbImage {
    let (w, body_h) = (cols * MB_SIZE, rows * MB_SIZE);
    let mut img = RgbImage::new(w, body_h + LEGEND_HEIGHT);
    for y in 0..body_h {
        for x in 0..w {
            img.put(x, y, tile(y / MB_SIZE, x / MB_SIZE));
        }
    }
    for y in body_h..body_h + LEGEND_HEIGHT {
        for x in 0..w {
            img.put(x, y, legend((x as f64 + 0.5) / w as f64));
        }
    }
    img
}

/// 16×16 tile per macroblock in five discrete colours; the legend strip shows
/// the five levels left to right.
pub fn render_emphasis(map: &EmphasisMap) -> RgbImage {
    let (rows, cols) = map.shape();
    render(
        rows,
        cols,
        |r, c| level_colour(map.level(r, c)),
        |t| level_colour(((t * NUM_LEVELS as f64) as usize).min(NUM_LEVELS - 1) as u8),
    )
}

/// Continuous ramp over QP 0..51; the legend runs from QP 51 (left) to 0.
pub fn render_qp(map: &QpMap) -> RgbImage {
    let (rows, cols) = map.shape();
    render(rows, cols, |r, c| qp_colour(map.qp(r, c)), ramp)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyMap {
    Emphasis(EmphasisMap),
    Qp(QpMap),
}

impl AnyMap {
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::parse("map JSON", e))?;
        if v.get("levels").is_some() {
            Ok(AnyMap::Emphasis(EmphasisMap::from_json(text)?))
        } else if v.get("qps").is_some() {
            Ok(AnyMap::Qp(QpMap::from_json(text)?))
        } else {
            Err(Error::parse("map JSON", "expected a \"levels\" or \"qps\" array"))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn render(&self) -> RgbImage {
        match self {
            AnyMap::Emphasis(m) => render_emphasis(m),
            AnyMap::Qp(m) => render_qp(m),
        }
    }
}
