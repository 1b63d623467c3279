//! Luma frames, the 16×16 macroblock grid, synthetic scenes and RoI/BG labelling.
//!
//! Frames whose dimensions are not multiples of 16 are treated as if padded by
//! edge replication: every macroblock accessor reads through [`Frame::sample_clamped`],
//! so the original samples are never modified.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng;

pub const MB_SIZE: usize = 16;
pub const MB_PIXELS: usize = MB_SIZE * MB_SIZE;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, luma: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid_input(format!(
                "degenerate frame {width}x{height}"
            )));
        }
        if luma.len() != width * height {
            return Err(Error::invalid_input(format!(
                "luma has {} samples, expected {}",
                luma.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            luma,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.luma[y * self.width + x] = v;
    }

    /// Sample with edge replication outside the frame.
    #[inline]
    pub fn sample_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.luma[y * self.width + x]
    }

    pub fn grid(&self) -> MbGrid {
        MbGrid::for_dims(self.width, self.height).expect("frame dimensions are non-zero")
    }

    /// The 16×16 samples of macroblock (row, col), edge-replicated past the frame border.
    pub fn mb_block(&self, row: usize, col: usize) -> [u8; MB_PIXELS] {
        let mut out = [0u8; MB_PIXELS];
        let (x0, y0) = (col * MB_SIZE, row * MB_SIZE);
        for dy in 0..MB_SIZE {
            for dx in 0..MB_SIZE {
                out[dy * MB_SIZE + dx] =
                    self.sample_clamped((x0 + dx) as isize, (y0 + dy) as isize);
            }
        }
        out
    }

    /// Copy of the frame extended to whole macroblocks by edge replication.
    pub fn padded(&self) -> Frame {
        let grid = self.grid();
        let (w, h) = (grid.cols * MB_SIZE, grid.rows * MB_SIZE);
        let mut luma = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                luma.push(self.sample_clamped(x as isize, y as isize));
            }
        }
        Frame {
            width: w,
            height: h,
            luma,
        }
    }

    /// Crop the top-left `width`×`height` window.
    pub fn cropped(&self, width: usize, height: usize) -> Result<Frame> {
        if width > self.width || height > self.height {
            return Err(Error::invalid_input("crop window exceeds frame"));
        }
        let mut luma = Vec::with_capacity(width * height);
        for y in 0..height {
            luma.extend_from_slice(&self.luma[y * self.width..y * self.width + width]);
        }
        Frame::new(width, height, luma)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.luma.len() + 32);
        write!(buf, "P5\n{} {}\n255\n", self.width, self.height).expect("vec write");
        buf.extend_from_slice(&self.luma);
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_pgm(path: &Path) -> Result<Frame> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse_pgm(&bytes).map_err(|m| Error::parse(path.display().to_string(), m))
    }

    pub fn parse_pgm(bytes: &[u8]) -> std::result::Result<Frame, String> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated PGM header".into());
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(format!("unsupported magic {:?}", fields[0]));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| format!("bad header field {s:?}: {e}"));
        let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(format!("only 8-bit PGM supported, maxval {maxval}"));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let data = bytes.get(pos..pos + w * h).ok_or("truncated PGM raster")?;
        Frame::new(w, h, data.to_vec()).map_err(|e| e.to_string())
    }
}

/// Macroblock grid geometry: `rows = ceil(height/16)`, `cols = ceil(width/16)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MbGrid {
    pub rows: usize,
    pub cols: usize,
}

impl MbGrid {
    pub fn for_dims(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid_input(format!(
                "degenerate frame {width}x{height}"
            )));
        }
        Ok(Self {
            rows: height.div_ceil(MB_SIZE),
            cols: width.div_ceil(MB_SIZE),
        })
    }

    pub fn mb_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn mb_size(&self) -> usize {
        MB_SIZE
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

pub fn partition(frame: &Frame) -> Result<MbGrid> {
    MbGrid::for_dims(frame.width(), frame.height())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let ix = self.right().min(other.right()).saturating_sub(self.x.max(other.x));
        let iy = self.bottom().min(other.bottom()).saturating_sub(self.y.max(other.y));
        ix as u64 * iy as u64
    }

    /// Whether the two boxes come within `gap` pixels of each other.
    pub fn is_near(&self, other: &BoundingBox, gap: u32) -> bool {
        self.x < other.right() + gap
            && other.x < self.right() + gap
            && self.y < other.bottom() + gap
            && other.y < self.bottom() + gap
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.right() as usize <= width && self.bottom() as usize <= height
    }
}

fn default_width() -> usize {
    256
}
fn default_height() -> usize {
    256
}

/// Parameters of the synthetic scene generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_height")]
    pub height: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_object_size: u32,
    pub max_object_size: u32,
    /// Amplitude of the slow luminance undulation.
    pub background_amplitude: f64,
    pub background_period: f64,
    /// Amplitude of the fine background texture.
    pub texture_amplitude: f64,
    pub texture_period: f64,
    pub noise_sigma: f64,
    /// Object/background contrast range, intensity units.
    pub min_contrast: f64,
    pub max_contrast: f64,
    pub object_texture_amplitude: f64,
    /// Minimum clearance between objects and from the frame border.
    pub object_gap: u32,
    /// Max per-frame object displacement within a sequence.
    pub jitter: u32,
    pub max_placement_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: default_width(),
            height: default_height(),
            min_objects: 4,
            max_objects: 8,
            min_object_size: 12,
            max_object_size: 32,
            background_amplitude: 40.0,
            background_period: 160.0,
            texture_amplitude: 10.0,
            texture_period: 10.0,
            noise_sigma: 4.0,
            min_contrast: 56.0,
            max_contrast: 76.0,
            object_texture_amplitude: 8.0,
            object_gap: 8,
            jitter: 1,
            max_placement_attempts: 500,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid_config("scene size must be non-zero"));
        }
        if self.min_objects > self.max_objects {
            return Err(Error::invalid_config("min_objects > max_objects"));
        }
        if self.min_object_size == 0 || self.min_object_size > self.max_object_size {
            return Err(Error::invalid_config("invalid object size range"));
        }
        if self.min_contrast > self.max_contrast || self.min_contrast < 0.0 {
            return Err(Error::invalid_config("invalid contrast range"));
        }
        if self.noise_sigma < 0.0 || self.texture_period <= 0.0 || self.background_period <= 0.0 {
            return Err(Error::invalid_config("invalid texture/noise parameters"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub frame: Frame,
    pub gt_boxes: Vec<BoundingBox>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
struct ObjectSpec {
    bbox: BoundingBox,
    level: f64,
    texture_phase: f64,
    texture_period: f64,
    horizontal: bool,
}

#[derive(Clone, Debug)]
struct Layout {
    mean: f64,
    orient: f64,
    phase_low: f64,
    phase_tx: f64,
    phase_ty: f64,
    objects: Vec<ObjectSpec>,
}

impl Layout {
    fn background(&self, cfg: &SceneConfig, x: f64, y: f64) -> f64 {
        use std::f64::consts::TAU;
        let u = x * self.orient.cos() + y * self.orient.sin();
        let low = cfg.background_amplitude * (TAU * u / cfg.background_period + self.phase_low).sin();
        let tex = cfg.texture_amplitude
            * (TAU * x / cfg.texture_period + self.phase_tx).sin()
            * (TAU * y / cfg.texture_period + self.phase_ty).sin();
        self.mean + low + tex
    }

    fn sample(seed: u64, cfg: &SceneConfig) -> Result<Layout> {
        use std::f64::consts::TAU;
        cfg.validate()?;
        let mut rng = rng::stream(seed, &[0x5CE4E]);
        let mut layout = Layout {
            mean: rng.random_range(100.0..150.0),
            orient: rng.random_range(0.0..TAU),
            phase_low: rng.random_range(0.0..TAU),
            phase_tx: rng.random_range(0.0..TAU),
            phase_ty: rng.random_range(0.0..TAU),
            objects: Vec::new(),
        };
        let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
        let gap = cfg.object_gap;
        for object in 0..count {
            let mut placed = None;
            for _ in 0..cfg.max_placement_attempts {
                let w = rng.random_range(cfg.min_object_size..=cfg.max_object_size);
                let h = rng.random_range(cfg.min_object_size..=cfg.max_object_size);
                let span_x = cfg.width as i64 - w as i64 - 2 * gap as i64;
                let span_y = cfg.height as i64 - h as i64 - 2 * gap as i64;
                if span_x < 0 || span_y < 0 {
                    continue;
                }
                let x = gap + rng.random_range(0..=span_x as u32);
                let y = gap + rng.random_range(0..=span_y as u32);
                let bbox = BoundingBox::new(x, y, w, h);
                if layout.objects.iter().all(|o| !o.bbox.is_near(&bbox, gap)) {
                    placed = Some(bbox);
                    break;
                }
            }
            let bbox = placed.ok_or(Error::Placement {
                object,
                attempts: cfg.max_placement_attempts,
            })?;
            let contrast = rng.random_range(cfg.min_contrast..=cfg.max_contrast);
            let cx = bbox.x as f64 + bbox.w as f64 / 2.0;
            let cy = bbox.y as f64 + bbox.h as f64 / 2.0;
            let local = layout.background(cfg, cx, cy);
            let brighter = rng.random_bool(0.5);
            let level = if (brighter && local + contrast <= 240.0) || local - contrast < 15.0 {
                local + contrast
            } else {
                local - contrast
            };
            layout.objects.push(ObjectSpec {
                bbox,
                level,
                texture_phase: rng.random_range(0.0..TAU),
                texture_period: rng.random_range(4.0..9.0),
                horizontal: rng.random_bool(0.5),
            });
        }
        Ok(layout)
    }

    /// Moves each object by at most `jitter` px, keeping placement constraints.
    fn jittered(&self, cfg: &SceneConfig, rng: &mut rng::Rng) -> Layout {
        let mut next = self.clone();
        if cfg.jitter == 0 {
            return next;
        }
        let j = cfg.jitter as i64;
        let gap = cfg.object_gap as i64;
        for i in 0..next.objects.len() {
            let dx = rng.random_range(-j..=j);
            let dy = rng.random_range(-j..=j);
            let b = next.objects[i].bbox;
            let (nx, ny) = (b.x as i64 + dx, b.y as i64 + dy);
            if nx < gap
                || ny < gap
                || nx + b.w as i64 + gap > cfg.width as i64
                || ny + b.h as i64 + gap > cfg.height as i64
            {
                continue;
            }
            let moved = BoundingBox::new(nx as u32, ny as u32, b.w, b.h);
            let clear = next
                .objects
                .iter()
                .enumerate()
                .all(|(k, o)| k == i || !o.bbox.is_near(&moved, cfg.object_gap));
            if clear {
                next.objects[i].bbox = moved;
            }
        }
        next
    }

    fn render(&self, cfg: &SceneConfig, seed: u64, frame_index: u64) -> Result<Scene> {
        use std::f64::consts::TAU;
        let (w, h) = (cfg.width, cfg.height);
        let mut noise_rng = rng::stream(seed, &[0x4015E, frame_index]);
        let noise = Normal::new(0.0, cfg.noise_sigma.max(0.0))
            .map_err(|e| Error::invalid_config(e.to_string()))?;
        let mut luma = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                let (fx, fy) = (x as f64, y as f64);
                let mut v = self.background(cfg, fx, fy);
                for o in &self.objects {
                    let b = o.bbox;
                    if x >= b.x as usize && x < b.right() as usize && y >= b.y as usize && y < b.bottom() as usize {
                        let t = if o.horizontal { fy } else { fx };
                        v = o.level
                            + cfg.object_texture_amplitude * (TAU * t / o.texture_period + o.texture_phase).sin();
                    }
                }
                if cfg.noise_sigma > 0.0 {
                    v += noise.sample(&mut noise_rng);
                }
                luma[y * w + x] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
        Ok(Scene {
            frame: Frame::new(w, h, luma)?,
            gt_boxes: self.objects.iter().map(|o| o.bbox).collect(),
            seed,
        })
    }
}

/// Generates one scene; a pure function of `(seed, cfg)`.
pub fn generate_scene(seed: u64, cfg: &SceneConfig) -> Result<Scene> {
    Layout::sample(seed, cfg)?.render(cfg, seed, 0)
}

/// Generates a short sequence of frames from one layout; objects drift by up to
/// `cfg.jitter` pixels per frame and sensor noise is redrawn for each frame.
/// The first element equals [`generate_scene`] for the same seed.
pub fn generate_sequence(seed: u64, cfg: &SceneConfig, frames: usize) -> Result<Vec<Scene>> {
    let mut layout = Layout::sample(seed, cfg)?;
    let mut jitter_rng = rng::stream(seed, &[0x717E4]);
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        if t > 0 {
            layout = layout.jittered(cfg, &mut jitter_rng);
        }
        out.push(layout.render(cfg, seed, t as u64)?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Roi,
    Bg,
}

pub type RegionMap = Grid<Region>;

/// A macroblock is RoI iff its 16×16 footprint intersects any box.
pub fn classify_regions(grid: &MbGrid, boxes: &[BoundingBox]) -> RegionMap {
    Grid::from_fn(grid.rows, grid.cols, |r, c| {
        let mb = BoundingBox::new(
            (c * MB_SIZE) as u32,
            (r * MB_SIZE) as u32,
            MB_SIZE as u32,
            MB_SIZE as u32,
        );
        if boxes.iter().any(|b| b.intersection_area(&mb) > 0) {
            Region::Roi
        } else {
            Region::Bg
        }
    })
}
