//! Deterministic downstream-accuracy oracles.
//!
//! [`BlobDetector`] finds objects as connected components of strong Sobel
//! gradients and scores them against ground truth with F1 at IoU ≥ 0.5.
//! [`EdgeRetention`] is a cheaper fallback that compares edge maps inside RoI
//! macroblocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{BoundingBox, Frame, Region, RegionMap, MB_SIZE};

pub trait AccuracyOracle: Send + Sync {
    /// Task accuracy in `[0, 1]` of `frame` against ground truth `gt`.
    fn score(&self, frame: &Frame, gt: &[BoundingBox]) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Gradient threshold in intensity units per pixel (Sobel response / 8).
    pub theta: f64,
    pub min_area: usize,
    pub closing_radius: usize,
    pub iou_thresh: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            theta: 24.0,
            min_area: 64,
            closing_radius: 1,
            iou_thresh: 0.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::invalid_config("detector theta must be positive"));
        }
        if !(self.iou_thresh > 0.0 && self.iou_thresh < 1.0) {
            return Err(Error::invalid_config("iou_thresh must lie in (0,1)"));
        }
        Ok(())
    }
}

/// Sobel gradient magnitude divided by 8, i.e. the slope of a linear ramp in
/// intensity units per pixel. Borders use edge replication.
pub fn gradient_magnitude(frame: &Frame) -> Vec<f64> {
    let (w, h) = (frame.width(), frame.height());
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| frame.sample_clamped(x as isize + dx, y as isize + dy) as f64;
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            out[y * w + x] = (gx * gx + gy * gy).sqrt() / 8.0;
        }
    }
    out
}

pub fn edge_map(frame: &Frame, theta: f64) -> Vec<bool> {
    gradient_magnitude(frame).into_iter().map(|g| g > theta).collect()
}

// Outside pixels count as background for dilation and foreground for erosion,
// so closing never removes a set pixel.
fn morph(mask: &[bool], w: usize, h: usize, r: usize, dilate: bool) -> Vec<bool> {
    let r = r as isize;
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut hit = !dilate;
            'win: for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    let inside = nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize;
                    let v = if inside { mask[ny as usize * w + nx as usize] } else { !dilate };
                    if dilate && v {
                        hit = true;
                        break 'win;
                    }
                    if !dilate && !v {
                        hit = false;
                        break 'win;
                    }
                }
            }
            out[y as usize * w + x as usize] = hit;
        }
    }
    out
}

pub fn binary_closing(mask: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return mask.to_vec();
    }
    let d = morph(mask, w, h, radius, true);
    morph(&d, w, h, radius, false)
}

/// 8-connected components as (area, tight bounding box).
pub fn connected_components(mask: &[bool], w: usize, h: usize) -> Vec<(usize, BoundingBox)> {
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        let bbox = BoundingBox::new(x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32);
        out.push((area, bbox));
    }
    out
}

pub fn detect_blobs(frame: &Frame, cfg: &DetectorConfig) -> Vec<BoundingBox> {
    let (w, h) = (frame.width(), frame.height());
    let edges = edge_map(frame, cfg.theta);
    let closed = binary_closing(&edges, w, h, cfg.closing_radius);
    let mut boxes: Vec<BoundingBox> = connected_components(&closed, w, h)
        .into_iter()
        .filter(|(area, _)| *area >= cfg.min_area)
        .map(|(_, b)| b)
        .collect();
    boxes.sort_by_key(|b| (b.y, b.x, b.h, b.w));
    boxes
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// F1 after greedy one-to-one matching in descending IoU order.
pub fn detection_f1(pred: &[BoundingBox], gt: &[BoundingBox], iou_thresh: f64) -> f64 {
    match (pred.is_empty(), gt.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let v = iou(p, g);
            if v >= iou_thresh {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gt.len()];
    let mut tp = 0usize;
    for (_, i, j) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            tp += 1;
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / pred.len() as f64;
    let recall = tp as f64 / gt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Clone, Debug, Default)]
pub struct BlobDetector {
    pub cfg: DetectorConfig,
}

impl BlobDetector {
    pub fn new(cfg: DetectorConfig) -> Self {
        Self { cfg }
    }
}

impl AccuracyOracle for BlobDetector {
    fn score(&self, frame: &Frame, gt: &[BoundingBox]) -> f64 {
        detection_f1(&detect_blobs(frame, &self.cfg), gt, self.cfg.iou_thresh)
    }
}

/// F1 between thresholded edge maps of `raw` and `recon`, counted only inside
/// RoI macroblocks. Returns 1 when the region map has no RoI.
pub fn edge_retention_score(raw: &Frame, recon: &Frame, regions: &RegionMap, theta: f64) -> Result<f64> {
    if (raw.width(), raw.height()) != (recon.width(), recon.height()) {
        return Err(Error::invalid_input("edge retention needs equal frame sizes"));
    }
    if regions.shape() != raw.grid().shape() {
        return Err(Error::invalid_input("region map does not match frame grid"));
    }
    if regions.iter().all(|r| *r == Region::Bg) {
        return Ok(1.0);
    }
    let w = raw.width();
    let a = edge_map(raw, theta);
    let b = edge_map(recon, theta);
    let (mut tp, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (i, (&ea, &eb)) in a.iter().zip(&b).enumerate() {
        let (x, y) = (i % w, i / w);
        if *regions.get(y / MB_SIZE, x / MB_SIZE) != Region::Roi {
            continue;
        }
        na += ea as usize;
        nb += eb as usize;
        tp += (ea && eb) as usize;
    }
    Ok(match (na, nb) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => 2.0 * tp as f64 / (na + nb) as f64,
    })
}

/// [`edge_retention_score`] bound to a reference frame so it can stand in as an
/// [`AccuracyOracle`]; ground-truth boxes are ignored.
#[derive(Clone, Debug)]
pub struct EdgeRetention {
    pub raw: Frame,
    pub regions: RegionMap,
    pub theta: f64,
}

impl AccuracyOracle for EdgeRetention {
    fn score(&self, frame: &Frame, _gt: &[BoundingBox]) -> f64 {
        edge_retention_score(&self.raw, frame, &self.regions, self.theta).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_frame, QpMap};
    use crate::frames::{classify_regions, generate_scene, SceneConfig};

    #[test]
    fn flat_frame_has_no_blobs() {
        let f = Frame::filled(64, 64, 120).unwrap();
        assert!(detect_blobs(&f, &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn single_rectangle_is_localized() {
        let mut f = Frame::filled(96, 96, 100).unwrap();
        let gt = BoundingBox::new(30, 20, 24, 32);
        for y in gt.y..gt.bottom() {
            for x in gt.x..gt.right() {
                f.set(x as usize, y as usize, 200);
            }
        }
        let boxes = detect_blobs(&f, &DetectorConfig::default());
        assert_eq!(boxes.len(), 1);
        let b = boxes[0];
        assert!(b.x.abs_diff(gt.x) <= 2 && b.y.abs_diff(gt.y) <= 2);
        assert!(b.right().abs_diff(gt.right()) <= 2 && b.bottom().abs_diff(gt.bottom()) <= 2);
    }

    #[test]
    fn generated_objects_are_localized() {
        let cfg = SceneConfig {
            min_objects: 1,
            max_objects: 1,
            min_contrast: 80.0,
            max_contrast: 100.0,
            ..SceneConfig::default()
        };
        for seed in 0..10 {
            let s = generate_scene(seed, &cfg).unwrap();
            let boxes = detect_blobs(&s.frame, &DetectorConfig::default());
            let gt = s.gt_boxes[0];
            assert_eq!(boxes.len(), 1, "seed {seed}: {boxes:?} vs {gt:?}");
            let b = boxes[0];
            assert!(b.x.abs_diff(gt.x) <= 2 && b.y.abs_diff(gt.y) <= 2, "seed {seed}");
            assert!(b.right().abs_diff(gt.right()) <= 2 && b.bottom().abs_diff(gt.bottom()) <= 2, "seed {seed}");
        }
    }

    #[test]
    fn iou_examples() {
        let a = BoundingBox::new(0, 0, 2, 2);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BoundingBox::new(5, 5, 2, 2)), 0.0);
        assert!((iou(&a, &BoundingBox::new(1, 0, 2, 2)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn f1_examples() {
        let g1 = BoundingBox::new(0, 0, 10, 10);
        let g2 = BoundingBox::new(30, 30, 10, 10);
        assert_eq!(detection_f1(&[g1, g2], &[g1, g2], 0.5), 1.0);
        assert_eq!(detection_f1(&[], &[g1], 0.5), 0.0);
        assert_eq!(detection_f1(&[g1], &[], 0.5), 0.0);
        assert_eq!(detection_f1(&[], &[], 0.5), 1.0);
        assert!((detection_f1(&[g1], &[g1, g2], 0.5) - 2.0 / 3.0).abs() < 1e-12);
        // one prediction cannot satisfy two ground-truth boxes
        assert!((detection_f1(&[g1], &[g1, g1], 0.5) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn edge_retention_examples() {
        let s = generate_scene(3, &SceneConfig::default()).unwrap();
        let regions = classify_regions(&s.frame.grid(), &s.gt_boxes);
        assert_eq!(edge_retention_score(&s.frame, &s.frame, &regions, 24.0).unwrap(), 1.0);
        let flat = Frame::filled(s.frame.width(), s.frame.height(), 128).unwrap();
        assert_eq!(edge_retention_score(&s.frame, &flat, &regions, 24.0).unwrap(), 0.0);
        let bg = classify_regions(&s.frame.grid(), &[]);
        assert_eq!(edge_retention_score(&s.frame, &flat, &bg, 24.0).unwrap(), 1.0);
    }

    #[test]
    fn edge_retention_decreases_with_qp() {
        let s = generate_scene(6, &SceneConfig::default()).unwrap();
        let g = s.frame.grid();
        let regions = classify_regions(&g, &s.gt_boxes);
        let mut prev = f64::INFINITY;
        for qp in [30u8, 34, 37, 43, 45] {
            let recon = encode_frame(&s.frame, &QpMap::uniform(g.rows, g.cols, qp).unwrap()).unwrap().recon;
            let score = edge_retention_score(&s.frame, &recon, &regions, 24.0).unwrap();
            assert!(score <= prev + 1e-12, "qp {qp}: {score} > {prev}");
            prev = score;
        }
    }

    #[test]
    fn closing_is_extensive() {
        let mut m = vec![false; 25];
        m[6] = true;
        m[8] = true;
        let c = binary_closing(&m, 5, 5, 1);
        assert!(c[6] && c[8] && c[7]);
    }
}
