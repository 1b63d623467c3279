//! Evaluation of the constrained objective (minimize Σ EM(i,j) subject to
//! |Acc_c − Acc_r| ≤ τ) and an exhaustive solver for tiny frames.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{apply_emphasis_with, encode_frame, EmphasisMap, MbLevelCache, QpTable, NUM_LEVELS};
use crate::error::{Error, Result};
use crate::frames::Scene;
use crate::oracle::AccuracyOracle;

pub const MAX_BRUTE_FORCE_MBS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub feasible: bool,
    pub emphasis_sum: u64,
    pub acc_c: f64,
    pub acc_r: f64,
}

pub fn evaluate_objective(em: &EmphasisMap, scene: &Scene, oracle: &dyn AccuracyOracle, tau: f64) -> Result<Objective> {
    evaluate_objective_with(em, scene, oracle, tau, &QpTable::default())
}

pub fn evaluate_objective_with(
    em: &EmphasisMap,
    scene: &Scene,
    oracle: &dyn AccuracyOracle,
    tau: f64,
    table: &QpTable,
) -> Result<Objective> {
    let enc = encode_frame(&scene.frame, &apply_emphasis_with(em, table))?;
    let acc_r = oracle.score(&scene.frame, &scene.gt_boxes);
    let acc_c = oracle.score(&enc.recon, &scene.gt_boxes);
    Ok(Objective {
        feasible: (acc_c - acc_r).abs() <= tau,
        emphasis_sum: em.emphasis_sum(),
        acc_c,
        acc_r,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum BruteForceResult {
    Optimal {
        map: EmphasisMap,
        objective: Objective,
        evaluated: u64,
    },
    Infeasible {
        best_map: EmphasisMap,
        best_acc: f64,
        acc_r: f64,
        evaluated: u64,
    },
}

impl BruteForceResult {
    pub fn optimal_sum(&self) -> Option<u64> {
        match self {
            BruteForceResult::Optimal { objective, .. } => Some(objective.emphasis_sum),
            BruteForceResult::Infeasible { .. } => None,
        }
    }
}

/// All level vectors of length `n` summing to `sum`, in lexicographic order.
fn compositions(n: usize, sum: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, left: usize, n: usize, out: &mut Vec<Vec<u8>>) {
        let slots = n - prefix.len();
        if slots == 0 {
            if left == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        let top = NUM_LEVELS - 1;
        if left > slots * top {
            return;
        }
        for l in 0..=left.min(top) {
            prefix.push(l as u8);
            rec(prefix, left - l, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), sum, n, &mut out);
    out
}

/// Exhaustive search over all 5^M emphasis maps (M ≤ 9) for the feasible map
/// with the smallest emphasis sum; ties go to the lexicographically smallest
/// row-major level vector.
///
/// Maps are visited in order of increasing sum, so the first feasible sum
/// level found is the optimum and the search stops there. When nothing is
/// feasible every map is visited and the most accurate one is reported.
pub fn brute_force_optimum(scene: &Scene, oracle: &dyn AccuracyOracle, tau: f64) -> Result<BruteForceResult> {
    brute_force_optimum_with(scene, oracle, tau, &QpTable::default())
}

pub fn brute_force_optimum_with(
    scene: &Scene,
    oracle: &dyn AccuracyOracle,
    tau: f64,
    table: &QpTable,
) -> Result<BruteForceResult> {
    let grid = scene.frame.grid();
    let m = grid.mb_count();
    if m > MAX_BRUTE_FORCE_MBS {
        return Err(Error::invalid_input(format!(
            "brute force limited to {MAX_BRUTE_FORCE_MBS} macroblocks, frame has {m}"
        )));
    }
    let cache = MbLevelCache::build(&scene.frame, table);
    let acc_r = oracle.score(&scene.frame, &scene.gt_boxes);
    let score = |levels: &[u8]| oracle.score(&cache.assemble(levels), &scene.gt_boxes);
    let mut evaluated = 0u64;
    let mut best: Option<(f64, Vec<u8>)> = None;
    for sum in 0..=m * (NUM_LEVELS - 1) {
        let cands = compositions(m, sum);
        let scored: Vec<f64> = cands.par_iter().map(|c| score(c)).collect();
        evaluated += cands.len() as u64;
        if let Some(i) = scored.iter().position(|&acc| (acc - acc_r).abs() <= tau) {
            let map = EmphasisMap::from_levels(grid.rows, grid.cols, cands[i].clone())?;
            return Ok(BruteForceResult::Optimal {
                objective: Objective {
                    feasible: true,
                    emphasis_sum: sum as u64,
                    acc_c: scored[i],
                    acc_r,
                },
                map,
                evaluated,
            });
        }
        for (acc, c) in scored.into_iter().zip(cands) {
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, c));
            }
        }
    }
    let (best_acc, levels) = best.expect("at least one map evaluated");
    Ok(BruteForceResult::Infeasible {
        best_map: EmphasisMap::from_levels(grid.rows, grid.cols, levels)?,
        best_acc,
        acc_r,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{Frame, BoundingBox};
    use crate::oracle::BlobDetector;

    #[test]
    fn compositions_cover_the_cube() {
        let total: usize = (0..=12).map(|s| compositions(3, s).len()).sum();
        assert_eq!(total, 125);
        let c = compositions(2, 3);
        assert_eq!(c, vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]);
    }

    // Straight 5^M scan, used to cross-check the ordered search.
    fn scan_all(scene: &Scene, oracle: &dyn AccuracyOracle, tau: f64) -> Option<(u64, Vec<u8>)> {
        let g = scene.frame.grid();
        let m = g.mb_count();
        let mut best: Option<(u64, Vec<u8>)> = None;
        for code in 0..5usize.pow(m as u32) {
            let levels: Vec<u8> = (0..m).rev().map(|i| ((code / 5usize.pow(i as u32)) % 5) as u8).collect();
            let em = EmphasisMap::from_levels(g.rows, g.cols, levels.clone()).unwrap();
            let obj = evaluate_objective(&em, scene, oracle, tau).unwrap();
            if obj.feasible && best.as_ref().is_none_or(|(s, _)| obj.emphasis_sum < *s) {
                best = Some((obj.emphasis_sum, levels));
            }
        }
        best
    }

    fn square_scene(w: usize, h: usize, contrast: u8) -> Scene {
        let mut f = Frame::filled(w, h, 100).unwrap();
        let b = BoundingBox::new(8, 8, 18, 14);
        for y in b.y..b.bottom() {
            for x in b.x..b.right() {
                f.set(x as usize, y as usize, 100 + contrast);
            }
        }
        Scene { frame: f, gt_boxes: vec![b], seed: 0 }
    }

    #[test]
    fn tau_one_gives_zero_map() {
        let scene = square_scene(32, 32, 60);
        let res = brute_force_optimum(&scene, &BlobDetector::default(), 1.0).unwrap();
        match res {
            BruteForceResult::Optimal { map, objective, .. } => {
                assert_eq!(objective.emphasis_sum, 0);
                assert!(map.levels().iter().all(|&l| l == 0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matches_plain_scan() {
        let oracle = BlobDetector::default();
        for contrast in [40u8, 52, 70] {
            let scene = square_scene(32, 32, contrast);
            let ordered = brute_force_optimum(&scene, &oracle, 0.0).unwrap();
            let plain = scan_all(&scene, &oracle, 0.0);
            match (ordered, plain) {
                (BruteForceResult::Optimal { map, .. }, Some((sum, levels))) => {
                    assert_eq!(map.emphasis_sum(), sum);
                    assert_eq!(map.levels(), &levels[..]);
                }
                (BruteForceResult::Infeasible { evaluated, .. }, None) => assert_eq!(evaluated, 625),
                (a, b) => panic!("mismatch {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn objective_examples() {
        let scene = square_scene(32, 32, 80);
        let oracle = BlobDetector::default();
        let fours = EmphasisMap::uniform(2, 2, 4).unwrap();
        let obj = evaluate_objective(&fours, &scene, &oracle, 0.02).unwrap();
        assert!(obj.feasible);
        assert_eq!(obj.emphasis_sum, 16);
        let zeros = EmphasisMap::uniform(2, 2, 0).unwrap();
        let obj = evaluate_objective(&zeros, &scene, &oracle, 1.0).unwrap();
        assert!(obj.feasible);
        assert_eq!(obj.emphasis_sum, 0);
    }

    #[test]
    fn too_many_macroblocks() {
        let scene = square_scene(64, 48, 60);
        assert!(brute_force_optimum(&scene, &BlobDetector::default(), 0.0).is_err());
    }
}
