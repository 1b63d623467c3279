use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MAX_QP, NUM_LEVELS};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Per-macroblock emphasis levels in `0..=4`.
///
/// Serialized as `{"rows": R, "cols": C, "levels": [..row-major..]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EmphasisJson", into = "EmphasisJson")]
pub struct EmphasisMap(Grid<u8>);

#[derive(Serialize, Deserialize)]
struct EmphasisJson {
    rows: usize,
    cols: usize,
    levels: Vec<u8>,
}

impl TryFrom<EmphasisJson> for EmphasisMap {
    type Error = Error;
    fn try_from(j: EmphasisJson) -> Result<Self> {
        EmphasisMap::from_levels(j.rows, j.cols, j.levels)
    }
}

impl From<EmphasisMap> for EmphasisJson {
    fn from(m: EmphasisMap) -> Self {
        let (rows, cols) = m.0.shape();
        EmphasisJson {
            rows,
            cols,
            levels: m.0.into_vec(),
        }
    }
}

impl EmphasisMap {
    pub fn from_levels(rows: usize, cols: usize, levels: Vec<u8>) -> Result<Self> {
        Self::from_grid(Grid::from_vec(rows, cols, levels)?)
    }

    pub fn from_grid(grid: Grid<u8>) -> Result<Self> {
        if let Some(bad) = grid.iter().find(|&&l| l as usize >= NUM_LEVELS) {
            return Err(Error::invalid_input(format!("emphasis level {bad} outside 0..=4")));
        }
        Ok(Self(grid))
    }

    pub fn uniform(rows: usize, cols: usize, level: u8) -> Result<Self> {
        Self::from_grid(Grid::filled(rows, cols, level))
    }

    pub fn grid(&self) -> &Grid<u8> {
        &self.0
    }

    pub fn levels(&self) -> &[u8] {
        self.0.as_slice()
    }

    pub fn level(&self, row: usize, col: usize) -> u8 {
        *self.0.get(row, col)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    /// Σ EM(i,j), the quantity minimized subject to the accuracy constraint.
    pub fn emphasis_sum(&self) -> u64 {
        self.0.iter().map(|&l| l as u64).sum()
    }

    pub fn mean_level(&self) -> f64 {
        self.emphasis_sum() as f64 / self.0.len().max(1) as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("emphasis map serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::parse("emphasis map JSON", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

/// Per-macroblock QPs in `0..=51`; serialized as `{"rows", "cols", "qps"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "QpJson", into = "QpJson")]
pub struct QpMap(Grid<u8>);

#[derive(Serialize, Deserialize)]
struct QpJson {
    rows: usize,
    cols: usize,
    qps: Vec<u8>,
}

impl TryFrom<QpJson> for QpMap {
    type Error = Error;
    fn try_from(j: QpJson) -> Result<Self> {
        QpMap::from_qps(j.rows, j.cols, j.qps)
    }
}

impl From<QpMap> for QpJson {
    fn from(m: QpMap) -> Self {
        let (rows, cols) = m.0.shape();
        QpJson {
            rows,
            cols,
            qps: m.0.into_vec(),
        }
    }
}

impl QpMap {
    pub fn from_qps(rows: usize, cols: usize, qps: Vec<u8>) -> Result<Self> {
        Self::from_grid(Grid::from_vec(rows, cols, qps)?)
    }

    pub fn from_grid(grid: Grid<u8>) -> Result<Self> {
        if let Some(bad) = grid.iter().find(|&&q| q > MAX_QP) {
            return Err(Error::invalid_input(format!("QP {bad} outside [0,51]")));
        }
        Ok(Self(grid))
    }

    pub fn uniform(rows: usize, cols: usize, qp: u8) -> Result<Self> {
        Self::from_grid(Grid::filled(rows, cols, qp))
    }

    pub fn grid(&self) -> &Grid<u8> {
        &self.0
    }

    pub fn qps(&self) -> &[u8] {
        self.0.as_slice()
    }

    pub fn qp(&self, row: usize, col: usize) -> u8 {
        *self.0.get(row, col)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn mean_qp(&self) -> f64 {
        self.0.iter().map(|&q| q as f64).sum::<f64>() / self.0.len().max(1) as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("qp map serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::parse("QP map JSON", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::apply_emphasis;
    use proptest::prelude::*;

    #[test]
    fn apply_emphasis_extremes() {
        let zeros = EmphasisMap::uniform(3, 4, 0).unwrap();
        assert!(apply_emphasis(&zeros).qps().iter().all(|&q| q == 45));
        let fours = EmphasisMap::uniform(3, 4, 4).unwrap();
        assert!(apply_emphasis(&fours).qps().iter().all(|&q| q == 30));
    }

    #[test]
    fn json_layout() {
        let m = EmphasisMap::from_levels(2, 2, vec![0, 4, 2, 3]).unwrap();
        assert_eq!(m.to_json(), r#"{"rows":2,"cols":2,"levels":[0,4,2,3]}"#);
        assert!(EmphasisMap::from_json(r#"{"rows":2,"cols":2,"levels":[0,5,2,3]}"#).is_err());
        assert!(EmphasisMap::from_json(r#"{"rows":2,"cols":2,"levels":[0,1,2]}"#).is_err());
        let q = apply_emphasis(&m);
        assert_eq!(q.to_json(), r#"{"rows":2,"cols":2,"qps":[45,30,37,34]}"#);
    }

    proptest! {
        #[test]
        fn map_json_roundtrip(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
            let levels: Vec<u8> = (0..rows * cols).map(|i| ((seed >> (i % 60)) % 5) as u8).collect();
            let m = EmphasisMap::from_levels(rows, cols, levels).unwrap();
            let back = EmphasisMap::from_json(&m.to_json()).unwrap();
            prop_assert_eq!(&back, &m);
            let q = apply_emphasis(&m);
            prop_assert_eq!(QpMap::from_json(&q.to_json()).unwrap(), q);
        }
    }
}
