//! QP-matrix text files consumed by encoders that accept external QP maps.
//!
//! Line `k` holds frame `k`'s QPs, row-major, separated by single spaces.

use std::fs;
use std::path::Path;

use super::QpMap;
use crate::error::{Error, Result};
use crate::frames::MbGrid;

pub fn format_qp_matrix(qp_maps: &[QpMap]) -> Result<String> {
    let mut out = String::new();
    if let Some(first) = qp_maps.first() {
        if let Some(k) = qp_maps.iter().position(|m| m.shape() != first.shape()) {
            return Err(Error::invalid_input(format!(
                "frame {k} has shape {:?}, expected {:?}",
                qp_maps[k].shape(),
                first.shape()
            )));
        }
    }
    for m in qp_maps {
        let line: Vec<String> = m.qps().iter().map(|q| q.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_qp_matrix(text: &str, grid: MbGrid) -> Result<Vec<QpMap>> {
    text.lines()
        .enumerate()
        .map(|(k, line)| {
            let qps = line
                .split_ascii_whitespace()
                .map(|t| t.parse::<u8>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(format!("QP matrix frame {k}"), e))?;
            if qps.len() != grid.mb_count() {
                return Err(Error::parse(
                    format!("QP matrix frame {k}"),
                    format!("expected {} QPs, found {}", grid.mb_count(), qps.len()),
                ));
            }
            QpMap::from_qps(grid.rows, grid.cols, qps)
                .map_err(|e| Error::parse(format!("QP matrix frame {k}"), e))
        })
        .collect()
}

pub fn write_qp_matrix(qp_maps: &[QpMap], path: &Path) -> Result<()> {
    fs::write(path, format_qp_matrix(qp_maps)?).map_err(|e| Error::io(path, e))
}

pub fn read_qp_matrix(path: &Path, grid: MbGrid) -> Result<Vec<QpMap>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qp_matrix(&text, grid)
}
