use rand::Rng;

use crate::error::{Error, Result};

/// Moves from `anchor` toward `bound` by `k ∈ 1..=|bound−anchor|` levels with
/// `P(k) ∝ r^(k−1)`; returns `anchor` when the range is empty.
pub fn exponential_sample<R: Rng + ?Sized>(anchor: u8, bound: u8, r: f64, rng: &mut R) -> Result<u8> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid_config(format!("sampler decay {r} outside (0,1)")));
    }
    if anchor == bound {
        return Ok(anchor);
    }
    let span = anchor.abs_diff(bound) as i32;
    // total = Σ_{k=1..span} r^(k−1)
    let total = (1.0 - r.powi(span)) / (1.0 - r);
    let mut u = rng.random::<f64>() * total;
    let mut k = span;
    let mut w = 1.0;
    for step in 1..=span {
        if u < w {
            k = step;
            break;
        }
        u -= w;
        w *= r;
    }
    Ok(if bound > anchor {
        anchor + k as u8
    } else {
        anchor - k as u8
    })
}
