//! Orthonormal 8×8 DCT-II, applied separably.

use std::sync::OnceLock;

pub const N: usize = 8;
pub type Block = [f64; N * N];

fn basis() -> &'static [[f64; N]; N] {
    static BASIS: OnceLock<[[f64; N]; N]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; N]; N];
        for (k, row) in m.iter_mut().enumerate() {
            let scale = if k == 0 {
                (1.0 / N as f64).sqrt()
            } else {
                (2.0 / N as f64).sqrt()
            };
            for (n, v) in row.iter_mut().enumerate() {
                *v = scale
                    * ((std::f64::consts::PI * (2 * n + 1) as f64 * k as f64) / (2 * N) as f64).cos();
            }
        }
        m
    })
}

// out = A · x · Bᵀ where A, B are either the basis or its transpose.
fn transform(block: &Block, inverse: bool) -> Block {
    let c = basis();
    let coef = |k: usize, n: usize| if inverse { c[n][k] } else { c[k][n] };
    let mut tmp = [0.0; N * N];
    for r in 0..N {
        for k in 0..N {
            let mut s = 0.0;
            for n in 0..N {
                s += coef(k, n) * block[r * N + n];
            }
            tmp[r * N + k] = s;
        }
    }
    let mut out = [0.0; N * N];
    for col in 0..N {
        for k in 0..N {
            let mut s = 0.0;
            for n in 0..N {
                s += coef(k, n) * tmp[n * N + col];
            }
            out[k * N + col] = s;
        }
    }
    out
}

pub fn dct8_forward(block: &Block) -> Block {
    transform(block, false)
}

pub fn dct8_inverse(coeffs: &Block) -> Block {
    transform(coeffs, true)
}
