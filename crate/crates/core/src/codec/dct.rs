//! Orthonormal 8x8 DCT-II and its inverse.

use std::sync::OnceLock;

pub const BLOCK: usize = 8;
pub const BLOCK_AREA: usize = BLOCK * BLOCK;

/// `basis[k][n] = c(k) * cos((2n + 1) k pi / 16)`.
fn basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static TABLE: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; BLOCK]; BLOCK];
        for (k, row) in t.iter_mut().enumerate() {
            let scale = if k == 0 { (1.0 / BLOCK as f64).sqrt() } else { (2.0 / BLOCK as f64).sqrt() };
            for (n, cell) in row.iter_mut().enumerate() {
                *cell = scale * (((2 * n + 1) * k) as f64 * std::f64::consts::PI / (2 * BLOCK) as f64).cos();
            }
        }
        t
    })
}

pub fn forward(block: &[f64; BLOCK_AREA]) -> [f64; BLOCK_AREA] {
    let b = basis();
    let mut tmp = [0.0; BLOCK_AREA];
    for y in 0..BLOCK {
        for k in 0..BLOCK {
            tmp[y * BLOCK + k] = (0..BLOCK).map(|x| b[k][x] * block[y * BLOCK + x]).sum();
        }
    }
    let mut out = [0.0; BLOCK_AREA];
    for k in 0..BLOCK {
        for l in 0..BLOCK {
            out[l * BLOCK + k] = (0..BLOCK).map(|y| b[l][y] * tmp[y * BLOCK + k]).sum();
        }
    }
    out
}

pub fn inverse(coef: &[f64; BLOCK_AREA]) -> [f64; BLOCK_AREA] {
    let b = basis();
    let mut tmp = [0.0; BLOCK_AREA];
    for y in 0..BLOCK {
        for k in 0..BLOCK {
            tmp[y * BLOCK + k] = (0..BLOCK).map(|l| b[l][y] * coef[l * BLOCK + k]).sum();
        }
    }
    let mut out = [0.0; BLOCK_AREA];
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            out[y * BLOCK + x] = (0..BLOCK).map(|k| b[k][x] * tmp[y * BLOCK + k]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut block = [0.0; BLOCK_AREA];
        for (i, v) in block.iter_mut().enumerate() {
            *v = ((i * 37) % 255) as f64 - 128.0;
        }
        let back = inverse(&forward(&block));
        for (a, b) in block.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let block = [10.0; BLOCK_AREA];
        let c = forward(&block);
        assert!((c[0] - 80.0).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }
}
