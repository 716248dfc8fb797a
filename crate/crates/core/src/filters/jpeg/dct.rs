//! Orthonormal 8x8 DCT-II and its inverse, separable, in `f64`.

use std::sync::OnceLock;

/// `basis()[u][x] = C(u)/2 * cos((2x + 1) u pi / 16)`, with `C(0) = 1/sqrt(2)`.
fn basis() -> &'static [[f64; 8]; 8] {
    static TABLE: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; 8]; 8];
        for (u, row) in t.iter_mut().enumerate() {
            let cu = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = cu / 2.0 * libm::cos((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0);
            }
        }
        t
    })
}

/// Forward transform of a level-shifted block (natural order in and out).
pub fn forward(block: &[f64; 64]) -> [f64; 64] {
    let t = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| t[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| t[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

/// Inverse transform (natural order in and out).
pub fn inverse(coefs: &[f64; 64]) -> [f64; 64] {
    let t = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| t[u][x] * coefs[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| t[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut b = [0.0; 64];
        for (i, v) in b.iter_mut().enumerate() {
            *v = ((i * 37) % 256) as f64 - 128.0;
        }
        let back = inverse(&forward(&b));
        for (a, z) in b.iter().zip(back.iter()) {
            assert!((a - z).abs() < 1e-9);
        }
    }

    #[test]
    fn dc_of_constant_block() {
        // orthonormal scaling: DC = 8 * value
        let c = forward(&[10.0; 64]);
        assert!((c[0] - 80.0).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }
}
