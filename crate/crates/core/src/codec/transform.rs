//! Orthonormal 2-D DCT and uniform scalar quantization.

use std::f64::consts::PI;

/// Separable orthonormal type-II DCT of size `n` (type-III for the inverse).
#[derive(Clone, Debug)]
pub struct Dct {
    n: usize,
    /// `basis[k * n + i] = c_k cos(pi (2i + 1) k / 2n)`
    basis: Vec<f64>,
}

impl Dct {
    pub fn new(n: usize) -> Self {
        let mut basis = Vec::with_capacity(n * n);
        for k in 0..n {
            let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                basis.push(c * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos());
            }
        }
        Self { n, basis }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `C X C^T` for a row-major `n x n` block.
    pub fn forward(&self, block: &[f64]) -> Vec<f64> {
        let n = self.n;
        let c = &self.basis;
        // rows: t = X C^T
        let mut t = vec![0.0; n * n];
        for r in 0..n {
            let row = &block[r * n..(r + 1) * n];
            for k in 0..n {
                let b = &c[k * n..(k + 1) * n];
                t[r * n + k] = row.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        // columns: out = C t
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            let b = &c[k * n..(k + 1) * n];
            for col in 0..n {
                out[k * n + col] = (0..n).map(|r| b[r] * t[r * n + col]).sum();
            }
        }
        out
    }

    /// `C^T Y C`.
    pub fn inverse(&self, coefs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let c = &self.basis;
        let mut t = vec![0.0; n * n];
        for r in 0..n {
            let row = &coefs[r * n..(r + 1) * n];
            for i in 0..n {
                t[r * n + i] = (0..n).map(|k| row[k] * c[k * n + i]).sum();
            }
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for col in 0..n {
                out[i * n + col] = (0..n).map(|k| c[k * n + i] * t[k * n + col]).sum();
            }
        }
        out
    }
}

/// Forward (`inverse == false`) or inverse 2-D DCT of an `n x n` block.
pub fn dct2d(block: &[f64], n: usize, inverse: bool) -> Vec<f64> {
    let d = Dct::new(n);
    if inverse {
        d.inverse(block)
    } else {
        d.forward(block)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantParams {
    pub qp: u8,
    pub qstep: f64,
}

impl QuantParams {
    /// `qstep = 2^((qp - 4) / 6)`.
    pub fn new(qp: u8) -> Self {
        Self {
            qp,
            qstep: 2f64.powf((qp as f64 - 4.0) / 6.0),
        }
    }
}

/// `round(c / qstep)`, halves away from zero.
pub fn quantize(coefs: &[f64], q: QuantParams) -> Vec<i32> {
    coefs.iter().map(|&c| (c / q.qstep).round() as i32).collect()
}

pub fn dequantize(levels: &[i32], q: QuantParams) -> Vec<f64> {
    levels.iter().map(|&l| l as f64 * q.qstep).collect()
}
