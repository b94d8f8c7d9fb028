//! Residual coding of one block and rate-distortion mode decision.

use super::entropy::{block_bits, zigzag, BlockMode};
use super::predict::{predict_intra, predict_neural, NUM_CLASSICAL_MODES};
use super::refs::RefArray;
use super::transform::{dequantize, quantize, Dct, QuantParams};
use crate::error::Result;
use crate::nn::Model;

pub const DEFAULT_LAMBDA_SCALE: f64 = 0.57;

/// `scale * 2^((qp - 12) / 3)`.
pub fn lambda(qp: u8, scale: f64) -> f64 {
    scale * 2f64.powf((qp as f64 - 12.0) / 3.0)
}

/// Shared transform/quantization state for blocks of one plane.
#[derive(Clone, Debug)]
pub struct BlockCoder {
    n: usize,
    dct: Dct,
    scan: Vec<usize>,
    q: QuantParams,
    lambda: f64,
}

/// Outcome of coding one block with one prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct CodedBlock {
    pub mode: BlockMode,
    /// Levels in zigzag order.
    pub levels: Vec<i32>,
    pub recon: Vec<u8>,
    pub bits: u64,
    pub ssd: u64,
    pub cost: f64,
}

pub fn ssd(a: &[u8], b: &[u8]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum()
}

impl BlockCoder {
    pub fn new(n: usize, qp: u8, lambda_scale: f64) -> Self {
        Self {
            n,
            dct: Dct::new(n),
            scan: zigzag(n),
            q: QuantParams::new(qp),
            lambda: lambda(qp, lambda_scale),
        }
    }

    pub fn block_size(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn quant(&self) -> QuantParams {
        self.q
    }

    /// Decoder-side reconstruction: `clamp(round(pred + idct(dequant(levels))))`.
    pub fn reconstruct(&self, pred: &[u8], zz_levels: &[i32]) -> Vec<u8> {
        let mut raster = vec![0i32; self.n * self.n];
        for (&pos, &l) in self.scan.iter().zip(zz_levels) {
            raster[pos] = l;
        }
        let resid = self.dct.inverse(&dequantize(&raster, self.q));
        pred.iter()
            .zip(&resid)
            .map(|(&p, &r)| (p as f64 + r).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// predict -> residual -> DCT -> quantize, then the decoder path.
    pub fn code(&self, orig: &[u8], pred: &[u8], mode: BlockMode) -> CodedBlock {
        let resid: Vec<f64> = orig.iter().zip(pred).map(|(&o, &p)| o as f64 - p as f64).collect();
        let raster = quantize(&self.dct.forward(&resid), self.q);
        let levels: Vec<i32> = self.scan.iter().map(|&pos| raster[pos]).collect();
        let recon = self.reconstruct(pred, &levels);
        let bits = block_bits(mode, &levels);
        let ssd = ssd(orig, &recon);
        CodedBlock {
            mode,
            cost: ssd as f64 + self.lambda * bits as f64,
            levels,
            recon,
            bits,
            ssd,
        }
    }
}

/// Neural predictor inputs for one block.
pub struct NeuralInput<'a> {
    pub context: &'a [u8],
    pub model: &'a Model<f32>,
}

/// Codes the block with every candidate: classical modes 0..=34, then the
/// neural mode when provided.
pub fn evaluate_candidates(
    orig: &[u8],
    refs: &RefArray,
    neural: Option<&NeuralInput<'_>>,
    coder: &BlockCoder,
) -> Result<Vec<CodedBlock>> {
    let mut out = Vec::with_capacity(NUM_CLASSICAL_MODES as usize + 1);
    for m in 0..NUM_CLASSICAL_MODES {
        let pred = predict_intra(refs, m)?;
        out.push(coder.code(orig, &pred, BlockMode::Classical(m)));
    }
    if let Some(nn) = neural {
        let pred = predict_neural(nn.context, nn.model)?;
        out.push(coder.code(orig, &pred, BlockMode::Neural));
    }
    Ok(out)
}

/// Minimum `J = SSD + lambda * bits`; ties go to the earlier candidate
/// (smaller mode index, classical before neural).
pub fn rd_select_mode(
    orig: &[u8],
    refs: &RefArray,
    neural: Option<&NeuralInput<'_>>,
    coder: &BlockCoder,
) -> Result<CodedBlock> {
    let cands = evaluate_candidates(orig, refs, neural, coder)?;
    let mut best = 0;
    for (i, c) in cands.iter().enumerate() {
        if c.cost < cands[best].cost {
            best = i;
        }
    }
    Ok(cands.into_iter().nth(best).unwrap())
}
