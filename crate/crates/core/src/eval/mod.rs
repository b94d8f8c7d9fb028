//! Quality and rate metrics, Bjøntegaard deltas and report tables.

pub mod bd;
pub mod metrics;
pub mod report;

pub use bd::{bd_psnr, bd_rate, CubicFit, RdCurve, RdPoint};
pub use metrics::{bits_per_pixel, format_psnr, mse, psnr, psnr_from_mse};
pub use report::{emit_report, BdReport, BdRow};

use crate::codec::{encode_frame, CodecConfig, Frame, ModelSet};
use crate::error::Result;

/// Rate and per-plane PSNR of one encode.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub qp: u8,
    pub payload_bits: u64,
    pub bpp: f64,
    /// Y, then U and V for color input.
    pub psnr: Vec<f64>,
}

impl Measurement {
    pub fn point(&self, plane: usize) -> RdPoint {
        RdPoint::new(self.bpp, self.psnr[plane])
    }
}

pub fn measure(frame: &Frame, config: &CodecConfig, models: &ModelSet) -> Result<Measurement> {
    let enc = encode_frame(frame, config, models)?;
    let psnr = frame
        .planes()
        .iter()
        .zip(enc.recon.planes())
        .map(|(a, b)| psnr(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(Measurement {
        qp: config.qp,
        payload_bits: enc.payload_bits,
        bpp: bits_per_pixel(enc.payload_bits, frame.width(), frame.height()),
        psnr,
    })
}

/// Encodes `frame` at each QP with `base` otherwise unchanged.
pub fn sweep(frame: &Frame, qps: &[u8], base: &CodecConfig, models: &ModelSet) -> Result<Vec<Measurement>> {
    qps.iter()
        .map(|&qp| measure(frame, &CodecConfig { qp, ..base.clone() }, models))
        .collect()
}

/// RD curve of one plane from a QP sweep.
pub fn curve_of(sweep: &[Measurement], plane: usize) -> Result<RdCurve> {
    RdCurve::new(sweep.iter().map(|m| m.point(plane)).collect())
}
