use crate::codec::Plane;
use crate::error::{Error, Result};

/// Peak signal-to-noise ratio for 8-bit samples. Identical planes give
/// `f64::INFINITY`.
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::Invalid(format!(
            "psnr of {}x{} against {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(psnr_from_mse(mse(a.samples(), b.samples())))
}

pub fn mse(a: &[u8], b: &[u8]) -> f64 {
    let sum: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    sum as f64 / a.len().max(1) as f64
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

/// Payload bits over luma area.
pub fn bits_per_pixel(payload_bits: u64, width: usize, height: usize) -> f64 {
    payload_bits as f64 / (width * height) as f64
}

/// Formats a PSNR value, spelling out the identical-planes sentinel.
pub fn format_psnr(db: f64) -> String {
    if db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{db:.4}")
    }
}
