//! Planar, DC and 33 angular intra predictors (no reference smoothing, no
//! boundary filters) and the fully-connected neural predictor.

use super::refs::RefArray;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::tensor::{Shape, Tensor};

pub const PLANAR: u8 = 0;
pub const DC: u8 = 1;
pub const NUM_CLASSICAL_MODES: u8 = 35;

/// Displacement per row/column in 1/32 sample, indexed by mode.
pub const INTRA_PRED_ANGLE: [i32; 35] = [
    0, 0, 32, 26, 21, 17, 13, 9, 5, 2, 0, -2, -5, -9, -13, -17, -21, -26, -32, -26, -21, -17, -13, -9, -5, -2, 0,
    2, 5, 9, 13, 17, 21, 26, 32,
];

/// `round(8192 / angle)` for the negative angles of modes 11..=25.
const INV_ANGLE: [i32; 15] = [
    -4096, -1638, -910, -630, -482, -390, -315, -256, -315, -390, -482, -630, -910, -1638, -4096,
];

pub fn predict_intra(refs: &RefArray, mode: u8) -> Result<Vec<u8>> {
    match mode {
        PLANAR => Ok(planar(refs)),
        DC => Ok(dc(refs)),
        2..=34 => Ok(angular(refs, mode)),
        _ => Err(Error::InvalidMode(mode)),
    }
}

fn planar(r: &RefArray) -> Vec<u8> {
    let n = r.n as i32;
    let shift = r.n.trailing_zeros() + 1;
    let top_right = r.top(n as isize) as i32;
    let bottom_left = r.side(n as isize) as i32;
    let mut out = Vec::with_capacity(r.n * r.n);
    for y in 0..n {
        let left = r.side(y as isize) as i32;
        for x in 0..n {
            let top = r.top(x as isize) as i32;
            let v = (n - 1 - x) * left + (x + 1) * top_right + (n - 1 - y) * top + (y + 1) * bottom_left + n;
            out.push((v >> shift) as u8);
        }
    }
    out
}

fn dc(r: &RefArray) -> Vec<u8> {
    let n = r.n;
    let sum: u32 = r.above[1..=n].iter().chain(&r.left[..n]).map(|&v| v as u32).sum();
    let v = (sum + n as u32) >> (n.trailing_zeros() + 1);
    vec![v as u8; n * n]
}

fn angular(r: &RefArray, mode: u8) -> Vec<u8> {
    let n = r.n as i32;
    let angle = INTRA_PRED_ANGLE[mode as usize];
    let vertical = mode >= 18;
    // main reference along the prediction direction, index 0 = corner;
    // `side` is the perpendicular one, indexed the same way
    let corner_then_left = |i: i32| -> i32 {
        if i == 0 {
            r.above[0] as i32
        } else {
            r.left[i as usize - 1] as i32
        }
    };
    let above = |i: i32| r.above[i as usize] as i32;
    let (main, side): (&dyn Fn(i32) -> i32, &dyn Fn(i32) -> i32) = if vertical {
        (&above, &corner_then_left)
    } else {
        (&corner_then_left, &above)
    };
    let span = (2 * n + 1) as usize;
    let offset = n as usize;
    let mut line = vec![0i32; span + offset];
    for i in 0..=2 * n {
        line[offset + i as usize] = main(i);
    }
    if angle < 0 {
        let inv = INV_ANGLE[(mode - 11) as usize];
        let last = (n * angle) >> 5;
        if last < -1 {
            for i in last..=-1 {
                line[(offset as i32 + i) as usize] = side((i * inv + 128) >> 8);
            }
        }
    }
    let mut out = vec![0u8; (n * n) as usize];
    for a in 0..n {
        let pos = (a + 1) * angle;
        let idx = pos >> 5;
        let fact = pos & 31;
        for b in 0..n {
            let at = (offset as i32 + b + idx + 1) as usize;
            let v = if fact == 0 {
                line[at]
            } else {
                ((32 - fact) * line[at] + fact * line[at + 1] + 16) >> 5
            };
            let (x, y) = if vertical { (b, a) } else { (a, b) };
            out[(y * n + x) as usize] = v as u8;
        }
    }
    out
}

/// Runs the FC predictor on an L-shaped context (8-bit samples) and maps its
/// `[0, 1]` output back to 8-bit samples.
pub fn predict_neural(context: &[u8], model: &Model<f32>) -> Result<Vec<u8>> {
    let x = Tensor::new(
        Shape::new(context.len(), 1, 1),
        context.iter().map(|&v| v as f32 / 255.0).collect(),
    )?;
    let y = model.forward(&x)?;
    Ok(y.data().iter().map(|&v| to_sample(v)).collect())
}

/// `[0, 1]` float to 8-bit: scale, clamp, round half away from zero.
#[inline]
pub fn to_sample(v: f32) -> u8 {
    (v * 255.0).clamp(0.0, 255.0).round() as u8
}
