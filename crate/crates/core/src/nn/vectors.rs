//! `NNTV` conformance vectors: pairs of 32x32 input and expected output
//! blocks produced by an external trainer's forward pass.
//!
//! Layout (little-endian): `"NNTV" | count u32 | count * (1024 f32 input, 1024 f32 output)`.

use std::fs;
use std::path::Path;

use super::forward::Model;
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub const VECTOR_MAGIC: [u8; 4] = *b"NNTV";
pub const VECTOR_SIDE: usize = 32;
const BLOCK: usize = VECTOR_SIDE * VECTOR_SIDE;

#[derive(Clone, Debug, PartialEq)]
pub struct VectorCase {
    pub input: Vec<f32>,
    pub output: Vec<f32>,
}

pub fn encode_vectors(cases: &[VectorCase]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + cases.len() * BLOCK * 8);
    out.extend_from_slice(&VECTOR_MAGIC);
    out.extend_from_slice(&(cases.len() as u32).to_le_bytes());
    for (i, c) in cases.iter().enumerate() {
        if c.input.len() != BLOCK || c.output.len() != BLOCK {
            return Err(Error::Invalid(format!("vector case {i} is not 32x32")));
        }
        for v in c.input.iter().chain(&c.output) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_vectors(bytes: &[u8]) -> Result<Vec<VectorCase>> {
    if bytes.len() < 8 {
        return Err(Error::Truncated("vector file header".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != VECTOR_MAGIC {
        return Err(Error::BadMagic {
            expected: VECTOR_MAGIC,
            found: magic,
        });
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    let need = count
        .checked_mul(BLOCK * 8)
        .ok_or_else(|| Error::BadHeader("vector count overflows".into()))?;
    if body.len() < need {
        return Err(Error::Truncated(format!(
            "vector case {} of {count}",
            body.len() / (BLOCK * 8)
        )));
    }
    if body.len() > need {
        return Err(Error::BadHeader(format!("{} trailing bytes", body.len() - need)));
    }
    let floats: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(floats
        .chunks_exact(2 * BLOCK)
        .map(|c| VectorCase {
            input: c[..BLOCK].to_vec(),
            output: c[BLOCK..].to_vec(),
        })
        .collect())
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<Vec<VectorCase>> {
    decode_vectors(&fs::read(path)?)
}

pub fn save_vectors(cases: &[VectorCase], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_vectors(cases)?)?;
    Ok(())
}

/// Runs every case through `model`; returns the largest absolute deviation
/// from the expected outputs.
pub fn max_vector_deviation(model: &Model<f32>, cases: &[VectorCase]) -> Result<f64> {
    let mut worst = 0.0f64;
    for c in cases {
        let x = Tensor::new(Shape::new(1, VECTOR_SIDE, VECTOR_SIDE), c.input.clone())?;
        let y = model.forward(&x)?;
        for (a, b) in y.data().iter().zip(&c.output) {
            worst = worst.max((*a as f64 - *b as f64).abs());
        }
    }
    Ok(worst)
}
