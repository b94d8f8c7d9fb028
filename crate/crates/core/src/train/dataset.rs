use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::codec::{encode_frame, CodecConfig, Frame, ModelSet, Plane};
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub const PATCH: usize = 32;

/// A codec-degraded block and its original, both scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub degraded: Tensor<f32>,
    pub target: Tensor<f32>,
    pub qp: u8,
}

pub fn to_unit(samples: &[u8], h: usize, w: usize) -> Tensor<f32> {
    Tensor::new(Shape::new(1, h, w), samples.iter().map(|&v| v as f32 / 255.0).collect())
        .expect("sample count matches shape")
}

/// Samples as a `(len, 1, 1)` tensor in `[0, 1]`.
pub fn unit_vector(samples: &[u8]) -> Tensor<f32> {
    to_unit(samples, samples.len(), 1).reshape(Shape::new(samples.len(), 1, 1)).unwrap()
}

/// Encodes every image (luma only, filter and neural mode off) at `qp` and
/// pairs each whole 32x32 grid block of the reconstruction with the original.
pub fn make_filter_dataset(images: &[Plane], qp: u8) -> Result<Vec<PatchPair>> {
    let models = ModelSet::empty(0);
    let cfg = CodecConfig::new(qp);
    let mut out = Vec::new();
    for (i, img) in images.iter().enumerate() {
        if img.width() < PATCH || img.height() < PATCH {
            return Err(Error::Invalid(format!(
                "image {i} is {}x{}, training needs at least {PATCH}x{PATCH}",
                img.width(),
                img.height()
            )));
        }
        let enc = encode_frame(&Frame::monochrome(img.clone()), &cfg, &models)?;
        let recon = &enc.recon.y;
        for by in 0..img.height() / PATCH {
            for bx in 0..img.width() / PATCH {
                let (x0, y0) = (bx * PATCH, by * PATCH);
                out.push(PatchPair {
                    degraded: to_unit(&recon.block(x0, y0, PATCH), PATCH, PATCH),
                    target: to_unit(&img.block(x0, y0, PATCH), PATCH, PATCH),
                    qp,
                });
            }
        }
    }
    Ok(out)
}

/// `(context, block)` training sample for the intra predictor, in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextPair {
    pub context: Tensor<f32>,
    pub block: Tensor<f32>,
}

/// Context in the codec's layout: `k` rows above spanning `x0-k .. x0+n`,
/// then `n` rows of `k` samples to the left.
pub fn context_at(img: &Plane, x0: usize, y0: usize, n: usize, k: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity((n + k) * (n + k) - n * n);
    for y in y0 - k..y0 {
        for x in x0 - k..x0 + n {
            out.push(img.get(x, y));
        }
    }
    for y in y0..y0 + n {
        for x in x0 - k..x0 {
            out.push(img.get(x, y));
        }
    }
    out
}

/// Random fully-interior positions: the whole context and block lie in the image.
pub fn sample_contexts<R: Rng>(images: &[Plane], n: usize, k: usize, count: usize, rng: &mut R) -> Result<Vec<ContextPair>> {
    let usable: Vec<&Plane> = images.iter().filter(|p| p.width() >= n + k && p.height() >= n + k).collect();
    if usable.is_empty() {
        return Err(Error::Invalid(format!(
            "no image is at least {0}x{0} for block size {n} and context width {k}",
            n + k
        )));
    }
    Ok((0..count)
        .map(|_| {
            let img = usable[rng.gen_range(0..usable.len())];
            let x0 = rng.gen_range(k..=img.width() - n);
            let y0 = rng.gen_range(k..=img.height() - n);
            ContextPair {
                context: unit_vector(&context_at(img, x0, y0, n, k)),
                block: unit_vector(&img.block(x0, y0, n)),
            }
        })
        .collect())
}

/// Plain-text manifest: one image path per line; blank lines and `#` comments
/// are skipped, relative paths resolve against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let list: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect();
    if list.is_empty() {
        return Err(Error::Invalid(format!("manifest {} lists no images", path.display())));
    }
    Ok(list)
}
