use crate::error::{Error, Result};

/// One 8-bit sample plane, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || samples.len() != width * height {
            return Err(Error::Invalid(format!(
                "plane {width}x{height} needs {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("nonzero plane size")
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(width, height, samples).expect("nonzero plane size")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.samples[y * self.width + x] = v;
    }

    /// Copies the `n x n` block at `(x0, y0)`.
    pub fn block(&self, x0: usize, y0: usize, n: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(n * n);
        for y in y0..y0 + n {
            out.extend_from_slice(&self.samples[y * self.width + x0..y * self.width + x0 + n]);
        }
        out
    }

    pub fn put_block(&mut self, x0: usize, y0: usize, n: usize, block: &[u8]) {
        for (r, row) in block.chunks_exact(n).enumerate() {
            let at = (y0 + r) * self.width + x0;
            self.samples[at..at + n].copy_from_slice(row);
        }
    }

    /// Extends the plane to multiples of `n` by repeating the last column and row.
    pub fn pad_to_multiple(&self, n: usize) -> Plane {
        let w = self.width.div_ceil(n) * n;
        let h = self.height.div_ceil(n) * n;
        Plane::from_fn(w, h, |x, y| {
            self.get(x.min(self.width - 1), y.min(self.height - 1))
        })
    }

    /// Top-left `width x height` region.
    pub fn crop(&self, width: usize, height: usize) -> Plane {
        Plane::from_fn(width, height, |x, y| self.get(x, y))
    }
}

/// A picture: luma plus optional 4:2:0 chroma. Monochrome frames (PGM
/// images) carry no chroma.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub y: Plane,
    pub chroma: Option<[Plane; 2]>,
}

pub fn chroma_size(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(2), height.div_ceil(2))
}

impl Frame {
    pub fn monochrome(y: Plane) -> Self {
        Self { y, chroma: None }
    }

    pub fn yuv420(y: Plane, u: Plane, v: Plane) -> Result<Self> {
        let (cw, ch) = chroma_size(y.width(), y.height());
        for (name, p) in [("u", &u), ("v", &v)] {
            if p.width() != cw || p.height() != ch {
                return Err(Error::Invalid(format!(
                    "{name} plane is {}x{}, expected {cw}x{ch} for luma {}x{}",
                    p.width(),
                    p.height(),
                    y.width(),
                    y.height()
                )));
            }
        }
        Ok(Self {
            y,
            chroma: Some([u, v]),
        })
    }

    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }

    pub fn planes(&self) -> Vec<&Plane> {
        let mut out = vec![&self.y];
        if let Some([u, v]) = &self.chroma {
            out.push(u);
            out.push(v);
        }
        out
    }
}
