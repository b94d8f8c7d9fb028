use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

const LANES: usize = 16;

/// Convolution weights `[out_ch, in_ch, k_h, k_w]` plus one bias per output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<T = f32> {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

fn valid_side(k: usize) -> bool {
    matches!(k, 1 | 3 | 5 | 7 | 9)
}

impl<T: Scalar> ConvKernel<T> {
    pub fn new(
        out_ch: usize,
        in_ch: usize,
        kh: usize,
        kw: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        if !valid_side(kh) || !valid_side(kw) {
            return Err(Error::KernelSize(kh, kw));
        }
        let n = out_ch * in_ch * kh * kw;
        if out_ch == 0 || in_ch == 0 || weights.len() != n || bias.len() != out_ch {
            return Err(Error::contract(
                "conv_kernel",
                format!(
                    "[{out_ch}, {in_ch}, {kh}, {kw}] needs {n} weights and {out_ch} biases, got {} and {}",
                    weights.len(),
                    bias.len()
                ),
            ));
        }
        Ok(Self {
            out_ch,
            in_ch,
            kh,
            kw,
            weights,
            bias,
        })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(
            out_ch,
            in_ch,
            kh,
            kw,
            vec![T::zero(); out_ch * in_ch * kh * kw],
            vec![T::zero(); out_ch],
        )
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    pub fn weight(&self, o: usize, c: usize, u: usize, v: usize) -> T {
        self.weights[((o * self.in_ch + c) * self.kh + u) * self.kw + v]
    }

    /// Kernel whose "same" convolution is the adjoint of this one
    /// (channels swapped, taps rotated by 180 degrees, no bias).
    fn adjoint(&self) -> Self {
        let (kh, kw) = (self.kh, self.kw);
        let mut weights = vec![T::zero(); self.weights.len()];
        for o in 0..self.out_ch {
            for c in 0..self.in_ch {
                for u in 0..kh {
                    for v in 0..kw {
                        weights[((c * self.out_ch + o) * kh + (kh - 1 - u)) * kw + (kw - 1 - v)] =
                            self.weight(o, c, u, v);
                    }
                }
            }
        }
        Self {
            out_ch: self.in_ch,
            in_ch: self.out_ch,
            kh,
            kw,
            weights,
            bias: vec![T::zero(); self.in_ch],
        }
    }
}

/// Gradients of a convolution with respect to its input, weights and bias.
#[derive(Clone, Debug)]
pub struct GradBundle<T = f32> {
    pub grad_input: Tensor<T>,
    pub grad_weights: Vec<T>,
    pub grad_bias: Vec<T>,
}

/// Zero-padded copy of `x` laid out so that output sample `(i, j)` reads tap
/// `(u, v)` at flat offset `i * wp + j + u * wp + v` within its channel.
/// Output rows are computed over the full padded width and cropped afterwards.
struct Padded<T> {
    data: Vec<T>,
    hp: usize,
    wp: usize,
}

impl<T: Scalar> Padded<T> {
    fn new(x: &Tensor<T>, kh: usize, kw: usize) -> Self {
        let s = x.shape();
        let (ph, pw) = (kh / 2, kw / 2);
        let (hp, wp) = (s.height + 2 * ph, s.width + 2 * pw);
        // Slack so that the last channel's rounded-up chunks stay in bounds.
        let mut data = vec![T::zero(); s.channels * hp * wp + kw + LANES];
        for c in 0..s.channels {
            let src = x.channel(c);
            for i in 0..s.height {
                let dst = c * hp * wp + (i + ph) * wp + pw;
                data[dst..dst + s.width].copy_from_slice(&src[i * s.width..(i + 1) * s.width]);
            }
        }
        Self { data, hp, wp }
    }

    fn plane(&self) -> usize {
        self.hp * self.wp
    }
}

fn check_input<T: Scalar>(op: &'static str, x: &Tensor<T>, k: &ConvKernel<T>) -> Result<()> {
    if x.shape().channels != k.in_ch {
        return Err(Error::contract(
            op,
            format!(
                "input shape {} incompatible with kernel [{}, {}, {}, {}]",
                x.shape(),
                k.out_ch,
                k.in_ch,
                k.kh,
                k.kw
            ),
        ));
    }
    Ok(())
}

fn tap_offsets(kh: usize, kw: usize, wp: usize) -> Vec<usize> {
    (0..kh)
        .flat_map(|u| (0..kw).map(move |v| u * wp + v))
        .collect()
}

/// Stride-1 convolution with zero "same" padding.
///
/// Each output sample accumulates `bias`, then taps in `c -> u -> v` order in
/// the input precision, so results are reproducible bit for bit.
pub fn conv2d_same<T: Scalar>(x: &Tensor<T>, k: &ConvKernel<T>) -> Result<Tensor<T>> {
    check_input("conv2d_same", x, k)?;
    let s = x.shape();
    let (h, w) = (s.height, s.width);
    let xp = Padded::new(x, k.kh, k.kw);
    let wp = xp.wp;
    let len = (h * wp).div_ceil(LANES) * LANES;
    let offsets = tap_offsets(k.kh, k.kw, wp);

    let mut planes = vec![T::zero(); k.out_ch * len];
    let plane = xp.plane();
    let mut o = 0;
    while o < k.out_ch {
        if k.out_ch - o >= 4 {
            let packed = pack_rows(k, o, 4);
            let bias = [k.bias[o], k.bias[o + 1], k.bias[o + 2], k.bias[o + 3]];
            let dst = &mut planes[o * len..(o + 4) * len];
            if T::conv_rows4(dst, &xp.data, &packed, bias, k.in_ch, plane, &offsets, len) {
                o += 4;
                continue;
            }
        }
        conv_row(&mut planes[o * len..(o + 1) * len], &xp, k, o, &offsets);
        o += 1;
    }

    let mut out = Vec::with_capacity(k.out_ch * h * w);
    for plane in planes.chunks_exact(len) {
        for i in 0..h {
            out.extend_from_slice(&plane[i * wp..i * wp + w]);
        }
    }
    Tensor::new(Shape::new(k.out_ch, h, w), out)
}

/// Weights of output rows `o0..o0+rows` interleaved as `[c][tap][row]`.
fn pack_rows<T: Scalar>(k: &ConvKernel<T>, o0: usize, rows: usize) -> Vec<T> {
    let taps = k.kh * k.kw;
    let mut packed = Vec::with_capacity(k.in_ch * taps * rows);
    for c in 0..k.in_ch {
        for t in 0..taps {
            for r in 0..rows {
                packed.push(k.weights[((o0 + r) * k.in_ch + c) * taps + t]);
            }
        }
    }
    packed
}

/// Portable single-row version of the convolution tile.
fn conv_row<T: Scalar>(dst: &mut [T], xp: &Padded<T>, k: &ConvKernel<T>, o: usize, offsets: &[usize]) {
    let taps = offsets.len();
    let plane = xp.plane();
    let src = &xp.data;
    let weights = &k.weights[o * k.in_ch * taps..(o + 1) * k.in_ch * taps];
    for p in (0..dst.len()).step_by(LANES) {
        let mut acc = [k.bias[o]; LANES];
        for c in 0..k.in_ch {
            let base = c * plane + p;
            for (&off, &wv) in offsets.iter().zip(&weights[c * taps..(c + 1) * taps]) {
                let s: &[T; LANES] = src[base + off..base + off + LANES].try_into().unwrap();
                for l in 0..LANES {
                    acc[l] = acc[l] + wv * s[l];
                }
            }
        }
        dst[p..p + LANES].copy_from_slice(&acc);
    }
}

/// Gradients of `conv2d_same(x, k)` given the upstream gradient `grad_out`.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    k: &ConvKernel<T>,
    grad_out: &Tensor<T>,
) -> Result<GradBundle<T>> {
    check_input("conv2d_backward", x, k)?;
    let s = x.shape();
    let expected = Shape::new(k.out_ch, s.height, s.width);
    if grad_out.shape() != expected {
        return Err(Error::contract(
            "conv2d_backward",
            format!("grad_out shape {} but forward output is {expected}", grad_out.shape()),
        ));
    }
    let (h, w) = (s.height, s.width);
    let taps = k.kh * k.kw;
    let cols = k.in_ch * taps;
    let pixels = h * w;

    let grad_bias = (0..k.out_ch)
        .map(|o| grad_out.channel(o).iter().fold(T::zero(), |a, &v| a + v))
        .collect();

    // Patch matrix with columns `c * taps + t`, stored as lane-wide column
    // groups `[group][pixel][lane]` so each group is one contiguous slab.
    let groups = cols.div_ceil(LANES);
    let xp = Padded::new(x, k.kh, k.kw);
    let plane = xp.plane();
    let offsets = tap_offsets(k.kh, k.kw, xp.wp);
    let mut patches = vec![T::zero(); groups * pixels * LANES];
    for p in 0..pixels {
        let at = (p / w) * xp.wp + p % w;
        for c in 0..k.in_ch {
            let base = c * plane + at;
            for (t, &off) in offsets.iter().enumerate() {
                let col = c * taps + t;
                patches[((col / LANES) * pixels + p) * LANES + col % LANES] = xp.data[base + off];
            }
        }
    }

    let mut grad_weights = vec![T::zero(); k.weights.len()];
    for group in 0..groups {
        let slab = &patches[group * pixels * LANES..(group + 1) * pixels * LANES];
        let k0 = group * LANES;
        let n = (cols - k0).min(LANES);
        let mut o = 0;
        while o < k.out_ch {
            if k.out_ch - o >= 4 {
                let g = [
                    grad_out.channel(o),
                    grad_out.channel(o + 1),
                    grad_out.channel(o + 2),
                    grad_out.channel(o + 3),
                ];
                let mut acc = [[T::zero(); LANES]; 4];
                if T::weight_grad_rows4(&mut acc, g, slab, 0, LANES, pixels) {
                    for (r, a) in acc.iter().enumerate() {
                        let at = (o + r) * cols + k0;
                        grad_weights[at..at + n].copy_from_slice(&a[..n]);
                    }
                    o += 4;
                    continue;
                }
            }
            let acc = weight_grad_lanes(grad_out.channel(o), slab);
            let at = o * cols + k0;
            grad_weights[at..at + n].copy_from_slice(&acc[..n]);
            o += 1;
        }
    }

    let grad_input = conv2d_same(grad_out, &k.adjoint())?;
    Ok(GradBundle {
        grad_input,
        grad_weights,
        grad_bias,
    })
}

/// `acc[l] = sum_p g[p] * slab[p][l]`, summed in pixel order.
fn weight_grad_lanes<T: Scalar>(g: &[T], slab: &[T]) -> [T; LANES] {
    let mut acc = [T::zero(); LANES];
    for (&gv, row) in g.iter().zip(slab.chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] = acc[l] + gv * row[l];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_is_identity() {
        let x = Tensor::from_fn(Shape::new(1, 5, 7), |_, i, j| (i * 7 + j) as f32 * 0.37 - 3.0);
        let k = ConvKernel::new(1, 1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(conv2d_same(&x, &k).unwrap(), x);
    }

    #[test]
    fn bias_only_kernel_is_constant() {
        let x = Tensor::from_fn(Shape::new(2, 4, 3), |c, i, j| (c + i + j) as f32);
        let mut k = ConvKernel::<f32>::zeros(1, 2, 3, 3).unwrap();
        k.bias[0] = 1.25;
        let y = conv2d_same(&x, &k).unwrap();
        assert!(y.data().iter().all(|&v| v == 1.25));
    }

    #[test]
    fn rejects_channel_mismatch() {
        let x = Tensor::<f32>::zeros(Shape::new(2, 3, 3));
        let k = ConvKernel::<f32>::zeros(1, 3, 3, 3).unwrap();
        let err = conv2d_same(&x, &k).unwrap_err().to_string();
        assert!(err.contains("(2, 3, 3)") && err.contains("[1, 3, 3, 3]"), "{err}");
    }

    #[test]
    fn rejects_even_kernel() {
        assert!(matches!(
            ConvKernel::<f32>::zeros(1, 1, 2, 3),
            Err(Error::KernelSize(2, 3))
        ));
    }

    #[test]
    fn scalar_chain_rule() {
        let x = Tensor::new(Shape::new(1, 1, 1), vec![1.5f64]).unwrap();
        let k = ConvKernel::new(1, 1, 1, 1, vec![-2.0], vec![0.5]).unwrap();
        let g = Tensor::new(Shape::new(1, 1, 1), vec![3.0]).unwrap();
        let b = conv2d_backward(&x, &k, &g).unwrap();
        assert_eq!(b.grad_weights, vec![3.0 * 1.5]);
        assert_eq!(b.grad_input.data(), &[3.0 * -2.0]);
        assert_eq!(b.grad_bias, vec![3.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = Tensor::from_fn(Shape::new(2, 4, 5), |c, i, j| (c * 3 + i + 2 * j) as f64 * 0.1);
        let k = ConvKernel::new(
            3,
            2,
            3,
            1,
            (0..18).map(|i| i as f64 * 0.05 - 0.4).collect(),
            vec![0.1, 0.2, 0.3],
        )
        .unwrap();
        let g = Tensor::zeros(Shape::new(3, 4, 5));
        let b = conv2d_backward(&x, &k, &g).unwrap();
        assert!(b.grad_input.data().iter().all(|&v| v == 0.0));
        assert!(b.grad_weights.iter().all(|&v| v == 0.0));
        assert!(b.grad_bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_checks_grad_shape() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 3, 3));
        let k = ConvKernel::<f32>::zeros(2, 1, 3, 3).unwrap();
        let g = Tensor::zeros(Shape::new(1, 3, 3));
        assert!(conv2d_backward(&x, &k, &g).is_err());
    }
}
