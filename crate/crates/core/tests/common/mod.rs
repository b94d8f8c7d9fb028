#![allow(dead_code)]
//! Oracles shared by the conformance suites and the acceptance run.

use loopcodec::eval::{RdCurve, RdPoint};
use loopcodec::tensor::fd::{central_difference, relative_error};
use loopcodec::tensor::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight nested-loop "same" convolution, bounds-checked per tap.
pub fn direct_conv(x: &Tensor<f32>, k: &ConvKernel<f32>) -> Vec<f32> {
    let s = x.shape();
    let (ph, pw) = (k.kh as isize / 2, k.kw as isize / 2);
    let mut out = Vec::new();
    for o in 0..k.out_ch {
        for i in 0..s.height as isize {
            for j in 0..s.width as isize {
                let mut acc = k.bias[o];
                for c in 0..k.in_ch {
                    for u in 0..k.kh as isize {
                        for v in 0..k.kw as isize {
                            let (si, sj) = (i + u - ph, j + v - pw);
                            let xv = if si >= 0
                                && sj >= 0
                                && si < s.height as isize
                                && sj < s.width as isize
                            {
                                x.get(c, si as usize, sj as usize)
                            } else {
                                0.0
                            };
                            acc += k.weight(o, c, u as usize, v as usize) * xv;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

pub fn random_tensor<T: Scalar>(rng: &mut ChaCha8Rng, shape: Shape) -> Tensor<T> {
    Tensor::from_fn(shape, |_, _, _| T::from_f64(rng.gen_range(-1.0..1.0)))
}

pub fn random_kernel<T: Scalar>(rng: &mut ChaCha8Rng, o: usize, c: usize, kh: usize, kw: usize) -> ConvKernel<T> {
    let w = (0..o * c * kh * kw).map(|_| T::from_f64(rng.gen_range(-1.0..1.0))).collect();
    let b = (0..o).map(|_| T::from_f64(rng.gen_range(-0.5..0.5))).collect();
    ConvKernel::new(o, c, kh, kw, w, b).unwrap()
}

pub const SIZES: [(usize, usize); 4] = [(1, 1), (1, 3), (3, 1), (3, 3)];

/// Checks every input, weight and bias gradient of `sum(grad_out * conv(x, k))`.
pub fn check_conv_gradients(rng: &mut ChaCha8Rng, o: usize, c: usize, kh: usize, kw: usize, h: usize, w: usize) -> f64 {
    let x = random_tensor::<f64>(rng, Shape::new(c, h, w));
    let k = random_kernel::<f64>(rng, o, c, kh, kw);
    let g = random_tensor::<f64>(rng, Shape::new(o, h, w));
    let bundle = conv2d_backward(&x, &k, &g).unwrap();

    let loss = |x: &Tensor<f64>, k: &ConvKernel<f64>| -> f64 {
        let y = conv2d_same(x, k).unwrap();
        y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    };

    let mut worst = 0.0f64;
    let xs = x.data().to_vec();
    let all: Vec<usize> = (0..xs.len()).collect();
    let num = central_difference(
        |v| loss(&Tensor::new(x.shape(), v.to_vec()).unwrap(), &k),
        &xs,
        &all,
        1e-3,
    );
    for (n, a) in num.iter().zip(bundle.grad_input.data()) {
        worst = worst.max(relative_error(*n, *a));
    }

    let ws = k.weights.clone();
    let all: Vec<usize> = (0..ws.len()).collect();
    let num = central_difference(
        |v| {
            let mut kk = k.clone();
            kk.weights.copy_from_slice(v);
            loss(&x, &kk)
        },
        &ws,
        &all,
        1e-3,
    );
    for (n, a) in num.iter().zip(&bundle.grad_weights) {
        worst = worst.max(relative_error(*n, *a));
    }

    let bs = k.bias.clone();
    let all: Vec<usize> = (0..bs.len()).collect();
    let num = central_difference(
        |v| {
            let mut kk = k.clone();
            kk.bias.copy_from_slice(v);
            loss(&x, &kk)
        },
        &bs,
        &all,
        1e-3,
    );
    for (n, a) in num.iter().zip(&bundle.grad_bias) {
        worst = worst.max(relative_error(*n, *a));
    }
    worst
}

/// 50 random forward cases; worst absolute deviation from [`direct_conv`].
pub fn conv_forward_suite(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let c = rng.gen_range(1..=3);
        let o = rng.gen_range(1..=6);
        let (h, w) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let (kh, kw) = SIZES[case % 4];
        let x = random_tensor::<f32>(&mut rng, Shape::new(c, h, w));
        let k = random_kernel::<f32>(&mut rng, o, c, kh, kw);
        let y = conv2d_same(&x, &k).unwrap();
        assert_eq!(y.shape(), Shape::new(o, h, w));
        let want = direct_conv(&x, &k);
        for (a, b) in y.data().iter().zip(&want) {
            worst = worst.max((a - b).abs() as f64);
        }
    }
    worst
}

/// 20 random f64 backward cases; worst relative error against central differences.
pub fn conv_backward_suite(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let (kh, kw) = SIZES[case % 4];
        let c = rng.gen_range(1..=3);
        let o = rng.gen_range(1..=5);
        let (h, w) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        worst = worst.max(check_conv_gradients(&mut rng, o, c, kh, kw, h, w));
    }
    worst
}

/// Lagrange interpolation through exactly four points.
pub fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    (0..xs.len())
        .map(|i| {
            let li: f64 = (0..xs.len())
                .filter(|&j| j != i)
                .map(|j| (x - xs[j]) / (xs[i] - xs[j]))
                .product();
            ys[i] * li
        })
        .sum()
}

/// Dense trapezoid average of `f` over `[lo, hi]`.
pub fn trapezoid_mean(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut s = 0.5 * (f(lo) + f(hi));
    for i in 1..n {
        s += f(lo + i as f64 * h);
    }
    s * h / (hi - lo)
}

pub fn oracle_bd_rate(a: &[(f64, f64)], t: &[(f64, f64)]) -> f64 {
    let (pa, ra): (Vec<f64>, Vec<f64>) = a.iter().map(|&(r, p)| (p, r.log10())).unzip();
    let (pt, rt): (Vec<f64>, Vec<f64>) = t.iter().map(|&(r, p)| (p, r.log10())).unzip();
    let lo = pa.iter().cloned().fold(f64::INFINITY, f64::min).max(pt.iter().cloned().fold(f64::INFINITY, f64::min));
    let hi = pa.iter().cloned().fold(f64::NEG_INFINITY, f64::max).min(pt.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let d = trapezoid_mean(|x| lagrange(&pt, &rt, x), lo, hi) - trapezoid_mean(|x| lagrange(&pa, &ra, x), lo, hi);
    (10f64.powf(d) - 1.0) * 100.0
}

pub fn oracle_bd_psnr(a: &[(f64, f64)], t: &[(f64, f64)]) -> f64 {
    let (ra, pa): (Vec<f64>, Vec<f64>) = a.iter().map(|&(r, p)| (r.log10(), p)).unzip();
    let (rt, pt): (Vec<f64>, Vec<f64>) = t.iter().map(|&(r, p)| (r.log10(), p)).unzip();
    let lo = ra.iter().cloned().fold(f64::INFINITY, f64::min).max(rt.iter().cloned().fold(f64::INFINITY, f64::min));
    let hi = ra.iter().cloned().fold(f64::NEG_INFINITY, f64::max).min(rt.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    trapezoid_mean(|x| lagrange(&rt, &pt, x), lo, hi) - trapezoid_mean(|x| lagrange(&ra, &pa, x), lo, hi)
}

/// Four points on a smooth concave RD curve, rates decreasing.
pub fn smooth_curve(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let a = rng.gen_range(34.0..40.0);
    let b = rng.gen_range(5.0..9.0);
    let c = rng.gen_range(-1.0..0.0);
    let mut r: f64 = rng.gen_range(0.8..2.5);
    (0..4)
        .map(|_| {
            let lr = r.log10();
            let p = a + b * lr + c * lr * lr;
            let pt = (r, p);
            r *= rng.gen_range(0.45..0.7);
            pt
        })
        .collect()
}

pub fn to_curve(pts: &[(f64, f64)]) -> RdCurve {
    RdCurve::new(pts.iter().map(|&(r, p)| RdPoint::new(r, p)).collect()).unwrap()
}

pub fn perturbed(rng: &mut ChaCha8Rng, base: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let scale = rng.gen_range(0.8..1.2);
    base.iter()
        .map(|&(r, p)| (r * scale * rng.gen_range(0.97..1.03), p + rng.gen_range(-0.3..0.3)))
        .collect()
}

