//! AVX kernels for the f32 convolution hot loops.
//!
//! Each kernel performs exactly the scalar sequence `acc = acc + w * x`
//! (separate multiply and add, no fused multiply-add) in the same order as the
//! portable loops in `conv.rs`, so both paths produce identical bits.

#[cfg(target_arch = "x86_64")]
use std::arch::x86_64::*;

/// Four output rows of the "same" convolution over a padded-width grid.
/// `packed` holds weights as `[c][tap][row]`.
pub(super) fn conv_rows4(
    dst: &mut [f32],
    src: &[f32],
    packed: &[f32],
    bias: [f32; 4],
    in_ch: usize,
    plane: usize,
    offsets: &[usize],
    len: usize,
) -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        let max_off = offsets.iter().copied().max().unwrap_or(0);
        assert!(dst.len() >= 4 * len && len % 16 == 0);
        assert!(packed.len() >= in_ch * offsets.len() * 4);
        assert!(in_ch == 0 || (in_ch - 1) * plane + len + max_off <= src.len());
        if is_x86_feature_detected!("avx512f") {
            // SAFETY: feature checked above; the asserts bound every pointer read.
            unsafe { conv_rows4_avx512(dst, src, packed, bias, in_ch, plane, offsets, len) };
            return true;
        }
        if is_x86_feature_detected!("avx") {
            // SAFETY: feature checked above; the asserts bound every pointer read.
            unsafe { conv_rows4_avx(dst, src, packed, bias, in_ch, plane, offsets, len) };
            return true;
        }
    }
    let _ = (dst, src, packed, bias, in_ch, plane, offsets, len);
    false
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
#[allow(clippy::too_many_arguments)]
unsafe fn conv_rows4_avx(
    dst: &mut [f32],
    src: &[f32],
    packed: &[f32],
    bias: [f32; 4],
    in_ch: usize,
    plane: usize,
    offsets: &[usize],
    len: usize,
) {
    let sp = src.as_ptr();
    let wp = packed.as_ptr();
    let dp = dst.as_mut_ptr();
    for p in (0..len).step_by(16) {
        let mut a0l = _mm256_set1_ps(bias[0]);
        let mut a0h = a0l;
        let mut a1l = _mm256_set1_ps(bias[1]);
        let mut a1h = a1l;
        let mut a2l = _mm256_set1_ps(bias[2]);
        let mut a2h = a2l;
        let mut a3l = _mm256_set1_ps(bias[3]);
        let mut a3h = a3l;
        let mut wi = 0;
        for c in 0..in_ch {
            let base = c * plane + p;
            for &off in offsets {
                let s = sp.add(base + off);
                let sl = _mm256_loadu_ps(s);
                let sh = _mm256_loadu_ps(s.add(8));
                let w = wp.add(wi);
                let w0 = _mm256_broadcast_ss(&*w);
                let w1 = _mm256_broadcast_ss(&*w.add(1));
                let w2 = _mm256_broadcast_ss(&*w.add(2));
                let w3 = _mm256_broadcast_ss(&*w.add(3));
                a0l = _mm256_add_ps(a0l, _mm256_mul_ps(w0, sl));
                a0h = _mm256_add_ps(a0h, _mm256_mul_ps(w0, sh));
                a1l = _mm256_add_ps(a1l, _mm256_mul_ps(w1, sl));
                a1h = _mm256_add_ps(a1h, _mm256_mul_ps(w1, sh));
                a2l = _mm256_add_ps(a2l, _mm256_mul_ps(w2, sl));
                a2h = _mm256_add_ps(a2h, _mm256_mul_ps(w2, sh));
                a3l = _mm256_add_ps(a3l, _mm256_mul_ps(w3, sl));
                a3h = _mm256_add_ps(a3h, _mm256_mul_ps(w3, sh));
                wi += 4;
            }
        }
        let d = dp.add(p);
        _mm256_storeu_ps(d, a0l);
        _mm256_storeu_ps(d.add(8), a0h);
        _mm256_storeu_ps(d.add(len), a1l);
        _mm256_storeu_ps(d.add(len + 8), a1h);
        _mm256_storeu_ps(d.add(2 * len), a2l);
        _mm256_storeu_ps(d.add(2 * len + 8), a2h);
        _mm256_storeu_ps(d.add(3 * len), a3l);
        _mm256_storeu_ps(d.add(3 * len + 8), a3h);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[allow(clippy::too_many_arguments)]
unsafe fn conv_rows4_avx512(
    dst: &mut [f32],
    src: &[f32],
    packed: &[f32],
    bias: [f32; 4],
    in_ch: usize,
    plane: usize,
    offsets: &[usize],
    len: usize,
) {
    let sp = src.as_ptr();
    let wp = packed.as_ptr();
    let dp = dst.as_mut_ptr();
    for p in (0..len).step_by(16) {
        let mut a0 = _mm512_set1_ps(bias[0]);
        let mut a1 = _mm512_set1_ps(bias[1]);
        let mut a2 = _mm512_set1_ps(bias[2]);
        let mut a3 = _mm512_set1_ps(bias[3]);
        let mut wi = 0;
        for c in 0..in_ch {
            let base = c * plane + p;
            for &off in offsets {
                let s = _mm512_loadu_ps(sp.add(base + off));
                let w = wp.add(wi);
                a0 = _mm512_add_ps(a0, _mm512_mul_ps(_mm512_set1_ps(*w), s));
                a1 = _mm512_add_ps(a1, _mm512_mul_ps(_mm512_set1_ps(*w.add(1)), s));
                a2 = _mm512_add_ps(a2, _mm512_mul_ps(_mm512_set1_ps(*w.add(2)), s));
                a3 = _mm512_add_ps(a3, _mm512_mul_ps(_mm512_set1_ps(*w.add(3)), s));
                wi += 4;
            }
        }
        let d = dp.add(p);
        _mm512_storeu_ps(d, a0);
        _mm512_storeu_ps(d.add(len), a1);
        _mm512_storeu_ps(d.add(2 * len), a2);
        _mm512_storeu_ps(d.add(3 * len), a3);
    }
}

/// `out[r][k] = sum_p g[r][p] * patches[p][k0 + k]` for four gradient rows and
/// sixteen patch columns, summed in pixel order.
pub(super) fn weight_grad_rows4(
    out: &mut [[f32; 16]; 4],
    g: [&[f32]; 4],
    patches: &[f32],
    k0: usize,
    stride: usize,
    pixels: usize,
) -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        assert!(g.iter().all(|r| r.len() >= pixels));
        assert!(pixels == 0 || (pixels - 1) * stride + k0 + 16 <= patches.len());
        if is_x86_feature_detected!("avx512f") {
            // SAFETY: feature checked above; the asserts bound every pointer read.
            unsafe { weight_grad_rows4_avx512(out, g, patches, k0, stride, pixels) };
            return true;
        }
        if is_x86_feature_detected!("avx") {
            // SAFETY: feature checked above; the asserts bound every pointer read.
            unsafe { weight_grad_rows4_avx(out, g, patches, k0, stride, pixels) };
            return true;
        }
    }
    let _ = (out, g, patches, k0, stride, pixels);
    false
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn weight_grad_rows4_avx(
    out: &mut [[f32; 16]; 4],
    g: [&[f32]; 4],
    patches: &[f32],
    k0: usize,
    stride: usize,
    pixels: usize,
) {
    let mut a0l = _mm256_setzero_ps();
    let mut a0h = a0l;
    let mut a1l = a0l;
    let mut a1h = a0l;
    let mut a2l = a0l;
    let mut a2h = a0l;
    let mut a3l = a0l;
    let mut a3h = a0l;
    let pp = patches.as_ptr().add(k0);
    let (g0, g1, g2, g3) = (g[0].as_ptr(), g[1].as_ptr(), g[2].as_ptr(), g[3].as_ptr());
    for p in 0..pixels {
        let row = pp.add(p * stride);
        let sl = _mm256_loadu_ps(row);
        let sh = _mm256_loadu_ps(row.add(8));
        let v0 = _mm256_broadcast_ss(&*g0.add(p));
        let v1 = _mm256_broadcast_ss(&*g1.add(p));
        let v2 = _mm256_broadcast_ss(&*g2.add(p));
        let v3 = _mm256_broadcast_ss(&*g3.add(p));
        a0l = _mm256_add_ps(a0l, _mm256_mul_ps(v0, sl));
        a0h = _mm256_add_ps(a0h, _mm256_mul_ps(v0, sh));
        a1l = _mm256_add_ps(a1l, _mm256_mul_ps(v1, sl));
        a1h = _mm256_add_ps(a1h, _mm256_mul_ps(v1, sh));
        a2l = _mm256_add_ps(a2l, _mm256_mul_ps(v2, sl));
        a2h = _mm256_add_ps(a2h, _mm256_mul_ps(v2, sh));
        a3l = _mm256_add_ps(a3l, _mm256_mul_ps(v3, sl));
        a3h = _mm256_add_ps(a3h, _mm256_mul_ps(v3, sh));
    }
    _mm256_storeu_ps(out[0].as_mut_ptr(), a0l);
    _mm256_storeu_ps(out[0].as_mut_ptr().add(8), a0h);
    _mm256_storeu_ps(out[1].as_mut_ptr(), a1l);
    _mm256_storeu_ps(out[1].as_mut_ptr().add(8), a1h);
    _mm256_storeu_ps(out[2].as_mut_ptr(), a2l);
    _mm256_storeu_ps(out[2].as_mut_ptr().add(8), a2h);
    _mm256_storeu_ps(out[3].as_mut_ptr(), a3l);
    _mm256_storeu_ps(out[3].as_mut_ptr().add(8), a3h);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn weight_grad_rows4_avx512(
    out: &mut [[f32; 16]; 4],
    g: [&[f32]; 4],
    patches: &[f32],
    k0: usize,
    stride: usize,
    pixels: usize,
) {
    let mut a0 = _mm512_setzero_ps();
    let mut a1 = a0;
    let mut a2 = a0;
    let mut a3 = a0;
    let pp = patches.as_ptr().add(k0);
    let (g0, g1, g2, g3) = (g[0].as_ptr(), g[1].as_ptr(), g[2].as_ptr(), g[3].as_ptr());
    for p in 0..pixels {
        let s = _mm512_loadu_ps(pp.add(p * stride));
        a0 = _mm512_add_ps(a0, _mm512_mul_ps(_mm512_set1_ps(*g0.add(p)), s));
        a1 = _mm512_add_ps(a1, _mm512_mul_ps(_mm512_set1_ps(*g1.add(p)), s));
        a2 = _mm512_add_ps(a2, _mm512_mul_ps(_mm512_set1_ps(*g2.add(p)), s));
        a3 = _mm512_add_ps(a3, _mm512_mul_ps(_mm512_set1_ps(*g3.add(p)), s));
    }
    _mm512_storeu_ps(out[0].as_mut_ptr(), a0);
    _mm512_storeu_ps(out[1].as_mut_ptr(), a1);
    _mm512_storeu_ps(out[2].as_mut_ptr(), a2);
    _mm512_storeu_ps(out[3].as_mut_ptr(), a3);
}
