//! Convolution by im2col, fused ReLU + max pooling, and their adjoints.

use alloc::vec;
use alloc::vec::Vec;

use super::arch::Padding;
use super::scalar::Scalar;

/// Source index along an axis of length `n` for position `i + d - half`,
/// or `None` when it falls into zero padding.
#[inline]
fn source(i: usize, d: usize, half: usize, n: usize, padding: Padding) -> Option<usize> {
    let s = i as isize + d as isize - half as isize;
    if (0..n as isize).contains(&s) {
        Some(s as usize)
    } else {
        match padding {
            Padding::Zero => None,
            Padding::Circular => Some(s.rem_euclid(n as isize) as usize),
        }
    }
}

/// Unfolds `[c x h x w]` into `[(c * kh * kw) x (h * w)]` for a same-size
/// convolution.
pub fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, kh: usize, kw: usize, padding: Padding, cols: &mut Vec<T>) {
    let hw = h * w;
    cols.clear();
    cols.resize(c * kh * kw * hw, T::zero());
    let (ph, pw) = (kh / 2, kw / 2);
    for ch in 0..c {
        let plane = &x[ch * hw..(ch + 1) * hw];
        for dy in 0..kh {
            for dx in 0..kw {
                let row = &mut cols[((ch * kh + dy) * kw + dx) * hw..][..hw];
                for y in 0..h {
                    let Some(sy) = source(y, dy, ph, h, padding) else { continue };
                    let src = &plane[sy * w..(sy + 1) * w];
                    let dst = &mut row[y * w..(y + 1) * w];
                    // Interior columns copy as one slice.
                    let lo = pw.saturating_sub(dx);
                    let hi = (w + pw).saturating_sub(dx).min(w);
                    if lo < hi {
                        dst[lo..hi].copy_from_slice(&src[lo + dx - pw..hi + dx - pw]);
                    }
                    for xo in (0..lo).chain(hi..w) {
                        if let Some(sx) = source(xo, dx, pw, w, padding) {
                            dst[xo] = src[sx];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back onto `[c x h x w]`.
pub fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, kh: usize, kw: usize, padding: Padding, x: &mut [T]) {
    let hw = h * w;
    x[..c * hw].iter_mut().for_each(|v| *v = T::zero());
    let (ph, pw) = (kh / 2, kw / 2);
    for ch in 0..c {
        let plane = &mut x[ch * hw..(ch + 1) * hw];
        for dy in 0..kh {
            for dx in 0..kw {
                let row = &cols[((ch * kh + dy) * kw + dx) * hw..][..hw];
                for y in 0..h {
                    let Some(sy) = source(y, dy, ph, h, padding) else { continue };
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy * w..(sy + 1) * w];
                    let lo = pw.saturating_sub(dx);
                    let hi = (w + pw).saturating_sub(dx).min(w);
                    if lo < hi {
                        for (d, s) in dst[lo + dx - pw..hi + dx - pw].iter_mut().zip(&src[lo..hi]) {
                            *d += *s;
                        }
                    }
                    for xo in (0..lo).chain(hi..w) {
                        if let Some(sx) = source(xo, dx, pw, w, padding) {
                            dst[sx] += src[xo];
                        }
                    }
                }
            }
        }
    }
}

/// Marks a pooled output whose window was entirely non-positive.
pub const DEAD: u32 = u32::MAX;

/// `maxpool(relu(pre))` with floor semantics over `[c x h x w]`. Records,
/// per output, the flat index of the winning input (or [`DEAD`]).
pub fn relu_maxpool<T: Scalar>(
    pre: &[T],
    c: usize,
    h: usize,
    w: usize,
    ph: usize,
    pw: usize,
    out: &mut Vec<T>,
    argmax: Option<&mut Vec<u32>>,
) -> (usize, usize) {
    let (oh, ow) = (h / ph, w / pw);
    out.clear();
    out.resize(c * oh * ow, T::zero());
    let mut arg = argmax;
    if let Some(a) = arg.as_deref_mut() {
        a.clear();
        a.resize(c * oh * ow, DEAD);
    }
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = T::zero();
                let mut best_i = DEAD;
                for dy in 0..ph {
                    let row = base + (oy * ph + dy) * w + ox * pw;
                    for dx in 0..pw {
                        let v = pre[row + dx];
                        if v > best {
                            best = v;
                            best_i = (row + dx) as u32;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = best;
                if let Some(a) = arg.as_deref_mut() {
                    a[o] = best_i;
                }
            }
        }
    }
    (oh, ow)
}

/// Smallest gap between the two largest of `{0} ∪ window` over every pooling
/// window of `maxpool(relu(pre))`; the output is differentiable wherever
/// this is positive.
pub fn relu_maxpool_margin<T: Scalar>(pre: &[T], c: usize, h: usize, w: usize, ph: usize, pw: usize) -> f64 {
    let (oh, ow) = (h / ph, w / pw);
    let mut margin = f64::INFINITY;
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let (mut first, mut second) = (0.0, f64::NEG_INFINITY);
                for dy in 0..ph {
                    let row = base + (oy * ph + dy) * w + ox * pw;
                    for &v in &pre[row..row + pw] {
                        let v = v.as_f64();
                        if v > first {
                            second = first;
                            first = v;
                        } else if v > second {
                            second = v;
                        }
                    }
                }
                margin = margin.min(first - second);
            }
        }
    }
    margin
}

/// Routes pooled-output gradients back to the winning pre-activations.
pub fn relu_maxpool_backward<T: Scalar>(dout: &[T], argmax: &[u32], dpre: &mut Vec<T>, pre_len: usize) {
    dpre.clear();
    dpre.resize(pre_len, T::zero());
    for (&g, &i) in dout.iter().zip(argmax) {
        if i != DEAD {
            dpre[i as usize] += g;
        }
    }
}

/// Reference direct convolution, used by tests.
#[allow(clippy::too_many_arguments)]
pub fn conv_direct<T: Scalar>(
    x: &[T],
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[T],
    bias: &[T],
    c_out: usize,
    kh: usize,
    kw: usize,
    padding: Padding,
) -> Vec<T> {
    let mut out = vec![T::zero(); c_out * h * w];
    for co in 0..c_out {
        for y in 0..h {
            for xo in 0..w {
                let mut acc = bias[co];
                for ci in 0..c_in {
                    for dy in 0..kh {
                        let Some(sy) = source(y, dy, kh / 2, h, padding) else { continue };
                        for dx in 0..kw {
                            let Some(sx) = source(xo, dx, kw / 2, w, padding) else { continue };
                            acc += weight[((co * c_in + ci) * kh + dy) * kw + dx] * x[(ci * h + sy) * w + sx];
                        }
                    }
                }
                out[(co * h + y) * w + xo] = acc;
            }
        }
    }
    out
}
