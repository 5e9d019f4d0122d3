//! Power-of-two FFTs.
//!
//! A radix-2 iterative complex transform and a real-input transform built on
//! a half-length complex one. Transforms are unnormalized in both directions;
//! callers scale inverse output by `1/n`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{bail, Result};

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            bail!(Argument, "FFT size must be a power of two, got {n}");
        }
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Unnormalized inverse: `forward` followed by `inverse` scales by `n`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n, "buffer length does not match FFT size");
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w.conj() } else { w };
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Real-input FFT of even power-of-two length `n`, producing `n/2 + 1` bins.
#[derive(Debug, Clone)]
pub struct RealFft {
    n: usize,
    half: Fft,
    post: Vec<Complex64>,
}

impl RealFft {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            bail!(Argument, "real FFT size must be a power of two >= 2, got {n}");
        }
        let half = Fft::new(n / 2)?;
        let post = (0..=n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Self { n, half, post })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bins(&self) -> usize {
        self.n / 2 + 1
    }

    /// `scratch` must hold `n/2` values; `out` receives `n/2 + 1` bins.
    pub fn forward(&self, input: &[f64], out: &mut [Complex64], scratch: &mut [Complex64]) {
        let m = self.n / 2;
        assert_eq!(input.len(), self.n);
        assert_eq!(out.len(), m + 1);
        assert_eq!(scratch.len(), m);
        for (i, z) in scratch.iter_mut().enumerate() {
            *z = Complex64::new(input[2 * i], input[2 * i + 1]);
        }
        self.half.forward(scratch);
        for k in 0..=m {
            let zk = scratch[k % m];
            let zc = scratch[(m - k) % m].conj();
            let even = (zk + zc) * 0.5;
            let odd = (zk - zc) * Complex64::new(0.0, -0.5);
            out[k] = even + self.post[k] * odd;
        }
    }

    /// Inverse of [`forward`](Self::forward), normalized so the round trip is
    /// the identity. Imaginary parts of the DC and Nyquist bins are ignored.
    pub fn inverse(&self, spectrum: &[Complex64], out: &mut [f64], scratch: &mut [Complex64]) {
        let m = self.n / 2;
        assert_eq!(spectrum.len(), m + 1);
        assert_eq!(out.len(), self.n);
        assert_eq!(scratch.len(), m);
        let mut dc = spectrum[0];
        dc.im = 0.0;
        let mut ny = spectrum[m];
        ny.im = 0.0;
        for (k, z) in scratch.iter_mut().enumerate() {
            let xk = if k == 0 { dc } else { spectrum[k] };
            let xc = if k == 0 { ny } else { spectrum[m - k] }.conj();
            let even = (xk + xc) * 0.5;
            let odd = (xk - xc) * 0.5 * self.post[k].conj();
            *z = even + Complex64::new(0.0, 1.0) * odd;
        }
        self.half.inverse(scratch);
        let scale = 1.0 / m as f64;
        for (i, z) in scratch.iter().enumerate() {
            out[2 * i] = z.re * scale;
            out[2 * i + 1] = z.im * scale;
        }
    }
}

/// Linear convolution of two real sequences via zero-padded FFTs.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = alloc::vec![0.0; out_len];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two().max(2);
    let fft = RealFft::new(n).expect("power of two");
    let mut scratch = alloc::vec![Complex64::default(); n / 2];
    let mut pa = alloc::vec![0.0; n];
    pa[..a.len()].copy_from_slice(a);
    let mut fa = alloc::vec![Complex64::default(); n / 2 + 1];
    fft.forward(&pa, &mut fa, &mut scratch);
    let mut pb = alloc::vec![0.0; n];
    pb[..b.len()].copy_from_slice(b);
    let mut fb = alloc::vec![Complex64::default(); n / 2 + 1];
    fft.forward(&pb, &mut fb, &mut scratch);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft.inverse(&fa, &mut pa, &mut scratch);
    pa.truncate(out_len);
    pa
}

/// The magnitude-phase split used throughout: phase on `(-pi, pi]`.
pub fn principal_angle(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}
