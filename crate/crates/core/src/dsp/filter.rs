use alloc::vec::Vec;
use core::f64::consts::PI;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Zero-phase windowed-sinc low-pass (Blackman, 255 taps).
pub fn lowpass(signal: &[f64], cutoff_hz: f64, sample_rate: u32) -> Vec<f64> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if cutoff_hz >= nyquist {
        return signal.to_vec();
    }
    const TAPS: usize = 255;
    let half = (TAPS / 2) as isize;
    let fc = cutoff_hz / f64::from(sample_rate);
    let mut kernel: Vec<f64> = (0..TAPS)
        .map(|i| {
            let m = i as isize - half;
            let sinc = if m == 0 { 2.0 * fc } else { (2.0 * PI * fc * m as f64).sin() / (PI * m as f64) };
            let x = 2.0 * PI * i as f64 / (TAPS - 1) as f64;
            sinc * (0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos())
        })
        .collect();
    let dc: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= dc);
    let full = crate::fft::convolve(signal, &kernel);
    full[half as usize..half as usize + signal.len()].to_vec()
}
