use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;
use rand::Rng as _;

use super::arch::{ArchSpec, Padding};
use super::model::{Network, Tensor};
use crate::error::Result;
use crate::rng;

/// Outcome of one finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub params: usize,
    /// `||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||)`.
    pub relative_error: f64,
    pub max_abs_error: f64,
}

/// Smallest pre-activation distance to a ReLU or pooling kink accepted by
/// [`random_problem`]; central differences of step `h` are only meaningful
/// when no kink lies within `h` of the sampled point.
pub const KINK_MARGIN: f64 = 1e-3;

/// Random tiny architecture, inputs and labels for trial `trial`, redrawn
/// until every input sits at least [`KINK_MARGIN`] from a kink.
pub fn random_problem(seed: u64, trial: u64) -> (ArchSpec, Vec<f64>, Vec<(Tensor<f64>, f64)>) {
    let mut r = rng::derive_rng(seed, "gradcheck", trial);
    loop {
        let (arch, weights, batch) = draw_problem(&mut r);
        let net = Network::new(&arch, &weights).expect("consistent architecture");
        let margin = batch.iter().map(|(x, _)| net.kink_margin(x).expect("valid input")).fold(f64::INFINITY, f64::min);
        if margin >= KINK_MARGIN {
            return (arch, weights, batch);
        }
    }
}

fn draw_problem(r: &mut rng::Rng) -> (ArchSpec, Vec<f64>, Vec<(Tensor<f64>, f64)>) {
    let one_d = r.random_bool(0.15);
    let arch = ArchSpec {
        conv_filters: if r.random_bool(0.5) { alloc::vec![2, 4] } else { alloc::vec![r.random_range(1..4), r.random_range(1..5)] },
        kernel: if r.random_bool(0.8) { 3 } else { 5 },
        pool: 2,
        hidden_linear: r.random_range(1..5),
        in_channels: r.random_range(1..3),
        padding: if r.random_bool(0.5) { Padding::Zero } else { Padding::Circular },
        one_dimensional: one_d,
        ..ArchSpec::default()
    };
    let weights: Vec<f64> = (0..arch.param_count()).map(|_| r.random_range(-0.6..0.6)).collect();
    let n = r.random_range(1..4);
    let batch = (0..n)
        .map(|_| {
            let h = if one_d { 1 } else { r.random_range(4..9) };
            let w = r.random_range(4..10);
            let c = arch.in_channels;
            let data = (0..c * h * w).map(|_| r.random_range(-1.0..1.0)).collect();
            (Tensor::new(c, h, w, data).expect("consistent shape"), f64::from(u8::from(r.random_bool(0.5))))
        })
        .collect();
    (arch, weights, batch)
}

/// Compares backpropagation with central differences of step `h`.
pub fn check(arch: &ArchSpec, weights: &[f64], batch: &[(Tensor<f64>, f64)], h: f64) -> Result<GradCheck> {
    let refs: Vec<(&Tensor<f64>, f64)> = batch.iter().map(|(x, y)| (x, *y)).collect();
    let (_, analytic) = Network::new(arch, weights)?.loss_and_gradient(&refs)?;
    let mut w = weights.to_vec();
    let mut num = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let orig = w[i];
        w[i] = orig + h;
        let plus = Network::new(arch, &w)?.loss_and_gradient(&refs)?.0;
        w[i] = orig - h;
        let minus = Network::new(arch, &w)?.loss_and_gradient(&refs)?.0;
        w[i] = orig;
        num.push((plus - minus) / (2.0 * h));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&num).map(|(a, b)| a - b).collect();
    let scale = norm(&analytic).max(norm(&num));
    Ok(GradCheck {
        params: w.len(),
        relative_error: if scale == 0.0 { 0.0 } else { norm(&diff) / scale },
        max_abs_error: diff.iter().fold(0.0, |m, d| m.max(d.abs())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_tiny_architecture() {
        let arch = ArchSpec { conv_filters: alloc::vec![2, 4], hidden_linear: 3, ..ArchSpec::default() };
        let (_, _, batch) = random_problem(5, 0);
        let batch: Vec<_> = batch.into_iter().map(|(x, y)| (Tensor::new(1, x.height.max(4), x.width, alloc::vec![0.3; x.height.max(4) * x.width]).unwrap(), y)).collect();
        let mut r = rng::rng_from(3);
        let w: Vec<f64> = (0..arch.param_count()).map(|_| r.random_range(-0.6..0.6)).collect();
        let mut batch = batch;
        for (x, _) in &mut batch {
            x.data.iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
        }
        let g = check(&arch, &w, &batch, 1e-5).unwrap();
        assert!(g.relative_error < 1e-4, "{g:?}");
    }

    #[test]
    fn randomized_architectures() {
        for trial in 0..20 {
            let (arch, w, batch) = random_problem(77, trial);
            let g = check(&arch, &w, &batch, 1e-5).unwrap();
            assert!(g.relative_error < 1e-4, "trial {trial}: {g:?}");
        }
    }

    #[test]
    fn accepted_problems_keep_clear_of_kinks() {
        for trial in 0..50 {
            let (arch, w, batch) = random_problem(2024, trial);
            let net = Network::new(&arch, &w).unwrap();
            for (x, _) in &batch {
                assert!(net.kink_margin(x).unwrap() >= KINK_MARGIN);
            }
        }
    }

    #[test]
    fn pooling_margin_counts_the_relu_floor() {
        use super::super::layers::relu_maxpool_margin;
        // One 2x2 window: top two of {0, 0.5, 0.2, -1, 0.45} differ by 0.05.
        assert!((relu_maxpool_margin(&[0.5f64, 0.2, -1.0, 0.45], 1, 2, 2, 2, 2) - 0.05).abs() < 1e-12);
        // All negative: the floor at 0 is the maximum, nearest is -0.1.
        assert!((relu_maxpool_margin(&[-0.1f64, -0.2, -1.0, -0.3], 1, 2, 2, 2, 2) - 0.1).abs() < 1e-12);
    }
}
