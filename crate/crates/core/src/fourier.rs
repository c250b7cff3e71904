//! Angular Fourier transforms on a uniform grid of the velocity circle.
//!
//! Spectra are stored in FFT order: index `j` holds mode `j` for
//! `j <= n/2` and mode `j - n` above. Coefficients are normalized so that
//! `f(θ_j) = Σ_m f̂_m e^{i m θ_j}`.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Signed mode number stored at FFT index `j` of an `n`-point spectrum.
pub fn mode_of(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Uniform angle grid `θ_j = 2πj/n`.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| std::f64::consts::TAU * j as f64 / n as f64)
        .collect()
}

/// Forward/inverse transform pair of fixed length.
#[derive(Clone)]
pub struct AngularTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AngularTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AngularTransform").field("n", &self.n).finish()
    }
}

impl AngularTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Grid values to normalized coefficients, in place.
    pub fn analyze(&self, data: &mut [Complex64]) {
        self.forward.process(data);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Normalized coefficients to grid values, in place.
    pub fn synthesize(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
    }

    pub fn spectrum_of(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.analyze(&mut data);
        data
    }

    pub fn real_values_of(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut data = spectrum.to_vec();
        self.synthesize(&mut data);
        data.iter().map(|z| z.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_roundtrip() {
        let n = 16;
        let tr = AngularTransform::new(n);
        let values: Vec<f64> = angle_grid(n).iter().map(|t| (3.0 * t).cos()).collect();
        let spec = tr.spectrum_of(&values);
        for (j, z) in spec.iter().enumerate() {
            let expect = if mode_of(j, n).abs() == 3 { 0.5 } else { 0.0 };
            assert!((z.re - expect).abs() < 1e-14 && z.im.abs() < 1e-14);
        }
        let back = tr.real_values_of(&spec);
        for (a, b) in back.iter().zip(&values) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
