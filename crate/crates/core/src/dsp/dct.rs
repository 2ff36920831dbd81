//! Orthonormal DCT-II and its inverse (DCT-III), computed through an
//! N-point complex FFT after even/odd reordering.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft::Fft;

/// Reusable orthonormal DCT of one length.
#[derive(Debug, Clone)]
pub struct Dct {
    len: usize,
    fft: Fft,
    /// exp(-i pi k / 2N)
    rotation: Vec<Complex64>,
}

impl Dct {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DCT length must be positive");
        let rotation = (0..len)
            .map(|k| Complex64::from_polar(1.0, -PI * k as f64 / (2 * len) as f64))
            .collect();
        Self {
            len,
            fft: Fft::new(len),
            rotation,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn scale(&self, k: usize) -> f64 {
        let n = self.len as f64;
        if k == 0 {
            (1.0 / n).sqrt()
        } else {
            (2.0 / n).sqrt()
        }
    }

    /// `X[k] = s_k * sum_n x[n] cos(pi k (2n + 1) / 2N)` with
    /// `s_0 = sqrt(1/N)` and `s_k = sqrt(2/N)` otherwise.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let n = self.len;
        assert_eq!(input.len(), n);
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for (i, &x) in input.iter().enumerate() {
            let slot = if i % 2 == 0 { i / 2 } else { n - 1 - i / 2 };
            v[slot] = Complex64::new(x, 0.0);
        }
        self.fft.forward(&mut v);
        (0..n).map(|k| (v[k] * self.rotation[k]).re * self.scale(k)).collect()
    }

    /// Inverse of [`Dct::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.len;
        assert_eq!(coeffs.len(), n);
        let raw: Vec<f64> = coeffs.iter().enumerate().map(|(k, c)| c / self.scale(k)).collect();
        let mut v: Vec<Complex64> = (0..n)
            .map(|k| {
                let mirror = if k == 0 { 0.0 } else { raw[n - k] };
                Complex64::new(raw[k], -mirror) * self.rotation[k].conj()
            })
            .collect();
        self.fft.inverse(&mut v);
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let slot = if i % 2 == 0 { i / 2 } else { n - 1 - i / 2 };
            *o = v[slot].re;
        }
        out
    }
}
