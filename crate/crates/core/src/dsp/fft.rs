//! Iterative radix-2 FFT plus a chirp-z (Bluestein) wrapper for lengths
//! that are not powers of two.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Precomputed twiddles and bit-reversal table for one power-of-two size.
#[derive(Debug, Clone)]
pub struct Radix2Fft {
    len: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Radix2Fft {
    /// Panics unless `len` is a nonzero power of two.
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "radix-2 FFT length {len} is not a power of two");
        let bits = len.trailing_zeros();
        let bitrev = (0..len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        // Angles are formed from the exact integer index to keep rounding
        // error independent of position.
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        Self { len, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform, `X[k] = sum x[n] e^{-2 pi i k n / N}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// In-place inverse transform including the 1/N factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.len);
        for i in 0..self.len {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= self.len {
            let half = size / 2;
            let stride = self.len / size;
            for start in (0..self.len).step_by(size) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

/// FFT of arbitrary length.
///
/// Powers of two go straight through the radix-2 kernel; other lengths are
/// re-expressed as a circular convolution zero-padded to a power of two.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    plan: Plan,
}

#[derive(Debug, Clone)]
enum Plan {
    Direct(Radix2Fft),
    Bluestein {
        inner: Radix2Fft,
        chirp: Vec<Complex64>,
        kernel_spectrum: Vec<Complex64>,
    },
}

impl Fft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        if len.is_power_of_two() {
            return Self {
                len,
                plan: Plan::Direct(Radix2Fft::new(len)),
            };
        }
        let padded = (2 * len - 1).next_power_of_two();
        let inner = Radix2Fft::new(padded);
        // chirp[k] = exp(-i pi k^2 / n), with k^2 reduced mod 2n before the
        // float conversion.
        let modulus = 2 * len as u128;
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                let kk = (k as u128 * k as u128) % modulus;
                Complex64::from_polar(1.0, -PI * kk as f64 / len as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[padded - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self {
            len,
            plan: Plan::Bluestein {
                inner,
                chirp,
                kernel_spectrum: kernel,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        match &self.plan {
            Plan::Direct(fft) => fft.forward(buf),
            Plan::Bluestein {
                inner,
                chirp,
                kernel_spectrum,
            } => {
                let mut work = vec![Complex64::new(0.0, 0.0); inner.len()];
                for (w, (x, c)) in work.iter_mut().zip(buf.iter().zip(chirp)) {
                    *w = x * c;
                }
                inner.forward(&mut work);
                work.iter_mut().zip(kernel_spectrum).for_each(|(w, k)| *w *= k);
                inner.inverse(&mut work);
                for (out, (w, c)) in buf.iter_mut().zip(work.iter().zip(chirp)) {
                    *out = w * c;
                }
            }
        }
    }

    /// Inverse transform including the 1/N factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        buf.iter_mut().for_each(|v| *v = v.conj());
        self.forward(buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v = v.conj() * scale);
    }
}

/// Convenience forward FFT of a real sequence.
pub fn fft_real(input: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Fft::new(input.len()).forward(&mut buf);
    buf
}
