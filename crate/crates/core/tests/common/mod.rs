//! Independent reference implementations used by the integration tests and
//! the acceptance runner. Transforms, statistics and kappa are computed from
//! scratch; the gradient oracle only calls forward passes.

#![allow(dead_code)]

use std::f64::consts::PI;

use emoser::nn::{ops, Sequential, Tensor};
use num_complex::Complex64;
use rand::rngs::mock::StepRng;

/// O(n^2) DFT with the phase index reduced mod n before the trig call.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let idx = (j * k) % n;
                    let ang = -2.0 * PI * idx as f64 / n as f64;
                    v * Complex64::new(ang.cos(), ang.sin())
                })
                .sum()
        })
        .collect()
}

/// Orthonormal DCT-II as a direct cosine sum.
pub fn naive_dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                .sum();
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            s * scale
        })
        .collect()
}

pub fn max_abs_diff_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Fleiss kappa via explicit pairwise agreement counting.
///
/// Observed agreement is the fraction of agreeing ordered rater pairs per
/// subject; chance agreement is the probability that two ratings drawn with
/// replacement from the pooled ratings coincide.
pub fn kappa_by_pairs(rows: &[Vec<u32>]) -> f64 {
    let mut observed = 0.0;
    let mut pooled: Vec<String> = Vec::new();
    for row in rows {
        let labels: Vec<usize> = row
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c, k as usize))
            .collect();
        let n = labels.len();
        let mut agree = 0usize;
        for a in 0..n {
            for b in 0..n {
                if a != b && labels[a] == labels[b] {
                    agree += 1;
                }
            }
        }
        observed += agree as f64 / (n * (n - 1)) as f64;
        pooled.extend(labels.iter().map(|l| l.to_string()));
    }
    observed /= rows.len() as f64;
    let total = pooled.len() as f64;
    let mut chance = 0.0;
    for a in &pooled {
        for b in &pooled {
            if a == b {
                chance += 1.0;
            }
        }
    }
    chance /= total * total;
    if (observed - 1.0).abs() < 1e-15 {
        return 1.0;
    }
    (observed - chance) / (1.0 - chance)
}

/// Arithmetic mean and n-1 standard deviation, written out longhand.
pub fn sample_stats(values: &[f64]) -> (f64, f64) {
    let mut sum = 0.0;
    for v in values {
        sum += v;
    }
    let mean = sum / values.len() as f64;
    let mut ss = 0.0;
    for v in values {
        ss += (v - mean) * (v - mean);
    }
    (mean, (ss / (values.len() as f64 - 1.0)).sqrt())
}

/// Plain comma split; the tables under test never quote fields.
pub fn parse_table_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

/// Relative error with a floor on the denominator for near-zero gradients.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Mean cross-entropy of `net` on `(x, labels)` with dropout disabled.
pub fn loss_of(net: &mut Sequential<f64>, x: &Tensor<f64>, labels: &[usize]) -> f64 {
    let mut rng = StepRng::new(0, 1);
    let probs = net.forward(x, false, &mut rng).expect("forward");
    ops::cross_entropy(&probs, labels).expect("loss")
}

/// Compares backprop gradients of every parameter with central differences.
///
/// Returns the largest relative error, the number of entries checked and the
/// index path (tensor, element) of the worst entry.
pub fn gradient_check(
    net: &mut Sequential<f64>,
    x: &Tensor<f64>,
    labels: &[usize],
    h: f64,
    floor: f64,
) -> (f64, usize, (usize, usize)) {
    let mut rng = StepRng::new(0, 1);
    net.zero_grad();
    let probs = net.forward(x, true, &mut rng).expect("forward");
    net.backward_cross_entropy(&probs, labels).expect("backward");
    let analytic: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad().expect("grad").to_vec()).collect();
    let mut worst = (0.0, (0, 0));
    let mut count = 0;
    for (t, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = net.params()[t].data()[i];
            net.params_mut()[t].data_mut()[i] = orig + h;
            let up = loss_of(net, x, labels);
            net.params_mut()[t].data_mut()[i] = orig - h;
            let down = loss_of(net, x, labels);
            net.params_mut()[t].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let e = rel_err(a, numeric, floor);
            if e > worst.0 {
                worst = (e, (t, i));
            }
            count += 1;
        }
    }
    (worst.0, count, worst.1)
}
