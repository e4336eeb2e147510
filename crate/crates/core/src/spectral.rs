//! FFT helpers for periodic samples on the uniform grid `θ_i = 2πi/N`.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

/// Signed wavenumber of FFT bin `j` for a length-`n` transform.
fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Real Fourier coefficients `(a0, a_k, b_k)` for `k = 1..=k_max` of periodic samples,
/// so that `f(θ) ≈ a0 + Σ a_k cos kθ + b_k sin kθ`.
pub fn real_modes(samples: &[f64], k_max: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    let scale = 1.0 / n as f64;
    let a0 = buf[0].re * scale;
    let mut cos = Vec::with_capacity(k_max);
    let mut sin = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k < n / 2 {
            cos.push(2.0 * buf[k].re * scale);
            sin.push(-2.0 * buf[k].im * scale);
        } else if k == n / 2 && n % 2 == 0 {
            cos.push(buf[k].re * scale);
            sin.push(0.0);
        } else {
            cos.push(0.0);
            sin.push(0.0);
        }
    }
    (a0, cos, sin)
}

/// Samples of `d^order/dθ^order` of the trigonometric series `a0 + Σ a_k cos kθ + b_k sin kθ`
/// on `n` uniform nodes. Requires `n > 2K`.
pub fn synthesize(a0: f64, cos: &[f64], sin: &[f64], n: usize, order: u32) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    if order == 0 {
        buf[0] = Complex64::new(a0 * n as f64, 0.0);
    }
    let half = n as f64 / 2.0;
    let k_max = cos.len().max(sin.len());
    for k in 1..=k_max {
        assert!(2 * k < n, "synthesis grid too coarse for mode {k}");
        let a = cos.get(k - 1).copied().unwrap_or(0.0);
        let b = sin.get(k - 1).copied().unwrap_or(0.0);
        // c_k = (a - i b)/2 scaled by N, times (ik)^order
        let c = Complex64::new(a, -b) * half * Complex64::new(0.0, k as f64).powu(order);
        buf[k] = c;
        buf[n - k] = c.conj();
    }
    fft_in_place(&mut buf, true);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Spectral derivative of real periodic samples (Nyquist mode dropped).
pub fn differentiate(samples: &[f64]) -> Vec<f64> {
    let complex: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    differentiate_complex(&complex).into_iter().map(|c| c.re).collect()
}

/// Spectral derivative of complex periodic samples (Nyquist mode dropped).
pub fn differentiate_complex(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    fft_in_place(&mut buf, false);
    for (j, c) in buf.iter_mut().enumerate() {
        let k = wavenumber(j, n);
        if n % 2 == 0 && j == n / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, k as f64);
        }
    }
    fft_in_place(&mut buf, true);
    buf.iter().map(|c| c / n as f64).collect()
}

/// Dense first-derivative matrix on `n` (even) periodic nodes; equivalent to
/// [`differentiate`] applied column by column.
pub fn derivative_matrix(n: usize) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * d * h).tan()
        }
    })
}

pub fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}
