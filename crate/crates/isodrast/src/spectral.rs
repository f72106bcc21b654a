//! Spectral calculus on the sample grid t_k = 2πk/N.
//!
//! All loop data lives on this uniform grid with N even. The trapezoid rule
//! on a periodic grid integrates every resolvable Fourier mode exactly, so
//! quadratures of band-limited integrands are exact to roundoff; that fact is
//! what lets most algebraic identities in this library hold at 1e-12 instead
//! of at some truncation order.
//!
//! Conventions: f(t) = Σ_m f̂(m) e^{imt} with f̂(m) = (1/N) Σ_k f(t_k) e^{-imt_k},
//! modes m ∈ [-N/2+1, N/2-1]. The Nyquist mode is dropped by differentiation
//! and by series evaluation; input band-limited below N/2 never populates it.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], forward: bool) {
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(buf.len())
        } else {
            p.plan_fft_inverse(buf.len())
        }
    });
    plan.process(buf);
}

/// Sample points t_k = 2πk/N.
pub fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// Periodic trapezoid rule: (2π/N) Σ_k f(t_k).
pub fn quadrature(samples: &[f64]) -> f64 {
    2.0 * PI * samples.iter().sum::<f64>() / samples.len() as f64
}

/// DFT coefficients in FFT index order (index j holds frequency j for
/// j < N/2 and frequency j - N above), normalized so that
/// f(t) = Σ_m f̂(m) e^{imt}.
pub fn fourier_coefficients(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, true);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Coefficient of e^{imt} for a signed mode index, with wraparound.
pub fn mode(coeffs: &[Complex64], m: i64) -> Complex64 {
    let n = coeffs.len() as i64;
    coeffs[(m.rem_euclid(n)) as usize]
}

/// Signed frequency carried by FFT index j, with the Nyquist bin mapped to 0
/// (it carries no recoverable sign information on a real grid).
fn signed_freq(j: usize, n: usize) -> i64 {
    if 2 * j < n {
        j as i64
    } else if 2 * j == n {
        0
    } else {
        j as i64 - n as i64
    }
}

/// d/dt by Fourier multiplier im; exact for band-limited samples.
pub fn spectral_derivative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, true);
    for (j, c) in buf.iter_mut().enumerate() {
        let m = signed_freq(j, n) as f64;
        if 2 * j == n {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, m);
        }
    }
    fft_in_place(&mut buf, false);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Primitive of the mean-removed part of `samples`: the unique periodic P
/// with P' = f - mean(f) and zero mean. The caller decides how to pin the
/// additive constant.
pub fn mean_removed_antiderivative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, true);
    for (j, c) in buf.iter_mut().enumerate() {
        let m = signed_freq(j, n);
        if m == 0 || 2 * j == n {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c /= Complex64::new(0.0, m as f64);
        }
    }
    fft_in_place(&mut buf, false);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Trigonometric interpolant of real grid samples, evaluable off-grid.
/// Reproduces the samples at grid points and, for data band-limited below
/// N/2, coincides with the underlying smooth function everywhere.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    /// (a_m, b_m) with f̂(m) = a_m + i b_m, for m = 0..N/2-1.
    half: Vec<(f64, f64)>,
}

impl TrigSeries {
    pub fn from_samples(samples: &[f64]) -> TrigSeries {
        let coeffs = fourier_coefficients(samples);
        let half = (0..samples.len() / 2)
            .map(|m| (coeffs[m].re, coeffs[m].im))
            .collect();
        TrigSeries { half }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.half[0].0;
        for (m, &(a, b)) in self.half.iter().enumerate().skip(1) {
            let (s, c) = (m as f64 * t).sin_cos();
            acc += 2.0 * (a * c - b * s);
        }
        acc
    }

    pub fn deriv_eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (m, &(a, b)) in self.half.iter().enumerate().skip(1) {
            let (s, c) = (m as f64 * t).sin_cos();
            acc += 2.0 * m as f64 * (-a * s - b * c);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sampled(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        grid(n).into_iter().map(f).collect()
    }

    #[test]
    fn quadrature_of_cos_squared_is_pi() {
        let q = quadrature(&sampled(64, |t| t.cos().powi(2)));
        assert!((q - PI).abs() < 1e-13);
    }

    #[test]
    fn derivative_of_sin_is_cos() {
        let d = spectral_derivative(&sampled(32, f64::sin));
        for (k, t) in grid(32).into_iter().enumerate() {
            assert!((d[k] - t.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_high_mode() {
        let d = spectral_derivative(&sampled(32, |t| (3.0 * t).cos()));
        for (k, t) in grid(32).into_iter().enumerate() {
            assert!((d[k] + 3.0 * (3.0 * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_inverts_derivative_on_mean_free_data() {
        let f = sampled(64, |t| t.sin() - 0.5 * (4.0 * t).cos());
        let p = mean_removed_antiderivative(&f);
        let back = spectral_derivative(&p);
        for k in 0..64 {
            assert!((back[k] - f[k]).abs() < 1e-12);
        }
        assert!(quadrature(&p).abs() < 1e-12);
    }

    #[test]
    fn cosine_coefficients_sit_at_plus_minus_one() {
        let c = fourier_coefficients(&sampled(16, f64::cos));
        assert!((mode(&c, 1) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((mode(&c, -1) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(mode(&c, 2).norm() < 1e-14);
    }

    #[test]
    fn trig_series_reproduces_grid_and_midpoints() {
        let f = |t: f64| 0.3 + (2.0 * t).sin() - 1.7 * (5.0 * t).cos();
        let s = TrigSeries::from_samples(&sampled(64, f));
        for t in grid(64) {
            assert!((s.eval(t) - f(t)).abs() < 1e-12);
            let mid = t + PI / 64.0;
            assert!((s.eval(mid) - f(mid)).abs() < 1e-12);
            let df = 2.0 * (2.0 * mid).cos() + 8.5 * (5.0 * mid).sin();
            assert!((s.deriv_eval(mid) - df).abs() < 1e-11);
        }
    }

    proptest! {
        /// Parseval on the grid: the quadrature of a product equals
        /// 2π Σ_m f̂(m) ĝ(-m) for arbitrary real samples.
        #[test]
        fn parseval_identity(raw in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let f: Vec<f64> = raw[..32].to_vec();
            let g: Vec<f64> = raw[32..].to_vec();
            let lhs = quadrature(&f.iter().zip(&g).map(|(a, b)| a * b).collect::<Vec<_>>());
            let cf = fourier_coefficients(&f);
            let cg = fourier_coefficients(&g);
            let mut rhs = Complex64::new(0.0, 0.0);
            let n = 32i64;
            for j in 0..n {
                rhs += cf[j as usize] * cg[((-j).rem_euclid(n)) as usize];
            }
            prop_assert!((lhs - 2.0 * PI * rhs.re).abs() < 1e-10);
            prop_assert!(rhs.im.abs() < 1e-10);
        }

        #[test]
        fn derivative_kills_quadrature(raw in proptest::collection::vec(-1.0f64..1.0, 48)) {
            let d = spectral_derivative(&raw);
            prop_assert!(quadrature(&d).abs() < 1e-10);
        }
    }
}
