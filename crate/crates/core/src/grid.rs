//! Uniform periodic time window with its spectral frequencies.
//!
//! Transform convention (fixed once, asserted by the eigenfunction test
//! below): the forward transform uses the kernel `exp(-i 2π j k / n)`, so a
//! sampled `exp(+i ω_m t)` with `ω_m = grid.omega[m]` lands in bin `m`.
//! Differentiation in time multiplies bin `k` by `i ω_k`, the second
//! derivative by `-ω_k²`, and the dispersion half of the soliton equation
//! advances bin `k` by the phase `exp(-i ω_k² dz / 2)` over a distance `dz`.
//!
//! The inverse transform is normalized by `1/n`, so `inverse(forward(u)) = u`
//! to rounding. With the unnormalized forward spectrum `û`, Parseval reads
//! `Σ_j |u_j|² dt = (1/n) Σ_k |û_k|² dt`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Error;
use crate::Result;

/// Smallest admissible sample count.
pub const MIN_SAMPLES: usize = 64;

/// Uniform periodic discretization of the retarded-time window
/// `[-t_half_span, +t_half_span)`.
///
/// Immutable after construction; shareable across threads. Transform scratch
/// is owned by [`FftScratch`], one per caller.
pub struct TimeGrid {
    n: usize,
    t_half_span: f64,
    dt: f64,
    omega: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TimeGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeGrid")
            .field("n", &self.n)
            .field("t_half_span", &self.t_half_span)
            .field("dt", &self.dt)
            .finish()
    }
}

impl TimeGrid {
    /// Build a grid with `n` samples (power of two, ≥ 64) over
    /// `[-t_half_span, +t_half_span)`.
    pub fn new(n: usize, t_half_span: f64) -> Result<Arc<Self>> {
        if !n.is_power_of_two() || n < MIN_SAMPLES {
            return Err(Error::InvalidGrid(format!(
                "sample count must be a power of two >= {MIN_SAMPLES}, got {n}"
            )));
        }
        if !(t_half_span > 0.0) || !t_half_span.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "t_half_span must be positive and finite, got {t_half_span}"
            )));
        }
        // n is a power of two, so dt = 2 span / n and dt * n = 2 span are exact.
        let dt = 2.0 * t_half_span / n as f64;
        let scale = PI / t_half_span;
        let omega = (0..n)
            .map(|k| {
                let k_signed = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
                scale * k_signed as f64
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Arc::new(TimeGrid {
            n,
            t_half_span,
            dt,
            omega,
            forward,
            inverse,
        }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_half_span(&self) -> f64 {
        self.t_half_span
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Sample position `t_j = -t_half_span + j dt`.
    pub fn t(&self, j: usize) -> f64 {
        -self.t_half_span + j as f64 * self.dt
    }

    /// Angular frequency of spectral bin `k` (Nyquist bin is the single
    /// unpaired positive frequency).
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Index of the sample nearest to time `t`.
    pub fn index_of_t(&self, t: f64) -> usize {
        let j = ((t + self.t_half_span) / self.dt).round();
        (j.max(0.0) as usize).min(self.n - 1)
    }

    /// Two grids are compatible when they have the same discretization.
    pub fn same_discretization(&self, other: &TimeGrid) -> bool {
        self.n == other.n && self.t_half_span == other.t_half_span
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut FftScratch) {
        debug_assert_eq!(buf.len(), self.n);
        scratch.ensure(self.forward.get_inplace_scratch_len());
        self.forward.process_with_scratch(buf, &mut scratch.0);
    }

    /// Inverse transform including the `1/n` normalization, in place.
    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut FftScratch) {
        debug_assert_eq!(buf.len(), self.n);
        scratch.ensure(self.inverse.get_inplace_scratch_len());
        self.inverse.process_with_scratch(buf, &mut scratch.0);
        let inv_n = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= inv_n;
        }
    }

    /// Inverse transform without the `1/n` normalization; callers fold the
    /// scale into an adjacent pointwise table.
    pub fn inverse_unnormalized(&self, buf: &mut [Complex64], scratch: &mut FftScratch) {
        debug_assert_eq!(buf.len(), self.n);
        scratch.ensure(self.inverse.get_inplace_scratch_len());
        self.inverse.process_with_scratch(buf, &mut scratch.0);
    }

    /// Spectral second derivative: transform, multiply bin `k` by `-ω_k²`,
    /// transform back.
    pub fn second_derivative(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut buf = samples.to_vec();
        let mut scratch = FftScratch::default();
        self.forward(&mut buf, &mut scratch);
        for (v, &w) in buf.iter_mut().zip(&self.omega) {
            *v *= -w * w;
        }
        self.inverse(&mut buf, &mut scratch);
        buf
    }

    /// Dispersion phase table `exp(-i ω_k² dz / 2)` for a substep of length `dz`.
    pub fn dispersion_phases(&self, dz: f64) -> Vec<Complex64> {
        self.omega
            .iter()
            .map(|&w| Complex64::from_polar(1.0, -0.5 * w * w * dz))
            .collect()
    }
}

/// Per-caller FFT scratch buffer; grows on demand and is reused across calls.
#[derive(Default)]
pub struct FftScratch(Vec<Complex64>);

impl FftScratch {
    fn ensure(&mut self, len: usize) {
        if self.0.len() < len {
            self.0.resize(len, Complex64::new(0.0, 0.0));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn make_grid_basic_spacing() {
        let g = TimeGrid::new(256, 16.0).unwrap();
        assert_eq!(g.dt(), 0.125);
        assert_eq!(g.t(0), -16.0);
        let g = TimeGrid::new(64, 8.0).unwrap();
        assert_eq!(g.dt(), 0.25);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(TimeGrid::new(100, 8.0).is_err());
        assert!(TimeGrid::new(32, 8.0).is_err());
        assert!(TimeGrid::new(128, 0.0).is_err());
        assert!(TimeGrid::new(128, -1.0).is_err());
        assert!(TimeGrid::new(128, f64::NAN).is_err());
    }

    #[test]
    fn grid_identities() {
        let g = TimeGrid::new(128, 10.0).unwrap();
        // dt * n == 2 * span exactly (power-of-two division).
        assert_eq!(g.dt() * g.len() as f64, 2.0 * g.t_half_span());
        // omega symmetric about zero except the unpaired Nyquist bin.
        let n = g.len();
        for k in 1..n / 2 {
            assert_eq!(g.omega()[k], -g.omega()[n - k]);
        }
        assert_eq!(g.omega()[0], 0.0);
        assert!(g.omega()[n / 2] > 0.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = TimeGrid::new(256, 12.0).unwrap();
        let orig: Vec<Complex64> = (0..g.len())
            .map(|j| {
                let t = g.t(j);
                Complex64::new((0.3 * t).sin(), (0.11 * t).cos()) * (-0.05 * t * t).exp()
            })
            .collect();
        let mut buf = orig.clone();
        let mut scratch = FftScratch::default();
        g.forward(&mut buf, &mut scratch);
        g.inverse(&mut buf, &mut scratch);
        assert!(max_abs_diff(&orig, &buf) < 1e-12);
    }

    #[test]
    fn parseval_holds() {
        let g = TimeGrid::new(512, 20.0).unwrap();
        let u: Vec<Complex64> = (0..g.len())
            .map(|j| {
                let t = g.t(j);
                Complex64::new(1.0 / t.cosh(), 0.2 * (-t * t / 8.0).exp())
            })
            .collect();
        let time_norm: f64 = u.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dt();
        let mut buf = u.clone();
        let mut scratch = FftScratch::default();
        g.forward(&mut buf, &mut scratch);
        let spec_norm: f64 =
            buf.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dt() / g.len() as f64;
        assert!(
            ((time_norm - spec_norm) / time_norm).abs() < 1e-10,
            "time {time_norm} vs spectral {spec_norm}"
        );
    }

    #[test]
    fn second_derivative_of_constant_vanishes() {
        let g = TimeGrid::new(128, 8.0).unwrap();
        let c = vec![Complex64::new(0.7, -0.3); g.len()];
        let d = g.second_derivative(&c);
        assert!(d.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn second_derivative_eigenfunction() {
        // exp(i ω_m t) is an exact eigenfunction with eigenvalue -ω_m².
        let g = TimeGrid::new(256, 16.0).unwrap();
        let m = 7;
        let wm = g.omega()[m];
        let u: Vec<Complex64> = (0..g.len())
            .map(|j| Complex64::from_polar(1.0, wm * g.t(j)))
            .collect();
        let d = g.second_derivative(&u);
        let expect: Vec<Complex64> = u.iter().map(|v| v * (-wm * wm)).collect();
        assert!(max_abs_diff(&d, &expect) < 1e-10);
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        // Oracle: centered finite differences with step dt on sech(t)
        // (five-point stencil; its truncation error at this dt sits below
        // the asserted bound, unlike the three-point one).
        let g = TimeGrid::new(512, 20.0).unwrap();
        let n = g.len();
        let u: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(1.0 / g.t(j).cosh(), 0.0))
            .collect();
        let d = g.second_derivative(&u);
        let dt2 = g.dt() * g.dt();
        let mut worst = 0.0f64;
        for j in 0..n {
            let m2 = u[(j + n - 2) % n];
            let m1 = u[(j + n - 1) % n];
            let p1 = u[(j + 1) % n];
            let p2 = u[(j + 2) % n];
            let fd = (-p2 + 16.0 * p1 - 30.0 * u[j] + 16.0 * m1 - m2) / (12.0 * dt2);
            worst = worst.max((d[j] - fd).norm());
        }
        assert!(worst < 1e-4, "max |spectral - FD| = {worst}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_field(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
                .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(8))]

            #[test]
            fn round_trip_and_parseval(samples in arb_field(128)) {
                let g = TimeGrid::new(128, 10.0).unwrap();
                let mut buf = samples.clone();
                let mut scratch = FftScratch::default();
                g.forward(&mut buf, &mut scratch);
                let spec_norm: f64 =
                    buf.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dt() / g.len() as f64;
                g.inverse(&mut buf, &mut scratch);
                let worst = samples
                    .iter()
                    .zip(&buf)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                prop_assert!(worst < 1e-12);
                let time_norm: f64 =
                    samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dt();
                if time_norm > 1e-12 {
                    prop_assert!(((time_norm - spec_norm) / time_norm).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn second_derivative_is_linear() {
        let g = TimeGrid::new(128, 9.0).unwrap();
        let a = Complex64::new(0.8, -1.3);
        let b = Complex64::new(-0.2, 0.45);
        let u: Vec<Complex64> = (0..g.len())
            .map(|j| Complex64::new((0.5 * g.t(j)).sin(), (-g.t(j).abs() / 3.0).exp()))
            .collect();
        let v: Vec<Complex64> = (0..g.len())
            .map(|j| Complex64::new((0.25 * g.t(j)).cos(), 0.1 * g.t(j)))
            .collect();
        let combo: Vec<Complex64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let d_combo = g.second_derivative(&combo);
        let du = g.second_derivative(&u);
        let dv = g.second_derivative(&v);
        let lin: Vec<Complex64> = du.iter().zip(&dv).map(|(x, y)| a * x + b * y).collect();
        let scale: f64 = d_combo.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max_abs_diff(&d_combo, &lin) < 1e-12 * scale.max(1.0));
    }
}
