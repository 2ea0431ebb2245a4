//! Sampled classical field on a [`TimeGrid`].

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Error;
use crate::grid::TimeGrid;
use crate::Result;

/// A classical envelope `U` (or `V`) in soliton-normalized units.
#[derive(Debug, Clone)]
pub struct ComplexEnvelope {
    grid: Arc<TimeGrid>,
    samples: Vec<Complex64>,
}

impl ComplexEnvelope {
    /// Wrap raw samples; every sample must be finite and the length must
    /// match the grid.
    pub fn from_samples(grid: Arc<TimeGrid>, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples on a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        if samples.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "field contains non-finite samples".into(),
            ));
        }
        Ok(ComplexEnvelope { grid, samples })
    }

    /// Evaluate `f(t)` at every grid point.
    pub fn from_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = (0..grid.len()).map(|j| f(grid.t(j))).collect();
        Self::from_samples(grid, samples)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Photon number `Σ |u_j|² dt`.
    pub fn photon_number(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dt()
    }

    /// Largest `|u_j|²` on the grid.
    pub fn peak_intensity(&self) -> f64 {
        self.samples
            .iter()
            .map(|v| v.norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Spectral second derivative of the field.
    pub fn second_derivative(&self) -> Self {
        ComplexEnvelope {
            grid: self.grid.clone(),
            samples: self.grid.second_derivative(&self.samples),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_samples() {
        let g = TimeGrid::new(64, 8.0).unwrap();
        let mut s = vec![Complex64::new(0.0, 0.0); 64];
        s[3] = Complex64::new(f64::NAN, 0.0);
        assert!(ComplexEnvelope::from_samples(g, s).is_err());
    }

    #[test]
    fn rejects_wrong_length() {
        let g = TimeGrid::new(64, 8.0).unwrap();
        let s = vec![Complex64::new(0.0, 0.0); 65];
        assert!(ComplexEnvelope::from_samples(g, s).is_err());
    }

    #[test]
    fn sech_photon_number_is_two() {
        // ∫ sech²(t) dt = 2.
        let g = TimeGrid::new(1024, 20.0).unwrap();
        let u = ComplexEnvelope::from_fn(g, |t| Complex64::new(1.0 / t.cosh(), 0.0)).unwrap();
        assert!((u.photon_number() - 2.0).abs() < 1e-8);
    }
}
