//! Sampled signals and ground-truth component descriptions.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{AssoError, Result};

/// Scalar sample type accepted by the transforms.
pub trait Sample: Copy + Send + Sync + fmt::Debug + 'static {
    fn to_complex(self) -> Complex64;
    fn is_finite_sample(self) -> bool;
    fn zero() -> Self;
}

impl Sample for f64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn is_finite_sample(self) -> bool {
        self.is_finite()
    }
    fn zero() -> Self {
        0.0
    }
}

impl Sample for Complex64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
    #[inline]
    fn is_finite_sample(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

/// Uniformly sampled time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal<T: Sample = f64> {
    samples: Vec<T>,
    sample_rate: f64,
    start_time: f64,
}

impl<T: Sample> SampledSignal<T> {
    pub fn new(samples: Vec<T>, sample_rate: f64, start_time: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(AssoError::InvalidSignal(format!(
                "sample rate must be > 0, got {sample_rate}"
            )));
        }
        if !start_time.is_finite() {
            return Err(AssoError::InvalidSignal("start time must be finite".into()));
        }
        if samples.len() < 2 {
            return Err(AssoError::InvalidSignal(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite_sample()) {
            return Err(AssoError::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
            start_time,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    /// Sample spacing in seconds.
    pub fn dt(&self) -> f64 {
        self.sample_rate.recip()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time_at(i)).collect()
    }

    /// Same grid, new samples.
    pub fn with_samples<U: Sample>(&self, samples: Vec<U>) -> Result<SampledSignal<U>> {
        SampledSignal::new(samples, self.sample_rate, self.start_time)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Analytic description of one AM-FM mode `A(t) cos(2π φ(t))`.
#[derive(Clone)]
pub struct GroundTruthComponent {
    pub amplitude: ScalarFn,
    pub phase: ScalarFn,
    pub inst_freq: ScalarFn,
    pub chirp_rate: ScalarFn,
}

impl fmt::Debug for GroundTruthComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroundTruthComponent").finish_non_exhaustive()
    }
}

impl GroundTruthComponent {
    pub fn new(
        amplitude: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phase: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inst_freq: impl Fn(f64) -> f64 + Send + Sync + 'static,
        chirp_rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            amplitude: Arc::new(amplitude),
            phase: Arc::new(phase),
            inst_freq: Arc::new(inst_freq),
            chirp_rate: Arc::new(chirp_rate),
        }
    }

    /// Linear chirp `A cos(2π(ct + rt²/2))`.
    pub fn linear_chirp(amplitude: f64, c: f64, r: f64) -> Self {
        Self::new(
            move |_| amplitude,
            move |t| c * t + 0.5 * r * t * t,
            move |t| c + r * t,
            move |_| r,
        )
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.amplitude)(t) * (std::f64::consts::TAU * (self.phase)(t)).cos()
    }

    pub fn sample(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.value(t)).collect()
    }
}

/// Essential-support threshold and discrete truncation of the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub tau0: f64,
    pub truncation_radius_in_sigmas: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            tau0: 0.1,
            truncation_radius_in_sigmas: 5.0,
        }
    }
}

impl WindowSpec {
    pub fn new(tau0: f64, truncation_radius_in_sigmas: f64) -> Result<Self> {
        let spec = Self {
            tau0,
            truncation_radius_in_sigmas,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0 < 1.0) {
            return Err(AssoError::param("tau0", format!("must lie in (0, 1), got {}", self.tau0)));
        }
        if !(self.truncation_radius_in_sigmas.is_finite() && self.truncation_radius_in_sigmas > 0.0) {
            return Err(AssoError::param(
                "truncation_radius_in_sigmas",
                format!("must be > 0, got {}", self.truncation_radius_in_sigmas),
            ));
        }
        Ok(())
    }

    /// Half-length in samples of the truncated window for `sigma` at `sample_rate`.
    pub fn half_len(&self, sigma: f64, sample_rate: f64) -> usize {
        (self.truncation_radius_in_sigmas * sigma * sample_rate).floor() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_signals() {
        assert!(SampledSignal::new(vec![1.0], 10.0, 0.0).is_err());
        assert!(SampledSignal::new(vec![1.0, 2.0], 0.0, 0.0).is_err());
        assert!(SampledSignal::new(vec![1.0, f64::NAN], 1.0, 0.0).is_err());
        assert!(SampledSignal::new(vec![Complex64::new(0.0, f64::INFINITY); 3], 1.0, 0.0).is_err());
        let s = SampledSignal::new(vec![0.0; 4], 2.0, 1.0).unwrap();
        assert_eq!(s.time_at(3), 2.5);
        assert_eq!(s.duration(), 2.0);
    }

    #[test]
    fn window_spec_validation() {
        assert!(WindowSpec::new(0.0, 5.0).is_err());
        assert!(WindowSpec::new(1.0, 5.0).is_err());
        assert!(WindowSpec::new(0.1, 0.0).is_err());
        assert_eq!(WindowSpec::default().half_len(0.02, 512.0), 51);
    }

    #[test]
    fn linear_chirp_truth() {
        let c = GroundTruthComponent::linear_chirp(1.0, 17.0, 37.0);
        assert_eq!(c.value(0.0), 1.0);
        assert_eq!((c.chirp_rate)(0.3), 37.0);
        assert_eq!((c.inst_freq)(1.0), 54.0);
    }
}
