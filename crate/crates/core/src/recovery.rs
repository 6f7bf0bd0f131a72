//! Component reconstruction from on-ridge STFT coefficients.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{AssoError, Result};
use crate::gauss::branch_sqrt;
use crate::ridge::{ChirpRateTrack, Ridge};
use crate::stft::{SigmaTrack, TFRepresentation};

/// One extracted component over its ridge support.
#[derive(Debug, Clone)]
pub struct RecoveredComponent {
    pub samples: Vec<f64>,
    pub ridge: Ridge,
    pub chirp_track: ChirpRateTrack,
    pub sigma_track_used: SigmaTrack,
}

impl RecoveredComponent {
    pub fn new(samples: Vec<f64>, ridge: Ridge, chirp_track: ChirpRateTrack, sigma: SigmaTrack) -> Result<Self> {
        let n = ridge.len();
        if samples.len() != n || chirp_track.support() != ridge.support() || sigma.len() != n {
            return Err(AssoError::param("component", "samples and tracks must share the ridge support"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(AssoError::param("component", "samples must be finite"));
        }
        Ok(Self {
            samples,
            ridge,
            chirp_track,
            sigma_track_used: sigma,
        })
    }

    /// Component on the full record, zero outside its support.
    pub fn zero_extended(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        let s = self.ridge.support();
        out[s].copy_from_slice(&self.samples);
        out
    }
}

fn on_ridge(tf: &TFRepresentation, ridge: &Ridge) -> Result<Vec<Complex64>> {
    let first = tf.first_frame();
    ridge
        .support()
        .map(|f| {
            let n = f
                .checked_sub(first)
                .filter(|&n| n < tf.n_frames())
                .ok_or_else(|| AssoError::param("ridge", format!("frame {f} outside transform")))?;
            let b = ridge.bin_at(f);
            if b >= tf.n_bins() {
                return Err(AssoError::param("ridge", format!("bin {b} outside grid")));
            }
            Ok(tf.get(n, b))
        })
        .collect()
}

fn check_tracks(ridge: &Ridge, chirp: &ChirpRateTrack, sigma: &SigmaTrack) -> Result<()> {
    if chirp.support() != ridge.support() || sigma.len() != ridge.len() {
        return Err(AssoError::param("tracks", "chirp and sigma tracks must share the ridge support"));
    }
    Ok(())
}

/// `f̌(t) = 2 Re V(t, η̌(t))`.
pub fn recover_sinusoidal(tf: &TFRepresentation, ridge: &Ridge) -> Result<Vec<f64>> {
    Ok(on_ridge(tf, ridge)?.iter().map(|v| 2.0 * v.re).collect())
}

/// `V(t, η̌(t))` without the real projection, for complex signals.
pub fn recover_sinusoidal_complex(tf: &TFRepresentation, ridge: &Ridge) -> Result<Vec<Complex64>> {
    on_ridge(tf, ridge)
}

/// `x̌(t) = √(1 - j2πσ(t)²ř(t)) V(t, η̌(t))`.
pub fn recover_complex(
    tf: &TFRepresentation,
    ridge: &Ridge,
    chirp: &ChirpRateTrack,
    sigma: &SigmaTrack,
) -> Result<Vec<Complex64>> {
    check_tracks(ridge, chirp, sigma)?;
    on_ridge(tf, ridge)?
        .into_iter()
        .zip(chirp.values().iter().zip(sigma.values()))
        .map(|(v, (&r, &s))| Ok(branch_sqrt(Complex64::new(1.0, -2.0 * PI * s * s * r))? * v))
        .collect()
}

/// `x̌(t) = 2 Re{√(1 - j2πσ(t)²ř(t)) V(t, η̌(t))}`.
pub fn recover_chirp(
    tf: &TFRepresentation,
    ridge: &Ridge,
    chirp: &ChirpRateTrack,
    sigma: &SigmaTrack,
) -> Result<Vec<f64>> {
    Ok(recover_complex(tf, ridge, chirp, sigma)?
        .into_iter()
        .map(|v| 2.0 * v.re)
        .collect())
}

/// Upper bound on the sinusoidal-model error for a linear chirp of rate `r`
/// and amplitude `A` seen through a window of width `sigma`.
pub fn error_bound_sinusoidal(amplitude: f64, sigma: f64, r: f64) -> f64 {
    let a = 2.0 * PI * sigma * sigma * r.abs();
    let q = (1.0 + a * a).sqrt();
    a * amplitude / (q.sqrt() * (1.0 + q).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::complex_chirp_stft_closed_form;
    use crate::ridge::{detect_ridge, global_peak};
    use crate::signal::{SampledSignal, WindowSpec};
    use crate::stft::{adaptive_stft, FrequencyGrid};

    fn plane(x: Vec<f64>, fs: f64, sigma: f64) -> TFRepresentation {
        let n = x.len();
        let x = SampledSignal::new(x, fs, 0.0).unwrap();
        let grid = FrequencyGrid::for_sigma(fs, sigma, &WindowSpec::default()).unwrap();
        adaptive_stft(&x, &SigmaTrack::constant(sigma, n).unwrap(), &grid).unwrap()
    }

    fn ridge_of(tf: &TFRepresentation) -> Ridge {
        let p = global_peak(tf).unwrap();
        detect_ridge(tf, (p.frame, p.eta), 4.0, 0.05 * p.magnitude).unwrap()
    }

    #[test]
    fn bound_values() {
        assert_eq!(error_bound_sinusoidal(1.0, 0.02, 0.0), 0.0);
        let b = error_bound_sinusoidal(1.0, 0.02, 37.0);
        assert!((b - 0.0655).abs() < 5e-4, "{b}");
        for &(s, r) in &[(0.02, 37.0), (1.0, 0.3), (0.5, -20.0), (3.0, 100.0)] {
            assert!(error_bound_sinusoidal(2.0, s, r) <= 2.0 * PI * s * s * f64::abs(r) * 2.0);
        }
    }

    #[test]
    fn tone_amplitude_recovered() {
        let fs = 400.0;
        let a = 1.7;
        let x: Vec<f64> = (0..800).map(|i| a * (2.0 * PI * 50.0 * i as f64 / fs).cos()).collect();
        // 50 Hz sits exactly on a bin of the default grid
        let tf = plane(x.clone(), fs, 0.05);
        let ridge = ridge_of(&tf);
        let rec = recover_sinusoidal(&tf, &ridge).unwrap();
        for f in 300..500 {
            assert!((rec[f - ridge.first_frame()] - x[f]).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_plane_gives_zeros() {
        let tf = plane(vec![0.0; 100], 100.0, 0.05);
        let ridge = Ridge::new(10, vec![5.0; 20], vec![3; 20], vec![0.0; 20]).unwrap();
        assert!(recover_sinusoidal(&tf, &ridge).unwrap().iter().all(|&v| v == 0.0));
        let chirp = ChirpRateTrack::zeros(ridge.support());
        let sig = SigmaTrack::constant(0.05, 20).unwrap();
        assert!(recover_complex(&tf, &ridge, &chirp, &sig).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn zero_rate_matches_sinusoidal() {
        let fs = 200.0;
        let x: Vec<f64> = (0..400)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (30.0 * t + 10.0 * t * t)).cos()
            })
            .collect();
        let tf = plane(x, fs, 0.05);
        let ridge = ridge_of(&tf);
        let chirp = ChirpRateTrack::zeros(ridge.support());
        let sig = SigmaTrack::constant(0.05, ridge.len()).unwrap();
        let a = recover_chirp(&tf, &ridge, &chirp, &sig).unwrap();
        let b = recover_sinusoidal(&tf, &ridge).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-15 * v.abs().max(1.0));
        }
    }

    #[test]
    fn chirp_converges_to_sinusoidal_as_rate_vanishes() {
        let fs = 200.0;
        let x: Vec<f64> = (0..400).map(|i| (2.0 * PI * 30.0 * i as f64 / fs).cos()).collect();
        let tf = plane(x, fs, 0.05);
        let ridge = ridge_of(&tf);
        let sig = SigmaTrack::constant(0.05, ridge.len()).unwrap();
        let base = recover_sinusoidal(&tf, &ridge).unwrap();
        let mut prev = f64::INFINITY;
        for &r in &[10.0, 1.0, 0.1, 0.01] {
            let chirp = ChirpRateTrack::new(ridge.first_frame(), vec![r; ridge.len()]).unwrap();
            let v = recover_chirp(&tf, &ridge, &chirp, &sig).unwrap();
            let d = v.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn complex_exponential_recovered() {
        let fs = 200.0;
        let grid = FrequencyGrid::for_sigma(fs, 0.05, &WindowSpec::default()).unwrap();
        let a = 0.9;
        let c = grid.bin(grid.nearest(40.0));
        let x: Vec<Complex64> = (0..400)
            .map(|i| Complex64::from_polar(a, 2.0 * PI * c * i as f64 / fs))
            .collect();
        let sig = SigmaTrack::constant(0.05, 400).unwrap();
        let xs = SampledSignal::new(x.clone(), fs, 0.0).unwrap();
        let tf = adaptive_stft(&xs, &sig, &grid).unwrap();
        let ridge = ridge_of(&tf);
        let chirp = ChirpRateTrack::zeros(ridge.support());
        let s = SigmaTrack::constant(0.05, ridge.len()).unwrap();
        let rec = recover_complex(&tf, &ridge, &chirp, &s).unwrap();
        for f in 100..300 {
            assert!((rec[f - ridge.first_frame()] - x[f]).norm() < 1e-3);
            // agreement with the analytic closed form on the ridge
            let t = f as f64 / fs;
            let v = complex_chirp_stft_closed_form(a, c, 0.0, t, ridge.eta_at(f), 0.05).unwrap();
            assert!((v - tf.get(f, ridge.bin_at(f))).norm() < 1e-6);
        }
    }

    #[test]
    fn real_part_consistency() {
        let fs = 200.0;
        let x: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (30.0 * t + 20.0 * t * t)).cos()
            })
            .collect();
        let tf = plane(x, fs, 0.05);
        let ridge = ridge_of(&tf);
        let chirp = ChirpRateTrack::new(ridge.first_frame(), vec![40.0; ridge.len()]).unwrap();
        let sig = SigmaTrack::constant(0.05, ridge.len()).unwrap();
        let c = recover_complex(&tf, &ridge, &chirp, &sig).unwrap();
        let r = recover_chirp(&tf, &ridge, &chirp, &sig).unwrap();
        for (u, v) in c.iter().zip(&r) {
            assert_eq!(2.0 * u.re, *v);
        }
    }

    #[test]
    fn amplitude_homogeneity() {
        let fs = 200.0;
        let base: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (30.0 * t + 20.0 * t * t)).cos()
            })
            .collect();
        let tf1 = plane(base.clone(), fs, 0.05);
        let ridge = ridge_of(&tf1);
        let tf3 = plane(base.iter().map(|v| 3.0 * v).collect(), fs, 0.05);
        let chirp = ChirpRateTrack::new(ridge.first_frame(), vec![40.0; ridge.len()]).unwrap();
        let sig = SigmaTrack::constant(0.05, ridge.len()).unwrap();
        let a = recover_chirp(&tf1, &ridge, &chirp, &sig).unwrap();
        let b = recover_chirp(&tf3, &ridge, &chirp, &sig).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((3.0 * u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}
