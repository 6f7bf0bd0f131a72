//! Ridge seeding, greedy tracking and chirp-rate estimation.

use std::ops::Range;

use num_complex::Complex64;

use crate::config::Lambda0Convention;
use crate::error::{AssoError, Result};
use crate::stft::{FrequencyGrid, TFRepresentation};

/// Largest `|V|` in the plane, restricted to `η > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Absolute frame (sample) index.
    pub frame: usize,
    pub bin: usize,
    pub eta: f64,
    pub magnitude: f64,
}

/// Per-frame frequency track of one component over a contiguous support.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    first_frame: usize,
    eta: Vec<f64>,
    bins: Vec<usize>,
    magnitude: Vec<f64>,
}

impl Ridge {
    pub fn new(first_frame: usize, eta: Vec<f64>, bins: Vec<usize>, magnitude: Vec<f64>) -> Result<Self> {
        if eta.is_empty() || eta.len() != bins.len() || eta.len() != magnitude.len() {
            return Err(AssoError::param("ridge", "tracks must be non-empty and equally long"));
        }
        if magnitude.iter().any(|m| !(*m >= 0.0)) || eta.iter().any(|e| !e.is_finite()) {
            return Err(AssoError::param("ridge", "magnitudes must be >= 0 and frequencies finite"));
        }
        Ok(Self {
            first_frame,
            eta,
            bins,
            magnitude,
        })
    }

    /// Absolute frame indices covered.
    pub fn support(&self) -> Range<usize> {
        self.first_frame..self.first_frame + self.eta.len()
    }

    pub fn first_frame(&self) -> usize {
        self.first_frame
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.support().contains(&frame)
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn eta_at(&self, frame: usize) -> f64 {
        self.eta[frame - self.first_frame]
    }

    pub fn bin_at(&self, frame: usize) -> usize {
        self.bins[frame - self.first_frame]
    }

    pub fn mean_eta(&self) -> f64 {
        self.eta.iter().sum::<f64>() / self.eta.len() as f64
    }

    /// Ridge with every frequency shifted by `offset(frame)`.
    pub fn map_eta(&self, offset: impl Fn(usize, f64) -> f64) -> Ridge {
        let eta = self
            .eta
            .iter()
            .enumerate()
            .map(|(i, &e)| offset(self.first_frame + i, e))
            .collect();
        Ridge {
            eta,
            ..self.clone()
        }
    }
}

/// Chirp-rate estimate `ř` in Hz/s per frame of a ridge support.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpRateTrack {
    first_frame: usize,
    rate: Vec<f64>,
    /// Frames where the fit had too few points and fell back to zero.
    fallbacks: usize,
}

impl ChirpRateTrack {
    pub fn new(first_frame: usize, rate: Vec<f64>) -> Result<Self> {
        if rate.iter().any(|r| !r.is_finite()) {
            return Err(AssoError::param("chirp rate", "values must be finite"));
        }
        Ok(Self {
            first_frame,
            rate,
            fallbacks: 0,
        })
    }

    pub fn zeros(support: Range<usize>) -> Self {
        Self {
            first_frame: support.start,
            rate: vec![0.0; support.len()],
            fallbacks: 0,
        }
    }

    pub fn support(&self) -> Range<usize> {
        self.first_frame..self.first_frame + self.rate.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.rate
    }

    pub fn at(&self, frame: usize) -> f64 {
        self.rate[frame - self.first_frame]
    }

    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn with_values(&self, rate: Vec<f64>) -> Self {
        assert_eq!(rate.len(), self.rate.len());
        Self {
            rate,
            ..self.clone()
        }
    }
}

/// Ridge-search half band in Hz and chirp-fit half width in seconds for a
/// window of width `sigma`.
pub fn lambda0(convention: Lambda0Convention, sigma: f64, tau0: f64) -> (f64, f64) {
    let k = (2.0 * tau0.ln().abs()).sqrt();
    match convention {
        Lambda0Convention::Dimensional => (k / (std::f64::consts::TAU * sigma), sigma * k),
        Lambda0Convention::Literal => {
            let v = std::f64::consts::TAU * sigma * k;
            (v, v)
        }
    }
}

/// Fit half width in samples: the window's time-domain essential support,
/// floored at 5 samples.
pub fn fit_halfwidth_samples(convention: Lambda0Convention, sigma: f64, tau0: f64, sample_rate: f64) -> usize {
    let (_, secs) = lambda0(convention, sigma, tau0);
    ((secs * sample_rate).round() as usize).max(5)
}

/// Strongest coefficient over all frames and positive-frequency bins. Ties go
/// to the lowest frame, then the lowest bin.
pub fn global_peak(tf: &TFRepresentation) -> Result<Peak> {
    let grid = tf.grid();
    let first_pos = (0..grid.len()).find(|&i| grid.bin(i) > 0.0).ok_or(AssoError::NoPeak)?;
    let mut best: Option<Peak> = None;
    for (n, row) in tf.frames().enumerate() {
        for (i, v) in row.iter().enumerate().skip(first_pos) {
            let mag = v.norm();
            if mag > best.map_or(0.0, |p| p.magnitude) {
                best = Some(Peak {
                    frame: tf.first_frame() + n,
                    bin: i,
                    eta: grid.bin(i),
                    magnitude: mag,
                });
            }
        }
    }
    best.ok_or(AssoError::NoPeak)
}

/// Argmax of `|V|` on local frame `n` within `[center - half, center + half]`
/// (positive bins only). Ties go to the bin nearest `center`, then lower.
pub fn band_argmax(tf: &TFRepresentation, n: usize, center: f64, half: f64) -> Option<(usize, f64)> {
    band_argmax_row(tf.grid(), tf.frame(n), center, half)
}

/// [`band_argmax`] on a bare row of coefficients laid out on `grid`.
pub fn band_argmax_row(grid: &FrequencyGrid, row: &[Complex64], center: f64, half: f64) -> Option<(usize, f64)> {
    let range = grid.index_range(center - half, center + half);
    let mut best: Option<(usize, f64)> = None;
    for i in range {
        if grid.bin(i) <= 0.0 {
            continue;
        }
        let mag = row[i].norm();
        let better = match best {
            None => true,
            Some((b, m)) => {
                mag > m || (mag == m && (grid.bin(i) - center).abs() < (grid.bin(b) - center).abs())
            }
        };
        if better {
            best = Some((i, mag));
        }
    }
    best
}

/// Tracks a ridge from `seed` with a fixed half band `lambda0` (Hz).
pub fn detect_ridge(tf: &TFRepresentation, seed: (usize, f64), lambda0: f64, gamma2_abs: f64) -> Result<Ridge> {
    detect_ridge_with(tf, seed, |_| lambda0, gamma2_abs)
}

/// Tracks a ridge from `seed = (absolute frame, Hz)`, marching right then
/// left. Each step takes the argmax of the next frame within the half band
/// `half_band(frame)` around the previous frequency, and stops once the
/// on-ridge magnitude is `<= gamma2_abs` or the record ends.
pub fn detect_ridge_with(
    tf: &TFRepresentation,
    seed: (usize, f64),
    half_band: impl Fn(usize) -> f64,
    gamma2_abs: f64,
) -> Result<Ridge> {
    let frames = tf.frame_range();
    if !frames.contains(&seed.0) {
        return Err(AssoError::param("seed", format!("frame {} outside transform", seed.0)));
    }
    let grid = tf.grid();
    let local = |f: usize| f - tf.first_frame();
    let seed_bin = grid.nearest(seed.1);
    let seed_mag = tf.get(local(seed.0), seed_bin).norm();
    if !(seed_mag > gamma2_abs) {
        return Err(AssoError::EmptyRidge {
            magnitude: seed_mag,
            threshold: gamma2_abs,
        });
    }

    let step = |from: usize, to: usize, eta: f64| band_argmax(tf, local(to), eta, half_band(from));

    let mut right = Vec::new();
    let mut eta = grid.bin(seed_bin);
    let mut f = seed.0;
    while f + 1 < frames.end {
        match step(f, f + 1, eta) {
            Some((bin, mag)) if mag > gamma2_abs => {
                f += 1;
                eta = grid.bin(bin);
                right.push((bin, mag));
            }
            _ => break,
        }
    }

    let mut left = Vec::new();
    let mut eta = grid.bin(seed_bin);
    let mut f = seed.0;
    while f > frames.start {
        match step(f, f - 1, eta) {
            Some((bin, mag)) if mag > gamma2_abs => {
                f -= 1;
                eta = grid.bin(bin);
                left.push((bin, mag));
            }
            _ => break,
        }
    }

    let first = seed.0 - left.len();
    let track: Vec<(usize, f64)> = left
        .into_iter()
        .rev()
        .chain(std::iter::once((seed_bin, seed_mag)))
        .chain(right)
        .collect();
    Ridge::new(
        first,
        track.iter().map(|&(b, _)| grid.bin(b)).collect(),
        track.iter().map(|&(b, _)| b).collect(),
        track.iter().map(|&(_, m)| m).collect(),
    )
}

/// Re-reads a known ridge on another transform of the same frames, taking
/// the argmax within `half_band(frame)` around the old frequency.
pub fn retrack(tf: &TFRepresentation, ridge: &Ridge, half_band: impl Fn(usize) -> f64) -> Result<Ridge> {
    let grid = tf.grid();
    let mut eta = Vec::with_capacity(ridge.len());
    let mut bins = Vec::with_capacity(ridge.len());
    let mut mags = Vec::with_capacity(ridge.len());
    for f in ridge.support() {
        let n = f
            .checked_sub(tf.first_frame())
            .filter(|&n| n < tf.n_frames())
            .ok_or_else(|| AssoError::param("ridge", format!("frame {f} outside transform")))?;
        let (b, m) = band_argmax(tf, n, ridge.eta_at(f), half_band(f)).unwrap_or_else(|| {
            let b = ridge.bin_at(f);
            (b, tf.get(n, b).norm())
        });
        eta.push(grid.bin(b));
        bins.push(b);
        mags.push(m);
    }
    Ridge::new(ridge.first_frame(), eta, bins, mags)
}

/// Least-squares slope of `η̌(t+u) ≈ η̌(t) + r·u` over `|u| <= halfwidth`
/// frames inside the support, in Hz/s.
pub fn estimate_chirp_rate(ridge: &Ridge, frame: usize, fit_halfwidth: usize, dt: f64) -> Result<f64> {
    if !ridge.contains(frame) {
        return Err(AssoError::param("frame", format!("{frame} outside ridge support")));
    }
    let support = ridge.support();
    let lo = frame.saturating_sub(fit_halfwidth).max(support.start);
    let hi = (frame + fit_halfwidth + 1).min(support.end);
    if hi - lo < 3 {
        return Err(AssoError::InsufficientData { found: hi - lo });
    }
    let center = ridge.eta_at(frame);
    let (mut suu, mut sue) = (0.0, 0.0);
    for f in lo..hi {
        let u = (f as f64 - frame as f64) * dt;
        suu += u * u;
        sue += u * (ridge.eta_at(f) - center);
    }
    Ok(sue / suu)
}

/// Chirp rate at every ridge frame; frames with too few fit points get 0.
pub fn estimate_chirp_track(ridge: &Ridge, fit_halfwidth: impl Fn(usize) -> usize, dt: f64) -> ChirpRateTrack {
    let mut fallbacks = 0;
    let rate = ridge
        .support()
        .map(|f| match estimate_chirp_rate(ridge, f, fit_halfwidth(f), dt) {
            Ok(r) => r,
            Err(_) => {
                fallbacks += 1;
                0.0
            }
        })
        .collect();
    ChirpRateTrack {
        first_frame: ridge.first_frame(),
        rate,
        fallbacks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{SampledSignal, WindowSpec};
    use crate::stft::{adaptive_stft, FrequencyGrid, SigmaTrack};
    use std::f64::consts::PI;

    fn tf_of(x: Vec<f64>, fs: f64, sigma: f64) -> TFRepresentation {
        let n = x.len();
        let x = SampledSignal::new(x, fs, 0.0).unwrap();
        let grid = FrequencyGrid::for_sigma(fs, sigma, &WindowSpec::default()).unwrap();
        adaptive_stft(&x, &SigmaTrack::constant(sigma, n).unwrap(), &grid).unwrap()
    }

    fn linear_ridge(first: usize, eta: Vec<f64>) -> Ridge {
        let n = eta.len();
        Ridge::new(first, eta, vec![0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn peak_of_single_tone() {
        let fs = 200.0;
        let x = (0..400).map(|i| (2.0 * PI * 31.0 * i as f64 / fs).cos()).collect();
        let tf = tf_of(x, fs, 0.05);
        let p = global_peak(&tf).unwrap();
        assert_eq!(p.bin, tf.grid().nearest(31.0));
        assert!(p.frame > 20 && p.frame < 380);
    }

    #[test]
    fn peak_prefers_stronger_tone() {
        let fs = 200.0;
        let x = (0..400)
            .map(|i| {
                let t = i as f64 / fs;
                0.5 * (2.0 * PI * 20.0 * t).cos() + (2.0 * PI * 60.0 * t).cos()
            })
            .collect();
        let tf = tf_of(x, fs, 0.05);
        assert_eq!(global_peak(&tf).unwrap().bin, tf.grid().nearest(60.0));
    }

    #[test]
    fn zero_plane_has_no_peak() {
        let tf = tf_of(vec![0.0; 100], 100.0, 0.05);
        assert!(matches!(global_peak(&tf), Err(AssoError::NoPeak)));
    }

    #[test]
    fn seed_below_threshold_is_empty_ridge() {
        let x: Vec<f64> = (0..200).map(|i| (2.0 * PI * 10.0 * i as f64 / 100.0).cos()).collect();
        let tf = tf_of(x, 100.0, 0.2);
        let p = global_peak(&tf).unwrap();
        let r = detect_ridge(&tf, (p.frame, p.eta), 1.0, p.magnitude);
        assert!(matches!(r, Err(AssoError::EmptyRidge { .. })));
        assert!(detect_ridge(&tf, (p.frame, p.eta), 1.0, 0.5 * p.magnitude).is_ok());
    }

    #[test]
    fn tracks_linear_chirp() {
        let fs = 512.0;
        let (c, r) = (17.0, 37.0);
        let x = (0..512)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (c * t + 0.5 * r * t * t)).cos()
            })
            .collect();
        let sigma = 0.02;
        let tf = tf_of(x, fs, sigma);
        let p = global_peak(&tf).unwrap();
        let (band, _) = lambda0(Lambda0Convention::Dimensional, sigma, 0.1);
        let ridge = detect_ridge(&tf, (p.frame, p.eta), band, 0.1 * p.magnitude).unwrap();
        assert!(ridge.contains(p.frame));
        assert_eq!(ridge.support(), 0..512);
        let step = tf.grid().step();
        for f in 60..452 {
            let t = f as f64 / fs;
            assert!((ridge.eta_at(f) - (c + r * t)).abs() <= step, "frame {f}");
        }
    }

    #[test]
    fn tone_ending_mid_record() {
        let fs = 200.0;
        let sigma = 0.05;
        let end = 250;
        let x = (0..500)
            .map(|i| if i < end { (2.0 * PI * 40.0 * i as f64 / fs).cos() } else { 0.0 })
            .collect();
        let tf = tf_of(x, fs, sigma);
        let p = global_peak(&tf).unwrap();
        let (band, _) = lambda0(Lambda0Convention::Dimensional, sigma, 0.1);
        let ridge = detect_ridge(&tf, (p.frame, p.eta), band, 0.1 * p.magnitude).unwrap();
        let stop = ridge.support().end as f64;
        assert!((stop - end as f64).abs() <= 3.0 * sigma * fs, "stop {stop}");
    }

    #[test]
    fn ridge_is_amplitude_invariant() {
        let fs = 200.0;
        let base: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (20.0 * t + 15.0 * t * t)).cos() + 0.4 * (2.0 * PI * 70.0 * t).cos()
            })
            .collect();
        let run = |a: f64| {
            let tf = tf_of(base.iter().map(|v| a * v).collect(), fs, 0.04);
            let p = global_peak(&tf).unwrap();
            detect_ridge(&tf, (p.frame, p.eta), 5.0, 0.1 * p.magnitude).unwrap()
        };
        let r1 = run(1.0);
        let r2 = run(1e3);
        assert_eq!(r1.support(), r2.support());
        assert_eq!(r1.bins(), r2.bins());
    }

    #[test]
    fn chirp_rate_exact_on_affine_ridge() {
        let dt = 0.01;
        let r = linear_ridge(10, (0..100).map(|i| 5.0 + 3.7 * i as f64 * dt).collect());
        for f in [10, 40, 109] {
            assert!((estimate_chirp_rate(&r, f, 7, dt).unwrap() - 3.7).abs() < 1e-10);
        }
        let flat = linear_ridge(0, vec![2.0; 20]);
        assert_eq!(estimate_chirp_rate(&flat, 10, 5, dt).unwrap(), 0.0);
    }

    #[test]
    fn chirp_rate_needs_three_points() {
        let r = linear_ridge(0, vec![1.0, 2.0]);
        assert!(matches!(
            estimate_chirp_rate(&r, 0, 5, 0.1),
            Err(AssoError::InsufficientData { found: 2 })
        ));
        let track = estimate_chirp_track(&r, |_| 5, 0.1);
        assert_eq!(track.values(), &[0.0, 0.0]);
        assert_eq!(track.fallbacks(), 2);
    }

    #[test]
    fn chirp_rate_with_bin_jitter() {
        // deterministic pseudo-random jitter of up to half a bin
        let dt = 1.0 / 512.0;
        let bin = 1.0;
        let truth = 37.0;
        let w = 22usize;
        let mut state = 12345u64;
        let eta: Vec<f64> = (0..512)
            .map(|i| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                17.0 + truth * i as f64 * dt + u * bin
            })
            .collect();
        let r = linear_ridge(0, eta);
        let n = (2 * w + 1) as f64;
        let tol = 3.0 * (bin / dt) / (n.powi(3) / 12.0).sqrt();
        for f in (w..512 - w).step_by(13) {
            let est = estimate_chirp_rate(&r, f, w, dt).unwrap();
            assert!((est - truth).abs() < tol, "frame {f}: {est} tol {tol}");
        }
    }

    #[test]
    fn chirp_rate_equivariance() {
        let dt = 0.02;
        let r = linear_ridge(0, (0..50).map(|i| ((i * 37) % 11) as f64 * 0.1 + 3.0).collect());
        let shifted = r.map_eta(|f, e| e + 2.5 * f as f64 * dt);
        for f in [0, 10, 25, 49] {
            let a = estimate_chirp_rate(&r, f, 6, dt).unwrap();
            let b = estimate_chirp_rate(&shifted, f, 6, dt).unwrap();
            assert!((b - a - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda0_conventions() {
        let (band, secs) = lambda0(Lambda0Convention::Dimensional, 0.02, 0.1);
        assert!((band - (2.0 * 10f64.ln()).sqrt() / (2.0 * PI * 0.02)).abs() < 1e-12);
        assert!((secs - 0.02 * (2.0 * 10f64.ln()).sqrt()).abs() < 1e-15);
        let (b2, s2) = lambda0(Lambda0Convention::Literal, 0.02, 0.1);
        assert_eq!(b2, s2);
        assert_eq!(fit_halfwidth_samples(Lambda0Convention::Dimensional, 0.001, 0.1, 512.0), 5);
        assert_eq!(fit_halfwidth_samples(Lambda0Convention::Dimensional, 0.02, 0.1, 512.0), 22);
    }
}
