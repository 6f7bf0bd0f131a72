//! Adaptive short-time Fourier transform with a per-frame Gaussian width.
//!
//! Frame `n` of the transform is the Riemann sum
//!
//! ```text
//! V(t_n, η) = Σ_m x[n + m] · g_σ(m Δt) · e^{-j2πη m Δt} · Δt,   |m| ≤ L(σ)
//! ```
//!
//! with samples outside the record taken as zero and `L(σ)` the truncation
//! half-length. The hop is one sample, so there is one frame per input
//! sample.
//!
//! On a canonical grid (bins `k·Fs/M`) the sum is evaluated with an
//! `M`-point FFT. The windowed segment is folded modulo `M` first, which
//! keeps the result exact even when the window is longer than `M`.

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{AssoError, Result};
use crate::gauss::gaussian;
use crate::signal::{Sample, SampledSignal, WindowSpec};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Uniform, strictly increasing frequency bins `start + i·step`, in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(start.is_finite() && start >= 0.0) {
            return Err(AssoError::param("grid start", format!("must be finite and >= 0, got {start}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(AssoError::param("grid step", format!("must be > 0, got {step}")));
        }
        if len == 0 {
            return Err(AssoError::param("grid length", "must be non-zero"));
        }
        Ok(Self { start, step, len })
    }

    /// Builds a grid from explicit bins, checking uniform spacing.
    pub fn from_bins(bins: &[f64]) -> Result<Self> {
        match bins {
            [] => Err(AssoError::param("grid length", "must be non-zero")),
            [only] => Self::new(*only, 1.0, 1),
            [first, second, ..] => {
                let step = second - first;
                let grid = Self::new(*first, step, bins.len())?;
                for (i, &b) in bins.iter().enumerate() {
                    let expect = grid.bin(i);
                    if (b - expect).abs() > 1e-12 * expect.abs().max(step) {
                        return Err(AssoError::param(
                            "grid bins",
                            format!("bin {i} = {b} breaks uniform spacing {step}"),
                        ));
                    }
                }
                Ok(grid)
            }
        }
    }

    /// One-sided FFT grid `k·Fs/M`, `k = 0..=M/2`.
    pub fn one_sided(sample_rate: f64, fft_len: usize) -> Result<Self> {
        if fft_len < 2 {
            return Err(AssoError::param("fft length", "must be >= 2"));
        }
        Self::new(0.0, sample_rate / fft_len as f64, fft_len / 2 + 1)
    }

    /// Default grid: `M` is the next power of two at least four times the
    /// support of the widest window, one-sided half kept.
    pub fn for_sigma(sample_rate: f64, sigma_max: f64, window: &WindowSpec) -> Result<Self> {
        let support = 2 * window.half_len(sigma_max, sample_rate) + 1;
        let fft_len = (4 * support).next_power_of_two().max(8);
        Self::one_sided(sample_rate, fft_len)
    }

    /// Keeps bins at or below `fmax` Hz.
    pub fn truncated(&self, fmax: f64) -> Result<Self> {
        let keep = ((fmax - self.start) / self.step + 1e-9).floor();
        if keep < 0.0 {
            return Err(AssoError::param("fmax", format!("{fmax} Hz lies below the grid")));
        }
        Self::new(self.start, self.step, (keep as usize + 1).min(self.len))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bin(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn bins(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.bin(i)).collect()
    }

    pub fn max_freq(&self) -> f64 {
        self.bin(self.len - 1)
    }

    /// Index of the bin nearest `eta`, clamped to the grid.
    pub fn nearest(&self, eta: f64) -> usize {
        let i = ((eta - self.start) / self.step).round();
        i.clamp(0.0, (self.len - 1) as f64) as usize
    }

    /// Bin indices with `lo <= η <= hi`, clamped to the grid.
    pub fn index_range(&self, lo: f64, hi: f64) -> Range<usize> {
        let a = ((lo - self.start) / self.step - 1e-9).ceil().max(0.0) as usize;
        let b = ((hi - self.start) / self.step + 1e-9).floor();
        if b < 0.0 {
            return 0..0;
        }
        let b = (b as usize + 1).min(self.len);
        a.min(b)..b
    }

    /// `(M, k0)` when the grid is `(k0 + i)·Fs/M` for integers `M`, `k0`.
    fn fft_layout(&self, sample_rate: f64) -> Option<(usize, usize)> {
        let m = sample_rate / self.step;
        let m_round = m.round();
        if m_round < 1.0 || (m - m_round).abs() > 1e-9 * m || m_round > (1u64 << 26) as f64 {
            return None;
        }
        let k0 = self.start / self.step;
        let k0_round = k0.round();
        if (k0 - k0_round).abs() > 1e-9 * k0.max(1.0) {
            return None;
        }
        Some((m_round as usize, k0_round as usize))
    }

    pub fn is_canonical(&self, sample_rate: f64) -> bool {
        self.fft_layout(sample_rate).is_some()
    }
}

/// Window width `σ(t_n)` in seconds, one value per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaTrack(Vec<f64>);

impl SigmaTrack {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(AssoError::param("sigma track", "must be non-empty"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(AssoError::param("sigma track", format!("value {v} at frame {i} is not > 0")));
        }
        Ok(Self(values))
    }

    pub fn constant(sigma: f64, frames: usize) -> Result<Self> {
        Self::new(vec![sigma; frames])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for SigmaTrack {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Complex time-frequency matrix over a contiguous run of frames.
#[derive(Debug, Clone)]
pub struct TFRepresentation {
    matrix: Vec<Complex64>,
    first_frame: usize,
    times: Vec<f64>,
    grid: FrequencyGrid,
    sigma: SigmaTrack,
    sample_rate: f64,
}

impl TFRepresentation {
    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn n_bins(&self) -> usize {
        self.grid.len()
    }

    /// Signal sample index of the first stored frame.
    pub fn first_frame(&self) -> usize {
        self.first_frame
    }

    /// Signal sample indices covered by this representation.
    pub fn frame_range(&self) -> Range<usize> {
        self.first_frame..self.first_frame + self.n_frames()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn sigma_track(&self) -> &SigmaTrack {
        &self.sigma
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        self.sample_rate.recip()
    }

    /// Row for local frame `n` (0-based within this representation).
    pub fn frame(&self, n: usize) -> &[Complex64] {
        let b = self.n_bins();
        &self.matrix[n * b..(n + 1) * b]
    }

    pub fn get(&self, n: usize, bin: usize) -> Complex64 {
        self.matrix[n * self.n_bins() + bin]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Complex64]> {
        self.matrix.chunks(self.n_bins())
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Assembles a representation from raw parts, validating shapes.
    pub fn from_parts(
        matrix: Vec<Complex64>,
        first_frame: usize,
        times: Vec<f64>,
        grid: FrequencyGrid,
        sigma: SigmaTrack,
        sample_rate: f64,
    ) -> Result<Self> {
        if matrix.len() != times.len() * grid.len() || sigma.len() != times.len() {
            return Err(AssoError::param(
                "tf shape",
                format!(
                    "matrix {} vs {} frames x {} bins, sigma track {}",
                    matrix.len(),
                    times.len(),
                    grid.len(),
                    sigma.len()
                ),
            ));
        }
        if matrix.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(AssoError::param("tf matrix", "entries must be finite"));
        }
        Ok(Self {
            matrix,
            first_frame,
            times,
            grid,
            sigma,
            sample_rate,
        })
    }
}

/// Reusable transform setup for one grid and sample rate.
pub struct StftEngine {
    grid: FrequencyGrid,
    sample_rate: f64,
    window: WindowSpec,
    fft: Option<(Arc<dyn Fft<f64>>, usize, usize)>,
}

impl std::fmt::Debug for StftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftEngine")
            .field("grid", &self.grid)
            .field("sample_rate", &self.sample_rate)
            .field("fft_len", &self.fft.as_ref().map(|f| f.1))
            .finish()
    }
}

impl StftEngine {
    pub fn new(grid: FrequencyGrid, sample_rate: f64, window: WindowSpec) -> Result<Self> {
        window.validate()?;
        let fft = grid.fft_layout(sample_rate).map(|(m, k0)| {
            let plan = FftPlanner::<f64>::new().plan_fft_forward(m);
            (plan, m, k0)
        });
        Ok(Self {
            grid,
            sample_rate,
            window,
            fft,
        })
    }

    /// Engine that always sums directly, for cross-checking the FFT path.
    pub fn direct(grid: FrequencyGrid, sample_rate: f64, window: WindowSpec) -> Result<Self> {
        window.validate()?;
        Ok(Self {
            grid,
            sample_rate,
            window,
            fft: None,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn uses_fft(&self) -> bool {
        self.fft.is_some()
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    /// Riemann weights `Δt·g_σ(mΔt)` for `m = -L..=L`.
    pub fn weights(&self, frame: usize, sigma: f64) -> Result<Vec<f64>> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(AssoError::param("sigma", format!("must be > 0, got {sigma}")));
        }
        let half = self.window.half_len(sigma, self.sample_rate);
        if half < 1 {
            return Err(AssoError::DegenerateWindow {
                frame,
                sigma,
                samples: 2 * half + 1,
            });
        }
        let dt = self.sample_rate.recip();
        Ok((-(half as isize)..=half as isize)
            .map(|m| dt * gaussian(m as f64 * dt, sigma))
            .collect())
    }

    /// One frame of the transform into `out` (length = grid length).
    pub fn frame_into<T: Sample>(
        &self,
        x: &[T],
        frame: usize,
        sigma: f64,
        out: &mut [Complex64],
        scratch: &mut Vec<Complex64>,
    ) -> Result<()> {
        debug_assert_eq!(out.len(), self.grid.len());
        let weights = self.weights(frame, sigma)?;
        let half = (weights.len() / 2) as isize;
        let n = x.len() as isize;
        let center = frame as isize;
        let lo = (-half).max(-center);
        let hi = half.min(n - 1 - center);
        match &self.fft {
            Some((plan, m, k0)) => {
                let m = *m;
                scratch.clear();
                scratch.resize(m + plan.get_inplace_scratch_len(), ZERO);
                let (buf, work) = scratch.split_at_mut(m);
                for off in lo..=hi {
                    let v = x[(center + off) as usize].to_complex() * weights[(off + half) as usize];
                    buf[off.rem_euclid(m as isize) as usize] += v;
                }
                plan.process_with_scratch(buf, work);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = buf[(k0 + i) % m];
                }
            }
            None => {
                let dt = self.sample_rate.recip();
                for (i, o) in out.iter_mut().enumerate() {
                    let eta = self.grid.bin(i);
                    let mut acc = ZERO;
                    for off in lo..=hi {
                        let v = x[(center + off) as usize].to_complex() * weights[(off + half) as usize];
                        let ang = -std::f64::consts::TAU * eta * off as f64 * dt;
                        acc += v * Complex64::new(ang.cos(), ang.sin());
                    }
                    *o = acc;
                }
            }
        }
        Ok(())
    }

    pub fn frame<T: Sample>(&self, x: &[T], frame: usize, sigma: f64) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; self.grid.len()];
        self.frame_into(x, frame, sigma, &mut out, &mut Vec::new())?;
        Ok(out)
    }

    /// Transform over `frames` with one σ per frame in the range.
    pub fn transform_range<T: Sample>(
        &self,
        x: &[T],
        frames: Range<usize>,
        sigmas: &[f64],
    ) -> Result<TFRepresentation> {
        if frames.end > x.len() || frames.is_empty() {
            return Err(AssoError::param(
                "frames",
                format!("range {frames:?} outside signal of length {}", x.len()),
            ));
        }
        if sigmas.len() != frames.len() {
            return Err(AssoError::param(
                "sigma track",
                format!("length {} != frame count {}", sigmas.len(), frames.len()),
            ));
        }
        let bins = self.grid.len();
        let mut matrix = vec![ZERO; frames.len() * bins];
        let first = frames.start;
        matrix
            .par_chunks_mut(bins)
            .enumerate()
            .try_for_each_init(Vec::new, |scratch, (i, row)| {
                self.frame_into(x, first + i, sigmas[i], row, scratch)
            })?;
        let times = frames
            .clone()
            .map(|n| n as f64 / self.sample_rate)
            .collect();
        Ok(TFRepresentation {
            matrix,
            first_frame: first,
            times,
            grid: self.grid,
            sigma: SigmaTrack::new(sigmas.to_vec())?,
            sample_rate: self.sample_rate,
        })
    }

    pub fn transform<T: Sample>(&self, x: &SampledSignal<T>, sigma: &SigmaTrack) -> Result<TFRepresentation> {
        let mut tf = self.transform_range(x.samples(), 0..x.len(), sigma.values())?;
        let t0 = x.start_time();
        tf.times.iter_mut().for_each(|t| *t += t0);
        Ok(tf)
    }
}

/// Single frame of the adaptive STFT.
pub fn stft_frame<T: Sample>(
    x: &SampledSignal<T>,
    frame_index: usize,
    sigma: f64,
    grid: &FrequencyGrid,
) -> Result<Vec<Complex64>> {
    if frame_index >= x.len() {
        return Err(AssoError::param(
            "frame_index",
            format!("{frame_index} outside signal of length {}", x.len()),
        ));
    }
    StftEngine::new(*grid, x.sample_rate(), WindowSpec::default())?.frame(x.samples(), frame_index, sigma)
}

/// Adaptive STFT with one frame per sample, frame `n` using `sigma[n]`.
pub fn adaptive_stft<T: Sample>(
    x: &SampledSignal<T>,
    sigma: &SigmaTrack,
    grid: &FrequencyGrid,
) -> Result<TFRepresentation> {
    StftEngine::new(*grid, x.sample_rate(), WindowSpec::default())?.transform(x, sigma)
}

/// Truncated unit-integral Gaussian `h(u) = g_1(u)` for `|u| <= radius`.
fn truncated_gaussian(u: f64, radius: f64) -> f64 {
    if u.abs() <= radius {
        gaussian(u, 1.0)
    } else {
        0.0
    }
}

/// `h̃_a = Σ_n h(n/a)` for the truncated Gaussian window.
pub fn window_mass(a: f64, window: &WindowSpec) -> f64 {
    let radius = window.truncation_radius_in_sigmas;
    let nmax = (radius * a).floor() as i64;
    (-nmax..=nmax)
        .map(|n| truncated_gaussian(n as f64 / a, radius))
        .sum()
}

/// Discrete adaptive separation operator at one sample:
/// `(1/h̃_a) Σ_n x(t - nδ) h(n/a) e^{j2πδnη}`.
///
/// `delta` must be a whole number of sample periods. This approximates the
/// adaptive STFT at `σ = δ·a`.
pub fn asso_discrete<T: Sample>(
    x: &SampledSignal<T>,
    frame: usize,
    a: f64,
    delta: f64,
    eta: f64,
    window: &WindowSpec,
) -> Result<Complex64> {
    if frame >= x.len() {
        return Err(AssoError::param("frame", format!("{frame} outside signal")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(AssoError::param("a", format!("must be > 0, got {a}")));
    }
    let stride = delta * x.sample_rate();
    let stride_round = stride.round();
    if stride_round < 1.0 || (stride - stride_round).abs() > 1e-9 * stride {
        return Err(AssoError::param(
            "delta",
            format!("{delta} s is not a whole number of sample periods"),
        ));
    }
    let stride = stride_round as i64;
    let mass = window_mass(a, window);
    if !(mass > 0.0) {
        return Err(AssoError::param("a", format!("window mass {mass} is not positive")));
    }
    let radius = window.truncation_radius_in_sigmas;
    let nmax = (radius * a).floor() as i64;
    let samples = x.samples();
    let mut acc = ZERO;
    for n in -nmax..=nmax {
        let idx = frame as i64 - n * stride;
        if idx < 0 || idx >= samples.len() as i64 {
            continue;
        }
        let h = truncated_gaussian(n as f64 / a, radius);
        let ang = std::f64::consts::TAU * delta * n as f64 * eta;
        acc += samples[idx as usize].to_complex() * h * Complex64::new(ang.cos(), ang.sin());
    }
    Ok(acc / mass)
}

/// Real-signal reconstruction from one frame by integrating over frequency:
/// `x(t) = (2/g_σ(0)) Re Σ V(t, η_i) Δη`, with the DC and Nyquist bins
/// counted once.
///
/// Exact on the full one-sided canonical grid; a grid that does not cover
/// the signal band loses accuracy accordingly.
pub fn reconstruct_real(tf: &TFRepresentation, frame: usize) -> f64 {
    let grid = tf.grid();
    let nyquist = 0.5 * tf.sample_rate();
    let tol = 1e-9 * grid.step();
    let row = tf.frame(frame);
    let sum: f64 = row
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let eta = grid.bin(i);
            let w = if eta.abs() < tol || (eta - nyquist).abs() < tol {
                1.0
            } else {
                2.0
            };
            w * v.re
        })
        .sum();
    sum * grid.step() / gaussian(0.0, tf.sigma_track()[frame])
}

/// Trend estimate `Re V_x^σ(t, 0)` with a constant small σ.
pub fn extract_trend(x: &SampledSignal<f64>, sigma: f64, window: &WindowSpec) -> Result<Vec<f64>> {
    let grid = FrequencyGrid::new(0.0, 1.0, 1)?;
    let engine = StftEngine::direct(grid, x.sample_rate(), *window)?;
    let weights = engine.weights(0, sigma)?;
    let half = (weights.len() / 2) as isize;
    let s = x.samples();
    let n = s.len() as isize;
    Ok((0..n)
        .into_par_iter()
        .map(|c| {
            let lo = (-half).max(-c);
            let hi = half.min(n - 1 - c);
            (lo..=hi)
                .map(|off| s[(c + off) as usize] * weights[(off + half) as usize])
                .sum()
        })
        .collect())
}
