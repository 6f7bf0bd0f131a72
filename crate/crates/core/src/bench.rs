//! Synthetic test signals, noise, error metrics and the recovery-model
//! comparison.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AssoConfig, RecoveryModel};
use crate::error::{AssoError, Result};
use crate::io::fmt_float;
use crate::pipeline::{separate, SeparationResult};
use crate::signal::{GroundTruthComponent, SampledSignal};

/// Uniform sampling `t_i = i / sample_rate`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub sample_rate: f64,
    pub len: usize,
}

impl TimeGrid {
    /// 512 samples on `[0, 1)`.
    pub const LFM: TimeGrid = TimeGrid {
        sample_rate: 512.0,
        len: 512,
    };
    /// 512 samples on `[0, 20)`.
    pub const THREE_COMPONENT: TimeGrid = TimeGrid {
        sample_rate: 25.6,
        len: 512,
    };

    fn times(&self) -> Vec<f64> {
        (0..self.len).map(|i| i as f64 / self.sample_rate).collect()
    }
}

/// A synthetic signal together with its analytic parts.
#[derive(Clone)]
pub struct SyntheticCase {
    pub label: String,
    pub signal: SampledSignal,
    pub truth: Vec<GroundTruthComponent>,
    pub trend_truth: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    /// Interval on which errors are scored.
    pub interval: (f64, f64),
}

impl std::fmt::Debug for SyntheticCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SyntheticCase")
            .field("label", &self.label)
            .field("len", &self.signal.len())
            .field("components", &self.truth.len())
            .field("interval", &self.interval)
            .finish()
    }
}

impl SyntheticCase {
    fn build(
        label: &str,
        grid: TimeGrid,
        truth: Vec<GroundTruthComponent>,
        trend_truth: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        interval: (f64, f64),
    ) -> Result<Self> {
        let times = grid.times();
        let samples = times
            .iter()
            .map(|&t| truth.iter().map(|c| c.value(t)).sum::<f64>() + trend_truth.as_ref().map_or(0.0, |f| f(t)))
            .collect();
        Ok(Self {
            label: label.to_string(),
            signal: SampledSignal::new(samples, grid.sample_rate, 0.0)?,
            truth,
            trend_truth,
            interval,
        })
    }

    /// Truth components sampled on the signal grid.
    pub fn truth_samples(&self) -> Vec<Vec<f64>> {
        let times = self.signal.times();
        self.truth.iter().map(|c| c.sample(&times)).collect()
    }

    /// Largest gap between the stored samples and the analytic sum.
    pub fn synthesis_error(&self) -> f64 {
        let truth = self.truth_samples();
        self.signal
            .samples()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let t = self.signal.time_at(i);
                let sum: f64 = truth.iter().map(|c| c[i]).sum::<f64>() + self.trend_truth.as_ref().map_or(0.0, |f| f(t));
                (v - sum).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Sample indices inside the scoring interval.
    pub fn interval_indices(&self) -> std::ops::Range<usize> {
        index_range(&self.signal, self.interval)
    }

    pub fn with_signal(&self, signal: SampledSignal) -> Self {
        Self {
            signal,
            ..self.clone()
        }
    }
}

fn index_range(x: &SampledSignal, (lo, hi): (f64, f64)) -> std::ops::Range<usize> {
    let fs = x.sample_rate();
    let t0 = x.start_time();
    let a = ((lo - t0) * fs - 1e-9).ceil().max(0.0) as usize;
    let b = (((hi - t0) * fs + 1e-9).floor() as usize + 1).min(x.len());
    a.min(b)..b
}

/// `cos(34πt + 37πt²)`: IF `17 + 37t` Hz, chirp rate 37 Hz/s.
pub fn gen_lfm(grid: TimeGrid) -> Result<SyntheticCase> {
    SyntheticCase::build(
        "lfm",
        grid,
        vec![GroundTruthComponent::linear_chirp(1.0, 17.0, 37.0)],
        None,
        (0.2, 0.8),
    )
}

/// Three nonlinear FM modes with sinusoidally modulated IFs.
pub fn gen_three_component(grid: TimeGrid) -> Result<SyntheticCase> {
    let w = 0.2 * PI;
    let mode = |amp: f64, c: f64, depth: f64| {
        // A cos(2π c t + 2π·depth·cos(wt))
        GroundTruthComponent::new(
            move |_| amp,
            move |t| c * t + depth * (w * t).cos(),
            move |t| c - depth * w * (w * t).sin(),
            move |t| -depth * w * w * (w * t).cos(),
        )
    };
    SyntheticCase::build(
        "three_component",
        grid,
        vec![
            mode(1.0, 1.35, 3.0 / PI),
            mode(2.0 / 3.0, 2.35, 2.0 / PI),
            mode(0.5, 3.2, 1.0 / PI),
        ],
        None,
        (2.5, 17.5),
    )
}

/// Looks a case up by name.
pub fn case_by_name(name: &str) -> Result<SyntheticCase> {
    match name {
        "lfm" => gen_lfm(TimeGrid::LFM),
        "three_component" => gen_three_component(TimeGrid::THREE_COMPONENT),
        other => Err(AssoError::Usage(format!(
            "unknown case {other:?}; expected lfm or three_component"
        ))),
    }
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds white Gaussian noise scaled so that the empirical SNR over the
/// record is `snr_db`. An infinite `snr_db` returns the signal unchanged.
pub fn add_noise(x: &SampledSignal, snr_db: f64, seed: u64) -> Result<SampledSignal> {
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    if !snr_db.is_finite() {
        return Err(AssoError::param("snr_db", format!("{snr_db} is not a valid SNR")));
    }
    let ps = power(x.samples());
    if !(ps > 0.0) {
        return Err(AssoError::InvalidSignal("cannot set an SNR on a zero signal".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scale = (ps / (power(&noise) * 10f64.powf(snr_db / 10.0))).sqrt();
    x.with_samples(
        x.samples()
            .iter()
            .zip(&noise)
            .map(|(s, n)| s + scale * n)
            .collect(),
    )
}

/// `‖s − š‖₂ / ‖s‖₂`.
pub fn relative_error(truth: &[f64], recovered: &[f64]) -> f64 {
    let num: f64 = truth.iter().zip(recovered).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.iter().map(|a| a * a).sum();
    (num / den).sqrt()
}

/// Mean relative L2 error over paired components on `range`.
pub fn mse(recovered: &[Vec<f64>], truth: &[Vec<f64>], range: std::ops::Range<usize>) -> Result<f64> {
    if recovered.len() != truth.len() || truth.is_empty() {
        return Err(AssoError::param("components", "need equally many recovered and true components"));
    }
    let total: f64 = recovered
        .iter()
        .zip(truth)
        .map(|(r, s)| relative_error(&s[range.clone()], &r[range.clone()]))
        .sum();
    Ok(total / truth.len() as f64)
}

/// For each true component, the index of the extracted component whose
/// ridge runs closest to its IF on the scoring interval, or `None`.
///
/// The assignment is one-to-one and minimizes the total mean IF distance;
/// a pair with no overlap on the interval is not allowed.
pub fn assign_components(result: &SeparationResult, case: &SyntheticCase) -> Vec<Option<usize>> {
    let range = case.interval_indices();
    let times = case.signal.times();
    let cost: Vec<Vec<Option<f64>>> = case
        .truth
        .iter()
        .map(|truth| {
            result
                .components
                .iter()
                .map(|c| {
                    let s = c.ridge.support();
                    let lo = s.start.max(range.start);
                    let hi = s.end.min(range.end);
                    (lo < hi).then(|| {
                        (lo..hi)
                            .map(|f| (c.ridge.eta_at(f) - (truth.inst_freq)(times[f])).abs())
                            .sum::<f64>()
                            / (hi - lo) as f64
                    })
                })
                .collect()
        })
        .collect();

    let mut best = (usize::MAX, f64::INFINITY, vec![None; case.truth.len()]);
    let mut current = Vec::with_capacity(case.truth.len());
    search(&cost, &mut current, &mut best);
    best.2
}

// Exhaustive search: maximize matched count, then minimize total distance.
fn search(cost: &[Vec<Option<f64>>], current: &mut Vec<Option<usize>>, best: &mut (usize, f64, Vec<Option<usize>>)) {
    let k = current.len();
    if k == cost.len() {
        let matched = current.iter().flatten().count();
        let total: f64 = current
            .iter()
            .enumerate()
            .filter_map(|(t, j)| j.map(|j| cost[t][j].unwrap()))
            .sum();
        let unmatched = cost.len() - matched;
        if best.0 == usize::MAX || unmatched < best.0 || (unmatched == best.0 && total < best.1) {
            *best = (unmatched, total, current.clone());
        }
        return;
    }
    for j in 0..cost[k].len() {
        if cost[k][j].is_some() && !current.contains(&Some(j)) {
            current.push(Some(j));
            search(cost, current, best);
            current.pop();
        }
    }
    current.push(None);
    search(cost, current, best);
    current.pop();
}

/// Per-true-component relative error on the scoring interval, with an
/// unmatched component counting as 1.
pub fn component_errors(result: &SeparationResult, case: &SyntheticCase) -> Vec<f64> {
    let n = case.signal.len();
    let range = case.interval_indices();
    let truth = case.truth_samples();
    assign_components(result, case)
        .into_iter()
        .zip(&truth)
        .map(|(j, s)| match j {
            Some(j) => relative_error(&s[range.clone()], &result.components[j].zero_extended(n)[range.clone()]),
            None => 1.0,
        })
        .collect()
}

/// One (SNR, seed, model) cell of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub snr_db: f64,
    pub seed: u64,
    pub model: RecoveryModel,
    pub mse: f64,
    pub components: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub snr_db: f64,
    pub model: RecoveryModel,
    pub runs: usize,
    pub mean_mse: f64,
    pub std_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub label: String,
    pub rows: Vec<BenchRow>,
}

fn model_name(m: RecoveryModel) -> &'static str {
    match m {
        RecoveryModel::Chirp => "chirp",
        RecoveryModel::Sinusoidal => "sinusoidal",
    }
}

impl BenchReport {
    /// Mean and sample standard deviation per (SNR, model), in first-seen
    /// order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(f64, RecoveryModel)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|&(s, m)| s == r.snr_db && m == r.model) {
                keys.push((r.snr_db, r.model));
            }
        }
        keys.into_iter()
            .map(|(snr_db, model)| {
                let v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.snr_db == snr_db && r.model == model)
                    .map(|r| r.mse)
                    .collect();
                let n = v.len();
                let mean = v.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                SummaryRow {
                    snr_db,
                    model,
                    runs: n,
                    mean_mse: mean,
                    std_mse: var.sqrt(),
                }
            })
            .collect()
    }

    pub fn mean_mse(&self, snr_db: f64, model: RecoveryModel) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.snr_db == snr_db && s.model == model)
            .map(|s| s.mean_mse)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "snr_db,seed,model,mse,components")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_float(r.snr_db),
                r.seed,
                model_name(r.model),
                fmt_float(r.mse),
                r.components
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "snr_db,model,runs,mean_mse,std_mse")?;
        for s in self.summary() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_float(s.snr_db),
                model_name(s.model),
                s.runs,
                fmt_float(s.mean_mse),
                fmt_float(s.std_mse)
            )?;
        }
        Ok(())
    }
}

/// Runs the pipeline once per recovery model on every (SNR, seed) cell and
/// scores the mean relative error on the case's interval.
///
/// Seeds are `base_seed .. base_seed + n_seeds`. Both models see the same
/// noisy signal.
pub fn compare_models(
    case: &SyntheticCase,
    config: &AssoConfig,
    snr_list: &[f64],
    n_seeds: usize,
    base_seed: u64,
) -> Result<BenchReport> {
    if snr_list.is_empty() {
        return Err(AssoError::Usage("empty SNR list".into()));
    }
    if n_seeds == 0 {
        return Err(AssoError::Usage("need at least one seed".into()));
    }
    let cells: Vec<(f64, u64)> = snr_list
        .iter()
        .flat_map(|&snr| (0..n_seeds as u64).map(move |s| (snr, base_seed + s)))
        .collect();
    let rows: Vec<Vec<BenchRow>> = cells
        .par_iter()
        .map(|&(snr_db, seed)| {
            let noisy = case.with_signal(add_noise(&case.signal, snr_db, seed)?);
            [RecoveryModel::Chirp, RecoveryModel::Sinusoidal]
                .into_iter()
                .map(|model| {
                    let cfg = AssoConfig {
                        recovery_model: model,
                        ..config.clone()
                    };
                    let res = separate(&noisy.signal, &cfg)?;
                    let errs = component_errors(&res, case);
                    Ok(BenchRow {
                        snr_db,
                        seed,
                        model,
                        mse: errs.iter().sum::<f64>() / errs.len() as f64,
                        components: res.components.len(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(BenchReport {
        label: case.label.clone(),
        rows: rows.into_iter().flatten().collect(),
    })
}
