//! The extraction loop: trend, then one component per pass until the
//! strongest remaining peak falls below threshold.

use log::{debug, info};
use serde::Serialize;

use crate::config::{AssoConfig, RecoveryModel, ResolvedConfig};
use crate::error::{AssoError, Result};
use crate::recovery::{recover_chirp, recover_sinusoidal, RecoveredComponent};
use crate::ridge::{
    detect_ridge_with, estimate_chirp_track, fit_halfwidth_samples, global_peak, lambda0, retrack,
};
use crate::signal::SampledSignal;
use crate::stft::{extract_trend, FrequencyGrid, SigmaTrack, StftEngine};
use crate::tuning::{refine_local_sigma, select_global_sigma, RefineParams};

/// Why the extraction loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    /// Strongest remaining peak at or below `gamma1`.
    BelowThreshold { peak: f64, gamma1: f64 },
    MaxComponents,
    /// Nothing left with positive magnitude.
    NoPeak,
    /// The seed peak does not clear `gamma2`.
    EmptyRidge,
    DegenerateWindow { sigma: f64 },
}

/// What happened during one extraction pass.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentDiagnostics {
    pub peak_frame: usize,
    pub peak_eta: f64,
    pub peak_magnitude: f64,
    pub support_start: usize,
    pub support_end: usize,
    pub mean_eta: f64,
    pub mean_sigma_global: f64,
    pub mean_sigma_refined: f64,
    pub chirp_fallbacks: usize,
    /// Residual energy on the support before and after subtraction.
    pub energy_before: f64,
    pub energy_after: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub stop_reason: StopReason,
    pub first_peak: Option<f64>,
    pub gamma1_abs: Option<f64>,
    pub gamma2_abs: Option<f64>,
    pub components: Vec<ComponentDiagnostics>,
    /// Global σ track of each pass, full record.
    #[serde(skip)]
    pub sigma_global: Vec<SigmaTrack>,
}

#[derive(Debug, Clone)]
pub struct SeparationResult {
    pub trend: Vec<f64>,
    pub components: Vec<RecoveredComponent>,
    pub residual: Vec<f64>,
    pub config_used: AssoConfig,
    pub diagnostics: Diagnostics,
}

impl SeparationResult {
    /// `trend + Σ components + residual`, which reproduces the input.
    pub fn reassemble(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.trend.iter().zip(&self.residual).map(|(a, b)| a + b).collect();
        for c in &self.components {
            for (o, v) in out[c.ridge.support()].iter_mut().zip(&c.samples) {
                *o += v;
            }
        }
        out
    }
}

/// Centered moving average of odd length `smooth_len`; near the edges the
/// window shrinks to what is available.
pub fn smooth_track(track: &[f64], smooth_len: usize) -> Result<Vec<f64>> {
    if smooth_len == 0 || smooth_len.is_multiple_of(2) {
        return Err(AssoError::param("smooth_len", format!("{smooth_len} must be odd and >= 1")));
    }
    let half = smooth_len / 2;
    let n = track.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            track[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect())
}

/// Errors that end the loop cleanly instead of failing the run.
fn stop_reason_for(err: &AssoError) -> Option<StopReason> {
    match *err {
        AssoError::NoPeak | AssoError::UndefinedEntropy { .. } => Some(StopReason::NoPeak),
        AssoError::EmptyRidge { .. } => Some(StopReason::EmptyRidge),
        AssoError::DegenerateWindow { sigma, .. } => Some(StopReason::DegenerateWindow { sigma }),
        _ => None,
    }
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

struct Pass {
    component: RecoveredComponent,
    diag: ComponentDiagnostics,
    sigma_global: SigmaTrack,
}

enum Step {
    Extracted(Box<Pass>),
    Stop(StopReason),
}

struct Extractor<'a> {
    cfg: &'a ResolvedConfig,
    engine: StftEngine,
    first_peak: Option<f64>,
}

impl Extractor<'_> {
    fn gammas(&self) -> Option<(f64, f64)> {
        self.first_peak
            .map(|p| (self.cfg.gamma1_rel * p, self.cfg.gamma2_rel * p))
    }

    fn global_track(&self, s: &SampledSignal) -> Result<SigmaTrack> {
        let raw = match self.cfg.fixed_sigma {
            Some(sigma) => return SigmaTrack::constant(sigma, s.len()),
            None => select_global_sigma(s, &self.cfg.sigma_grid, self.cfg.zeta, &self.engine)?.0,
        };
        SigmaTrack::new(smooth_track(raw.values(), self.cfg.smooth_len)?)
    }

    fn pass(&mut self, s: &SampledSignal) -> Result<Step> {
        let cfg = self.cfg;
        let tau0 = cfg.window.tau0;
        let conv = cfg.lambda0_convention;
        let fs = s.sample_rate();
        let dt = s.dt();
        let fit_hw = |sigma: f64| {
            cfg.fit_halfwidth_samples
                .unwrap_or_else(|| fit_halfwidth_samples(conv, sigma, tau0, fs))
        };

        let sigma_r = self.global_track(s)?;
        let tf = self.engine.transform(s, &sigma_r)?;
        let peak = global_peak(&tf)?;
        if self.first_peak.is_none() {
            self.first_peak = Some(peak.magnitude);
        }
        let (gamma1, gamma2) = self.gammas().expect("first peak recorded");
        if peak.magnitude <= gamma1 {
            return Ok(Step::Stop(StopReason::BelowThreshold {
                peak: peak.magnitude,
                gamma1,
            }));
        }
        debug!("peak {:.4} at frame {} / {:.4} Hz", peak.magnitude, peak.frame, peak.eta);

        let ridge = detect_ridge_with(
            &tf,
            (peak.frame, peak.eta),
            |f| lambda0(conv, sigma_r[f], tau0).0,
            gamma2,
        )?;
        let support = ridge.support();
        let prelim = estimate_chirp_track(&ridge, |f| fit_hw(sigma_r[f]), dt);

        let sigma_p = if cfg.refine_sigma {
            let params = RefineParams {
                delta_sigma: cfg.delta_sigma,
                er_epsilon: cfg.er_epsilon,
                tau0,
                sigma_min: cfg.sigma_min,
                convention: conv,
            };
            let refined = refine_local_sigma(s, &ridge, &sigma_r, &prelim, &params, &self.engine)?;
            SigmaTrack::new(smooth_track(refined.values(), cfg.smooth_len)?)?
        } else {
            SigmaTrack::new(sigma_r.values()[support.clone()].to_vec())?
        };
        let sp = |f: usize| sigma_p[f - support.start];

        let tf_p = self
            .engine
            .transform_range(s.samples(), support.clone(), sigma_p.values())?;
        let ridge = retrack(&tf_p, &ridge, |f| lambda0(conv, sp(f), tau0).0)?;
        let mut chirp = estimate_chirp_track(&ridge, |f| fit_hw(sp(f)), dt);
        if cfg.smooth_chirp_rate {
            chirp = chirp.with_values(smooth_track(chirp.values(), cfg.smooth_len)?);
        }
        let samples = match cfg.recovery_model {
            RecoveryModel::Chirp => recover_chirp(&tf_p, &ridge, &chirp, &sigma_p)?,
            RecoveryModel::Sinusoidal => recover_sinusoidal(&tf_p, &ridge)?,
        };

        let before = energy(&s.samples()[support.clone()]);
        let after: f64 = s.samples()[support.clone()]
            .iter()
            .zip(&samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let diag = ComponentDiagnostics {
            peak_frame: peak.frame,
            peak_eta: peak.eta,
            peak_magnitude: peak.magnitude,
            support_start: support.start,
            support_end: support.end,
            mean_eta: ridge.mean_eta(),
            mean_sigma_global: mean(&sigma_r.values()[support.clone()]),
            mean_sigma_refined: mean(sigma_p.values()),
            chirp_fallbacks: chirp.fallbacks(),
            energy_before: before,
            energy_after: after,
        };
        Ok(Step::Extracted(Box::new(Pass {
            component: RecoveredComponent::new(samples, ridge, chirp, sigma_p)?,
            diag,
            sigma_global: sigma_r,
        })))
    }
}

/// Splits `x` into trend, components and residual.
///
/// Components come out in extraction order, strongest first. Every
/// component is subtracted exactly as reported, so
/// `trend + Σ components + residual == x` up to rounding.
pub fn separate(x: &SampledSignal, config: &AssoConfig) -> Result<SeparationResult> {
    let cfg = config.resolve(x.sample_rate(), x.len())?;
    let config_used = cfg.to_config();
    let grid = FrequencyGrid::one_sided(x.sample_rate(), cfg.fft_len())?;
    let mut ex = Extractor {
        cfg: &cfg,
        engine: StftEngine::new(grid, x.sample_rate(), cfg.window)?,
        first_peak: None,
    };

    let trend = match cfg.trend_sigma {
        Some(sigma) => extract_trend(x, sigma, &cfg.window)?,
        None => vec![0.0; x.len()],
    };
    let mut s: Vec<f64> = x.samples().iter().zip(&trend).map(|(a, b)| a - b).collect();

    let mut components = Vec::new();
    let mut comp_diag = Vec::new();
    let mut sigma_global = Vec::new();
    let stop_reason = loop {
        if components.len() >= cfg.max_components {
            break StopReason::MaxComponents;
        }
        let current = x.with_samples(s.clone())?;
        let step = match ex.pass(&current) {
            Ok(step) => step,
            Err(e) => match stop_reason_for(&e) {
                Some(reason) => Step::Stop(reason),
                None => return Err(e),
            },
        };
        match step {
            Step::Stop(reason) => break reason,
            Step::Extracted(pass) => {
                let c = &pass.component;
                for (v, r) in s[c.ridge.support()].iter_mut().zip(&c.samples) {
                    *v -= r;
                }
                info!(
                    "component {} on frames {:?}, mean IF {:.4} Hz",
                    components.len() + 1,
                    c.ridge.support(),
                    pass.diag.mean_eta
                );
                let Pass {
                    component,
                    diag,
                    sigma_global: sg,
                } = *pass;
                components.push(component);
                comp_diag.push(diag);
                sigma_global.push(sg);
            }
        }
    };
    info!("stopped after {} components: {stop_reason:?}", components.len());

    let (gamma1_abs, gamma2_abs) = ex.gammas().unzip();
    Ok(SeparationResult {
        trend,
        components,
        residual: s,
        config_used,
        diagnostics: Diagnostics {
            stop_reason,
            first_peak: ex.first_peak,
            gamma1_abs,
            gamma2_abs,
            components: comp_diag,
            sigma_global,
        },
    })
}
