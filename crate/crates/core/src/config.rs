//! Separation parameters.
//!
//! The on-disk form is a flat `key = value` file (TOML syntax) whose keys
//! mirror the fields of [`AssoConfig`]. Every key is optional. Keys left
//! unset that depend on the signal (window range, smoothing length, ...)
//! are derived from the record by [`AssoConfig::resolve`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AssoError, Result};
use crate::signal::WindowSpec;

/// Which reconstruction formula turns on-ridge coefficients into samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryModel {
    /// `2 Re{√(1 - j2πσ²r) V}`.
    #[default]
    Chirp,
    /// `2 Re{V}`.
    Sinusoidal,
}

/// How the ridge-search half band and the chirp-fit half width are sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Lambda0Convention {
    /// Band `√(2|ln τ₀|)/(2πσ)` Hz, fit half width `σ√(2|ln τ₀|)` s.
    #[default]
    Dimensional,
    /// `2πσ√(2|ln τ₀|)` used verbatim, as Hz for the band and as seconds for
    /// the fit.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssoConfig {
    pub tau0: f64,
    pub truncation_radius: f64,
    pub gamma1_rel: f64,
    pub gamma2_rel: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    /// Linear σ-grid step in seconds; when unset the grid is logarithmic
    /// with `sigma_count` points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_step: Option<f64>,
    pub sigma_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    pub er_epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smooth_len: Option<usize>,
    pub max_components: usize,
    /// One-sided frequency bin count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_halfwidth_samples: Option<usize>,
    pub extract_trend: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend_sigma: Option<f64>,
    /// Constant σ in place of entropy selection.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_sigma: Option<f64>,
    pub recovery_model: RecoveryModel,
    pub refine_sigma: bool,
    pub smooth_chirp_rate: bool,
    pub lambda0_convention: Lambda0Convention,
}

impl Default for AssoConfig {
    fn default() -> Self {
        Self {
            tau0: 0.1,
            truncation_radius: 5.0,
            gamma1_rel: 0.3,
            gamma2_rel: 0.1,
            sigma_min: None,
            sigma_max: None,
            sigma_step: None,
            sigma_count: 24,
            delta_sigma: None,
            zeta: None,
            er_epsilon: 0.05,
            smooth_len: None,
            max_components: 10,
            freq_bins: None,
            fit_halfwidth_samples: None,
            extract_trend: true,
            trend_sigma: None,
            fixed_sigma: None,
            recovery_model: RecoveryModel::Chirp,
            refine_sigma: true,
            smooth_chirp_rate: true,
            lambda0_convention: Lambda0Convention::Dimensional,
        }
    }
}

/// Fully specified parameters for one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub window: WindowSpec,
    pub gamma1_rel: f64,
    pub gamma2_rel: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_step: Option<f64>,
    pub sigma_grid: Vec<f64>,
    pub delta_sigma: f64,
    pub zeta: f64,
    pub er_epsilon: f64,
    pub smooth_len: usize,
    pub max_components: usize,
    pub freq_bins: usize,
    pub fit_halfwidth_samples: Option<usize>,
    pub trend_sigma: Option<f64>,
    pub fixed_sigma: Option<f64>,
    pub recovery_model: RecoveryModel,
    pub refine_sigma: bool,
    pub smooth_chirp_rate: bool,
    pub lambda0_convention: Lambda0Convention,
}

fn odd_at_least_one(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n.max(1)
    }
}

impl AssoConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AssoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| AssoError::io(&path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one key from its textual value, as it would appear in a config
    /// file. Bare words are accepted for string-valued keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table: toml::Table = toml::from_str(&self.to_toml_string())
            .map_err(|e| AssoError::Config(e.to_string()))?;
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.trim().to_string()));
        table.insert(key.to_string(), parsed);
        let next: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| AssoError::Config(e.to_string()))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AssoError::Config(msg));
        if !(self.tau0 > 0.0 && self.tau0 < 1.0) {
            return bad(format!("tau0 must lie in (0, 1), got {}", self.tau0));
        }
        if !(self.truncation_radius.is_finite() && self.truncation_radius > 0.0) {
            return bad(format!("truncation_radius must be > 0, got {}", self.truncation_radius));
        }
        if !(0.0 < self.gamma2_rel && self.gamma2_rel < self.gamma1_rel && self.gamma1_rel < 1.0) {
            return bad(format!(
                "need 0 < gamma2_rel < gamma1_rel < 1, got {} and {}",
                self.gamma2_rel, self.gamma1_rel
            ));
        }
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x.is_finite() && x > 0.0) => {
                    Err(AssoError::Config(format!("{name} must be > 0, got {x}")))
                }
                _ => Ok(()),
            }
        };
        positive("sigma_min", self.sigma_min)?;
        positive("sigma_max", self.sigma_max)?;
        positive("sigma_step", self.sigma_step)?;
        positive("delta_sigma", self.delta_sigma)?;
        positive("zeta", self.zeta)?;
        positive("trend_sigma", self.trend_sigma)?;
        positive("fixed_sigma", self.fixed_sigma)?;
        if let (Some(lo), Some(hi)) = (self.sigma_min, self.sigma_max) {
            if lo > hi {
                return bad(format!("sigma_min {lo} exceeds sigma_max {hi}"));
            }
        }
        if self.sigma_count == 0 {
            return bad("sigma_count must be >= 1".into());
        }
        if !(self.er_epsilon > 0.0 && self.er_epsilon < 0.1) {
            return bad(format!("er_epsilon must lie in (0, 0.1), got {}", self.er_epsilon));
        }
        if let Some(n) = self.smooth_len {
            if n.is_multiple_of(2) {
                return bad(format!("smooth_len must be odd, got {n}"));
            }
        }
        if matches!(self.freq_bins, Some(n) if n < 2) {
            return bad("freq_bins must be >= 2".into());
        }
        if matches!(self.fit_halfwidth_samples, Some(0)) {
            return bad("fit_halfwidth_samples must be >= 1".into());
        }
        Ok(())
    }

    /// Fills signal-dependent defaults for a record of `len` samples at
    /// `sample_rate` Hz.
    ///
    /// Window range: `[duration/32, duration/16]`, floored so the narrowest
    /// window spans at least two samples per σ.
    pub fn resolve(&self, sample_rate: f64, len: usize) -> Result<ResolvedConfig> {
        self.validate()?;
        let duration = len as f64 / sample_rate;
        let floor = 2.0 / sample_rate;
        let sigma_min = self.sigma_min.unwrap_or((duration / 32.0).max(floor));
        let sigma_max = self
            .sigma_max
            .unwrap_or((duration / 16.0).max(floor))
            .max(sigma_min);
        let sigma_grid = match (self.fixed_sigma, self.sigma_step) {
            (Some(s), _) => vec![s],
            (None, Some(step)) => {
                let n = ((sigma_max - sigma_min) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| sigma_min + i as f64 * step).collect()
            }
            (None, None) => log_grid(sigma_min, sigma_max, self.sigma_count),
        };
        let grid_step = sigma_grid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let delta_sigma = self.delta_sigma.unwrap_or(if grid_step.is_finite() {
            grid_step
        } else {
            0.05 * sigma_min
        });
        let widest = sigma_grid.iter().copied().fold(sigma_max, f64::max);
        let zeta = self.zeta.unwrap_or(8.0 * widest);
        let smooth_len = self
            .smooth_len
            .unwrap_or_else(|| odd_at_least_one((sigma_min * sample_rate).round() as usize));
        let window = WindowSpec::new(self.tau0, self.truncation_radius)?;
        let freq_bins = match self.freq_bins {
            Some(n) => n,
            None => {
                let support = 2 * window.half_len(widest, sample_rate) + 1;
                (4 * support).next_power_of_two().max(8) / 2 + 1
            }
        };
        let trend_sigma = self
            .extract_trend
            .then(|| self.trend_sigma.unwrap_or(sigma_min));
        Ok(ResolvedConfig {
            window,
            gamma1_rel: self.gamma1_rel,
            gamma2_rel: self.gamma2_rel,
            sigma_min,
            sigma_max,
            sigma_step: self.sigma_step,
            sigma_grid,
            delta_sigma,
            zeta,
            er_epsilon: self.er_epsilon,
            smooth_len,
            max_components: self.max_components,
            freq_bins,
            fit_halfwidth_samples: self.fit_halfwidth_samples,
            trend_sigma,
            fixed_sigma: self.fixed_sigma,
            recovery_model: self.recovery_model,
            refine_sigma: self.refine_sigma,
            smooth_chirp_rate: self.smooth_chirp_rate,
            lambda0_convention: self.lambda0_convention,
        })
    }
}

impl ResolvedConfig {
    /// Resolved values written back as an explicit config.
    pub fn to_config(&self) -> AssoConfig {
        AssoConfig {
            tau0: self.window.tau0,
            truncation_radius: self.window.truncation_radius_in_sigmas,
            gamma1_rel: self.gamma1_rel,
            gamma2_rel: self.gamma2_rel,
            sigma_min: Some(self.sigma_min),
            sigma_max: Some(self.sigma_max),
            sigma_step: self.sigma_step,
            sigma_count: self.sigma_grid.len(),
            delta_sigma: Some(self.delta_sigma),
            zeta: Some(self.zeta),
            er_epsilon: self.er_epsilon,
            smooth_len: Some(self.smooth_len),
            max_components: self.max_components,
            freq_bins: Some(self.freq_bins),
            fit_halfwidth_samples: self.fit_halfwidth_samples,
            extract_trend: self.trend_sigma.is_some(),
            trend_sigma: self.trend_sigma,
            fixed_sigma: self.fixed_sigma,
            recovery_model: self.recovery_model,
            refine_sigma: self.refine_sigma,
            smooth_chirp_rate: self.smooth_chirp_rate,
            lambda0_convention: self.lambda0_convention,
        }
    }

    pub fn fft_len(&self) -> usize {
        2 * (self.freq_bins - 1)
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    g[n - 1] = hi;
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        AssoConfig::default().validate().unwrap();
        let r = AssoConfig::default().resolve(25.6, 512).unwrap();
        assert_eq!(r.sigma_grid.len(), 24);
        assert!((r.sigma_grid[0] - 20.0 / 32.0).abs() < 1e-12);
        assert!((r.sigma_grid[23] - 20.0 / 16.0).abs() < 1e-12);
        assert_eq!(r.smooth_len % 2, 1);
        assert_eq!(r.trend_sigma, Some(r.sigma_min));
        assert!((r.zeta - 8.0 * r.sigma_max).abs() < 1e-12);
    }

    #[test]
    fn parses_flat_key_values() {
        let cfg = AssoConfig::from_toml_str(
            "# comment\ntau0 = 0.2\nsigma_min = 0.01\nrecovery_model = \"sinusoidal\"\nextract_trend = false\n",
        )
        .unwrap();
        assert_eq!(cfg.tau0, 0.2);
        assert_eq!(cfg.sigma_min, Some(0.01));
        assert_eq!(cfg.recovery_model, RecoveryModel::Sinusoidal);
        assert!(!cfg.extract_trend);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(AssoConfig::from_toml_str("tau0 = 1.5").is_err());
        assert!(AssoConfig::from_toml_str("no_such_key = 1").is_err());
        assert!(AssoConfig::from_toml_str("gamma1_rel = 0.1\ngamma2_rel = 0.2").is_err());
        assert!(AssoConfig::from_toml_str("er_epsilon = 0.2").is_err());
        assert!(AssoConfig::from_toml_str("smooth_len = 4").is_err());
        assert!(AssoConfig::from_toml_str("sigma_min = 2.0\nsigma_max = 1.0").is_err());
        assert!(AssoConfig::from_toml_str("tau0 = ").is_err());
        match AssoConfig::from_toml_str("tau0 = \"x\"") {
            Err(e) => assert_eq!(e.exit_code(), 4),
            Ok(_) => panic!(),
        }
    }

    #[test]
    fn set_by_key() {
        let mut cfg = AssoConfig::default();
        cfg.set("sigma_min", "0.05").unwrap();
        cfg.set("recovery_model", "sinusoidal").unwrap();
        cfg.set("max_components", "3").unwrap();
        assert_eq!(cfg.sigma_min, Some(0.05));
        assert_eq!(cfg.recovery_model, RecoveryModel::Sinusoidal);
        assert_eq!(cfg.max_components, 3);
        assert!(cfg.set("tau0", "2").is_err());
        assert!(cfg.set("bogus", "1").is_err());
        assert_eq!(cfg.tau0, 0.1);
    }

    #[test]
    fn resolved_round_trip() {
        let r = AssoConfig::default().resolve(512.0, 512).unwrap();
        let back = r.to_config();
        let text = back.to_toml_string();
        let again = AssoConfig::from_toml_str(&text).unwrap();
        assert_eq!(again, back);
        let r2 = again.resolve(512.0, 512).unwrap();
        assert_eq!(r2.sigma_grid.len(), r.sigma_grid.len());
        for (a, b) in r.sigma_grid.iter().zip(&r2.sigma_grid) {
            assert!((a - b).abs() < 1e-15 * a);
        }
    }

    #[test]
    fn grids() {
        let g = log_grid(0.1, 1.0, 3);
        assert!((g[1] - 0.1f64.sqrt() * 1.0f64.sqrt()).abs() < 1e-12);
        let cfg = AssoConfig {
            sigma_min: Some(0.1),
            sigma_max: Some(0.3),
            sigma_step: Some(0.05),
            ..Default::default()
        };
        let r = cfg.resolve(100.0, 100).unwrap();
        assert_eq!(r.sigma_grid.len(), 5);
        assert!((r.delta_sigma - 0.05).abs() < 1e-12);
        assert_eq!(r.to_config().resolve(100.0, 100).unwrap().sigma_grid, r.sigma_grid);
        let cfg = AssoConfig {
            fixed_sigma: Some(0.02),
            ..Default::default()
        };
        assert_eq!(cfg.resolve(512.0, 512).unwrap().sigma_grid, vec![0.02]);
    }
}
