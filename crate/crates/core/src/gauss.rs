//! Closed-form Gaussian window and linear-chirp mathematics.
//!
//! Conventions: frequencies in Hz, times in seconds, chirp rates in Hz/s,
//! and a component is written `A cos(2π φ(t))`.
//!
//! The window is the unit-integral Gaussian
//! `g_σ(t) = exp(-t² / 2σ²) / (σ √(2π))`, and the STFT of a linear chirp
//! `A cos(2π(ct + rt²/2))` with that window is, for η > 0 and away from the
//! negative-frequency image,
//!
//! ```text
//! V(t, η) ≈ A e^{j2π(ct + rt²/2)} / (2 √(1 - j2πσ²r)) · m(η - (c + rt))
//! m(ξ)    = exp(-2π²σ²ξ² / (1 - j2πrσ²))
//! ```

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{AssoError, Result};

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(AssoError::param("sigma", format!("must be > 0, got {sigma}")))
    }
}

fn check_tau0(tau0: f64) -> Result<()> {
    if tau0 > 0.0 && tau0 < 1.0 {
        Ok(())
    } else {
        Err(AssoError::param("tau0", format!("must lie in (0, 1), got {tau0}")))
    }
}

/// Unit-integral Gaussian window `g_σ(t)`.
pub fn window_value(t: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(gaussian(t, sigma))
}

#[inline]
pub(crate) fn gaussian(t: f64, sigma: f64) -> f64 {
    let u = t / sigma;
    (-0.5 * u * u).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Spectral shape factor `m(ξ) = exp(-2π²σ²ξ² / (1 - j2πrσ²))`.
pub fn m_factor(xi: f64, sigma: f64, r: f64) -> Result<Complex64> {
    check_sigma(sigma)?;
    let denom = Complex64::new(1.0, -2.0 * PI * r * sigma * sigma);
    let num = Complex64::new(-2.0 * PI * PI * sigma * sigma * xi * xi, 0.0);
    Ok((num / denom).exp())
}

/// Half-width `λ` outside of which `|m(ξ)|` stays below `τ₀` of its peak.
pub fn essential_half_width(sigma: f64, r: f64, tau0: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_tau0(tau0)?;
    let spread = (2.0 * PI * sigma).recip().powi(2) + (r * sigma).powi(2);
    Ok((2.0 * tau0.ln().abs()).sqrt() * spread.sqrt())
}

/// Frequency half-band of the plain window, `√(2|ln τ₀|) / (2πσ)`.
pub fn window_half_band(sigma: f64, tau0: f64) -> Result<f64> {
    essential_half_width(sigma, 0.0, tau0)
}

/// Square root of `z` taken in the same quadrant as `z` (requires `Re z > 0`).
pub fn branch_sqrt(z: Complex64) -> Result<Complex64> {
    if !(z.re > 0.0) || !z.im.is_finite() {
        return Err(AssoError::Domain { re: z.re, im: z.im });
    }
    // Principal root has Re > 0 and shares the sign of Im with z.
    Ok(z.sqrt())
}

/// `√(1 - j2πσ²r)`, the chirp correction factor.
pub fn chirp_factor(sigma: f64, r: f64) -> Complex64 {
    Complex64::new(1.0, -2.0 * PI * sigma * sigma * r).sqrt()
}

/// Closed-form adaptive STFT of `A cos(2π(ct + rt²/2))` at `(t, η)`,
/// dropping the negative-frequency image.
pub fn chirp_stft_closed_form(
    amplitude: f64,
    c: f64,
    r: f64,
    t: f64,
    eta: f64,
    sigma: f64,
) -> Result<Complex64> {
    check_sigma(sigma)?;
    if !(c + r * t > 0.0) {
        return Err(AssoError::param(
            "c + r t",
            format!("instantaneous frequency must be > 0, got {}", c + r * t),
        ));
    }
    if !(eta > 0.0) {
        return Err(AssoError::param("eta", format!("must be > 0, got {eta}")));
    }
    let phase = Complex64::from_polar(1.0, 2.0 * PI * (c * t + 0.5 * r * t * t));
    let root = branch_sqrt(Complex64::new(1.0, -2.0 * PI * sigma * sigma * r))?;
    let m = m_factor(eta - (c + r * t), sigma, r)?;
    Ok(phase * amplitude / (2.0 * root) * m)
}

/// Analytic chirp STFT of the complex exponential `A e^{j2π(ct + rt²/2)}`.
pub fn complex_chirp_stft_closed_form(
    amplitude: f64,
    c: f64,
    r: f64,
    t: f64,
    eta: f64,
    sigma: f64,
) -> Result<Complex64> {
    check_sigma(sigma)?;
    let phase = Complex64::from_polar(1.0, 2.0 * PI * (c * t + 0.5 * r * t * t));
    let root = branch_sqrt(Complex64::new(1.0, -2.0 * PI * sigma * sigma * r))?;
    let m = m_factor(eta - (c + r * t), sigma, r)?;
    Ok(phase * amplitude / root * m)
}
