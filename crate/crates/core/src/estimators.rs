//! Robust M-estimator kernels.
//!
//! The Cauchy estimator `rho(t) = log(1 + (t/c)^2)` has a bounded,
//! redescending influence function, so large residuals contribute
//! vanishing pull on the fit. L2 and (smoothed) L1 are kept as baselines.

use crate::error::{Error, Result};

fn check_scale(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveScale(c))
    }
}

/// `log(1 + (t/c)^2)`.
pub fn cauchy_rho(t: f64, c: f64) -> Result<f64> {
    check_scale(c)?;
    Ok((t / c).powi(2).ln_1p())
}

/// Influence function, the derivative of [`cauchy_rho`]: `2t / (c^2 + t^2)`.
pub fn cauchy_psi(t: f64, c: f64) -> Result<f64> {
    check_scale(c)?;
    Ok(2.0 * t / (c * c + t * t))
}

/// IRR weight for a squared residual norm: `1 / (c^2 + r_sq)`.
pub fn residual_weight(r_sq: f64, c: f64) -> Result<f64> {
    check_scale(c)?;
    if r_sq < 0.0 || r_sq.is_nan() {
        return Err(Error::NegativeResidual(r_sq));
    }
    Ok(1.0 / (c * c + r_sq))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    Cauchy { scale: f64 },
    L2,
    /// Pseudo-Huber smoothed absolute value.
    L1 { smoothing: f64 },
}

impl EstimatorKind {
    pub const DEFAULT_L1_SMOOTHING: f64 = 1e-6;

    pub fn validate(&self) -> Result<()> {
        match *self {
            EstimatorKind::Cauchy { scale } => check_scale(scale),
            EstimatorKind::L2 => Ok(()),
            EstimatorKind::L1 { smoothing } if smoothing > 0.0 => Ok(()),
            EstimatorKind::L1 { smoothing } => Err(Error::InvalidParameter(format!(
                "L1 smoothing must be > 0, got {smoothing}"
            ))),
        }
    }

    pub fn rho(&self, t: f64) -> f64 {
        match *self {
            EstimatorKind::Cauchy { scale } => (t / scale).powi(2).ln_1p(),
            EstimatorKind::L2 => 0.5 * t * t,
            EstimatorKind::L1 { smoothing } => (t * t + smoothing * smoothing).sqrt() - smoothing,
        }
    }

    pub fn psi(&self, t: f64) -> f64 {
        match *self {
            EstimatorKind::Cauchy { scale } => 2.0 * t / (scale * scale + t * t),
            EstimatorKind::L2 => t,
            EstimatorKind::L1 { smoothing } => t / (t * t + smoothing * smoothing).sqrt(),
        }
    }
}

/// `x^2/2` for L2, `sqrt(x^2 + eps^2) - eps` for L1, and the Cauchy rho otherwise.
pub fn baseline_rho(kind: EstimatorKind, t: f64) -> f64 {
    kind.rho(t)
}

/// Per-block loss applied to a squared residual norm `s = ||z - W x||^2`
/// inside the alternating fit.
///
/// Both variants are concave and non-decreasing in `s`, so the IRR weight
/// `loss'(s)` yields a quadratic majorant and the update descends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockLoss {
    /// `log(1 + s / c^2)`.
    Cauchy { scale: f64 },
    /// `s`, the ridge least-squares baseline.
    Squared,
}

impl BlockLoss {
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            BlockLoss::Cauchy { scale } => (s / (scale * scale)).ln_1p(),
            BlockLoss::Squared => s,
        }
    }

    /// Derivative with respect to `s`, i.e. the reweighting factor Q.
    #[inline]
    pub fn weight(&self, s: f64) -> f64 {
        match *self {
            BlockLoss::Cauchy { scale } => 1.0 / (scale * scale + s),
            BlockLoss::Squared => 1.0,
        }
    }
}
