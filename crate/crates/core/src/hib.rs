//! The hypergeometric inverted-beta family and its κ-scale twin.
//!
//! With `κ = 1/(1+λ²)` the prior density on the shrinkage coefficient is
//!
//! ```text
//! π(κ) ∝ κ^{a−1} (1−κ)^{b−1} {1/τ² + (1−1/τ²)κ}^{−1} e^{−sκ},   0 < κ < 1.
//! ```
//!
//! Every normalizer, moment and marginal in this crate is a ratio of the
//! kernel integral `C(a, b, τ, s)` of that expression, which
//! [`log_kernel_integral`] evaluates through Humbert's `Φ₁`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::{log_beta, phi1, LogSigned, SeriesControl};

/// Smallest admissible `τ²`.
pub const TAU2_MIN: f64 = 1e-3;
/// Largest admissible `τ²`.
pub const TAU2_MAX: f64 = 1e3;

/// Hyperparameters `(a, b, τ, s)` of the family plus the noise scale `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HIBParams {
    a: f64,
    b: f64,
    tau: f64,
    s: f64,
    sigma: f64,
}

impl HIBParams {
    /// Parameters with unit noise scale.
    pub fn new(a: f64, b: f64, tau: f64, s: f64) -> Result<Self> {
        Self::with_sigma(a, b, tau, s, 1.0)
    }

    pub fn with_sigma(a: f64, b: f64, tau: f64, s: f64, sigma: f64) -> Result<Self> {
        let p = HIBParams { a, b, tau, s, sigma };
        p.validate()?;
        Ok(p)
    }

    /// `a = ½, b = 1, τ = 1, s = 0`.
    pub fn strawderman() -> Self {
        HIBParams {
            a: 0.5,
            b: 1.0,
            tau: 1.0,
            s: 0.0,
            sigma: 1.0,
        }
    }

    /// `a = b = ½, τ = 1, s = 0`.
    pub fn horseshoe() -> Self {
        HIBParams {
            a: 0.5,
            b: 0.5,
            tau: 1.0,
            s: 0.0,
            sigma: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let HIBParams { a, b, tau, s, sigma } = *self;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("a must be positive and finite, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::domain(format!("b must be positive and finite, got {b}")));
        }
        if !(tau > 0.0) {
            return Err(Error::domain(format!("tau must be positive, got {tau}")));
        }
        let t2 = tau * tau;
        if !(TAU2_MIN..=TAU2_MAX).contains(&t2) {
            return Err(Error::domain(format!("tau^2 = {t2} outside [{TAU2_MIN}, {TAU2_MAX}]")));
        }
        if !s.is_finite() {
            return Err(Error::domain(format!("s must be finite, got {s}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive and finite, got {sigma}")));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Same parameters with `a` and `s` replaced.
    ///
    /// Only callers that keep `a > 0` and `s` finite may use this, which is
    /// why it is not public.
    pub(crate) fn shifted(&self, a: f64, s: f64) -> Self {
        debug_assert!(a > 0.0 && s.is_finite());
        HIBParams { a, s, ..*self }
    }
}

/// One row of a shrinkage-profile plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkageProfilePoint {
    pub kappa: f64,
    pub density: f64,
}

/// `ln ∫₀¹ κ^{a−1}(1−κ)^{b−1}{1/τ² + (1−1/τ²)κ}^{−1}e^{−sκ} dκ`.
///
/// For `τ ≥ 1` this is `e^{−s} B(a,b) Φ₁(b, 1; a+b; s, 1−1/τ²)`. For `τ < 1`
/// that form would need `|1−1/τ²| > 1`, so the factor `τ²` is pulled out of
/// the bracket instead, giving `τ² B(a,b) Φ₁(a, 1; a+b; −s, 1−τ²)`.
pub fn log_kernel_integral(a: f64, b: f64, tau: f64, s: f64) -> Result<f64> {
    log_kernel_integral_with(a, b, tau, s, SeriesControl::default())
}

pub fn log_kernel_integral_with(a: f64, b: f64, tau: f64, s: f64, ctrl: SeriesControl) -> Result<f64> {
    let lb = log_beta(a, b)?;
    let t2 = tau * tau;
    let f = if t2 >= 1.0 {
        phi1(b, 1.0, a + b, s, 1.0 - 1.0 / t2, ctrl)?.ln() - s
    } else {
        phi1(a, 1.0, a + b, -s, 1.0 - t2, ctrl)?.ln() + t2.ln()
    };
    Ok(lb + f)
}

fn log_c(p: &HIBParams) -> Result<f64> {
    log_kernel_integral(p.a, p.b, p.tau, p.s)
}

/// The normalizing constant `C` of the κ-density.
pub fn hb_normalizer(p: &HIBParams) -> Result<LogSigned> {
    Ok(LogSigned::from_ln(log_c(p)?))
}

/// Unnormalized log kernel at `κ`; no domain checks.
pub(crate) fn log_kernel(kappa: f64, p: &HIBParams) -> f64 {
    let inv_t2 = 1.0 / (p.tau * p.tau);
    (p.a - 1.0) * kappa.ln() + (p.b - 1.0) * (-kappa).ln_1p() - (inv_t2 + (1.0 - inv_t2) * kappa).ln() - p.s * kappa
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("kappa must lie in (0, 1), got {kappa}")))
    }
}

/// Log of the normalized κ-density; usable where the density itself under-
/// or overflows.
pub fn hb_log_density(kappa: f64, p: &HIBParams) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(log_kernel(kappa, p) - log_c(p)?)
}

pub fn hb_density_kappa(kappa: f64, p: &HIBParams) -> Result<f64> {
    hb_log_density(kappa, p).map(f64::exp)
}

/// Density of the variance `λ²` obtained from the κ-density by the change of
/// variables `κ = 1/(1+λ²)`.
pub fn hib_density_lambda2(lambda2: f64, p: &HIBParams) -> Result<f64> {
    if !(lambda2 > 0.0 && lambda2.is_finite()) {
        return Err(Error::domain(format!(
            "lambda2 must be positive and finite, got {lambda2}"
        )));
    }
    let kappa = 1.0 / (1.0 + lambda2);
    // κ rounds to 1 below λ² ≈ 1e-16; the log kernel is written in terms of
    // ln κ and ln(1−κ), so evaluate those from λ² directly.
    let ln_k = -lambda2.ln_1p();
    let ln_1mk = lambda2.ln() - lambda2.ln_1p();
    let inv_t2 = 1.0 / (p.tau * p.tau);
    let ln_kernel = (p.a - 1.0) * ln_k + (p.b - 1.0) * ln_1mk - (inv_t2 + (1.0 - inv_t2) * kappa).ln() - p.s * kappa;
    Ok((ln_kernel - log_c(p)? + 2.0 * ln_k).exp())
}

/// Moment-generating function `E[e^{tκ}]`.
pub fn hb_mgf(t: f64, p: &HIBParams) -> Result<LogSigned> {
    if !t.is_finite() {
        return Err(Error::domain(format!("t must be finite, got {t}")));
    }
    let num = log_kernel_integral(p.a, p.b, p.tau, p.s - t)?;
    Ok(LogSigned::from_ln(num - log_c(p)?))
}

/// Raw moment `E[κⁿ]`.
pub fn hb_moment(n: u32, p: &HIBParams) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let num = log_kernel_integral(p.a + f64::from(n), p.b, p.tau, p.s)?;
    Ok((num - log_c(p)?).exp())
}

/// κ-density on the open grid `κᵢ = i/(grid_size+1)`, `i = 1..=grid_size`.
pub fn shrinkage_profile(p: &HIBParams, grid_size: usize) -> Result<Vec<ShrinkageProfilePoint>> {
    if grid_size < 2 {
        return Err(Error::domain(format!("grid_size must be at least 2, got {grid_size}")));
    }
    let lc = log_c(p)?;
    let h = 1.0 / (grid_size as f64 + 1.0);
    Ok((1..=grid_size)
        .map(|i| {
            let kappa = i as f64 * h;
            ShrinkageProfilePoint {
                kappa,
                density: (log_kernel(kappa, p) - lc).exp(),
            }
        })
        .collect())
}
