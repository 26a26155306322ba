//! Approximate Johnstone–Silverman baseline: a point mass at zero mixed
//! with a Laplace prior of fixed rate, mixing weight by marginal maximum
//! likelihood, and the componentwise posterior median as the estimate.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::twogroups::log_norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceConfig {
    /// Rate `a` of the Laplace density `(a/2) e^{−a|β|}`; the default ½ is
    /// the customary fixed value for this baseline.
    pub rate: f64,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        LaplaceConfig { rate: 0.5 }
    }
}

/// `ln g(y)` where `g = γ ⋆ φ` is the Laplace-convolved-with-normal density.
fn log_g(y: f64, a: f64) -> f64 {
    let y = y.abs();
    // g(y) = (a/2) e^{a²/2} {e^{−ay} Φ(y−a) + e^{ay} Φ(−y−a)}
    let l1 = -a * y + log_norm_cdf(y - a);
    let l2 = a * y + log_norm_cdf(-y - a);
    let (hi, lo) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
    (0.5 * a).ln() + 0.5 * a * a + hi + (lo - hi).exp().ln_1p()
}

fn log_phi(y: f64) -> f64 {
    -0.5 * y * y - 0.5 * (2.0 * PI).ln()
}

/// Mixing weight maximizing `Σ ln{(1−w)φ(yᵢ) + w g(yᵢ)}` over `[0, 1]`.
pub fn mml_weight(y: &[f64], cfg: &LaplaceConfig) -> Result<f64> {
    // the log-likelihood is concave in w; bisect on its derivative
    let ratio: Vec<f64> = y.iter().map(|&v| log_g(v, cfg.rate) - log_phi(v)).collect();
    let slope = |w: f64| -> f64 {
        ratio
            .iter()
            .map(|&r| {
                if r <= 0.0 {
                    let d = r.exp_m1();
                    d / (1.0 + w * d)
                } else {
                    let e = (-r).exp();
                    (1.0 - e) / (w + (1.0 - w) * e)
                }
            })
            .sum()
    };
    if slope(0.0) <= 0.0 {
        return Ok(0.0);
    }
    if slope(1.0) >= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    let w = 0.5 * (lo + hi);
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::Numeric(
            "marginal maximum likelihood for the Laplace weight did not converge".into(),
        ))
    }
}

/// Posterior median of `β` given `y` under weight `w`.
pub fn posterior_median(y: f64, w: f64, cfg: &LaplaceConfig) -> f64 {
    if y == 0.0 || w == 0.0 {
        return 0.0;
    }
    let a = cfg.rate;
    let t = y.abs();
    // posterior non-null probability
    let lr = log_g(t, a) - log_phi(t);
    let w_post = 1.0 / (1.0 + (1.0 - w) / w * (-lr).exp());
    // P(β > μ | y) = w_post · e^{−at} Φ̄(μ − t + a) / D for μ ≥ 0, with
    // D = e^{−at} Φ(t − a) + e^{at} Φ(−t − a); the median solves it = ½.
    let ln_d_rel = log_norm_cdf(t - a) + (2.0 * a * t + log_norm_cdf(-t - a) - log_norm_cdf(t - a)).exp().ln_1p();
    let z0 = (ln_d_rel - (2.0 * w_post).ln()).exp();
    if z0 >= 1.0 || !z0.is_finite() {
        return 0.0;
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mu = t - a - std.inverse_cdf(z0);
    mu.clamp(0.0, t).copysign(y)
}

/// Componentwise posterior medians with the weight fitted to `y`.
pub fn run_laplace_baseline(y: &[f64], cfg: &LaplaceConfig) -> Result<Vec<f64>> {
    if !(cfg.rate > 0.0 && cfg.rate.is_finite()) {
        return Err(Error::domain(format!(
            "Laplace rate must be positive, got {}",
            cfg.rate
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::input(format!("observation must be finite, got {v}")));
    }
    let w = mml_weight(y, cfg)?;
    Ok(y.iter().map(|&v| posterior_median(v, w, cfg)).collect())
}
