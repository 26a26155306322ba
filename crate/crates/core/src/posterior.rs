//! Exact posterior quantities for one observation `y ~ N(β, σ²)` under the
//! family, with `β | κ ~ N(0, σ²(1−κ)/κ)`.
//!
//! Conditioning on `y` keeps the family closed: the κ-posterior has
//! `a′ = a + ½` and `s′ = s + y²/2σ²`. Every quantity below is therefore a
//! ratio of kernel integrals, except the sign probability, which is
//! integrated on a [`KappaGrid`].

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::hib::{hb_moment, log_kernel_integral, HIBParams};
use crate::quadrature::KappaGrid;
use crate::specfun::LogSigned;

/// Posterior summary of one observation under the alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectPosterior {
    pub post_mean_beta: f64,
    pub post_var_beta: f64,
    pub e_kappa: f64,
    pub var_kappa: f64,
    pub log_marginal_m1: f64,
    pub prob_positive: f64,
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn check_y(y: f64) -> Result<()> {
    if y.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("observation must be finite, got {y}")))
    }
}

/// Parameters of the κ-posterior: `a + ½` and `s + y²/2σ²`.
pub fn posterior_update(y: f64, p: &HIBParams) -> HIBParams {
    let sig2 = p.sigma() * p.sigma();
    p.shifted(p.a() + 0.5, p.s() + y * y / (2.0 * sig2))
}

/// `E[κⁿ | y]`.
pub fn posterior_kappa_moment(n: u32, y: f64, p: &HIBParams) -> Result<f64> {
    check_y(y)?;
    hb_moment(n, &posterior_update(y, p))
}

/// `E[β | y] = {1 − E(κ|y)} y`.
pub fn posterior_mean_beta(y: f64, p: &HIBParams) -> Result<f64> {
    Ok((1.0 - posterior_kappa_moment(1, y, p)?) * y)
}

/// `Var[β | y] = σ²{1 − E(κ|y)} + y² Var(κ|y)`.
pub fn posterior_var_beta(y: f64, p: &HIBParams) -> Result<f64> {
    check_y(y)?;
    let m = KappaMoments::new(y, p)?;
    Ok(m.var_beta(y, p.sigma()))
}

/// Marginal density of `y` when `β` is drawn from the prior.
pub fn marginal_m1(y: f64, p: &HIBParams) -> Result<LogSigned> {
    check_y(y)?;
    let q = posterior_update(y, p);
    let num = log_kernel_integral(q.a(), q.b(), q.tau(), q.s())?;
    let den = log_kernel_integral(p.a(), p.b(), p.tau(), p.s())?;
    Ok(LogSigned::from_ln(num - den + log_normal_const(p.sigma())))
}

/// `−½ ln(2πσ²)`.
pub(crate) fn log_normal_const(sigma: f64) -> f64 {
    -0.5 * (2.0 * PI).ln() - sigma.ln()
}

/// `d/dy ln m₁(y) = −E(κ|y) y / σ²`.
pub fn score_m1(y: f64, p: &HIBParams) -> Result<f64> {
    let ek = posterior_kappa_moment(1, y, p)?;
    Ok(-ek * y / (p.sigma() * p.sigma()))
}

/// Shrinkage factor `g(Z) = E(κ | Z)` for a `dim`-vector `y` with
/// `Z = ‖y‖²` and unit noise; the estimate is `{1 − g(Z)} y`.
pub fn g_shrink(z: f64, dim: usize, p: &HIBParams) -> Result<f64> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::domain(format!("Z must be nonnegative and finite, got {z}")));
    }
    if dim == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let a = p.a() + 0.5 * dim as f64;
    let s = p.s() + 0.5 * z;
    let num = log_kernel_integral(a + 1.0, p.b(), p.tau(), s)?;
    let den = log_kernel_integral(a, p.b(), p.tau(), s)?;
    Ok((num - den).exp())
}

/// `P(β > 0 | y)` under the alternative.
///
/// Given κ the posterior of β is `N((1−κ)y, (1−κ)σ²)`, so this is
/// `E[Φ(√(1−κ) y/σ) | y]`, integrated over the κ-posterior.
pub fn prob_positive(y: f64, p: &HIBParams) -> Result<f64> {
    check_y(y)?;
    let q = posterior_update(y, p);
    let grid = KappaGrid::new(q.a(), q.b());
    let v = grid.expect(&q, |k| norm_cdf((1.0 - k).sqrt() * y / p.sigma()));
    if v.is_finite() {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::Numeric(format!("sign probability quadrature failed at y = {y}")))
    }
}

/// First two κ-posterior moments from three kernel integrals.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KappaMoments {
    pub e1: f64,
    pub e2: f64,
    /// `ln C(a′, b, τ, s′)`.
    pub log_c: f64,
}

impl KappaMoments {
    pub(crate) fn new(y: f64, p: &HIBParams) -> Result<Self> {
        let q = posterior_update(y, p);
        let (a, b, tau, s) = (q.a(), q.b(), q.tau(), q.s());
        let c0 = log_kernel_integral(a, b, tau, s)?;
        let c1 = log_kernel_integral(a + 1.0, b, tau, s)?;
        let c2 = log_kernel_integral(a + 2.0, b, tau, s)?;
        Ok(KappaMoments {
            e1: (c1 - c0).exp(),
            e2: (c2 - c0).exp(),
            log_c: c0,
        })
    }

    pub(crate) fn var_kappa(&self) -> f64 {
        (self.e2 - self.e1 * self.e1).max(0.0)
    }

    pub(crate) fn var_beta(&self, y: f64, sigma: f64) -> f64 {
        sigma * sigma * (1.0 - self.e1) + y * y * self.var_kappa()
    }
}

/// All posterior summaries of `y` at once, sharing the series evaluations.
pub fn effect_posterior(y: f64, p: &HIBParams) -> Result<EffectPosterior> {
    check_y(y)?;
    let m = KappaMoments::new(y, p)?;
    let log_c_prior = log_kernel_integral(p.a(), p.b(), p.tau(), p.s())?;
    Ok(EffectPosterior {
        post_mean_beta: (1.0 - m.e1) * y,
        post_var_beta: m.var_beta(y, p.sigma()),
        e_kappa: m.e1,
        var_kappa: m.var_kappa(),
        log_marginal_m1: m.log_c - log_c_prior + log_normal_const(p.sigma()),
        prob_positive: prob_positive(y, p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_examples() {
        let p = HIBParams::strawderman();
        let q = posterior_update(0.0, &p);
        assert_eq!((q.a(), q.b(), q.tau(), q.s()), (1.0, 1.0, 1.0, 0.0));
        assert_eq!(posterior_update(2.0, &p).s(), 2.0);
        let p = HIBParams::with_sigma(0.5, 1.0, 1.0, -1.0, 2.0).unwrap();
        assert_eq!(posterior_update(3.0, &p).s(), 0.125);
    }

    #[test]
    fn closed_form_examples() {
        let hs = HIBParams::horseshoe();
        assert_eq!(posterior_kappa_moment(0, 1.3, &hs).unwrap(), 1.0);
        // κ | y=0 ~ Beta(1, ½)
        assert!((posterior_kappa_moment(1, 0.0, &hs).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let uniform = HIBParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((posterior_var_beta(0.0, &uniform).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(posterior_mean_beta(0.0, &hs).unwrap(), 0.0);
        assert_eq!(score_m1(0.0, &hs).unwrap(), 0.0);
        assert!((prob_positive(0.0, &hs).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn g_shrink_at_origin() {
        let p = HIBParams::new(0.7, 1.3, 1.0, 0.0).unwrap();
        for dim in [1usize, 4, 25] {
            let h = 0.5 * dim as f64;
            let want = (0.7 + h) / (2.0 + h);
            assert!((g_shrink(0.0, dim, &p).unwrap() - want).abs() < 1e-12);
        }
        assert!(g_shrink(-1.0, 3, &p).is_err());
        assert!(g_shrink(1.0, 0, &p).is_err());
    }

    #[test]
    fn large_observations() {
        let p = HIBParams::strawderman();
        assert!((posterior_mean_beta(20.0, &p).unwrap() - 20.0).abs() < 0.15);
        assert!((posterior_var_beta(30.0, &p).unwrap() - 1.0).abs() < 0.05);
        assert!(prob_positive(10.0, &p).unwrap() > 0.999);
        // s′ = 1e4 is far past where e^{s′} overflows
        assert!(marginal_m1(150.0, &p).unwrap().ln().is_finite());
    }
}
