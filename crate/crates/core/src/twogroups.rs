//! The two-groups model: each effect is exactly zero with probability
//! `1 − w` and drawn from the HIB alternative otherwise.
//!
//! Local and tail-area false discovery rates are closed-form given
//! `(w, τ)`. The hyperparameters themselves are integrated out by
//! self-normalized importance sampling over `w ~ U(0,1)` and a truncated
//! half-Cauchy `τ`.
//!
//! Inside the sampler every marginal likelihood is a kernel integral on a
//! [`KappaGrid`] rather than a `Φ₁` series. Series cost grows like `1/τ²` or
//! `τ²` away from `τ = 1`; the grid costs the same everywhere and agrees with
//! the series to about `1e-12` in `ln C`.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::ln_beta;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::hib::{HIBParams, TAU2_MAX, TAU2_MIN};
use crate::posterior::{log_normal_const, marginal_m1};
use crate::quadrature::KappaGrid;

/// Mixture of a point mass at zero (weight `1 − w`) and the HIB alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoGroupsModel {
    pub w: f64,
    pub hib: HIBParams,
}

impl TwoGroupsModel {
    pub fn new(w: f64, hib: HIBParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::domain(format!("w must lie in [0, 1], got {w}")));
        }
        Ok(TwoGroupsModel { w, hib })
    }
}

/// Which tail a tail-area rate accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `P(Y ≤ y)`.
    Lower,
    /// `P(Y ≥ y)`.
    Upper,
    /// `P(|Y| ≥ |y|)`.
    TwoSided,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(w: f64) -> f64 {
    w.ln() - (-w).ln_1p()
}

/// `ln Φ(x)`, finite for every finite `x`.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x / SQRT_2)).ln_1p()
    } else if x > -30.0 {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else {
        // Laplace continued fraction for the Mills ratio
        let t = -x;
        let mut f = t;
        for k in (1..=40).rev() {
            f = t + f64::from(k) / f;
        }
        -0.5 * t * t - 0.5 * (2.0 * PI).ln() - f.ln()
    }
}

fn check_y(y: f64) -> Result<()> {
    if y.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("observation must be finite, got {y}")))
    }
}

/// `ln m₁(y) − ln m₀(y)`.
fn log_bayes_factor(y: f64, hib: &HIBParams) -> Result<f64> {
    let sig = hib.sigma();
    let ln_m0 = log_normal_const(sig) - y * y / (2.0 * sig * sig);
    Ok(marginal_m1(y, hib)?.ln() - ln_m0)
}

/// Posterior probability that `y` is null: `(1−w)m₀(y) / m(y)`.
pub fn local_fdr(y: f64, m: &TwoGroupsModel) -> Result<f64> {
    check_y(y)?;
    if m.w == 0.0 {
        return Ok(1.0);
    }
    if m.w == 1.0 {
        return Ok(0.0);
    }
    let r = log_bayes_factor(y, &m.hib)?;
    Ok(logistic(-(logit(m.w) + r)))
}

/// `ln P₁(Y ≤ y)` under the alternative: `ln E[Φ(y√κ/σ)]` over the prior.
fn log_alt_cdf(y: f64, hib: &HIBParams) -> Result<f64> {
    let grid = KappaGrid::new(hib.a(), hib.b());
    let tw = grid.with_tau(hib.tau());
    let lv: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&k| log_norm_cdf(y * k.sqrt() / hib.sigma()))
        .collect();
    let v = grid.log_expectation(&tw, hib.s(), &lv);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("tail-area quadrature failed at y = {y}")))
    }
}

/// Tail-area false discovery rate `(1−w)F₀ / {(1−w)F₀ + wF₁}`.
///
/// Both marginals are symmetric, so the upper tail at `y` is the lower tail
/// at `−y`, and the two-sided area is twice the lower tail at `−|y|`.
pub fn tail_fdr(y: f64, m: &TwoGroupsModel, side: Side) -> Result<f64> {
    check_y(y)?;
    if m.w == 0.0 {
        return Ok(1.0);
    }
    if m.w == 1.0 {
        return Ok(0.0);
    }
    let t = match side {
        Side::Lower => y,
        Side::Upper => -y,
        Side::TwoSided => -y.abs(),
    };
    let ln_f0 = log_norm_cdf(t / m.hib.sigma());
    let ln_f1 = log_alt_cdf(t, &m.hib)?;
    Ok(logistic(-(logit(m.w) + ln_f1 - ln_f0)))
}

/// The alternative's fixed shape; `τ` is the only HIB parameter fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlternativeShape {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub sigma: f64,
}

impl Default for AlternativeShape {
    fn default() -> Self {
        AlternativeShape {
            a: 0.5,
            b: 1.0,
            s: 0.0,
            sigma: 1.0,
        }
    }
}

impl AlternativeShape {
    pub fn params(&self, tau: f64) -> Result<HIBParams> {
        HIBParams::with_sigma(self.a, self.b, tau, self.s, self.sigma)
    }
}

/// Importance-sampling proposal for `(w, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    /// Draw from the priors; weights are the likelihood alone.
    Prior,
    /// Defensive mixture of the prior and a pilot-fitted approximation.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    pub n_draws: usize,
    /// Distinct `τ` values; the draws are split evenly among them.
    pub tau_draws: usize,
    pub seed: u64,
    pub min_ess: f64,
    pub shape: AlternativeShape,
    pub tau2_min: f64,
    pub tau2_max: f64,
    /// Scale of the half-Cauchy prior on `τ`.
    pub tau_scale: f64,
    pub proposal: Proposal,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_draws: 5000,
            tau_draws: 50,
            seed: 0,
            min_ess: 50.0,
            shape: AlternativeShape::default(),
            tau2_min: TAU2_MIN,
            tau2_max: TAU2_MAX,
            tau_scale: 1.0,
            proposal: Proposal::Adaptive,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws < 100 {
            return Err(Error::domain(format!(
                "n_draws must be at least 100, got {}",
                self.n_draws
            )));
        }
        if self.tau_draws == 0 || self.tau_draws > self.n_draws {
            return Err(Error::domain(format!(
                "tau_draws must lie in [1, n_draws], got {}",
                self.tau_draws
            )));
        }
        if !(self.min_ess >= 1.0 && self.min_ess <= self.n_draws as f64) {
            return Err(Error::domain(format!(
                "min_ess must lie in [1, n_draws], got {}",
                self.min_ess
            )));
        }
        if !(TAU2_MIN <= self.tau2_min && self.tau2_min < self.tau2_max && self.tau2_max <= TAU2_MAX) {
            return Err(Error::domain(format!(
                "tau^2 bounds [{}, {}] must be ordered and inside [{TAU2_MIN}, {TAU2_MAX}]",
                self.tau2_min, self.tau2_max
            )));
        }
        if !(self.tau_scale > 0.0 && self.tau_scale.is_finite()) {
            return Err(Error::domain(format!(
                "tau_scale must be positive, got {}",
                self.tau_scale
            )));
        }
        self.shape.params(1.0).map(|_| ())
    }
}

/// One weighted importance draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Draw {
    pub w: f64,
    pub tau: f64,
    pub weight: f64,
}

/// Weighted `(w, τ)` draws approximating the hyperparameter posterior.
///
/// Draws sharing a `τ` are contiguous.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub draws: Vec<Draw>,
    pub post_mean_w: f64,
    pub post_mean_tau: f64,
    pub is_effective_sample_size: f64,
    pub seed: u64,
    pub shape: AlternativeShape,
}

impl FitResult {
    /// A degenerate fit holding `(w, τ)` fixed.
    pub fn point(w: f64, tau: f64, shape: AlternativeShape) -> Result<Self> {
        TwoGroupsModel::new(w, shape.params(tau)?)?;
        Ok(FitResult {
            draws: vec![Draw { w, tau, weight: 1.0 }],
            post_mean_w: w,
            post_mean_tau: tau,
            is_effective_sample_size: 1.0,
            seed: 0,
            shape,
        })
    }
}

/// Per-observation posterior summary averaged over the fit.
///
/// `prob_positive` is `P(β > 0 | y, β ≠ 0)`; `outperf_prob` is
/// `P(β > 0 | y) = incl_prob · prob_positive`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub observation_id: String,
    pub z: f64,
    pub incl_prob: f64,
    pub local_fdr: f64,
    pub post_mean_beta: f64,
    pub post_var_beta: f64,
    pub prob_positive: f64,
    pub outperf_prob: f64,
}

/// Number of summaries with `incl_prob > threshold` and the mean of
/// `1 − incl_prob` over them.
pub fn group_fdr(summaries: &[PosteriorSummary], threshold: f64) -> Result<(usize, f64)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let flagged: Vec<f64> = summaries
        .iter()
        .filter(|s| s.incl_prob > threshold)
        .map(|s| 1.0 - s.incl_prob)
        .collect();
    if flagged.is_empty() {
        return Ok((0, 0.0));
    }
    Ok((flagged.len(), flagged.iter().sum::<f64>() / flagged.len() as f64))
}

/// Per-observation quantities at one `τ`.
struct TauStats {
    /// `ln m₁ − ln m₀`.
    r: Vec<f64>,
    /// `E(κ | z)`.
    e1: Vec<f64>,
    /// `E(κ² | z)`; empty on the light path.
    e2: Vec<f64>,
    /// `P(β > 0 | z, β ≠ 0)`; empty on the light path.
    pp: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Detail {
    Light,
    Full,
}

/// Kernel-integral machinery shared by every `τ`.
struct Evaluator<'a> {
    z: &'a [f64],
    shape: AlternativeShape,
    alt: KappaGrid,
    null: KappaGrid,
}

impl<'a> Evaluator<'a> {
    fn new(z: &'a [f64], shape: AlternativeShape) -> Self {
        Evaluator {
            z,
            shape,
            alt: KappaGrid::new(shape.a + 0.5, shape.b),
            null: KappaGrid::new(shape.a, shape.b),
        }
    }

    fn stats(&self, tau: f64, detail: Detail) -> Result<TauStats> {
        let sig = self.shape.sigma;
        let half_inv_var = 0.5 / (sig * sig);
        let ln_c0 = self.null.log_integral(&self.null.with_tau(tau), self.shape.s);
        let tw = self.alt.with_tau(tau);
        let nodes = self.alt.nodes();
        let n = self.z.len();
        let full = detail == Detail::Full;
        let mut out = TauStats {
            r: Vec::with_capacity(n),
            e1: Vec::with_capacity(n),
            e2: Vec::with_capacity(if full { n } else { 0 }),
            pp: Vec::with_capacity(if full { n } else { 0 }),
        };
        let mut tilt = vec![0.0; nodes.len()];
        for (i, &z) in self.z.iter().enumerate() {
            let q = z * z * half_inv_var;
            let s = self.shape.s + q;
            let mut top = f64::NEG_INFINITY;
            for ((t, &k), &lw) in tilt.iter_mut().zip(nodes).zip(&tw) {
                *t = lw - s * k;
                top = top.max(*t);
            }
            let (mut m0, mut m1, mut m2, mut mp) = (0.0, 0.0, 0.0, 0.0);
            for (&t, &k) in tilt.iter().zip(nodes) {
                let e = (t - top).exp();
                m0 += e;
                m1 += e * k;
                if full {
                    m2 += e * k * k;
                    mp += e * crate::posterior::norm_cdf((1.0 - k).sqrt() * z / sig);
                }
            }
            let r = top + m0.ln() - ln_c0 + q;
            if !r.is_finite() {
                return Err(Error::Numeric(format!("marginal likelihood not finite at tau = {tau}"))
                    .for_observation(i.to_string()));
            }
            out.r.push(r);
            out.e1.push(m1 / m0);
            if full {
                out.e2.push(m2 / m0);
                out.pp.push((mp / m0).clamp(0.0, 1.0));
            }
        }
        Ok(out)
    }
}

/// `r` values above this use the overflow-safe mixture form.
const R_SPLIT: f64 = 30.0;

/// `Σᵢ ln{(1−w) + w e^{rᵢ}}` and its first two `w`-derivatives.
struct MixtureLik<'a> {
    r: &'a [f64],
    /// `e^{rᵢ} − 1` where `rᵢ ≤ R_SPLIT`.
    em1: Vec<f64>,
}

impl<'a> MixtureLik<'a> {
    fn new(r: &'a [f64]) -> Self {
        let em1 = r.iter().map(|&x| if x <= R_SPLIT { x.exp_m1() } else { 0.0 }).collect();
        MixtureLik { r, em1 }
    }

    fn value(&self, w: f64) -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        self.r
            .iter()
            .zip(&self.em1)
            .map(|(&r, &d)| {
                if r <= R_SPLIT {
                    (w * d).ln_1p()
                } else {
                    r + (w + (1.0 - w) * (-r).exp()).ln()
                }
            })
            .sum()
    }

    /// `(g′(w), g″(w))`.
    fn derivatives(&self, w: f64) -> (f64, f64) {
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&r, &d) in self.r.iter().zip(&self.em1) {
            let t = if r <= 0.0 {
                d / (1.0 + w * d)
            } else {
                let e = (-r).exp();
                (1.0 - e) / (w + (1.0 - w) * e)
            };
            g1 += t;
            g2 -= t * t;
        }
        (g1, g2)
    }

    /// Location of the maximum over `[0, 1]`; the function is concave.
    fn mode(&self) -> Mode {
        let (d0, c0) = self.derivatives(0.0);
        if d0 <= 0.0 {
            return Mode::Lower {
                slope: d0,
                curvature: c0,
            };
        }
        let (d1, c1) = self.derivatives(1.0);
        if d1 >= 0.0 {
            return Mode::Upper {
                slope: d1,
                curvature: c1,
            };
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut w = 0.5;
        for _ in 0..200 {
            let (g1, g2) = self.derivatives(w);
            if g1 > 0.0 {
                lo = w;
            } else {
                hi = w;
            }
            let newton = w - g1 / g2;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - w).abs() <= 1e-14 * w.max(1e-300) || hi - lo <= 1e-300 {
                w = next;
                break;
            }
            w = next;
        }
        let (_, g2) = self.derivatives(w);
        Mode::Interior { w, curvature: g2 }
    }

    /// Laplace approximation to `ln ∫₀¹ exp{g(w)} dw`.
    fn log_marginal(&self) -> f64 {
        // one-sided: ∫₀^∞ exp(−|g′|t − ½|g″|t²) dt ≈ 1/(|g′| + √(2|g″|/π))
        let edge = |slope: f64, curvature: f64| -(slope.abs() + (FRAC_2_PI * curvature.abs()).sqrt()).ln();
        match self.mode() {
            Mode::Lower { slope, curvature } => edge(slope, curvature),
            Mode::Upper { slope, curvature } => self.value(1.0) + edge(slope, curvature),
            Mode::Interior { w, curvature } => self.value(w) + 0.5 * (2.0 * PI / -curvature).ln(),
        }
    }
}

enum Mode {
    Lower { slope: f64, curvature: f64 },
    Upper { slope: f64, curvature: f64 },
    Interior { w: f64, curvature: f64 },
}

/// Weight of the prior component in every adaptive proposal.
const DEFENSIVE: f64 = 0.15;
/// Proposal spread relative to the approximate posterior.
const INFLATE: f64 = 1.5;

/// `DEFENSIVE·U(0,1) + (1−DEFENSIVE)·Beta(α, β)` on `w`.
struct WProposal {
    beta: Option<(f64, f64, f64)>,
}

impl WProposal {
    fn uniform() -> Self {
        WProposal { beta: None }
    }

    fn fitted(lik: &MixtureLik) -> Self {
        let (alpha, beta) = match lik.mode() {
            Mode::Lower { slope, curvature } => {
                let mean = 1.0 / (slope.abs() + (FRAC_2_PI * curvature.abs()).sqrt());
                (1.0, (1.0 / (INFLATE * mean) - 1.0).max(1.0))
            }
            Mode::Upper { slope, curvature } => {
                let mean = 1.0 / (slope.abs() + (FRAC_2_PI * curvature.abs()).sqrt());
                ((1.0 / (INFLATE * mean) - 1.0).max(1.0), 1.0)
            }
            Mode::Interior { w, curvature } => {
                let m = w.clamp(1e-9, 1.0 - 1e-9);
                let sd = INFLATE / (-curvature).sqrt();
                let k = m * (1.0 - m) / (sd * sd) - 1.0;
                if m * k >= 1.0 && (1.0 - m) * k >= 1.0 {
                    (m * k, (1.0 - m) * k)
                } else if m <= 0.5 {
                    // mode within one spread of the edge: one-sided shape
                    (1.0, (1.0 / (m + sd).min(0.5) - 1.0).max(1.0))
                } else {
                    ((1.0 / (1.0 - m + sd).min(0.5) - 1.0).max(1.0), 1.0)
                }
            }
        };
        WProposal {
            beta: Some((alpha, beta, ln_beta(alpha, beta))),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        let w = match self.beta {
            Some((a, b, _)) if u >= DEFENSIVE => Beta::new(a, b).map(|d| d.sample(rng)).unwrap_or(0.5),
            _ => rng.gen(),
        };
        w.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
    }

    fn ln_density(&self, w: f64) -> f64 {
        match self.beta {
            None => 0.0,
            Some((a, b, lb)) => {
                let ln_beta_pdf = (a - 1.0) * w.ln() + (b - 1.0) * (-w).ln_1p() - lb;
                (DEFENSIVE + (1.0 - DEFENSIVE) * ln_beta_pdf.exp()).ln()
            }
        }
    }
}

/// Half-Cauchy on `τ` truncated to `[lo, hi]`, handled in `u = ln τ`.
struct TauPrior {
    scale: f64,
    f_lo: f64,
    f_hi: f64,
    u_lo: f64,
    u_hi: f64,
}

impl TauPrior {
    fn new(cfg: &FitConfig) -> Self {
        let (lo, hi) = (cfg.tau2_min.sqrt(), cfg.tau2_max.sqrt());
        let cdf = |t: f64| FRAC_2_PI * (t / cfg.tau_scale).atan();
        TauPrior {
            scale: cfg.tau_scale,
            f_lo: cdf(lo),
            f_hi: cdf(hi),
            u_lo: lo.ln(),
            u_hi: hi.ln(),
        }
    }

    /// Density of `u = ln τ`.
    fn ln_density(&self, u: f64) -> f64 {
        let t = u.exp() / self.scale;
        u + (FRAC_2_PI / self.scale).ln() - (t * t).ln_1p() - (self.f_hi - self.f_lo).ln()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let p = self.f_lo + (self.f_hi - self.f_lo) * rng.gen::<f64>();
        (self.scale * (0.5 * PI * p).tan()).ln().clamp(self.u_lo, self.u_hi)
    }
}

/// Proposal on `u = ln τ`: the prior alone, or a defensive mixture with a
/// truncated normal.
struct TauProposal {
    normal: Option<(f64, f64, f64, f64)>,
}

impl TauProposal {
    fn ln_density(&self, prior: &TauPrior, u: f64) -> f64 {
        let lp = prior.ln_density(u);
        match self.normal {
            None => lp,
            Some((mu, sd, c_lo, c_hi)) => {
                let x = (u - mu) / sd;
                let ln_tn = -0.5 * x * x - 0.5 * (2.0 * PI).ln() - sd.ln() - (c_hi - c_lo).ln();
                (DEFENSIVE * lp.exp() + (1.0 - DEFENSIVE) * ln_tn.exp()).ln()
            }
        }
    }

    fn sample(&self, prior: &TauPrior, rng: &mut ChaCha8Rng) -> f64 {
        let pick: f64 = rng.gen();
        match self.normal {
            Some((mu, sd, c_lo, c_hi)) if pick >= DEFENSIVE => {
                let p = c_lo + (c_hi - c_lo) * rng.gen::<f64>();
                let std = Normal::new(0.0, 1.0).expect("unit normal");
                (mu + sd * std.inverse_cdf(p)).clamp(prior.u_lo, prior.u_hi)
            }
            _ => prior.sample(rng),
        }
    }
}

/// Normalized weights, mean and standard deviation of `u` from log masses.
fn moments(us: &[f64], log_mass: &[f64]) -> (f64, f64) {
    let top = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wts: Vec<f64> = log_mass.iter().map(|&l| (l - top).exp()).collect();
    let total: f64 = wts.iter().sum();
    let mean = us.iter().zip(&wts).map(|(&u, &w)| u * w).sum::<f64>() / total;
    let var = us.iter().zip(&wts).map(|(&u, &w)| w * (u - mean).powi(2)).sum::<f64>() / total;
    (mean, var.sqrt())
}

fn pilot(ev: &Evaluator, prior: &TauPrior) -> Result<TauProposal> {
    let approx = |us: &[f64]| -> Result<Vec<f64>> {
        us.par_iter()
            .map(|&u| {
                let st = ev.stats(u.exp(), Detail::Light)?;
                Ok(MixtureLik::new(&st.r).log_marginal() + prior.ln_density(u))
            })
            .collect()
    };
    let (lo, hi) = (prior.u_lo, prior.u_hi);
    let coarse: Vec<f64> = (0..20).map(|k| lo + (f64::from(k) + 0.5) * (hi - lo) / 20.0).collect();
    let (mu, sd) = moments(&coarse, &approx(&coarse)?);
    let half = 4.0 * sd.max(0.05);
    let (flo, fhi) = ((mu - half).max(lo), (mu + half).min(hi));
    let fine: Vec<f64> = (0..12)
        .map(|k| flo + (f64::from(k) + 0.5) * (fhi - flo) / 12.0)
        .collect();
    let (mu, sd) = moments(&fine, &approx(&fine)?);
    let sd = (INFLATE * sd).max(0.02);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let c_lo = std.cdf((lo - mu) / sd);
    let c_hi = std.cdf((hi - mu) / sd);
    if !(c_hi - c_lo > 1e-12) {
        return Ok(TauProposal { normal: None });
    }
    Ok(TauProposal {
        normal: Some((mu, sd, c_lo, c_hi)),
    })
}

fn check_z(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::input("no observations to fit"));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("observation must be finite, got {}", z[i])).for_observation(i.to_string()));
    }
    Ok(())
}

/// Draws plus the per-`τ` statistics that produced them.
struct Fitted {
    result: FitResult,
    stats: Vec<TauStats>,
}

fn fit_inner(z: &[f64], cfg: &FitConfig) -> Result<Fitted> {
    cfg.validate()?;
    check_z(z)?;
    let ev = Evaluator::new(z, cfg.shape);
    let prior = TauPrior::new(cfg);
    let proposal = match cfg.proposal {
        Proposal::Prior => TauProposal { normal: None },
        Proposal::Adaptive => pilot(&ev, &prior)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let us: Vec<f64> = (0..cfg.tau_draws).map(|_| proposal.sample(&prior, &mut rng)).collect();
    let stats: Vec<TauStats> = us
        .par_iter()
        .map(|&u| ev.stats(u.exp(), Detail::Light))
        .collect::<Result<_>>()?;

    let per = cfg.n_draws / cfg.tau_draws;
    let extra = cfg.n_draws % cfg.tau_draws;
    let liks: Vec<MixtureLik> = stats.iter().map(|s| MixtureLik::new(&s.r)).collect();
    let mut planned: Vec<(usize, Vec<f64>, WProposal)> = Vec::with_capacity(cfg.tau_draws);
    for (t, lik) in liks.iter().enumerate() {
        let wp = match cfg.proposal {
            Proposal::Prior => WProposal::uniform(),
            Proposal::Adaptive => WProposal::fitted(lik),
        };
        let k = per + usize::from(t < extra);
        let ws: Vec<f64> = (0..k).map(|_| wp.sample(&mut rng)).collect();
        planned.push((t, ws, wp));
    }
    let log_w: Vec<Vec<f64>> = planned
        .par_iter()
        .map(|(t, ws, wp)| {
            let u = us[*t];
            let base = prior.ln_density(u) - proposal.ln_density(&prior, u);
            ws.iter()
                .map(|&w| liks[*t].value(w) + base - wp.ln_density(w))
                .collect()
        })
        .collect();

    let top = log_w.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numeric("importance log-weights are not finite".into()));
    }
    let raw: Vec<f64> = log_w.iter().flatten().map(|&l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    let mut draws = Vec::with_capacity(cfg.n_draws);
    let mut idx = 0;
    for (t, ws, _) in &planned {
        for &w in ws {
            draws.push(Draw {
                w,
                tau: us[*t].exp(),
                weight: raw[idx] / total,
            });
            idx += 1;
        }
    }
    let ess = 1.0 / draws.iter().map(|d| d.weight * d.weight).sum::<f64>();
    if ess < cfg.min_ess {
        return Err(Error::DegenerateWeights {
            ess,
            min_ess: cfg.min_ess,
            n_draws: cfg.n_draws,
        });
    }
    let post_mean_w = draws.iter().map(|d| d.weight * d.w).sum();
    let post_mean_tau = draws.iter().map(|d| d.weight * d.tau).sum();
    Ok(Fitted {
        result: FitResult {
            draws,
            post_mean_w,
            post_mean_tau,
            is_effective_sample_size: ess.min(cfg.n_draws as f64),
            seed: cfg.seed,
            shape: cfg.shape,
        },
        stats,
    })
}

/// Posterior draws of `(w, τ)` given observations `z`.
pub fn fit_hyperparams(z: &[f64], config: &FitConfig) -> Result<FitResult> {
    Ok(fit_inner(z, config)?.result)
}

/// Contiguous runs of draws sharing a `τ`, as index ranges.
fn tau_groups(draws: &[Draw]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=draws.len() {
        if i == draws.len() || draws[i].tau != draws[start].tau {
            out.push(start..i);
            start = i;
        }
    }
    out
}

struct Accum {
    incl: Vec<f64>,
    mean: Vec<f64>,
    second: Vec<f64>,
    outperf: Vec<f64>,
}

fn accumulate(z: &[f64], fit: &FitResult, groups: &[std::ops::Range<usize>], stats: &[TauStats]) -> Accum {
    let n = z.len();
    let full = stats.first().is_some_and(|s| !s.e2.is_empty());
    let sig2 = fit.shape.sigma * fit.shape.sigma;
    let mut acc = Accum {
        incl: vec![0.0; n],
        mean: vec![0.0; n],
        second: vec![0.0; if full { n } else { 0 }],
        outperf: vec![0.0; if full { n } else { 0 }],
    };
    let mut p = vec![0.0; n];
    for (range, st) in groups.iter().zip(stats) {
        p.iter_mut().for_each(|v| *v = 0.0);
        for d in &fit.draws[range.clone()] {
            if d.weight == 0.0 {
                continue;
            }
            let lw = logit(d.w);
            for (pi, &r) in p.iter_mut().zip(&st.r) {
                *pi += d.weight * logistic(lw + r);
            }
        }
        for i in 0..n {
            let shrunk = (1.0 - st.e1[i]) * z[i];
            acc.incl[i] += p[i];
            acc.mean[i] += p[i] * shrunk;
            if full {
                acc.second[i] += p[i] * (sig2 * (1.0 - st.e1[i]) + z[i] * z[i] * (1.0 - 2.0 * st.e1[i] + st.e2[i]));
                acc.outperf[i] += p[i] * st.pp[i];
            }
        }
    }
    acc
}

fn group_stats(z: &[f64], fit: &FitResult, groups: &[std::ops::Range<usize>], detail: Detail) -> Result<Vec<TauStats>> {
    fit.shape.params(1.0)?;
    let ev = Evaluator::new(z, fit.shape);
    groups
        .par_iter()
        .map(|g| ev.stats(fit.draws[g.start].tau, detail))
        .collect()
}

/// Per-observation summaries, identified by position.
pub fn summarize(z: &[f64], fit: &FitResult) -> Result<Vec<PosteriorSummary>> {
    let ids: Vec<String> = (0..z.len()).map(|i| i.to_string()).collect();
    summarize_labeled(&ids, z, fit)
}

/// Per-observation summaries carrying caller-supplied identifiers.
pub fn summarize_labeled(ids: &[String], z: &[f64], fit: &FitResult) -> Result<Vec<PosteriorSummary>> {
    if ids.len() != z.len() {
        return Err(Error::input(format!(
            "{} identifiers for {} observations",
            ids.len(),
            z.len()
        )));
    }
    check_z(z).map_err(|e| relabel(e, ids))?;
    let groups = tau_groups(&fit.draws);
    let stats = group_stats(z, fit, &groups, Detail::Full).map_err(|e| relabel(e, ids))?;
    let acc = accumulate(z, fit, &groups, &stats);
    Ok((0..z.len())
        .map(|i| {
            let incl = acc.incl[i].clamp(0.0, 1.0);
            let mean = acc.mean[i];
            let outperf = acc.outperf[i].clamp(0.0, incl);
            PosteriorSummary {
                observation_id: ids[i].clone(),
                z: z[i],
                incl_prob: incl,
                local_fdr: 1.0 - incl,
                post_mean_beta: mean,
                post_var_beta: (acc.second[i] - mean * mean).max(0.0),
                prob_positive: if incl > 0.0 { (outperf / incl).min(1.0) } else { 0.5 },
                outperf_prob: outperf,
            }
        })
        .collect())
}

/// Replace positional observation ids with caller labels.
fn relabel(e: Error, ids: &[String]) -> Error {
    match e {
        Error::Observation { id, source } => {
            let label = id.parse::<usize>().ok().and_then(|i| ids.get(i)).cloned().unwrap_or(id);
            Error::Observation { id: label, source }
        }
        other => other,
    }
}

/// Point estimates from a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub fit: FitResult,
    /// Model-averaged posterior means of `β`.
    pub beta_hat: Vec<f64>,
    pub incl_prob: Vec<f64>,
}

/// Fit and posterior means in one pass, reusing the fit's likelihood
/// evaluations for the means.
pub fn fit_and_estimate(z: &[f64], config: &FitConfig) -> Result<Estimate> {
    let Fitted { result, stats } = fit_inner(z, config)?;
    let groups = tau_groups(&result.draws);
    debug_assert_eq!(groups.len(), stats.len());
    let acc = accumulate(z, &result, &groups, &stats);
    Ok(Estimate {
        beta_hat: acc.mean,
        incl_prob: acc.incl.into_iter().map(|p| p.clamp(0.0, 1.0)).collect(),
        fit: result,
    })
}
