//! Confluent hypergeometric kernels in log-signed arithmetic.
//!
//! Everything downstream (normalizers, moments, marginals) is a ratio of
//! Humbert `Φ₁` values whose magnitude grows like `e^x` in the first
//! argument, so results are carried as [`LogSigned`] to survive arguments
//! in the hundreds.
//!
//! Argument convention:
//!
//! ```text
//! Φ₁(α, β; γ; x, y) = Σ_{m,n ≥ 0} (α)_{m+n} (β)_n / ((γ)_{m+n} m! n!) xᵐ yⁿ
//! ```
//!
//! so that `Φ₁(α, β; γ; x, 0) = ₁F₁(α; γ; x)` and
//! `Φ₁(α, β; γ; 0, y) = ₂F₁(α, β; γ; y)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A real number stored as `sign · exp(log_magnitude)`.
#[derive(Clone, Copy, PartialEq)]
pub struct LogSigned {
    log_magnitude: f64,
    sign: i8,
}

impl LogSigned {
    pub const ZERO: LogSigned = LogSigned {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: LogSigned = LogSigned {
        log_magnitude: 0.0,
        sign: 1,
    };

    /// Builds a value from its parts. A zero sign forces the zero value.
    pub fn new(log_magnitude: f64, sign: i8) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogSigned {
            log_magnitude,
            sign: sign.signum(),
        }
    }

    /// Positive value `exp(ln)`.
    pub fn from_ln(ln: f64) -> Self {
        Self::new(ln, 1)
    }

    pub fn from_f64(x: f64) -> Self {
        match x.partial_cmp(&0.0) {
            Some(Ordering::Greater) => Self::new(x.ln(), 1),
            Some(Ordering::Less) => Self::new((-x).ln(), -1),
            _ => Self::ZERO,
        }
    }

    pub fn log_magnitude(self) -> f64 {
        self.log_magnitude
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Natural log of a positive value; `NaN` otherwise.
    pub fn ln(self) -> f64 {
        if self.sign > 0 {
            self.log_magnitude
        } else {
            f64::NAN
        }
    }

    /// Converts to `f64`, saturating to ±∞ or 0.
    pub fn value(self) -> f64 {
        f64::from(self.sign) * self.log_magnitude.exp()
    }

    /// Multiplies by `exp(delta)`.
    pub fn scale_ln(self, delta: f64) -> Self {
        if self.is_zero() {
            self
        } else {
            LogSigned {
                log_magnitude: self.log_magnitude + delta,
                sign: self.sign,
            }
        }
    }

    pub fn abs(self) -> Self {
        LogSigned {
            log_magnitude: self.log_magnitude,
            sign: self.sign.abs(),
        }
    }
}

impl fmt::Debug for LogSigned {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogSigned({}·e^{})", self.sign, self.log_magnitude)
    }
}

impl Mul for LogSigned {
    type Output = LogSigned;
    fn mul(self, rhs: LogSigned) -> LogSigned {
        LogSigned::new(self.log_magnitude + rhs.log_magnitude, self.sign * rhs.sign)
    }
}

impl Div for LogSigned {
    type Output = LogSigned;
    fn div(self, rhs: LogSigned) -> LogSigned {
        if rhs.is_zero() {
            return LogSigned::new(f64::INFINITY, self.sign.max(1));
        }
        LogSigned::new(self.log_magnitude - rhs.log_magnitude, self.sign * rhs.sign)
    }
}

impl Neg for LogSigned {
    type Output = LogSigned;
    fn neg(self) -> LogSigned {
        LogSigned {
            log_magnitude: self.log_magnitude,
            sign: -self.sign,
        }
    }
}

impl Add for LogSigned {
    type Output = LogSigned;
    fn add(self, rhs: LogSigned) -> LogSigned {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.log_magnitude >= rhs.log_magnitude {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let ratio = (small.log_magnitude - big.log_magnitude).exp();
        if big.sign == small.sign {
            LogSigned::new(big.log_magnitude + ratio.ln_1p(), big.sign)
        } else if ratio >= 1.0 {
            LogSigned::ZERO
        } else {
            LogSigned::new(big.log_magnitude + (-ratio).ln_1p(), big.sign)
        }
    }
}

impl Sub for LogSigned {
    type Output = LogSigned;
    fn sub(self, rhs: LogSigned) -> LogSigned {
        self + (-rhs)
    }
}

/// Truncation controls shared by every series in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub rel_tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            rel_tolerance: 1e-12,
            max_terms: 100_000,
        }
    }
}

impl SeriesControl {
    pub fn new(rel_tolerance: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tolerance > 0.0) || max_terms == 0 {
            return Err(Error::domain(format!(
                "series control needs rel_tolerance > 0 and max_terms >= 1, got {rel_tolerance}, {max_terms}"
            )));
        }
        Ok(SeriesControl {
            rel_tolerance,
            max_terms,
        })
    }
}

/// Largest |y| accepted by [`phi1`] and [`gauss_2f1`].
pub const MAX_ABS_Y: f64 = 1.0 - 1e-6;

/// Consecutive sub-tolerance terms required before a series is declared converged.
const QUIET_TERMS: usize = 3;

const RESCALE: f64 = 1e200;
const LN_RESCALE: f64 = 460.517_018_598_809_1; // ln(1e200)

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

fn check_gamma(gamma: f64, what: &str) -> Result<()> {
    if !gamma.is_finite() || is_nonpositive_integer(gamma) {
        return Err(Error::domain(format!(
            "{what}: lower parameter must not be zero or a negative integer, got {gamma}"
        )));
    }
    Ok(())
}

/// Sum of signed terms given in log form, kept relative to a moving reference.
#[derive(Debug, Clone, Copy)]
struct ScaledSum {
    acc: f64,
    log_ref: f64,
}

impl ScaledSum {
    fn new() -> Self {
        ScaledSum {
            acc: 0.0,
            log_ref: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, term: LogSigned) {
        if term.is_zero() {
            return;
        }
        if self.log_ref == f64::NEG_INFINITY {
            self.log_ref = term.log_magnitude;
        } else if term.log_magnitude > self.log_ref + 300.0 {
            self.acc *= (self.log_ref - term.log_magnitude).exp();
            self.log_ref = term.log_magnitude;
        }
        self.acc += f64::from(term.sign) * (term.log_magnitude - self.log_ref).exp();
    }

    fn get(&self) -> LogSigned {
        LogSigned::from_f64(self.acc).scale_ln(self.log_ref)
    }

    fn log_abs(&self) -> f64 {
        self.log_ref + self.acc.abs().ln()
    }
}

/// Rising factorial `x (x+1) ··· (x+n−1)`; `n = 0` gives one.
pub fn pochhammer(x: f64, n: u32) -> LogSigned {
    let mut out = LogSigned::ONE;
    for i in 0..n {
        out = out * LogSigned::from_f64(x + f64::from(i));
        if out.is_zero() {
            break;
        }
    }
    out
}

/// `ln B(a, b)` for positive arguments.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!(
            "log_beta needs positive finite arguments, got ({a}, {b})"
        )));
    }
    Ok(ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

/// Kummer's confluent hypergeometric function `₁F₁(α; γ; x)`.
///
/// Negative arguments go through `₁F₁(α;γ;x) = eˣ ₁F₁(γ−α;γ;−x)` first.
pub fn kummer_1f1(alpha: f64, gamma: f64, x: f64, ctrl: SeriesControl) -> Result<LogSigned> {
    check_gamma(gamma, "kummer_1f1")?;
    if !alpha.is_finite() || !x.is_finite() {
        return Err(Error::domain("kummer_1f1: non-finite argument"));
    }
    if x == 0.0 {
        return Ok(LogSigned::ONE);
    }
    if x < 0.0 {
        return Ok(hyp1f1_nonneg(gamma - alpha, gamma, -x, ctrl)?.scale_ln(x));
    }
    hyp1f1_nonneg(alpha, gamma, x, ctrl)
}

/// Plain Maclaurin series of `₁F₁(a; c; x)` for `x ≥ 0`.
fn hyp1f1_nonneg(a: f64, c: f64, x: f64, ctrl: SeriesControl) -> Result<LogSigned> {
    let mut sum = 1.0_f64;
    let mut term = 1.0_f64;
    let mut log_scale = 0.0;
    let mut quiet = 0;
    for m in 0..ctrl.max_terms {
        let mf = m as f64;
        term *= (a + mf) / (c + mf) * x / (mf + 1.0);
        if term == 0.0 {
            return Ok(LogSigned::from_f64(sum).scale_ln(log_scale));
        }
        sum += term;
        if sum.abs() > RESCALE || term.abs() > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += LN_RESCALE;
        }
        // Bound on every later term ratio, valid once both parameters are past zero.
        let (an, cn) = (a + mf + 1.0, c + mf + 1.0);
        let r = (an / cn).max(1.0) * x / (mf + 2.0);
        if an > 0.0 && cn > 0.0 && r < 1.0 && term.abs() * r / (1.0 - r) <= ctrl.rel_tolerance * sum.abs() {
            quiet += 1;
            if quiet >= QUIET_TERMS {
                return Ok(LogSigned::from_f64(sum).scale_ln(log_scale));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Series {
        function: "kummer_1f1",
        terms: ctrl.max_terms,
        log_partial_sum: sum.abs().ln() + log_scale,
    })
}

fn check_y(y: f64, what: &str) -> Result<()> {
    if !y.is_finite() || y.abs() >= 1.0 {
        return Err(Error::domain(format!("{what}: need |y| < 1, got {y}")));
    }
    if y.abs() > MAX_ABS_Y {
        return Err(Error::domain(format!(
            "{what}: |y| = {} exceeds {MAX_ABS_Y}; series would converge too slowly",
            y.abs()
        )));
    }
    Ok(())
}

/// Gauss hypergeometric function `₂F₁(α, β; γ; y)` for `|y| < 1`.
///
/// Nonnegative `y` is summed directly. Negative `y` uses the Pfaff
/// transformation on the first parameter,
/// `₂F₁(α,β;γ;y) = (1−y)^{−α} ₂F₁(α, γ−β; γ; y/(y−1))`, which keeps the
/// summed series free of sign alternation from the argument.
pub fn gauss_2f1(alpha: f64, beta: f64, gamma: f64, y: f64, ctrl: SeriesControl) -> Result<LogSigned> {
    check_gamma(gamma, "gauss_2f1")?;
    check_y(y, "gauss_2f1")?;
    if y < 0.0 {
        let t = y / (y - 1.0);
        let pre = -alpha * (-y).ln_1p();
        return Ok(hyp2f1_series(alpha, gamma - beta, gamma, t, ctrl)?.scale_ln(pre));
    }
    hyp2f1_series(alpha, beta, gamma, y, ctrl)
}

fn hyp2f1_series(a: f64, b: f64, c: f64, y: f64, ctrl: SeriesControl) -> Result<LogSigned> {
    if y == 0.0 {
        return Ok(LogSigned::ONE);
    }
    let mut sum = 1.0_f64;
    let mut term = 1.0_f64;
    let mut log_scale = 0.0;
    let mut quiet = 0;
    for n in 0..ctrl.max_terms {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * y;
        if term == 0.0 {
            return Ok(LogSigned::from_f64(sum).scale_ln(log_scale));
        }
        sum += term;
        if sum.abs() > RESCALE || term.abs() > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += LN_RESCALE;
        }
        let (an, bn, cn) = (a + nf + 1.0, b + nf + 1.0, c + nf + 1.0);
        let r = (an * bn / (cn * (nf + 2.0))).abs().max(1.0) * y.abs();
        let settled = an > 0.0 && bn > 0.0 && cn > 0.0;
        if settled && r < 1.0 && term.abs() * r / (1.0 - r) <= ctrl.rel_tolerance * sum.abs() {
            quiet += 1;
            if quiet >= QUIET_TERMS {
                return Ok(LogSigned::from_f64(sum).scale_ln(log_scale));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Series {
        function: "gauss_2f1",
        terms: ctrl.max_terms,
        log_partial_sum: sum.abs().ln() + log_scale,
    })
}

/// Humbert's degenerate hypergeometric function `Φ₁(α, β; γ; x, y)`.
///
/// Summed as `Σₙ (α)ₙ(β)ₙ yⁿ / ((γ)ₙ n!) · ₁F₁(α+n; γ+n; x)`. Negative `y`
/// is first mapped to `y/(y−1) ∈ (0, ½)` through
/// `Φ₁(α,β;γ;x,y) = eˣ (1−y)^{−β} Φ₁(γ−α, β; γ; −x, y/(y−1))`.
/// When `β = 1` and `x, y ≥ 0` the same double series is summed along its
/// diagonals, where the inner sums obey a one-step recurrence.
pub fn phi1(alpha: f64, beta: f64, gamma: f64, x: f64, y: f64, ctrl: SeriesControl) -> Result<LogSigned> {
    check_gamma(gamma, "phi1")?;
    check_y(y, "phi1")?;
    if !alpha.is_finite() || !beta.is_finite() || !x.is_finite() {
        return Err(Error::domain("phi1: non-finite argument"));
    }
    if y == 0.0 || beta == 0.0 {
        return kummer_1f1(alpha, gamma, x, ctrl);
    }
    if y < 0.0 {
        let t = y / (y - 1.0);
        let pre = x - beta * (-y).ln_1p();
        return Ok(phi1_nonneg_y(gamma - alpha, beta, gamma, -x, t, ctrl)?.scale_ln(pre));
    }
    phi1_nonneg_y(alpha, beta, gamma, x, y, ctrl)
}

fn phi1_nonneg_y(alpha: f64, beta: f64, gamma: f64, x: f64, y: f64, ctrl: SeriesControl) -> Result<LogSigned> {
    if beta == 1.0 && x >= 0.0 && alpha > 0.0 && gamma > 0.0 {
        phi1_diagonal(alpha, gamma, x, y, ctrl)
    } else {
        phi1_kummer_series(alpha, beta, gamma, x, y, ctrl)
    }
}

/// `Φ₁(α, 1; γ; x, y) = Σₖ (α)ₖ/(γ)ₖ Pₖ` with `Pₖ = y Pₖ₋₁ + xᵏ/k!`.
///
/// Requires `α, γ > 0`, `x ≥ 0`, `0 ≤ y < 1`; every term is then positive.
fn phi1_diagonal(alpha: f64, gamma: f64, x: f64, y: f64, ctrl: SeriesControl) -> Result<LogSigned> {
    let mut coef = 1.0_f64;
    let mut power = 1.0_f64; // xᵏ/k!, shares the running scale with p and sum
    let mut p = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut log_scale = 0.0;
    let mut quiet = 0;
    for k in 1..=ctrl.max_terms {
        let kf = k as f64;
        coef *= (alpha + kf - 1.0) / (gamma + kf - 1.0);
        power *= x / kf;
        p = y * p + power;
        let term = coef * p;
        sum += term;
        if sum > RESCALE || p > RESCALE {
            sum /= RESCALE;
            p /= RESCALE;
            power /= RESCALE;
            log_scale += LN_RESCALE;
        }
        if !sum.is_finite() {
            break;
        }
        // Tail after term k, with ρ bounding every later coefficient ratio:
        //   Σ_{j>k} coef_j P_j ≤ coef_k/(1−ρy) · [ρy P_k + power_k q/(1−q)],
        // q = ρx/(k+1), from P_j = y^{j−k} P_k + Σ_{k<i≤j} y^{j−i} xⁱ/i!.
        let rho = ((alpha + kf) / (gamma + kf)).max(1.0);
        let q = rho * x / (kf + 1.0);
        let ry = rho * y;
        if ry < 1.0 && q < 1.0 {
            let tail = coef / (1.0 - ry) * (ry * p + power * q / (1.0 - q));
            if tail <= ctrl.rel_tolerance * sum {
                quiet += 1;
                if quiet >= QUIET_TERMS {
                    return Ok(LogSigned::from_f64(sum).scale_ln(log_scale));
                }
            } else {
                quiet = 0;
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Series {
        function: "phi1",
        terms: ctrl.max_terms,
        log_partial_sum: sum.ln() + log_scale,
    })
}

fn phi1_kummer_series(alpha: f64, beta: f64, gamma: f64, x: f64, y: f64, ctrl: SeriesControl) -> Result<LogSigned> {
    let mut sum = ScaledSum::new();
    let mut log_coef = 0.0_f64;
    let mut coef_sign: i8 = 1;
    let mut prev_f: Option<LogSigned> = None;
    let mut quiet = 0;
    for n in 0..ctrl.max_terms {
        let nf = n as f64;
        let f = kummer_1f1(alpha + nf, gamma + nf, x, ctrl)?;
        let term = LogSigned::new(log_coef, coef_sign) * f;
        sum.add(term);

        let ratio = (alpha + nf) * (beta + nf) / ((gamma + nf) * (nf + 1.0)) * y;
        if ratio == 0.0 {
            return Ok(sum.get());
        }
        let f_growth = match prev_f {
            Some(pf) if !pf.is_zero() && !f.is_zero() => (f.log_magnitude - pf.log_magnitude).exp().max(1.0),
            _ => 1.0,
        };
        let (an, bn, cn) = (alpha + nf + 1.0, beta + nf + 1.0, gamma + nf + 1.0);
        let r = (an * bn / (cn * (nf + 2.0)) * y).abs().max(ratio.abs()) * f_growth;
        let settled = an > 0.0 && bn > 0.0 && cn > 0.0;
        if settled
            && r < 1.0
            && !term.is_zero()
            && term.log_magnitude + (r / (1.0 - r)).ln() <= ctrl.rel_tolerance.ln() + sum.log_abs()
        {
            quiet += 1;
            if quiet >= QUIET_TERMS {
                return Ok(sum.get());
            }
        } else if !term.is_zero() || !settled {
            quiet = 0;
        }
        log_coef += ratio.abs().ln();
        if ratio < 0.0 {
            coef_sign = -coef_sign;
        }
        prev_f = Some(f);
    }
    Err(Error::Series {
        function: "phi1",
        terms: ctrl.max_terms,
        log_partial_sum: sum.log_abs(),
    })
}
