//! Fixed composite Gauss–Legendre rules on the κ interval.
//!
//! Posterior expectations of non-polynomial functions of κ (sign
//! probabilities, tail areas) have no series form, so they are integrated
//! numerically against the family's density. Mass can sit anywhere from
//! `κ ≈ a/s′` (large observations) to the endpoints, so the rule uses
//! decade-spaced panels in `ln κ` toward 0 and in `ln(1−κ)` toward 1, and
//! absorbs the power singularities on the two end panels by substitution.

use std::sync::OnceLock;

use crate::hib::HIBParams;

/// Gauss–Legendre order on each panel.
const ORDER: usize = 16;

fn gauss_legendre() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut x = [0.0; ORDER];
        let mut w = [0.0; ORDER];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1e-3) {
                    dp = legendre(n, z).1;
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        // ascending nodes
        x.reverse();
        w.reverse();
        (x, w)
    })
}

/// `(Pₙ(z), Pₙ′(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Nodes and log base weights for `∫₀¹ κ^{a−1}(1−κ)^{b−1} g(κ) dκ`.
#[derive(Debug, Clone)]
pub struct KappaGrid {
    kappa: Vec<f64>,
    log_base: Vec<f64>,
}

/// Panel edges in κ below ½; the upper half mirrors them in `1−κ`.
const EDGES: [f64; 12] = [0.0, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.3, 0.5];

impl KappaGrid {
    pub fn new(a: f64, b: f64) -> Self {
        let (x, w) = gauss_legendre();
        let mut kappa = Vec::with_capacity(2 * (EDGES.len() - 1) * ORDER);
        let mut log_base = Vec::with_capacity(kappa.capacity());
        let k1 = EDGES[1];
        // left endpoint: κ = k1·t^{1/a}
        for (&xi, &wi) in x.iter().zip(w) {
            let t = 0.5 * (xi + 1.0);
            let k = k1 * t.powf(1.0 / a);
            kappa.push(k);
            log_base.push((0.5 * wi).ln() + a * k1.ln() - a.ln() + (b - 1.0) * (-k).ln_1p());
        }
        for pair in EDGES[1..].windows(2) {
            push_panel(&mut kappa, &mut log_base, x, w, pair[0], pair[1], a, b, false);
        }
        for pair in EDGES[1..].windows(2).rev() {
            push_panel(&mut kappa, &mut log_base, x, w, pair[0], pair[1], a, b, true);
        }
        // right endpoint: 1−κ = k1·u^{1/b}
        for (&xi, &wi) in x.iter().zip(w).rev() {
            let u = 0.5 * (xi + 1.0);
            let one_minus = k1 * u.powf(1.0 / b);
            kappa.push(1.0 - one_minus);
            log_base.push((0.5 * wi).ln() + b * k1.ln() - b.ln() + (a - 1.0) * (-one_minus).ln_1p());
        }
        KappaGrid { kappa, log_base }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.kappa
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// Log weights including the `τ` bracket, still missing the `e^{−sκ}` tilt.
    pub fn with_tau(&self, tau: f64) -> Vec<f64> {
        let inv_t2 = 1.0 / (tau * tau);
        self.kappa
            .iter()
            .zip(&self.log_base)
            .map(|(&k, &lb)| lb - (inv_t2 + (1.0 - inv_t2) * k).ln())
            .collect()
    }

    /// `E[f(κ)]` under the density with log weights `tau_weights − sκ`,
    /// where `values[j] = f(κⱼ)`.
    pub fn expectation(&self, tau_weights: &[f64], s: f64, values: &[f64]) -> f64 {
        debug_assert_eq!(tau_weights.len(), self.kappa.len());
        debug_assert_eq!(values.len(), self.kappa.len());
        let top = self
            .kappa
            .iter()
            .zip(tau_weights)
            .map(|(&k, &lw)| lw - s * k)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for ((&k, &lw), &v) in self.kappa.iter().zip(tau_weights).zip(values) {
            let e = (lw - s * k - top).exp();
            num += e * v;
            den += e;
        }
        num / den
    }

    /// `ln Σⱼ exp(tau_weightsⱼ − sκⱼ)`: the log kernel integral `ln C` on
    /// this grid's `(a, b)`.
    pub fn log_integral(&self, tau_weights: &[f64], s: f64) -> f64 {
        debug_assert_eq!(tau_weights.len(), self.kappa.len());
        let top = self
            .kappa
            .iter()
            .zip(tau_weights)
            .map(|(&k, &lw)| lw - s * k)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self
            .kappa
            .iter()
            .zip(tau_weights)
            .map(|(&k, &lw)| (lw - s * k - top).exp())
            .sum();
        top + sum.ln()
    }

    /// `ln E[f(κ)]` for positive `f`, with `log_values[j] = ln f(κⱼ)`.
    pub fn log_expectation(&self, tau_weights: &[f64], s: f64, log_values: &[f64]) -> f64 {
        debug_assert_eq!(log_values.len(), self.kappa.len());
        let tilted: Vec<f64> = self
            .kappa
            .iter()
            .zip(tau_weights)
            .zip(log_values)
            .map(|((&k, &lw), &lv)| lw - s * k + lv)
            .collect();
        let top = tilted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let num: f64 = tilted.iter().map(|&t| (t - top).exp()).sum();
        top + num.ln() - self.log_integral(tau_weights, s)
    }

    /// Convenience form of [`expectation`](Self::expectation) for one parameter set.
    pub fn expect<F: Fn(f64) -> f64>(&self, p: &HIBParams, f: F) -> f64 {
        let tw = self.with_tau(p.tau());
        let values: Vec<f64> = self.kappa.iter().map(|&k| f(k)).collect();
        self.expectation(&tw, p.s(), &values)
    }
}

#[allow(clippy::too_many_arguments)]
fn push_panel(
    kappa: &mut Vec<f64>,
    log_base: &mut Vec<f64>,
    x: &[f64; ORDER],
    w: &[f64; ORDER],
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
    mirrored: bool,
) {
    // Integrate in u = ln d, d the distance to the nearer endpoint: the
    // power factor becomes a smooth exponential in u.
    let (ulo, uhi) = (lo.ln(), hi.ln());
    let half = 0.5 * (uhi - ulo);
    let mid = 0.5 * (uhi + ulo);
    let order: Vec<usize> = if mirrored {
        (0..ORDER).rev().collect()
    } else {
        (0..ORDER).collect()
    };
    for j in order {
        let u = mid + half * x[j];
        let d = u.exp();
        let (k, ln_k, ln_1mk) = if mirrored {
            (1.0 - d, (-d).ln_1p(), u)
        } else {
            (d, u, (-d).ln_1p())
        };
        kappa.push(k);
        log_base.push((half * w[j]).ln() + u + (a - 1.0) * ln_k + (b - 1.0) * ln_1mk);
    }
}
