//! Monte Carlo comparison of the HIB two-groups estimator with the Laplace
//! baseline on sparse normal-means problems.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::laplace::{run_laplace_baseline, LaplaceConfig};
use crate::twogroups::{fit_and_estimate, AlternativeShape, FitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    /// `k` nonzero means all equal to `value`.
    Fixed { k: usize, value: f64 },
    /// `k` nonzero means drawn as `scale · t_df`.
    Random { k: usize, scale: f64, df: f64 },
}

impl SignalSpec {
    pub fn k(&self) -> usize {
        match *self {
            SignalSpec::Fixed { k, .. } | SignalSpec::Random { k, .. } => k,
        }
    }

    /// The signal value or scale, for tabulation.
    pub fn magnitude(&self) -> f64 {
        match *self {
            SignalSpec::Fixed { value, .. } => value,
            SignalSpec::Random { scale, .. } => scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// Two-groups model with a HIB(a, b) alternative; flags inclusion
    /// probabilities above the threshold.
    Hib { a: f64, b: f64 },
    /// Posterior median under a Laplace mixture; flags nonzero medians.
    Laplace,
}

impl Estimator {
    pub fn label(&self) -> String {
        match *self {
            Estimator::Hib { a, b } => format!("HIB({a},{b})"),
            Estimator::Laplace => "Laplace (approximate Johnstone-Silverman)".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub p: usize,
    pub signal: SignalSpec,
    pub replicates: usize,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    /// Template for the HIB fits; `shape.a`, `shape.b` and `seed` are set
    /// per estimator and replicate.
    pub fit: FitConfig,
    pub laplace: LaplaceConfig,
    pub flag_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p: 1000,
            signal: SignalSpec::Fixed { k: 5, value: 7.0 },
            replicates: 100,
            estimators: vec![Estimator::Hib { a: 0.5, b: 1.0 }, Estimator::Laplace],
            seed: 1,
            fit: FitConfig::default(),
            laplace: LaplaceConfig::default(),
            flag_threshold: 0.5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::domain("p must be at least 1"));
        }
        if self.signal.k() > self.p {
            return Err(Error::domain(format!("k = {} exceeds p = {}", self.signal.k(), self.p)));
        }
        match self.signal {
            SignalSpec::Fixed { value, .. } if !(value > 0.0 && value.is_finite()) => {
                return Err(Error::domain(format!("signal value must be positive, got {value}")))
            }
            SignalSpec::Random { scale, df, .. } if !(scale > 0.0 && scale.is_finite() && df > 0.0) => {
                return Err(Error::domain(format!(
                    "need scale > 0 and df > 0, got {scale} and {df}"
                )))
            }
            _ => {}
        }
        if self.replicates == 0 {
            return Err(Error::domain("replicates must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::domain("no estimators configured"));
        }
        if !(self.flag_threshold > 0.0 && self.flag_threshold < 1.0) {
            return Err(Error::domain(format!(
                "flag_threshold must lie in (0, 1), got {}",
                self.flag_threshold
            )));
        }
        for e in &self.estimators {
            if let Estimator::Hib { a, b } = *e {
                hib_fit_config(&self.fit, a, b, 0).validate()?;
            }
        }
        Ok(())
    }
}

/// True means and their noisy observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
}

/// The RNG stream of one replicate, independent of every other.
fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// SplitMix64 finalizer applied to `(seed, replicate)`.
fn replicate_seed(seed: u64, replicate: usize) -> u64 {
    let mut z = seed ^ (replicate as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Data of one replicate; a pure function of `(config.seed, replicate)`.
pub fn generate_dataset(config: &ExperimentConfig, replicate: usize) -> Result<Dataset> {
    config.validate()?;
    let mut rng = replicate_rng(config.seed, replicate);
    let p = config.p;
    let k = config.signal.k();
    let mut beta = vec![0.0; p];
    let positions = sample(&mut rng, p, k).into_vec();
    match config.signal {
        SignalSpec::Fixed { value, .. } => positions.iter().for_each(|&i| beta[i] = value),
        SignalSpec::Random { scale, df, .. } => {
            let t = StudentT::new(df).map_err(|e| Error::domain(format!("t distribution: {e}")))?;
            for &i in &positions {
                beta[i] = scale * t.sample(&mut rng);
            }
        }
    }
    let y = beta
        .iter()
        .map(|&b| {
            let e: f64 = StandardNormal.sample(&mut rng);
            b + e
        })
        .collect();
    Ok(Dataset { beta, y })
}

fn hib_fit_config(template: &FitConfig, a: f64, b: f64, seed: u64) -> FitConfig {
    FitConfig {
        shape: AlternativeShape { a, b, ..template.shape },
        seed,
        ..*template
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HibEstimate {
    pub beta_hat: Vec<f64>,
    pub incl_prob: Vec<f64>,
}

/// Model-averaged posterior means and inclusion probabilities.
pub fn run_hib_estimator(y: &[f64], a: f64, b: f64, fit_config: &FitConfig) -> Result<HibEstimate> {
    let est = fit_and_estimate(y, &hib_fit_config(fit_config, a, b, fit_config.seed))?;
    Ok(HibEstimate {
        beta_hat: est.beta_hat,
        incl_prob: est.incl_prob,
    })
}

/// Metrics of one estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub sse: f64,
    /// Flags at true zeros.
    pub fp: usize,
    /// `fp / max(1, flagged)`.
    pub fdr: f64,
    pub flagged: usize,
}

pub fn score_replicate(beta: &[f64], beta_hat: &[f64], flags: &[bool]) -> Result<Score> {
    if beta.len() != beta_hat.len() || beta.len() != flags.len() {
        return Err(Error::input(format!(
            "length mismatch: beta {}, beta_hat {}, flags {}",
            beta.len(),
            beta_hat.len(),
            flags.len()
        )));
    }
    let sse = beta.iter().zip(beta_hat).map(|(b, h)| (b - h) * (b - h)).sum();
    let flagged = flags.iter().filter(|&&f| f).count();
    let fp = beta.iter().zip(flags).filter(|(&b, &f)| f && b == 0.0).count();
    Ok(Score {
        sse,
        fp,
        fdr: fp as f64 / flagged.max(1) as f64,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    #[serde(flatten)]
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub estimator: Estimator,
    pub label: String,
    pub sse_mean: f64,
    pub fp_mean: f64,
    pub fdr_mean: f64,
    pub rows: Vec<ReplicateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub results: Vec<EstimatorResult>,
}

impl ExperimentResult {
    pub fn for_estimator(&self, e: &Estimator) -> Option<&EstimatorResult> {
        self.results.iter().find(|r| r.estimator == *e)
    }
}

fn run_replicate(config: &ExperimentConfig, replicate: usize) -> Result<Vec<Score>> {
    let data = generate_dataset(config, replicate)?;
    config
        .estimators
        .iter()
        .map(|e| match *e {
            Estimator::Hib { a, b } => {
                let cfg = hib_fit_config(&config.fit, a, b, replicate_seed(config.seed, replicate));
                let est = run_hib_estimator(&data.y, a, b, &cfg)?;
                let flags: Vec<bool> = est.incl_prob.iter().map(|&p| p > config.flag_threshold).collect();
                score_replicate(&data.beta, &est.beta_hat, &flags)
            }
            Estimator::Laplace => {
                let med = run_laplace_baseline(&data.y, &config.laplace)?;
                let flags: Vec<bool> = med.iter().map(|&m| m != 0.0).collect();
                score_replicate(&data.beta, &med, &flags)
            }
        })
        .collect()
}

/// Averages every estimator's metrics over the replicates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let scores: Vec<Vec<Score>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            run_replicate(config, r).map_err(|e| Error::Replicate {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let n = config.replicates as f64;
    let results = config
        .estimators
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let rows: Vec<ReplicateRow> = scores
                .iter()
                .enumerate()
                .map(|(r, s)| ReplicateRow {
                    replicate: r,
                    score: s[j],
                })
                .collect();
            EstimatorResult {
                estimator: *e,
                label: e.label(),
                sse_mean: rows.iter().map(|r| r.score.sse).sum::<f64>() / n,
                fp_mean: rows.iter().map(|r| r.score.fp as f64).sum::<f64>() / n,
                fdr_mean: rows.iter().map(|r| r.score.fdr).sum::<f64>() / n,
                rows,
            }
        })
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        results,
    })
}
