//! Longitudinal screening: per-firm z-score trajectories are collapsed to
//! one statistic each, optionally deflated for lag-1 autocorrelation, and
//! screened jointly under the two-groups model.

use std::collections::BTreeMap;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::twogroups::{fit_hyperparams, summarize_labeled, FitConfig, FitResult, PosteriorSummary};

/// Observed value of one firm-year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RecordValue {
    /// Pre-standardized score.
    Z { z: f64 },
    /// Raw value with its peer-group benchmark.
    Raw {
        raw_value: f64,
        benchmark_mean: f64,
        benchmark_sd: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub firm_id: String,
    pub year: i64,
    #[serde(flatten)]
    pub value: RecordValue,
}

impl TrajectoryRecord {
    pub fn z(firm_id: impl Into<String>, year: i64, z: f64) -> Self {
        TrajectoryRecord {
            firm_id: firm_id.into(),
            year,
            value: RecordValue::Z { z },
        }
    }

    pub fn raw(firm_id: impl Into<String>, year: i64, raw_value: f64, benchmark_mean: f64, benchmark_sd: f64) -> Self {
        TrajectoryRecord {
            firm_id: firm_id.into(),
            year,
            value: RecordValue::Raw {
                raw_value,
                benchmark_mean,
                benchmark_sd,
            },
        }
    }

    /// The record as a z-score.
    pub fn standardized(&self) -> Result<f64> {
        let z = match self.value {
            RecordValue::Z { z } => z,
            RecordValue::Raw {
                raw_value,
                benchmark_mean,
                benchmark_sd,
            } => {
                if !(benchmark_sd > 0.0) {
                    return Err(Error::input(format!(
                        "firm {} year {}: benchmark_sd must be positive, got {benchmark_sd}",
                        self.firm_id, self.year
                    )));
                }
                (raw_value - benchmark_mean) / benchmark_sd
            }
        };
        if z.is_finite() {
            Ok(z)
        } else {
            Err(Error::input(format!(
                "firm {} year {}: z-score is not finite",
                self.firm_id, self.year
            )))
        }
    }
}

/// One firm's standardized series and its summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmTrajectory {
    pub firm_id: String,
    pub z_series: Vec<f64>,
    pub n: usize,
    pub phi_hat: f64,
    pub n_eff: f64,
    /// `z̄·√n_eff`.
    pub z_stat: f64,
    /// `z̄·√n`.
    pub z_stat_raw: f64,
    /// Set when the autocorrelation was undefined (constant or length-1 series).
    pub degenerate: bool,
}

impl FirmTrajectory {
    fn unaggregated(firm_id: String, z_series: Vec<f64>) -> Self {
        let n = z_series.len();
        FirmTrajectory {
            firm_id,
            z_series,
            n,
            phi_hat: f64::NAN,
            n_eff: f64::NAN,
            z_stat: f64::NAN,
            z_stat_raw: f64::NAN,
            degenerate: false,
        }
    }
}

/// Reads screening input: a CSV with header `firm_id,year,z` or
/// `firm_id,year,raw_value,benchmark_mean,benchmark_sd`, rows in any order.
pub fn read_records<R: Read>(input: R) -> Result<Vec<TrajectoryRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::input(format!("cannot read CSV header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let firm = col("firm_id").ok_or_else(|| Error::input("CSV header lacks firm_id"))?;
    let year = col("year").ok_or_else(|| Error::input("CSV header lacks year"))?;
    enum Layout {
        Z(usize),
        Raw(usize, usize, usize),
    }
    let layout = match (col("z"), col("raw_value"), col("benchmark_mean"), col("benchmark_sd")) {
        (Some(z), None, _, _) => Layout::Z(z),
        (None, Some(r), Some(m), Some(s)) => Layout::Raw(r, m, s),
        _ => {
            return Err(Error::input(
                "CSV header must hold either z or raw_value, benchmark_mean, benchmark_sd",
            ))
        }
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::input(format!("malformed CSV: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize, what: &str| -> Result<&str> {
            row.get(i)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::input(format!("line {line}: missing {what}")))
        };
        let num = |i: usize, what: &str| -> Result<f64> {
            let s = field(i, what)?;
            s.parse::<f64>()
                .map_err(|_| Error::input(format!("line {line}: {what} is not a number: {s:?}")))
        };
        let firm_id = field(firm, "firm_id")?.to_string();
        let y = field(year, "year")?;
        let y: i64 = y
            .parse()
            .map_err(|_| Error::input(format!("line {line}: year is not an integer: {y:?}")))?;
        let value = match layout {
            Layout::Z(z) => RecordValue::Z { z: num(z, "z")? },
            Layout::Raw(r, m, s) => RecordValue::Raw {
                raw_value: num(r, "raw_value")?,
                benchmark_mean: num(m, "benchmark_mean")?,
                benchmark_sd: num(s, "benchmark_sd")?,
            },
        };
        out.push(TrajectoryRecord {
            firm_id,
            year: y,
            value,
        });
    }
    Ok(out)
}

/// Groups records by firm (sorted by firm id) and standardizes each year.
///
/// Years are sorted; gaps are kept as consecutive entries.
pub fn standardize(records: &[TrajectoryRecord]) -> Result<Vec<FirmTrajectory>> {
    let mut by_firm: BTreeMap<&str, Vec<&TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        by_firm.entry(r.firm_id.as_str()).or_default().push(r);
    }
    by_firm
        .into_iter()
        .map(|(firm, mut rows)| {
            rows.sort_by_key(|r| r.year);
            if let Some(pair) = rows.windows(2).find(|p| p[0].year == p[1].year) {
                return Err(Error::input(format!("firm {firm} has duplicate year {}", pair[0].year)));
            }
            let raw = rows
                .iter()
                .filter(|r| matches!(r.value, RecordValue::Raw { .. }))
                .count();
            if raw != 0 && raw != rows.len() {
                return Err(Error::input(format!("firm {firm} mixes z and raw records")));
            }
            let z = rows.iter().map(|r| r.standardized()).collect::<Result<Vec<_>>>()?;
            Ok(FirmTrajectory::unaggregated(firm.to_string(), z))
        })
        .collect()
}

/// Lag-1 autocorrelation thresholded at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lag1 {
    pub phi: f64,
    /// The series was constant and the estimate undefined.
    pub degenerate: bool,
}

/// Biased (denominator-`n`) lag-1 sample autocorrelation, floored at 0.
pub fn lag1_autocorr(z: &[f64]) -> Result<Lag1> {
    if z.len() < 2 {
        return Err(Error::domain(format!(
            "autocorrelation needs at least 2 points, got {}",
            z.len()
        )));
    }
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let den: f64 = z.iter().map(|v| (v - mean).powi(2)).sum();
    if den == 0.0 || !den.is_finite() {
        log::warn!("constant series: autocorrelation set to 0");
        return Ok(Lag1 {
            phi: 0.0,
            degenerate: true,
        });
    }
    let num: f64 = z.windows(2).map(|p| (p[1] - mean) * (p[0] - mean)).sum();
    Ok(Lag1 {
        phi: (num / den).max(0.0),
        degenerate: false,
    })
}

/// `n(1−φ)/(1+φ)`.
pub fn effective_n(n: usize, phi: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::domain(format!("phi must lie in [0, 1), got {phi}")));
    }
    Ok(n as f64 * (1.0 - phi) / (1.0 + phi))
}

/// Fills the summary statistics of a trajectory.
pub fn aggregate(traj: &FirmTrajectory) -> Result<FirmTrajectory> {
    let z = &traj.z_series;
    if z.is_empty() {
        return Err(Error::input(format!("firm {} has no observations", traj.firm_id)));
    }
    let lag = if z.len() == 1 {
        Lag1 {
            phi: 0.0,
            degenerate: true,
        }
    } else {
        lag1_autocorr(z)?
    };
    let n = z.len();
    let mean = z.iter().sum::<f64>() / n as f64;
    let n_eff = effective_n(n, lag.phi)?;
    Ok(FirmTrajectory {
        firm_id: traj.firm_id.clone(),
        z_series: z.clone(),
        n,
        phi_hat: lag.phi,
        n_eff,
        z_stat: mean * n_eff.sqrt(),
        z_stat_raw: mean * (n as f64).sqrt(),
        degenerate: lag.degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScreenConfig {
    pub min_years: usize,
    /// Screen `z_stat` (true) or `z_stat_raw` (false).
    pub ess_correction: bool,
    pub high_threshold: f64,
    pub mid_threshold: f64,
    pub fit: FitConfig,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            min_years: 5,
            ess_correction: true,
            high_threshold: 0.9,
            mid_threshold: 0.5,
            fit: FitConfig::default(),
        }
    }
}

/// Flag tier of one firm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagTier {
    High,
    Mid,
    None,
}

impl FlagTier {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagTier::High => "high",
            FlagTier::Mid => "mid",
            FlagTier::None => "none",
        }
    }
}

/// Firms in one tier and the mean posterior null probability among them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagSet {
    pub firm_ids: Vec<String>,
    pub count: usize,
    pub expected_fdr: f64,
}

impl FlagSet {
    fn collect<'a>(rows: impl Iterator<Item = &'a PosteriorSummary>) -> Self {
        let picked: Vec<&PosteriorSummary> = rows.collect();
        let count = picked.len();
        let expected_fdr = if count == 0 {
            0.0
        } else {
            picked.iter().map(|s| 1.0 - s.incl_prob).sum::<f64>() / count as f64
        };
        FlagSet {
            firm_ids: picked.iter().map(|s| s.observation_id.clone()).collect(),
            count,
            expected_fdr,
        }
    }
}

/// One row of the per-firm report table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmRow {
    pub firm_id: String,
    pub n: usize,
    pub phi_hat: f64,
    pub n_eff: f64,
    pub z_raw: f64,
    pub z_corrected: f64,
    pub incl_prob: f64,
    pub outperf_prob: f64,
    pub local_fdr: f64,
    pub post_mean_beta: f64,
    pub flag_tier: FlagTier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenReport {
    pub cohort_size: usize,
    /// Firms dropped for having fewer than `min_years` records.
    pub excluded: usize,
    pub ess_correction: bool,
    pub flagged_high: FlagSet,
    pub flagged_mid: FlagSet,
    pub rows: Vec<FirmRow>,
    pub summaries: Vec<PosteriorSummary>,
    pub fit: FitResult,
}

/// Filters, aggregates, fits and partitions a cohort.
pub fn screen(trajectories: &[FirmTrajectory], config: &ScreenConfig) -> Result<ScreenReport> {
    if config.min_years == 0 {
        return Err(Error::domain("min_years must be at least 1"));
    }
    if !(0.0 < config.mid_threshold && config.mid_threshold < config.high_threshold && config.high_threshold < 1.0) {
        return Err(Error::domain(format!(
            "thresholds must satisfy 0 < mid < high < 1, got mid = {}, high = {}",
            config.mid_threshold, config.high_threshold
        )));
    }
    let kept: Vec<&FirmTrajectory> = trajectories
        .iter()
        .filter(|t| t.z_series.len() >= config.min_years)
        .collect();
    let excluded = trajectories.len() - kept.len();
    log::info!(
        "min_years = {}: kept {} firms, excluded {excluded}",
        config.min_years,
        kept.len()
    );
    if kept.is_empty() {
        return Err(Error::input(format!(
            "no firm has at least {} years of data",
            config.min_years
        )));
    }
    let firms: Vec<FirmTrajectory> = kept.par_iter().map(|t| aggregate(t)).collect::<Result<_>>()?;
    let ids: Vec<String> = firms.iter().map(|f| f.firm_id.clone()).collect();
    let z: Vec<f64> = firms
        .iter()
        .map(|f| if config.ess_correction { f.z_stat } else { f.z_stat_raw })
        .collect();
    let fit = fit_hyperparams(&z, &config.fit)?;
    let summaries = summarize_labeled(&ids, &z, &fit)?;
    let tier = |p: f64| {
        if p > config.high_threshold {
            FlagTier::High
        } else if p > config.mid_threshold {
            FlagTier::Mid
        } else {
            FlagTier::None
        }
    };
    let rows = firms
        .iter()
        .zip(&summaries)
        .map(|(f, s)| FirmRow {
            firm_id: f.firm_id.clone(),
            n: f.n,
            phi_hat: f.phi_hat,
            n_eff: f.n_eff,
            z_raw: f.z_stat_raw,
            z_corrected: f.z_stat,
            incl_prob: s.incl_prob,
            outperf_prob: s.outperf_prob,
            local_fdr: s.local_fdr,
            post_mean_beta: s.post_mean_beta,
            flag_tier: tier(s.incl_prob),
        })
        .collect::<Vec<_>>();
    let flagged_high = FlagSet::collect(summaries.iter().filter(|s| tier(s.incl_prob) == FlagTier::High));
    let flagged_mid = FlagSet::collect(summaries.iter().filter(|s| tier(s.incl_prob) == FlagTier::Mid));
    Ok(ScreenReport {
        cohort_size: firms.len(),
        excluded,
        ess_correction: config.ess_correction,
        flagged_high,
        flagged_mid,
        rows,
        summaries,
        fit,
    })
}

/// Recipe for a synthetic screening cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CohortSpec {
    pub n_null: usize,
    pub n_signal: usize,
    /// Mean z-score of signal firms.
    pub mu: f64,
    pub years: usize,
    /// AR(1) coefficient of the yearly noise, which keeps unit variance.
    pub phi: f64,
    pub first_year: i64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_null: 1000,
            n_signal: 30,
            mu: 1.5,
            years: 10,
            phi: 0.0,
            first_year: 2000,
            seed: 2024,
        }
    }
}

/// Firm id of the `i`-th signal or null firm in a synthetic cohort.
pub fn synthetic_firm_id(signal: bool, i: usize) -> String {
    if signal {
        format!("S{i:04}")
    } else {
        format!("N{i:04}")
    }
}

/// Records of a synthetic cohort; signal firms have ids starting with `S`.
///
/// Each firm draws from its own stream, so the cohort does not depend on
/// how many firms precede it.
pub fn synthetic_cohort(spec: &CohortSpec) -> Result<Vec<TrajectoryRecord>> {
    if !(0.0..1.0).contains(&spec.phi) {
        return Err(Error::domain(format!("phi must lie in [0, 1), got {}", spec.phi)));
    }
    if spec.years == 0 {
        return Err(Error::domain("years must be at least 1"));
    }
    let innov = (1.0 - spec.phi * spec.phi).sqrt();
    let firms = (0..spec.n_signal)
        .map(|i| (true, i))
        .chain((0..spec.n_null).map(|i| (false, i)));
    let mut out = Vec::with_capacity((spec.n_null + spec.n_signal) * spec.years);
    for (k, (signal, i)) in firms.enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k as u64);
        let mu = if signal { spec.mu } else { 0.0 };
        let mut e: f64 = StandardNormal.sample(&mut rng);
        let id = synthetic_firm_id(signal, i);
        for t in 0..spec.years {
            if t > 0 {
                let eps: f64 = StandardNormal.sample(&mut rng);
                e = spec.phi * e + innov * eps;
            }
            out.push(TrajectoryRecord::z(id.clone(), spec.first_year + t as i64, mu + e));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardization_examples() {
        assert_eq!(
            TrajectoryRecord::raw("a", 1, 0.5, 0.5, 2.0).standardized().unwrap(),
            0.0
        );
        assert_eq!(
            TrajectoryRecord::raw("a", 1, 3.0, 1.0, 0.5).standardized().unwrap(),
            4.0
        );
        let err = TrajectoryRecord::raw("acme", 1999, 3.0, 1.0, 0.0)
            .standardized()
            .unwrap_err();
        assert!(err.to_string().contains("acme") && err.to_string().contains("1999"));
    }

    #[test]
    fn effective_n_examples() {
        assert_eq!(effective_n(10, 0.0).unwrap(), 10.0);
        assert!((effective_n(12, 0.5).unwrap() - 4.0).abs() < 1e-15);
        assert!((effective_n(20, 0.9).unwrap() - 20.0 / 19.0).abs() < 1e-12);
        assert!(effective_n(5, 1.0).is_err());
        assert!(effective_n(0, 0.1).is_err());
    }

    #[test]
    fn autocorrelation_examples() {
        let alt = lag1_autocorr(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(
            alt,
            Lag1 {
                phi: 0.0,
                degenerate: false
            }
        );
        let flat = lag1_autocorr(&[2.0; 4]).unwrap();
        assert_eq!(
            flat,
            Lag1 {
                phi: 0.0,
                degenerate: true
            }
        );
        assert!(lag1_autocorr(&[1.0]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let zero = aggregate(&FirmTrajectory::unaggregated("a".into(), vec![0.0; 6])).unwrap();
        assert_eq!(zero.z_stat, 0.0);
        let ones = aggregate(&FirmTrajectory::unaggregated("b".into(), vec![1.0; 4])).unwrap();
        assert!(ones.degenerate);
        assert_eq!(ones.z_stat, 2.0);
        assert_eq!(ones.z_stat_raw, 2.0);
    }
}
