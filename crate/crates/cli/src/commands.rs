use std::fs;
use std::io::Write;

use anyhow::{bail, Context, Result};
use hibscreen::hib::{hb_density_kappa, hb_mgf, hb_moment, hib_density_lambda2, shrinkage_profile};
use hibscreen::laplace::LaplaceConfig;
use hibscreen::posterior::{g_shrink, marginal_m1, posterior_mean_beta, posterior_var_beta, prob_positive, score_m1};
use hibscreen::screening::{
    read_records, screen, standardize, synthetic_cohort, CohortSpec, FirmRow, FlagSet, ScreenConfig,
};
use hibscreen::simulation::{run_experiment, Estimator, ExperimentConfig, SignalSpec};
use hibscreen::twogroups::{AlternativeShape, FitConfig, FitResult, Proposal};
use hibscreen::HIBParams;
use log::info;
use serde::Serialize;

use crate::args::{
    CohortArgs, EvalArgs, FitArgs, Format, HibArgs, OutputArgs, ProposalArg, Quantity, ScreenArgs, ShrinkArgs,
    SignalKind, SimulateArgs,
};
use crate::output::{csv_num, sink, write_json, Table};

/// Grid `start:end:step`, inclusive of `end` up to rounding.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, step] = parts[..] else {
        bail!("grid must be start:end:step, got {spec:?}");
    };
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .with_context(|| format!("grid entry {s:?} is not a number"))
    };
    let (start, end, step) = (num(start)?, num(end)?, num(step)?);
    if !(start.is_finite() && end.is_finite() && step > 0.0 && step.is_finite() && end >= start) {
        bail!("grid needs finite start ≤ end and step > 0, got {spec:?}");
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    if n > 1_000_000 {
        bail!("grid {spec:?} has {n} points; the limit is 1000000");
    }
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

fn emit<T: Serialize>(out: &OutputArgs, table: &Table, json: &T) -> Result<()> {
    let mut w = sink(out.output.as_deref())?;
    match out.format {
        Format::Csv => table.write(&mut w)?,
        Format::Json => write_json(&mut w, json)?,
    }
    w.flush()?;
    Ok(())
}

fn hib_params(h: &HibArgs) -> Result<HIBParams> {
    Ok(HIBParams::with_sigma(h.a, h.b, h.tau, h.s, h.sigma)?)
}

#[derive(Serialize)]
struct Point {
    x: f64,
    value: f64,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let p = hib_params(&args.hib)?;
    let default_grid = match args.quantity {
        Quantity::KappaDensity => "0.005:0.995:0.01",
        Quantity::Lambda2Density => "0.05:10:0.05",
        Quantity::Mgf => "-5:5:0.25",
        _ => "-10:10:0.25",
    };
    let grid = || parse_grid(args.grid.as_deref().unwrap_or(default_grid));
    let points: Vec<Point> = match args.quantity {
        Quantity::Moments => (1..=args.max_moment)
            .map(|n| {
                Ok(Point {
                    x: f64::from(n),
                    value: hb_moment(n, &p)?,
                })
            })
            .collect::<Result<_>>()?,
        Quantity::ShrinkageProfile => shrinkage_profile(&p, args.points)?
            .into_iter()
            .map(|q| Point {
                x: q.kappa,
                value: q.density,
            })
            .collect(),
        q => {
            let f = |x: f64| -> hibscreen::Result<f64> {
                match q {
                    Quantity::KappaDensity => hb_density_kappa(x, &p),
                    Quantity::Lambda2Density => hib_density_lambda2(x, &p),
                    Quantity::Mgf => hb_mgf(x, &p).map(|v| v.value()),
                    Quantity::PosteriorMean => posterior_mean_beta(x, &p),
                    Quantity::PosteriorVar => posterior_var_beta(x, &p),
                    Quantity::Score => score_m1(x, &p),
                    Quantity::Marginal => marginal_m1(x, &p).map(|v| v.value()),
                    Quantity::ProbPositive => prob_positive(x, &p),
                    Quantity::Moments | Quantity::ShrinkageProfile => unreachable!(),
                }
            };
            grid()?
                .into_iter()
                .map(|x| {
                    f(x).map(|value| Point { x, value })
                        .with_context(|| format!("at x = {x}"))
                })
                .collect::<Result<_>>()?
        }
    };
    let head = if args.quantity == Quantity::Moments { "n" } else { "x" };
    let mut t = Table::new(vec![head, "value"]);
    for pt in &points {
        t.push(vec![csv_num(pt.x), csv_num(pt.value)]);
    }
    emit(&args.out, &t, &points)
}

fn fit_config(f: &FitArgs, a: f64, b: f64, seed: u64) -> FitConfig {
    FitConfig {
        n_draws: f.n_draws,
        tau_draws: f.tau_draws,
        seed,
        min_ess: f.min_ess,
        shape: AlternativeShape {
            a,
            b,
            s: f.s,
            sigma: 1.0,
        },
        tau2_min: f.tau2_min,
        tau2_max: f.tau2_max,
        tau_scale: f.tau_scale,
        proposal: match f.proposal {
            ProposalArg::Prior => Proposal::Prior,
            ProposalArg::Adaptive => Proposal::Adaptive,
        },
    }
}

fn parse_hib_list(spec: &str) -> Result<Vec<Estimator>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .with_context(|| format!("HIB estimator must be a:b, got {pair:?}"))?;
            let a: f64 = a.trim().parse().with_context(|| format!("bad a in {pair:?}"))?;
            let b: f64 = b.trim().parse().with_context(|| format!("bad b in {pair:?}"))?;
            Ok(Estimator::Hib { a, b })
        })
        .collect()
}

pub fn simulation_config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let signal = match args.signal {
        SignalKind::Fixed => SignalSpec::Fixed {
            k: args.k,
            value: args.value,
        },
        SignalKind::Random => SignalSpec::Random {
            k: args.k,
            scale: args.scale,
            df: args.df,
        },
    };
    let mut estimators = parse_hib_list(&args.hib)?;
    if args.laplace.on() {
        estimators.push(Estimator::Laplace);
    }
    let cfg = ExperimentConfig {
        p: args.p,
        signal,
        replicates: args.replicates,
        estimators,
        seed: args.seed,
        fit: fit_config(&args.fit, 0.5, 1.0, 0),
        laplace: LaplaceConfig {
            rate: args.laplace_rate,
        },
        flag_threshold: args.flag_threshold,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = simulation_config(args)?;
    info!("running {} replicates of {:?}", cfg.replicates, cfg.signal);
    let result = run_experiment(&cfg)?;
    let mut t = Table::new(vec!["estimator", "k", "value_or_scale", "sse", "fp", "fdr"]);
    for r in &result.results {
        t.push(vec![
            r.label.clone(),
            cfg.signal.k().to_string(),
            csv_num(cfg.signal.magnitude()),
            csv_num(r.sse_mean),
            csv_num(r.fp_mean),
            csv_num(r.fdr_mean),
        ]);
    }
    emit(&args.out, &t, &result)
}

/// Hyperparameter fit without the individual draws.
#[derive(Serialize)]
struct FitSummary {
    post_mean_w: f64,
    post_mean_tau: f64,
    is_effective_sample_size: f64,
    n_draws: usize,
    seed: u64,
    shape: AlternativeShape,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        FitSummary {
            post_mean_w: f.post_mean_w,
            post_mean_tau: f.post_mean_tau,
            is_effective_sample_size: f.is_effective_sample_size,
            n_draws: f.draws.len(),
            seed: f.seed,
            shape: f.shape,
        }
    }
}

#[derive(Serialize)]
struct ScreenOutput<'a> {
    cohort_size: usize,
    excluded: usize,
    ess_correction: bool,
    flagged_high: &'a FlagSet,
    flagged_mid: &'a FlagSet,
    fit: FitSummary,
    rows: &'a [FirmRow],
}

pub fn screen_cmd(args: &ScreenArgs) -> Result<()> {
    let file = fs::File::open(&args.input).with_context(|| format!("cannot open {}", args.input.display()))?;
    let records =
        read_records(std::io::BufReader::new(file)).with_context(|| format!("in {}", args.input.display()))?;
    let firms = standardize(&records)?;
    let cfg = ScreenConfig {
        min_years: args.min_years,
        ess_correction: args.ess_correction.on(),
        high_threshold: args.high_threshold,
        mid_threshold: args.mid_threshold,
        fit: fit_config(&args.fit, args.a, args.b, args.seed),
    };
    let report = screen(&firms, &cfg)?;
    info!(
        "flagged {} high and {} mid of {} firms",
        report.flagged_high.count, report.flagged_mid.count, report.cohort_size
    );
    let mut t = Table::new(vec![
        "firm_id",
        "n",
        "phi_hat",
        "n_eff",
        "z_raw",
        "z_corrected",
        "incl_prob",
        "outperf_prob",
        "local_fdr",
        "post_mean_beta",
        "flag_tier",
    ]);
    for r in &report.rows {
        t.push(vec![
            r.firm_id.clone(),
            r.n.to_string(),
            csv_num(r.phi_hat),
            csv_num(r.n_eff),
            csv_num(r.z_raw),
            csv_num(r.z_corrected),
            csv_num(r.incl_prob),
            csv_num(r.outperf_prob),
            csv_num(r.local_fdr),
            csv_num(r.post_mean_beta),
            r.flag_tier.as_str().to_string(),
        ]);
    }
    let json = ScreenOutput {
        cohort_size: report.cohort_size,
        excluded: report.excluded,
        ess_correction: report.ess_correction,
        flagged_high: &report.flagged_high,
        flagged_mid: &report.flagged_mid,
        fit: FitSummary::from(&report.fit),
        rows: &report.rows,
    };
    emit(&args.out, &t, &json)
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("{s:?} is not a number")))
        .collect()
}

#[derive(Serialize)]
struct ShrinkOutput {
    dim: usize,
    z: f64,
    g: f64,
    y: Vec<f64>,
    beta_hat: Vec<f64>,
}

pub fn shrink(args: &ShrinkArgs) -> Result<()> {
    let y = match (&args.input, &args.y) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let body: String = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .collect::<Vec<_>>()
                .join("\n");
            parse_values(&body).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(list)) => parse_values(list)?,
        (None, None) => bail!("supply --input or --y"),
    };
    if y.is_empty() {
        bail!("no y values supplied");
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        bail!(hibscreen::Error::input(format!("y values must be finite, got {v}")));
    }
    let p = hib_params(&args.hib)?;
    let z: f64 = y.iter().map(|v| v * v).sum();
    let g = g_shrink(z, y.len(), &p)?;
    let beta_hat: Vec<f64> = y.iter().map(|v| (1.0 - g) * v).collect();
    let mut t = Table::new(vec!["i", "y", "beta_hat"]);
    for (i, (v, b)) in y.iter().zip(&beta_hat).enumerate() {
        t.push(vec![i.to_string(), csv_num(*v), csv_num(*b)]);
    }
    emit(
        &args.out,
        &t,
        &ShrinkOutput {
            dim: y.len(),
            z,
            g,
            y,
            beta_hat,
        },
    )
}

pub fn cohort(args: &CohortArgs) -> Result<()> {
    let spec = CohortSpec {
        n_null: args.n_null,
        n_signal: args.n_signal,
        mu: args.mu,
        years: args.years,
        phi: args.phi,
        first_year: args.first_year,
        seed: args.seed,
    };
    let records = synthetic_cohort(&spec)?;
    let mut t = Table::new(vec!["firm_id", "year", "z"]);
    for r in &records {
        let z = r.standardized()?;
        t.push(vec![r.firm_id.clone(), r.year.to_string(), csv_num(z)]);
    }
    let mut w = sink(args.output.as_deref())?;
    t.write(&mut w)?;
    w.flush()?;
    Ok(())
}
