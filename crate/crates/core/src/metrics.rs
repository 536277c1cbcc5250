//! One-step-ahead forecasts from dynamic fits and their evaluation against
//! held-out raw risks (PMSE, CRPS, interval coverage).

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{self, Estimator, RiskMatrix, RiskSummary};
use crate::graph::AdjacencyGraph;
use crate::model::{internal_standardization, Dataset, Family, Link, ModelSpec, Temporal};
use crate::sampler::{run_chain, PosteriorSamples, SamplerConfig};
use crate::seed::{derive_seed, rng_for};

/// Draws kept for CRPS evaluation.
pub const CRPS_MAX_DRAWS: usize = 2000;

/// Predictive risk draws for the slice after the last fitted one. For each
/// retained draw, `alpha_{T+1} = rho alpha_T + delta` with
/// `delta ~ N(0, omega)`; risks are then formed from that draw's `beta` and
/// `phi` with the held-out covariates (and populations, for CG).
pub fn forecast_risks(
    samples: &PosteriorSamples,
    heldout: &Dataset,
    estimator: Estimator,
    seed: u64,
) -> Result<RiskMatrix> {
    let (Some(alpha), Some(rho), Some(omega)) = (&samples.alpha, &samples.rho, &samples.omega) else {
        return Err(Error::Config("forecasting needs samples from a dynamic model".into()));
    };
    if estimator.family() != samples.spec.family {
        return Err(Error::FamilyMismatch {
            estimator: estimator.tag(),
            expected: estimator.family().name(),
        });
    }
    if heldout.n_times() != 1 || heldout.region_ids() != samples.region_ids.as_slice() {
        return Err(Error::Shape("held-out data must be one slice over the fitted regions".into()));
    }
    if heldout.covariate_names() != samples.covariate_names.as_slice() {
        return Err(Error::Shape("held-out covariates differ from the fitted ones".into()));
    }
    let nt = samples.n_times();
    let ni = heldout.n_regions();
    let expected = match estimator {
        Estimator::RCgTilde => Some(internal_standardization(heldout)?),
        _ => None,
    };
    let mut rng = rng_for(seed, "forecast");
    let mut values = Vec::with_capacity(samples.n_draws * ni);
    for d in 0..samples.n_draws {
        let z: f64 = StandardNormal.sample(&mut rng);
        let next = rho[d] * alpha[d * nt + nt - 1] + omega[d].sqrt() * z;
        let beta = samples.beta_draw(d);
        let phi = samples.phi_draw(d);
        let start = values.len();
        for i in 0..ni {
            let xb: f64 = heldout.x_row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            let eta = xb + phi[i] + next;
            values.push(match samples.spec.family {
                Family::Is => eta.exp(),
                Family::Cg => samples.spec.link.probability(eta),
            });
        }
        let row = &mut values[start..];
        match estimator {
            Estimator::RIs => {}
            Estimator::RCgTilde => {
                let e = expected.as_ref().unwrap();
                for ((v, n), e) in row.iter_mut().zip(heldout.n()).zip(e) {
                    *v *= n / e;
                }
            }
            Estimator::RCg => {
                estimators::relative_to_mean(row, heldout.n());
            }
        }
    }
    Ok(RiskMatrix {
        estimator,
        region_ids: samples.region_ids.clone(),
        times: heldout.times().map(<[String]>::to_vec),
        n_draws: samples.n_draws,
        values,
    })
}

/// Sample CRPS, `mean|x - y| - mean|x - x'| / 2` over all ordered pairs.
pub fn crps_empirical(draws: &[f64], observed: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Shape("CRPS needs at least one draw".into()));
    }
    let m = draws.len() as f64;
    let spread: f64 = draws.iter().map(|x| (x - observed).abs()).sum::<f64>() / m;
    let mut pairs = 0.0;
    for (k, x) in draws.iter().enumerate() {
        for y in &draws[k + 1..] {
            pairs += (x - y).abs();
        }
    }
    // each unordered pair appears twice in the double sum
    Ok(spread - pairs / (m * m))
}

/// At most `cap` draws taken at evenly spaced positions.
pub fn thin_evenly(draws: &[f64], cap: usize) -> Vec<f64> {
    if draws.len() <= cap {
        return draws.to_vec();
    }
    (0..cap).map(|k| draws[k * draws.len() / cap]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastRow {
    pub region: String,
    pub predictive_mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub observed: f64,
    pub crps: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastEvaluation {
    pub estimator: Estimator,
    pub level: f64,
    pub pmse: f64,
    pub crps: f64,
    pub coverage: f64,
    pub rows: Vec<ForecastRow>,
}

/// Scores predictive draws against observed raw risks.
pub fn evaluate_holdout(predicted: &RiskMatrix, observed: &[f64], level: f64) -> Result<ForecastEvaluation> {
    if observed.len() != predicted.n_cols() {
        return Err(Error::Shape(format!(
            "{} observed risks for {} predicted regions",
            observed.len(),
            predicted.n_cols()
        )));
    }
    let summary = estimators::summarize(predicted, level)?;
    let mut rows = Vec::with_capacity(observed.len());
    for (j, (s, &y)) in summary.rows.iter().zip(observed).enumerate() {
        let column = predicted.column(j);
        let crps = crps_empirical(&thin_evenly(&column, CRPS_MAX_DRAWS), y)?;
        rows.push(ForecastRow {
            region: s.region.clone(),
            predictive_mean: s.mean,
            lower: s.lower,
            upper: s.upper,
            observed: y,
            crps,
            covered: s.lower <= y && y <= s.upper,
        });
    }
    let n = rows.len() as f64;
    Ok(ForecastEvaluation {
        estimator: predicted.estimator,
        level,
        pmse: rows.iter().map(|r| (r.predictive_mean - r.observed).powi(2)).sum::<f64>() / n,
        crps: rows.iter().map(|r| r.crps).sum::<f64>() / n,
        coverage: rows.iter().filter(|r| r.covered).count() as f64 / n,
        rows,
    })
}

/// Interval lengths of a dynamic fit's last slice against a static fit of
/// that slice alone. Ties count as not shorter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthComparison {
    pub estimator: Estimator,
    pub time: Option<String>,
    pub mean_length_dynamic: f64,
    pub mean_length_static: f64,
    pub share_dynamic_shorter: f64,
}

pub fn compare_lengths(dynamic: &RiskSummary, fixed: &RiskSummary) -> Result<LengthComparison> {
    let ni = fixed.rows.len();
    if ni == 0 || dynamic.rows.len() % ni != 0 || dynamic.estimator != fixed.estimator {
        return Err(Error::Shape("summaries are not comparable".into()));
    }
    let last = &dynamic.rows[dynamic.rows.len() - ni..];
    if last.iter().zip(&fixed.rows).any(|(a, b)| a.region != b.region) {
        return Err(Error::Shape("summaries list regions in different orders".into()));
    }
    let shorter = last.iter().zip(&fixed.rows).filter(|(a, b)| a.length < b.length).count();
    let mean = |rows: &[estimators::RiskRow]| rows.iter().map(|r| r.length).sum::<f64>() / ni as f64;
    Ok(LengthComparison {
        estimator: fixed.estimator,
        time: last[0].time.clone(),
        mean_length_dynamic: mean(last),
        mean_length_static: mean(&fixed.rows),
        share_dynamic_shorter: shorter as f64 / ni as f64,
    })
}

/// Risk summaries of one fit, for every estimator its family supports.
pub fn fit_summaries(samples: &PosteriorSamples, data: &Dataset, level: f64) -> Result<Vec<RiskSummary>> {
    let mut out = Vec::new();
    match samples.spec.family {
        Family::Is => out.push(estimators::summarize(&estimators::risk_is(samples, data)?, level)?),
        Family::Cg => {
            let e = internal_standardization(data)?;
            out.push(estimators::summarize(&estimators::risk_cg_tilde(samples, data, &e)?, level)?);
            out.push(estimators::summarize(&estimators::risk_cg_true(samples, data)?, level)?);
        }
    }
    Ok(out)
}

/// Settings for a hold-out forecast run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastConfig {
    pub families: Vec<Family>,
    pub link: Link,
    pub sampler: SamplerConfig,
    pub level: f64,
    /// Also fit static models to the last fitted slice for comparison.
    pub compare_static: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub family: Family,
    pub rho_mean: f64,
    pub omega_mean: f64,
    pub acceptance_min: f64,
    pub acceptance_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub holdout: String,
    pub fitted_times: Vec<String>,
    pub link: Link,
    pub fits: Vec<FitSummary>,
    pub evaluations: Vec<ForecastEvaluation>,
    pub dynamic_vs_static: Vec<LengthComparison>,
}

/// Fits dynamic models on the slices before `holdout` and scores their
/// one-step-ahead forecasts on the `holdout` slice.
pub fn run_forecast(
    panel: &Dataset,
    graph: &AdjacencyGraph,
    holdout: &str,
    config: &ForecastConfig,
) -> Result<ForecastReport> {
    let times = panel
        .times()
        .ok_or_else(|| Error::Config("forecasting needs a panel dataset with a time column".into()))?;
    let h = times
        .iter()
        .position(|t| t == holdout)
        .ok_or_else(|| Error::Config(format!("hold-out time `{holdout}` is not in the data")))?;
    if h < 2 {
        return Err(Error::Config(format!(
            "hold-out time `{holdout}` leaves fewer than two slices to fit"
        )));
    }
    let train = panel.leading_slices(h)?;
    let test = panel.slice(h)?;
    let observed = test.raw_risks()?;
    let mut fits = Vec::new();
    let mut evaluations = Vec::new();
    let mut comparisons = Vec::new();
    for &family in &config.families {
        let spec = ModelSpec::new(family, config.link, Temporal::DynamicAr1);
        let sampler = SamplerConfig {
            seed: derive_seed(config.sampler.seed, &format!("chain/dynamic/{}", family.name())),
            ..config.sampler
        };
        let samples = run_chain(&train, graph, &spec, &sampler)?;
        let mean = |v: &Option<Vec<f64>>| v.as_ref().map_or(f64::NAN, |v| v.iter().sum::<f64>() / v.len() as f64);
        fits.push(FitSummary {
            family,
            rho_mean: mean(&samples.rho),
            omega_mean: mean(&samples.omega),
            acceptance_min: samples.diagnostics.min_acceptance(),
            acceptance_max: samples.diagnostics.max_acceptance(),
        });
        let ests: &[Estimator] = match family {
            Family::Is => &[Estimator::RIs],
            Family::Cg => &[Estimator::RCgTilde, Estimator::RCg],
        };
        for &est in ests {
            let seed = derive_seed(config.sampler.seed, &format!("forecast/{}", est.tag()));
            let predicted = forecast_risks(&samples, &test, est, seed)?;
            evaluations.push(evaluate_holdout(&predicted, &observed, config.level)?);
        }
        if config.compare_static {
            let last = train.slice(h - 1)?;
            let static_spec = ModelSpec::new(family, config.link, Temporal::Static);
            let sampler = SamplerConfig {
                seed: derive_seed(config.sampler.seed, &format!("chain/static/{}", family.name())),
                ..config.sampler
            };
            let fixed = run_chain(&last, graph, &static_spec, &sampler)?;
            let dyn_summaries = fit_summaries(&samples, &train, config.level)?;
            let fixed_summaries = fit_summaries(&fixed, &last, config.level)?;
            for (d, f) in dyn_summaries.iter().zip(&fixed_summaries) {
                let mut c = compare_lengths(d, f)?;
                c.time = Some(times[h - 1].clone());
                comparisons.push(c);
            }
        }
    }
    Ok(ForecastReport {
        holdout: holdout.to_owned(),
        fitted_times: times[..h].to_vec(),
        link: config.link,
        fits,
        evaluations,
        dynamic_vs_static: comparisons,
    })
}
