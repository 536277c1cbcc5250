//! Relative-risk estimators extracted from posterior draws, and their
//! point/interval summaries.
//!
//! * `r_IS`: `exp(X'beta + phi_i (+ alpha_t))` from an IS fit.
//! * `r_CG_tilde`: `n_i p_i / E_i` from a CG fit, with `E` from internal
//!   standardization of the observed data.
//! * `r_CG`: `p_i / pbar` with `pbar = sum n_i p_i / sum n_i` recomputed in
//!   every draw (and every time slice).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{linear_predictor, Dataset, Effects, Family};
use crate::sampler::PosteriorSamples;

pub const MIN_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "r_IS")]
    RIs,
    #[serde(rename = "r_CG_tilde")]
    RCgTilde,
    #[serde(rename = "r_CG")]
    RCg,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::RIs, Estimator::RCgTilde, Estimator::RCg];

    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::RIs => "r_IS",
            Estimator::RCgTilde => "r_CG_tilde",
            Estimator::RCg => "r_CG",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "r_IS" | "r_is" => Ok(Estimator::RIs),
            "r_CG_tilde" | "r_cg_tilde" => Ok(Estimator::RCgTilde),
            "r_CG" | "r_cg" => Ok(Estimator::RCg),
            other => Err(Error::Parse(format!("unknown estimator `{other}`"))),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Estimator::RIs => Family::Is,
            _ => Family::Cg,
        }
    }
}

/// Per-draw risks, row-major (draw, observation) with observation
/// `t * I + i` as in [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct RiskMatrix {
    pub estimator: Estimator,
    pub region_ids: Vec<String>,
    pub times: Option<Vec<String>>,
    pub n_draws: usize,
    pub values: Vec<f64>,
}

impl RiskMatrix {
    pub fn n_cols(&self) -> usize {
        self.region_ids.len() * self.times.as_ref().map_or(1, Vec::len)
    }

    pub fn draw(&self, d: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[d * c..(d + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let c = self.n_cols();
        (0..self.n_draws).map(|d| self.values[d * c + j]).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let c = self.n_cols();
        let mut sums = vec![0.0; c];
        for d in 0..self.n_draws {
            for (s, v) in sums.iter_mut().zip(self.draw(d)) {
                *s += v;
            }
        }
        sums.iter().map(|s| s / self.n_draws as f64).collect()
    }
}

fn require_family(samples: &PosteriorSamples, estimator: Estimator) -> Result<()> {
    let expected = estimator.family();
    if samples.spec.family != expected {
        return Err(Error::FamilyMismatch {
            estimator: estimator.tag(),
            expected: expected.name(),
        });
    }
    Ok(())
}

fn check_conformable(samples: &PosteriorSamples, data: &Dataset) -> Result<()> {
    if samples.region_ids != data.region_ids() || samples.n_times() != data.n_times() {
        return Err(Error::Shape("samples and dataset are not conformable".into()));
    }
    Ok(())
}

/// Linear predictor for every draw and observation.
pub fn linear_predictor_draws(samples: &PosteriorSamples, data: &Dataset) -> Result<Vec<f64>> {
    check_conformable(samples, data)?;
    let (ni, nt) = (data.n_regions(), data.n_times());
    let mut out = Vec::with_capacity(samples.n_draws * ni * nt);
    for d in 0..samples.n_draws {
        let effects = Effects::new(samples.beta_draw(d), samples.phi_draw(d), samples.alpha_draw(d));
        for t in 0..nt {
            for i in 0..ni {
                out.push(linear_predictor(data, &effects, i, t));
            }
        }
    }
    Ok(out)
}

/// Incidence draws `p_it` from a CG fit.
pub fn incidence_draws(samples: &PosteriorSamples, data: &Dataset) -> Result<Vec<f64>> {
    require_family(samples, Estimator::RCg)?;
    let link = samples.spec.link;
    Ok(linear_predictor_draws(samples, data)?
        .into_iter()
        .map(|eta| link.probability(eta))
        .collect())
}

fn matrix(estimator: Estimator, samples: &PosteriorSamples, values: Vec<f64>) -> RiskMatrix {
    RiskMatrix {
        estimator,
        region_ids: samples.region_ids.clone(),
        times: samples.times.clone(),
        n_draws: samples.n_draws,
        values,
    }
}

pub fn risk_is(samples: &PosteriorSamples, data: &Dataset) -> Result<RiskMatrix> {
    require_family(samples, Estimator::RIs)?;
    let values = linear_predictor_draws(samples, data)?
        .into_iter()
        .map(f64::exp)
        .collect();
    Ok(matrix(Estimator::RIs, samples, values))
}

pub fn risk_cg_tilde(samples: &PosteriorSamples, data: &Dataset, expected: &[f64]) -> Result<RiskMatrix> {
    if expected.len() != data.n_obs() {
        return Err(Error::Shape("expected counts do not match the dataset".into()));
    }
    if let Some(e) = expected.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::Domain(format!("expected counts must be positive, got {e}")));
    }
    let p = incidence_draws(samples, data)?;
    let scale: Vec<f64> = data.n().iter().zip(expected).map(|(n, e)| n / e).collect();
    let c = scale.len();
    let values = p
        .iter()
        .enumerate()
        .map(|(k, p)| p * scale[k % c])
        .collect();
    Ok(matrix(Estimator::RCgTilde, samples, values))
}

pub fn risk_cg_true(samples: &PosteriorSamples, data: &Dataset) -> Result<RiskMatrix> {
    let mut values = incidence_draws(samples, data)?;
    let ni = data.n_regions();
    let c = data.n_obs();
    for d in 0..samples.n_draws {
        let draw = &mut values[d * c..(d + 1) * c];
        for t in 0..data.n_times() {
            let n = &data.n()[t * ni..(t + 1) * ni];
            let p = &mut draw[t * ni..(t + 1) * ni];
            let pbar = relative_to_mean(p, n);
            debug_assert!(pbar > 0.0);
        }
    }
    Ok(matrix(Estimator::RCg, samples, values))
}

/// Replaces `p` by `p / pbar` with `pbar` the `n`-weighted mean; returns `pbar`.
pub fn relative_to_mean(p: &mut [f64], n: &[f64]) -> f64 {
    let total_n: f64 = n.iter().sum();
    let pbar = p.iter().zip(n).map(|(p, n)| p * n).sum::<f64>() / total_n;
    p.iter_mut().for_each(|v| *v /= pbar);
    pbar
}

/// Posterior summary for one region (and time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub region: String,
    pub time: Option<String>,
    pub estimator: Estimator,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub length: f64,
    /// Posterior probability that the risk exceeds 1.
    pub prob_above_one: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskSummary {
    pub estimator: Estimator,
    pub level: f64,
    pub rows: Vec<RiskRow>,
}

impl RiskSummary {
    pub fn means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.length).collect()
    }

    /// Rows belonging to time slice `t` (the whole summary when static).
    pub fn slice(&self, t: usize, n_regions: usize) -> &[RiskRow] {
        &self.rows[t * n_regions..(t + 1) * n_regions]
    }
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (position `(n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Mean, median and equal-tailed `level` interval for every column.
pub fn summarize(risks: &RiskMatrix, level: f64) -> Result<RiskSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("interval level must lie in (0, 1), got {level}")));
    }
    if risks.n_draws < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got: risks.n_draws,
        });
    }
    let tail = (1.0 - level) / 2.0;
    let ni = risks.region_ids.len();
    let mut rows = Vec::with_capacity(risks.n_cols());
    let mut col = Vec::with_capacity(risks.n_draws);
    for j in 0..risks.n_cols() {
        col.clear();
        col.extend((0..risks.n_draws).map(|d| risks.values[d * risks.n_cols() + j]));
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let above = col.iter().filter(|&&v| v > 1.0).count() as f64 / col.len() as f64;
        col.sort_by(f64::total_cmp);
        let lower = quantile_sorted(&col, tail);
        let upper = quantile_sorted(&col, 1.0 - tail);
        rows.push(RiskRow {
            region: risks.region_ids[j % ni].clone(),
            time: risks.times.as_ref().map(|ts| ts[j / ni].clone()),
            estimator: risks.estimator,
            mean,
            median: quantile_sorted(&col, 0.5),
            lower,
            upper,
            length: upper - lower,
            prob_above_one: above,
        });
    }
    Ok(RiskSummary {
        estimator: risks.estimator,
        level,
        rows,
    })
}

/// Raw and smoothed estimate for one region, for shrinkage plots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkagePair {
    pub region: String,
    pub time: Option<String>,
    pub raw: f64,
    pub smoothed: f64,
}

/// Pairs the raw risks `Y/E` with the posterior means of a summary.
pub fn shrinkage_data(summary: &RiskSummary, raw: &[f64]) -> Result<Vec<ShrinkagePair>> {
    if raw.len() != summary.rows.len() {
        return Err(Error::Shape(format!(
            "{} raw risks for {} summary rows",
            raw.len(),
            summary.rows.len()
        )));
    }
    Ok(summary
        .rows
        .iter()
        .zip(raw)
        .map(|(row, &raw)| ShrinkagePair {
            region: row.region.clone(),
            time: row.time.clone(),
            raw,
            smoothed: row.mean,
        })
        .collect())
}

fn level_tag(level: f64) -> String {
    format!("{}", (level * 100.0).round() as u32)
}

/// Writes summaries as `region,time?,estimator,mean,median,loXX,hiXX,length,prob_gt_1`.
pub fn write_summary_csv<W: Write>(summaries: &[RiskSummary], out: W) -> Result<()> {
    let with_time = summaries.iter().any(|s| s.rows.iter().any(|r| r.time.is_some()));
    let tag = summaries.first().map_or_else(|| "90".to_owned(), |s| level_tag(s.level));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["region".to_owned()];
    if with_time {
        header.push("time".to_owned());
    }
    header.extend(
        [
            "estimator".to_owned(),
            "mean".to_owned(),
            "median".to_owned(),
            format!("lo{tag}"),
            format!("hi{tag}"),
            "length".to_owned(),
            "prob_gt_1".to_owned(),
        ],
    );
    w.write_record(&header)?;
    for s in summaries {
        for r in &s.rows {
            let mut rec = vec![r.region.clone()];
            if with_time {
                rec.push(r.time.clone().unwrap_or_default());
            }
            rec.push(r.estimator.tag().to_owned());
            for v in [r.mean, r.median, r.lower, r.upper, r.length, r.prob_above_one] {
                rec.push(v.to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_summary_csv`].
pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<RiskRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let with_time = header.get(1).is_some_and(|h| h == "time");
    let expected = if with_time { 9 } else { 8 };
    if header.len() != expected || header[0] != "region" {
        return Err(Error::Parse(format!("unexpected summary header {header:?}")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let off = usize::from(with_time);
        let num = |k: usize| -> Result<f64> {
            record[k + off]
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{}`", &record[k + off])))
        };
        rows.push(RiskRow {
            region: record[0].to_owned(),
            time: with_time.then(|| record[1].to_owned()),
            estimator: Estimator::parse(&record[1 + off])?,
            mean: num(2)?,
            median: num(3)?,
            lower: num(4)?,
            upper: num(5)?,
            length: num(6)?,
            prob_above_one: num(7)?,
        });
    }
    Ok(rows)
}

/// Region-keyed properties for joining onto a GeoJSON layer. Each region
/// carries flat keys such as `r_CG_mean` (or `r_CG_1987_mean` for panels).
pub fn geojoin_properties(summaries: &[RiskSummary]) -> serde_json::Value {
    let mut by_region: BTreeMap<String, serde_json::Map<String, serde_json::Value>> = BTreeMap::new();
    let tag = summaries.first().map_or_else(|| "90".to_owned(), |s| level_tag(s.level));
    for s in summaries {
        for r in &s.rows {
            let prefix = match &r.time {
                Some(t) => format!("{}_{t}", r.estimator.tag()),
                None => r.estimator.tag().to_owned(),
            };
            let entry = by_region.entry(r.region.clone()).or_default();
            for (field, v) in [
                ("mean", r.mean),
                ("median", r.median),
                (&format!("lo{tag}") as &str, r.lower),
                (&format!("hi{tag}") as &str, r.upper),
                ("length", r.length),
                ("log_mean", r.mean.ln()),
                ("prob_gt_1", r.prob_above_one),
            ] {
                entry.insert(format!("{prefix}_{field}"), serde_json::json!(v));
            }
        }
    }
    serde_json::json!({
        "join_key": "region",
        "properties": by_region,
    })
}
