//! Replicated simulation studies: a known truth map, Poisson replicates,
//! repeated fitting, and loss / coverage / interval-length comparisons.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{self, Estimator, RiskSummary};
use crate::graph::{lattice_id, AdjacencyGraph};
use crate::model::{internal_standardization, Dataset, Link, ModelSpec};
use crate::sampler::{run_chain, SamplerConfig};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hub {
    pub region: String,
    pub bump: f64,
}

/// Baseline incidence, raised at hub regions and (once) at their neighbors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HubRecipe {
    pub baseline: f64,
    pub hubs: Vec<Hub>,
    pub neighbor_bump: f64,
}

pub const DEFAULT_HUB_BUMPS: [f64; 3] = [0.0015, 0.001, 0.001];

impl HubRecipe {
    /// Baseline 0.001; the three most populous regions get +0.0015, +0.001
    /// and +0.001; their other neighbors get +0.0005.
    pub fn most_populous(graph: &AdjacencyGraph, populations: &[f64]) -> Result<Self> {
        if populations.len() != graph.n_regions() || graph.n_regions() < DEFAULT_HUB_BUMPS.len() {
            return Err(Error::Shape("need one population per region and at least three regions".into()));
        }
        let mut order: Vec<usize> = (0..populations.len()).collect();
        order.sort_by(|&a, &b| populations[b].total_cmp(&populations[a]).then(a.cmp(&b)));
        Ok(Self {
            baseline: 0.001,
            hubs: order
                .iter()
                .zip(DEFAULT_HUB_BUMPS)
                .map(|(&i, bump)| Hub {
                    region: graph.region_ids()[i].clone(),
                    bump,
                })
                .collect(),
            neighbor_bump: 0.0005,
        })
    }

    fn describe(&self) -> String {
        let hubs: Vec<String> = self.hubs.iter().map(|h| format!("{}+{}", h.region, h.bump)).collect();
        format!(
            "hub recipe: baseline {}, hubs [{}], neighbor bump {}",
            self.baseline,
            hubs.join(", "),
            self.neighbor_bump
        )
    }
}

/// True incidence and the implied relative risks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthMap {
    pub region_ids: Vec<String>,
    pub p_true: Vec<f64>,
    pub r_true: Vec<f64>,
    pub provenance: String,
}

pub fn build_truth(graph: &AdjacencyGraph, populations: &[f64], recipe: &HubRecipe) -> Result<TruthMap> {
    let ni = graph.n_regions();
    let mut p = vec![recipe.baseline; ni];
    let mut is_hub = vec![false; ni];
    let mut hub_index = Vec::with_capacity(recipe.hubs.len());
    for hub in &recipe.hubs {
        let i = graph
            .region_index(&hub.region)
            .ok_or_else(|| Error::UnknownRegion(hub.region.clone()))?;
        is_hub[i] = true;
        p[i] += hub.bump;
        hub_index.push(i);
    }
    let mut bumped = vec![false; ni];
    for &h in &hub_index {
        for &j in graph.neighbors(h) {
            if !is_hub[j] && !bumped[j] {
                bumped[j] = true;
                p[j] += recipe.neighbor_bump;
            }
        }
    }
    truth_from_probabilities(graph, populations, p, recipe.describe())
}

/// Truth map from a user-supplied incidence vector.
pub fn truth_from_probabilities(
    graph: &AdjacencyGraph,
    populations: &[f64],
    p_true: Vec<f64>,
    provenance: String,
) -> Result<TruthMap> {
    if p_true.len() != graph.n_regions() || populations.len() != graph.n_regions() {
        return Err(Error::Shape("truth and populations must have one entry per region".into()));
    }
    if let Some(p) = p_true.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Domain(format!("true incidence must lie in (0, 1), got {p}")));
    }
    if let Some(n) = populations.iter().find(|&&n| !(n > 0.0)) {
        return Err(Error::Domain(format!("population must be positive, got {n}")));
    }
    let mut r_true = p_true.clone();
    estimators::relative_to_mean(&mut r_true, populations);
    Ok(TruthMap {
        region_ids: graph.region_ids().to_vec(),
        p_true,
        r_true,
        provenance,
    })
}

/// Hub populations placed on a synthetic lattice.
pub const LATTICE_HUB_POPULATIONS: [f64; 3] = [1_400_000.0, 960_000.0, 870_000.0];

/// A `rows x cols` rook lattice with seeded county-like populations: a
/// log-normal body (median 40k, floored at 12k) and three well separated
/// large hubs.
pub fn synthetic_lattice(rows: usize, cols: usize, seed: u64) -> Result<(AdjacencyGraph, Vec<f64>)> {
    if rows < 4 || cols < 4 {
        return Err(Error::Config("synthetic lattice needs at least 4 rows and 4 columns".into()));
    }
    let graph = AdjacencyGraph::lattice(rows, cols)?;
    let mut rng = rng_for(seed, "populations");
    let body = LogNormal::new(40_000f64.ln(), 0.8).expect("valid log-normal");
    let mut pops: Vec<f64> = (0..rows * cols)
        .map(|_| body.sample(&mut rng).clamp(12_000.0, 400_000.0).round())
        .collect();
    let sites = [(rows / 4, cols / 4), (rows / 4, (3 * cols) / 4), ((3 * rows) / 4, cols / 2)];
    for ((r, c), n) in sites.into_iter().zip(LATTICE_HUB_POPULATIONS) {
        let i = graph.region_index(&lattice_id(r, c)).expect("lattice site");
        pops[i] = n;
    }
    Ok((graph, pops))
}

/// Populations multiplied by `scale` and rounded to whole people (at least 1).
pub fn scale_populations(populations: &[f64], scale: f64) -> Result<Vec<f64>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config(format!("population scale must be positive, got {scale}")));
    }
    Ok(populations.iter().map(|n| (n * scale).round().max(1.0)).collect())
}

/// Independent `Y_i ~ Poisson(n_i p_i)` as an intercept-only dataset.
pub fn simulate_counts(truth: &TruthMap, populations: &[f64], seed: u64) -> Result<Dataset> {
    let mut rng = rng_for(seed, "counts");
    let y = truth
        .p_true
        .iter()
        .zip(populations)
        .map(|(p, n)| poisson_draw(&mut rng, n * p))
        .collect::<Result<Vec<u64>>>()?;
    Dataset::intercept_only(truth.region_ids.clone(), y, populations.to_vec())
}

pub(crate) fn poisson_draw<R: Rng>(rng: &mut R, mean: f64) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Domain(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Time structure of a synthetic panel from the dynamic CG model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelRecipe {
    pub n_times: usize,
    pub first_time: i64,
    pub link: Link,
    /// AR(1) coefficient of the time effects.
    pub rho: f64,
    /// Innovation variance of the time effects.
    pub omega: f64,
}

impl Default for PanelRecipe {
    fn default() -> Self {
        Self {
            n_times: 10,
            first_time: 1979,
            link: Link::Logit,
            rho: 0.9,
            omega: 0.01,
        }
    }
}

/// Simulates `Y_it ~ Poisson(n_i p_it)` with
/// `link(p_it) = link(p_true_i) + alpha_t` and a stationary AR(1) path
/// `alpha`. Returns the panel and the simulated time effects.
pub fn simulate_panel(
    truth: &TruthMap,
    populations: &[f64],
    recipe: &PanelRecipe,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if recipe.n_times < 2 {
        return Err(Error::Config("a panel needs at least two time points".into()));
    }
    if !(recipe.rho.abs() < 1.0) || !(recipe.omega > 0.0) {
        return Err(Error::Config("panel recipe needs |rho| < 1 and omega > 0".into()));
    }
    let base = truth
        .p_true
        .iter()
        .map(|&p| recipe.link.linear_predictor(p))
        .collect::<Result<Vec<f64>>>()?;
    let mut rng = rng_for(seed, "panel");
    let normal = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { rand_distr::StandardNormal.sample(rng) };
    let mut alpha = Vec::with_capacity(recipe.n_times);
    alpha.push(normal(&mut rng) * (recipe.omega / (1.0 - recipe.rho * recipe.rho)).sqrt());
    for t in 1..recipe.n_times {
        let next = recipe.rho * alpha[t - 1] + normal(&mut rng) * recipe.omega.sqrt();
        alpha.push(next);
    }
    let mut y = Vec::with_capacity(recipe.n_times * base.len());
    let mut n = Vec::with_capacity(recipe.n_times * base.len());
    for a in &alpha {
        for (eta, pop) in base.iter().zip(populations) {
            y.push(poisson_draw(&mut rng, pop * recipe.link.probability(eta + a))?);
            n.push(*pop);
        }
    }
    let times = (0..recipe.n_times as i64)
        .map(|t| (recipe.first_time + t).to_string())
        .collect();
    let data = Dataset::new(truth.region_ids.clone(), Some(times), y, n, vec![], vec![])?;
    Ok((data, alpha))
}

fn check_losses(r_hat: &[f64], r_true: &[f64]) -> Result<()> {
    if r_hat.len() != r_true.len() {
        return Err(Error::Shape(format!("{} estimates for {} regions", r_hat.len(), r_true.len())));
    }
    if let Some(r) = r_true.iter().find(|&&r| !(r > 0.0)) {
        return Err(Error::Domain(format!("true risks must be positive, got {r}")));
    }
    Ok(())
}

/// `sum_i (r_hat_i - r_i)^2 / r_i`.
pub fn loss_ratio(r_hat: &[f64], r_true: &[f64]) -> Result<f64> {
    check_losses(r_hat, r_true)?;
    Ok(r_hat.iter().zip(r_true).map(|(a, r)| (a - r) * (a - r) / r).sum())
}

/// `sum_i (log r_hat_i - log r_i)^2`.
pub fn loss_bias(r_hat: &[f64], r_true: &[f64]) -> Result<f64> {
    check_losses(r_hat, r_true)?;
    if let Some(r) = r_hat.iter().find(|&&r| !(r > 0.0)) {
        return Err(Error::Domain(format!("estimated risks must be positive, got {r}")));
    }
    Ok(r_hat
        .iter()
        .zip(r_true)
        .map(|(a, r)| {
            let d = a.ln() - r.ln();
            d * d
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub replicates: usize,
    pub seed: u64,
    pub population_scale: f64,
    pub estimators: Vec<Estimator>,
    pub links: Vec<Link>,
    pub sampler: SamplerConfig,
    pub level: f64,
    pub jobs: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            seed: 20_130_101,
            population_scale: 1.0,
            estimators: Estimator::ALL.to_vec(),
            links: vec![Link::Logit],
            sampler: SamplerConfig::default(),
            level: 0.9,
            jobs: 1,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config(format!("replicates must be at least 2, got {}", self.replicates)));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators requested".into()));
        }
        if self.fits_cg() && self.links.is_empty() {
            return Err(Error::Config("CG estimators requested but no links given".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        scale_populations(&[1.0], self.population_scale)?;
        self.sampler.validate()
    }

    fn fits_is(&self) -> bool {
        self.estimators.contains(&Estimator::RIs)
    }

    fn fits_cg(&self) -> bool {
        self.estimators.iter().any(|e| *e != Estimator::RIs)
    }

    /// Series in report order: `r_IS`, then per link `r_CG_tilde`, `r_CG`.
    fn series(&self) -> Vec<(Estimator, Option<Link>)> {
        let mut out = Vec::new();
        if self.fits_is() {
            out.push((Estimator::RIs, None));
        }
        for link in &self.links {
            for e in [Estimator::RCgTilde, Estimator::RCg] {
                if self.estimators.contains(&e) {
                    out.push((e, Some(*link)));
                }
            }
        }
        out
    }
}

pub fn series_label(estimator: Estimator, link: Option<Link>) -> String {
    match link {
        Some(l) => format!("{}[{}]", estimator.tag(), l.name()),
        None => estimator.tag().to_owned(),
    }
}

/// Per-replicate results for one estimator (and link). Rows are the
/// replicates that fitted successfully, in replicate order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationBatch {
    pub label: String,
    pub estimator: Estimator,
    pub link: Option<Link>,
    pub replicate_index: Vec<usize>,
    pub replicate_seeds: Vec<u64>,
    pub means: Vec<Vec<f64>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub coverage: Vec<Vec<u8>>,
    pub lengths: Vec<Vec<f64>>,
    /// Smallest and largest post-burn-in block acceptance rate of each fit.
    pub acceptance: Vec<(f64, f64)>,
}

impl ReplicationBatch {
    pub fn n_replicates(&self) -> usize {
        self.replicate_index.len()
    }

    pub fn expected_loss_ratio(&self, truth: &TruthMap) -> Result<f64> {
        mean_of(self.means.iter().map(|m| loss_ratio(m, &truth.r_true)))
    }

    pub fn expected_loss_bias(&self, truth: &TruthMap) -> Result<f64> {
        mean_of(self.means.iter().map(|m| loss_bias(m, &truth.r_true)))
    }

    pub fn average_coverage(&self) -> f64 {
        grand_mean(self.coverage.iter().map(|row| row.iter().map(|&c| f64::from(c))))
    }

    pub fn average_length(&self) -> f64 {
        grand_mean(self.lengths.iter().map(|row| row.iter().copied()))
    }

    /// Recomputes the coverage matrix from the stored intervals.
    pub fn recompute_coverage(&self, truth: &TruthMap) -> Vec<Vec<u8>> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| coverage_row(lo, hi, &truth.r_true))
            .collect()
    }
}

fn mean_of(values: impl Iterator<Item = Result<f64>>) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v?;
        n += 1;
    }
    Ok(sum / n as f64)
}

fn grand_mean<I: Iterator<Item = f64>>(rows: impl Iterator<Item = I>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for row in rows {
        for v in row {
            sum += v;
            n += 1;
        }
    }
    sum / n as f64
}

pub fn coverage_row(lower: &[f64], upper: &[f64], r_true: &[f64]) -> Vec<u8> {
    lower
        .iter()
        .zip(upper)
        .zip(r_true)
        .map(|((lo, hi), r)| u8::from(lo <= r && r <= hi))
        .collect()
}

/// Paired comparison of interval lengths between a candidate and a
/// reference batch. Ties count as not shorter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalComparison {
    pub candidate: String,
    pub reference: String,
    /// Share of replicates whose region-averaged length is smaller for the candidate.
    pub row_wise_shorter: f64,
    /// Share of regions whose replicate-averaged length is smaller for the candidate.
    pub column_wise_shorter: f64,
}

pub fn interval_comparisons(candidate: &ReplicationBatch, reference: &ReplicationBatch) -> Result<IntervalComparison> {
    if candidate.replicate_seeds != reference.replicate_seeds {
        return Err(Error::Config(format!(
            "batches `{}` and `{}` were not fitted to the same replicates",
            candidate.label, reference.label
        )));
    }
    let b = candidate.lengths.len();
    let ni = candidate.lengths.first().map_or(0, Vec::len);
    if b == 0 || ni == 0 || reference.lengths.iter().any(|r| r.len() != ni) {
        return Err(Error::Shape("length matrices are empty or not conformable".into()));
    }
    let row_mean = |m: &Vec<Vec<f64>>, k: usize| m[k].iter().sum::<f64>() / ni as f64;
    let col_mean = |m: &Vec<Vec<f64>>, i: usize| m.iter().map(|r| r[i]).sum::<f64>() / b as f64;
    let rows = (0..b)
        .filter(|&k| row_mean(&candidate.lengths, k) < row_mean(&reference.lengths, k))
        .count();
    let cols = (0..ni)
        .filter(|&i| col_mean(&candidate.lengths, i) < col_mean(&reference.lengths, i))
        .count();
    Ok(IntervalComparison {
        candidate: candidate.label.clone(),
        reference: reference.label.clone(),
        row_wise_shorter: rows as f64 / b as f64,
        column_wise_shorter: cols as f64 / ni as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub fit: String,
    pub kind: &'static str,
    pub message: String,
}

/// Everything produced by [`run_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub config: StudyConfig,
    pub truth: TruthMap,
    pub populations: Vec<f64>,
    pub replicate_seeds: Vec<u64>,
    pub counts: Vec<Vec<u64>>,
    pub mle: Vec<Vec<f64>>,
    pub batches: Vec<ReplicationBatch>,
    pub failures: Vec<ReplicateFailure>,
}

struct ReplicateResult {
    counts: Vec<u64>,
    mle: Vec<f64>,
    series: Vec<(RiskSummary, (f64, f64))>,
}

fn acceptance_range(rates: &[f64]) -> (f64, f64) {
    rates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)))
}

fn run_replicate(
    graph: &AdjacencyGraph,
    truth: &TruthMap,
    populations: &[f64],
    config: &StudyConfig,
    seed: u64,
) -> std::result::Result<ReplicateResult, (String, Error)> {
    let data = simulate_counts(truth, populations, seed).map_err(|e| ("simulate".to_owned(), e))?;
    let expected = internal_standardization(&data).map_err(|e| ("simulate".to_owned(), e))?;
    let mle: Vec<f64> = data.y().iter().zip(&expected).map(|(&y, e)| y as f64 / e).collect();
    let mut series = Vec::new();
    let chain_config = |label: &str| SamplerConfig {
        seed: derive_seed(seed, label),
        ..config.sampler
    };
    if config.fits_is() {
        let label = "chain/IS";
        let fit = || -> Result<_> {
            let samples = run_chain(&data, graph, &ModelSpec::is_static(), &chain_config(label))?;
            let summary = estimators::summarize(&estimators::risk_is(&samples, &data)?, config.level)?;
            Ok((summary, acceptance_range(&samples.diagnostics.acceptance_rates)))
        };
        series.push(fit().map_err(|e| (series_label(Estimator::RIs, None), e))?);
    }
    if config.fits_cg() {
        for link in &config.links {
            let label = format!("chain/CG/{}", link.name());
            let fit = || -> Result<Vec<_>> {
                let samples = run_chain(&data, graph, &ModelSpec::cg_static(*link), &chain_config(&label))?;
                let acc = acceptance_range(&samples.diagnostics.acceptance_rates);
                let mut out = Vec::new();
                if config.estimators.contains(&Estimator::RCgTilde) {
                    let m = estimators::risk_cg_tilde(&samples, &data, &expected)?;
                    out.push((estimators::summarize(&m, config.level)?, acc));
                }
                if config.estimators.contains(&Estimator::RCg) {
                    let m = estimators::risk_cg_true(&samples, &data)?;
                    out.push((estimators::summarize(&m, config.level)?, acc));
                }
                Ok(out)
            };
            series.extend(fit().map_err(|e| (format!("CG[{}]", link.name()), e))?);
        }
    }
    Ok(ReplicateResult {
        counts: data.y().to_vec(),
        mle,
        series,
    })
}

/// Simulates `replicates` datasets from `truth` and fits every requested
/// model to each one. Replicate `b` draws from seed
/// `derive_seed(config.seed, "replicate/b")`, so results do not depend on
/// the number of worker threads.
pub fn run_study(graph: &AdjacencyGraph, truth: &TruthMap, populations: &[f64], config: &StudyConfig) -> Result<StudyOutcome> {
    config.validate()?;
    if truth.region_ids != graph.region_ids() {
        return Err(Error::Shape("truth map regions do not match the graph".into()));
    }
    let populations = scale_populations(populations, config.population_scale)?;
    let seeds: Vec<u64> = (0..config.replicates)
        .map(|b| derive_seed(config.seed, &format!("replicate/{b}")))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_replicate(graph, truth, &populations, config, s))
            .collect()
    });

    let series = config.series();
    let mut batches: Vec<ReplicationBatch> = series
        .iter()
        .map(|&(estimator, link)| ReplicationBatch {
            label: series_label(estimator, link),
            estimator,
            link,
            replicate_index: vec![],
            replicate_seeds: vec![],
            means: vec![],
            lower: vec![],
            upper: vec![],
            coverage: vec![],
            lengths: vec![],
            acceptance: vec![],
        })
        .collect();
    let (mut counts, mut mle, mut failures) = (Vec::new(), Vec::new(), Vec::new());
    for (b, result) in results.into_iter().enumerate() {
        match result {
            Ok(r) => {
                for (batch, (summary, acc)) in batches.iter_mut().zip(r.series) {
                    let lower: Vec<f64> = summary.rows.iter().map(|x| x.lower).collect();
                    let upper: Vec<f64> = summary.rows.iter().map(|x| x.upper).collect();
                    batch.coverage.push(coverage_row(&lower, &upper, &truth.r_true));
                    batch.lengths.push(summary.lengths());
                    batch.means.push(summary.means());
                    batch.lower.push(lower);
                    batch.upper.push(upper);
                    batch.replicate_index.push(b);
                    batch.replicate_seeds.push(seeds[b]);
                    batch.acceptance.push(acc);
                }
                counts.push(r.counts);
                mle.push(r.mle);
            }
            Err((fit, e)) => {
                log::warn!("replicate {b} failed in {fit}: {e}");
                failures.push(ReplicateFailure {
                    replicate: b,
                    fit,
                    kind: e.kind(),
                    message: e.to_string(),
                });
            }
        }
    }
    if counts.is_empty() {
        return Err(Error::Config("every replicate failed".into()));
    }
    let kept: Vec<u64> = batches
        .first()
        .map(|b| b.replicate_seeds.clone())
        .unwrap_or_default();
    Ok(StudyOutcome {
        config: config.clone(),
        truth: truth.clone(),
        populations,
        replicate_seeds: kept,
        counts,
        mle,
        batches,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub series: String,
    pub estimator: Estimator,
    pub link: Option<String>,
    pub population_scale: f64,
    pub replicates: usize,
    pub expected_loss_ratio: f64,
    pub expected_loss_bias: f64,
    pub average_coverage: f64,
    pub average_length: f64,
    /// Paired comparison against `r_IS` (absent for `r_IS` itself).
    pub shorter_than_is: Option<IntervalComparison>,
    pub acceptance_min: f64,
    pub acceptance_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub expected_loss_ratio: f64,
    /// Mean over replicates with no zero counts (the log is undefined otherwise).
    pub expected_loss_bias: Option<f64>,
    pub bias_replicates_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub provenance: String,
    pub n_regions: usize,
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub failures: Vec<ReplicateFailure>,
    pub table: Vec<TableRow>,
    pub mle: BaselineRow,
    /// Mean absolute difference between posterior means of `r_IS` and
    /// `r_CG_tilde`, per link.
    pub is_vs_cg_tilde_mean_abs_diff: Vec<(String, f64)>,
    pub truth: Vec<TruthRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRow {
    pub region: String,
    pub population: f64,
    pub p_true: f64,
    pub r_true: f64,
}

impl StudyOutcome {
    pub fn batch(&self, estimator: Estimator, link: Option<Link>) -> Option<&ReplicationBatch> {
        self.batches
            .iter()
            .find(|b| b.estimator == estimator && b.link == link)
    }

    pub fn mle_baseline(&self) -> Result<BaselineRow> {
        let ratio = mean_of(self.mle.iter().map(|m| loss_ratio(m, &self.truth.r_true)))?;
        let usable: Vec<&Vec<f64>> = self.mle.iter().filter(|m| m.iter().all(|&v| v > 0.0)).collect();
        let bias = if usable.is_empty() {
            None
        } else {
            Some(mean_of(usable.iter().map(|m| loss_bias(m, &self.truth.r_true)))?)
        };
        Ok(BaselineRow {
            expected_loss_ratio: ratio,
            expected_loss_bias: bias,
            bias_replicates_excluded: self.mle.len() - usable.len(),
        })
    }

    pub fn report(&self) -> Result<StudyReport> {
        let is_batch = self.batch(Estimator::RIs, None);
        let mut table = Vec::new();
        for b in &self.batches {
            let shorter = match (b.estimator, is_batch) {
                (Estimator::RIs, _) | (_, None) => None,
                (_, Some(is)) => Some(interval_comparisons(b, is)?),
            };
            let (acc_lo, acc_hi) = b
                .acceptance
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(a, c)| (l.min(a), h.max(c)));
            table.push(TableRow {
                series: b.label.clone(),
                estimator: b.estimator,
                link: b.link.map(|l| l.name().to_owned()),
                population_scale: self.config.population_scale,
                replicates: b.n_replicates(),
                expected_loss_ratio: b.expected_loss_ratio(&self.truth)?,
                expected_loss_bias: b.expected_loss_bias(&self.truth)?,
                average_coverage: b.average_coverage(),
                average_length: b.average_length(),
                shorter_than_is: shorter,
                acceptance_min: acc_lo,
                acceptance_max: acc_hi,
            });
        }
        let mut diffs = Vec::new();
        if let Some(is) = is_batch {
            for b in self.batches.iter().filter(|b| b.estimator == Estimator::RCgTilde) {
                let d = grand_mean(
                    is.means
                        .iter()
                        .zip(&b.means)
                        .map(|(a, c)| a.iter().zip(c).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>().into_iter()),
                );
                diffs.push((b.label.clone(), d));
            }
        }
        Ok(StudyReport {
            config: self.config.clone(),
            provenance: self.truth.provenance.clone(),
            n_regions: self.truth.region_ids.len(),
            replicates_requested: self.config.replicates,
            replicates_used: self.counts.len(),
            failures: self.failures.clone(),
            table,
            mle: self.mle_baseline()?,
            is_vs_cg_tilde_mean_abs_diff: diffs,
            truth: self
                .truth
                .region_ids
                .iter()
                .enumerate()
                .map(|(i, id)| TruthRow {
                    region: id.clone(),
                    population: self.populations[i],
                    p_true: self.truth.p_true[i],
                    r_true: self.truth.r_true[i],
                })
                .collect(),
        })
    }

    /// Writes `study_report.json`, `coverage.csv` and `lengths.csv` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let report = self.report()?;
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        fs::write(dir.join("study_report.json"), json)?;
        self.write_long(&dir.join("coverage.csv"), "covered", |b, k, i| b.coverage[k][i].to_string())?;
        self.write_long(&dir.join("lengths.csv"), "length", |b, k, i| b.lengths[k][i].to_string())?;
        Ok(())
    }

    fn write_long(
        &self,
        path: &Path,
        column: &str,
        value: impl Fn(&ReplicationBatch, usize, usize) -> String,
    ) -> Result<()> {
        let file = fs::File::create(path)?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["series", "replicate", "region", column])?;
        for b in &self.batches {
            for (k, &rep) in b.replicate_index.iter().enumerate() {
                for (i, id) in self.truth.region_ids.iter().enumerate() {
                    w.write_record([b.label.as_str(), &rep.to_string(), id, &value(b, k, i)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes a truth map as `region,population,p_true,r_true`.
pub fn write_truth_csv<W: Write>(truth: &TruthMap, populations: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "population", "p_true", "r_true"])?;
    for (i, id) in truth.region_ids.iter().enumerate() {
        w.write_record([
            id.clone(),
            populations[i].to_string(),
            truth.p_true[i].to_string(),
            truth.r_true[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
