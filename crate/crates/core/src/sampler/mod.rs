//! Metropolis-within-Gibbs sampling for the IS and CG families, static or
//! with AR(1) time effects.
//!
//! One sweep updates, in order: each `phi_i` (univariate random-walk
//! Metropolis, then re-centering), each `beta_k` (random-walk Metropolis
//! under a flat prior), `tau` (exact Gamma draw), and for dynamic models each
//! `alpha_t`, then `rho` (random walk on (-1, 1)) and `omega` (exact
//! inverse-gamma draw). Proposal standard deviations are tuned during
//! burn-in toward an acceptance band and frozen afterwards.

mod state;
mod target;

pub use state::{AcceptanceCounters, BlockLayout, ChainState, TemporalState};
pub use target::{ar1_log_density, ar1_quadratic, log_gamma_density, Posterior};

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;
use crate::model::{Dataset, ModelSpec};

/// Multiplier applied to a proposal scale whose window acceptance is too low.
pub const SHRINK: f64 = 0.8;
/// Multiplier applied to a proposal scale whose window acceptance is too high.
pub const GROW: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total sweeps, burn-in included.
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub adapt_window: usize,
    pub target_acceptance: (f64, f64),
    pub adapt_only_during_burn_in: bool,
    pub initial_scale: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iterations: 25_000,
            burn_in: 5_000,
            thin: 2,
            seed: 0,
            adapt_window: 100,
            target_acceptance: (0.15, 0.40),
            adapt_only_during_burn_in: true,
            initial_scale: 0.1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than n_iterations ({})",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(Error::Config("thin and adapt_window must be at least 1".into()));
        }
        let (lo, hi) = self.target_acceptance;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!("invalid acceptance band [{lo}, {hi}]")));
        }
        if !(self.initial_scale > 0.0) {
            return Err(Error::Config("initial proposal scale must be positive".into()));
        }
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        (self.n_iterations - self.burn_in) / self.thin
    }
}

/// Acceptance and tuning summary of a finished chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub block_names: Vec<String>,
    /// Post-burn-in acceptance rate per Metropolis block.
    pub acceptance_rates: Vec<f64>,
    pub final_scales: Vec<f64>,
    pub nonfinite_events: u64,
}

impl SamplerDiagnostics {
    pub fn min_acceptance(&self) -> f64 {
        self.acceptance_rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_acceptance(&self) -> f64 {
        self.acceptance_rates
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Thinned post-burn-in draws, stored row-major as (draw, parameter).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub spec: ModelSpec,
    pub config: SamplerConfig,
    pub region_ids: Vec<String>,
    pub covariate_names: Vec<String>,
    pub times: Option<Vec<String>>,
    pub n_draws: usize,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub tau: Vec<f64>,
    pub alpha: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub omega: Option<Vec<f64>>,
    pub diagnostics: SamplerDiagnostics,
}

impl PosteriorSamples {
    pub fn n_regions(&self) -> usize {
        self.region_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.as_ref().map_or(1, Vec::len)
    }

    pub fn beta_draw(&self, d: usize) -> &[f64] {
        let p = self.covariate_names.len();
        &self.beta[d * p..(d + 1) * p]
    }

    pub fn phi_draw(&self, d: usize) -> &[f64] {
        let n = self.region_ids.len();
        &self.phi[d * n..(d + 1) * n]
    }

    pub fn alpha_draw(&self, d: usize) -> Option<&[f64]> {
        let t = self.n_times();
        self.alpha.as_ref().map(|a| &a[d * t..(d + 1) * t])
    }

    /// Writes every stored draw as `draw,parameter,value`.
    pub fn write_draws_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["draw", "parameter", "value"])?;
        for d in 0..self.n_draws {
            let draw = d.to_string();
            for (name, v) in self.covariate_names.iter().zip(self.beta_draw(d)) {
                w.write_record([draw.as_str(), &format!("beta[{name}]"), &v.to_string()])?;
            }
            for (r, v) in self.region_ids.iter().zip(self.phi_draw(d)) {
                w.write_record([draw.as_str(), &format!("phi[{r}]"), &v.to_string()])?;
            }
            w.write_record([draw.as_str(), "tau", &self.tau[d].to_string()])?;
            if let (Some(alpha), Some(times)) = (self.alpha_draw(d), &self.times) {
                for (t, v) in times.iter().zip(alpha) {
                    w.write_record([draw.as_str(), &format!("alpha[{t}]"), &v.to_string()])?;
                }
            }
            if let Some(rho) = &self.rho {
                w.write_record([draw.as_str(), "rho", &rho[d].to_string()])?;
            }
            if let Some(omega) = &self.omega {
                w.write_record([draw.as_str(), "omega", &omega[d].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Metropolis acceptance rule for a symmetric proposal.
#[inline]
pub fn metropolis_accept(log_ratio: f64, uniform: f64) -> bool {
    log_ratio >= 0.0 || uniform.ln() < log_ratio
}

/// One random-walk Metropolis step. Returns the new value and whether the
/// proposal was accepted; non-finite proposed densities other than `-inf`
/// are rejected and counted.
fn rw_step<R: Rng, F: Fn(f64) -> f64>(
    rng: &mut R,
    current: f64,
    scale: f64,
    nonfinite: &mut u64,
    target: F,
) -> (f64, bool) {
    let z: f64 = StandardNormal.sample(rng);
    let proposal = current + scale * z;
    let lp = target(proposal);
    if lp.is_nan() || lp == f64::INFINITY {
        *nonfinite += 1;
        log::debug!("rejecting proposal {proposal}: target evaluated to {lp}");
        return (current, false);
    }
    if lp == f64::NEG_INFINITY {
        return (current, false);
    }
    let lc = target(current);
    let u: f64 = rng.random();
    if metropolis_accept(lp - lc, u) {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Updates every `phi_i` in turn, then re-centers `phi` to sum zero.
pub fn update_phi_block<R: Rng>(post: &Posterior<'_>, state: &mut ChainState, rng: &mut R) {
    for i in 0..state.phi.len() {
        let block = state.layout.phi(i);
        let scale = state.proposal_scales[block];
        let mut events = 0;
        let current = state.phi[i];
        let (value, accepted) = {
            let s: &ChainState = state;
            rw_step(rng, current, scale, &mut events, |v| post.log_target_phi(s, i, v))
        };
        state.phi[i] = value;
        state.nonfinite_events += events;
        state.counters.record(block, accepted);
    }
    state.center_phi();
}

/// Componentwise random-walk updates of `beta`.
pub fn update_beta<R: Rng>(post: &Posterior<'_>, state: &mut ChainState, rng: &mut R) {
    for k in 0..state.beta.len() {
        let block = state.layout.beta(k);
        let scale = state.proposal_scales[block];
        let mut events = 0;
        let current = state.beta[k];
        let (value, accepted) = {
            let s: &ChainState = state;
            rw_step(rng, current, scale, &mut events, |v| post.log_target_beta(s, k, v))
        };
        state.beta[k] = value;
        state.nonfinite_events += events;
        state.counters.record(block, accepted);
    }
}

/// Exact Gibbs draw `tau ~ Gamma(a + I/2, b + S(phi)/2)` (rate form).
pub fn update_tau<R: Rng>(post: &Posterior<'_>, state: &mut ChainState, rng: &mut R) {
    let (shape, rate) = post.tau_conditional(state);
    state.tau = Gamma::new(shape, 1.0 / rate)
        .expect("tau conditional has positive parameters")
        .sample(rng);
}

/// Updates the time effects, `rho` and `omega` of a dynamic model.
pub fn update_temporal<R: Rng>(post: &Posterior<'_>, state: &mut ChainState, rng: &mut R) {
    let n_alpha = state.layout.n_alpha;
    for t in 0..n_alpha {
        let block = state.layout.alpha(t);
        let scale = state.proposal_scales[block];
        let mut events = 0;
        let current = state.temporal.as_ref().unwrap().alpha[t];
        let (value, accepted) = {
            let s: &ChainState = state;
            rw_step(rng, current, scale, &mut events, |v| post.log_target_alpha(s, t, v))
        };
        state.temporal.as_mut().unwrap().alpha[t] = value;
        state.nonfinite_events += events;
        state.counters.record(block, accepted);
    }

    let block = state.layout.rho();
    let scale = state.proposal_scales[block];
    let mut events = 0;
    let current = state.temporal.as_ref().unwrap().rho;
    let (value, accepted) = {
        let s: &ChainState = state;
        rw_step(rng, current, scale, &mut events, |v| post.log_target_rho(s, v))
    };
    state.temporal.as_mut().unwrap().rho = value;
    state.nonfinite_events += events;
    state.counters.record(block, accepted);

    // With every time effect at exactly zero (the initial state) the
    // conditional is improper; keep omega until the effects have moved.
    let (shape, scale) = post.omega_conditional(state);
    let omega = if scale > 0.0 { sample_inverse_gamma(rng, shape, scale) } else { 0.0 };
    if omega > 0.0 && omega.is_finite() {
        state.temporal.as_mut().unwrap().omega = omega;
    } else {
        state.nonfinite_events += 1;
    }
}

/// Draws from an inverse-gamma(shape, scale) as the reciprocal of a Gamma
/// with the same shape and rate `scale`.
pub fn sample_inverse_gamma<R: Rng>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / scale)
        .expect("inverse-gamma parameters must be positive")
        .sample(rng);
    1.0 / g
}

/// Rescales each block's proposal standard deviation from its window
/// acceptance rate and clears the window counters.
pub fn adapt_proposals(state: &mut ChainState, config: &SamplerConfig) {
    let (lo, hi) = config.target_acceptance;
    let c = &state.counters;
    for b in 0..state.proposal_scales.len() {
        let n = c.window_attempted[b];
        if n == 0 {
            continue;
        }
        let rate = c.window_accepted[b] as f64 / n as f64;
        if rate < lo {
            state.proposal_scales[b] *= SHRINK;
        } else if rate > hi {
            state.proposal_scales[b] *= GROW;
        }
    }
    state.counters.reset_window();
}

/// One full Gibbs sweep in the fixed order phi, beta, tau, (alpha, rho, omega).
pub fn sweep<R: Rng>(post: &Posterior<'_>, state: &mut ChainState, rng: &mut R) {
    update_phi_block(post, state, rng);
    update_beta(post, state, rng);
    update_tau(post, state, rng);
    if state.temporal.is_some() {
        update_temporal(post, state, rng);
    }
}

/// Initial state for a posterior, with every proposal scale at `scale`.
pub fn initial_state(post: &Posterior<'_>, scale: f64) -> ChainState {
    let data = post.data();
    let times = post.spec().is_dynamic().then(|| data.n_times());
    ChainState::initial(data.n_regions(), data.n_covariates(), times, scale)
}

/// Runs a single chain and returns its thinned post-burn-in draws.
pub fn run_chain(
    data: &Dataset,
    graph: &AdjacencyGraph,
    spec: &ModelSpec,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let post = Posterior::new(data, graph, *spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = initial_state(&post, config.initial_scale);

    let n_draws = config.n_draws();
    let ni = data.n_regions();
    let p = data.n_covariates();
    let nt = data.n_times();
    let dynamic = spec.is_dynamic();
    let mut beta = Vec::with_capacity(n_draws * p);
    let mut phi = Vec::with_capacity(n_draws * ni);
    let mut tau = Vec::with_capacity(n_draws);
    let mut alpha = dynamic.then(|| Vec::with_capacity(n_draws * nt));
    let mut rho = dynamic.then(|| Vec::with_capacity(n_draws));
    let mut omega = dynamic.then(|| Vec::with_capacity(n_draws));

    for it in 0..config.n_iterations {
        sweep(&post, &mut state, &mut rng);
        if !state.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                detail: state.describe(),
            });
        }
        let adapting = it < config.burn_in || !config.adapt_only_during_burn_in;
        if adapting && (it + 1) % config.adapt_window == 0 {
            adapt_proposals(&mut state, config);
        }
        if it + 1 == config.burn_in {
            state.counters.reset_totals();
            state.counters.reset_window();
        }
        if it >= config.burn_in && (it + 1 - config.burn_in) % config.thin == 0 {
            beta.extend_from_slice(&state.beta);
            phi.extend_from_slice(&state.phi);
            tau.push(state.tau);
            if let Some(ts) = &state.temporal {
                alpha.as_mut().unwrap().extend_from_slice(&ts.alpha);
                rho.as_mut().unwrap().push(ts.rho);
                omega.as_mut().unwrap().push(ts.omega);
            }
        }
    }
    if state.nonfinite_events > 0 {
        log::warn!(
            "{} proposals rejected because the target was not finite",
            state.nonfinite_events
        );
    }
    debug_assert_eq!(tau.len(), n_draws);

    let diagnostics = SamplerDiagnostics {
        block_names: state.layout.names(
            data.region_ids(),
            data.covariate_names(),
            data.times(),
        ),
        acceptance_rates: state.counters.rates(),
        final_scales: state.proposal_scales.clone(),
        nonfinite_events: state.nonfinite_events,
    };
    Ok(PosteriorSamples {
        spec: *spec,
        config: *config,
        region_ids: data.region_ids().to_vec(),
        covariate_names: data.covariate_names().to_vec(),
        times: if dynamic {
            data.times().map(<[String]>::to_vec)
        } else {
            None
        },
        n_draws,
        beta,
        phi,
        tau,
        alpha,
        rho,
        omega,
        diagnostics,
    })
}

/// JSON metadata for a fitted chain.
#[derive(Debug, Clone, Serialize)]
pub struct ChainMetadata<'a> {
    pub spec: &'a ModelSpec,
    pub config: &'a SamplerConfig,
    pub n_draws: usize,
    pub blocks: Vec<BlockSummary<'a>>,
    pub nonfinite_events: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSummary<'a> {
    pub block: &'a str,
    pub acceptance_rate: f64,
    pub final_scale: f64,
}

impl PosteriorSamples {
    pub fn metadata(&self) -> ChainMetadata<'_> {
        let d = &self.diagnostics;
        ChainMetadata {
            spec: &self.spec,
            config: &self.config,
            n_draws: self.n_draws,
            blocks: d
                .block_names
                .iter()
                .zip(&d.acceptance_rates)
                .zip(&d.final_scales)
                .map(|((b, &a), &s)| BlockSummary {
                    block: b,
                    acceptance_rate: a,
                    final_scale: s,
                })
                .collect(),
            nonfinite_events: d.nonfinite_events,
        }
    }
}
