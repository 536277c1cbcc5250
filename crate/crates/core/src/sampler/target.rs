//! Log full-conditional targets and the joint log-posterior.
//!
//! Every Metropolis target here is the joint log-posterior restricted to the
//! terms that involve the updated coordinate, so that
//! `target(a) - target(b) == joint(.., a, ..) - joint(.., b, ..)`.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;
use crate::model::{
    cg_kernel, internal_standardization, Dataset, Effects, Family,
    ModelSpec, Temporal,
};

use super::state::ChainState;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// A fitted model's data, graph and spec, with precomputed expected counts
/// for the IS family.
#[derive(Debug, Clone)]
pub struct Posterior<'a> {
    data: &'a Dataset,
    graph: &'a AdjacencyGraph,
    spec: ModelSpec,
    expected: Option<Vec<f64>>,
    log_expected: Option<Vec<f64>>,
}

impl<'a> Posterior<'a> {
    pub fn new(data: &'a Dataset, graph: &'a AdjacencyGraph, spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        if data.region_ids() != graph.region_ids() {
            return Err(Error::Shape(
                "dataset regions do not match the adjacency graph (same ids, same order)".into(),
            ));
        }
        match spec.temporal {
            Temporal::Static if data.n_times() != 1 => {
                return Err(Error::Shape(
                    "static model needs a single time slice; select one with Dataset::slice".into(),
                ))
            }
            Temporal::DynamicAr1 if data.n_times() < 2 => {
                return Err(Error::Shape("dynamic model needs at least two time points".into()))
            }
            _ => {}
        }
        data.check_rank()?;
        let expected = match spec.family {
            Family::Is => Some(internal_standardization(data)?),
            Family::Cg => None,
        };
        let log_expected = expected
            .as_ref()
            .map(|e| e.iter().map(|v| v.ln()).collect());
        Ok(Self {
            data,
            graph,
            spec,
            expected,
            log_expected,
        })
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn graph(&self) -> &'a AdjacencyGraph {
        self.graph
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Internally standardized expected counts (IS family only).
    pub fn expected(&self) -> Option<&[f64]> {
        self.expected.as_deref()
    }

    #[inline]
    fn xb(&self, o: usize, beta: &[f64]) -> f64 {
        self.data.x_row(o).iter().zip(beta).map(|(x, b)| x * b).sum()
    }

    /// Observation log-likelihood kernel (no `log y!`) at linear predictor `eta`.
    #[inline]
    fn kernel(&self, o: usize, eta: f64) -> f64 {
        let y = self.data.y()[o];
        match self.spec.family {
            Family::Cg => cg_kernel(y, self.data.n()[o], self.spec.link.probability(eta)),
            Family::Is => {
                let e = self.expected.as_ref().unwrap()[o];
                let r = -e * eta.exp();
                if y == 0 {
                    r
                } else {
                    r + y as f64 * (self.log_expected.as_ref().unwrap()[o] + eta)
                }
            }
        }
    }

    #[inline]
    fn alpha_at(state: &ChainState, t: usize) -> f64 {
        state.temporal.as_ref().map_or(0.0, |ts| ts.alpha[t])
    }

    /// Log-likelihood including `log y!`, at the state's parameters.
    pub fn log_likelihood(&self, state: &ChainState) -> f64 {
        let alpha = state.temporal.as_ref().map(|t| t.alpha.as_slice());
        let effects = Effects::new(&state.beta, &state.phi, alpha);
        match self.spec.family {
            Family::Cg => crate::model::log_likelihood_cg(self.data, &effects, self.spec.link),
            Family::Is => {
                crate::model::log_likelihood_is(self.data, self.expected.as_ref().unwrap(), &effects)
            }
        }
    }

    /// Full conditional of `phi_i` up to a constant:
    /// `-(tau w_i+ / 2)(phi_i - phibar_i)^2 + sum_t loglik_it`.
    pub fn log_target_phi(&self, state: &ChainState, i: usize, value: f64) -> f64 {
        let w = self.graph.degree(i) as f64;
        let d = value - self.graph.neighbor_mean(&state.phi, i);
        let mut lp = -0.5 * state.tau * w * d * d;
        for t in 0..self.data.n_times() {
            let o = self.data.obs(i, t);
            let eta = self.xb(o, &state.beta) + value + Self::alpha_at(state, t);
            lp += self.kernel(o, eta);
        }
        lp
    }

    /// Full conditional of `beta_k` under the flat prior.
    pub fn log_target_beta(&self, state: &ChainState, k: usize, value: f64) -> f64 {
        let delta = value - state.beta[k];
        let mut lp = 0.0;
        for t in 0..self.data.n_times() {
            let a = Self::alpha_at(state, t);
            for i in 0..self.data.n_regions() {
                let o = self.data.obs(i, t);
                let eta = self.xb(o, &state.beta) + delta * self.data.x_row(o)[k] + state.phi[i] + a;
                lp += self.kernel(o, eta);
            }
        }
        lp
    }

    /// Full conditional of `alpha_t`: slice likelihood plus AR(1) prior terms.
    pub fn log_target_alpha(&self, state: &ChainState, t: usize, value: f64) -> f64 {
        let ts = state
            .temporal
            .as_ref()
            .expect("alpha target needs a dynamic state");
        let mut lp = 0.0;
        for i in 0..self.data.n_regions() {
            let o = self.data.obs(i, t);
            lp += self.kernel(o, self.xb(o, &state.beta) + state.phi[i] + value);
        }
        let rho = ts.rho;
        let mut q = 0.0;
        if t == 0 {
            q += (1.0 - rho * rho) * value * value;
        } else {
            let d = value - rho * ts.alpha[t - 1];
            q += d * d;
        }
        if t + 1 < ts.alpha.len() {
            let d = ts.alpha[t + 1] - rho * value;
            q += d * d;
        }
        lp - q / (2.0 * ts.omega)
    }

    /// Full conditional of `rho` (flat on (-1, 1)); `-inf` outside.
    pub fn log_target_rho(&self, state: &ChainState, rho: f64) -> f64 {
        if !(rho > -1.0 && rho < 1.0) {
            return f64::NEG_INFINITY;
        }
        let ts = state
            .temporal
            .as_ref()
            .expect("rho target needs a dynamic state");
        0.5 * (1.0 - rho * rho).ln() - ar1_quadratic(&ts.alpha, rho) / (2.0 * ts.omega)
    }

    /// Shape and rate of the Gamma full conditional of `tau`.
    pub fn tau_conditional(&self, state: &ChainState) -> (f64, f64) {
        let prior = self.spec.tau_prior;
        let half_n = self.graph.n_regions() as f64 / 2.0;
        (
            prior.shape + half_n,
            prior.rate + 0.5 * self.graph.car_pairwise_sum(&state.phi),
        )
    }

    /// Shape and scale of the inverse-gamma full conditional of the AR(1)
    /// innovation variance `omega`, under `pi(omega) ∝ 1/omega` and a
    /// stationary start `alpha_1 ~ N(0, omega / (1 - rho^2))`.
    pub fn omega_conditional(&self, state: &ChainState) -> (f64, f64) {
        let ts = state
            .temporal
            .as_ref()
            .expect("omega conditional needs a dynamic state");
        let t = ts.alpha.len() as f64;
        (t / 2.0, 0.5 * ar1_quadratic(&ts.alpha, ts.rho))
    }

    /// Joint log-posterior up to the (unknown) normalizing constant.
    pub fn log_joint(&self, state: &ChainState) -> f64 {
        let mut lp = self.log_likelihood(state);
        lp += self
            .graph
            .car_log_kernel(&state.phi, state.tau)
            .unwrap_or(f64::NEG_INFINITY);
        lp += log_gamma_density(state.tau, self.spec.tau_prior.shape, self.spec.tau_prior.rate);
        if let Some(ts) = &state.temporal {
            lp += ar1_log_density(&ts.alpha, ts.rho, ts.omega) - ts.omega.ln();
        }
        lp
    }
}

/// `(1 - rho^2) alpha_1^2 + sum_{t>=2} (alpha_t - rho alpha_{t-1})^2`.
pub fn ar1_quadratic(alpha: &[f64], rho: f64) -> f64 {
    let mut q = (1.0 - rho * rho) * alpha[0] * alpha[0];
    for w in alpha.windows(2) {
        let d = w[1] - rho * w[0];
        q += d * d;
    }
    q
}

/// Log density of a stationary Gaussian AR(1) path with innovation variance `omega`.
pub fn ar1_log_density(alpha: &[f64], rho: f64, omega: f64) -> f64 {
    if !(rho > -1.0 && rho < 1.0) || !(omega > 0.0) {
        return f64::NEG_INFINITY;
    }
    let t = alpha.len() as f64;
    -0.5 * t * (LN_2PI + omega.ln()) + 0.5 * (1.0 - rho * rho).ln()
        - ar1_quadratic(alpha, rho) / (2.0 * omega)
}

/// Gamma(shape, rate) log density.
pub fn log_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}
