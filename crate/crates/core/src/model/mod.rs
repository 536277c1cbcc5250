//! Data containers, links and Poisson log-likelihoods for the internally
//! standardized (IS) and coherent generative (CG) families.

mod dataset;
mod link;

pub use dataset::{internal_standardization, load_dataset, load_populations, read_dataset, Dataset};
pub use link::{Link, PROB_FLOOR};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `Y ~ Po(E r)`, `log r = X'beta + phi` with internally standardized `E`.
    Is,
    /// `Y ~ Po(n p)`, `link(p) = X'beta + phi`.
    Cg,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Is => "is",
            Family::Cg => "cg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Temporal {
    Static,
    /// Additive AR(1) time effects `alpha_t = rho alpha_{t-1} + delta_t`.
    DynamicAr1,
}

/// Gamma(shape, rate) prior on the CAR precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self {
            shape: 1.0,
            rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    /// Only consulted for the CG family; IS always uses the log link.
    pub link: Link,
    pub temporal: Temporal,
    pub tau_prior: GammaPrior,
}

impl ModelSpec {
    pub fn new(family: Family, link: Link, temporal: Temporal) -> Self {
        Self {
            family,
            link,
            temporal,
            tau_prior: GammaPrior::default(),
        }
    }

    pub fn is_static() -> Self {
        Self::new(Family::Is, Link::Logit, Temporal::Static)
    }

    pub fn cg_static(link: Link) -> Self {
        Self::new(Family::Cg, link, Temporal::Static)
    }

    pub fn validate(&self) -> Result<()> {
        if let Link::SkewedLogit { c0 } = self.link {
            if !(c0 > 0.0) || !c0.is_finite() {
                return Err(Error::Domain(format!("skewed logit needs c0 > 0, got {c0}")));
            }
        }
        let GammaPrior { shape, rate } = self.tau_prior;
        if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::Domain("tau prior needs positive shape and rate".into()));
        }
        Ok(())
    }

    pub fn is_dynamic(&self) -> bool {
        self.temporal == Temporal::DynamicAr1
    }
}

/// Regression coefficients, spatial effects and (optional) time effects.
#[derive(Debug, Clone, Copy)]
pub struct Effects<'a> {
    pub beta: &'a [f64],
    pub phi: &'a [f64],
    pub alpha: Option<&'a [f64]>,
}

impl<'a> Effects<'a> {
    pub fn new(beta: &'a [f64], phi: &'a [f64], alpha: Option<&'a [f64]>) -> Self {
        Self { beta, phi, alpha }
    }

    fn check(&self, data: &Dataset) {
        assert_eq!(self.beta.len(), data.n_covariates(), "beta length");
        assert_eq!(self.phi.len(), data.n_regions(), "phi length");
        match self.alpha {
            Some(a) => assert_eq!(a.len(), data.n_times(), "alpha length"),
            None => assert_eq!(data.n_times(), 1, "panel data needs time effects"),
        }
    }
}

/// `X_it' beta + phi_i (+ alpha_t)`.
#[inline]
pub fn linear_predictor(data: &Dataset, effects: &Effects<'_>, region: usize, time: usize) -> f64 {
    let o = data.obs(region, time);
    let xb: f64 = data
        .x_row(o)
        .iter()
        .zip(effects.beta)
        .map(|(x, b)| x * b)
        .sum();
    xb + effects.phi[region] + effects.alpha.map_or(0.0, |a| a[time])
}

/// `log(y!)` via the log-gamma function.
#[inline]
pub fn log_factorial(y: u64) -> f64 {
    if y < 2 {
        0.0
    } else {
        ln_gamma(y as f64 + 1.0)
    }
}

/// CG observation kernel `-n p + y log(n p)`, without `log(y!)`.
#[inline]
pub fn cg_kernel(y: u64, n: f64, p: f64) -> f64 {
    let mean = n * p;
    if y == 0 {
        -mean
    } else {
        -mean + y as f64 * mean.ln()
    }
}

/// IS observation kernel `-E e^eta + y (log E + eta)`, without `log(y!)`.
#[inline]
pub fn is_kernel(y: u64, expected: f64, eta: f64) -> f64 {
    let r = -expected * eta.exp();
    if y == 0 {
        r
    } else {
        r + y as f64 * (expected.ln() + eta)
    }
}

/// Full CG log-likelihood, `sum [-n p + Y log(n p) - log Y!]`.
pub fn log_likelihood_cg(data: &Dataset, effects: &Effects<'_>, link: Link) -> f64 {
    effects.check(data);
    let mut total = 0.0;
    for t in 0..data.n_times() {
        for i in 0..data.n_regions() {
            let o = data.obs(i, t);
            let p = link.probability(linear_predictor(data, effects, i, t));
            total += cg_kernel(data.y()[o], data.n()[o], p) - log_factorial(data.y()[o]);
        }
    }
    total
}

/// Full IS log-likelihood, `sum [-E e^eta + Y (log E + eta) - log Y!]`.
pub fn log_likelihood_is(data: &Dataset, expected: &[f64], effects: &Effects<'_>) -> f64 {
    effects.check(data);
    assert_eq!(expected.len(), data.n_obs(), "expected counts length");
    let mut total = 0.0;
    for t in 0..data.n_times() {
        for i in 0..data.n_regions() {
            let o = data.obs(i, t);
            let eta = linear_predictor(data, effects, i, t);
            total += is_kernel(data.y()[o], expected[o], eta) - log_factorial(data.y()[o]);
        }
    }
    total
}
