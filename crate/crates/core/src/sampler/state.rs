use serde::{Deserialize, Serialize};

/// Index map from Metropolis blocks to slots in the scale/counter vectors.
///
/// Order: `phi_0..phi_{I-1}`, `beta_0..beta_{p-1}`, `alpha_0..alpha_{T-1}`, `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub n_phi: usize,
    pub n_beta: usize,
    pub n_alpha: usize,
    pub has_rho: bool,
}

impl BlockLayout {
    pub fn len(&self) -> usize {
        self.n_phi + self.n_beta + self.n_alpha + usize::from(self.has_rho)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn phi(&self, i: usize) -> usize {
        i
    }

    #[inline]
    pub fn beta(&self, k: usize) -> usize {
        self.n_phi + k
    }

    #[inline]
    pub fn alpha(&self, t: usize) -> usize {
        self.n_phi + self.n_beta + t
    }

    #[inline]
    pub fn rho(&self) -> usize {
        debug_assert!(self.has_rho);
        self.n_phi + self.n_beta + self.n_alpha
    }

    /// Human-readable block names using region, covariate and time labels.
    pub fn names(&self, regions: &[String], covariates: &[String], times: Option<&[String]>) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(regions.iter().map(|r| format!("phi[{r}]")));
        out.extend(covariates.iter().map(|c| format!("beta[{c}]")));
        if let Some(times) = times {
            out.extend(times.iter().take(self.n_alpha).map(|t| format!("alpha[{t}]")));
        }
        if self.has_rho {
            out.push("rho".to_owned());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalState {
    pub alpha: Vec<f64>,
    pub rho: f64,
    /// Innovation variance of the AR(1) time effects.
    pub omega: f64,
}

/// Accept/attempt counters for the current adaptation window and for the
/// whole counting period (reset when burn-in ends).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AcceptanceCounters {
    pub window_accepted: Vec<u64>,
    pub window_attempted: Vec<u64>,
    pub accepted: Vec<u64>,
    pub attempted: Vec<u64>,
}

impl AcceptanceCounters {
    pub fn new(blocks: usize) -> Self {
        Self {
            window_accepted: vec![0; blocks],
            window_attempted: vec![0; blocks],
            accepted: vec![0; blocks],
            attempted: vec![0; blocks],
        }
    }

    #[inline]
    pub fn record(&mut self, block: usize, accepted: bool) {
        let a = u64::from(accepted);
        self.window_accepted[block] += a;
        self.window_attempted[block] += 1;
        self.accepted[block] += a;
        self.attempted[block] += 1;
    }

    pub fn reset_window(&mut self) {
        self.window_accepted.iter_mut().for_each(|v| *v = 0);
        self.window_attempted.iter_mut().for_each(|v| *v = 0);
    }

    pub fn reset_totals(&mut self) {
        self.accepted.iter_mut().for_each(|v| *v = 0);
        self.attempted.iter_mut().for_each(|v| *v = 0);
    }

    pub fn rates(&self) -> Vec<f64> {
        self.accepted
            .iter()
            .zip(&self.attempted)
            .map(|(&a, &n)| if n == 0 { f64::NAN } else { a as f64 / n as f64 })
            .collect()
    }
}

/// Current MCMC state of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub tau: f64,
    pub temporal: Option<TemporalState>,
    pub layout: BlockLayout,
    pub proposal_scales: Vec<f64>,
    pub counters: AcceptanceCounters,
    /// Proposals rejected because the target evaluated to NaN or +inf.
    pub nonfinite_events: u64,
}

impl ChainState {
    /// Initial state: `beta = 0`, `phi = 0`, `tau = 1`, and for dynamic
    /// models `alpha = 0`, `rho = 0.5`, `omega = 0.1`.
    pub fn initial(n_regions: usize, n_covariates: usize, n_times: Option<usize>, scale: f64) -> Self {
        let layout = BlockLayout {
            n_phi: n_regions,
            n_beta: n_covariates,
            n_alpha: n_times.unwrap_or(0),
            has_rho: n_times.is_some(),
        };
        Self {
            beta: vec![0.0; n_covariates],
            phi: vec![0.0; n_regions],
            tau: 1.0,
            temporal: n_times.map(|t| TemporalState {
                alpha: vec![0.0; t],
                rho: 0.5,
                omega: 0.1,
            }),
            layout,
            proposal_scales: vec![scale; layout.len()],
            counters: AcceptanceCounters::new(layout.len()),
            nonfinite_events: 0,
        }
    }

    /// Moves the mean of `phi` into the intercept. The likelihood and the
    /// CAR kernel are both unchanged by this shift.
    pub fn center_phi(&mut self) {
        let mean = self.phi.iter().sum::<f64>() / self.phi.len() as f64;
        self.phi.iter_mut().for_each(|p| *p -= mean);
        self.beta[0] += mean;
    }

    pub fn is_finite(&self) -> bool {
        self.beta.iter().chain(&self.phi).all(|v| v.is_finite())
            && self.tau.is_finite()
            && self.tau > 0.0
            && self.temporal.as_ref().is_none_or(|t| {
                t.alpha.iter().all(|v| v.is_finite())
                    && t.rho.abs() < 1.0
                    && t.omega.is_finite()
                    && t.omega > 0.0
            })
    }

    pub(crate) fn describe(&self) -> String {
        let mut s = format!(
            "tau={} beta={:?} phi(min,max)=({}, {})",
            self.tau,
            self.beta,
            self.phi.iter().cloned().fold(f64::INFINITY, f64::min),
            self.phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
        if let Some(t) = &self.temporal {
            s.push_str(&format!(" alpha={:?} rho={} omega={}", t.alpha, t.rho, t.omega));
        }
        s
    }
}
