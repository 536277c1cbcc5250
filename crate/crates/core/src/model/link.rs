use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are kept inside `[PROB_FLOOR, 1 - PROB_FLOOR]` so that the
/// Poisson mean `n * p` stays strictly positive.
pub const PROB_FLOOR: f64 = 1e-12;

/// Link between the linear predictor and the incidence of the generative model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Link {
    Logit,
    Cloglog,
    SkewedLogit { c0: f64 },
}

impl Link {
    pub fn skewed_logit(c0: f64) -> Result<Self> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::Domain(format!("skewed logit needs c0 > 0, got {c0}")));
        }
        Ok(Link::SkewedLogit { c0 })
    }

    /// Parses `logit`, `cloglog` or `skewed_logit`; the latter needs `c0`.
    pub fn parse(name: &str, c0: Option<f64>) -> Result<Self> {
        match name {
            "logit" => Ok(Link::Logit),
            "cloglog" | "c-loglog" => Ok(Link::Cloglog),
            "skewed_logit" | "skewed-logit" => match c0 {
                Some(c) => Link::skewed_logit(c),
                None => Err(Error::Config("skewed_logit requires key `c0`".into())),
            },
            other => Err(Error::Config(format!("unknown link `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Cloglog => "cloglog",
            Link::SkewedLogit { .. } => "skewed_logit",
        }
    }

    /// Incidence for linear predictor `eta`, clamped away from 0 and 1.
    pub fn probability(&self, eta: f64) -> f64 {
        let p = match *self {
            Link::Logit => logistic(eta),
            Link::Cloglog => -(-eta.exp()).exp_m1(),
            Link::SkewedLogit { c0 } => logistic(eta + c0.ln()),
        };
        p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }

    /// Linear predictor giving incidence `p` in (0, 1).
    pub fn linear_predictor(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("incidence must lie in (0, 1), got {p}")));
        }
        let logit = (p / (1.0 - p)).ln();
        Ok(match *self {
            Link::Logit => logit,
            Link::Cloglog => (-(-p).ln_1p()).ln(),
            Link::SkewedLogit { c0 } => logit - c0.ln(),
        })
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetry_and_reference_points() {
        assert_eq!(Link::Logit.probability(0.0), 0.5);
        assert_relative_eq!(
            Link::Cloglog.probability(0.0),
            1.0 - (-1f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(Link::Cloglog.probability(0.0), 0.632121, epsilon = 1e-6);
        let skewed = Link::skewed_logit(0.004).unwrap();
        assert_relative_eq!(skewed.probability(0.0), 0.004 / 1.004, max_relative = 1e-14);
        assert_relative_eq!(skewed.probability(0.0), 0.0039841, epsilon = 1e-7);
    }

    #[test]
    fn linear_predictor_inverts_probability() {
        for link in [Link::Logit, Link::Cloglog, Link::skewed_logit(0.004).unwrap()] {
            for &p in &[1e-6, 0.001, 0.3, 0.9] {
                let eta = link.linear_predictor(p).unwrap();
                assert_relative_eq!(link.probability(eta), p, max_relative = 1e-10);
            }
            assert!(link.linear_predictor(1.0).is_err());
        }
    }

    #[test]
    fn skewed_logit_matches_closed_form() {
        let link = Link::skewed_logit(0.3).unwrap();
        for &eta in &[-8.0, -1.5, 0.0, 0.7, 4.0] {
            let e = f64::exp(eta);
            assert_relative_eq!(link.probability(eta), 0.3 * e / (1.0 + 0.3 * e), max_relative = 1e-13);
        }
    }

    #[test]
    fn monotone_and_limits() {
        let links = [Link::Logit, Link::Cloglog, Link::skewed_logit(0.004).unwrap()];
        let grid: Vec<f64> = (0..=400).map(|k| -20.0 + 0.1 * k as f64).collect();
        for link in links {
            for w in grid.windows(2) {
                let (a, b) = (link.probability(w[0]), link.probability(w[1]));
                // strict away from the clamp region
                if a > PROB_FLOOR && b < 1.0 - PROB_FLOOR {
                    assert!(a < b, "{link:?} not increasing at {}", w[0]);
                } else {
                    assert!(a <= b);
                }
            }
            assert!(link.probability(-800.0) <= 1e-11);
            assert!(link.probability(800.0) >= 1.0 - 1e-11);
            for eta in [-1e6, -50.0, 50.0, 1e6] {
                let p = link.probability(eta);
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    #[test]
    fn parse_requires_c0() {
        assert!(matches!(Link::parse("skewed_logit", None), Err(Error::Config(m)) if m.contains("c0")));
        assert!(Link::skewed_logit(0.0).is_err());
        assert_eq!(Link::parse("cloglog", None).unwrap(), Link::Cloglog);
    }
}
