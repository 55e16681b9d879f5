//! Reduced log-likelihoods of the Gamma–Poisson model and their
//! α-derivatives.
//!
//! "Reduced" means the factor Π_S p^{c−1}/c! is dropped everywhere: it does
//! not depend on W or on the parameters. See [`common_log_factor`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{summarize, Observation, SummaryStats};
use crate::special::{ln_gamma, psi, psi1};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub b: f64,
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, b: f64, lambda: f64) -> Result<Self> {
        let p = Self { alpha, b, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("b", self.b), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} = {v} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// Which α-profile is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Likelihood {
    /// Bayesian marginal over (b, λ), W kept.
    L4,
    /// L4 integrated over W.
    L5,
    /// Profile over (b, λ), W kept.
    L8,
    /// L8 integrated over W.
    L9,
    /// L3 at its stationary (b, λ).
    L11,
}

impl Likelihood {
    pub fn has_w(self) -> bool {
        matches!(self, Likelihood::L4 | Likelihood::L8)
    }
}

/// Additive pieces from which every likelihood is assembled.
#[derive(Debug, Clone, Copy)]
enum Term {
    /// −Σ_S lnΓ(αx) + αU
    Base,
    /// (αY − 1) ln W − lnΓ(αY)
    WKernel(f64),
    /// lnΓ(α) + lnΓ(N)
    BayesNorm,
    /// α ln α + N ln N − α − N
    ProfileNorm,
    /// −(α + N) ln(V + W)
    WTail(f64),
    /// −(αX + N) ln V + lnΓ(αX + N) − lnΓ(α + N)
    SMarginal,
    /// α ln b + N ln λ − (b + λ)(V + W)
    RatesW { b: f64, lambda: f64, w: f64 },
    /// α ln b + N ln λ − (b + λ)V − αY ln(b + λ)
    Rates { b: f64, lambda: f64 },
    /// `Rates` at b = (α/V)(αX+N)/(α+N), λ = (N/V)(αX+N)/(α+N)
    StationaryRates,
}

/// Observation data needed by the likelihoods: the summary statistics and
/// the base measure restricted to S.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    pub stats: SummaryStats,
    x_s: Vec<f64>,
}

impl LikelihoodModel {
    pub fn new(obs: &Observation) -> Result<Self> {
        let stats = summarize(obs)?;
        let x_s = obs.entries.iter().map(|e| obs.x[e.i]).collect();
        Ok(Self { stats, x_s })
    }

    fn n(&self) -> f64 {
        self.stats.n as f64
    }

    /// Stationary (b, λ) of L3 at fixed α.
    pub fn stationary_rates(&self, alpha: f64) -> (f64, f64) {
        let s = &self.stats;
        let n = self.n();
        let ratio = (alpha * s.x + n) / (alpha + n);
        (alpha / s.v * ratio, n / s.v * ratio)
    }

    fn value(&self, term: Term, alpha: f64) -> f64 {
        let s = &self.stats;
        let n = self.n();
        match term {
            Term::Base => alpha * s.u - self.x_s.iter().map(|x| ln_gamma(alpha * x)).sum::<f64>(),
            Term::WKernel(w) => (alpha * s.y - 1.0) * w.ln() - ln_gamma(alpha * s.y),
            Term::BayesNorm => ln_gamma(alpha) + ln_gamma(n),
            Term::ProfileNorm => alpha * alpha.ln() + n * n.ln() - alpha - n,
            Term::WTail(w) => -(alpha + n) * (s.v + w).ln(),
            Term::SMarginal => -(alpha * s.x + n) * s.v.ln() + ln_gamma(alpha * s.x + n) - ln_gamma(alpha + n),
            Term::RatesW { b, lambda, w } => alpha * b.ln() + n * lambda.ln() - (b + lambda) * (s.v + w),
            Term::Rates { b, lambda } => {
                alpha * b.ln() + n * lambda.ln() - (b + lambda) * s.v - alpha * s.y * (b + lambda).ln()
            }
            Term::StationaryRates => {
                let (b, lambda) = self.stationary_rates(alpha);
                self.value(Term::Rates { b, lambda }, alpha)
            }
        }
    }

    fn slope(&self, term: Term, alpha: f64) -> f64 {
        let s = &self.stats;
        let n = self.n();
        match term {
            Term::Base => s.u - self.x_s.iter().map(|x| x * psi(alpha * x)).sum::<f64>(),
            Term::WKernel(w) => s.y * w.ln() - s.y * psi(alpha * s.y),
            Term::BayesNorm => psi(alpha),
            Term::ProfileNorm => alpha.ln(),
            Term::WTail(w) => -(s.v + w).ln(),
            Term::SMarginal => -s.x * s.v.ln() + s.x * psi(alpha * s.x + n) - psi(alpha + n),
            Term::RatesW { b, .. } => b.ln(),
            Term::Rates { b, lambda } => b.ln() - s.y * (b + lambda).ln(),
            // envelope theorem: only the explicit α-dependence survives
            Term::StationaryRates => {
                alpha.ln() - s.x * s.v.ln() + s.x * (alpha * s.x + n).ln() - (alpha + n).ln()
            }
        }
    }

    fn curvature(&self, term: Term, alpha: f64) -> f64 {
        let s = &self.stats;
        let n = self.n();
        match term {
            Term::Base => -self.x_s.iter().map(|x| x * x * psi1(alpha * x)).sum::<f64>(),
            Term::WKernel(_) => -s.y * s.y * psi1(alpha * s.y),
            Term::BayesNorm => psi1(alpha),
            Term::ProfileNorm => 1.0 / alpha,
            Term::WTail(_) | Term::RatesW { .. } | Term::Rates { .. } => 0.0,
            Term::SMarginal => s.x * s.x * psi1(alpha * s.x + n) - psi1(alpha + n),
            Term::StationaryRates => s.x * s.x / (alpha * s.x + n) + n / (alpha * (alpha + n)),
        }
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("alpha = {alpha} must be positive and finite")))
        }
    }

    fn check_w(&self, w: f64) -> Result<()> {
        if self.stats.y_zero() {
            return Err(Error::Degenerate("Y = 0: W is a point mass at 0".into()));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidInput(format!("W = {w} must be positive")));
        }
        Ok(())
    }

    fn terms(&self, which: Likelihood, w: Option<f64>, alpha: f64) -> Result<Vec<Term>> {
        Self::check_alpha(alpha)?;
        let needs_w = || -> Result<f64> {
            let w = w.ok_or_else(|| Error::InvalidInput(format!("{which:?} needs W")))?;
            self.check_w(w)?;
            Ok(w)
        };
        Ok(match which {
            Likelihood::L4 => {
                let w = needs_w()?;
                vec![Term::Base, Term::WKernel(w), Term::BayesNorm, Term::WTail(w)]
            }
            Likelihood::L5 => vec![Term::Base, Term::BayesNorm, Term::SMarginal],
            Likelihood::L8 => {
                let w = needs_w()?;
                vec![Term::Base, Term::WKernel(w), Term::ProfileNorm, Term::WTail(w)]
            }
            Likelihood::L9 => vec![Term::Base, Term::ProfileNorm, Term::SMarginal],
            Likelihood::L11 => vec![Term::Base, Term::StationaryRates],
        })
    }

    /// log L for the α-profiles; `w` is required by L4 and L8 only.
    pub fn log_lik(&self, which: Likelihood, w: Option<f64>, alpha: f64) -> Result<f64> {
        let terms = self.terms(which, w, alpha)?;
        Ok(terms.into_iter().map(|t| self.value(t, alpha)).sum())
    }

    pub fn dlog_dalpha(&self, which: Likelihood, w: Option<f64>, alpha: f64) -> Result<f64> {
        let terms = self.terms(which, w, alpha)?;
        Ok(terms.into_iter().map(|t| self.slope(t, alpha)).sum())
    }

    pub fn d2log_dalpha2(&self, which: Likelihood, w: Option<f64>, alpha: f64) -> Result<f64> {
        let terms = self.terms(which, w, alpha)?;
        Ok(terms.into_iter().map(|t| self.curvature(t, alpha)).sum())
    }

    pub fn log_l2(&self, w: f64, params: &ModelParams) -> Result<f64> {
        params.validate()?;
        self.check_w(w)?;
        let a = params.alpha;
        Ok(self.value(Term::Base, a)
            + self.value(Term::WKernel(w), a)
            + self.value(
                Term::RatesW {
                    b: params.b,
                    lambda: params.lambda,
                    w,
                },
                a,
            ))
    }

    pub fn log_l3(&self, params: &ModelParams) -> Result<f64> {
        params.validate()?;
        let a = params.alpha;
        Ok(self.value(Term::Base, a)
            + self.value(
                Term::Rates {
                    b: params.b,
                    lambda: params.lambda,
                },
                a,
            ))
    }

    pub fn log_l4(&self, w: f64, alpha: f64) -> Result<f64> {
        self.log_lik(Likelihood::L4, Some(w), alpha)
    }

    pub fn log_l5(&self, alpha: f64) -> Result<f64> {
        self.log_lik(Likelihood::L5, None, alpha)
    }

    pub fn log_l8(&self, w: f64, alpha: f64) -> Result<f64> {
        self.log_lik(Likelihood::L8, Some(w), alpha)
    }

    pub fn log_l9(&self, alpha: f64) -> Result<f64> {
        self.log_lik(Likelihood::L9, None, alpha)
    }

    pub fn log_l11(&self, alpha: f64) -> Result<f64> {
        self.log_lik(Likelihood::L11, None, alpha)
    }
}

/// log Π_S p^{c−1} / c!, the factor omitted from every reduced likelihood.
pub fn common_log_factor(obs: &Observation) -> f64 {
    obs.entries
        .iter()
        .map(|e| (e.c as f64 - 1.0) * e.p.ln() - ln_gamma(e.c as f64 + 1.0))
        .sum()
}
