//! Model-free point estimators of Z, W and W/Z.

mod good_turing;
mod harmonic;
mod ipw;
mod mixture;
mod rb;

use std::cell::Cell;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::solvers::{solve_root, SolverConfig};

pub use good_turing::{expected_phi, good_toulmin_rb, good_turing_classic, good_turing_rb, GoodTuring};
pub use harmonic::{harmonic_mean, HarmonicMode};
pub use ipw::{ipw, ipw_fixed_n, ipw_poisson};
pub use mixture::{mixture_estimate, MixtureEstimate, MixtureInput};
pub use rb::{
    rb_exact, rb_exact_with, rb_mean_estimate, rb_poisson_lambda, rb_poisson_weights, rb_z_equation, RbCaps,
    RbWeights, ZVariant,
};

/// Upper search limit for Z, relative to the observed mass.
const Z_SEARCH_LIMIT: f64 = 1e18;

/// Inclusion probability model: the chance that a point of mass `p` is
/// sampled at least once in `N` draws when the total mass is `Z`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inclusion {
    /// 1 − exp(−N p / Z)
    #[default]
    Poisson,
    /// 1 − (1 − p/Z)^N
    FixedN,
}

impl Inclusion {
    pub fn pi(self, p: f64, z: f64, n: u64) -> f64 {
        let n = n as f64;
        match self {
            Inclusion::Poisson => -(-n * p / z).exp_m1(),
            Inclusion::FixedN => {
                if p >= z {
                    1.0
                } else {
                    -(n * (-p / z).ln_1p()).exp_m1()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    IpwFixedN,
    IpwPoisson,
    RbVOverZ,
    RbMOverZ,
    HarmonicClassic,
    HarmonicRbLinear,
    HarmonicIpw,
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    /// Finite and positive, +∞, or 0 at a boundary; the latter two carry a
    /// `reason`.
    pub value: f64,
    pub method: Method,
    pub diagnostics: BTreeMap<String, f64>,
    pub reason: Option<String>,
}

impl EstimateResult {
    pub(crate) fn finite(method: Method, value: f64) -> Self {
        Self {
            value,
            method,
            diagnostics: BTreeMap::new(),
            reason: None,
        }
    }

    pub(crate) fn infinite(method: Method, reason: impl Into<String>) -> Self {
        Self {
            value: f64::INFINITY,
            method,
            diagnostics: BTreeMap::new(),
            reason: Some(reason.into()),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Root {
    Finite { z: f64, evaluations: usize },
    Infinite,
}

/// Root of `f` on `[lo, ∞)` where `f(lo) ≥ 0` and `f` turns negative at
/// large Z. The upper end is doubled until a sign change appears or
/// `Z_SEARCH_LIMIT · scale` is passed, giving the +∞ verdict.
pub(crate) fn root_above<F: Fn(f64) -> f64>(f: F, lo: f64, scale: f64, cfg: &SolverConfig) -> Result<Root> {
    let count = Cell::new(0usize);
    let g = |z: f64| {
        count.set(count.get() + 1);
        f(z)
    };
    let f_lo = g(lo);
    if f_lo <= 0.0 {
        return Ok(Root::Finite {
            z: lo,
            evaluations: count.get(),
        });
    }
    let mut a = lo;
    let mut b = 2.0 * lo;
    while g(b) > 0.0 {
        if b > Z_SEARCH_LIMIT * scale {
            return Ok(Root::Infinite);
        }
        a = b;
        b *= 2.0;
    }
    let z = solve_root(g, (a, b), cfg)?;
    Ok(Root::Finite {
        z,
        evaluations: count.get(),
    })
}
