use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::Observation;
use crate::solvers::SolverConfig;
use crate::special::ln_gamma;

use super::ipw_poisson;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodTuring {
    pub w_over_z: f64,
    pub z: f64,
    pub w: f64,
}

fn singletons(obs: &Observation) -> u64 {
    obs.entries.iter().filter(|e| e.c == 1).count() as u64
}

/// W/Z = Φ₁/N with Z = V·N/(N − Φ₁).
pub fn good_turing_classic(obs: &Observation) -> Result<GoodTuring> {
    obs.require_nonempty()?;
    let n = obs.n();
    let phi1 = singletons(obs);
    let v = obs.v();
    if phi1 == n {
        return Ok(GoodTuring {
            w_over_z: 1.0,
            z: f64::INFINITY,
            w: f64::INFINITY,
        });
    }
    let (n, phi1) = (n as f64, phi1 as f64);
    Ok(GoodTuring {
        w_over_z: phi1 / n,
        z: v * n / (n - phi1),
        w: v * phi1 / (n - phi1),
    })
}

/// Z from the Poisson inclusion fixed point and W = Σ_S p / (e^{Np/Z} − 1),
/// which makes V/Z + W/Z = 1 hold at the root.
pub fn good_turing_rb(obs: &Observation, cfg: &SolverConfig) -> Result<GoodTuring> {
    obs.require_nonempty()?;
    let z = ipw_poisson(obs, cfg)?.value;
    if z.is_infinite() {
        return Ok(GoodTuring {
            w_over_z: 1.0,
            z,
            w: f64::INFINITY,
        });
    }
    let n = obs.n() as f64;
    let w: f64 = obs.entries.iter().map(|e| e.p / (n * e.p / z).exp_m1()).sum();
    Ok(GoodTuring { w_over_z: w / z, z, w })
}

/// Σ_S (1 − e^{−λp/N}) / (e^{λp} − 1). The λ → 0 limit is M/N.
pub fn good_toulmin_rb(obs: &Observation, lambda: f64) -> Result<f64> {
    obs.require_nonempty()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda = {lambda}")));
    }
    let n = obs.n() as f64;
    if lambda == 0.0 {
        return Ok(obs.m() as f64 / n);
    }
    Ok(obs
        .entries
        .iter()
        .map(|e| {
            let x = lambda * e.p;
            -(-x / n).exp_m1() / x.exp_m1()
        })
        .sum())
}

/// log(e^x − 1) for x > 0.
fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// E(Φ_k) = Σ_S ((λp)^k / k!) / (e^{λp} − 1).
pub fn expected_phi(obs: &Observation, lambda: f64, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must be positive")));
    }
    let kf = k as f64;
    Ok(obs
        .entries
        .iter()
        .map(|e| {
            let x = lambda * e.p;
            (kf * x.ln() - ln_gamma(kf + 1.0) - ln_expm1(x)).exp()
        })
        .sum())
}
