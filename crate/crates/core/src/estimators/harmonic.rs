use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::Observation;
use crate::solvers::{solve_root, SolverConfig};

use super::{EstimateResult, Inclusion, Method, RbWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarmonicMode {
    /// Z = N·H / Σ c h/p
    Classic,
    /// Z = N·H / Σ v h/p
    RbLinear,
    /// H = Σ_S h / π(Z)
    IpwNonlinear,
}

/// Reciprocal importance sampling estimate of Z from an auxiliary function
/// `h` with known total `H`.
///
/// In the nonlinear mode Σ_S h/π increases with Z from Σ_S h; when that
/// already reaches H the root sits at Z → 0⁺ and the value 0 is returned
/// with a reason.
pub fn harmonic_mean(
    obs: &Observation,
    h: &[f64],
    total_h: f64,
    mode: HarmonicMode,
    weights: Option<&RbWeights>,
    inclusion: Inclusion,
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    obs.require_nonempty()?;
    if h.len() != obs.m() {
        return Err(Error::InvalidInput("h must align with the entries".into()));
    }
    if !(total_h > 0.0 && total_h.is_finite()) {
        return Err(Error::InvalidInput(format!("H = {total_h} must be positive")));
    }
    if let Some(bad) = h.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!("h[{bad}] = {} is negative", h[bad])));
    }
    let n = obs.n();
    let nf = n as f64;
    let linear = |method: Method, counts: &mut dyn Iterator<Item = f64>| {
        let denom: f64 = obs
            .entries
            .iter()
            .zip(h)
            .zip(counts)
            .map(|((e, h), c)| c * h / e.p)
            .sum();
        if denom > 0.0 {
            EstimateResult::finite(method, nf * total_h / denom)
        } else {
            EstimateResult::infinite(method, "zero denominator: h vanishes on the sample")
        }
    };
    let mut result = match mode {
        HarmonicMode::Classic => linear(Method::HarmonicClassic, &mut obs.entries.iter().map(|e| e.c as f64)),
        HarmonicMode::RbLinear => {
            let w = weights.ok_or_else(|| Error::InvalidInput("rb_linear needs weights".into()))?;
            if w.v.len() != obs.m() {
                return Err(Error::InvalidInput("weights must align with the entries".into()));
            }
            linear(Method::HarmonicRbLinear, &mut w.v.iter().copied())
        }
        HarmonicMode::IpwNonlinear => {
            let method = Method::HarmonicIpw;
            let g = |z: f64| {
                obs.entries
                    .iter()
                    .zip(h)
                    .map(|(e, h)| h / inclusion.pi(e.p, z, n))
                    .sum::<f64>()
                    / total_h
                    - 1.0
            };
            let sum_h: f64 = h.iter().sum();
            if sum_h == 0.0 {
                EstimateResult::infinite(method, "zero denominator: h vanishes on the sample")
            } else if sum_h >= total_h {
                let mut r = EstimateResult::finite(method, 0.0);
                r.reason = Some("sampled h already reaches H; root at Z -> 0+".into());
                r
            } else {
                let v = obs.v();
                let (mut lo, mut hi) = (v, v);
                while g(lo) >= 0.0 {
                    lo *= 0.5;
                    if lo < 1e-300 * v {
                        return Err(Error::Degenerate("no sign change below V".into()));
                    }
                }
                while g(hi) < 0.0 {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Err(Error::Degenerate("no sign change above V".into()));
                    }
                }
                let z = solve_root(g, (lo, hi), cfg)?;
                EstimateResult::finite(method, z).with("residual", g(z))
            }
        }
    };
    if result.value > 0.0 && result.value.is_finite() {
        let z = result.value;
        let min_ratio = obs
            .entries
            .iter()
            .zip(h)
            .filter(|(_, h)| **h > 0.0)
            .map(|(e, h)| e.p * total_h / (h * z))
            .fold(f64::INFINITY, f64::min);
        result = result.with("min_p_h_ratio", min_ratio);
    }
    Ok(result)
}
