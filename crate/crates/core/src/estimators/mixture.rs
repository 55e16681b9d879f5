use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::Observation;
use crate::solvers::{solve_root, SolverConfig};

use super::{harmonic_mean, ipw, EstimateResult, HarmonicMode, Inclusion, Method, RbWeights};

/// Grid resolution and span (in decades above V) of the root scan.
const SCAN_PER_DECADE: usize = 20;
const SCAN_DECADES: usize = 18;

/// A sample drawn from a mixture p(i) = Σ_j r(i,j) w(j).
#[derive(Debug, Clone, Copy)]
pub struct MixtureInput<'a> {
    /// r(i, j) for each entry of the observation.
    pub r: &'a [Vec<f64>],
    pub w: &'a [f64],
    /// Weight of the auxiliary-function anchor, in [0, 1].
    pub gamma: f64,
    pub h: Option<&'a [f64]>,
    pub total_h: Option<f64>,
    pub inclusion: Inclusion,
    pub weights: Option<&'a RbWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureEstimate {
    pub z: EstimateResult,
    /// R(j) = Σ_S r(i,j) / π(i; Z)
    pub r_ipw: Vec<f64>,
    /// R(j) = (Z/N) Σ_S v(i) r(i,j) / p(i), when weights were supplied.
    pub r_rb: Option<Vec<f64>>,
    /// Every root of the anchored equation found on the scan.
    pub roots: Vec<f64>,
}

fn validate(obs: &Observation, input: &MixtureInput) -> Result<()> {
    let j = input.w.len();
    if j == 0 {
        return Err(Error::InvalidInput("no mixture components".into()));
    }
    if input.r.len() != obs.m() {
        return Err(Error::InvalidInput("r must have one row per entry".into()));
    }
    for (e, row) in obs.entries.iter().zip(input.r) {
        if row.len() != j {
            return Err(Error::InvalidInput(format!("r row for entry {} has {} columns", e.i, row.len())));
        }
        let p: f64 = row.iter().zip(input.w).map(|(r, w)| r * w).sum();
        if (p - e.p).abs() > 1e-9 * e.p {
            return Err(Error::InvalidInput(format!(
                "entry {}: Σ r·w = {p} but p = {}",
                e.i, e.p
            )));
        }
    }
    if !(0.0..=1.0).contains(&input.gamma) {
        return Err(Error::InvalidInput(format!("gamma = {} outside [0, 1]", input.gamma)));
    }
    if input.gamma > 0.0 && (input.h.is_none() || input.total_h.is_none()) {
        return Err(Error::InvalidInput("gamma > 0 needs h and H".into()));
    }
    if let Some(w) = input.weights {
        if w.v.len() != obs.m() {
            return Err(Error::InvalidInput("weights must align with the entries".into()));
        }
    }
    Ok(())
}

/// Solves 1 = Σ_S (γ h/H + (1 − γ) p/Z) / π(Z) and reports the component
/// totals R(j) at the root.
///
/// For 0 < γ < 1 the left side is neither increasing nor decreasing and may
/// have several roots; they are located on a log grid over [V, 10^18 V] and
/// the one closest (in log Z) to the geometric interpolation of the γ = 0
/// and γ = 1 solutions is returned.
pub fn mixture_estimate(obs: &Observation, input: &MixtureInput, cfg: &SolverConfig) -> Result<MixtureEstimate> {
    obs.require_nonempty()?;
    validate(obs, input)?;
    let gamma = input.gamma;
    let n = obs.n();
    let v = obs.v();
    let mut roots = Vec::new();
    let z = if gamma == 0.0 {
        let mut r = ipw(obs, input.inclusion, cfg)?;
        r.method = Method::Mixture;
        if r.value.is_finite() {
            roots.push(r.value);
        }
        r
    } else {
        let h = input.h.unwrap_or_default();
        let total_h = input.total_h.unwrap_or(1.0);
        let anchor_a = harmonic_mean(obs, h, total_h, HarmonicMode::IpwNonlinear, None, input.inclusion, cfg)?;
        if gamma == 1.0 {
            let mut r = anchor_a;
            r.method = Method::Mixture;
            if r.value.is_finite() {
                roots.push(r.value);
            }
            r
        } else if obs.m() as u64 == n {
            EstimateResult::infinite(Method::Mixture, "M = N with gamma < 1")
        } else {
            let anchor_b = ipw(obs, input.inclusion, cfg)?;
            let g = |z: f64| {
                obs.entries
                    .iter()
                    .zip(h)
                    .map(|(e, h)| (gamma * h / total_h + (1.0 - gamma) * e.p / z) / input.inclusion.pi(e.p, z, n))
                    .sum::<f64>()
                    - 1.0
            };
            let steps = SCAN_PER_DECADE * SCAN_DECADES;
            let grid: Vec<f64> = (0..=steps)
                .map(|k| v * 10f64.powf(k as f64 / SCAN_PER_DECADE as f64))
                .collect();
            let vals: Vec<f64> = grid.iter().map(|&z| g(z)).collect();
            for k in 0..steps {
                if vals[k] == 0.0 {
                    roots.push(grid[k]);
                } else if vals[k] * vals[k + 1] < 0.0 {
                    roots.push(solve_root(g, (grid[k], grid[k + 1]), cfg)?);
                }
            }
            let log_anchor = |r: &EstimateResult| {
                if r.value.is_finite() {
                    Some(r.value.max(v).ln())
                } else {
                    None
                }
            };
            let target = match (log_anchor(&anchor_a), log_anchor(&anchor_b)) {
                (Some(a), Some(b)) => gamma * a + (1.0 - gamma) * b,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => v.ln(),
            };
            match roots
                .iter()
                .copied()
                .min_by(|a, b| (a.ln() - target).abs().total_cmp(&(b.ln() - target).abs()))
            {
                Some(z) => {
                    let mut r = EstimateResult::finite(Method::Mixture, z)
                        .with("roots_found", roots.len() as f64)
                        .with("residual", g(z));
                    if anchor_a.value.is_finite() {
                        r = r.with("z_anchor_h", anchor_a.value);
                    }
                    if anchor_b.value.is_finite() {
                        r = r.with("z_anchor_ipw", anchor_b.value);
                    }
                    r
                }
                None => EstimateResult::infinite(Method::Mixture, "anchored equation has no root above V"),
            }
        }
    };

    let j = input.w.len();
    let zv = z.value;
    let r_ipw = if zv.is_finite() && zv > 0.0 {
        (0..j)
            .map(|col| {
                obs.entries
                    .iter()
                    .zip(input.r)
                    .map(|(e, row)| row[col] / input.inclusion.pi(e.p, zv, n))
                    .sum()
            })
            .collect()
    } else {
        vec![f64::INFINITY; j]
    };
    let r_rb = input.weights.map(|w| {
        (0..j)
            .map(|col| {
                let s: f64 = obs
                    .entries
                    .iter()
                    .zip(input.r)
                    .zip(&w.v)
                    .map(|((e, row), v)| v * row[col] / e.p)
                    .sum();
                zv * s / n as f64
            })
            .collect()
    });
    Ok(MixtureEstimate { z, r_ipw, r_rb, roots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Entry;

    fn obs(entries: &[(f64, u64)]) -> Observation {
        let d = entries.len() + 1;
        let es = entries
            .iter()
            .enumerate()
            .map(|(i, &(p, c))| Entry { i, p, c })
            .collect();
        Observation::new(d, vec![1.0 / d as f64; d], es).unwrap()
    }

    fn single(o: &Observation) -> Vec<Vec<f64>> {
        o.entries.iter().map(|e| vec![e.p]).collect()
    }

    #[test]
    fn gamma_zero_is_ipw() {
        let cfg = SolverConfig::default();
        let o = obs(&[(1.0, 3), (2.0, 1), (0.5, 2)]);
        let r = single(&o);
        for inclusion in [Inclusion::Poisson, Inclusion::FixedN] {
            let input = MixtureInput {
                r: &r,
                w: &[1.0],
                gamma: 0.0,
                h: None,
                total_h: None,
                inclusion,
                weights: None,
            };
            let est = mixture_estimate(&o, &input, &cfg).unwrap();
            let base = ipw(&o, inclusion, &cfg).unwrap();
            assert_eq!(est.z.value, base.value);
            // single component: R(0) = Z
            assert!((est.r_ipw[0] / est.z.value - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_decomposition() {
        let o = obs(&[(1.0, 3)]);
        let r = vec![vec![0.5]];
        let input = MixtureInput {
            r: &r,
            w: &[1.0],
            gamma: 0.0,
            h: None,
            total_h: None,
            inclusion: Inclusion::Poisson,
            weights: None,
        };
        assert!(mixture_estimate(&o, &input, &SolverConfig::default()).is_err());
    }

    #[test]
    fn singletons_infinite_for_partial_gamma() {
        let o = obs(&[(1.0, 1), (2.0, 1)]);
        let r = single(&o);
        let h = [0.1, 0.1];
        let input = MixtureInput {
            r: &r,
            w: &[1.0],
            gamma: 0.5,
            h: Some(&h),
            total_h: Some(1.0),
            inclusion: Inclusion::Poisson,
            weights: None,
        };
        let est = mixture_estimate(&o, &input, &SolverConfig::default()).unwrap();
        assert!(est.z.value.is_infinite());
    }

    #[test]
    fn partial_gamma_root_between_consistent_anchors() {
        // h = p / Z₀ makes both anchors consistent estimates of the same Z
        let cfg = SolverConfig::default();
        let o = obs(&[(1.0, 4), (2.0, 6), (0.5, 2), (0.25, 1)]);
        let z0 = 4.0;
        let h: Vec<f64> = o.entries.iter().map(|e| e.p / z0).collect();
        let r = single(&o);
        let input = MixtureInput {
            r: &r,
            w: &[1.0],
            gamma: 0.5,
            h: Some(&h),
            total_h: Some(1.0),
            inclusion: Inclusion::Poisson,
            weights: None,
        };
        let est = mixture_estimate(&o, &input, &cfg).unwrap();
        assert!(est.z.value.is_finite());
        assert!(!est.roots.is_empty());
        assert!(est.z.diagnostics["residual"].abs() < 1e-9);
    }
}
