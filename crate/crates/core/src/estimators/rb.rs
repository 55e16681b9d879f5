use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::Observation;
use crate::solvers::{solve_root, SolverConfig};
use crate::special::{ln_gamma, log_sum_exp};

use super::{root_above, EstimateResult, Inclusion, Method, Root};

/// Size limits for the exact dynamic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RbCaps {
    pub n_max: u64,
    pub m_max: usize,
}

impl Default for RbCaps {
    fn default() -> Self {
        Self { n_max: 64, m_max: 32 }
    }
}

/// Expected counts given (S, p|S, N), aligned with `Observation::entries`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbWeights {
    pub v: Vec<f64>,
    /// log F_N for exact weights.
    pub log_f_n: Option<f64>,
    /// λ for the Poisson approximation.
    pub lambda: Option<f64>,
}

/// Log of the count polynomial for one point: entry k is log(p^k / k!) for
/// k ≥ 1 and −∞ for k = 0.
fn point_terms(p: f64, n: usize) -> Vec<f64> {
    let lp = p.ln();
    (0..=n)
        .map(|k| {
            if k == 0 {
                f64::NEG_INFINITY
            } else {
                k as f64 * lp - ln_gamma(k as f64 + 1.0)
            }
        })
        .collect()
}

/// Log-space truncated convolution of two coefficient sequences.
fn convolve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut buf = Vec::with_capacity(n + 1);
    (0..=n)
        .map(|total| {
            buf.clear();
            buf.extend((0..=total).map(|k| a[k] + b[total - k]));
            log_sum_exp(&buf)
        })
        .collect()
}

fn unit(n: usize) -> Vec<f64> {
    let mut e = vec![f64::NEG_INFINITY; n + 1];
    e[0] = 0.0;
    e
}

pub fn rb_exact(obs: &Observation) -> Result<RbWeights> {
    rb_exact_with(obs, RbCaps::default())
}

/// Exact weights by dynamic programming over the points of S.
///
/// With A(n) = Σ over count vectors of total n with every count ≥ 1 of
/// Π p^c / c!, F_N = N!·A(N) and v(i) = Σ_k k·(p_i^k/k!)·A_{−i}(N−k) / A(N),
/// where A_{−i} leaves point i out. A_{−i} is assembled from prefix and
/// suffix products.
pub fn rb_exact_with(obs: &Observation, caps: RbCaps) -> Result<RbWeights> {
    obs.require_nonempty()?;
    let n = obs.n();
    let m = obs.m();
    if n > caps.n_max {
        return Err(Error::SizeLimit(format!("N = {n} exceeds {}", caps.n_max)));
    }
    if m > caps.m_max {
        return Err(Error::SizeLimit(format!("M = {m} exceeds {}", caps.m_max)));
    }
    let n = n as usize;
    let terms: Vec<Vec<f64>> = obs.entries.iter().map(|e| point_terms(e.p, n)).collect();

    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(unit(n));
    for t in &terms {
        let next = convolve(prefix.last().unwrap(), t, n);
        prefix.push(next);
    }
    let mut suffix = vec![unit(n); m + 1];
    for j in (0..m).rev() {
        suffix[j] = convolve(&suffix[j + 1], &terms[j], n);
    }
    let log_a = prefix[m][n];
    let log_f_n = ln_gamma(n as f64 + 1.0) + log_a;

    let v = (0..m)
        .map(|i| {
            let others = convolve(&prefix[i], &suffix[i + 1], n);
            let parts: Vec<f64> = (1..=n)
                .map(|k| (k as f64).ln() + terms[i][k] + others[n - k])
                .collect();
            (log_sum_exp(&parts) - log_a).exp()
        })
        .collect();
    Ok(RbWeights {
        v,
        log_f_n: Some(log_f_n),
        lambda: None,
    })
}

/// x / (1 − e^{−x}), equal to 1 at x = 0.
pub(crate) fn poisson_count(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x / -(-x).exp_m1()
    }
}

/// λ solving N = Σ_S λp / (1 − e^{−λp}); 0 when M = N.
pub fn rb_poisson_lambda(obs: &Observation, cfg: &SolverConfig) -> Result<f64> {
    obs.require_nonempty()?;
    let n = obs.n();
    if obs.m() as u64 == n {
        return Ok(0.0);
    }
    let n = n as f64;
    let g = |lambda: f64| {
        obs.entries
            .iter()
            .map(|e| poisson_count(lambda * e.p))
            .sum::<f64>()
            - n
    };
    solve_root(g, (0.0, n / obs.v()), cfg)
}

/// Saddle-point weights v(i) = λp(i) / (1 − e^{−λp(i)}).
pub fn rb_poisson_weights(obs: &Observation, cfg: &SolverConfig) -> Result<RbWeights> {
    let lambda = rb_poisson_lambda(obs, cfg)?;
    Ok(RbWeights {
        v: obs.entries.iter().map(|e| poisson_count(lambda * e.p)).collect(),
        log_f_n: None,
        lambda: Some(lambda),
    })
}

/// (1/N) Σ_S v(i) f(i).
pub fn rb_mean_estimate(obs: &Observation, f: &[f64], weights: &RbWeights) -> Result<f64> {
    if f.len() != obs.m() || weights.v.len() != obs.m() {
        return Err(Error::InvalidInput("f and weights must align with the entries".into()));
    }
    obs.require_nonempty()?;
    let s: f64 = weights.v.iter().zip(f).map(|(v, f)| v * f).sum();
    Ok(s / obs.n() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZVariant {
    /// V/Z = (1/N) Σ v π
    VOverZ,
    /// M/Z = (1/N) Σ v π / p
    MOverZ,
}

/// Solves one of the Rao-Blackwellized self-consistency equations for Z.
///
/// Both equations read (Z/N) Σ v·π·g = K with Z·π increasing in Z, so the
/// root is unique. The M/Z root may fall below V, in which case Z = V is
/// returned with a `clamped` diagnostic.
pub fn rb_z_equation(
    obs: &Observation,
    weights: &RbWeights,
    variant: ZVariant,
    inclusion: Inclusion,
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    obs.require_nonempty()?;
    if weights.v.len() != obs.m() {
        return Err(Error::InvalidInput("weights must align with the entries".into()));
    }
    let method = match variant {
        ZVariant::VOverZ => Method::RbVOverZ,
        ZVariant::MOverZ => Method::RbMOverZ,
    };
    let n = obs.n();
    if obs.m() as u64 == n {
        return Ok(EstimateResult::infinite(method, "uninformative when M = N"));
    }
    let v = obs.v();
    let nf = n as f64;
    let (factor, target): (Box<dyn Fn(f64) -> f64>, f64) = match variant {
        ZVariant::VOverZ => (Box::new(|_| 1.0), v),
        ZVariant::MOverZ => (Box::new(|p| 1.0 / p), obs.m() as f64),
    };
    // decreasing form: K − (Z/N) Σ v π g
    let f = |z: f64| {
        let s: f64 = obs
            .entries
            .iter()
            .zip(&weights.v)
            .map(|(e, w)| w * inclusion.pi(e.p, z, n) * factor(e.p))
            .sum();
        target - z * s / nf
    };
    let lo = match variant {
        ZVariant::VOverZ => v * (1.0 + 1e-12),
        ZVariant::MOverZ => obs.max_mass() * 1e-12,
    };
    match root_above(f, lo, v, cfg)? {
        Root::Finite { z, evaluations } => {
            let mut r = EstimateResult::finite(method, z)
                .with("evaluations", evaluations as f64)
                .with("residual", f(z) / target);
            if z < v {
                r.value = v;
                r = r.with("clamped", 1.0).with("unclamped_root", z);
                r.reason = Some("root below observed mass; clamped to V".into());
            }
            Ok(r)
        }
        Root::Infinite => Ok(EstimateResult::infinite(method, "no finite root")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::sample::Entry;
    use proptest::prelude::*;

    fn obs(entries: &[(f64, u64)]) -> Observation {
        let d = entries.len() + 1;
        let es = entries
            .iter()
            .enumerate()
            .map(|(i, &(p, c))| Entry { i, p, c })
            .collect();
        Observation::new(d, vec![1.0 / d as f64; d], es).unwrap()
    }

    #[test]
    fn two_equal_points() {
        let w = rb_exact(&obs(&[(1.0, 1), (1.0, 2)])).unwrap();
        assert!((w.log_f_n.unwrap() - 6f64.ln()).abs() < 1e-13);
        assert!((w.v[0] - 1.5).abs() < 1e-13);
        assert!((w.v[1] - 1.5).abs() < 1e-13);
    }

    #[test]
    fn two_unequal_points() {
        // admissible (1,2) weight 3·2·1 = 6, (2,1) weight 3·4·1 = 12
        let w = rb_exact(&obs(&[(2.0, 2), (1.0, 1)])).unwrap();
        assert!((w.log_f_n.unwrap() - 18f64.ln()).abs() < 1e-13);
        assert!((w.v[0] - (6.0 + 24.0) / 18.0).abs() < 1e-13);
        assert!((w.v[1] - (12.0 + 12.0) / 18.0).abs() < 1e-13);
    }

    #[test]
    fn singletons_have_unit_weight() {
        let w = rb_exact(&obs(&[(1.0, 1), (3.0, 1), (0.2, 1)])).unwrap();
        for v in w.v {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn caps_enforced() {
        let o = obs(&[(1.0, 65)]);
        assert!(matches!(rb_exact(&o), Err(Error::SizeLimit(_))));
        let many: Vec<(f64, u64)> = (0..33).map(|_| (1.0, 1)).collect();
        assert!(matches!(rb_exact(&obs(&many)), Err(Error::SizeLimit(_))));
        assert!(rb_exact_with(&o, RbCaps { n_max: 100, m_max: 4 }).is_ok());
    }

    #[test]
    fn lambda_single_point() {
        let l = rb_poisson_lambda(&obs(&[(1.0, 2)]), &SolverConfig::default()).unwrap();
        assert!((l - 1.593_624_260_040_04).abs() < 1e-9);
        assert_eq!(rb_poisson_lambda(&obs(&[(1.0, 1), (2.0, 1)]), &SolverConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn lambda_scales_inversely() {
        let cfg = SolverConfig::default();
        let o = obs(&[(1.0, 3), (0.5, 1), (2.0, 2)]);
        let a = rb_poisson_lambda(&o, &cfg).unwrap();
        let b = rb_poisson_lambda(&o.scaled(8.0), &cfg).unwrap();
        assert!((a / (8.0 * b) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mean_estimates() {
        let o = obs(&[(1.0, 1), (1.0, 2)]);
        let w = rb_exact(&o).unwrap();
        assert!((rb_mean_estimate(&o, &[1.0, 1.0], &w).unwrap() - 1.0).abs() < 1e-13);
        assert!((rb_mean_estimate(&o, &[1.0, 0.0], &w).unwrap() - 0.5).abs() < 1e-13);
        let s = obs(&[(1.0, 1), (4.0, 1), (2.0, 1)]);
        let ws = rb_exact(&s).unwrap();
        let f = [3.0, 5.0, 10.0];
        assert!((rb_mean_estimate(&s, &f, &ws).unwrap() - 6.0).abs() < 1e-13);
    }

    #[test]
    fn z_equation_single_point() {
        let cfg = SolverConfig::default();
        let o = obs(&[(1.0, 2)]);
        let w = rb_exact(&o).unwrap();
        assert!((w.v[0] - 2.0).abs() < 1e-14);
        let r = rb_z_equation(&o, &w, ZVariant::VOverZ, Inclusion::Poisson, &cfg).unwrap();
        assert!((r.value - 1.255_000_974_915_975_3).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn z_equation_variants_agree_for_equal_masses() {
        let cfg = SolverConfig::default();
        let o = obs(&[(0.5, 2), (0.5, 3), (0.5, 1)]);
        let w = rb_exact(&o).unwrap();
        let a = rb_z_equation(&o, &w, ZVariant::VOverZ, Inclusion::Poisson, &cfg).unwrap();
        let b = rb_z_equation(&o, &w, ZVariant::MOverZ, Inclusion::Poisson, &cfg).unwrap();
        assert!((a.value / b.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn z_equation_singletons() {
        let cfg = SolverConfig::default();
        let o = obs(&[(0.5, 1), (0.7, 1)]);
        let w = rb_exact(&o).unwrap();
        let r = rb_z_equation(&o, &w, ZVariant::VOverZ, Inclusion::FixedN, &cfg).unwrap();
        assert!(r.value.is_infinite());
    }

    #[test]
    fn poisson_weights_approach_exact() {
        // equal masses, N ≥ 32
        let cfg = SolverConfig::default();
        for &(m, c) in &[(4usize, 8u64), (8, 4), (16, 3), (3, 20)] {
            let pts: Vec<(f64, u64)> = (0..m).map(|_| (1.0, c)).collect();
            let o = obs(&pts);
            let exact = rb_exact(&o).unwrap();
            let approx = rb_poisson_weights(&o, &cfg).unwrap();
            for (a, b) in exact.v.iter().zip(&approx.v) {
                assert!((a / b - 1.0).abs() < 0.02, "m={m} c={c}: {a} vs {b}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_enumeration(
            masses in proptest::collection::vec(0.05f64..5.0, 1..=4),
            extra in 0u64..=4,
        ) {
            let m = masses.len() as u64;
            let n = (m + extra).min(8);
            let mut pts: Vec<(f64, u64)> = masses.iter().map(|&p| (p, 1)).collect();
            pts[0].1 += n - m;
            let o = obs(&pts);
            let w = rb_exact(&o).unwrap();
            let (log_f, v) = oracle::enumerate_truncated_multinomial(&masses, n);
            prop_assert!((w.log_f_n.unwrap() - log_f).abs() < 1e-10);
            for (a, b) in w.v.iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            prop_assert!((w.v.iter().sum::<f64>() - n as f64).abs() < 1e-8);
            prop_assert!(w.v.iter().all(|&x| x >= 1.0 - 1e-12));
        }

        #[test]
        fn poisson_weights_sum_to_n(pts in proptest::collection::vec((0.01f64..10.0, 1u64..6), 1..10)) {
            let o = obs(&pts);
            let w = rb_poisson_weights(&o, &SolverConfig::default()).unwrap();
            let n = o.n() as f64;
            prop_assert!((w.v.iter().sum::<f64>() - n).abs() < 1e-8 * n);
        }
    }
}
