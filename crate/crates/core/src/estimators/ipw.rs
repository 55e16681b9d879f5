use crate::error::Result;
use crate::sample::Observation;
use crate::solvers::SolverConfig;

use super::{root_above, EstimateResult, Inclusion, Method, Root};

/// Solves Z = Σ_S p / π(p; Z) for Z ≥ V.
pub fn ipw(obs: &Observation, inclusion: Inclusion, cfg: &SolverConfig) -> Result<EstimateResult> {
    obs.require_nonempty()?;
    let method = match inclusion {
        Inclusion::Poisson => Method::IpwPoisson,
        Inclusion::FixedN => Method::IpwFixedN,
    };
    let n = obs.n();
    if obs.m() as u64 == n {
        return Ok(EstimateResult::infinite(method, "all points sampled once (M = N)"));
    }
    let v = obs.v();
    let f = |z: f64| {
        obs.entries
            .iter()
            .map(|e| e.p / (z * inclusion.pi(e.p, z, n)))
            .sum::<f64>()
            - 1.0
    };
    let lo = v.max(obs.max_mass()) * (1.0 + 1e-12);
    match root_above(f, lo, v, cfg)? {
        Root::Finite { z, evaluations } => Ok(EstimateResult::finite(method, z)
            .with("evaluations", evaluations as f64)
            .with("residual", f(z))),
        Root::Infinite => Ok(EstimateResult::infinite(method, "no finite root")),
    }
}

pub fn ipw_fixed_n(obs: &Observation, cfg: &SolverConfig) -> Result<EstimateResult> {
    ipw(obs, Inclusion::FixedN, cfg)
}

pub fn ipw_poisson(obs: &Observation, cfg: &SolverConfig) -> Result<EstimateResult> {
    ipw(obs, Inclusion::Poisson, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn fixed_n_single_point() {
        let r = ipw_fixed_n(&obs(&[(1.0, 2)]), &SolverConfig::default()).unwrap();
        // Z = 1/(1 − (1 − 1/Z)²) reduces to 2 − 1/Z = 1; the bracket starts at V(1+1e-12).
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn fixed_n_two_points() {
        let r = ipw_fixed_n(&obs(&[(1.0, 2), (1.0, 2)]), &SolverConfig::default()).unwrap();
        // high-precision bisection of Z = 2/(1 − (1 − 1/Z)^4)
        assert!((r.value - 2.191_487_883_953_118_7).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn poisson_single_point() {
        let r = ipw_poisson(&obs(&[(1.0, 2)]), &SolverConfig::default()).unwrap();
        // Z(1 − e^{−2/Z}) = 1
        assert!((r.value - 1.255_000_974_915_975_3).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn all_singletons_are_infinite() {
        let o = obs(&[(1.0, 1), (2.0, 1), (0.5, 1)]);
        let cfg = SolverConfig::default();
        for r in [ipw_fixed_n(&o, &cfg).unwrap(), ipw_poisson(&o, &cfg).unwrap()] {
            assert_eq!(r.value, f64::INFINITY);
            assert!(r.reason.is_some());
        }
    }

    proptest! {
        #[test]
        fn scale_equivariant(
            pts in proptest::collection::vec((0.01f64..10.0, 1u64..6), 1..8),
            log_s in -6.0f64..6.0,
        ) {
            let o = obs(&pts);
            let s = log_s.exp();
            let cfg = SolverConfig::default();
            for inc in [Inclusion::Poisson, Inclusion::FixedN] {
                let a = ipw(&o, inc, &cfg).unwrap().value;
                let b = ipw(&o.scaled(s), inc, &cfg).unwrap().value;
                if a.is_finite() {
                    prop_assert!((b / (s * a) - 1.0).abs() < 1e-8, "{} {}", a, b);
                } else {
                    prop_assert!(b.is_infinite());
                }
            }
        }

        #[test]
        fn root_satisfies_equation(pts in proptest::collection::vec((0.01f64..10.0, 1u64..6), 1..8)) {
            let o = obs(&pts);
            let cfg = SolverConfig::default();
            let r = ipw_poisson(&o, &cfg).unwrap();
            if r.is_finite() {
                let n = o.n() as f64;
                let rhs: f64 = o.entries.iter().map(|e| e.p / -(-n * e.p / r.value).exp_m1()).sum();
                prop_assert!((rhs / r.value - 1.0).abs() < 1e-8);
                prop_assert!(r.value >= o.v());
            }
        }
    }
}
