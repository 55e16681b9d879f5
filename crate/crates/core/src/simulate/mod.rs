//! Synthetic data: the Gamma–Poisson model in three equivalent generation
//! orders, counts over explicit masses, expectation formulas, and an
//! enumerable toy spin system.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! (seed, replicate, slot), so replicates can run in parallel and a single
//! dataset is reproducible from its key alone.

mod expect;
mod physics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihoods::ModelParams;
use crate::sample::Dataset;
use crate::special::{ln_gamma, log_sum_exp};

pub use expect::{expected_values, Conditioning};
pub(crate) use expect::{e_c_given_p, Point};
pub use physics::{toy_physics, ToyPhysics, ToySpec, MAX_SPINS};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenOrder {
    /// p(i) ~ Gamma(αx, b), then c(i) ~ Poisson(λp).
    #[default]
    PThenC,
    /// Z ~ Gamma(α, b), p = Z·Dirichlet(αx), N ~ Poisson(λZ), c ~ Multinomial.
    ZDirichletThenC,
    /// c(i) ~ NegBinomial(αx, λ/(b+λ)), then p(i) ~ Gamma(αx + c, b + λ).
    CThenP,
}

/// How counts are drawn over explicit masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Exactly N draws from p/Z.
    FixedN(u64),
    /// Independent Poisson counts with means λp.
    Poisson(f64),
}

/// Stream for one (seed, replicate, slot) key. Slot 0 is reserved for draws
/// shared by the whole domain; point i uses slot i + 1.
pub fn stream(seed: u64, replicate: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    // 2^32 words per slot
    rng.set_word_pos(u128::from(slot) << 32);
    rng
}

/// log of a Gamma(shape, 1) variate. Shapes below 1 use
/// G(shape) = G(shape + 1)·U^{1/shape} in log space, which stays exact when
/// the variate itself would underflow.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        return g.ln();
    }
    let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
    let u = 1.0 - rng.random::<f64>();
    g.ln() + u.ln() / shape
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let k: f64 = Poisson::new(mean).expect("finite mean").sample(rng);
    k as u64
}

/// Negative binomial with pmf Γ(a+k)/(Γ(a) k!) (1−q)^a q^k, by inversion of
/// the pmf recursion.
fn neg_binomial<R: Rng + ?Sized>(a: f64, q: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut pmf = (a * (-q).ln_1p()).exp();
    let mut cdf = pmf;
    let mut k = 0u64;
    while cdf <= u {
        let kf = k as f64;
        pmf *= (a + kf) / (kf + 1.0) * q;
        if pmf == 0.0 && cdf > 0.0 {
            // past the representable tail
            break;
        }
        cdf += pmf;
        k += 1;
    }
    k
}

fn multinomial<R: Rng + ?Sized>(n: u64, p: &[f64], rng: &mut R) -> Vec<u64> {
    let mut rest_mass: f64 = p.iter().sum();
    let mut rest = n;
    let mut c = vec![0u64; p.len()];
    for (i, &pi) in p.iter().enumerate() {
        if rest == 0 {
            break;
        }
        if pi <= 0.0 {
            continue;
        }
        let share = (pi / rest_mass).clamp(0.0, 1.0);
        let k = if share >= 1.0 {
            rest
        } else {
            Binomial::new(rest, share).expect("probability in [0, 1]").sample(rng)
        };
        c[i] = k;
        rest -= k;
        rest_mass -= pi;
    }
    c
}

fn check_x(x: &[f64]) -> Result<()> {
    // Dataset::new validates normalization
    if x.is_empty() {
        return Err(Error::InvalidInput("empty domain".into()));
    }
    Ok(())
}

/// One dataset from the model, replicate 0.
pub fn simulate_model(x: &[f64], params: &ModelParams, order: GenOrder, seed: u64) -> Result<Dataset> {
    simulate_replicate(x, params, order, seed, 0)
}

pub fn simulate_replicate(
    x: &[f64],
    params: &ModelParams,
    order: GenOrder,
    seed: u64,
    replicate: u64,
) -> Result<Dataset> {
    params.validate()?;
    check_x(x)?;
    let ModelParams { alpha, b, lambda } = *params;
    let d = x.len();
    let mut p = vec![0.0; d];
    let mut c = vec![0u64; d];
    match order {
        GenOrder::PThenC => {
            for i in 0..d {
                let a = alpha * x[i];
                if a <= 0.0 {
                    continue;
                }
                let mut rng = stream(seed, replicate, i as u64 + 1);
                p[i] = (ln_gamma_variate(a, &mut rng) - b.ln()).exp();
                c[i] = poisson(lambda * p[i], &mut rng);
            }
        }
        GenOrder::ZDirichletThenC => {
            let mut shared = stream(seed, replicate, 0);
            let ln_z = ln_gamma_variate(alpha, &mut shared) - b.ln();
            let ln_g: Vec<f64> = (0..d)
                .map(|i| {
                    let a = alpha * x[i];
                    if a <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        ln_gamma_variate(a, &mut stream(seed, replicate, i as u64 + 1))
                    }
                })
                .collect();
            let ln_total = log_sum_exp(&ln_g);
            for i in 0..d {
                p[i] = (ln_z + ln_g[i] - ln_total).exp();
            }
            let n = poisson(lambda * ln_z.exp(), &mut shared);
            c = multinomial(n, &p, &mut shared);
        }
        GenOrder::CThenP => {
            let q = lambda / (b + lambda);
            for i in 0..d {
                let a = alpha * x[i];
                if a <= 0.0 {
                    continue;
                }
                let mut rng = stream(seed, replicate, i as u64 + 1);
                c[i] = neg_binomial(a, q, &mut rng);
                p[i] = (ln_gamma_variate(a + c[i] as f64, &mut rng) - (b + lambda).ln()).exp();
            }
        }
    }
    // a point whose mass underflowed cannot have been sampled
    for i in 0..d {
        if p[i] == 0.0 {
            c[i] = 0;
        }
    }
    Dataset::new(x.to_vec(), p, c)
}

/// Counts over explicit masses `p` with base measure `x`.
pub fn simulate_explicit(x: &[f64], p: &[f64], protocol: Protocol, seed: u64, replicate: u64) -> Result<Dataset> {
    if x.len() != p.len() {
        return Err(Error::InvalidInput("x and p must align".into()));
    }
    let z: f64 = p.iter().sum();
    if !(z > 0.0 && z.is_finite()) || p.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput("p must be nonnegative with a positive finite total".into()));
    }
    let c = match protocol {
        Protocol::FixedN(n) => multinomial(n, p, &mut stream(seed, replicate, 0)),
        Protocol::Poisson(lambda) => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidInput(format!("rate {lambda} must be positive")));
            }
            (0..p.len())
                .map(|i| poisson(lambda * p[i], &mut stream(seed, replicate, i as u64 + 1)))
                .collect()
        }
    };
    Dataset::new(x.to_vec(), p.to_vec(), c)
}

/// log L0: product over the domain of Gamma(αx, b) densities for p and
/// Poisson(λp) probabilities for c. Points with x = 0 carry p = c = 0 and
/// contribute nothing.
pub fn log_joint_density(data: &Dataset, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let ModelParams { alpha, b, lambda } = *params;
    let mut total = 0.0;
    for i in 0..data.len() {
        let (a, p, c) = (alpha * data.x[i], data.p[i], data.c[i] as f64);
        if a == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += a * b.ln() - ln_gamma(a) + (a - 1.0) * p.ln() - b * p;
        total += c * (lambda * p).ln() - lambda * p - ln_gamma(c + 1.0);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{integrate_semi_infinite, SolverConfig};

    fn uniform(d: usize) -> Vec<f64> {
        vec![1.0 / d as f64; d]
    }

    #[test]
    fn streams_are_keyed() {
        let a: u64 = stream(1, 0, 3).random();
        let b: u64 = stream(1, 0, 3).random();
        let c: u64 = stream(1, 1, 3).random();
        let d: u64 = stream(1, 0, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn deterministic_per_seed() {
        let params = ModelParams::new(2.0, 1.0, 5.0).unwrap();
        for order in [GenOrder::PThenC, GenOrder::ZDirichletThenC, GenOrder::CThenP] {
            let a = simulate_model(&uniform(10), &params, order, 7).unwrap();
            let b = simulate_model(&uniform(10), &params, order, 7).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tiny_shapes_stay_positive() {
        let mut rng = stream(3, 0, 1);
        for _ in 0..1000 {
            let l = ln_gamma_variate(1e-3, &mut rng);
            assert!(l.is_finite());
        }
    }

    #[test]
    fn tiny_shape_log_mean() {
        // E(log G) = ψ(a)
        let a = 0.05;
        let mut rng = stream(11, 0, 1);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| ln_gamma_variate(a, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - crate::special::psi(a)).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn fixed_n_total_and_single_point() {
        let d = simulate_explicit(&uniform(4), &[1.0, 2.0, 3.0, 4.0], Protocol::FixedN(25), 1, 0).unwrap();
        assert_eq!(d.c.iter().sum::<u64>(), 25);
        let one = simulate_explicit(&[1.0], &[0.3], Protocol::FixedN(5), 1, 0).unwrap();
        assert_eq!(one.c, vec![5]);
    }

    #[test]
    fn neg_binomial_mean() {
        let (a, q) = (0.4, 0.8);
        let mut rng = stream(5, 0, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| neg_binomial(a, q, &mut rng) as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let expect = a * q / (1.0 - q);
        assert!((mean - expect).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn joint_density_factorizes() {
        let params = ModelParams::new(1.5, 2.0, 3.0).unwrap();
        let d = Dataset::new(vec![0.25, 0.75], vec![0.4, 1.1], vec![2, 0]).unwrap();
        let one = |x: f64, p: f64, c: u64| {
            // a single point with base measure 1 and shape αx
            let params = ModelParams::new(1.5 * x, 2.0, 3.0).unwrap();
            log_joint_density(&Dataset::new(vec![1.0], vec![p], vec![c]).unwrap(), &params).unwrap()
        };
        let whole = log_joint_density(&d, &params).unwrap();
        assert!((whole - one(0.25, 0.4, 2) - one(0.75, 1.1, 0)).abs() < 1e-13);
        let zero_mass = Dataset::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![0, 1]).unwrap();
        assert_eq!(log_joint_density(&zero_mass, &params).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn marginal_over_p_is_negative_binomial() {
        let (alpha, b, lambda) = (1.7, 0.8, 2.5);
        let params = ModelParams::new(alpha, b, lambda).unwrap();
        let q = lambda / (b + lambda);
        for c in [0u64, 1, 4] {
            let log_f = |p: f64| {
                let d = Dataset::new(vec![1.0], vec![p], vec![c]).unwrap();
                log_joint_density(&d, &params).unwrap()
            };
            let lhs = integrate_semi_infinite(log_f, 1.0, &SolverConfig::default()).unwrap();
            let cf = c as f64;
            let rhs = ln_gamma(alpha + cf) - ln_gamma(alpha) - ln_gamma(cf + 1.0) + alpha * (1.0 - q).ln() + cf * q.ln();
            assert!((lhs - rhs).abs() < 1e-9, "c = {c}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn concentrates_for_large_rate() {
        // b → ∞ at fixed α/b
        let params = ModelParams::new(2e6, 1e6, 1.0).unwrap();
        let d = simulate_model(&uniform(5), &params, GenOrder::PThenC, 2).unwrap();
        assert!((d.total_mass() - 2.0).abs() < 1e-2);
    }
}
