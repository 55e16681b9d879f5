//! Oracle suites: each check compares a fast routine against an
//! independent reference (enumeration, quadrature, closed form or
//! simulation) and reports pass or fail with a one-line detail.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{good_turing_rb, ipw, mixture_estimate, rb_exact, Inclusion, MixtureInput};
use crate::inference::{infer, InferenceConfig, InferenceMethod, SingularCase};
use crate::likelihoods::{Likelihood, LikelihoodModel, ModelParams};
use crate::moments::{match_c, Verdict};
use crate::oracle::{egf_f_n, enumerate_truncated_multinomial, inclusion_exclusion_f_n};
use crate::sample::{kl_delta, Entry, Observation};
use crate::simulate::{
    expected_values, ln_gamma_variate, poisson, simulate_explicit, simulate_replicate, stream, toy_physics,
    Conditioning, GenOrder, Protocol, ToySpec,
};
use crate::solvers::{integrate_semi_infinite, SolverConfig};
use crate::special::gamma_q;
use crate::distribution::{DistKind, MassDistribution};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    /// Replicate counts cut tenfold; tolerances unchanged.
    Quick,
    #[default]
    Full,
}

impl Level {
    fn draws(self, full: usize) -> usize {
        match self {
            Level::Quick => full / 10,
            Level::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub const CHECKS: [(u32, &str); 12] = [
    (1, "rb-exactness"),
    (2, "generating-function"),
    (3, "beta-identity"),
    (4, "concavity"),
    (5, "asymptotic-slopes"),
    (6, "ipw-unbiased"),
    (7, "mixed-closed-form"),
    (8, "singular-cases"),
    (9, "generative-equivalence"),
    (10, "expectations"),
    (11, "calibration"),
    (12, "toy-physics"),
];

const SEED: u64 = 0x5eed;

/// Runs one check; an internal error becomes a failure with its message.
pub fn run_check(id: u32, level: Level) -> Check {
    let name = CHECKS
        .iter()
        .find(|(k, _)| *k == id)
        .map(|(_, n)| n.to_string())
        .unwrap_or_else(|| format!("unknown-{id}"));
    let start = Instant::now();
    let outcome = match id {
        1 => rb_exactness(),
        2 => generating_function(),
        3 => beta_identity(),
        4 => concavity(),
        5 => asymptotic_slopes(),
        6 => ipw_unbiased(level),
        7 => mixed_closed_form(),
        8 => singular_cases(),
        9 => generative_equivalence(level),
        10 => expectations(level),
        11 => calibration(level),
        12 => toy_physics_truth(level),
        _ => Err(Error::InvalidInput(format!("no check {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (passed, detail) = match outcome {
        Ok((passed, detail)) => (passed, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    // runtime budgets
    let budget = match id {
        1 => Some(5.0),
        6 => Some(30.0),
        11 => Some(300.0),
        _ => None,
    };
    let (passed, detail) = match budget {
        Some(b) if seconds > b && level == Level::Full => (false, format!("{detail}; took {seconds:.1}s > {b}s")),
        _ => (passed, detail),
    };
    Check {
        id,
        name,
        passed,
        detail,
        seconds,
    }
}

pub fn run_all(level: Level) -> Vec<Check> {
    CHECKS.iter().map(|&(id, _)| run_check(id, level)).collect()
}

type Outcome = Result<(bool, String)>;

fn uniform_x(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

fn observation(x: Vec<f64>, entries: &[(usize, f64, u64)]) -> Result<Observation> {
    let es = entries.iter().map(|&(i, p, c)| Entry { i, p, c }).collect();
    Observation::new(x.len(), x, es)
}

/// A random observation with Δ_S > 0 and Y > 0.
fn random_observation(rng: &mut ChaCha8Rng) -> Result<Observation> {
    let d = rng.random_range(4..=10);
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let m = rng.random_range(2..d);
    let mut idx: Vec<usize> = (0..d).collect();
    idx.shuffle(rng);
    let mut entries: Vec<(usize, f64, u64)> = idx[..m]
        .iter()
        .map(|&i| (i, x[i] * rng.random_range(-1.5f64..1.5).exp() * 3.0, rng.random_range(1..=6)))
        .collect();
    entries.sort_by_key(|e| e.0);
    observation(x, &entries)
}

fn rb_exactness() -> Outcome {
    let mut rng = stream(SEED, 1, 0);
    let (mut worst_f, mut worst_v) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let m = rng.random_range(1..=4usize);
        let n = rng.random_range(m as u64..=8);
        let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..3.0)).collect();
        let mut c = vec![1u64; m];
        for _ in 0..n - m as u64 {
            c[rng.random_range(0..m)] += 1;
        }
        let entries: Vec<(usize, f64, u64)> = (0..m).map(|i| (i, p[i], c[i])).collect();
        let obs = observation(uniform_x(m + 1), &entries)?;
        let w = rb_exact(&obs)?;
        let (log_f, v) = enumerate_truncated_multinomial(&p, n);
        worst_f = worst_f.max((w.log_f_n.unwrap_or(f64::NAN) - log_f).abs());
        for (a, b) in w.v.iter().zip(&v) {
            worst_v = worst_v.max((a - b).abs() / b);
        }
    }
    Ok((
        worst_f <= 1e-10 && worst_v <= 1e-10,
        format!("max |Δ log F_N| = {worst_f:.2e}, max rel Δv = {worst_v:.2e} over 100 draws"),
    ))
}

fn generating_function() -> Outcome {
    let mut rng = stream(SEED, 2, 0);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for m in 1..=3usize {
        for n in m as u64..=6 {
            for _ in 0..5 {
                let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..3.0)).collect();
                let exact = enumerate_truncated_multinomial(&p, n).0.exp();
                let egf = egf_f_n(&p, n);
                let ie = inclusion_exclusion_f_n(&p, n);
                worst = worst.max((egf / exact - 1.0).abs()).max((ie / exact - 1.0).abs());
                cases += 1;
            }
        }
    }
    Ok((worst <= 1e-12, format!("max rel error {worst:.2e} over {cases} cases")))
}

fn beta_identity() -> Outcome {
    let mut rng = stream(SEED, 3, 0);
    let cfg = SolverConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let model = LikelihoodModel::new(&random_observation(&mut rng)?)?;
        let alpha = 10f64.powf(rng.random_range(-1.0..2.0));
        let v = model.stats.v;
        let q4 = integrate_semi_infinite(|w| model.log_l4(w, alpha).unwrap_or(f64::NAN), v, &cfg)?;
        let q8 = integrate_semi_infinite(|w| model.log_l8(w, alpha).unwrap_or(f64::NAN), v, &cfg)?;
        // differences of logs are relative errors of the likelihoods
        worst = worst
            .max((q4 - model.log_l5(alpha)?).abs())
            .max((q8 - model.log_l9(alpha)?).abs());
    }
    Ok((worst <= 1e-7, format!("max rel error {worst:.2e} over 20 (obs, alpha) pairs")))
}

fn concavity() -> Outcome {
    let mut rng = stream(SEED, 4, 0);
    let which_all = [Likelihood::L4, Likelihood::L5, Likelihood::L8, Likelihood::L9];
    let mut worst = [f64::NEG_INFINITY; 4];
    for _ in 0..20 {
        let model = LikelihoodModel::new(&random_observation(&mut rng)?)?;
        let v = model.stats.v;
        for k in 0..50 {
            let alpha = 10f64.powf(-3.0 + 7.0 * k as f64 / 49.0);
            for (slot, &which) in which_all.iter().enumerate() {
                let ws: &[Option<f64>] = if which.has_w() {
                    &[Some(0.1 * v), Some(v), Some(10.0 * v)]
                } else {
                    &[None]
                };
                for &w in ws {
                    worst[slot] = worst[slot].max(model.d2log_dalpha2(which, w, alpha)?);
                }
            }
        }
    }
    // X → 0 with few sampled points: the L11 curvature turns positive
    let tiny = 1e-9;
    let x = vec![tiny, tiny, 1.0 - 2.0 * tiny];
    let l11 = LikelihoodModel::new(&observation(x, &[(0, 0.3, 6), (1, 0.8, 4)])?)?;
    let positive = l11.d2log_dalpha2(Likelihood::L11, None, 100.0)?;
    let listed: Vec<String> = which_all
        .iter()
        .zip(&worst)
        .map(|(w, d)| format!("{w:?} {d:.2e}"))
        .collect();
    Ok((
        worst.iter().all(|d| *d <= 1e-12) && positive > 0.0,
        format!("max second derivative: {}; L11 at X -> 0: {positive:.2e}", listed.join(", ")),
    ))
}

fn asymptotic_slopes() -> Outcome {
    let mut rng = stream(SEED, 5, 0);
    let alpha = 1e4;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let model = LikelihoodModel::new(&random_observation(&mut rng)?)?;
        let s = &model.stats;
        let bound = 10.0 * s.m as f64 / alpha;
        let e5 = (model.dlog_dalpha(Likelihood::L5, None, alpha)? + s.delta_s).abs();
        worst = worst.max(e5 / bound);
        for w in [0.1 * s.v, s.v, 10.0 * s.v] {
            let e4 = (model.dlog_dalpha(Likelihood::L4, Some(w), alpha)? + kl_delta(s, w)?).abs();
            worst = worst.max(e4 / bound);
        }
    }
    Ok((worst <= 1.0, format!("max |slope + Delta| / (10M/alpha) = {worst:.3} at alpha = 1e4")))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ipw_unbiased(level: Level) -> Outcome {
    let d = 20;
    let mut rng = stream(SEED, 6, 0);
    let p: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
    let z: f64 = p.iter().sum();
    let n = 30;
    let x = uniform_x(d);
    let reps = level.draws(100_000);
    let est: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let data = simulate_explicit(&x, &p, Protocol::FixedN(n), SEED, r).expect("valid masses");
            (0..d)
                .filter(|&i| data.c[i] > 0)
                .map(|i| p[i] / Inclusion::FixedN.pi(p[i], z, n))
                .sum::<f64>()
        })
        .collect();
    let (mean, se) = mean_and_se(&est);
    let k = (mean - z).abs() / se;
    Ok((k <= 4.0, format!("mean {mean:.6} vs Z {z:.6}: {k:.2} SE over {reps} samples")))
}

fn mixed_closed_form() -> Outcome {
    let mut rng = stream(SEED, 7, 0);
    let cfg = SolverConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let alpha = 10f64.powf(rng.random_range(-1.0..1.7));
        let x = rng.random_range(0.05..0.95);
        let n = rng.random_range(2..50u64) as f64;
        let (a, b) = (alpha * (1.0 - x), alpha * x + n);
        // Beta-prime kernel for W/V; W/Z = t/(1 + t)
        let kernel = |t: f64| (a - 1.0) * t.ln() - (a + b) * t.ln_1p();
        let norm = integrate_semi_infinite(kernel, a / b, &cfg)?;
        let m_wv = (integrate_semi_infinite(|t| kernel(t) + t.ln(), a / b, &cfg)? - norm).exp();
        let m_wz = (integrate_semi_infinite(|t| kernel(t) + t.ln() - t.ln_1p(), a / b, &cfg)? - norm).exp();
        let want_wv = alpha * (1.0 - x) / (alpha * x + n - 1.0);
        let want_wz = alpha * (1.0 - x) / (alpha + n);
        let laws = (
            MassDistribution::beta_prime(a, b, 1.0)?.mean(),
            MassDistribution::beta(a, b)?.mean(),
        );
        for (got, want) in [(m_wv, want_wv), (m_wz, want_wz), (laws.0, want_wv), (laws.1, want_wz)] {
            worst = worst.max((got / want - 1.0).abs());
        }
    }
    Ok((worst <= 1e-8, format!("max rel error {worst:.2e} over 20 (alpha, X, N)")))
}

fn singular_cases() -> Outcome {
    let cfg = InferenceConfig::default();
    let mut failures = Vec::new();
    // p|S = 2 x|S
    let flat = observation(vec![0.2, 0.3, 0.5], &[(0, 0.4, 3), (1, 0.6, 2)])?;
    let model = LikelihoodModel::new(&flat)?;
    let expect = model.stats.y * model.stats.mass_ratio();
    for method in [InferenceMethod::Bayes, InferenceMethod::Profile, InferenceMethod::Mixed] {
        let r = infer(&model, method, &cfg)?;
        let ok = r.singular_case == Some(SingularCase::DeltaSZero)
            && matches!(r.w_dist.kind, DistKind::PointMass { value } if value == expect);
        if !ok {
            failures.push(format!("{method:?} on Delta_S = 0"));
        }
    }
    // every point seen once
    let singles = observation(uniform_x(4), &[(0, 0.3, 1), (2, 0.9, 1)])?;
    let solver = SolverConfig::default();
    for inclusion in [Inclusion::Poisson, Inclusion::FixedN] {
        if !ipw(&singles, inclusion, &solver)?.value.is_infinite() {
            failures.push(format!("ipw {inclusion:?} on M = N"));
        }
    }
    if !good_turing_rb(&singles, &solver)?.z.is_infinite() {
        failures.push("good_turing_rb on M = N".into());
    }
    let c = match_c(&singles, &solver)?;
    if c.params.lambda != 0.0 || c.verdict != Verdict::LambdaZero {
        failures.push("strategy C on M = N".into());
    }
    Ok(if failures.is_empty() {
        (true, format!("point mass at W = {expect} from all three methods; M = N flagged by all four routes"))
    } else {
        (false, format!("failed: {}", failures.join(", ")))
    })
}

/// Chi-square homogeneity test over categorical samples; cells whose total
/// count would give expected counts below 5 are pooled.
fn homogeneity_p_value(samples: &[Vec<u64>]) -> (f64, usize) {
    use std::collections::BTreeMap;
    let k = samples.len() as f64;
    let mut table: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (j, s) in samples.iter().enumerate() {
        for &cell in s {
            table.entry(cell).or_insert_with(|| vec![0.0; samples.len()])[j] += 1.0;
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut pooled = vec![0.0; samples.len()];
    for counts in table.into_values() {
        if counts.iter().sum::<f64>() < 5.0 * k {
            for (p, c) in pooled.iter_mut().zip(&counts) {
                *p += c;
            }
        } else {
            rows.push(counts);
        }
    }
    if pooled.iter().sum::<f64>() > 0.0 {
        rows.push(pooled);
    }
    let totals: Vec<f64> = (0..samples.len()).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    let grand: f64 = totals.iter().sum();
    let mut chi2 = 0.0;
    for r in &rows {
        let row_total: f64 = r.iter().sum();
        for (j, &o) in r.iter().enumerate() {
            let e = row_total * totals[j] / grand;
            chi2 += (o - e).powi(2) / e;
        }
    }
    let df = (rows.len() - 1) * (samples.len() - 1);
    (gamma_q(df as f64 / 2.0, chi2 / 2.0), rows.len())
}

fn generative_equivalence(level: Level) -> Outcome {
    let x = uniform_x(3);
    let params = ModelParams::new(1.5, 1.0, 2.0)?;
    let reps = level.draws(100_000);
    let samples: Vec<Vec<u64>> = [GenOrder::PThenC, GenOrder::ZDirichletThenC, GenOrder::CThenP]
        .iter()
        .enumerate()
        .map(|(k, &order)| {
            (0..reps as u64)
                .into_par_iter()
                .map(|r| {
                    let d = simulate_replicate(&x, &params, order, SEED + 9 + k as u64, r).expect("valid params");
                    let obs = d.observe();
                    let m = obs.m() as u64;
                    let n = obs.n().min(60);
                    let v = (10.0 * obs.v()).round().min(200.0) as u64;
                    (m * 64 + n) * 256 + v
                })
                .collect()
        })
        .collect();
    let (p, cells) = homogeneity_p_value(&samples);
    Ok((p > 1e-3, format!("chi-square p = {p:.4} over {cells} cells, {reps} draws per order")))
}

/// One point's (p, c) drawn from the model conditioned on c ≥ 1 or c = 0.
fn conditioned_point(a: f64, params: &ModelParams, sampled: bool, rng: &mut ChaCha8Rng) -> (f64, u64) {
    loop {
        let p = (ln_gamma_variate(a, rng) - params.b.ln()).exp();
        let c = poisson(params.lambda * p, rng);
        if (c > 0) == sampled {
            return (p, c);
        }
    }
}

fn expectations(level: Level) -> Outcome {
    let x = vec![0.1, 0.2, 0.3, 0.4];
    let params = ModelParams::new(3.0, 2.0, 4.0)?;
    let reps = level.draws(100_000);
    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    let mut compare = |tag: &str, name: &str, draws: &[f64], want: f64| {
        let (mean, se) = mean_and_se(draws);
        let k = if se > 0.0 { (mean - want).abs() / se } else { (mean - want).abs() * f64::INFINITY };
        if k > worst || worst_name.is_empty() {
            worst = worst.max(k);
            worst_name = format!("{tag} E({name})");
        }
    };

    // before sampling
    let prior = expected_values(&x, &params, Conditioning::Prior)?;
    let stats: Vec<[f64; 8]> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let d = simulate_replicate(&x, &params, GenOrder::PThenC, SEED + 10, r).expect("valid params");
            let mut s = [0.0; 8];
            for ((&xi, &pi), &ci) in x.iter().zip(&d.p).zip(&d.c) {
                if ci > 0 {
                    s[0] += 1.0;
                    s[2] += xi * pi.ln();
                    s[3] += pi;
                    s[5] += xi;
                } else {
                    s[4] += pi;
                    s[6] += xi;
                }
                s[1] += ci as f64;
                s[7] += pi;
            }
            s
        })
        .collect();
    for (k, name) in ["M", "N", "U", "V", "W", "X", "Y", "Z"].iter().enumerate() {
        let col: Vec<f64> = stats.iter().map(|s| s[k]).collect();
        compare("prior", name, &col, prior[*name]);
    }

    // given S
    let s_set = [1usize, 3];
    let given_s = expected_values(&x, &params, Conditioning::GivenS(&s_set))?;
    let stats: Vec<[f64; 5]> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut s = [0.0; 5];
            for (i, &xi) in x.iter().enumerate() {
                let mut rng = stream(SEED + 11, r, i as u64 + 1);
                let sampled = s_set.contains(&i);
                let (p, c) = conditioned_point(params.alpha * xi, &params, sampled, &mut rng);
                if sampled {
                    s[0] += c as f64;
                    s[1] += xi * p.ln();
                    s[2] += p;
                } else {
                    s[3] += p;
                }
                s[4] += p;
            }
            s
        })
        .collect();
    for (k, name) in ["N", "U", "V", "W", "Z"].iter().enumerate() {
        let col: Vec<f64> = stats.iter().map(|s| s[k]).collect();
        compare("given S", name, &col, given_s[*name]);
    }

    // given S and p|S
    let p_s = [0.5, 1.2];
    let given_sp = expected_values(&x, &params, Conditioning::GivenSp { s: &s_set, p: &p_s })?;
    let n_draws: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(SEED + 12, r, 0);
            p_s.iter()
                .map(|&p| loop {
                    let c = poisson(params.lambda * p, &mut rng);
                    if c > 0 {
                        break c as f64;
                    }
                })
                .sum()
        })
        .collect();
    compare("given S, p", "N", &n_draws, given_sp["N"]);

    Ok((
        worst <= 4.0,
        format!("14 formulas; worst {worst_name} at {worst:.2} SE over {reps} draws"),
    ))
}

fn calibration(level: Level) -> Outcome {
    let d = 50;
    let x = uniform_x(d);
    let params = ModelParams::new(2.0, 1.0, 5.0)?;
    let reps = level.draws(500).max(50);
    let cfg = InferenceConfig::default();
    // (covered, empty sample, singular, failed)
    let outcomes: Vec<(bool, bool, bool, bool)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let data = simulate_replicate(&x, &params, GenOrder::PThenC, SEED + 11, r).expect("valid params");
            let w = data.missing_mass();
            let obs = data.observe();
            if obs.m() == 0 {
                return (false, true, false, false);
            }
            let report = LikelihoodModel::new(&obs).and_then(|m| infer(&m, InferenceMethod::Mixed, &cfg));
            match report {
                Ok(rep) => {
                    let lo = rep.w_dist.quantile(0.05);
                    let hi = rep.w_dist.quantile(0.95);
                    (lo <= w && w <= hi, false, rep.singular_case.is_some(), false)
                }
                Err(_) => (false, false, false, true),
            }
        })
        .collect();
    let empty = outcomes.iter().filter(|o| o.1).count();
    let singular = outcomes.iter().filter(|o| o.2).count();
    let failed = outcomes.iter().filter(|o| o.3).count();
    let scored = reps - empty;
    let covered = outcomes.iter().filter(|o| o.0).count();
    let rate = covered as f64 / scored as f64;
    Ok((
        (0.80..=0.98).contains(&rate),
        format!(
            "coverage {rate:.3} ({covered}/{scored}); {empty} empty samples skipped, {singular} singular (point mass), {failed} without an estimate"
        ),
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn toy_physics_truth(level: Level) -> Outcome {
    let spec = ToySpec {
        spins: 12,
        temperatures: vec![f64::INFINITY, 2.0, 0.8],
        coupling: 1.0,
        field: 0.5,
        weights: None,
    };
    let toy = toy_physics(&spec, SEED)?;
    let n_target = 4.0 * toy.n_effective();
    let rate = n_target / toy.z;
    let reps = level.draws(200).max(40);
    let solver = SolverConfig::default();
    let mut details = Vec::new();
    let mut passed = true;
    for gamma in [0.0, 0.5, 1.0] {
        let estimates: Vec<f64> = (0..reps as u64)
            .into_par_iter()
            .map(|r| -> Result<f64> {
                let obs = toy.sample(Protocol::Poisson(rate), SEED + 12, r)?.observe();
                let rows: Vec<Vec<f64>> = obs.entries.iter().map(|e| toy.r[e.i].clone()).collect();
                // the infinite-temperature component has r = 1 and known total
                let h: Vec<f64> = obs.entries.iter().map(|e| toy.r[e.i][0]).collect();
                let input = MixtureInput {
                    r: &rows,
                    w: &toy.w,
                    gamma,
                    h: Some(&h),
                    total_h: Some(toy.r_totals[0]),
                    inclusion: Inclusion::Poisson,
                    weights: None,
                };
                Ok(mixture_estimate(&obs, &input, &solver)?.z.value)
            })
            .collect::<Result<_>>()?;
        let med = median(estimates);
        let err = med / toy.z - 1.0;
        passed &= err.abs() <= 0.10;
        details.push(format!("gamma {gamma}: {err:+.3}"));
    }
    Ok((
        passed,
        format!(
            "median relative error of Z ({}) over {reps} replicates, Z = {:.1}, N ~ {:.0}",
            details.join(", "),
            toy.z,
            n_target
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_identical_samples() {
        let a: Vec<u64> = (0..1000).map(|k| k % 7).collect();
        let (p, cells) = homogeneity_p_value(&[a.clone(), a]);
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(cells, 7);
    }

    #[test]
    fn chi_square_detects_shift() {
        let a: Vec<u64> = (0..1000).map(|k| k % 5).collect();
        let b: Vec<u64> = (0..1000).map(|k| (k % 5).min(3)).collect();
        assert!(homogeneity_p_value(&[a, b]).0 < 1e-6);
    }

    #[test]
    fn unknown_check_fails() {
        assert!(!run_check(99, Level::Quick).passed);
    }
}
