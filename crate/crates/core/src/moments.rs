//! Point estimates of (α, b, λ) by maximum likelihood on L3 and by three
//! moment-matching schemes, each giving a Gamma(αY, b + λ) law for W.
//!
//! The moment-matching schemes are experimental: their equations can have
//! several roots or none on awkward data.

use serde::Serialize;

use crate::distribution::MassDistribution;
use crate::error::{Error, Result};
use crate::estimators::rb_poisson_lambda;
use crate::inference::{mle_alpha, Base};
use crate::likelihoods::{Likelihood, LikelihoodModel, ModelParams};
use crate::sample::Observation;
use crate::simulate::{e_c_given_p, Point};
use crate::solvers::{integrate_semi_infinite, maximize_by_slope, solve_root, SlopeMax, SolverConfig, LOG_ARG_MAX, LOG_ARG_MIN};
use crate::special::{ln_gamma, psi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    A,
    B,
    C,
    #[serde(rename = "MLE")]
    Mle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Verdict {
    Solved,
    /// The optimum or root sits at the edge of the α search range.
    Boundary(String),
    /// M = N forces λ → 0 in strategy C; α and b solve the λ → 0 limits.
    LambdaZero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentMatchResult {
    pub strategy: Strategy,
    pub params: ModelParams,
    /// Relative residuals of the matched equations (scaled gradient of
    /// log L3 for MLE).
    pub residuals: Vec<f64>,
    /// Every α root or local maximum found.
    pub candidates: Vec<f64>,
    pub verdict: Verdict,
}

impl MomentMatchResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Gamma(αY, b + λ); a point mass at 0 when Y = 0.
    pub fn w_law(&self, y: f64) -> Result<MassDistribution> {
        let ModelParams { alpha, b, lambda } = self.params;
        if y <= 1e-14 {
            return Ok(MassDistribution::point(0.0));
        }
        MassDistribution::gamma(alpha * y, b + lambda)
    }

    /// E(W/(V + W)) under the W law.
    pub fn w_over_z_mean(&self, v: f64, y: f64, cfg: &SolverConfig) -> Result<f64> {
        let ModelParams { alpha, b, lambda } = self.params;
        if y <= 1e-14 {
            return Ok(0.0);
        }
        let (shape, rate) = (alpha * y, b + lambda);
        if shape > CONCENTRATED_SHAPE {
            // second order in the spread; the next term is O(1/shape²)
            let (mu, var) = (shape / rate, shape / (rate * rate));
            return Ok(mu / (v + mu) - v * var / (v + mu).powi(3));
        }
        let log_f = |w: f64| (shape - 1.0) * w.ln() - rate * w + (w / (v + w)).ln();
        let log_norm = ln_gamma(shape) - shape * rate.ln();
        Ok((integrate_semi_infinite(log_f, shape / rate, cfg)? - log_norm).exp())
    }
}

/// Gamma shape above which the W law is treated by a moment expansion.
const CONCENTRATED_SHAPE: f64 = 1e8;

/// Starting points for the MLE search, log10 α.
const MLE_STARTS: std::ops::RangeInclusive<i32> = -4..=6;
/// Scan resolution for roots of the α equations.
const SCAN_PER_DECADE: f64 = 8.0;

fn tight(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        rel_tol: cfg.rel_tol.min(1e-14),
        max_iter: cfg.max_iter.max(400),
        ..*cfg
    }
}

fn rel(pred: f64, obs: f64) -> f64 {
    (pred - obs) / obs.abs().max(1.0)
}

/// Maximizes log L11 over α from several starts and takes the best local
/// maximum; b and λ then follow in closed form.
pub fn mle_full(obs: &Observation, cfg: &SolverConfig) -> Result<MomentMatchResult> {
    let model = LikelihoodModel::new(obs)?;
    if model.stats.delta_s_zero {
        // log L11 then grows like a multiple of log α
        return mle_result(
            &model,
            LOG_ARG_MAX.exp(),
            Vec::new(),
            Verdict::Boundary("log L11 increases toward alpha -> infinity (Delta_S = 0)".into()),
        );
    }
    let slope = |t: f64| {
        let a = t.exp();
        a * model.dlog_dalpha(Likelihood::L11, None, a).unwrap_or(f64::NAN)
    };
    let mut candidates: Vec<f64> = Vec::new();
    let mut edge = None;
    for k in MLE_STARTS {
        let t0 = k as f64 * std::f64::consts::LN_10;
        match maximize_by_slope(slope, t0, cfg)? {
            SlopeMax::Finite(t) => {
                let a = t.exp();
                if !candidates.iter().any(|c| (c / a - 1.0).abs() < 1e-8) {
                    candidates.push(a);
                }
            }
            SlopeMax::AtInfinity => edge = Some(LOG_ARG_MAX),
            SlopeMax::AtLowerBound(t) => edge = edge.or(Some(t)),
        }
    }
    let best = candidates
        .iter()
        .copied()
        .map(|a| (a, model.log_l11(a).unwrap_or(f64::NEG_INFINITY)))
        .max_by(|x, y| x.1.total_cmp(&y.1));
    let (alpha, verdict) = match best {
        Some((a, _)) => (a, Verdict::Solved),
        None => {
            let t = edge.unwrap_or(LOG_ARG_MAX);
            let side = if t >= LOG_ARG_MAX { "alpha -> infinity" } else { "alpha -> 0" };
            (t.exp(), Verdict::Boundary(format!("log L11 increases toward {side}")))
        }
    };
    mle_result(&model, alpha, candidates, verdict)
}

fn mle_result(model: &LikelihoodModel, alpha: f64, candidates: Vec<f64>, verdict: Verdict) -> Result<MomentMatchResult> {
    let (b, lambda) = model.stationary_rates(alpha);
    let s = &model.stats;
    let n = s.n as f64;
    let tail = alpha * s.y / (b + lambda);
    let residuals = vec![
        alpha * model.dlog_dalpha(Likelihood::L11, None, alpha)?,
        (alpha / b - s.v - tail) * b / alpha,
        (n / lambda - s.v - tail) * lambda / n,
    ];
    Ok(MomentMatchResult {
        strategy: Strategy::Mle,
        params: ModelParams { alpha, b, lambda },
        residuals,
        candidates,
        verdict,
    })
}

/// Roots of `f` on a log grid of α, refined by Brent.
fn scan_roots<F: Fn(f64) -> f64>(f: F, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let lo = LOG_ARG_MIN / std::f64::consts::LN_10;
    let hi = LOG_ARG_MAX / std::f64::consts::LN_10 / 2.0;
    let steps = ((hi - lo) * SCAN_PER_DECADE) as usize;
    let g = |t: f64| f(10f64.powf(t));
    let mut roots = Vec::new();
    let mut t_prev = lo;
    let mut g_prev = g(lo);
    for k in 1..=steps {
        let t = lo + (hi - lo) * k as f64 / steps as f64;
        let gt = g(t);
        if g_prev.is_finite() && gt.is_finite() {
            if g_prev == 0.0 {
                roots.push(10f64.powf(t_prev));
            } else if g_prev * gt < 0.0 {
                roots.push(10f64.powf(solve_root(g, (t_prev, t), &tight(cfg))?));
            }
        }
        t_prev = t;
        g_prev = gt;
    }
    Ok(roots)
}

fn pick_nearest(roots: &[f64], target: f64) -> Option<f64> {
    roots
        .iter()
        .copied()
        .min_by(|a, b| (a / target).ln().abs().total_cmp(&(b / target).ln().abs()))
}

/// α from the mixed treatment, used to choose among several roots.
fn reference_alpha(obs: &Observation, cfg: &SolverConfig) -> f64 {
    LikelihoodModel::new(obs)
        .and_then(|m| mle_alpha(&m, Base::L5, cfg))
        .map(|m| m.alpha)
        .ok()
        .filter(|a| a.is_finite() && *a > 0.0)
        .unwrap_or(1.0)
}

fn finish(
    strategy: Strategy,
    roots: Vec<f64>,
    obs: &Observation,
    cfg: &SolverConfig,
    params_at: &dyn Fn(f64) -> Option<(f64, f64)>,
    residuals_at: &dyn Fn(&ModelParams) -> Vec<f64>,
) -> Result<MomentMatchResult> {
    let valid: Vec<f64> = roots.into_iter().filter(|&a| params_at(a).is_some()).collect();
    let alpha = pick_nearest(&valid, reference_alpha(obs, cfg))
        .ok_or_else(|| Error::Degenerate(format!("strategy {strategy:?}: the U equation has no root in alpha")))?;
    let (b, lambda) = params_at(alpha).expect("filtered above");
    let params = ModelParams { alpha, b, lambda };
    Ok(MomentMatchResult {
        strategy,
        residuals: residuals_at(&params),
        params,
        candidates: valid,
        verdict: Verdict::Solved,
    })
}

/// Prior moments E(N), E(U), E(V) over the whole domain.
fn prior_nuv(x: &[f64], p: &ModelParams) -> (f64, f64, f64) {
    let (mut n, mut u, mut v) = (0.0, 0.0, 0.0);
    for &xi in x.iter().filter(|&&xi| xi > 0.0) {
        let pt = Point {
            a: p.alpha * xi,
            b: p.b,
            lambda: p.lambda,
        };
        n += pt.e_c();
        u += xi * pt.e_logp_pos();
        v += pt.e_p_pos();
    }
    (n, u, v)
}

/// Matches N, U, V to their expectations before sampling. λ/b = N/α and the
/// V equation give b in closed form; the U equation fixes α.
pub fn match_a(obs: &Observation, cfg: &SolverConfig) -> Result<MomentMatchResult> {
    let model = LikelihoodModel::new(obs)?;
    let s = &model.stats;
    let n = s.n as f64;
    let x = &obs.x;
    let rates = |alpha: f64| -> Option<(f64, f64)> {
        let l = (n / alpha).ln_1p();
        let tail: f64 = x.iter().map(|&xi| xi * (-(alpha * xi + 1.0) * l).exp()).sum();
        let b = alpha / s.v * (1.0 - tail);
        (b > 0.0 && b.is_finite()).then_some((b, n * b / alpha))
    };
    let u_eq = |alpha: f64| match rates(alpha) {
        Some((b, lambda)) => prior_nuv(x, &ModelParams { alpha, b, lambda }).1 - s.u,
        None => f64::NAN,
    };
    let roots = scan_roots(u_eq, cfg)?;
    finish(Strategy::A, roots, obs, cfg, &rates, &|p| {
        let (en, eu, ev) = prior_nuv(x, p);
        vec![rel(en, n), rel(eu, s.u), rel(ev, s.v)]
    })
}

/// Conditional moments E(N|S), E(U|S), E(V|S).
fn conditional_nuv(x_s: &[f64], p: &ModelParams) -> (f64, f64, f64) {
    let (mut n, mut u, mut v) = (0.0, 0.0, 0.0);
    for &xi in x_s {
        let pt = Point {
            a: p.alpha * xi,
            b: p.b,
            lambda: p.lambda,
        };
        n += pt.e_c_given_pos();
        u += xi * pt.e_logp_given_pos();
        v += pt.e_p_given_pos();
    }
    (n, u, v)
}

/// E(V|S) with b factored out: V = g(α, λ/b) / b.
fn v_times_b(x_s: &[f64], alpha: f64, r: f64) -> f64 {
    let l = r.ln_1p();
    x_s.iter()
        .map(|&xi| {
            let a = alpha * xi;
            if l == 0.0 {
                a + 1.0
            } else {
                a * (-(a + 1.0) * l).exp_m1() / (-a * l).exp_m1()
            }
        })
        .sum()
}

/// λ/b solving N = (λα/b) Σ_S x / (1 − (1 + λ/b)^{−αx}) at fixed α. The
/// right side increases from M at λ/b = 0.
fn ratio_for_n(x_s: &[f64], alpha: f64, n: f64, cfg: &SolverConfig) -> Option<f64> {
    let m = x_s.len() as f64;
    if n <= m {
        return None;
    }
    let g = |r: f64| -> f64 {
        let l = r.ln_1p();
        r * alpha * x_s.iter().map(|&xi| xi / -(-alpha * xi * l).exp_m1()).sum::<f64>() - n
    };
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 4.0;
        if hi > 1e300 {
            return None;
        }
    }
    let mut lo = hi;
    while g(lo) > 0.0 {
        lo *= 0.25;
        if lo < 1e-300 {
            return None;
        }
    }
    solve_root(g, (lo, hi), &tight(cfg)).ok()
}

/// Matches N, U, V to their expectations given S. For each α the N equation
/// fixes λ/b and the V equation then gives b; the U equation fixes α.
pub fn match_b(obs: &Observation, cfg: &SolverConfig) -> Result<MomentMatchResult> {
    let model = LikelihoodModel::new(obs)?;
    let s = &model.stats;
    let n = s.n as f64;
    let x_s: Vec<f64> = obs.entries.iter().map(|e| obs.x[e.i]).collect();
    if s.n as usize == s.m {
        return Err(Error::Degenerate("M = N: the N equation forces lambda/b = 0".into()));
    }
    let rates = |alpha: f64| -> Option<(f64, f64)> {
        let r = ratio_for_n(&x_s, alpha, n, cfg)?;
        let b = v_times_b(&x_s, alpha, r) / s.v;
        (b > 0.0 && b.is_finite()).then_some((b, r * b))
    };
    let u_eq = |alpha: f64| match rates(alpha) {
        Some((b, lambda)) => conditional_nuv(&x_s, &ModelParams { alpha, b, lambda }).1 - s.u,
        None => f64::NAN,
    };
    let roots = scan_roots(u_eq, cfg)?;
    finish(Strategy::B, roots, obs, cfg, &rates, &|p| {
        let (en, eu, ev) = conditional_nuv(&x_s, p);
        vec![rel(en, n), rel(eu, s.u), rel(ev, s.v)]
    })
}

/// E(U|S) allowing λ = 0, where ln(1+r)/((1+r)^a − 1) → 1/a.
fn conditional_u(x_s: &[f64], alpha: f64, b: f64, lambda: f64) -> f64 {
    x_s.iter()
        .map(|&xi| {
            let a = alpha * xi;
            let l = (lambda / b).ln_1p();
            let tail = if l == 0.0 { 1.0 / a } else { l / (a * l).exp_m1() };
            xi * (psi(a) - b.ln() + tail)
        })
        .sum()
}

/// λ from N = E(N | S, p|S); then (α, b) from the conditional U and V
/// equations with that λ. M = N gives λ = 0, reported as such.
pub fn match_c(obs: &Observation, cfg: &SolverConfig) -> Result<MomentMatchResult> {
    let model = LikelihoodModel::new(obs)?;
    let s = &model.stats;
    let n = s.n as f64;
    let x_s: Vec<f64> = obs.entries.iter().map(|e| obs.x[e.i]).collect();
    let lambda = rb_poisson_lambda(obs, cfg)?;
    // V equation in b at fixed α: b·V = g(α, λ/b), decreasing in b
    let b_for = |alpha: f64| -> Option<f64> {
        if lambda == 0.0 {
            return Some(v_times_b(&x_s, alpha, 0.0) / s.v);
        }
        let h = |t: f64| {
            let b = t.exp();
            (v_times_b(&x_s, alpha, lambda / b) / b / s.v).ln()
        };
        let mut lo = -1.0;
        while h(lo) < 0.0 {
            lo -= 4.0;
            if lo < -700.0 {
                return None;
            }
        }
        let mut hi = lo + 1.0;
        while h(hi) > 0.0 {
            hi += 4.0;
            if hi > 700.0 {
                return None;
            }
        }
        solve_root(h, (lo, hi), &tight(cfg)).ok().map(f64::exp)
    };
    let rates = |alpha: f64| b_for(alpha).filter(|b| *b > 0.0 && b.is_finite()).map(|b| (b, lambda));
    let u_eq = |alpha: f64| match b_for(alpha) {
        Some(b) => conditional_u(&x_s, alpha, b, lambda) - s.u,
        None => f64::NAN,
    };
    let roots = scan_roots(u_eq, cfg)?;
    let p_s: Vec<f64> = obs.masses();
    let mut result = finish(Strategy::C, roots, obs, cfg, &rates, &|p| {
        let en: f64 = p_s.iter().map(|&pi| e_c_given_p(p.lambda, pi)).sum();
        let eu = conditional_u(&x_s, p.alpha, p.b, p.lambda);
        let ev = v_times_b(&x_s, p.alpha, p.lambda / p.b) / p.b;
        vec![rel(en, n), rel(eu, s.u), rel(ev, s.v)]
    })?;
    if lambda == 0.0 {
        result.verdict = Verdict::LambdaZero;
    }
    Ok(result)
}

pub fn match_strategy(obs: &Observation, strategy: Strategy, cfg: &SolverConfig) -> Result<MomentMatchResult> {
    match strategy {
        Strategy::A => match_a(obs, cfg),
        Strategy::B => match_b(obs, cfg),
        Strategy::C => match_c(obs, cfg),
        Strategy::Mle => mle_full(obs, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::rb_poisson_lambda;
    use crate::sample::Entry;
    use crate::simulate::{simulate_replicate, GenOrder};

    fn data(seed: u64) -> Observation {
        let x = vec![1.0 / 200.0; 200];
        let params = ModelParams::new(20.0, 1.0, 5.0).unwrap();
        simulate_replicate(&x, &params, GenOrder::PThenC, seed, 0).unwrap().observe()
    }

    #[test]
    fn mle_is_stationary() {
        let obs = data(1);
        let r = mle_full(&obs, &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Solved);
        assert!(r.max_residual() < 1e-6, "{:?}", r.residuals);
        let n = obs.n() as f64;
        let ModelParams { alpha, b, lambda } = r.params;
        assert!((lambda * alpha / b / n - 1.0).abs() < 1e-14);
        let y = LikelihoodModel::new(&obs).unwrap().stats.y;
        let law = r.w_law(y).unwrap();
        assert!((law.mean() - alpha * y / (b + lambda)).abs() < 1e-14 * law.mean());
        assert!(law.quantile(0.1) < law.quantile(0.5) && law.quantile(0.5) < law.quantile(0.9));
    }

    #[test]
    fn ratio_mean_matches_quantile_average() {
        let r = MomentMatchResult {
            strategy: Strategy::A,
            params: ModelParams::new(3.0, 1.0, 2.0).unwrap(),
            residuals: vec![],
            candidates: vec![],
            verdict: Verdict::Solved,
        };
        let (v, y) = (0.8, 0.4);
        let law = r.w_law(y).unwrap();
        let k = 20000;
        let avg: f64 = (0..k)
            .map(|j| {
                let w = law.quantile((j as f64 + 0.5) / k as f64);
                w / (v + w)
            })
            .sum::<f64>()
            / k as f64;
        let exact = r.w_over_z_mean(v, y, &SolverConfig::default()).unwrap();
        assert!((exact - avg).abs() < 1e-5, "{exact} vs {avg}");
    }

    #[test]
    fn ratio_mean_expansion_matches_quadrature() {
        let (v, y) = (0.8, 0.4);
        let r = |alpha: f64| MomentMatchResult {
            strategy: Strategy::Mle,
            params: ModelParams::new(alpha, alpha, 1.0).unwrap(),
            residuals: vec![],
            candidates: vec![],
            verdict: Verdict::Solved,
        };
        let cfg = SolverConfig::default();
        // shape 4e6: quadrature; shape 4e8: expansion
        let below = r(1e7).w_over_z_mean(v, y, &cfg).unwrap();
        let above = r(1e9).w_over_z_mean(v, y, &cfg).unwrap();
        let mu = |a: f64| 0.4 * a / (a + 1.0);
        assert!((below - mu(1e7) / (v + mu(1e7))).abs() < 1e-7);
        assert!((above - mu(1e9) / (v + mu(1e9))).abs() < 1e-9);
    }

    #[test]
    fn mle_proportional_sample_is_boundary() {
        let es = vec![Entry { i: 0, p: 0.5, c: 2 }, Entry { i: 1, p: 0.5, c: 1 }];
        let obs = Observation::new(4, vec![0.25; 4], es).unwrap();
        let r = mle_full(&obs, &SolverConfig::default()).unwrap();
        assert!(matches!(r.verdict, Verdict::Boundary(_)));
        assert!(r.params.alpha > 1e20);
    }

    #[test]
    fn strategies_plug_back() {
        let cfg = SolverConfig::default();
        let obs = data(2);
        for s in [Strategy::A, Strategy::B, Strategy::C] {
            let r = match_strategy(&obs, s, &cfg).unwrap();
            assert!(r.max_residual() < 1e-8, "{s:?}: {:?}", r.residuals);
            assert!(r.params.lambda / r.params.b > 0.0);
        }
        let a = match_a(&obs, &cfg).unwrap();
        let n = obs.n() as f64;
        assert!((a.params.lambda / a.params.b - n / a.params.alpha).abs() < 1e-12 * n / a.params.alpha);
        let c = match_c(&obs, &cfg).unwrap();
        assert_eq!(c.params.lambda, rb_poisson_lambda(&obs, &cfg).unwrap());
    }

    #[test]
    fn strategy_c_singletons() {
        let x = vec![0.25; 4];
        let es = vec![Entry { i: 0, p: 0.3, c: 1 }, Entry { i: 2, p: 0.9, c: 1 }];
        let obs = Observation::new(4, x, es).unwrap();
        let r = match_c(&obs, &SolverConfig::default()).unwrap();
        assert_eq!(r.params.lambda, 0.0);
        assert_eq!(r.verdict, Verdict::LambdaZero);
        assert!(r.max_residual() < 1e-8, "{:?}", r.residuals);
        assert!(matches!(match_b(&obs, &SolverConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn strategy_b_single_point() {
        // one sampled point: every sum in the conditional system has one term
        let x = vec![0.5, 0.5];
        let obs = Observation::new(2, x, vec![Entry { i: 0, p: 1.3, c: 4 }]).unwrap();
        let r = match_b(&obs, &SolverConfig::default());
        if let Ok(r) = r {
            let ModelParams { alpha, b, lambda } = r.params;
            let pt = Point { a: alpha * 0.5, b, lambda };
            assert!((pt.e_c_given_pos() - 4.0).abs() < 1e-8 * 4.0);
            assert!((pt.e_p_given_pos() - 1.3).abs() < 1e-8 * 1.3);
            assert!((0.5 * pt.e_logp_given_pos() - 0.5 * 1.3f64.ln()).abs() < 1e-8);
        }
    }
}
