//! Distributions for W, Z = V + W and W/Z from the Bayesian, profile and
//! mixed treatments of the Gamma–Poisson model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::MassDistribution;
use crate::error::{Error, Result};
use crate::likelihoods::{Likelihood, LikelihoodModel};
use crate::solvers::{
    integrate_semi_infinite, maximize_by_slope, solve_root, SlopeMax, SolverConfig, LOG_ARG_MAX, LOG_ARG_MIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceMethod {
    Bayes,
    Profile,
    Mixed,
}

/// Likelihood used to fit α in the mixed treatment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Base {
    #[default]
    L5,
    L9,
}

impl Base {
    fn likelihood(self) -> Likelihood {
        match self {
            Base::L5 => Likelihood::L5,
            Base::L9 => Likelihood::L9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SingularCase {
    #[serde(rename = "DeltaS_zero")]
    DeltaSZero,
    #[serde(rename = "Y_zero")]
    YZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceConfig {
    pub solver: SolverConfig,
    pub grid_points: usize,
    pub base: Base,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            grid_points: 201,
            base: Base::L5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSummary {
    /// Point estimate (mixed treatment).
    Point { alpha: f64, converged: bool },
    /// The likelihood increases without bound in α.
    Infinite,
    /// Mode of the α-marginal and log of its normalizer (Bayesian).
    Marginal { mode: f64, log_evidence: f64 },
    /// Profile argmax at the W-mode.
    Profile { alpha_at_mode: f64 },
}

impl AlphaSummary {
    /// A single representative α.
    pub fn value(&self) -> f64 {
        match *self {
            AlphaSummary::Point { alpha, .. } => alpha,
            AlphaSummary::Infinite => f64::INFINITY,
            AlphaSummary::Marginal { mode, .. } => mode,
            AlphaSummary::Profile { alpha_at_mode } => alpha_at_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport {
    pub method: InferenceMethod,
    pub w_dist: MassDistribution,
    pub z_dist: MassDistribution,
    pub w_over_z_dist: MassDistribution,
    pub alpha: AlphaSummary,
    pub singular_case: Option<SingularCase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleAlpha {
    /// +∞ when the likelihood keeps increasing.
    pub alpha: f64,
    pub converged: bool,
}

/// Scan step in log α when looking for local maxima of L5 or L9.
const ALPHA_SCAN_STEP: f64 = 0.25;

/// Maximizes log L5 or log L9 over α.
///
/// Neither is log-concave in general (the curvature turns positive at
/// moderate α when N is large compared with M), so every local maximum on a
/// log-α scan is refined and the highest is kept. Δ_S = 0 gives α = ∞.
pub fn mle_alpha(model: &LikelihoodModel, base: Base, cfg: &SolverConfig) -> Result<MleAlpha> {
    if model.stats.delta_s_zero {
        return Ok(MleAlpha {
            alpha: f64::INFINITY,
            converged: true,
        });
    }
    let which = base.likelihood();
    let slope = |t: f64| model.dlog_dalpha(which, None, t.exp()).unwrap_or(f64::NAN);
    let steps = ((LOG_ARG_MAX - LOG_ARG_MIN) / ALPHA_SCAN_STEP).round() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| LOG_ARG_MIN + (LOG_ARG_MAX - LOG_ARG_MIN) * k as f64 / steps as f64)
        .collect();
    let slopes: Vec<f64> = grid.iter().map(|&t| slope(t)).collect();
    if let Some(k) = slopes.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidInput(format!("slope is NaN at alpha = {}", grid[k].exp())));
    }
    let mut best: Option<(f64, f64)> = None;
    for k in 0..steps {
        if slopes[k] > 0.0 && slopes[k + 1] <= 0.0 {
            let t = solve_root(slope, (grid[k], grid[k + 1]), cfg)?;
            let value = model.log_lik(which, None, t.exp())?;
            if best.is_none_or(|(_, v)| value > v) {
                best = Some((t, value));
            }
        }
    }
    Ok(match best {
        Some((t, _)) => MleAlpha {
            alpha: t.exp(),
            converged: true,
        },
        None if slopes[steps] > 0.0 => MleAlpha {
            alpha: f64::INFINITY,
            converged: false,
        },
        None => MleAlpha {
            alpha: LOG_ARG_MIN.exp(),
            converged: false,
        },
    })
}

fn singular_report(model: &LikelihoodModel, method: InferenceMethod) -> Option<InferenceReport> {
    let s = &model.stats;
    let (w, wz, case) = if s.y_zero() {
        (0.0, 0.0, SingularCase::YZero)
    } else if s.delta_s_zero {
        (s.y * s.mass_ratio(), s.y, SingularCase::DeltaSZero)
    } else {
        return None;
    };
    let w_dist = MassDistribution::point(w);
    Some(InferenceReport {
        method,
        z_dist: w_dist.shifted(s.v),
        w_dist,
        w_over_z_dist: MassDistribution::point(wz),
        alpha: AlphaSummary::Infinite,
        singular_case: Some(case),
    })
}

/// Beta-prime law of W/V and Beta law of W/Z at a fixed α.
fn mixed_laws(model: &LikelihoodModel, alpha: f64) -> Result<(MassDistribution, MassDistribution)> {
    let s = &model.stats;
    let a = alpha * s.y;
    let b = alpha * s.x + s.n as f64;
    Ok((MassDistribution::beta_prime(a, b, s.v)?, MassDistribution::beta(a, b)?))
}

pub fn infer_mixed(model: &LikelihoodModel, cfg: &InferenceConfig) -> Result<InferenceReport> {
    if let Some(r) = singular_report(model, InferenceMethod::Mixed) {
        return Ok(r);
    }
    let mle = mle_alpha(model, cfg.base, &cfg.solver)?;
    if !mle.alpha.is_finite() {
        return Err(Error::Degenerate("alpha estimate diverges".into()));
    }
    let (w_dist, w_over_z_dist) = mixed_laws(model, mle.alpha)?;
    Ok(InferenceReport {
        method: InferenceMethod::Mixed,
        z_dist: w_dist.shifted(model.stats.v),
        w_dist,
        w_over_z_dist,
        alpha: AlphaSummary::Point {
            alpha: mle.alpha,
            converged: mle.converged,
        },
        singular_case: None,
    })
}

/// Log-spaced W grid covering the mixed-treatment law.
///
/// Starts from its 1e-4 and 1 − 1e-4 quantiles, doubles the log-width about
/// the centre, then widens further while `probe` at an end is within 1e-8
/// of its value at the mixed median.
fn w_grid<F: Fn(f64) -> f64>(model: &LikelihoodModel, cfg: &InferenceConfig, probe: F) -> Result<Vec<f64>> {
    let mle = mle_alpha(model, Base::L5, &cfg.solver)?;
    if !mle.alpha.is_finite() {
        return Err(Error::Degenerate("alpha estimate diverges".into()));
    }
    let (law, _) = mixed_laws(model, mle.alpha)?;
    let hi = law.quantile(1.0 - 1e-4).ln();
    let lo = law.quantile(1e-4).ln().max(hi - 460.0);
    let centre = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(0.5);
    let (mut a, mut b) = (centre - 2.0 * half, centre + 2.0 * half);
    let reference = probe(law.quantile(0.5));
    // compare in log-W measure, w·density
    let low_enough = |t: f64| probe(t.exp()) + t <= reference + law.quantile(0.5).ln() + (1e-8f64).ln();
    for _ in 0..6 {
        if low_enough(a) {
            break;
        }
        a -= half;
    }
    for _ in 0..6 {
        if low_enough(b) {
            break;
        }
        b += half;
    }
    let n = cfg.grid_points.max(3);
    Ok((0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

/// log L6(W) = log ∫ L4(W, α) α^{−1} dα.
fn log_l6(model: &LikelihoodModel, w: f64, alpha_hint: f64, cfg: &SolverConfig) -> Result<f64> {
    integrate_semi_infinite(
        |alpha| model.log_l4(w, alpha).unwrap_or(f64::NEG_INFINITY) - alpha.ln(),
        alpha_hint,
        cfg,
    )
}

fn finish(
    model: &LikelihoodModel,
    method: InferenceMethod,
    grid: Vec<f64>,
    log_density: &[f64],
    alpha: AlphaSummary,
) -> Result<InferenceReport> {
    let w_dist = MassDistribution::gridded(grid, log_density)?;
    let w_over_z_dist = w_dist.gridded_ratio(model.stats.v)?;
    Ok(InferenceReport {
        method,
        z_dist: w_dist.shifted(model.stats.v),
        w_dist,
        w_over_z_dist,
        alpha,
        singular_case: None,
    })
}

pub fn infer_bayes(model: &LikelihoodModel, cfg: &InferenceConfig) -> Result<InferenceReport> {
    if let Some(r) = singular_report(model, InferenceMethod::Bayes) {
        return Ok(r);
    }
    let solver = &cfg.solver;
    let mle = mle_alpha(model, Base::L5, solver)?;
    let hint = mle.alpha;
    let log_l7 = integrate_semi_infinite(
        |alpha| model.log_l5(alpha).unwrap_or(f64::NEG_INFINITY) - alpha.ln(),
        hint,
        solver,
    )?;
    let grid = w_grid(model, cfg, |w| log_l6(model, w, hint, solver).unwrap_or(f64::NEG_INFINITY))?;
    let log_density = grid
        .par_iter()
        .map(|&w| log_l6(model, w, hint, solver).map(|l| l - log_l7))
        .collect::<Result<Vec<f64>>>()?;
    // mode of the α-marginal L5(α)/α
    let slope = |t: f64| {
        let alpha = t.exp();
        model.dlog_dalpha(Likelihood::L5, None, alpha).unwrap_or(f64::NAN) * alpha - 1.0
    };
    let mode = match maximize_by_slope(slope, hint.ln(), solver)? {
        SlopeMax::Finite(t) => t.exp(),
        SlopeMax::AtInfinity => f64::INFINITY,
        SlopeMax::AtLowerBound(t) => t.exp(),
    };
    finish(
        model,
        InferenceMethod::Bayes,
        grid,
        &log_density,
        AlphaSummary::Marginal {
            mode,
            log_evidence: log_l7,
        },
    )
}

/// sup over α of log L8(W, α), with its argmax.
fn profile_at(model: &LikelihoodModel, w: f64, t_start: f64, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let slope = |t: f64| model.dlog_dalpha(Likelihood::L8, Some(w), t.exp()).unwrap_or(f64::NAN);
    let t = match maximize_by_slope(slope, t_start, cfg)? {
        SlopeMax::Finite(t) => t,
        SlopeMax::AtLowerBound(_) => LOG_ARG_MIN,
        SlopeMax::AtInfinity => {
            return Err(Error::Degenerate(format!("profile over alpha unbounded at W = {w}")));
        }
    };
    Ok((model.log_l8(w, t.exp())?, t))
}

pub fn infer_profile(model: &LikelihoodModel, cfg: &InferenceConfig) -> Result<InferenceReport> {
    if let Some(r) = singular_report(model, InferenceMethod::Profile) {
        return Ok(r);
    }
    let solver = &cfg.solver;
    let start = mle_alpha(model, Base::L9, solver)?.alpha.ln();
    let grid = w_grid(model, cfg, |w| {
        profile_at(model, w, start, solver).map(|(v, _)| v).unwrap_or(f64::NEG_INFINITY)
    })?;
    let mut log_density = Vec::with_capacity(grid.len());
    let mut argmax = Vec::with_capacity(grid.len());
    let mut t = start;
    for &w in &grid {
        let (value, t_w) = profile_at(model, w, t, solver)?;
        log_density.push(value);
        argmax.push(t_w);
        t = t_w;
    }
    let peak = (0..grid.len())
        .max_by(|&a, &b| log_density[a].total_cmp(&log_density[b]))
        .unwrap_or(0);
    finish(
        model,
        InferenceMethod::Profile,
        grid,
        &log_density,
        AlphaSummary::Profile {
            alpha_at_mode: argmax[peak].exp(),
        },
    )
}

/// Law of W from L4 at a single fixed α, on the same grid construction.
pub fn infer_fixed_alpha(model: &LikelihoodModel, alpha: f64, cfg: &InferenceConfig) -> Result<InferenceReport> {
    if let Some(r) = singular_report(model, InferenceMethod::Bayes) {
        return Ok(r);
    }
    let grid = w_grid(model, cfg, |w| model.log_l4(w, alpha).unwrap_or(f64::NEG_INFINITY))?;
    let log_density = grid
        .iter()
        .map(|&w| model.log_l4(w, alpha))
        .collect::<Result<Vec<f64>>>()?;
    finish(
        model,
        InferenceMethod::Bayes,
        grid,
        &log_density,
        AlphaSummary::Point { alpha, converged: true },
    )
}

pub fn infer(model: &LikelihoodModel, method: InferenceMethod, cfg: &InferenceConfig) -> Result<InferenceReport> {
    match method {
        InferenceMethod::Bayes => infer_bayes(model, cfg),
        InferenceMethod::Profile => infer_profile(model, cfg),
        InferenceMethod::Mixed => infer_mixed(model, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{Entry, Observation};

    fn model(x: &[f64], entries: &[(usize, f64, u64)]) -> LikelihoodModel {
        let es = entries.iter().map(|&(i, p, c)| Entry { i, p, c }).collect();
        LikelihoodModel::new(&Observation::new(x.len(), x.to_vec(), es).unwrap()).unwrap()
    }

    fn regular() -> LikelihoodModel {
        let x = vec![0.05; 20];
        model(
            &x,
            &[
                (0, 0.9, 4),
                (1, 0.2, 1),
                (3, 1.5, 6),
                (4, 0.05, 1),
                (7, 0.6, 2),
                (9, 0.3, 2),
                (12, 1.1, 3),
                (15, 0.02, 1),
            ],
        )
    }

    #[test]
    fn mle_alpha_is_global() {
        // L5 has a convex stretch here; compare against a dense scan
        let es = vec![Entry { i: 0, p: 0.9, c: 7 }, Entry { i: 1, p: 0.2, c: 5 }];
        let m = LikelihoodModel::new(&Observation::new(3, vec![0.3, 0.25, 0.45], es).unwrap()).unwrap();
        let cfg = SolverConfig::default();
        for base in [Base::L5, Base::L9] {
            let mle = mle_alpha(&m, base, &cfg).unwrap();
            assert!(mle.converged);
            let at = |a: f64| m.log_lik(base.likelihood(), None, a).unwrap();
            let best = (0..4000)
                .map(|k| at(10f64.powf(-4.0 + 10.0 * k as f64 / 4000.0)))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(at(mle.alpha) >= best - 1e-9);
        }
    }

    #[test]
    fn mixed_means_closed_form() {
        // α* = 2, X = Y = 1/2, N = 9
        let m = model(&[0.5, 0.5], &[(0, 1.0, 9)]);
        let (wv, wz) = mixed_laws(&m, 2.0).unwrap();
        assert!((wz.mean() - 1.0 / 11.0).abs() < 1e-15);
        assert!((wv.mean() / m.stats.v - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn mle_is_stationary() {
        let m = regular();
        let cfg = SolverConfig::default();
        for base in [Base::L5, Base::L9] {
            let r = mle_alpha(&m, base, &cfg).unwrap();
            assert!(r.converged);
            let which = base.likelihood();
            let d1 = m.dlog_dalpha(which, None, r.alpha).unwrap();
            let d2 = m.d2log_dalpha2(which, None, r.alpha).unwrap();
            assert!(d1.abs() <= 1e-6 * (d2 * r.alpha).abs(), "{d1} {d2}");
        }
    }

    #[test]
    fn singular_cases() {
        let cfg = InferenceConfig::default();
        let r = 3.0;
        let x = [0.1, 0.2, 0.3, 0.4];
        let prop = model(&x, &[(1, 0.2 * r, 2), (3, 0.4 * r, 1)]);
        for method in [InferenceMethod::Bayes, InferenceMethod::Profile, InferenceMethod::Mixed] {
            let rep = infer(&prop, method, &cfg).unwrap();
            assert_eq!(rep.singular_case, Some(SingularCase::DeltaSZero));
            assert!((rep.w_dist.mean() - 0.4 * r).abs() < 1e-12);
            assert!((rep.z_dist.mean() - (0.4 * r + 0.6 * r)).abs() < 1e-12);
            assert!((rep.w_over_z_dist.mean() - 0.4).abs() < 1e-12);
        }
        let full = model(&[0.5, 0.5], &[(0, 1.0, 2), (1, 3.0, 1)]);
        for method in [InferenceMethod::Bayes, InferenceMethod::Profile, InferenceMethod::Mixed] {
            let rep = infer(&full, method, &cfg).unwrap();
            assert_eq!(rep.singular_case, Some(SingularCase::YZero));
            assert_eq!(rep.w_dist.quantile(0.5), 0.0);
        }
        assert!(mle_alpha(&prop, Base::L5, &cfg.solver).unwrap().alpha.is_infinite());
    }

    #[test]
    fn bayes_posterior_normalized() {
        let m = regular();
        let rep = infer_bayes(&m, &InferenceConfig::default()).unwrap();
        assert!((rep.w_dist.grid_mass().unwrap() - 1.0).abs() < 1e-12);
        // the posterior evaluated against the analytic L7 normalizer
        if let crate::distribution::DistKind::Gridded { log_norm, .. } = rep.w_dist.kind {
            assert!(log_norm.abs() < 1e-4, "{log_norm}");
        }
        let med = rep.w_dist.quantile(0.5);
        assert!(med.is_finite() && med > 0.0);
        let v = m.stats.v;
        for &q in &[0.05, 0.5, 0.95] {
            assert!((rep.z_dist.quantile(q) - rep.w_dist.quantile(q) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_and_bayes_modes_agree() {
        let m = regular();
        let cfg = InferenceConfig::default();
        let b = infer_bayes(&m, &cfg).unwrap();
        let p = infer_profile(&m, &cfg).unwrap();
        let mode = |d: &MassDistribution| match &d.kind {
            crate::distribution::DistKind::Gridded { grid, density, .. } => {
                // mode of the density in log W
                let k = (0..grid.len())
                    .max_by(|&a, &b| (density[a] * grid[a]).total_cmp(&(density[b] * grid[b])))
                    .unwrap();
                grid[k]
            }
            _ => unreachable!(),
        };
        // small sample: integrating and maximizing over α agree only roughly
        let (mb, mp) = (mode(&b.w_dist), mode(&p.w_dist));
        assert!((mb / mp - 1.0).abs() < 0.25, "{mb} vs {mp}");
    }

    #[test]
    fn fixed_alpha_matches_mixed() {
        let m = regular();
        let cfg = InferenceConfig {
            grid_points: 2001,
            ..InferenceConfig::default()
        };
        let mixed = infer_mixed(&m, &cfg).unwrap();
        let alpha = mixed.alpha.value();
        let fixed = infer_fixed_alpha(&m, alpha, &cfg).unwrap();
        for &q in &[0.05, 0.25, 0.5, 0.75, 0.95] {
            let a = fixed.w_over_z_dist.quantile(q);
            let b = mixed.w_over_z_dist.quantile(q);
            assert!((a / b - 1.0).abs() < 2e-3, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn quantiles_scale_with_masses() {
        let x = vec![0.05; 20];
        let entries = [(0, 0.9, 4), (1, 0.2, 1), (3, 1.5, 6), (7, 0.6, 2), (15, 0.02, 1)];
        let scaled: Vec<(usize, f64, u64)> = entries.iter().map(|&(i, p, c)| (i, p * 5.0, c)).collect();
        let a = model(&x, &entries);
        let b = model(&x, &scaled);
        let cfg = InferenceConfig::default();
        for method in [InferenceMethod::Bayes, InferenceMethod::Profile, InferenceMethod::Mixed] {
            let ra = infer(&a, method, &cfg).unwrap();
            let rb = infer(&b, method, &cfg).unwrap();
            for &q in &[0.05, 0.5, 0.95] {
                let (qa, qb) = (ra.w_dist.quantile(q), rb.w_dist.quantile(q));
                assert!((qb / (5.0 * qa) - 1.0).abs() < 1e-6, "{method:?} q={q}");
            }
        }
    }
}
