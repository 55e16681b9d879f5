//! Scalar numerics: bracketed root finding, maximization of unimodal
//! functions in a log-transformed argument, and semi-infinite quadrature
//! returning log-values.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Lower and upper limits of the log-argument search range for unimodal
/// maximization.
pub const LOG_ARG_MIN: f64 = -30.0;
pub const LOG_ARG_MAX: f64 = 50.0;

/// Log-argument limits used by the quadrature mode search.
const QUAD_T_MIN: f64 = -700.0;
const QUAD_T_MAX: f64 = 700.0;

const GL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Panel budget per tail in [`integrate_semi_infinite`].
    pub quad_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 200,
            quad_points: 257,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidInput("rel_tol must be positive".into()));
        }
        if self.max_iter < 10 {
            return Err(Error::InvalidInput("max_iter must be at least 10".into()));
        }
        if self.quad_points < 33 || self.quad_points.is_multiple_of(2) {
            return Err(Error::InvalidInput(
                "quad_points must be odd and at least 33".into(),
            ));
        }
        Ok(())
    }
}

/// Brent's method on a sign-changing bracket.
///
/// Terminates when the bracket is narrower than `rel_tol·|z|` or an exact
/// zero is hit.
pub fn solve_root<F>(f: F, bracket: (f64, f64), cfg: &SolverConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = bracket;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(Error::Bracket {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..cfg.max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * cfg.rel_tol * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::Convergence {
        iterations: cfg.max_iter,
    })
}

/// Outcome of a unimodal maximization over a log-argument `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnimodalMax {
    Finite { t: f64, value: f64 },
    /// Still increasing at the upper end of the search range.
    AtInfinity,
    /// Still decreasing at the lower end of the search range.
    AtLowerBound { t: f64, value: f64 },
}

impl UnimodalMax {
    pub fn argmax(&self) -> Option<f64> {
        match self {
            UnimodalMax::Finite { t, .. } => Some(t.exp()),
            _ => None,
        }
    }
}

/// Maximizes `g(t)`, `t = log(argument)`, by bracket expansion from
/// `t_start` followed by golden-section search. The search range is
/// `[LOG_ARG_MIN, LOG_ARG_MAX]`.
pub fn maximize_unimodal<G>(g: G, t_start: f64, cfg: &SolverConfig) -> UnimodalMax
where
    G: Fn(f64) -> f64,
{
    maximize_unimodal_within(g, t_start, (LOG_ARG_MIN, LOG_ARG_MAX), cfg)
}

pub fn maximize_unimodal_within<G>(
    g: G,
    t_start: f64,
    limits: (f64, f64),
    cfg: &SolverConfig,
) -> UnimodalMax
where
    G: Fn(f64) -> f64,
{
    let eval = |t: f64| {
        let v = g(t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (t_min, t_max) = limits;
    let t0 = if t_start.is_finite() {
        t_start.clamp(t_min, t_max)
    } else {
        0.0f64.clamp(t_min, t_max)
    };
    let g0 = eval(t0);
    let step = 1.0;
    let t_right = (t0 + step).min(t_max);
    let g_right = eval(t_right);
    let (lo, hi);
    if g_right > g0 || (t0 == t_min && g_right >= g0) {
        // climb to the right
        let (mut ta, mut tb, mut gb) = (t0, t_right, g_right);
        let mut s = step;
        loop {
            if tb >= t_max {
                return UnimodalMax::AtInfinity;
            }
            s *= 2.0;
            let tc = (tb + s).min(t_max);
            let gc = eval(tc);
            if gc < gb {
                lo = ta;
                hi = tc;
                break;
            }
            ta = tb;
            tb = tc;
            gb = gc;
        }
    } else {
        let t_left = (t0 - step).max(t_min);
        let g_left = eval(t_left);
        if g_left <= g0 {
            lo = t_left;
            hi = t_right;
        } else {
            let (mut tb, mut gb, mut tc) = (t_left, g_left, t0);
            let mut s = step;
            loop {
                if tb <= t_min {
                    return UnimodalMax::AtLowerBound { t: tb, value: gb };
                }
                s *= 2.0;
                let ta = (tb - s).max(t_min);
                let ga = eval(ta);
                if ga < gb {
                    lo = ta;
                    hi = tc;
                    break;
                }
                tc = tb;
                tb = ta;
                gb = ga;
            }
        }
    }
    let (t, value) = golden_section(&eval, lo, hi, cfg);
    UnimodalMax::Finite { t, value }
}

fn golden_section<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64, cfg: &SolverConfig) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..cfg.max_iter {
        if (b - a).abs() <= cfg.rel_tol * (1.0 + c.abs()) {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    if gc > gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Maximizes a log-concave function given its slope `dg/dt` (decreasing in
/// `t`): scans outward from `t_start` for a sign change of the slope inside
/// `[LOG_ARG_MIN, LOG_ARG_MAX]`, then solves slope = 0.
///
/// Returns the argmax in `t` or the boundary verdict.
pub fn maximize_by_slope<S>(slope: S, t_start: f64, cfg: &SolverConfig) -> Result<SlopeMax>
where
    S: Fn(f64) -> f64,
{
    let t0 = if t_start.is_finite() {
        t_start.clamp(LOG_ARG_MIN, LOG_ARG_MAX)
    } else {
        0.0
    };
    let s0 = slope(t0);
    if s0 == 0.0 {
        return Ok(SlopeMax::Finite(t0));
    }
    let dir = if s0 > 0.0 { 1.0 } else { -1.0 };
    let mut step = 1.0;
    let mut prev = t0;
    loop {
        let limit = if dir > 0.0 { LOG_ARG_MAX } else { LOG_ARG_MIN };
        let next = if dir > 0.0 {
            (prev + step).min(limit)
        } else {
            (prev - step).max(limit)
        };
        let sn = slope(next);
        if sn.is_nan() {
            return Err(Error::InvalidInput(format!("slope is NaN at t = {next}")));
        }
        if sn * dir <= 0.0 {
            let bracket = if dir > 0.0 { (prev, next) } else { (next, prev) };
            let t = solve_root(&slope, bracket, cfg)?;
            return Ok(SlopeMax::Finite(t));
        }
        if next == limit {
            return Ok(if dir > 0.0 {
                SlopeMax::AtInfinity
            } else {
                SlopeMax::AtLowerBound(limit)
            });
        }
        prev = next;
        step *= 2.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeMax {
    Finite(f64),
    AtInfinity,
    AtLowerBound(f64),
}

fn gauss_legendre() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static NODES: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut x = [0.0; GL_ORDER];
        let mut w = [0.0; GL_ORDER];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, 0.0);
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
                }
                dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
            w[n - 1 - i] = w[i];
        }
        (x, w)
    })
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(w.iter())
        .map(|(xi, wi)| wi * f(mid + half * xi))
        .sum::<f64>()
        * half
}

fn adaptive_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, abs_tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gl_panel(f, a, mid);
    let right = gl_panel(f, mid, b);
    let split = left + right;
    if depth == 0 || (split - whole).abs() <= abs_tol {
        return split;
    }
    adaptive_panel(f, a, mid, left, 0.5 * abs_tol, depth - 1)
        + adaptive_panel(f, mid, b, right, 0.5 * abs_tol, depth - 1)
}

/// log ∫₀^∞ exp(log_f(u)) du for a unimodal integrand.
///
/// Works in `t = log u`; locates the mode near `mode_hint`, then sums
/// adaptive Gauss–Legendre panels outward from the mode until the
/// remaining tail, extrapolated log-linearly, is below 1e-12 of the running
/// total. Each tail may use at most `cfg.quad_points` panels.
pub fn integrate_semi_infinite<F>(log_f: F, mode_hint: f64, cfg: &SolverConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let h = |t: f64| {
        let v = log_f(t.exp()) + t;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let t_start = if mode_hint > 0.0 && mode_hint.is_finite() {
        mode_hint.ln()
    } else {
        0.0
    };
    let (t_mode, h_max) = match maximize_unimodal_within(h, t_start, (QUAD_T_MIN, QUAD_T_MAX), cfg) {
        UnimodalMax::Finite { t, value } => (t, value),
        UnimodalMax::AtInfinity => {
            return Err(Error::Divergence("integrand increases without bound in log u".into()))
        }
        UnimodalMax::AtLowerBound { .. } => {
            return Err(Error::Divergence("integrand does not decay as u -> 0".into()))
        }
    };
    if !h_max.is_finite() {
        return Err(Error::Divergence(format!("integrand peak is {h_max}")));
    }
    let delta = 1e-2;
    let curv = (h(t_mode + delta) - 2.0 * h_max + h(t_mode - delta)) / (delta * delta);
    let sigma = if curv < 0.0 {
        (1.0 / (-curv).sqrt()).clamp(1e-6, 5.0)
    } else {
        1.0
    };
    let scaled = |t: f64| (h(t) - h_max).exp();
    let abs_tol = 1e-15 * sigma;

    let mut total = 0.0;
    for dir in [1.0f64, -1.0] {
        let mut edge = t_mode;
        let mut width = sigma;
        let mut panels = 0usize;
        loop {
            let far = (edge + dir * width).clamp(QUAD_T_MIN, QUAD_T_MAX);
            let (a, b) = if dir > 0.0 { (edge, far) } else { (far, edge) };
            let whole = gl_panel(&scaled, a, b);
            total += adaptive_panel(&scaled, a, b, whole, abs_tol, 12);
            panels += 1;
            // Beyond `far` the log-integrand is extrapolated linearly.
            let step = 1e-3;
            let slope = (h(far + step) - h(far - step)) / (2.0 * step);
            let tail = if slope * dir < 0.0 {
                (h(far) - h_max).exp() / slope.abs()
            } else {
                f64::INFINITY
            };
            if tail <= 1e-12 * total {
                total += tail;
                break;
            }
            if far == QUAD_T_MIN || far == QUAD_T_MAX {
                if tail.is_finite() && tail <= 1e-3 * total {
                    total += tail;
                    break;
                }
                return Err(Error::Divergence("integrand tail reaches the log-range limit".into()));
            }
            if panels >= cfg.quad_points {
                return Err(Error::Divergence(format!(
                    "tail still contributing after {panels} panels"
                )));
            }
            edge = far;
            if panels > 4 {
                width *= 1.25;
            }
        }
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Divergence(format!("quadrature total {total}")));
    }
    Ok(h_max + total.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ln_beta, ln_gamma};

    #[test]
    fn root_examples() {
        let cfg = SolverConfig::default();
        let z = solve_root(|z| z - 1.0, (0.0, 2.0), &cfg).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
        let eps = 1e-3;
        let z = solve_root(|z| z * (1.0 - (1.0 - 1.0 / z).powi(2)) - 1.0, (1.0 - eps, 10.0), &cfg).unwrap();
        assert!((z - 1.0).abs() < 1e-9);
        let z = solve_root(|z| (-z).exp() - 0.5, (0.0, 5.0), &cfg).unwrap();
        assert!((z - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn root_bracket_error() {
        let cfg = SolverConfig::default();
        assert!(matches!(
            solve_root(|z| z * z + 1.0, (-1.0, 1.0), &cfg),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn root_convergence_error() {
        let cfg = SolverConfig {
            max_iter: 10,
            rel_tol: 1e-300,
            ..SolverConfig::default()
        };
        // A jump discontinuity never meets the width criterion quickly.
        let r = solve_root(|z| if z < 0.3 { -1.0 } else { 1.0 }, (0.0, 1e6), &cfg);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            quad_points: 34,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_iter: 3,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn maximize_log_square() {
        let cfg = SolverConfig::default();
        match maximize_unimodal(|t| -t * t, 3.0, &cfg) {
            UnimodalMax::Finite { t, value } => {
                assert!(t.abs() < 1e-6);
                assert!(value.abs() < 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
        match maximize_unimodal(|t| -(t + 4.0) * (t + 4.0), 10.0, &cfg) {
            UnimodalMax::Finite { t, .. } => assert!((t + 4.0).abs() < 1e-6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn maximize_monotone_reports_infinity() {
        let cfg = SolverConfig::default();
        assert_eq!(maximize_unimodal(|t| t, 0.0, &cfg), UnimodalMax::AtInfinity);
        assert!(matches!(
            maximize_unimodal(|t| -t, 0.0, &cfg),
            UnimodalMax::AtLowerBound { .. }
        ));
    }

    #[test]
    fn slope_maximizer() {
        let cfg = SolverConfig::default();
        assert_eq!(
            maximize_by_slope(|t| 2.0 - t, -5.0, &cfg).unwrap(),
            SlopeMax::Finite(2.0)
        );
        assert_eq!(maximize_by_slope(|_| 1.0, 0.0, &cfg).unwrap(), SlopeMax::AtInfinity);
    }

    #[test]
    fn integrates_exponential() {
        let cfg = SolverConfig::default();
        let v = integrate_semi_infinite(|u| -u, 1.0, &cfg).unwrap();
        assert!(v.abs() < 1e-12, "{v}");
    }

    #[test]
    fn integrates_gamma_kernels() {
        let cfg = SolverConfig::default();
        let mut k: f64 = 0.1;
        while k <= 100.0 {
            let v = integrate_semi_infinite(|u| (k - 1.0) * u.ln() - u, k, &cfg).unwrap();
            assert!((v - ln_gamma(k)).abs() < 1e-9, "k={k}: {v} vs {}", ln_gamma(k));
            k *= 1.7;
        }
        let v = integrate_semi_infinite(|u| 2.5 * u.ln() - u, 1.0, &cfg).unwrap();
        assert!((v - ln_gamma(3.5)).abs() < 1e-10);
    }

    #[test]
    fn integrates_beta_prime_kernel() {
        let cfg = SolverConfig::default();
        for &(a, b) in &[(0.3, 4.0), (1.0, 1.5), (5.0, 20.0), (0.02, 7.0)] {
            let v = integrate_semi_infinite(|t| (a - 1.0) * t.ln() - (a + b) * t.ln_1p(), 1.0, &cfg).unwrap();
            assert!((v - ln_beta(a, b)).abs() < 1e-9, "a={a} b={b}");
        }
    }

    #[test]
    fn detects_divergence() {
        let cfg = SolverConfig::default();
        // 1/(1+u) is not integrable at infinity
        assert!(matches!(
            integrate_semi_infinite(|u| -u.ln_1p(), 1.0, &cfg),
            Err(Error::Divergence(_))
        ));
    }
}
