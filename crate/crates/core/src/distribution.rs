//! Probability laws for W, W/V and W/Z.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solvers::{solve_root, SolverConfig};
use crate::special::{beta_inc, gamma_p, gamma_q, ln_beta, ln_gamma};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum DistKind {
    PointMass { value: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    /// `scale · T` with T having density ∝ t^{a−1} (1 + t)^{−a−b}.
    BetaPrime { a: f64, b: f64, scale: f64 },
    /// Density on a positive grid, normalized by the trapezoid rule in log W.
    Gridded {
        grid: Vec<f64>,
        density: Vec<f64>,
        cumulative: Vec<f64>,
        /// log of the trapezoid integral of the unnormalized input density.
        log_norm: f64,
    },
}

/// A law on [offset, ∞).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassDistribution {
    pub kind: DistKind,
    pub offset: f64,
}

fn quantile_cfg() -> SolverConfig {
    SolverConfig {
        rel_tol: 1e-13,
        max_iter: 400,
        ..SolverConfig::default()
    }
}

/// Smallest log-argument used when inverting CDFs.
const LOG_FLOOR: f64 = -745.0;

/// Inverts an increasing CDF given as a function of t = ln x.
fn invert_log_cdf<F: Fn(f64) -> f64>(cdf: F, q: f64, t_hi: f64) -> f64 {
    let g = |t: f64| cdf(t.exp()) - q;
    if g(LOG_FLOOR) >= 0.0 {
        return 0.0;
    }
    let mut hi = t_hi;
    while g(hi) < 0.0 {
        hi += 10.0;
        if hi > 709.0 {
            return f64::INFINITY;
        }
    }
    match solve_root(g, (LOG_FLOOR, hi), &quantile_cfg()) {
        Ok(t) => t.exp(),
        Err(_) => f64::NAN,
    }
}

/// Quantile of Gamma(shape, 1).
fn gamma_quantile(shape: f64, q: f64) -> f64 {
    // P(a, y) ≈ y^a / Γ(a+1) for small y
    let log_small = (q.ln() + ln_gamma(shape + 1.0)) / shape;
    if log_small < -700.0 {
        return log_small.exp();
    }
    let t_hi = (shape.max(1.0) * 10.0 + 50.0).ln();
    if q <= 0.5 {
        invert_log_cdf(|y| gamma_p(shape, y), q, t_hi)
    } else {
        // decreasing survival function
        invert_log_cdf(|y| -gamma_q(shape, y), -(1.0 - q), t_hi)
    }
}

/// Quantile of Beta(a, b) for q ≤ 1/2, together with its complement 1 − x.
fn beta_quantile_pair(a: f64, b: f64, q: f64) -> (f64, f64) {
    if q > 0.5 {
        let (x, y) = beta_quantile_pair(b, a, 1.0 - q);
        return (y, x);
    }
    // I_x(a, b) ≈ x^a / (a B(a, b)) for small x
    let log_small = (q.ln() + a.ln() + ln_beta(a, b)) / a;
    let x = if log_small < -700.0 {
        log_small.exp()
    } else {
        invert_log_cdf(|x| beta_inc(a, b, x.min(1.0)), q, 0.0)
    };
    (x, 1.0 - x)
}

impl MassDistribution {
    pub fn point(value: f64) -> Self {
        Self {
            kind: DistKind::PointMass { value },
            offset: 0.0,
        }
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::InvalidInput(format!("Gamma({shape}, {rate})")));
        }
        Ok(Self {
            kind: DistKind::Gamma { shape, rate },
            offset: 0.0,
        })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInput(format!("Beta({a}, {b})")));
        }
        Ok(Self {
            kind: DistKind::Beta { a, b },
            offset: 0.0,
        })
    }

    pub fn beta_prime(a: f64, b: f64, scale: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && scale > 0.0 && a.is_finite() && b.is_finite() && scale.is_finite()) {
            return Err(Error::InvalidInput(format!("BetaPrime({a}, {b}) scaled by {scale}")));
        }
        Ok(Self {
            kind: DistKind::BetaPrime { a, b, scale },
            offset: 0.0,
        })
    }

    /// Builds a gridded law from log-density values on an increasing,
    /// positive grid. Integrals use the trapezoid rule in log W on
    /// W·density, which suits the log-spaced grids used for inference.
    pub fn gridded(grid: Vec<f64>, log_density: &[f64]) -> Result<Self> {
        if grid.len() < 2 || grid.len() != log_density.len() {
            return Err(Error::InvalidInput("grid and density must align, at least 2 points".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 0.0) {
            return Err(Error::InvalidInput("grid must be increasing and positive".into()));
        }
        let peak = log_density
            .iter()
            .zip(&grid)
            .map(|(l, w)| l + w.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::InvalidInput(format!("density peak is {peak}")));
        }
        // W·density relative to its peak
        let mass: Vec<f64> = log_density
            .iter()
            .zip(&grid)
            .map(|(l, w)| if l.is_nan() { 0.0 } else { (l + w.ln() - peak).exp() })
            .collect();
        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(0.0);
        for k in 1..grid.len() {
            let area = 0.5 * (mass[k] + mass[k - 1]) * (grid[k] / grid[k - 1]).ln();
            cumulative.push(cumulative[k - 1] + area);
        }
        let total = *cumulative.last().unwrap();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidInput(format!("density integrates to {total}")));
        }
        let density = mass.iter().zip(&grid).map(|(m, w)| m / (total * w)).collect();
        for c in cumulative.iter_mut() {
            *c /= total;
        }
        Ok(Self {
            kind: DistKind::Gridded {
                grid,
                density,
                cumulative,
                log_norm: peak + total.ln(),
            },
            offset: 0.0,
        })
    }

    /// The same law moved right by `by`.
    pub fn shifted(&self, by: f64) -> Self {
        Self {
            kind: self.kind.clone(),
            offset: self.offset + by,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self.kind, DistKind::PointMass { .. })
    }

    /// Mean; +∞ when it does not exist.
    pub fn mean(&self) -> f64 {
        let base = match &self.kind {
            DistKind::PointMass { value } => *value,
            DistKind::Gamma { shape, rate } => shape / rate,
            DistKind::Beta { a, b } => a / (a + b),
            DistKind::BetaPrime { a, b, scale } => {
                if *b > 1.0 {
                    scale * a / (b - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            DistKind::Gridded { grid, density, .. } => (1..grid.len())
                .map(|k| {
                    let (x0, x1) = (grid[k - 1], grid[k]);
                    0.5 * (x0 * x0 * density[k - 1] + x1 * x1 * density[k]) * (x1 / x0).ln()
                })
                .sum(),
        };
        base + self.offset
    }

    /// Quantile at level q ∈ (0, 1).
    pub fn quantile(&self, q: f64) -> f64 {
        if !(q > 0.0 && q < 1.0) {
            return f64::NAN;
        }
        let base = match &self.kind {
            DistKind::PointMass { value } => *value,
            DistKind::Gamma { shape, rate } => gamma_quantile(*shape, q) / rate,
            DistKind::Beta { a, b } => beta_quantile_pair(*a, *b, q).0,
            DistKind::BetaPrime { a, b, scale } => {
                let (u, one_minus_u) = beta_quantile_pair(*a, *b, q);
                scale * u / one_minus_u
            }
            DistKind::Gridded { grid, cumulative, .. } => {
                let k = cumulative.partition_point(|&c| c < q).clamp(1, grid.len() - 1);
                let (c0, c1) = (cumulative[k - 1], cumulative[k]);
                let frac = if c1 > c0 { (q - c0) / (c1 - c0) } else { 0.0 };
                grid[k - 1] * (grid[k] / grid[k - 1]).powf(frac.clamp(0.0, 1.0))
            }
        };
        base + self.offset
    }

    /// CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let t = x - self.offset;
        match &self.kind {
            DistKind::PointMass { value } => {
                if t >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistKind::Gamma { shape, rate } => gamma_p(*shape, rate * t.max(0.0)),
            DistKind::Beta { a, b } => beta_inc(*a, *b, t.clamp(0.0, 1.0)),
            DistKind::BetaPrime { a, b, scale } => {
                let s = (t / scale).max(0.0);
                beta_inc(*a, *b, s / (1.0 + s))
            }
            DistKind::Gridded { grid, cumulative, .. } => {
                if t <= grid[0] {
                    return 0.0;
                }
                if t >= *grid.last().unwrap() {
                    return 1.0;
                }
                let k = grid.partition_point(|&g| g < t).clamp(1, grid.len() - 1);
                let frac = (t / grid[k - 1]).ln() / (grid[k] / grid[k - 1]).ln();
                cumulative[k - 1] + frac * (cumulative[k] - cumulative[k - 1])
            }
        }
    }

    /// Density at `x`; +∞ at the atom of a point mass.
    pub fn density(&self, x: f64) -> f64 {
        let t = x - self.offset;
        match &self.kind {
            DistKind::PointMass { value } => {
                if t == *value {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            _ if t <= 0.0 => 0.0,
            DistKind::Gamma { shape, rate } => {
                (shape * rate.ln() + (shape - 1.0) * t.ln() - rate * t - ln_gamma(*shape)).exp()
            }
            DistKind::Beta { a, b } => {
                if t >= 1.0 {
                    0.0
                } else {
                    ((a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - ln_beta(*a, *b)).exp()
                }
            }
            DistKind::BetaPrime { a, b, scale } => {
                let s = t / scale;
                ((a - 1.0) * s.ln() - (a + b) * s.ln_1p() - ln_beta(*a, *b)).exp() / scale
            }
            DistKind::Gridded { grid, density, .. } => {
                if t < grid[0] || t > *grid.last().unwrap() {
                    return 0.0;
                }
                // W·density is linear in log W between nodes
                let k = grid.partition_point(|&g| g < t).clamp(1, grid.len() - 1);
                let frac = (t / grid[k - 1]).ln() / (grid[k] / grid[k - 1]).ln();
                let (m0, m1) = (grid[k - 1] * density[k - 1], grid[k] * density[k]);
                (m0 + frac * (m1 - m0)) / t
            }
        }
    }

    /// Rows (W, density, cumulative) for plotting: the grid itself for a
    /// gridded law, the atom for a point mass, otherwise `points` values
    /// spaced evenly in log W between the 1e-6 and 1 − 1e-6 quantiles.
    pub fn tabulate(&self, points: usize) -> Vec<(f64, f64, f64)> {
        match &self.kind {
            DistKind::PointMass { value } => vec![(value + self.offset, f64::INFINITY, 1.0)],
            DistKind::Gridded { grid, density, cumulative, .. } => grid
                .iter()
                .zip(density)
                .zip(cumulative)
                .map(|((g, d), c)| (g + self.offset, *d, *c))
                .collect(),
            _ => {
                let (lo, hi) = (self.quantile(1e-6) - self.offset, self.quantile(1.0 - 1e-6) - self.offset);
                let n = points.max(2);
                (0..n)
                    .map(|k| {
                        let t = lo * (hi / lo).powf(k as f64 / (n - 1) as f64) + self.offset;
                        (t, self.density(t), self.cdf(t))
                    })
                    .collect()
            }
        }
    }

    /// Trapezoid integral (in log W) of a gridded density over its own grid.
    pub fn grid_mass(&self) -> Option<f64> {
        match &self.kind {
            DistKind::Gridded { grid, density, .. } => Some(
                (1..grid.len())
                    .map(|k| {
                        0.5 * (grid[k] * density[k] + grid[k - 1] * density[k - 1]) * (grid[k] / grid[k - 1]).ln()
                    })
                    .sum(),
            ),
            _ => None,
        }
    }

    /// Law of W/(V + W) for a gridded law of W, by change of variables.
    pub(crate) fn gridded_ratio(&self, v: f64) -> Result<Self> {
        match &self.kind {
            DistKind::Gridded { grid, density, .. } => {
                let u: Vec<f64> = grid.iter().map(|w| w / (v + w)).collect();
                let log_d: Vec<f64> = grid
                    .iter()
                    .zip(density)
                    .map(|(w, d)| d.ln() + 2.0 * (v + w).ln() - v.ln())
                    .collect();
                MassDistribution::gridded(u, &log_d)
            }
            _ => Err(Error::InvalidInput("not a gridded law".into())),
        }
    }
}
