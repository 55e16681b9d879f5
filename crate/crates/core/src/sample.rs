//! Datasets, observations, and the summary statistics derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σx = 1`.
pub const X_SUM_TOL: f64 = 1e-12;

/// Spread of `log(p/x)` over `S` below which `p|S` is treated as
/// proportional to `x|S`.
pub const PROPORTIONAL_TOL: f64 = 1e-10;

fn check_x(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidInput("empty domain".into()));
    }
    if let Some(bad) = x.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(format!("x[{bad}] = {} is not a nonnegative number", x[bad])));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > X_SUM_TOL.max(x.len() as f64 * f64::EPSILON) {
        return Err(Error::InvalidInput(format!("x sums to {sum}, not 1")));
    }
    Ok(())
}

/// Full synthetic truth: base measure, masses, and counts over the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetFile", into = "DatasetFile")]
pub struct Dataset {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub c: Vec<u64>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, p: Vec<f64>, c: Vec<u64>) -> Result<Self> {
        if x.len() != p.len() || x.len() != c.len() {
            return Err(Error::InvalidInput(format!(
                "length mismatch: x {}, p {}, c {}",
                x.len(),
                p.len(),
                c.len()
            )));
        }
        check_x(&x)?;
        for i in 0..x.len() {
            if !(p[i].is_finite() && p[i] >= 0.0) {
                return Err(Error::InvalidInput(format!("p[{i}] = {} is not a nonnegative number", p[i])));
            }
            if x[i] == 0.0 && p[i] != 0.0 {
                return Err(Error::InvalidInput(format!("x[{i}] = 0 but p[{i}] = {}", p[i])));
            }
            if p[i] == 0.0 && c[i] != 0 {
                return Err(Error::InvalidInput(format!("p[{i}] = 0 but c[{i}] = {}", c[i])));
            }
        }
        Ok(Self { x, p, c })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Total mass Z.
    pub fn total_mass(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Mass of the points with zero count.
    pub fn missing_mass(&self) -> f64 {
        self.p.iter().zip(&self.c).filter(|(_, &c)| c == 0).map(|(p, _)| p).sum()
    }

    /// What the analyst sees.
    pub fn observe(&self) -> Observation {
        let entries = (0..self.len())
            .filter(|&i| self.c[i] > 0)
            .map(|i| Entry {
                i,
                p: self.p[i],
                c: self.c[i],
            })
            .collect();
        Observation {
            domain_size: self.len(),
            x: self.x.clone(),
            entries,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    domain_size: usize,
    x: Vec<f64>,
    entries: Vec<Entry>,
    p: Vec<f64>,
    c: Vec<u64>,
}

impl TryFrom<DatasetFile> for Dataset {
    type Error = Error;

    fn try_from(f: DatasetFile) -> Result<Self> {
        if f.domain_size != f.x.len() {
            return Err(Error::InvalidInput("domain_size does not match x".into()));
        }
        Dataset::new(f.x, f.p, f.c)
    }
}

impl From<Dataset> for DatasetFile {
    fn from(d: Dataset) -> Self {
        let obs = d.observe();
        DatasetFile {
            domain_size: obs.domain_size,
            x: d.x,
            entries: obs.entries,
            p: d.p,
            c: d.c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub i: usize,
    pub p: f64,
    pub c: u64,
}

/// Sampled points with their revealed masses and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservationFile")]
pub struct Observation {
    pub domain_size: usize,
    pub x: Vec<f64>,
    pub entries: Vec<Entry>,
}

#[derive(Deserialize)]
struct ObservationFile {
    domain_size: usize,
    x: Vec<f64>,
    entries: Vec<Entry>,
}

impl TryFrom<ObservationFile> for Observation {
    type Error = Error;

    fn try_from(f: ObservationFile) -> Result<Self> {
        Observation::new(f.domain_size, f.x, f.entries)
    }
}

impl Observation {
    pub fn new(domain_size: usize, x: Vec<f64>, entries: Vec<Entry>) -> Result<Self> {
        if x.len() != domain_size {
            return Err(Error::InvalidInput(format!(
                "x has {} values for domain of size {domain_size}",
                x.len()
            )));
        }
        check_x(&x)?;
        let mut seen = vec![false; domain_size];
        for e in &entries {
            if e.i >= domain_size {
                return Err(Error::InvalidInput(format!("index {} outside domain", e.i)));
            }
            if std::mem::replace(&mut seen[e.i], true) {
                return Err(Error::InvalidInput(format!("index {} repeated", e.i)));
            }
            if e.c == 0 {
                return Err(Error::InvalidInput(format!("entry {} has zero count", e.i)));
            }
            if !(e.p > 0.0 && e.p.is_finite()) {
                return Err(Error::InvalidInput(format!("entry {} has mass {}", e.i, e.p)));
            }
            if x[e.i] == 0.0 {
                return Err(Error::InvalidInput(format!("entry {} has x = 0", e.i)));
            }
        }
        Ok(Self {
            domain_size,
            x,
            entries,
        })
    }

    /// Number of distinct sampled points.
    pub fn m(&self) -> usize {
        self.entries.len()
    }

    /// Total count.
    pub fn n(&self) -> u64 {
        self.entries.iter().map(|e| e.c).sum()
    }

    /// Observed mass.
    pub fn v(&self) -> f64 {
        self.entries.iter().map(|e| e.p).sum()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.p).collect()
    }

    pub fn max_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.p).fold(0.0, f64::max)
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.entries.is_empty() {
            Err(Error::NoObservations)
        } else {
            Ok(())
        }
    }

    /// The same observation with every mass multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Observation {
        let entries = self
            .entries
            .iter()
            .map(|e| Entry { p: e.p * s, ..*e })
            .collect();
        Observation {
            entries,
            ..self.clone()
        }
    }
}

/// Sufficient statistics of an observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub m: usize,
    pub n: u64,
    /// Observed mass Σ_S p.
    pub v: f64,
    /// Σ_S x log p.
    pub u: f64,
    /// Σ_S x log x.
    pub t: f64,
    /// Σ_S x.
    pub x: f64,
    /// 1 − X.
    pub y: f64,
    /// Φ_k: number of points sampled exactly k times.
    pub phi: BTreeMap<u64, usize>,
    pub delta_s: f64,
    /// `p|S` proportional to `x|S`.
    pub delta_s_zero: bool,
}

impl SummaryStats {
    pub fn phi(&self, k: u64) -> usize {
        self.phi.get(&k).copied().unwrap_or(0)
    }

    /// V/X; the proportionality coefficient r when Δ_S = 0.
    pub fn mass_ratio(&self) -> f64 {
        self.v / self.x
    }

    /// Y = 0 up to rounding.
    pub fn y_zero(&self) -> bool {
        self.y <= 1e-14
    }
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

pub fn summarize(obs: &Observation) -> Result<SummaryStats> {
    obs.require_nonempty()?;
    let mut phi = BTreeMap::new();
    let (mut n, mut v, mut u, mut t, mut x) = (0u64, 0.0, 0.0, 0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for e in &obs.entries {
        let xi = obs.x[e.i];
        *phi.entry(e.c).or_insert(0) += 1;
        n += e.c;
        v += e.p;
        let lp = e.p.ln();
        let lx = xi.ln();
        u += xi * lp;
        t += xi * lx;
        x += xi;
        lo = lo.min(lp - lx);
        hi = hi.max(lp - lx);
    }
    // Sum the complement over unsampled points so Y keeps full precision when X ≈ 1.
    let mut in_s = vec![false; obs.domain_size];
    for e in &obs.entries {
        in_s[e.i] = true;
    }
    let y: f64 = obs
        .x
        .iter()
        .zip(&in_s)
        .filter(|(_, &s)| !s)
        .map(|(xi, _)| xi)
        .sum();
    let delta_s_zero = hi - lo <= PROPORTIONAL_TOL;
    let delta_s = if delta_s_zero {
        0.0
    } else {
        (t - xlogx(x) - u + x * v.ln()).max(0.0)
    };
    Ok(SummaryStats {
        m: obs.m(),
        n,
        v,
        u,
        t,
        x,
        y,
        phi,
        delta_s,
        delta_s_zero,
    })
}

/// Δ(W) = T + Y log Y − U − Y log W + log(V + W), with 0·log 0 = 0.
///
/// Returns +∞ for W = 0 when Y > 0.
pub fn kl_delta(stats: &SummaryStats, w: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::InvalidInput(format!("W = {w} is negative")));
    }
    if stats.y_zero() {
        if w != 0.0 {
            return Err(Error::InvalidInput("W must be 0 when Y = 0".into()));
        }
        return Ok(stats.t - stats.u + stats.v.ln());
    }
    if w == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(stats.t + xlogx(stats.y) - stats.u - stats.y * w.ln() + (stats.v + w).ln())
}
