//! A ring of Ising spins in a seeded random field, sampled at several
//! temperatures at once. Small enough to enumerate, so every total is exact.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{simulate_explicit, stream, Protocol};
use crate::error::{Error, Result};
use crate::sample::Dataset;

/// Largest ring that is enumerated (2^20 states).
pub const MAX_SPINS: u32 = 20;

/// Stream for the random field, kept apart from the sampling replicates.
const FIELD_REPLICATE: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    /// Ring length; the state space has 2^spins points.
    pub spins: u32,
    /// One mixture component per temperature; `f64::INFINITY` is allowed.
    pub temperatures: Vec<f64>,
    /// Ferromagnetic pair coupling.
    pub coupling: f64,
    /// Standard deviation of the random field.
    pub field: f64,
    /// Mixture weights w(j); uniform when absent.
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyPhysics {
    pub energy: Vec<f64>,
    /// r(i, j) = exp(−(E(i) − E_min)/T_j)
    pub r: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    /// p(i) = Σ_j r(i, j) w(j)
    pub p: Vec<f64>,
    /// R(j) = Σ_i r(i, j)
    pub r_totals: Vec<f64>,
    /// Z = Σ_j R(j) w(j)
    pub z: f64,
}

impl ToyPhysics {
    pub fn n_states(&self) -> usize {
        self.p.len()
    }

    /// 1 / Σ (p/Z)²
    pub fn n_effective(&self) -> f64 {
        1.0 / self.p.iter().map(|p| (p / self.z).powi(2)).sum::<f64>()
    }

    /// Counts over the exact masses, with uniform base measure.
    pub fn sample(&self, protocol: Protocol, seed: u64, replicate: u64) -> Result<Dataset> {
        let n = self.n_states();
        simulate_explicit(&vec![1.0 / n as f64; n], &self.p, protocol, seed, replicate)
    }
}

pub fn toy_physics(spec: &ToySpec, seed: u64) -> Result<ToyPhysics> {
    if spec.spins == 0 || spec.spins > MAX_SPINS {
        return Err(Error::SizeLimit(format!("{} spins; at most {MAX_SPINS} are enumerated", spec.spins)));
    }
    if spec.temperatures.is_empty() || spec.temperatures.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidInput("temperatures must be positive".into()));
    }
    if !(spec.coupling.is_finite() && spec.field.is_finite() && spec.field >= 0.0) {
        return Err(Error::InvalidInput("coupling and field must be finite, field nonnegative".into()));
    }
    let j = spec.temperatures.len();
    let w = match &spec.weights {
        Some(w) if w.len() != j || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) => {
            return Err(Error::InvalidInput("one positive weight per temperature".into()));
        }
        Some(w) => w.clone(),
        None => vec![1.0 / j as f64; j],
    };
    let l = spec.spins as usize;
    let mut rng = stream(seed, FIELD_REPLICATE, 0);
    let h: Vec<f64> = if spec.field > 0.0 {
        let normal = Normal::new(0.0, spec.field).expect("positive sd");
        (0..l).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; l]
    };
    let spin = |s: usize, k: usize| if s >> k & 1 == 1 { 1.0 } else { -1.0 };
    let energy: Vec<f64> = (0..1usize << l)
        .map(|s| {
            (0..l)
                .map(|k| -spec.coupling * spin(s, k) * spin(s, (k + 1) % l) - h[k] * spin(s, k))
                .sum()
        })
        .collect();
    let e_min = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let r: Vec<Vec<f64>> = energy
        .iter()
        .map(|e| spec.temperatures.iter().map(|t| (-(e - e_min) / t).exp()).collect())
        .collect();
    let p: Vec<f64> = r.iter().map(|row| row.iter().zip(&w).map(|(r, w)| r * w).sum()).collect();
    let r_totals: Vec<f64> = (0..j).map(|col| r.iter().map(|row| row[col]).sum()).collect();
    let z = r_totals.iter().zip(&w).map(|(r, w)| r * w).sum();
    Ok(ToyPhysics {
        energy,
        r,
        w,
        p,
        r_totals,
        z,
    })
}
