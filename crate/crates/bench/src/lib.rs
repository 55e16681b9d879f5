//! Shared inputs for the benchmarks in `benches/`.

use missmass::simulate::simulate_model;
use missmass::{GenOrder, ModelParams, Observation};

/// A model-drawn observation over a uniform base measure of size `domain`.
pub fn observation(domain: usize, alpha: f64, b: f64, lambda: f64, seed: u64) -> Observation {
    let x = vec![1.0 / domain as f64; domain];
    let params = ModelParams::new(alpha, b, lambda).expect("valid parameters");
    simulate_model(&x, &params, GenOrder::PThenC, seed)
        .expect("simulation succeeds")
        .observe()
}
