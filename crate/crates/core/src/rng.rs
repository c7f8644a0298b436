//! Seed splitting for reproducible parallel runs.
//!
//! Every run draws from `ChaCha8Rng::seed_from_u64(master_seed)` switched to
//! stream `run_index`. Streams never overlap, so runs can execute in any order
//! or in parallel and still see identical draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(master_seed: u64, run_index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index);
    rng
}

/// A point drawn uniformly from the probability simplex of dimension `k`
/// (Dirichlet(1) via normalized Exp(1) draws).
pub fn simplex_point<R: rand::Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Stream ids used inside a single run, so that e.g. the noise sequence does
/// not shift when the sampler consumes a different number of draws.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const SAMPLING: u64 = 2;
    pub const ACTOR: u64 = 3;
    pub const FEATURES: u64 = 4;
    pub const WARM_START: u64 = 5;
}
