//! Seeding, reduction and worker-pool plumbing shared by the stochastic
//! pipelines.
//!
//! Determinism contract: every stochastic quantity in the crate is a pure
//! function of `(seed, stream index)`. Sample streams are ChaCha8 generators
//! keyed by a SplitMix64 expansion of the pair, and reductions over sample
//! arrays use a fixed chunk size so the result is independent of the worker
//! count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Chunk size of the deterministic mean/sum reduction.
pub const REDUCTION_CHUNK: usize = 1024;

/// SplitMix64 step; used to expand `(seed, stream)` into a 256-bit RNG key.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for a given `(seed, stream)` pair. Distinct streams are
/// independent for all practical purposes; the same pair always reproduces
/// the same draw sequence.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908u64.wrapping_add(stream.wrapping_mul(0x1f83_d9ab));
    state ^= stream.rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stable 64-bit mix of a slice of integers, for deriving per-node RNG
/// streams from structural positions (e.g. game-tree paths).
pub fn mix_stream(parts: &[u64]) -> u64 {
    let mut state = 0x243f_6a88_85a3_08d3u64;
    for &p in parts {
        state ^= p;
        splitmix64(&mut state);
    }
    splitmix64(&mut state)
}

/// Sum with a fixed chunked association order. The result depends only on
/// the data and `REDUCTION_CHUNK`, never on thread scheduling.
pub fn chunked_sum(xs: &[f64]) -> f64 {
    if xs.len() <= REDUCTION_CHUNK {
        return xs.iter().sum();
    }
    let partials: Vec<f64> = xs.chunks(REDUCTION_CHUNK).map(|c| c.iter().sum()).collect();
    chunked_sum(&partials)
}

/// Mean under the fixed reduction order.
pub fn chunked_mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    chunked_sum(xs) / xs.len() as f64
}

/// Mean and standard error of the mean (sample standard deviation / √n),
/// both computed with the fixed reduction order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "stderr needs at least two samples");
    let mean = chunked_mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = chunked_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Number of workers requested through the `PPDE_WORKERS` environment
/// variable, if any. The worker count never affects numerical output.
pub fn env_workers() -> Option<usize> {
    std::env::var("PPDE_WORKERS").ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0)
}

/// Install the global rayon pool honoring `PPDE_WORKERS`. Safe to call more
/// than once; later calls are no-ops.
pub fn install_worker_pool() {
    if let Some(n) = env_workers() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
