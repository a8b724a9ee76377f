//! Per-replica random streams.
//!
//! Every replica gets a ChaCha8 generator whose key is derived from
//! `(root_seed, experiment)` and whose stream id is the replica index, so a
//! replica's draws never depend on which worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for replica `replica` of experiment `experiment`.
pub fn replica_rng(root_seed: u64, experiment: u64, replica: u64) -> ReplicaRng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(root_seed) ^ splitmix64(experiment.wrapping_add(0x5851_f42d_4c95_7f2d));
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}
