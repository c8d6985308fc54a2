//! Reproducible random substreams.
//!
//! Every stochastic quantity is drawn from a ChaCha stream keyed by a
//! 64-bit master seed and addressed by a 64-bit stream index. ChaCha's
//! native stream id gives 2^64 independent, non-overlapping sequences per
//! key, so a replicate's draws depend only on `(seed, index)` and never on
//! which thread ran it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream handed to samplers.
pub type Stream = ChaCha8Rng;

/// Substream `index` of the generator keyed by `master_seed`.
pub fn rng_stream(master_seed: u64, index: u64) -> Stream {
    let mut key = [0u8; 32];
    let mut state = master_seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Labels separating the seed spaces of independent consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Purpose {
    Design,
    StudyReplicate,
    EnvelopeReplicate,
}

impl Purpose {
    fn label(self) -> u64 {
        match self {
            Purpose::Design => 0x6465_7369_676e,
            Purpose::StudyReplicate => 0x7374_7564_79,
            Purpose::EnvelopeReplicate => 0x656e_7665_6c6f_7065,
        }
    }
}

const ATTEMPT_SHIFT: u32 = 40;

/// Stream for `replicate`, `attempt` of a given purpose.
pub(crate) fn replicate_stream(master_seed: u64, purpose: Purpose, replicate: u64, attempt: u64) -> Stream {
    debug_assert!(replicate < (1 << ATTEMPT_SHIFT));
    let key = mix64(master_seed ^ mix64(purpose.label()));
    rng_stream(key, (attempt << ATTEMPT_SHIFT) | replicate)
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
