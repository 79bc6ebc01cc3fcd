//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream. The key is
//! derived from the run seed and the stream number from `(role, trial)`, so
//! changing how many draws one role makes never shifts another role's values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in transcript headers.
pub const PRNG_NAME: &str = "chacha8/seed_from_u64/stream=(role<<32|trial)";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    Forecaster = 1,
    Outcome = 2,
    Tau = 3,
    Adversary = 4,
    CaseGen = 5,
}

pub fn stream(seed: u64, role: Role, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((role as u64) << 32) | (trial & 0xffff_ffff));
    rng
}
