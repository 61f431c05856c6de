//! Counter-based control generator used wherever the toolkit needs entropy
//! that is independent of the generator family under test.
//!
//! The mixer is the splitmix64 finalizer: a 64-bit additive counter
//! (increment `0x9e3779b97f4a7c15`) followed by two xor-shift-multiply
//! rounds and a closing xor-shift. It is not F2-linear, so it cannot
//! reproduce the lagged-equality structure this crate analyzes.

use serde::{Deserialize, Serialize};

const INCREMENT: u64 = 0x9e37_79b9_7f4a_7c15;
const MULT_A: u64 = 0xbf58_476d_1ce4_e5b9;
const MULT_B: u64 = 0x94d0_49bb_1331_11eb;

/// Anything that can hand out 64-bit entropy words.
pub trait WordSource {
    fn next_u64(&mut self) -> u64;
}

/// Applies the splitmix64 finalizer to a single value. Also used to derive
/// independent per-trial substreams from a base seed and a trial index.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MULT_A);
    z = (z ^ (z >> 27)).wrapping_mul(MULT_B);
    z ^ (z >> 31)
}

/// Derives the seed of trial `index` from a base entropy seed. The mapping is
/// fixed so that partitioning a trial loop across workers cannot change any
/// per-trial outcome.
#[inline]
pub fn trial_seed(entropy_seed: u64, index: u64) -> u64 {
    mix64(entropy_seed ^ mix64(index.wrapping_add(1).wrapping_mul(INCREMENT)))
}

/// Deterministic counter-based stream: `state += INCREMENT; out = mix64(state)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ControlStream {
    state: u64,
}

impl ControlStream {
    pub fn new(seed: u64) -> Self {
        ControlStream { state: seed }
    }

    /// The 32-bit output stream is the full mix truncated to its low half.
    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        self.next_u64() as u32
    }
}

impl WordSource for ControlStream {
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(INCREMENT);
        mix64(self.state)
    }
}
