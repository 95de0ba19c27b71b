//! Seed expansion.
//!
//! Every random choice in a run derives from one user-facing seed. A
//! component asks for its own stream with [`derive`], which mixes the base
//! seed with a fixed component tag (and an optional index such as the stage
//! number) through SplitMix64. The rule is stable across releases so that
//! reruns reproduce bitwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Component tags. Changing any of these changes every downstream result.
pub mod tag {
    pub const SPLIT: u64 = 0x5350_4c49_54;
    pub const INIT: u64 = 0x494e_4954;
    pub const DROPOUT: u64 = 0x4452_4f50;
    pub const CALIBRATOR: u64 = 0x4341_4c49_42;
    pub const SBM: u64 = 0x5342_4d;
    pub const STAGE: u64 = 0x5354_4147_45;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed for `component` (one of [`tag`]) and `index` under `seed`.
pub fn derive(seed: u64, component: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ component) ^ index)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, component: u64, index: u64) -> Rng {
    rng(derive(seed, component, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_separates_components() {
        assert_eq!(derive(7, tag::INIT, 0), derive(7, tag::INIT, 0));
        assert_ne!(derive(7, tag::INIT, 0), derive(7, tag::DROPOUT, 0));
        assert_ne!(derive(7, tag::INIT, 0), derive(7, tag::INIT, 1));
        assert_ne!(derive(7, tag::INIT, 0), derive(8, tag::INIT, 0));
    }
}
