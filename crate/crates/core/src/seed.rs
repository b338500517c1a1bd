//! Named sub-seed derivation.
//!
//! Every random stream in the pipeline is derived from one master seed and
//! a stream label plus an index path, so that any work item can be
//! re-created independently of scheduling order.
//!
//! Streams used by the crate:
//!
//! | label        | path                         | consumer                          |
//! |--------------|------------------------------|-----------------------------------|
//! | `partition`  | `[repeat, attempt]`          | stratified fold assignment        |
//! | `model`      | `[seed index]`               | forest seeds shared across folds  |
//! | `tree`       | `[tree index]`               | per-tree bootstrap + splits       |
//! | `subset`     | `[repeat, fold, sample]`     | learning-curve subsets            |
//! | `bootstrap`  | `[iteration]`                | BBC-CV resampling                 |
//! | `rfe`        | `[repeat, fold]`             | inner RFE folds                   |
//! | `generator`  | `[patient]` and others       | synthetic cohorts                 |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `master`, a stream label and an index path.
pub fn derive(master: u64, label: &str, path: &[u64]) -> u64 {
    // FNV-1a over the label keeps the mapping stable across releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut state = splitmix(master ^ splitmix(h));
    for &p in path {
        state = splitmix(state ^ splitmix(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    state
}

pub fn rng(master: u64, label: &str, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(master, label, path))
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
