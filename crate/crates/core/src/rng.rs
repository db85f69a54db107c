//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by a
//! `(base_seed, stream_id)` pair. Child streams are derived with
//! [`RngContract::derive`], a pure function of the parent, a purpose tag and an
//! index, so a replication or bootstrap batch sees the same numbers no matter
//! which thread evaluates it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Innovations = 0x01,
    Coupling = 0x02,
    Replication = 0x03,
    Bootstrap = 0x04,
    Permutation = 0x05,
    Gaussian = 0x06,
    Oracle = 0x07,
    Cell = 0x08,
    Auxiliary = 0x09,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngContract {
    pub base_seed: u64,
    pub stream_id: u64,
}

impl RngContract {
    pub const fn new(base_seed: u64) -> Self {
        Self {
            base_seed,
            stream_id: 0,
        }
    }

    pub const fn with_stream(base_seed: u64, stream_id: u64) -> Self {
        Self {
            base_seed,
            stream_id,
        }
    }

    pub fn derive(&self, purpose: Purpose, index: u64) -> Self {
        let tagged = splitmix64(self.stream_id ^ (purpose as u64).wrapping_mul(0xA24B_AED4_963E_E407));
        Self {
            base_seed: self.base_seed,
            stream_id: splitmix64(tagged ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
