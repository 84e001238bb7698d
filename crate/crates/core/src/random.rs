//! Shared randomness.
//!
//! Every machine holds the same master seed. Offsets, rotation signs, hash
//! keys and leader choices are all derived from `(seed, domain, round,
//! iteration)` through SHA-256, so any party can recompute any stream without
//! communication and no two purposes ever share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Purpose tag separating independent random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    Offset = 1,
    Rounding = 2,
    Rotation = 3,
    Checksum = 4,
    Coloring = 5,
    SublinearOffset = 6,
    Leader = 7,
    Tree = 8,
    Private = 9,
    Data = 10,
}

/// Identifier of one protocol step. Protocols derive child ids so that every
/// message in a run gets its own offset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoundId(pub u64);

impl RoundId {
    pub fn new(round: u64) -> Self {
        RoundId(round)
    }

    /// Deterministic sub-identifier for `(tag, index)` below this round.
    pub fn child(self, tag: u64, index: u64) -> RoundId {
        let a = splitmix64(self.0 ^ 0xA076_1D64_78BD_642F);
        let b = splitmix64(a ^ tag.wrapping_mul(0xE703_7ED1_A0B4_28DB));
        RoundId(splitmix64(b ^ index.wrapping_mul(0x8EBC_6AF0_9C88_C6E3)))
    }
}

impl From<u64> for RoundId {
    fn from(r: u64) -> Self {
        RoundId(r)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed known to all machines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SharedRandomness {
    seed: u64,
}

impl SharedRandomness {
    pub fn new(seed: u64) -> Self {
        SharedRandomness { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn derive(&self, domain: Domain, round: RoundId, iteration: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"lattice-dme/v1");
        h.update(self.seed.to_le_bytes());
        h.update([domain as u8]);
        h.update(round.0.to_le_bytes());
        h.update(iteration.to_le_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }

    /// Random stream for `(domain, round, iteration)`.
    pub fn stream(&self, domain: Domain, round: RoundId, iteration: u64) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.derive(domain, round, iteration))
    }

    /// Key for a keyed hash drawn fresh per `(domain, round, iteration)`.
    pub fn hash_key(&self, domain: Domain, round: RoundId, iteration: u64) -> HashKey {
        HashKey(self.derive(domain, round, iteration))
    }
}

/// Key of a keyed hash function (a random function from the hash family).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashKey([u8; 32]);

impl HashKey {
    /// 256-bit digest of an integer vector under this key.
    pub fn digest_i64(&self, values: &[i64]) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((values.len() as u64).to_le_bytes());
        for v in values {
            h.update(v.to_le_bytes());
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }

    /// Digest of a single integer, truncated to its low `bits` bits (`bits <= 128`).
    pub fn hash_u64_to_bits(&self, value: u64, bits: u32) -> u128 {
        assert!(bits <= 128);
        let mut h = Sha256::new();
        h.update(self.0);
        h.update(value.to_le_bytes());
        let digest = h.finalize();
        let mut word = [0u8; 16];
        word.copy_from_slice(&digest[..16]);
        let v = u128::from_le_bytes(word);
        if bits == 128 {
            v
        } else {
            v & ((1u128 << bits) - 1)
        }
    }
}
