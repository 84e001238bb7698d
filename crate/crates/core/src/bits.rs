//! Bit strings and the mixed-radix residue packing used on the wire.
//!
//! A residue vector `(c_0, .., c_{d-1})` with modulus `q` is read as the
//! integer `sum c_i * q^(d-1-i)` (most significant coordinate first) and
//! written big-endian in exactly `ceil(d * log2 q)` bits, the smallest width
//! `b` with `2^b >= q^d`.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-length bit string. Bit 0 is the first bit on the wire and is stored
/// in the most significant position of `bytes[0]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u128, width: u32) {
        assert!(width <= 128);
        for k in (0..width).rev() {
            self.push((value >> k) & 1 == 1);
        }
    }

    /// Reads `width` bits starting at `start` as an unsigned integer.
    pub fn read_bits(&self, start: usize, width: u32) -> u128 {
        assert!(width <= 128 && start + width as usize <= self.len);
        let mut v = 0u128;
        for i in start..start + width as usize {
            v = (v << 1) | self.get(i) as u128;
        }
        v
    }

    pub fn append(&mut self, other: &BitString) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len);
        let mut out = BitString::new();
        for i in start..start + len {
            out.push(self.get(i));
        }
        out
    }

    /// Writes `n` as a `len`-bit big-endian integer.
    pub fn from_biguint(n: &BigUint, len: usize) -> Result<Self> {
        if n.bits() as usize > len {
            return Err(Error::Format(format!(
                "integer of {} bits does not fit in {len} bits",
                n.bits()
            )));
        }
        let nbytes = len.div_ceil(8);
        let pad = nbytes * 8 - len;
        let raw = (n << pad).to_bytes_be();
        let mut bytes = vec![0u8; nbytes];
        if !(raw.len() == 1 && raw[0] == 0) {
            bytes[nbytes - raw.len()..].copy_from_slice(&raw);
        }
        Ok(BitString { bytes, len })
    }

    pub fn to_biguint(&self) -> BigUint {
        let pad = self.bytes.len() * 8 - self.len;
        BigUint::from_bytes_be(&self.bytes) >> pad
    }
}

/// Smallest `b` with `2^b >= q^d`, i.e. `ceil(d * log2 q)` computed exactly.
pub fn mixed_radix_bits(q: u64, d: usize) -> usize {
    assert!(q >= 2);
    if q.is_power_of_two() {
        return d * q.trailing_zeros() as usize;
    }
    if d == 0 {
        return 0;
    }
    let total = BigUint::from(q).pow(d as u32);
    (total - 1u32).bits() as usize
}

/// Packs residues (each `< q`) into exactly [`mixed_radix_bits`] bits.
pub fn pack_mixed_radix(residues: &[u64], q: u64) -> BitString {
    debug_assert!(residues.iter().all(|&r| r < q));
    let len = mixed_radix_bits(q, residues.len());
    if q.is_power_of_two() {
        let w = q.trailing_zeros();
        let mut out = BitString::new();
        for &r in residues {
            out.push_bits(r as u128, w);
        }
        return out;
    }
    let mut n = BigUint::from(0u32);
    for &r in residues {
        n *= q;
        n += r;
    }
    BitString::from_biguint(&n, len).expect("packed value is below q^d")
}

/// Inverse of [`pack_mixed_radix`]. Rejects strings of the wrong length and
/// integers outside `[0, q^d)`.
pub fn unpack_mixed_radix(bits: &BitString, q: u64, d: usize) -> Result<Vec<u64>> {
    if q < 2 {
        return Err(Error::Parameter(format!("modulus must be >= 2, got {q}")));
    }
    let expected = mixed_radix_bits(q, d);
    if bits.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bits, expected {expected} for d = {d}, q = {q}",
            bits.len()
        )));
    }
    if q.is_power_of_two() {
        let w = q.trailing_zeros();
        return Ok((0..d)
            .map(|i| bits.read_bits(i * w as usize, w) as u64)
            .collect());
    }
    let mut n = bits.to_biguint();
    let mut residues = vec![0u64; d];
    let qb = BigUint::from(q);
    for slot in residues.iter_mut().rev() {
        let r = &n % &qb;
        *slot = r.to_u64_digits().first().copied().unwrap_or(0);
        n /= &qb;
    }
    if n.bits() != 0 {
        return Err(Error::Format(format!("packed value exceeds {q}^{d}")));
    }
    Ok(residues)
}
