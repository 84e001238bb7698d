//! Reference quantizers: QSGD-style stochastic quantization and the
//! Hadamard-rotated uniform quantizer.
//!
//! Wire format, per bucket of consecutive coordinates:
//!
//! * `l2`: one float (the bucket's l2 norm), then per coordinate a sign bit
//!   followed by a level index of `ceil(log2 levels)` bits.
//! * `coordinate_range`: two floats (bucket min, then max), then per
//!   coordinate a level index of `ceil(log2 levels)` bits.
//!
//! Floats are IEEE binary64 or binary32 depending on `float_bits`. The scale
//! is rounded to the transmitted precision before quantizing, so decoding is
//! exactly unbiased.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{mixed_radix_bits, BitString};
use crate::codec::{Encoded, VectorCodec};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::random::{Domain, RoundId, SharedRandomness};
use crate::rotation::{RotatedCodec, RotationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    L2,
    CoordinateRange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub levels: u64,
    pub mode: ScaleMode,
    /// 64 or 32.
    pub float_bits: u32,
    /// Coordinates per scale; `None` uses one bucket for the whole vector.
    pub bucket: Option<usize>,
}

impl BaselineParams {
    pub fn new(levels: u64, mode: ScaleMode) -> Result<Self> {
        let p = BaselineParams {
            levels,
            mode,
            float_bits: 64,
            bucket: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Parameter(format!("levels must be >= 2, got {}", self.levels)));
        }
        if self.float_bits != 64 && self.float_bits != 32 {
            return Err(Error::Parameter(format!("float_bits must be 32 or 64, got {}", self.float_bits)));
        }
        if self.bucket == Some(0) {
            return Err(Error::Parameter("bucket size must be positive".into()));
        }
        Ok(())
    }

    fn level_bits(&self) -> u32 {
        mixed_radix_bits(self.levels, 1) as u32
    }

    /// Payload bits per coordinate, excluding scale floats.
    pub fn bits_per_coordinate(&self) -> usize {
        self.level_bits() as usize + (self.mode == ScaleMode::L2) as usize
    }

    fn floats_per_bucket(&self) -> usize {
        match self.mode {
            ScaleMode::L2 => 1,
            ScaleMode::CoordinateRange => 2,
        }
    }

    fn buckets(&self, d: usize) -> usize {
        d.div_ceil(self.bucket.unwrap_or(d).max(1))
    }

    /// Exact message length for dimension `d`.
    pub fn message_bits(&self, d: usize) -> usize {
        d * self.bits_per_coordinate() + self.buckets(d) * self.floats_per_bucket() * self.float_bits as usize
    }

    /// Smallest transmittable value `>= v` (`up`) or largest `<= v`, so the
    /// rounded scale still brackets every coordinate.
    fn round_float(&self, v: f64, up: bool) -> f64 {
        if self.float_bits == 64 {
            return v;
        }
        let f = v as f32;
        let r = match (f as f64).partial_cmp(&v) {
            Some(std::cmp::Ordering::Less) if up => f.next_up(),
            Some(std::cmp::Ordering::Greater) if !up => f.next_down(),
            _ => f,
        };
        r as f64
    }

    fn push_float(&self, bits: &mut BitString, v: f64) {
        if self.float_bits == 32 {
            bits.push_bits((v as f32).to_bits() as u128, 32);
        } else {
            bits.push_bits(v.to_bits() as u128, 64);
        }
    }

    fn read_float(&self, bits: &BitString, at: usize) -> f64 {
        if self.float_bits == 32 {
            f32::from_bits(bits.read_bits(at, 32) as u32) as f64
        } else {
            f64::from_bits(bits.read_bits(at, 64) as u64)
        }
    }
}

/// Rounds `u` in `[0, top]` to `floor(u)` or `floor(u) + 1` with the right
/// probabilities.
fn stochastic_level<R: Rng + ?Sized>(u: f64, top: u64, rng: &mut R) -> u64 {
    let u = u.clamp(0.0, top as f64);
    let lo = u.floor();
    let up = rng.random::<f64>() < u - lo;
    ((lo as u64) + up as u64).min(top)
}

pub fn qsgd_encode<R: Rng + ?Sized>(x: &[f64], params: &BaselineParams, rng: &mut R) -> Result<BitString> {
    params.validate()?;
    check_finite(x)?;
    let top = params.levels - 1;
    let lb = params.level_bits();
    let mut bits = BitString::new();
    for chunk in x.chunks(params.bucket.unwrap_or(x.len()).max(1)) {
        match params.mode {
            ScaleMode::L2 => {
                let norm = params.round_float(chunk.iter().map(|v| v * v).sum::<f64>().sqrt(), true);
                params.push_float(&mut bits, norm);
                for &v in chunk {
                    bits.push(v < 0.0);
                    let level = if norm > 0.0 {
                        stochastic_level(v.abs() / norm * top as f64, top, rng)
                    } else {
                        0
                    };
                    bits.push_bits(level as u128, lb);
                }
            }
            ScaleMode::CoordinateRange => {
                let lo = params.round_float(chunk.iter().copied().fold(f64::INFINITY, f64::min), false);
                let hi = params.round_float(chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max), true);
                params.push_float(&mut bits, lo);
                params.push_float(&mut bits, hi);
                let width = hi - lo;
                for &v in chunk {
                    let level = if width > 0.0 {
                        stochastic_level((v - lo) / width * top as f64, top, rng)
                    } else {
                        0
                    };
                    bits.push_bits(level as u128, lb);
                }
            }
        }
    }
    Ok(bits)
}

pub fn qsgd_decode(msg: &BitString, params: &BaselineParams, d: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if msg.len() != params.message_bits(d) {
        return Err(Error::Format(format!(
            "message has {} bits, expected {}",
            msg.len(),
            params.message_bits(d)
        )));
    }
    let top = (params.levels - 1) as f64;
    let lb = params.level_bits();
    let fb = params.float_bits as usize;
    let size = params.bucket.unwrap_or(d).max(1);
    let mut out = Vec::with_capacity(d);
    let mut at = 0;
    while out.len() < d {
        let count = size.min(d - out.len());
        match params.mode {
            ScaleMode::L2 => {
                let norm = params.read_float(msg, at);
                at += fb;
                for _ in 0..count {
                    let negative = msg.get(at);
                    let level = msg.read_bits(at + 1, lb) as f64;
                    at += 1 + lb as usize;
                    let mag = norm * level / top;
                    out.push(if negative { -mag } else { mag });
                }
            }
            ScaleMode::CoordinateRange => {
                let lo = params.read_float(msg, at);
                let hi = params.read_float(msg, at + fb);
                at += 2 * fb;
                for _ in 0..count {
                    let level = msg.read_bits(at, lb) as f64;
                    at += lb as usize;
                    // endpoints exactly, so a coordinate at the min or max is
                    // reproduced without rounding error
                    out.push(if level == 0.0 {
                        lo
                    } else if level == top {
                        hi
                    } else {
                        lo + (hi - lo) * level / top
                    });
                }
            }
        }
    }
    Ok(out)
}

/// [`VectorCodec`] wrapper. Rounding uses the sender's private stream for
/// the round, so runs are reproducible.
#[derive(Clone, Debug)]
pub struct QsgdCodec {
    params: BaselineParams,
    dim: usize,
    shared: SharedRandomness,
}

impl QsgdCodec {
    pub fn new(params: BaselineParams, dim: usize, shared: SharedRandomness) -> Result<Self> {
        params.validate()?;
        Ok(QsgdCodec { params, dim, shared })
    }

    pub fn params(&self) -> &BaselineParams {
        &self.params
    }
}

impl VectorCodec for QsgdCodec {
    fn name(&self) -> String {
        match self.params.mode {
            ScaleMode::L2 => "qsgd_l2".into(),
            ScaleMode::CoordinateRange => "qsgd_range".into(),
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, x: &[f64], round: RoundId) -> Result<Encoded> {
        check_dim(self.dim, x.len())?;
        let mut rng = self.shared.stream(Domain::Private, round, 0);
        let bits = qsgd_encode(x, &self.params, &mut rng)?;
        let value = qsgd_decode(&bits, &self.params, self.dim)?;
        Ok(Encoded { bits, value })
    }

    fn decode(&self, msg: &BitString, _x_ref: &[f64], _round: RoundId) -> Result<Vec<f64>> {
        qsgd_decode(msg, &self.params, self.dim)
    }
}

/// Hadamard baseline: rotate with the shared `HD`, then quantize each
/// coordinate uniformly between the rotated vector's min and max.
pub fn hadamard_codec(d: usize, levels: u64, shared: SharedRandomness) -> Result<RotatedCodec<QsgdCodec>> {
    hadamard_codec_with(d, BaselineParams::new(levels, ScaleMode::CoordinateRange)?, shared)
}

pub fn hadamard_codec_with(d: usize, params: BaselineParams, shared: SharedRandomness) -> Result<RotatedCodec<QsgdCodec>> {
    let rotation = RotationSpec::new(d, &shared)?;
    let inner = QsgdCodec::new(params, rotation.padded_dim(), shared)?;
    RotatedCodec::new(rotation, inner)
}
