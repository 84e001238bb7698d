//! Common interface for every vector quantizer the protocols can run.

use crate::bits::BitString;
use crate::error::Result;
use crate::random::RoundId;

/// Output of an encoder: the wire message and the value a correct decoder
/// recovers from it. The second part never crosses the wire; the simulator
/// uses it to count decode failures.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub bits: BitString,
    pub value: Vec<f64>,
}

/// A quantizer that turns a vector into bits and back. Decoders may use the
/// receiver's own vector as side information; stateless schemes ignore it.
pub trait VectorCodec: Send + Sync {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    fn encode(&self, x: &[f64], round: RoundId) -> Result<Encoded>;

    fn decode(&self, msg: &BitString, x_ref: &[f64], round: RoundId) -> Result<Vec<f64>>;
}

/// Sends vectors as raw 64-bit floats. Used as the unquantized reference.
#[derive(Clone, Debug)]
pub struct FullPrecision {
    dim: usize,
}

impl FullPrecision {
    pub fn new(dim: usize) -> Self {
        FullPrecision { dim }
    }
}

impl VectorCodec for FullPrecision {
    fn name(&self) -> String {
        "none".into()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, x: &[f64], _round: RoundId) -> Result<Encoded> {
        crate::error::check_dim(self.dim, x.len())?;
        Ok(Encoded {
            bits: floats_to_bits(x),
            value: x.to_vec(),
        })
    }

    fn decode(&self, msg: &BitString, _x_ref: &[f64], _round: RoundId) -> Result<Vec<f64>> {
        bits_to_floats(msg, 0, self.dim)
    }
}

pub(crate) fn floats_to_bits(x: &[f64]) -> BitString {
    let mut bits = BitString::new();
    for v in x {
        bits.push_bits(v.to_bits() as u128, 64);
    }
    bits
}

/// Reads `count` IEEE doubles starting at bit `start`.
pub(crate) fn bits_to_floats(msg: &BitString, start: usize, count: usize) -> Result<Vec<f64>> {
    if msg.len() < start + 64 * count {
        return Err(crate::error::Error::Format(format!(
            "message of {} bits too short for {count} floats at offset {start}",
            msg.len()
        )));
    }
    Ok((0..count)
        .map(|i| f64::from_bits(msg.read_bits(start + 64 * i, 64) as u64))
        .collect())
}
