//! Pieces shared by the training loops: codec construction, one quantized
//! averaging step, and distance bookkeeping.

use crate::baselines::{hadamard_codec, BaselineParams, QsgdCodec, ScaleMode};
use crate::codec::{FullPrecision, VectorCodec};
use crate::error::Result;
use crate::protocols::{
    allgather_exchange, linf_distance, max_pairwise_linf, star_exchange, Phase, SimNetwork, MIN_Y, TAG_EXCHANGE,
    TAG_UP,
};
use crate::quantizer::{EncodeMode, LatticeCodec, QuantParams};
use crate::random::{RoundId, SharedRandomness};
use crate::rotation::{RotatedCodec, RotationSpec};

use super::config::QuantizerChoice;

/// Bits used to send `y` or another scalar.
pub(crate) const FLOAT_BITS: u64 = 64;

/// Codec for `choice`. `y` is the distance bound in the codec's own space
/// (after rotation for `lattice+rotation`); QSGD variants use `q` levels.
pub fn build_codec(
    choice: QuantizerChoice,
    q: u64,
    y: f64,
    d: usize,
    shared: SharedRandomness,
) -> Result<Box<dyn VectorCodec>> {
    let y = y.max(MIN_Y);
    Ok(match choice {
        QuantizerChoice::None => Box::new(FullPrecision::new(d)),
        QuantizerChoice::Lattice => Box::new(LatticeCodec::new(QuantParams::new(
            q,
            y,
            d,
            shared,
            EncodeMode::SharedOffset,
        )?)),
        QuantizerChoice::LatticeRotation => {
            let rot = RotationSpec::new(d, &shared)?;
            let inner = QuantParams::new(q, y, rot.padded_dim(), shared, EncodeMode::SharedOffset)?;
            Box::new(RotatedCodec::new(rot, LatticeCodec::new(inner))?)
        }
        QuantizerChoice::QsgdL2 => Box::new(QsgdCodec::new(BaselineParams::new(q, ScaleMode::L2)?, d, shared)?),
        QuantizerChoice::QsgdRange => Box::new(QsgdCodec::new(
            BaselineParams::new(q, ScaleMode::CoordinateRange)?,
            d,
            shared,
        )?),
        QuantizerChoice::Hadamard => Box::new(hadamard_codec(d, q, shared)?),
    })
}

/// Result of one quantized averaging step.
pub(crate) struct Step {
    pub estimate: Vec<f64>,
    /// `Q(x_i)`, the values each machine's message decodes to.
    pub quantized: Vec<Vec<f64>>,
    pub bits: u64,
    pub overhead_bits: u64,
    pub decode_failures: u64,
}

/// Averages `inputs` through the codec: the two-machine exchange for
/// `n = 2`, the star otherwise. `overhead` is charged as calibration and
/// control traffic before the exchange.
pub(crate) fn quantized_average(
    inputs: Vec<Vec<f64>>,
    codec: &dyn VectorCodec,
    seed: u64,
    round: RoundId,
    overhead: &[(Phase, usize, usize, u64)],
) -> Result<Step> {
    let n = inputs.len();
    let mut net = SimNetwork::new(inputs, seed)?;
    for &(phase, from, to, bits) in overhead {
        net.charge(phase, from, to, bits, "scalar");
    }
    let (res, tag) = if n == 2 {
        (allgather_exchange(&mut net, codec, round, None)?, TAG_EXCHANGE)
    } else {
        (star_exchange(&mut net, codec, round, None)?, TAG_UP)
    };
    let quantized = (0..n)
        .map(|u| Ok(codec.encode(net.input(u), round.child(tag, u as u64))?.value))
        .collect::<Result<Vec<_>>>()?;
    let meter = net.meter();
    Ok(Step {
        estimate: res.estimate().to_vec(),
        quantized,
        bits: meter.total_sent(),
        overhead_bits: meter.overhead_sent().iter().sum(),
        decode_failures: res.diagnostics.decode_failures as u64,
    })
}

/// Largest pairwise l-inf distance, measured after `rotation` when given.
pub(crate) fn spread(vectors: &[Vec<f64>], rotation: Option<&RotationSpec>) -> Result<f64> {
    match rotation {
        None => Ok(max_pairwise_linf(vectors)),
        Some(r) => {
            let rotated = vectors.iter().map(|v| r.rotate(v)).collect::<Result<Vec<_>>>()?;
            Ok(max_pairwise_linf(&rotated))
        }
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64], rotation: Option<&RotationSpec>) -> Result<f64> {
    match rotation {
        None => Ok(linf_distance(a, b)),
        Some(r) => Ok(linf_distance(&r.rotate(a)?, &r.rotate(b)?)),
    }
}

/// Rotation whose space `y` is measured in for `choice`.
pub(crate) fn y_rotation(choice: QuantizerChoice, d: usize, shared: &SharedRandomness) -> Result<Option<RotationSpec>> {
    Ok(match choice {
        QuantizerChoice::LatticeRotation => Some(RotationSpec::new(d, shared)?),
        _ => None,
    })
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn l2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn range(a: &[f64]) -> f64 {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = a.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Calibration traffic: every machine sends its vector at full precision to
/// machine 0, which replies with `y`.
pub(crate) fn calibration_charges(n: usize, d: usize) -> Vec<(Phase, usize, usize, u64)> {
    let mut c: Vec<_> = (1..n).map(|u| (Phase::Calibration, u, 0, FLOAT_BITS * d as u64)).collect();
    c.extend((1..n).map(|v| (Phase::Calibration, 0, v, FLOAT_BITS)));
    c
}

/// One float from `from` to every other machine.
pub(crate) fn broadcast_charges(n: usize, from: usize) -> Vec<(Phase, usize, usize, u64)> {
    (0..n)
        .filter(|&v| v != from)
        .map(|v| (Phase::Control, from, v, FLOAT_BITS))
        .collect()
}
