//! Two-party lattice codec.
//!
//! The encoder maps `x` to a lattice point and sends only its color (the
//! residues mod `q`). The decoder picks the point of that color closest to
//! its own vector `x_ref`, which is the encoder's point whenever the two
//! inputs are close enough. Beyond that distance the decoder silently returns
//! a different point of the same color; see [`crate::robust`] for detection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{mixed_radix_bits, BitString};
use crate::codec::{Encoded, VectorCodec};
use crate::error::{check_dim, Error, Result};
use crate::lattice::{
    color_mod_q, nearest_point, nearest_with_color, randomized_round, ColorWord, LatticePoint,
    LatticeSpec,
};
use crate::random::{Domain, RoundId, SharedRandomness};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodeMode {
    /// Random shared offset, nearest-point rounding.
    #[default]
    SharedOffset,
    /// Zero offset, unbiased randomized rounding. Needs no shared randomness.
    StochasticHull,
}

/// Codec parameters agreed out of band by sender and receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    q: u64,
    y: f64,
    d: usize,
    shared: SharedRandomness,
    mode: EncodeMode,
}

impl QuantParams {
    /// `y` is the largest infinity-norm distance between inputs the decoder
    /// must tolerate; the side length is `2y / (q - 1)`.
    pub fn new(q: u64, y: f64, d: usize, shared: SharedRandomness, mode: EncodeMode) -> Result<Self> {
        if q < 2 {
            return Err(Error::Parameter(format!("q must be >= 2, got {q}")));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Parameter(format!("y must be positive and finite, got {y}")));
        }
        if d == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        Ok(QuantParams { q, y, d, shared, mode })
    }

    /// Parameters for a given side length instead of a distance bound.
    pub fn with_side(q: u64, side: f64, d: usize, shared: SharedRandomness, mode: EncodeMode) -> Result<Self> {
        if q < 2 {
            return Err(Error::Parameter(format!("q must be >= 2, got {q}")));
        }
        Self::new(q, side * (q - 1) as f64 / 2.0, d, shared, mode)
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mode(&self) -> EncodeMode {
        self.mode
    }

    pub fn shared(&self) -> SharedRandomness {
        self.shared
    }

    pub fn side(&self) -> f64 {
        2.0 * self.y / (self.q - 1) as f64
    }

    /// Payload length in bits, `ceil(d * log2 q)`.
    pub fn bit_len(&self) -> usize {
        mixed_radix_bits(self.q, self.d)
    }

    /// Largest infinity-norm input distance at which decoding is guaranteed.
    pub fn decode_radius(&self) -> f64 {
        match self.mode {
            EncodeMode::SharedOffset => (self.q - 1) as f64 * self.side() / 2.0,
            EncodeMode::StochasticHull => (self.q as f64 - 2.0) * self.side() / 2.0,
        }
    }

    /// Lattice used in `round`: offset drawn from the shared seed, or zero.
    pub fn lattice(&self, round: RoundId) -> LatticeSpec {
        let built = match self.mode {
            EncodeMode::SharedOffset => {
                let mut rng = self.shared.stream(Domain::Offset, round, 0);
                LatticeSpec::with_random_offset(self.d, self.side(), &mut rng)
            }
            EncodeMode::StochasticHull => LatticeSpec::centered(self.d, self.side()),
        };
        built.expect("validated parameters")
    }

    /// Encodes and also returns the lattice point the message describes.
    pub fn encode_point(&self, x: &[f64], round: RoundId) -> Result<(EncodedVector, LatticePoint)> {
        check_dim(self.d, x.len())?;
        let spec = self.lattice(round);
        let z = match self.mode {
            EncodeMode::SharedOffset => nearest_point(x, &spec)?,
            EncodeMode::StochasticHull => {
                let mut rng = self.shared.stream(Domain::Rounding, round, 0);
                randomized_round(x, &spec, &mut rng)?
            }
        };
        let color = color_mod_q(&z, self.q)?;
        Ok((
            EncodedVector {
                payload: color.pack(),
                round,
            },
            z,
        ))
    }

    pub fn decode_point(&self, msg: &EncodedVector, x_ref: &[f64]) -> Result<LatticePoint> {
        check_dim(self.d, x_ref.len())?;
        let color = ColorWord::unpack(&msg.payload, self.q, self.d)?;
        nearest_with_color(x_ref, &color, &self.lattice(msg.round))
    }
}

/// Wire message. The round index travels out of band in the protocol layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedVector {
    pub payload: BitString,
    pub round: RoundId,
}

impl EncodedVector {
    pub fn bit_length(&self) -> usize {
        self.payload.len()
    }
}

pub fn encode(x: &[f64], params: &QuantParams, round: RoundId) -> Result<EncodedVector> {
    Ok(params.encode_point(x, round)?.0)
}

pub fn decode(msg: &EncodedVector, x_ref: &[f64], params: &QuantParams) -> Result<Vec<f64>> {
    let p = params.decode_point(msg, x_ref)?;
    Ok(params.lattice(msg.round).embed(&p))
}

/// Empirical behaviour of the codec on one input pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundtripStats {
    pub trials: usize,
    /// Mean of `decoded - x` per coordinate.
    pub bias: Vec<f64>,
    /// Mean squared l2 error of the decoded vector.
    pub mse: f64,
    pub max_linf_error: f64,
    /// Trials where the decoder did not recover the encoder's point.
    pub mismatches: usize,
}

/// Runs `trials` independent rounds (round ids `0..trials`).
pub fn roundtrip_error(x: &[f64], x_ref: &[f64], params: &QuantParams, trials: usize) -> Result<RoundtripStats> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    check_dim(params.d, x_ref.len())?;
    let mut bias = vec![0.0; params.d];
    let mut mse = 0.0;
    let mut max_linf_error = 0.0f64;
    let mut mismatches = 0;
    for t in 0..trials {
        let round = RoundId(t as u64);
        let (msg, z) = params.encode_point(x, round)?;
        let got = params.decode_point(&msg, x_ref)?;
        mismatches += (got != z) as usize;
        let out = params.lattice(round).embed(&got);
        let mut sq = 0.0;
        for ((b, o), xi) in bias.iter_mut().zip(&out).zip(x) {
            let e = o - xi;
            *b += e;
            sq += e * e;
            max_linf_error = max_linf_error.max(e.abs());
        }
        mse += sq;
    }
    let n = trials as f64;
    bias.iter_mut().for_each(|b| *b /= n);
    Ok(RoundtripStats {
        trials,
        bias,
        mse: mse / n,
        max_linf_error,
        mismatches,
    })
}

/// [`VectorCodec`] adapter. Each `(round)` gets its own offset, so protocols
/// hand every message a distinct round id.
#[derive(Clone, Debug)]
pub struct LatticeCodec {
    params: QuantParams,
}

impl LatticeCodec {
    pub fn new(params: QuantParams) -> Self {
        LatticeCodec { params }
    }

    pub fn params(&self) -> &QuantParams {
        &self.params
    }
}

impl VectorCodec for LatticeCodec {
    fn name(&self) -> String {
        "lattice".into()
    }

    fn dim(&self) -> usize {
        self.params.d
    }

    fn encode(&self, x: &[f64], round: RoundId) -> Result<Encoded> {
        let (msg, z) = self.params.encode_point(x, round)?;
        Ok(Encoded {
            bits: msg.payload,
            value: self.params.lattice(round).embed(&z),
        })
    }

    fn decode(&self, msg: &BitString, x_ref: &[f64], round: RoundId) -> Result<Vec<f64>> {
        decode(
            &EncodedVector {
                payload: msg.clone(),
                round,
            },
            x_ref,
            &self.params,
        )
    }
}

/// Draws `x_ref` uniformly from the infinity-norm ball of `radius` around `x`.
pub fn perturb_within<R: Rng + ?Sized>(x: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    x.iter()
        .map(|v| v + radius * (2.0 * rng.random::<f64>() - 1.0))
        .collect()
}
