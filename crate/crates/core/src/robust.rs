//! Error-detecting lattice agreement.
//!
//! Each message carries the residues of the encoder's lattice point modulo
//! `r` together with a `k`-bit keyed hash of the full point. The decoder
//! proposes the nearest point of the received color and checks the hash; on
//! mismatch it answers `Far` (one bit) and both sides square the modulus.
//! The encoder's point is fixed before the first message, so escalations
//! only refine the description of the same point.

use serde::{Deserialize, Serialize};

use crate::bits::{mixed_radix_bits, BitString};
use crate::error::{check_dim, Error, Result};
use crate::lattice::{color_mod_q, nearest_point, nearest_with_color, ColorWord, LatticePoint, LatticeSpec};
use crate::quantizer::{EncodeMode, QuantParams};
use crate::random::{Domain, RoundId};

pub const DEFAULT_CHECKSUM_BITS: u32 = 32;
pub const DEFAULT_R_MAX: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    params: QuantParams,
    checksum_bits: u32,
    r_max: u64,
}

impl RobustConfig {
    /// `params` fixes the base modulus `q`, the side length and the seed.
    pub fn new(params: QuantParams, checksum_bits: u32, r_max: u64) -> Result<Self> {
        if params.mode() != EncodeMode::SharedOffset {
            return Err(Error::Parameter("robust agreement uses the shared-offset encoder".into()));
        }
        if !(8..=128).contains(&checksum_bits) {
            return Err(Error::Parameter(format!(
                "checksum width must be in 8..=128, got {checksum_bits}"
            )));
        }
        if r_max < params.q() {
            return Err(Error::Parameter(format!(
                "r_max = {r_max} is below the base modulus {}",
                params.q()
            )));
        }
        Ok(RobustConfig {
            params,
            checksum_bits,
            r_max,
        })
    }

    pub fn with_defaults(params: QuantParams) -> Result<Self> {
        Self::new(params, DEFAULT_CHECKSUM_BITS, DEFAULT_R_MAX)
    }

    pub fn params(&self) -> &QuantParams {
        &self.params
    }

    pub fn checksum_bits(&self) -> u32 {
        self.checksum_bits
    }

    pub fn r_max(&self) -> u64 {
        self.r_max
    }

    /// `q^(2^i)`, or `None` once it exceeds `r_max`.
    pub fn modulus_at(&self, iteration: u32) -> Option<u64> {
        let exp = 1u32.checked_shl(iteration)?;
        self.params
            .q()
            .checked_pow(exp)
            .filter(|&r| r <= self.r_max)
    }

    /// Length of the message sent at `iteration`.
    pub fn message_bits(&self, iteration: u32) -> Option<usize> {
        self.modulus_at(iteration)
            .map(|r| mixed_radix_bits(r, self.params.dim()) + self.checksum_bits as usize)
    }

    fn checksum(&self, round: RoundId, iteration: u32, p: &LatticePoint) -> u128 {
        let key = self
            .params
            .shared()
            .hash_key(Domain::Checksum, round, iteration as u64);
        let digest = key.digest_i64(p.coords());
        let mut word = [0u8; 16];
        word.copy_from_slice(&digest[..16]);
        let v = u128::from_be_bytes(word);
        if self.checksum_bits == 128 {
            v
        } else {
            v >> (128 - self.checksum_bits)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Encoder to decoder: color plus checksum.
    Forward,
    /// Decoder to encoder: the one-bit `Far` reply.
    Reply,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub iteration: u32,
    pub modulus: u64,
    pub direction: Direction,
    pub bits: usize,
}

/// Synchronized state of one agreement between an encoder and a decoder.
#[derive(Clone, Debug)]
pub struct RobustSession {
    config: RobustConfig,
    round: RoundId,
    iteration: u32,
    modulus: u64,
    z: Option<LatticePoint>,
    transcript: Vec<TranscriptEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RobustOutcome {
    Decoded(Vec<f64>),
    Far,
}

impl RobustSession {
    pub fn new(config: RobustConfig, round: RoundId) -> Self {
        let modulus = config.params.q();
        RobustSession {
            config,
            round,
            iteration: 0,
            modulus,
            z: None,
            transcript: Vec::new(),
        }
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn round(&self) -> RoundId {
        self.round
    }

    pub fn config(&self) -> &RobustConfig {
        &self.config
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.config.params.lattice(self.round)
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// Fixes the encoder's point directly instead of quantizing an input.
    pub fn set_point(&mut self, z: LatticePoint) -> Result<()> {
        check_dim(self.config.params.dim(), z.dim())?;
        self.z = Some(z);
        Ok(())
    }

    pub fn point(&self) -> Option<&LatticePoint> {
        self.z.as_ref()
    }

    /// Squares the modulus after a `Far` reply.
    pub fn escalate(&mut self) -> Result<()> {
        match self.config.modulus_at(self.iteration + 1) {
            Some(r) => {
                self.transcript.push(TranscriptEntry {
                    iteration: self.iteration,
                    modulus: self.modulus,
                    direction: Direction::Reply,
                    bits: 1,
                });
                self.iteration += 1;
                self.modulus = r;
                Ok(())
            }
            None => Err(Error::EscalationFailed {
                iterations: self.iteration + 1,
                r_max: self.config.r_max,
            }),
        }
    }
}

/// Message for the session's current iteration. The first call quantizes `x`
/// and fixes the point; later calls reuse it and ignore `x`.
pub fn robust_encode(x: &[f64], session: &mut RobustSession) -> Result<BitString> {
    if session.z.is_none() {
        check_dim(session.config.params.dim(), x.len())?;
        session.z = Some(nearest_point(x, &session.lattice())?);
    }
    let z = session.z.as_ref().expect("point fixed above");
    let mut bits = color_mod_q(z, session.modulus)?.pack();
    let k = session.config.checksum_bits;
    bits.push_bits(session.config.checksum(session.round, session.iteration, z), k);
    session.transcript.push(TranscriptEntry {
        iteration: session.iteration,
        modulus: session.modulus,
        direction: Direction::Forward,
        bits: bits.len(),
    });
    Ok(bits)
}

/// Decoder side: proposes the nearest point of the received color and
/// accepts it only if the checksum matches.
pub fn robust_decode_point(msg: &BitString, x_ref: &[f64], session: &RobustSession) -> Result<Option<LatticePoint>> {
    let d = session.config.params.dim();
    check_dim(d, x_ref.len())?;
    let k = session.config.checksum_bits as usize;
    let payload_len = mixed_radix_bits(session.modulus, d);
    if msg.len() != payload_len + k {
        return Err(Error::Format(format!(
            "robust message has {} bits, expected {}",
            msg.len(),
            payload_len + k
        )));
    }
    let color = ColorWord::unpack(&msg.slice(0, payload_len), session.modulus, d)?;
    let candidate = nearest_with_color(x_ref, &color, &session.lattice())?;
    let sent = msg.read_bits(payload_len, k as u32);
    let ok = session.config.checksum(session.round, session.iteration, &candidate) == sent;
    Ok(ok.then_some(candidate))
}

pub fn robust_decode(msg: &BitString, x_ref: &[f64], session: &RobustSession) -> Result<RobustOutcome> {
    Ok(match robust_decode_point(msg, x_ref, session)? {
        Some(p) => RobustOutcome::Decoded(session.lattice().embed(&p)),
        None => RobustOutcome::Far,
    })
}

/// Outcome of a complete agreement loop.
#[derive(Clone, Debug, PartialEq)]
pub struct Agreement {
    /// Estimate of the encoder's input held by the decoder.
    pub estimate: Vec<f64>,
    pub decoded_point: LatticePoint,
    /// Number of `Far` replies before success.
    pub escalations: u32,
    pub bits_forward: u64,
    pub bits_reply: u64,
    /// The checksum accepted a point other than the encoder's.
    pub collision: bool,
    pub transcript: Vec<TranscriptEntry>,
}

/// Runs encode / decode / `Far` rounds until the decoder accepts or the
/// modulus would exceed `r_max`.
pub fn robust_agreement(x_u: &[f64], x_v: &[f64], config: &RobustConfig, round: RoundId) -> Result<Agreement> {
    check_dim(config.params.dim(), x_u.len())?;
    run_loop(x_u, x_v, RobustSession::new(config.clone(), round))
}

/// As [`robust_agreement`] with the encoder's lattice point given directly.
pub fn robust_agreement_from_point(z: &LatticePoint, x_v: &[f64], config: &RobustConfig, round: RoundId) -> Result<Agreement> {
    let mut session = RobustSession::new(config.clone(), round);
    session.set_point(z.clone())?;
    run_loop(&[], x_v, session)
}

fn run_loop(x_u: &[f64], x_v: &[f64], mut session: RobustSession) -> Result<Agreement> {
    loop {
        let msg = robust_encode(x_u, &mut session)?;
        if let Some(p) = robust_decode_point(&msg, x_v, &session)? {
            let z = session.z.as_ref().expect("encoded");
            let collision = &p != z;
            let (mut fwd, mut rep) = (0u64, 0u64);
            for t in &session.transcript {
                match t.direction {
                    Direction::Forward => fwd += t.bits as u64,
                    Direction::Reply => rep += t.bits as u64,
                }
            }
            return Ok(Agreement {
                estimate: session.lattice().embed(&p),
                decoded_point: p,
                escalations: session.iteration,
                bits_forward: fwd,
                bits_reply: rep,
                collision,
                transcript: session.transcript,
            });
        }
        session.escalate()?;
    }
}
