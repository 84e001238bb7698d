//! Sub-linear bit quantization on the cubic lattice.
//!
//! The encoder shifts `x` by a random `theta` in the Voronoi cell of the
//! origin, rounds to the nearest lattice point `z`, and sends a random color
//! of `z` drawn from a space of `(1 + 2q)^(3d)` colors. A color is accepted
//! only if no other lattice point whose expanded Voronoi region (the cell
//! grown by l2 radius `2 q eps`) contains `x + theta` shares it; otherwise the
//! encoder retries with fresh randomness and sends the iteration index too.
//!
//! Exact enumeration is exponential in `d`, so the exact codec is limited to
//! `d <= 12` and `q <= 4`. [`sublinear_variance_sim`] gives the predicted
//! variance for large `d` without running the codec.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::lattice::{ENUMERATION_LIMIT, LatticePoint};
use crate::random::{Domain, RoundId, SharedRandomness};
use rand::Rng;

pub const MAX_EXACT_DIM: usize = 12;
pub const MAX_EXACT_Q: f64 = 4.0;
pub const ITERATION_CAP: u32 = 64;
/// Width of the iteration index on the wire.
pub const ITERATION_BITS: u32 = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublinearParams {
    q: f64,
    epsilon: f64,
    d: usize,
    shared: SharedRandomness,
}

impl SublinearParams {
    /// `epsilon` is the l2 packing radius, so the cube side is `2 epsilon`.
    pub fn new(q: f64, epsilon: f64, d: usize, shared: SharedRandomness) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::Parameter(format!("q must be positive, got {q}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if d == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        Ok(SublinearParams { q, epsilon, d, shared })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> f64 {
        2.0 * self.epsilon
    }

    /// `ceil(3 d log2(1 + 2q))`.
    pub fn color_bits(&self) -> u32 {
        (3.0 * self.d as f64 * (1.0 + 2.0 * self.q).log2()).ceil() as u32
    }

    pub fn message_bits(&self) -> usize {
        (self.color_bits() + ITERATION_BITS) as usize
    }

    /// Modulus of the deterministic pre-coloring. Points of one class are at
    /// least `m s` apart in every differing coordinate, which exceeds the
    /// diameter `s (sqrt(d) + 2q)` of any expanded region.
    pub fn class_modulus(&self) -> i64 {
        ((self.d as f64).sqrt().max(3.0) + 2.0 * self.q).ceil() as i64
    }

    /// Decoding succeeds when `||x - x_ref||_2` is at most this.
    pub fn decode_radius(&self) -> f64 {
        self.q * self.epsilon
    }

    fn check_exact(&self) -> Result<()> {
        if self.d > MAX_EXACT_DIM || self.q > MAX_EXACT_Q {
            return Err(Error::Parameter(format!(
                "exact mode needs d <= {MAX_EXACT_DIM} and q <= {MAX_EXACT_Q}, got d = {}, q = {}",
                self.d, self.q
            )));
        }
        if self.color_bits() > 128 {
            return Err(Error::Parameter("color space wider than 128 bits".into()));
        }
        Ok(())
    }

    /// Offset for `(round, iteration)`, uniform in `[-s/2, s/2)^d`.
    pub fn offset(&self, round: RoundId, iteration: u32) -> Vec<f64> {
        let mut rng = self
            .shared
            .stream(Domain::SublinearOffset, round, iteration as u64);
        let s = self.side();
        (0..self.d).map(|_| s * (rng.random::<f64>() - 0.5)).collect()
    }

    /// Random color of a lattice point for `(round, iteration)`.
    pub fn color(&self, round: RoundId, iteration: u32, p: &LatticePoint) -> u128 {
        let m = self.class_modulus();
        let class: Vec<i64> = p.coords().iter().map(|a| a.rem_euclid(m)).collect();
        let key = self
            .shared
            .hash_key(Domain::Coloring, round, iteration as u64);
        let digest = key.digest_i64(&class);
        let mut word = [0u8; 16];
        word.copy_from_slice(&digest[..16]);
        let bits = self.color_bits();
        let v = u128::from_be_bytes(word);
        if bits >= 128 {
            v
        } else {
            v >> (128 - bits)
        }
    }

    fn embed(&self, p: &LatticePoint) -> Vec<f64> {
        p.coords().iter().map(|&a| a as f64 * self.side()).collect()
    }
}

/// Lattice points whose cell, grown by an l2 radius, contains a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiNeighborhood {
    pub nearest: LatticePoint,
    pub points: Vec<LatticePoint>,
}

impl VoronoiNeighborhood {
    /// All points `lambda` of the lattice `s Z^d` with
    /// `dist_2(u, cell(lambda)) <= radius`.
    pub fn around(u: &[f64], side: f64, radius: f64) -> Result<Self> {
        check_finite(u)?;
        let t: Vec<f64> = u.iter().map(|v| v / side).collect();
        let rho = radius / side;
        let nearest = LatticePoint(t.iter().map(|v| (v - 0.5).ceil() as i64).collect());
        let mut points = Vec::new();
        let mut prefix = Vec::with_capacity(t.len());
        enumerate(&t, rho * rho, &mut prefix, &mut points)?;
        Ok(VoronoiNeighborhood { nearest, points })
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// Depth-first search over coordinates with the remaining squared budget.
fn enumerate(t: &[f64], budget: f64, prefix: &mut Vec<i64>, out: &mut Vec<LatticePoint>) -> Result<()> {
    let i = prefix.len();
    if i == t.len() {
        if out.len() as f64 >= ENUMERATION_LIMIT {
            return Err(Error::Capacity {
                requested: ENUMERATION_LIMIT + 1.0,
                limit: ENUMERATION_LIMIT,
            });
        }
        out.push(LatticePoint(prefix.clone()));
        return Ok(());
    }
    let reach = budget.max(0.0).sqrt();
    let lo = (t[i] - 0.5 - reach).ceil() as i64;
    let hi = (t[i] + 0.5 + reach).floor() as i64;
    for a in lo..=hi {
        let gap = ((t[i] - a as f64).abs() - 0.5).max(0.0);
        let rest = budget - gap * gap;
        if rest < 0.0 {
            continue;
        }
        prefix.push(a);
        enumerate(t, rest, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SublinearMessage {
    pub color: u128,
    pub iteration: u32,
}

impl SublinearMessage {
    pub fn to_bits(&self, params: &SublinearParams) -> BitString {
        let mut bits = BitString::new();
        bits.push_bits(self.color, params.color_bits());
        bits.push_bits(self.iteration as u128, ITERATION_BITS);
        bits
    }

    pub fn from_bits(bits: &BitString, params: &SublinearParams) -> Result<Self> {
        if bits.len() != params.message_bits() {
            return Err(Error::Format(format!(
                "message has {} bits, expected {}",
                bits.len(),
                params.message_bits()
            )));
        }
        let cb = params.color_bits();
        Ok(SublinearMessage {
            color: bits.read_bits(0, cb),
            iteration: bits.read_bits(cb as usize, ITERATION_BITS) as u32,
        })
    }
}

/// Encoder result, including the estimate a correct decoder recovers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublinearEncoding {
    pub message: SublinearMessage,
    pub point: LatticePoint,
    /// `z - theta`.
    pub estimate: Vec<f64>,
    /// Size of the expanded-region neighborhood in each attempted iteration.
    pub neighborhood_sizes: Vec<usize>,
}

pub fn sublinear_encode(x: &[f64], params: &SublinearParams, round: RoundId) -> Result<SublinearEncoding> {
    params.check_exact()?;
    check_dim(params.d, x.len())?;
    check_finite(x)?;
    let s = params.side();
    let mut sizes = Vec::new();
    for iteration in 0..ITERATION_CAP {
        let theta = params.offset(round, iteration);
        let u: Vec<f64> = x.iter().zip(&theta).map(|(a, b)| a + b).collect();
        let hood = VoronoiNeighborhood::around(&u, s, params.q * s)?;
        sizes.push(hood.count());
        let c = params.color(round, iteration, &hood.nearest);
        let clash = hood
            .points
            .iter()
            .any(|p| *p != hood.nearest && params.color(round, iteration, p) == c);
        if !clash {
            let estimate = params
                .embed(&hood.nearest)
                .iter()
                .zip(&theta)
                .map(|(a, b)| a - b)
                .collect();
            return Ok(SublinearEncoding {
                message: SublinearMessage { color: c, iteration },
                point: hood.nearest,
                estimate,
                neighborhood_sizes: sizes,
            });
        }
    }
    Err(Error::IterationCap(ITERATION_CAP))
}

/// Returns `z - theta` for the unique point of the received color whose cell
/// meets the ball of radius `q eps` around `x_ref + theta`.
pub fn sublinear_decode(msg: &SublinearMessage, x_ref: &[f64], params: &SublinearParams, round: RoundId) -> Result<Vec<f64>> {
    params.check_exact()?;
    check_dim(params.d, x_ref.len())?;
    if msg.iteration >= ITERATION_CAP {
        return Err(Error::Format(format!("iteration index {} beyond cap", msg.iteration)));
    }
    let theta = params.offset(round, msg.iteration);
    let u: Vec<f64> = x_ref.iter().zip(&theta).map(|(a, b)| a + b).collect();
    let hood = VoronoiNeighborhood::around(&u, params.side(), params.decode_radius())?;
    let mut matches = hood
        .points
        .into_iter()
        .filter(|p| params.color(round, msg.iteration, p) == msg.color);
    let z = matches
        .next()
        .ok_or_else(|| Error::DecodeFailure("no lattice point of the received color nearby".into()))?;
    if matches.next().is_some() {
        return Err(Error::DecodeFailure("received color is ambiguous near the reference".into()));
    }
    Ok(params
        .embed(&z)
        .iter()
        .zip(&theta)
        .map(|(a, b)| a - b)
        .collect())
}

/// Predicted behaviour of the sub-linear codec at a bit budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublinearSim {
    pub side: f64,
    pub variance: f64,
}

/// Solves `log2(1 + 4y/s) = bits_per_coord` for `s`; the random shift makes
/// each coordinate's error uniform on an interval of width `s`, so the total
/// variance is `d s^2 / 12`.
pub fn sublinear_variance_sim(y: f64, d: usize, bits_per_coord: f64) -> Result<SublinearSim> {
    if !(bits_per_coord > 0.0 && bits_per_coord.is_finite()) {
        return Err(Error::Parameter(format!(
            "bits per coordinate must be positive, got {bits_per_coord}"
        )));
    }
    if !(y >= 0.0 && y.is_finite()) {
        return Err(Error::Parameter(format!("y must be finite and >= 0, got {y}")));
    }
    let side = 4.0 * y / (bits_per_coord.exp2() - 1.0);
    Ok(SublinearSim {
        side,
        variance: d as f64 * side * side / 12.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: f64, d: usize) -> SublinearParams {
        SublinearParams::new(q, 0.5, d, SharedRandomness::new(17)).unwrap()
    }

    #[test]
    fn sizes() {
        let p = params(1.0, 8);
        assert_eq!(p.color_bits(), 39);
        assert_eq!(p.message_bits(), 47);
        assert_eq!(p.class_modulus(), 5);
        assert_eq!(params(1.0, 16).class_modulus(), 6);
    }

    #[test]
    fn guards() {
        assert!(sublinear_encode(&[0.0; 13], &params(1.0, 13), RoundId(0)).is_err());
        assert!(sublinear_encode(&[0.0; 2], &params(5.0, 2), RoundId(0)).is_err());
        assert!(SublinearParams::new(0.0, 1.0, 2, SharedRandomness::new(0)).is_err());
    }

    #[test]
    fn neighborhood_matches_brute_force() {
        // d = 2, s = 1, radius 1.25 around (0.2, -0.4)
        let u = [0.2, -0.4];
        let hood = VoronoiNeighborhood::around(&u, 1.0, 1.25).unwrap();
        let mut brute = 0;
        for a in -5i64..=5 {
            for b in -5i64..=5 {
                let g = |t: f64, c: i64| ((t - c as f64).abs() - 0.5).max(0.0);
                if g(u[0], a).powi(2) + g(u[1], b).powi(2) <= 1.5625 {
                    brute += 1;
                }
            }
        }
        assert_eq!(hood.count(), brute);
        assert!(hood.points.contains(&hood.nearest));
        assert_eq!(hood.nearest.0, vec![0, 0]);
    }

    #[test]
    fn lattice_point_input_roundtrip() {
        let p = params(1.0, 4);
        let x = [1.0, -2.0, 0.0, 3.0];
        let e = sublinear_encode(&x, &p, RoundId(3)).unwrap();
        let out = sublinear_decode(&e.message, &x, &p, RoundId(3)).unwrap();
        assert_eq!(out, e.estimate);
        let bits = e.message.to_bits(&p);
        assert_eq!(bits.len(), p.message_bits());
        assert_eq!(SublinearMessage::from_bits(&bits, &p).unwrap(), e.message);
        let err: f64 = out.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= p.side() * 2.0 / 2.0 + 1e-12); // s sqrt(d) / 2 with d = 4
    }

    #[test]
    fn variance_sim_formulas() {
        let sim = sublinear_variance_sim(1.0, 256, 0.5).unwrap();
        assert!((sim.side - 4.0 / (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((sim.variance - 256.0 * sim.side * sim.side / 12.0).abs() < 1e-9);
        assert_eq!(sublinear_variance_sim(1.0, 1, 1.0).unwrap().side, 4.0);
        let a = sublinear_variance_sim(1.0, 10, 0.7).unwrap().variance;
        let b = sublinear_variance_sim(2.0, 10, 0.7).unwrap().variance;
        assert!((b / a - 4.0).abs() < 1e-12);
        assert!(sublinear_variance_sim(1.0, 10, 0.0).is_err());
    }
}
