//! Cubic lattice geometry.
//!
//! The lattice is `{ theta + s * alpha : alpha in Z^d }`. Under the infinity
//! norm its packing and cover radii are both `s / 2`, so it is an
//! `s/2`-lattice in the sense used throughout the crate. Lattice points are
//! carried as integer coefficient vectors ([`LatticePoint`]); the coordinate
//! wise residue of those coefficients modulo `q` is the point's color.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{mixed_radix_bits, pack_mixed_radix, unpack_mixed_radix, BitString};
use crate::error::{check_dim, check_finite, Error, Result};

/// Upper bound on the number of candidates [`count_points_in_ball`] will visit.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// Largest lattice coordinate representable without losing integer precision.
const MAX_COORD: f64 = 9.007_199_254_740_992e15; // 2^53

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    LInf,
    L2,
}

/// Side length and offset of a cubic lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    side: f64,
    offset: Vec<f64>,
}

impl LatticeSpec {
    /// `offset` must lie in `[-side/2, side/2)^d`.
    pub fn new(side: f64, offset: Vec<f64>) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::Parameter(format!(
                "side length must be positive and finite, got {side}"
            )));
        }
        if offset.is_empty() {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        let half = side / 2.0;
        if let Some(t) = offset.iter().find(|&&t| !(t >= -half && t < half)) {
            return Err(Error::Parameter(format!(
                "offset coordinate {t} outside [-{half}, {half})"
            )));
        }
        Ok(LatticeSpec { side, offset })
    }

    /// Lattice with zero offset.
    pub fn centered(dim: usize, side: f64) -> Result<Self> {
        Self::new(side, vec![0.0; dim])
    }

    /// Lattice with offset drawn uniformly from `[-side/2, side/2)^d`.
    pub fn with_random_offset<R: Rng + ?Sized>(dim: usize, side: f64, rng: &mut R) -> Result<Self> {
        let offset = (0..dim)
            .map(|_| side * (rng.random::<f64>() - 0.5))
            .collect();
        Self::new(side, offset)
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn packing_radius(&self, _norm: Norm) -> f64 {
        self.side / 2.0
    }

    pub fn cover_radius(&self, norm: Norm) -> f64 {
        match norm {
            Norm::LInf => self.side / 2.0,
            Norm::L2 => self.side * (self.dim() as f64).sqrt() / 2.0,
        }
    }

    /// Real-space position of a lattice point.
    pub fn embed(&self, p: &LatticePoint) -> Vec<f64> {
        assert_eq!(p.dim(), self.dim(), "lattice point dimension");
        p.0.iter()
            .zip(&self.offset)
            .map(|(&a, &t)| t + self.side * a as f64)
            .collect()
    }

    /// Coordinates of `x` in lattice units, `(x - theta) / s`.
    fn to_lattice_units(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        check_finite(x)?;
        let t: Vec<f64> = x
            .iter()
            .zip(&self.offset)
            .map(|(&xi, &ti)| (xi - ti) / self.side)
            .collect();
        if let Some(v) = t.iter().find(|v| v.abs() >= MAX_COORD) {
            return Err(Error::InvalidInput(format!(
                "vector lies {v} lattice steps from the origin; increase the side length"
            )));
        }
        Ok(t)
    }
}

/// Integer coefficient vector of a lattice point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }
}

/// Coordinate-wise residues of a lattice point modulo `q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorWord {
    residues: Vec<u64>,
    modulus: u64,
}

impl ColorWord {
    pub fn new(residues: Vec<u64>, modulus: u64) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::Parameter(format!("modulus must be >= 2, got {modulus}")));
        }
        if let Some(r) = residues.iter().find(|&&r| r >= modulus) {
            return Err(Error::InvalidInput(format!("residue {r} not below {modulus}")));
        }
        Ok(ColorWord { residues, modulus })
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn dim(&self) -> usize {
        self.residues.len()
    }

    /// Packed length, `ceil(d * log2 q)`.
    pub fn bit_len(&self) -> usize {
        mixed_radix_bits(self.modulus, self.residues.len())
    }

    pub fn pack(&self) -> BitString {
        pack_mixed_radix(&self.residues, self.modulus)
    }

    pub fn unpack(bits: &BitString, modulus: u64, dim: usize) -> Result<Self> {
        let residues = unpack_mixed_radix(bits, modulus, dim)?;
        Ok(ColorWord { residues, modulus })
    }
}

/// Closest lattice point under the infinity norm; halfway cases go toward
/// negative infinity.
pub fn nearest_point(x: &[f64], spec: &LatticeSpec) -> Result<LatticePoint> {
    let t = spec.to_lattice_units(x)?;
    Ok(LatticePoint(
        t.into_iter().map(|v| (v - 0.5).ceil() as i64).collect(),
    ))
}

/// Rounds each coordinate up with probability equal to its fractional part,
/// so the embedded result has expectation exactly `x`.
pub fn randomized_round<R: Rng + ?Sized>(
    x: &[f64],
    spec: &LatticeSpec,
    rng: &mut R,
) -> Result<LatticePoint> {
    let t = spec.to_lattice_units(x)?;
    Ok(LatticePoint(
        t.into_iter()
            .map(|v| {
                let lo = v.floor();
                let frac = v - lo;
                if frac > 0.0 && rng.random::<f64>() < frac {
                    lo as i64 + 1
                } else {
                    lo as i64
                }
            })
            .collect(),
    ))
}

/// Coordinate-wise mathematical residue modulo `q` (always in `[0, q)`).
pub fn color_mod_q(p: &LatticePoint, q: u64) -> Result<ColorWord> {
    if q < 2 {
        return Err(Error::Parameter(format!("modulus must be >= 2, got {q}")));
    }
    if q > i64::MAX as u64 {
        return Err(Error::Parameter(format!("modulus {q} too large")));
    }
    let residues = p.0.iter().map(|&a| a.rem_euclid(q as i64) as u64).collect();
    Ok(ColorWord {
        residues,
        modulus: q,
    })
}

/// Closest lattice point to `x_ref` whose color is `color`. For the cubic
/// lattice the per-coordinate choice is the infinity-norm nearest member of
/// the color class; ties go to the smaller integer.
pub fn nearest_with_color(x_ref: &[f64], color: &ColorWord, spec: &LatticeSpec) -> Result<LatticePoint> {
    check_dim(spec.dim(), color.dim())?;
    let t = spec.to_lattice_units(x_ref)?;
    let q = color.modulus as f64;
    Ok(LatticePoint(
        t.into_iter()
            .zip(&color.residues)
            .map(|(v, &c)| {
                let k = ((v - c as f64) / q - 0.5).ceil();
                c as i64 + (k as i64) * color.modulus as i64
            })
            .collect(),
    ))
}

/// Exact number of lattice points in the closed ball of `radius` around
/// `center`, by enumerating the bounding integer box.
pub fn count_points_in_ball(center: &[f64], radius: f64, spec: &LatticeSpec, norm: Norm) -> Result<u64> {
    check_dim(spec.dim(), center.len())?;
    check_finite(center)?;
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::Parameter(format!("radius must be finite and >= 0, got {radius}")));
    }
    let s = spec.side;
    let requested = (2.0 * radius / s + 2.0).powi(spec.dim() as i32);
    if requested > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            requested,
            limit: ENUMERATION_LIMIT,
        });
    }
    let ranges: Vec<(i64, i64)> = center
        .iter()
        .zip(&spec.offset)
        .map(|(&c, &t)| {
            (
                ((c - t - radius) / s).floor() as i64,
                ((c - t + radius) / s).ceil() as i64,
            )
        })
        .collect();
    let mut alpha: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut count = 0u64;
    loop {
        let inside = match norm {
            Norm::LInf => alpha
                .iter()
                .zip(center.iter().zip(&spec.offset))
                .all(|(&a, (&c, &t))| (t + s * a as f64 - c).abs() <= radius),
            Norm::L2 => {
                alpha
                    .iter()
                    .zip(center.iter().zip(&spec.offset))
                    .map(|(&a, (&c, &t))| (t + s * a as f64 - c).powi(2))
                    .sum::<f64>()
                    <= radius * radius
            }
        };
        count += inside as u64;
        // odometer step
        let mut i = 0;
        loop {
            if i == alpha.len() {
                return Ok(count);
            }
            if alpha[i] < ranges[i].1 {
                alpha[i] += 1;
                break;
            }
            alpha[i] = ranges[i].0;
            i += 1;
        }
    }
}
