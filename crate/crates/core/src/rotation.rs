//! Randomized Walsh-Hadamard rotation `HD`.
//!
//! `D` is a diagonal of random signs drawn once from the shared seed and `H`
//! the orthonormal Hadamard matrix. After rotation, every coordinate of a
//! vector has magnitude about `||x||_2 / sqrt(d)` with high probability,
//! which makes the cubic lattice's infinity-norm guarantees useful for l2.
//! Inputs whose length is not a power of two are zero-padded.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::codec::{Encoded, VectorCodec};
use crate::error::{check_dim, Error, Result};
use crate::random::{Domain, RoundId, SharedRandomness};

/// Normalized fast Walsh-Hadamard transform, in place. Self-inverse.
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "transform length must be a power of two, got {n}"
        )));
    }
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Padded dimension and sign diagonal, fixed for a whole experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    d: usize,
    diag: Vec<f64>,
}

impl RotationSpec {
    pub fn new(d: usize, shared: &SharedRandomness) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        let d_pad = d.next_power_of_two();
        let mut rng = shared.stream(Domain::Rotation, RoundId(0), 0);
        let diag = (0..d_pad)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Ok(RotationSpec { d, diag })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn padded_dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `H D pad(x)`, of length `padded_dim()`.
    pub fn rotate(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, x.len())?;
        let mut z = vec![0.0; self.diag.len()];
        for ((zi, xi), di) in z.iter_mut().zip(x).zip(&self.diag) {
            *zi = xi * di;
        }
        fwht_in_place(&mut z)?;
        Ok(z)
    }

    /// `D H z`, truncated to the original dimension.
    pub fn unrotate(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.diag.len(), z.len())?;
        let mut x = fwht(z)?;
        x.truncate(self.d);
        x.iter_mut().zip(&self.diag).for_each(|(v, s)| *v *= s);
        Ok(x)
    }
}

/// Per-coordinate bound `c` with `||HDx||_inf <= c ||x||_2` holding for all
/// `n^2` pairwise differences with high probability.
pub fn concentration_bound(n: usize, d: usize) -> f64 {
    2.0 * ((n * d) as f64).ln().sqrt() / (d as f64).sqrt()
}

/// Wraps a codec of the padded dimension: rotate, quantize, unrotate.
#[derive(Clone, Debug)]
pub struct RotatedCodec<C> {
    rotation: RotationSpec,
    inner: C,
}

impl<C: VectorCodec> RotatedCodec<C> {
    pub fn new(rotation: RotationSpec, inner: C) -> Result<Self> {
        check_dim(rotation.padded_dim(), inner.dim())?;
        Ok(RotatedCodec { rotation, inner })
    }

    pub fn rotation(&self) -> &RotationSpec {
        &self.rotation
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: VectorCodec> VectorCodec for RotatedCodec<C> {
    fn name(&self) -> String {
        format!("{}+rotation", self.inner.name())
    }

    fn dim(&self) -> usize {
        self.rotation.dim()
    }

    fn encode(&self, x: &[f64], round: RoundId) -> Result<Encoded> {
        let e = self.inner.encode(&self.rotation.rotate(x)?, round)?;
        Ok(Encoded {
            bits: e.bits,
            value: self.rotation.unrotate(&e.value)?,
        })
    }

    fn decode(&self, msg: &BitString, x_ref: &[f64], round: RoundId) -> Result<Vec<f64>> {
        let z = self.inner.decode(msg, &self.rotation.rotate(x_ref)?, round)?;
        self.rotation.unrotate(&z)
    }
}
