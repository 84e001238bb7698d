//! Distributed power iteration with quantized exchange of `X_i^T X_i x`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;
use crate::protocols::{max_pairwise_linf, mean_of};
use crate::random::{Domain, RoundId, SharedRandomness};
use crate::rotation::RotationSpec;

use super::config::{ExperimentConfig, QuantizerChoice, YRule};
use super::data::{planted_covariance, top_eigenvector, DATA_INIT};
use super::harness::{build_codec, l2, quantized_average, sq_dist, FLOAT_BITS};
use super::records::ResultRecord;
use super::training::{base_record, track_norms};

/// Planted top eigenvalues; the rest are 1.
pub const SPECTRUM: [f64; 2] = [10.0, 9.0];
/// Alignment a run must reach to count as converged.
pub const CONVERGED_ALIGNMENT: f64 = 0.99;
/// Multiplier on the largest warmup distance.
const WARMUP_FACTOR: f64 = 2.0;

/// Rows split into `n` contiguous blocks, one per machine.
pub struct PowerProblem {
    /// `X_i^T X_i / |X_i|` per machine.
    pub local: Vec<DMatrix<f64>>,
    /// Top eigenvector of `X^T X`.
    pub top: Vec<f64>,
    pub start: Vec<f64>,
}

impl PowerProblem {
    pub fn generate(samples: usize, dim: usize, machines: usize, seed: u64) -> Result<Self> {
        let (x, _) = planted_covariance(samples, dim, &SPECTRUM, seed)?;
        let top = top_eigenvector(&x);
        let size = samples / machines;
        let local = (0..machines)
            .map(|i| {
                let block = x.rows(i * size, size);
                block.transpose() * block / size as f64
            })
            .collect();
        let mut rng = SharedRandomness::new(seed).stream(Domain::Data, RoundId(0), DATA_INIT);
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = l2(&v);
        Ok(PowerProblem {
            local,
            top,
            start: v.iter().map(|x| x / norm).collect(),
        })
    }

    pub fn products(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let x = DVector::from_column_slice(x);
        self.local.iter().map(|c| (c * &x).as_slice().to_vec()).collect()
    }

    pub fn alignment(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.top).map(|(a, b)| a * b).sum::<f64>().abs()
    }

    /// Largest pairwise l-inf distance between the products over `iters`
    /// full-precision iterations from the start vector, in the original
    /// space and after `rotation`.
    pub fn warmup_spread(&self, iters: usize, rotation: &RotationSpec) -> Result<(f64, f64)> {
        let mut x = self.start.clone();
        let (mut y, mut y_rot) = (0.0f64, 0.0f64);
        for _ in 0..iters {
            let u = self.products(&x);
            y = y.max(max_pairwise_linf(&u));
            let ru = u.iter().map(|v| rotation.rotate(v)).collect::<Result<Vec<_>>>()?;
            y_rot = y_rot.max(max_pairwise_linf(&ru));
            x = normalized(&mean_of(&u));
        }
        Ok((y, y_rot))
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = l2(v);
    v.iter().map(|x| x / n).collect()
}

/// `y` comes from `warmup` full-precision iterations (doubled), or from a
/// `fixed` rule. The `diverged` column marks runs that never reach
/// [`CONVERGED_ALIGNMENT`] or produce a non-finite iterate.
pub fn run_power_iteration(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let problem = PowerProblem::generate(cfg.samples, cfg.dim, cfg.machines, seed)?;
            let shared = SharedRandomness::new(seed);
            let rotation = RotationSpec::new(cfg.dim, &shared)?;
            let (y, y_rot) = match cfg.y_rule {
                YRule::Fixed(v) => (v, v),
                _ => {
                    let (a, b) = problem.warmup_spread(cfg.warmup, &rotation)?;
                    (WARMUP_FACTOR * a, WARMUP_FACTOR * b)
                }
            };
            cfg.quantizers
                .par_iter()
                .map(|&q| power_run(cfg, &problem, seed, q, if q == QuantizerChoice::LatticeRotation { y_rot } else { y }))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(runs.into_iter().flatten().flatten().collect())
}

fn power_run(cfg: &ExperimentConfig, problem: &PowerProblem, seed: u64, choice: QuantizerChoice, y: f64) -> Result<Vec<ResultRecord>> {
    let (d, n) = (cfg.dim, cfg.machines);
    let shared = SharedRandomness::new(seed);
    let codec = build_codec(choice, cfg.q, y, d, shared)?;
    let warmup_bits = match cfg.y_rule {
        YRule::Fixed(_) => 0,
        _ => cfg.warmup as u64 * (n as u64 - 1) * FLOAT_BITS * d as u64,
    };
    let mut x = problem.start.clone();
    let mut out: Vec<ResultRecord> = Vec::with_capacity(cfg.iterations);
    let mut converged = false;
    for t in 0..cfg.iterations {
        let u = problem.products(&x);
        let mut rec = base_record(cfg, seed, choice, t, "synthetic");
        track_norms(&mut rec, &u);
        let step = quantized_average(u.clone(), codec.as_ref(), seed, RoundId(t as u64), &[])?;
        rec.quant_error = Some(sq_dist(&step.estimate, &mean_of(&u)));
        rec.bits = step.bits;
        rec.overhead_bits = if t == 0 { warmup_bits } else { 0 };
        rec.decode_failures = step.decode_failures;
        if choice.is_lattice() {
            rec.y = Some(y);
        }
        x = normalized(&step.estimate);
        let a = problem.alignment(&x);
        rec.alignment = Some(a);
        converged |= a >= CONVERGED_ALIGNMENT;
        let bad = !a.is_finite();
        rec.diverged = bad;
        out.push(rec);
        if bad {
            break;
        }
    }
    if !converged {
        if let Some(last) = out.last_mut() {
            last.diverged = true;
        }
    }
    Ok(out)
}
