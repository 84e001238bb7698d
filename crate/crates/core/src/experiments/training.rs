//! Quantized distributed gradient descent and local SGD on least squares,
//! plus the sub-linear variance simulation.

use rayon::prelude::*;

use crate::error::Result;
use crate::protocols::{choose_leader, mean_of};
use crate::random::{RoundId, SharedRandomness};
use crate::sublinear::sublinear_variance_sim;

use super::config::{ExperimentConfig, QuantizerChoice, YRule};
use super::data::{extra_batch, gen_least_squares, parse_libsvm, shuffled_batches, Dataset};
use super::harness::{
    broadcast_charges, build_codec, calibration_charges, distance, l2, quantized_average, range, spread,
    sq_dist, y_rotation, FLOAT_BITS,
};
use super::records::ResultRecord;

/// Period of the `periodic16` refresh.
const PERIODIC_EVERY: usize = 5;

/// Data for one seed and the label written to the `dataset` column.
pub fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, &'static str)> {
    match &cfg.dataset {
        Some(p) if p.exists() => Ok((parse_libsvm(p)?, "libsvm")),
        Some(_) => Ok((gen_least_squares(cfg.samples, cfg.dim, seed)?.0, "synthetic-fallback")),
        None => Ok((gen_least_squares(cfg.samples, cfg.dim, seed)?.0, "synthetic")),
    }
}

/// Runs every (seed, quantizer) pair; rows come out in seed order, then
/// quantizer order, then iteration.
pub fn run_dsgd(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    per_seed_and_quantizer(cfg, |seed, q, data, source| dsgd_run(cfg, data, source, seed, q))
}

pub fn run_local_sgd(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    per_seed_and_quantizer(cfg, |seed, q, data, source| local_sgd_run(cfg, data, source, seed, q))
}

fn per_seed_and_quantizer<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<ResultRecord>>
where
    F: Fn(u64, QuantizerChoice, &Dataset, &str) -> Result<Vec<ResultRecord>> + Sync,
{
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (data, source) = load_dataset(cfg, seed)?;
            cfg.quantizers
                .par_iter()
                .map(|&q| f(seed, q, &data, source))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(runs.into_iter().flatten().flatten().collect())
}

/// Tracks `y` between iterations for one run.
struct YState {
    rule: YRule,
    y: Option<f64>,
}

impl YState {
    fn new(rule: YRule) -> Self {
        let y = match rule {
            YRule::Fixed(v) => Some(v),
            _ => None,
        };
        YState { rule, y }
    }
}

fn dsgd_run(cfg: &ExperimentConfig, data: &Dataset, source: &str, seed: u64, choice: QuantizerChoice) -> Result<Vec<ResultRecord>> {
    let (s, d, n) = (data.samples(), data.dim(), cfg.machines);
    let shared = SharedRandomness::new(seed);
    let rot = y_rotation(choice, d, &shared)?;
    let mut ys = YState::new(cfg.y_rule);
    let mut w = vec![cfg.init_weight; d];
    let mut out = Vec::with_capacity(cfg.iterations);
    let mut pending_broadcast = None;

    for t in 0..cfg.iterations {
        let batches = shuffled_batches(s, n, seed, t as u64);
        let grads: Vec<Vec<f64>> = batches.iter().map(|b| data.batch_gradient(&w, b)).collect();
        let full = data.gradient(&w);
        let mut rec = base_record(cfg, seed, choice, t, source);
        rec.loss = Some(data.loss(&w));
        track_norms(&mut rec, &grads);
        if !rec.loss.is_some_and(f64::is_finite) {
            rec.diverged = true;
            out.push(rec);
            break;
        }

        let mut overhead = Vec::new();
        if let Some(from) = pending_broadcast.take() {
            overhead.extend(broadcast_charges(n, from));
        }
        if ys.y.is_none() {
            overhead.extend(calibration_charges(n, d));
            ys.y = Some(ys.rule.factor() * spread(&grads, rot.as_ref())?);
        } else if ys.rule == YRule::Periodic16 && t % PERIODIC_EVERY == 0 {
            let g0b = data.batch_gradient(&w, &extra_batch(s, n, seed, t as u64));
            ys.y = Some(ys.rule.factor() * distance(&grads[0], &g0b, rot.as_ref())?);
            overhead.extend(broadcast_charges(n, 0));
        }
        let y = ys.y.expect("set above");

        let codec = build_codec(choice, cfg.q, y, d, shared)?;
        let step = quantized_average(grads.clone(), codec.as_ref(), seed, RoundId(t as u64), &overhead)?;
        rec.output_variance = Some(sq_dist(&step.estimate, &full));
        rec.input_variance = Some(grads.iter().map(|g| sq_dist(g, &full)).sum::<f64>() / n as f64);
        rec.quant_error = Some(sq_dist(&step.estimate, &mean_of(&grads)));
        rec.bits = step.bits;
        rec.overhead_bits = step.overhead_bits;
        rec.decode_failures = step.decode_failures;
        if choice.is_lattice() {
            rec.y = Some(y);
        }

        if matches!(ys.rule, YRule::Scale15 | YRule::Scale3) {
            ys.y = Some(ys.rule.factor() * spread(&step.quantized, rot.as_ref())?);
            if n > 2 {
                pending_broadcast = Some(choose_leader(&shared, RoundId(t as u64), n));
            }
        }
        w.iter_mut().zip(&step.estimate).for_each(|(w, g)| *w -= cfg.lr * g);
        let diverged = !w.iter().all(|v| v.is_finite());
        rec.diverged = diverged;
        out.push(rec);
        if diverged {
            break;
        }
    }
    Ok(out)
}

/// Each averaging round: machines start from the shared model, take
/// `local_steps` SGD steps on consecutive slices of their batch, and the
/// model differences are averaged through the codec.
fn local_sgd_run(cfg: &ExperimentConfig, data: &Dataset, source: &str, seed: u64, choice: QuantizerChoice) -> Result<Vec<ResultRecord>> {
    let (s, d, n) = (data.samples(), data.dim(), cfg.machines);
    let shared = SharedRandomness::new(seed);
    let rot = y_rotation(choice, d, &shared)?;
    let mut ys = YState::new(cfg.y_rule);
    let mut w = vec![cfg.init_weight; d];
    let mut out = Vec::with_capacity(cfg.iterations);
    let mut pending_broadcast = None;

    for t in 0..cfg.iterations {
        let mut rec = base_record(cfg, seed, choice, t, source);
        rec.loss = Some(data.loss(&w));
        if !rec.loss.is_some_and(f64::is_finite) {
            rec.diverged = true;
            out.push(rec);
            break;
        }
        let deltas: Vec<Vec<f64>> = shuffled_batches(s, n, seed, t as u64)
            .iter()
            .map(|batch| local_delta(data, &w, batch, cfg.local_steps, cfg.lr))
            .collect();
        track_norms(&mut rec, &deltas);

        let mut overhead = Vec::new();
        if let Some(from) = pending_broadcast.take() {
            overhead.extend(broadcast_charges(n, from));
        }
        if ys.y.is_none() || (ys.rule == YRule::Periodic16 && t % PERIODIC_EVERY == 0) {
            overhead.extend(calibration_charges(n, d));
            ys.y = Some(ys.rule.factor() * spread(&deltas, rot.as_ref())?);
        }
        let y = ys.y.expect("set above");
        let codec = build_codec(choice, cfg.q, y, d, shared)?;
        let step = quantized_average(deltas.clone(), codec.as_ref(), seed, RoundId(t as u64), &overhead)?;
        rec.quant_error = Some(sq_dist(&step.estimate, &mean_of(&deltas)));
        rec.bits = step.bits;
        rec.overhead_bits = step.overhead_bits;
        rec.decode_failures = step.decode_failures;
        if choice.is_lattice() {
            rec.y = Some(y);
        }
        if matches!(ys.rule, YRule::Scale15 | YRule::Scale3) {
            ys.y = Some(ys.rule.factor() * spread(&step.quantized, rot.as_ref())?);
            if n > 2 {
                pending_broadcast = Some(choose_leader(&shared, RoundId(t as u64), n));
            }
        }
        w.iter_mut().zip(&step.estimate).for_each(|(w, dw)| *w += dw);
        let diverged = !w.iter().all(|v| v.is_finite());
        rec.diverged = diverged;
        out.push(rec);
        if diverged {
            break;
        }
    }
    Ok(out)
}

/// Model difference after `steps` SGD steps from `w`, one slice of `batch`
/// per step.
pub(crate) fn local_delta(data: &Dataset, w: &[f64], batch: &[usize], steps: usize, lr: f64) -> Vec<f64> {
    let mut local = w.to_vec();
    let size = (batch.len() / steps).max(1);
    for k in 0..steps {
        let lo = (k * size) % batch.len();
        let slice = &batch[lo..(lo + size).min(batch.len())];
        let g = data.batch_gradient(&local, slice);
        local.iter_mut().zip(&g).for_each(|(x, g)| *x -= lr * g);
    }
    local.iter().zip(w).map(|(a, b)| a - b).collect()
}

/// Full-precision gradient descent on two batches per iteration, reporting
/// the variance the sub-linear codec would add at `bits_per_coord` with `y`
/// from the `periodic16` rule.
pub fn run_sublinear_sim(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (data, source) = load_dataset(cfg, seed)?;
            sublinear_sim_run(cfg, &data, source, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(runs.into_iter().flatten().collect())
}

fn sublinear_sim_run(cfg: &ExperimentConfig, data: &Dataset, source: &str, seed: u64) -> Result<Vec<ResultRecord>> {
    let (s, d, n) = (data.samples(), data.dim(), cfg.machines);
    let mut w = vec![cfg.init_weight; d];
    let mut y = match cfg.y_rule {
        YRule::Fixed(v) => v,
        _ => 0.0,
    };
    let bits = (cfg.bits_per_coord * d as f64).ceil() as u64;
    let mut out = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        let grads: Vec<Vec<f64>> = shuffled_batches(s, n, seed, t as u64)
            .iter()
            .map(|b| data.batch_gradient(&w, b))
            .collect();
        let full = data.gradient(&w);
        let mut rec = ResultRecord {
            quantizer: "sublinear".into(),
            ..base_record(cfg, seed, QuantizerChoice::None, t, source)
        };
        rec.loss = Some(data.loss(&w));
        track_norms(&mut rec, &grads);
        if !matches!(cfg.y_rule, YRule::Fixed(_)) && t % PERIODIC_EVERY == 0 {
            let g0b = data.batch_gradient(&w, &extra_batch(s, n, seed, t as u64));
            y = cfg.y_rule.factor() * distance(&grads[0], &g0b, None)?;
            rec.overhead_bits = FLOAT_BITS * (n as u64 - 1);
        }
        let sim = sublinear_variance_sim(y, d, cfg.bits_per_coord)?;
        rec.y = Some(y);
        rec.output_variance = Some(sim.variance);
        rec.input_variance = Some(grads.iter().map(|g| sq_dist(g, &full)).sum::<f64>() / n as f64);
        rec.bits = bits * (n as u64 - 1);
        let avg = mean_of(&grads);
        w.iter_mut().zip(&avg).for_each(|(w, g)| *w -= cfg.lr * g);
        rec.diverged = !w.iter().all(|v| v.is_finite());
        let stop = rec.diverged;
        out.push(rec);
        if stop {
            break;
        }
    }
    Ok(out)
}

pub(crate) fn base_record(cfg: &ExperimentConfig, seed: u64, choice: QuantizerChoice, t: usize, source: &str) -> ResultRecord {
    ResultRecord {
        experiment: cfg.experiment.to_string(),
        seed: Some(seed),
        quantizer: choice.to_string(),
        iteration: t as u64,
        dataset: source.to_string(),
        ..Default::default()
    }
}

/// The four tracked norms, from the first two machines' vectors.
pub(crate) fn track_norms(rec: &mut ResultRecord, v: &[Vec<f64>]) {
    let diff: Vec<f64> = v[0].iter().zip(&v[1]).map(|(a, b)| a - b).collect();
    rec.g_diff_l2 = Some(l2(&diff));
    rec.g_diff_linf = Some(diff.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
    rec.g0_l2 = Some(l2(&v[0]));
    rec.g0_range = Some(range(&v[0]));
}
