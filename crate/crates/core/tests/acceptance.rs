//! Acceptance suite. Runs each criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use lattice_dme::experiments::{
    run_dsgd, run_power_iteration, ExperimentConfig, ExperimentKind, QuantizerChoice, ResultRecord,
};
use lattice_dme::lattice::{count_points_in_ball, nearest_point, LatticeSpec, Norm};
use lattice_dme::protocols::{
    allgather_mean_estimation, robust_variance_reduction, star_mean_estimation, tree_mean_estimation,
    tree_params, variance_reduction, mean_of, Phase, SimNetwork, Topology, VrParams, TREE_MESSAGE_CAP,
};
use lattice_dme::quantizer::{perturb_within, EncodeMode, LatticeCodec, QuantParams};
use lattice_dme::robust::{robust_agreement, robust_decode, robust_encode, Direction, RobustConfig, RobustOutcome, RobustSession};
use lattice_dme::rotation::{concentration_bound, fwht, RotationSpec};
use lattice_dme::sublinear::{
    sublinear_decode, sublinear_encode, sublinear_variance_sim, SublinearParams,
};
use lattice_dme::{RoundId, SharedRandomness, VectorCodec};

use common::{linf, sq_dist, z_critical, Moments};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);
/// Input, estimate, iterations used, decode agreement.
type SublinearTrial = (Vec<f64>, Vec<f64>, usize, bool);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// 10^4 pairs per (d, q) within the decoding radius, 10% of them with the
/// reference pushed to the corner of the allowed box.
fn c1_codec_decodes() -> Outcome {
    let mut total = 0;
    for d in [16, 100, 128] {
        for q in [4u64, 8, 64] {
            let shared = SharedRandomness::new(1000 + d as u64 * 100 + q);
            let params = QuantParams::new(q, 1.0, d, shared, EncodeMode::SharedOffset).map_err(|e| e.to_string())?;
            let radius = (q - 1) as f64 * params.side() / 2.0;
            let codec = LatticeCodec::new(params);
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64 * 7 + q);
            let mut mismatches = 0;
            for t in 0..10_000u64 {
                let x = gaussian_vec(&mut rng, d, 50.0);
                let x_ref = if t % 10 == 0 {
                    x.iter().map(|v| v + if rng.random::<bool>() { radius } else { -radius }).collect()
                } else {
                    perturb_within(&x, radius, &mut rng)
                };
                let enc = codec.encode(&x, RoundId(t)).map_err(|e| e.to_string())?;
                let dec = codec.decode(&enc.bits, &x_ref, RoundId(t)).map_err(|e| e.to_string())?;
                if dec != enc.value {
                    mismatches += 1;
                }
                total += 1;
            }
            ensure(mismatches == 0, || format!("d={d} q={q}: {mismatches} mismatches"))?;
        }
    }
    Ok(format!("{total} pairs, 0 mismatches"))
}

fn c2_unbiased() -> Outcome {
    let crit = z_critical(1e-4);
    let d = 16;
    let n = 100_000u64;
    let mut worst = Vec::new();
    for mode in [EncodeMode::SharedOffset, EncodeMode::StochasticHull] {
        let params = QuantParams::new(8, 1.0, d, SharedRandomness::new(2), mode).map_err(|e| e.to_string())?;
        let codec = LatticeCodec::new(params);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = gaussian_vec(&mut rng, d, 3.0);
        let mut m = Moments::new(d);
        for r in 0..n {
            let enc = codec.encode(&x, RoundId(r)).map_err(|e| e.to_string())?;
            m.push(&enc.value, &x);
        }
        let z = m.max_abs_z();
        ensure(z < crit, || format!("{mode:?}: max |z| = {z:.3} >= {crit:.3}"))?;
        worst.push(format!("{mode:?} max|z|={z:.2}"));
    }
    Ok(format!("N={n}, d={d}, critical {crit:.3}; {}", worst.join(", ")))
}

fn c3_bits() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let d = rng.random_range(1..=300usize);
        let q = rng.random_range(2..=5000u64);
        // ceil(d log2 q) is the bit length of q^d - 1
        let oracle = (BigUint::from(q).pow(d as u32) - 1u32).bits() as usize;
        let params = QuantParams::new(q, 1.0, d, SharedRandomness::new(q), EncodeMode::SharedOffset).map_err(|e| e.to_string())?;
        let x = gaussian_vec(&mut rng, d, 1.0);
        let len = LatticeCodec::new(params).encode(&x, RoundId(0)).map_err(|e| e.to_string())?.bits.len();
        ensure(len == oracle, || format!("d={d} q={q}: {len} bits, expected {oracle}"))?;
    }
    let params = QuantParams::new(8, 1.0, 100, SharedRandomness::new(0), EncodeMode::SharedOffset).map_err(|e| e.to_string())?;
    let len = LatticeCodec::new(params).encode(&vec![0.3; 100], RoundId(0)).map_err(|e| e.to_string())?.bits.len();
    ensure(len == 300, || format!("q=8 d=100 gave {len} bits"))?;
    Ok("50 random (d, q) match the big-integer oracle; q=8, d=100 -> 300 bits".into())
}

/// Brute-force count over the box of candidate coordinates.
fn brute_count(center: &[f64], radius: f64, spec: &LatticeSpec, norm: Norm) -> u64 {
    let s = spec.side();
    let ranges: Vec<(i64, i64)> = center
        .iter()
        .zip(spec.offset())
        .map(|(c, t)| (((c - radius - t) / s).floor() as i64 - 1, ((c + radius - t) / s).ceil() as i64 + 1))
        .collect();
    let mut count = 0;
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        let p: Vec<f64> = idx.iter().zip(spec.offset()).map(|(&a, t)| t + s * a as f64).collect();
        let dist = match norm {
            Norm::LInf => linf(&p, center),
            Norm::L2 => sq_dist(&p, center).sqrt(),
        };
        if dist <= radius {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return count;
            }
            idx[k] += 1;
            if idx[k] <= ranges[k].1 {
                break;
            }
            idx[k] = ranges[k].0;
            k += 1;
        }
    }
}

fn c4_ball_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for d in [2usize, 3] {
        for _ in 0..100 {
            let s = rng.random_range(0.1..2.0);
            let spec = LatticeSpec::with_random_offset(d, s, &mut rng).map_err(|e| e.to_string())?;
            let center = gaussian_vec(&mut rng, d, 10.0);
            let radius = rng.random_range(0.05..12.0) * s;
            for norm in [Norm::LInf, Norm::L2] {
                let count = count_points_in_ball(&center, radius, &spec, norm).map_err(|e| e.to_string())?;
                let brute = brute_count(&center, radius, &spec, norm);
                ensure(count == brute, || format!("d={d} {norm:?}: count {count} vs brute force {brute}"))?;
                let (rc, rp) = (spec.cover_radius(norm), spec.packing_radius(norm));
                // the covering argument needs radius >= r_c; below that the
                // lower bound is 0, not the d-th power of a negative number
                let lo = ((radius - rc) / rc).max(0.0).powi(d as i32);
                let hi = ((radius + rp) / rp).powi(d as i32);
                ensure(lo <= count as f64 && count as f64 <= hi, || {
                    format!("d={d} {norm:?} radius {radius}: {count} outside [{lo}, {hi}]")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (center, radius, norm) cases inside the bounds"))
}

fn c5_fwht() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut d = 2;
    while d <= 1024 {
        for _ in 0..20 {
            let v = gaussian_vec(&mut rng, d, 1.0);
            let h = fwht(&v).map_err(|e| e.to_string())?;
            let back = fwht(&h).map_err(|e| e.to_string())?;
            let inv = linf(&v, &back);
            let norm_gap = (sq_dist(&h, &vec![0.0; d]).sqrt() - sq_dist(&v, &vec![0.0; d]).sqrt()).abs();
            worst = worst.max(inv).max(norm_gap);
            ensure(inv <= 1e-9 && norm_gap <= 1e-9, || format!("d_pad={d}: involution {inv:e}, norm {norm_gap:e}"))?;
        }
        d *= 2;
    }
    let (d, n, trials) = (256, 2, 10_000u64);
    let bound = concentration_bound(n, d);
    let mut violations = 0;
    for t in 0..trials {
        let rot = RotationSpec::new(d, &SharedRandomness::new(t)).map_err(|e| e.to_string())?;
        let x: Vec<f64> = match t % 3 {
            0 => gaussian_vec(&mut rng, d, 1.0),
            1 => vec![1.0; d],
            _ => (0..d).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect(),
        };
        let norm = sq_dist(&x, &vec![0.0; d]).sqrt();
        let r = rot.rotate(&x).map_err(|e| e.to_string())?;
        if r.iter().any(|v| v.abs() > bound * norm) {
            violations += 1;
        }
    }
    let rate = violations as f64 / trials as f64;
    ensure(rate <= 0.05, || format!("violation rate {rate}"))?;
    Ok(format!("max error {worst:.1e} over d_pad 2..1024; violation rate {rate} at d=256"))
}

fn c6_robust() -> Outcome {
    let (q, d) = (8u64, 16);
    let params = QuantParams::new(q, 1.0, d, SharedRandomness::new(6), EncodeMode::SharedOffset).map_err(|e| e.to_string())?;
    let s = params.side();
    let config = RobustConfig::with_defaults(params).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let (mut far, mut silent) = (0, 0);
    for t in 0..100_000u64 {
        let x = gaussian_vec(&mut rng, d, 10.0);
        let mut x_v: Vec<f64> = x.iter().map(|v| v + rng.random_range(-1.0..1.0) * 10.0 * q as f64 * s).collect();
        x_v[(t % d as u64) as usize] = x[(t % d as u64) as usize] + 10.0 * q as f64 * s;
        let mut session = RobustSession::new(config.clone(), RoundId(t));
        let msg = robust_encode(&x, &mut session).map_err(|e| e.to_string())?;
        let truth = session.lattice().embed(session.point().expect("encoded"));
        match robust_decode(&msg, &x_v, &session).map_err(|e| e.to_string())? {
            RobustOutcome::Far => far += 1,
            RobustOutcome::Decoded(v) => {
                if v != truth {
                    silent += 1;
                }
            }
        }
    }
    ensure(silent == 0, || format!("{silent} silent corruptions in 10^5 far pairs"))?;

    let radius = (q - 1) as f64 * s / 2.0;
    for t in 0..1000u64 {
        let x = gaussian_vec(&mut rng, d, 10.0);
        let x_v = perturb_within(&x, radius, &mut rng);
        let a = robust_agreement(&x, &x_v, &config, RoundId(t)).map_err(|e| e.to_string())?;
        let spec = config.params().lattice(RoundId(t));
        let truth = spec.embed(&nearest_point(&x, &spec).map_err(|e| e.to_string())?);
        ensure(a.escalations == 0 && a.estimate == truth, || format!("near pair {t} escalated {} times", a.escalations))?;
    }

    // planted outlier 100 q s away: moduli 8, 64 fail, 4096 decodes
    let x = vec![0.25; d];
    let mut x_v = x.clone();
    x_v[3] += 100.0 * q as f64 * s;
    let a = robust_agreement(&x, &x_v, &config, RoundId(7)).map_err(|e| e.to_string())?;
    let moduli: Vec<u64> = a.transcript.iter().filter(|e| e.direction == Direction::Forward).map(|e| e.modulus).collect();
    let replies: Vec<usize> = a.transcript.iter().filter(|e| e.direction == Direction::Reply).map(|e| e.bits).collect();
    ensure(moduli == vec![8, 64, 4096], || format!("moduli {moduli:?}"))?;
    ensure(replies == vec![1, 1], || format!("replies {replies:?}"))?;
    let spec = config.params().lattice(RoundId(7));
    ensure(a.estimate == spec.embed(&nearest_point(&x, &spec).unwrap()), || "outlier decoded wrong point".into())?;
    Ok(format!("far: {far} Far / 0 silent of 10^5; 1000 near pairs in one iteration; outlier schedule {moduli:?}"))
}

fn cluster(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> Vec<Vec<f64>> {
    let center = gaussian_vec(rng, d, 20.0);
    (0..n)
        .map(|_| center.iter().map(|c| c + rng.random_range(-spread / 2.0..=spread / 2.0)).collect())
        .collect()
}

fn c7_protocols() -> Outcome {
    let results: Vec<Result<(), String>> = (0..1000u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + run);
            let n = [4, 8, 16][(run % 3) as usize];
            let d = rng.random_range(1..=48usize);
            let y = rng.random_range(0.1..5.0);
            let q = [8u64, 16, 64][rng.random_range(0..3)];
            let m = rng.random_range(2..=n as u64);
            let inputs = cluster(&mut rng, n, d, y / 2.0);
            let e = |e: lattice_dme::Error| e.to_string();

            let mut net = SimNetwork::new(inputs.clone(), run).map_err(e)?;
            let params = QuantParams::new(q, y, d, net.shared(), EncodeMode::SharedOffset).map_err(e)?;
            let star = star_mean_estimation(&mut net, &params, RoundId(run)).map_err(e)?;

            let mut net = SimNetwork::new(inputs.clone(), run).map_err(e)?;
            let all = allgather_mean_estimation(&mut net, &params, RoundId(run)).map_err(e)?;

            let mut net = SimNetwork::new(inputs.clone(), run).map_err(e)?;
            net.charge(Phase::Setup, 0, 1, 64, "seed");
            let tree = tree_mean_estimation(&mut net, m, y, RoundId(run)).map_err(e)?;
            let cap = TREE_MESSAGE_CAP as u64 * tree_params(m, y, d, net.shared()).map_err(e)?.bit_len() as u64;

            let mut net = SimNetwork::new(inputs.clone(), run).map_err(e)?;
            let robust = robust_variance_reduction(&mut net, y, q, RoundId(run)).map_err(e)?;

            for (name, r) in [("star", &star), ("allgather", &all), ("tree", &tree), ("robust", &robust)] {
                ensure(r.success, || format!("run {run} {name}: not successful {:?}", r.diagnostics))?;
                ensure(r.outputs_identical(), || format!("run {run} {name}: outputs differ"))?;
                ensure(r.meter.is_conserved(), || format!("run {run} {name}: meter not conserved"))?;
            }
            for v in 0..n {
                let (s, rcv) = (tree.meter.sent()[v], tree.meter.received()[v]);
                ensure(s <= cap && rcv <= cap, || format!("run {run} tree machine {v}: {s}/{rcv} bits over cap {cap}"))?;
            }
            Ok(())
        })
        .collect();
    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    ensure(failures.is_empty(), || format!("{} failing runs, first: {}", failures.len(), failures[0]))?;
    Ok("1000 runs x {star, allgather, tree, robust}: identical outputs, conserved meters, tree cap held".into())
}

fn c8_variance_reduction() -> Outcome {
    let (n, sigma, d, trials) = (16usize, 1.0f64, 64usize, 1000u64);
    let noise = Normal::new(0.0, sigma / (d as f64).sqrt()).unwrap();
    let mut report = Vec::new();
    for topology in [Topology::Star, Topology::Tree] {
        let vr = VrParams::optimal(n, sigma, topology);
        let stats: Vec<(f64, f64, bool)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(8000 + t);
                let truth = gaussian_vec(&mut rng, d, 100.0);
                let inputs: Vec<Vec<f64>> = (0..n)
                    .map(|_| truth.iter().map(|v| v + noise.sample(&mut rng)).collect())
                    .collect();
                let naive = sq_dist(&mean_of(&inputs), &truth);
                let mut net = SimNetwork::new(inputs, t).unwrap();
                let r = variance_reduction(&mut net, &vr, RoundId(t)).unwrap();
                (sq_dist(r.estimate(), &truth), naive, r.success && r.outputs_identical())
            })
            .collect();
        let mse = stats.iter().map(|s| s.0).sum::<f64>() / trials as f64;
        let naive = stats.iter().map(|s| s.1).sum::<f64>() / trials as f64;
        let failed = stats.iter().filter(|s| !s.2).count();
        let limit = 2.0 * sigma * sigma / n as f64;
        ensure(mse <= limit, || format!("{topology:?}: MSE {mse:.4} > {limit:.4} (averaging oracle {naive:.4})"))?;
        report.push(format!("{topology:?} MSE {mse:.4} (oracle {naive:.4}, {failed} unsuccessful)"));
    }
    Ok(format!("limit {:.4}; {}", 2.0 * sigma * sigma / n as f64, report.join("; ")))
}

fn seed_mean(rows: &[ResultRecord], quantizer: &str, it: u64, f: fn(&ResultRecord) -> Option<f64>) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.quantizer == quantizer && r.iteration == it)
        .filter_map(f)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c9_experiment2() -> Outcome {
    let cfg = ExperimentConfig {
        quantizers: vec![
            QuantizerChoice::Lattice,
            QuantizerChoice::QsgdL2,
            QuantizerChoice::QsgdRange,
            QuantizerChoice::Hadamard,
        ],
        ..ExperimentConfig::preset(2).unwrap()
    };
    let rows = run_dsgd(&cfg).map_err(|e| e.to_string())?;
    let failures: u64 = rows.iter().filter(|r| r.quantizer == "lattice").map(|r| r.decode_failures).sum();
    ensure(failures == 0, || format!("{failures} lattice decode failures under scale15"))?;
    let its: Vec<u64> = (3..cfg.iterations as u64).collect();
    let (mut below_input, mut below_all) = (0, 0);
    for &t in &its {
        let lat = seed_mean(&rows, "lattice", t, |r| r.output_variance);
        let input = seed_mean(&rows, "lattice", t, |r| r.input_variance);
        if lat < input {
            below_input += 1;
        }
        if ["qsgd_l2", "qsgd_range", "hadamard"]
            .iter()
            .all(|q| lat < seed_mean(&rows, q, t, |r| r.output_variance))
        {
            below_all += 1;
        }
    }
    let (fa, fb) = (below_input as f64 / its.len() as f64, below_all as f64 / its.len() as f64);
    ensure(fa >= 0.9 && fb >= 0.9, || format!("below input at {fa:.2}, below baselines at {fb:.2} of iterations"))?;
    Ok(format!(
        "5 seeds, {} iterations: below input variance at {:.0}%, below all baselines at {:.0}%",
        its.len(),
        100.0 * fa,
        100.0 * fb
    ))
}

fn c10_norm_gap() -> Outcome {
    let cfg = ExperimentConfig::preset(1).unwrap();
    let rows = run_dsgd(&cfg).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for r in rows.iter().filter(|r| r.iteration >= 1) {
        let (dl2, dinf, g0, range) = (r.g_diff_l2.unwrap(), r.g_diff_linf.unwrap(), r.g0_l2.unwrap(), r.g0_range.unwrap());
        ensure(dinf < range && dl2 < g0, || format!("seed {:?} it {}: {dinf} vs {range}, {dl2} vs {g0}", r.seed, r.iteration))?;
        checked += 1;
    }
    Ok(format!("{checked} (seed, iteration) rows satisfy both inequalities"))
}

fn c11_sublinear() -> Outcome {
    let (d, q, eps) = (8usize, 1.0, 0.5);
    let params = SublinearParams::new(q, eps, d, SharedRandomness::new(11)).map_err(|e| e.to_string())?;
    let trials = 10_000u64;
    let results: Vec<Result<SublinearTrial, String>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(11_000 + t);
            let x = gaussian_vec(&mut rng, d, 3.0);
            let dir = gaussian_vec(&mut rng, d, 1.0);
            let norm = sq_dist(&dir, &vec![0.0; d]).sqrt();
            let r = params.decode_radius() * rng.random::<f64>();
            let x_ref: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + r * b / norm).collect();
            let enc = sublinear_encode(&x, &params, RoundId(t)).map_err(|e| e.to_string())?;
            let dec = sublinear_decode(&enc.message, &x_ref, &params, RoundId(t)).map_err(|e| e.to_string())?;
            Ok((x, enc.estimate.clone(), enc.neighborhood_sizes.len(), dec == enc.estimate))
        })
        .collect();
    let mut m = Moments::new(d);
    let (mut iterations, mut disagree) = (0usize, 0);
    for r in results {
        let (x, est, its, agree) = r?;
        m.push(&est, &x);
        iterations += its;
        disagree += !agree as usize;
    }
    let crit = z_critical(1e-4);
    let z = m.max_abs_z();
    ensure(z < crit, || format!("max |z| {z:.3} >= {crit:.3}"))?;
    ensure(disagree == 0, || format!("{disagree} decodes disagree with the encoder"))?;
    let rate = trials as f64 / iterations as f64;
    let p = 1.0 - 2.0 * (1.0 + 2.0 * q).powi(-(d as i32));
    let sigma = (p * (1.0 - p) / iterations as f64).sqrt();
    ensure(rate >= p - 3.0 * sigma, || format!("success rate {rate} < {p} - 3 sigma"))?;

    let y = 0.75;
    let sim = sublinear_variance_sim(y, 256, 0.5).map_err(|e| e.to_string())?;
    let s = 4.0 * y / (2f64.sqrt() - 1.0);
    ensure(sim.side == s, || format!("side {} vs {s}", sim.side))?;
    ensure(sim.variance == 256.0 * s * s / 12.0, || format!("variance {} vs {}", sim.variance, 256.0 * s * s / 12.0))?;
    Ok(format!("max|z|={z:.2}, 10^4 decodes agree, success rate {rate:.5} >= {p:.5}, sim formulas exact"))
}

fn c12_power_iteration() -> Outcome {
    let cfg = ExperimentConfig {
        quantizers: vec![QuantizerChoice::None, QuantizerChoice::Lattice, QuantizerChoice::LatticeRotation],
        ..ExperimentConfig::new(ExperimentKind::PowerIter)
    };
    let rows = run_power_iteration(&cfg).map_err(|e| e.to_string())?;
    let mut gaps = Vec::new();
    for &seed in &cfg.seeds {
        let run = |q: &str| -> Vec<&ResultRecord> { rows.iter().filter(|r| r.seed == Some(seed) && r.quantizer == q).collect() };
        let none = run("none");
        let hit = none.iter().position(|r| r.alignment.unwrap() >= 0.99);
        ensure(hit.is_some(), || format!("seed {seed}: unquantized run never reaches 0.99"))?;
        let base = none.last().unwrap().alignment.unwrap();
        for q in ["lattice", "lattice+rotation"] {
            let r = run(q);
            let a = r.last().unwrap().alignment.unwrap();
            ensure((a - base).abs() <= 0.01, || format!("seed {seed} {q}: alignment {a} vs {base}"))?;
            ensure(r.iter().all(|x| x.decode_failures == 0), || format!("seed {seed} {q}: decode failures"))?;
            gaps.push((a - base).abs());
        }
    }
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Ok(format!("unquantized reaches 0.99 on every seed; worst lattice gap {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "codec correctness", c1_codec_decodes),
        (2, "unbiasedness z-tests", c2_unbiased),
        (3, "bit exactness", c3_bits),
        (4, "lattice ball counts", c4_ball_counts),
        (5, "FWHT and rotation concentration", c5_fwht),
        (6, "robust detection", c6_robust),
        (7, "protocol invariants", c7_protocols),
        (8, "variance reduction", c8_variance_reduction),
        (9, "least-squares output variance", c9_experiment2),
        (10, "norm gap", c10_norm_gap),
        (11, "sublinear codec", c11_sublinear),
        (12, "power iteration", c12_power_iteration),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2} ({name}): {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id:>2} ({name}): {why} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
