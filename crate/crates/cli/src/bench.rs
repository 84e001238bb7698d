//! Quick benchmarks of single codecs and whole protocols on random inputs.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use clap::{Args, ValueEnum};
use lattice_dme::experiments::{build_codec, QuantizerChoice};
use lattice_dme::protocols::{
    allgather_mean_estimation, linf_distance, robust_variance_reduction, star_mean_estimation,
    tree_mean_estimation, variance_reduction, ProtocolResult, SimNetwork, Topology, VrParams,
};
use lattice_dme::quantizer::{EncodeMode, QuantParams};
use lattice_dme::rotation::RotationSpec;
use lattice_dme::{Domain, RoundId, SharedRandomness};
use rand::Rng;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Report {
    #[default]
    Table,
    Json,
}

#[derive(Args, Debug)]
pub struct CodecBenchArgs {
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(short, long, default_value_t = 16)]
    q: u64,
    /// l-infinity distance between the input and the decoder's reference.
    #[arg(long, default_value_t = 0.1)]
    spread: f64,
    /// Fixed distance bound. By default each trial uses 1.5 times the
    /// measured distance in the codec's own coordinates.
    #[arg(long)]
    y: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = QuantizerChoice::ALL)]
    quantizers: Vec<QuantizerChoice>,
    #[arg(long, value_enum, default_value_t)]
    format: Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolChoice {
    Star,
    Allgather,
    Tree,
    VrStar,
    VrTree,
    RobustVr,
}

impl ProtocolChoice {
    pub const ALL: [ProtocolChoice; 6] = [
        ProtocolChoice::Star,
        ProtocolChoice::Allgather,
        ProtocolChoice::Tree,
        ProtocolChoice::VrStar,
        ProtocolChoice::VrTree,
        ProtocolChoice::RobustVr,
    ];

    fn as_str(self) -> &'static str {
        match self {
            ProtocolChoice::Star => "star",
            ProtocolChoice::Allgather => "allgather",
            ProtocolChoice::Tree => "tree",
            ProtocolChoice::VrStar => "vr-star",
            ProtocolChoice::VrTree => "vr-tree",
            ProtocolChoice::RobustVr => "robust-vr",
        }
    }

    fn is_variance_reduction(self) -> bool {
        matches!(self, ProtocolChoice::VrStar | ProtocolChoice::VrTree | ProtocolChoice::RobustVr)
    }
}

impl fmt::Display for ProtocolChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| anyhow!("unknown protocol {s:?}"))
    }
}

#[derive(Args, Debug)]
pub struct ProtocolBenchArgs {
    #[arg(long, default_value_t = 8)]
    machines: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Lattice modulus for star, allgather and robust VR.
    #[arg(short, long, default_value_t = 16)]
    q: u64,
    /// Tree parameter `m` (modulus `m^3`, `m` sampled machines).
    #[arg(long, default_value_t = 4)]
    m: u64,
    /// Largest pairwise l-infinity distance of mean estimation inputs.
    #[arg(long, default_value_t = 0.1)]
    spread: f64,
    /// Standard deviation (l2) of the variance reduction inputs.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated: star, allgather, tree, vr-star, vr-tree, robust-vr.
    #[arg(long, value_delimiter = ',', default_values_t = ProtocolChoice::ALL)]
    protocols: Vec<ProtocolChoice>,
    #[arg(long, value_enum, default_value_t)]
    format: Report,
}

fn uniform_vec<R: Rng>(rng: &mut R, d: usize, half_width: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn report(rows: &[Value], columns: &[&str], format: Report) -> Result<()> {
    match format {
        Report::Json => println!("{}", serde_json::to_string_pretty(rows)?),
        Report::Table => {
            let cell = |v: &Value| match v {
                Value::String(s) => s.clone(),
                Value::Number(n) if n.is_f64() => format!("{:.6e}", n.as_f64().unwrap_or(f64::NAN)),
                v => v.to_string(),
            };
            println!("{}", columns.iter().map(|c| format!("{c:>16}")).collect::<Vec<_>>().join(" "));
            for row in rows {
                let line: Vec<String> = columns.iter().map(|c| format!("{:>16}", cell(&row[*c]))).collect();
                println!("{}", line.join(" "));
            }
        }
    }
    Ok(())
}

pub fn codec_bench(a: &CodecBenchArgs) -> Result<()> {
    if a.dim == 0 || a.trials == 0 {
        bail!("dim and trials must be positive");
    }
    if !(a.spread >= 0.0 && a.spread.is_finite()) {
        bail!("spread must be finite and >= 0");
    }
    let shared = SharedRandomness::new(a.seed);
    let mut rng = shared.stream(Domain::Data, RoundId(0), 0);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..a.trials)
        .map(|_| {
            let x_ref = uniform_vec(&mut rng, a.dim, 1.0);
            let x = add(&x_ref, &uniform_vec(&mut rng, a.dim, a.spread));
            (x, x_ref)
        })
        .collect();

    let mut rows = Vec::new();
    for &choice in &a.quantizers {
        let rotation = if choice.is_rotated() && choice.is_lattice() {
            Some(RotationSpec::new(a.dim, &shared)?)
        } else {
            None
        };
        let (mut bits, mut mse, mut max_err, mut failures) = (0u64, 0.0, 0.0f64, 0u64);
        for (t, (x, x_ref)) in pairs.iter().enumerate() {
            let y = match (a.y, &rotation) {
                (Some(y), _) => y,
                (None, Some(r)) => 1.5 * linf_distance(&r.rotate(x)?, &r.rotate(x_ref)?),
                (None, None) => 1.5 * linf_distance(x, x_ref),
            };
            let codec = build_codec(choice, a.q, y, a.dim, shared)?;
            let round = RoundId(t as u64);
            let enc = codec.encode(x, round)?;
            let dec = codec.decode(&enc.bits, x_ref, round)?;
            bits += enc.bits.len() as u64;
            failures += (dec != enc.value) as u64;
            mse += sq_dist(&dec, x);
            max_err = max_err.max(linf_distance(&dec, x));
        }
        let n = a.trials as f64;
        rows.push(json!({
            "quantizer": choice.as_str(),
            "bits": bits as f64 / n,
            "bits_per_coord": bits as f64 / n / a.dim as f64,
            "mse": mse / n,
            "max_linf_error": max_err,
            "decode_failures": failures,
        }));
    }
    report(
        &rows,
        &["quantizer", "bits", "bits_per_coord", "mse", "max_linf_error", "decode_failures"],
        a.format,
    )
}

pub fn protocol_bench(a: &ProtocolBenchArgs) -> Result<()> {
    if a.machines == 0 || a.dim == 0 || a.trials == 0 {
        bail!("machines, dim and trials must be positive");
    }
    if !(a.spread > 0.0 && a.sigma > 0.0) {
        bail!("spread and sigma must be positive");
    }
    let n = a.machines;
    let shared = SharedRandomness::new(a.seed);
    let mut rows = Vec::new();
    for &protocol in &a.protocols {
        let mut rng = shared.stream(Domain::Data, RoundId(1), 0);
        let (mut max_bits, mut total_bits, mut mse, mut successes) = (0u64, 0u64, 0.0, 0usize);
        for t in 0..a.trials {
            let center = uniform_vec(&mut rng, a.dim, 1.0);
            // Uniform noise with total variance sigma^2.
            let half = if protocol.is_variance_reduction() {
                a.sigma * (3.0 / a.dim as f64).sqrt()
            } else {
                a.spread / 2.0
            };
            let inputs: Vec<Vec<f64>> = (0..n).map(|_| add(&center, &uniform_vec(&mut rng, a.dim, half))).collect();
            let mut net = SimNetwork::new(inputs, a.seed)?;
            let target = if protocol.is_variance_reduction() { center } else { net.mean() };
            let round = RoundId(t as u64);
            let params = || QuantParams::new(a.q, a.spread, a.dim, shared, EncodeMode::SharedOffset);
            let r: ProtocolResult = match protocol {
                ProtocolChoice::Star => star_mean_estimation(&mut net, &params()?, round)?,
                ProtocolChoice::Allgather => allgather_mean_estimation(&mut net, &params()?, round)?,
                ProtocolChoice::Tree => tree_mean_estimation(&mut net, a.m, a.spread, round)?,
                ProtocolChoice::VrStar => {
                    variance_reduction(&mut net, &VrParams::optimal(n, a.sigma, Topology::Star), round)?
                }
                ProtocolChoice::VrTree => {
                    variance_reduction(&mut net, &VrParams::optimal(n, a.sigma, Topology::Tree), round)?
                }
                ProtocolChoice::RobustVr => robust_variance_reduction(&mut net, a.sigma, a.q, round)?,
            };
            max_bits += r.meter.max_machine_bits();
            total_bits += r.meter.total_sent();
            mse += r.outputs.iter().map(|o| sq_dist(o, &target)).sum::<f64>() / n as f64;
            successes += r.success as usize;
        }
        let trials = a.trials as f64;
        rows.push(json!({
            "protocol": protocol.as_str(),
            "max_machine_bits": max_bits as f64 / trials,
            "total_bits": total_bits as f64 / trials,
            "mse": mse / trials,
            "success_rate": successes as f64 / trials,
        }));
    }
    report(
        &rows,
        &["protocol", "max_machine_bits", "total_bits", "mse", "success_rate"],
        a.format,
    )
}
