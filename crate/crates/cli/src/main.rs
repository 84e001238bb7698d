//! `ldme`: runs the experiments and micro-benchmarks of the lattice-dme crate.

mod bench;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lattice_dme::experiments::{
    emit, mean_across_seeds, run, write_csv, ExperimentConfig, ExperimentKind, OutputFormat, QuantizerChoice,
    ResultRecord, YRule,
};

#[derive(Parser, Debug)]
#[command(name = "ldme", version, about = "Distributed mean estimation experiments")]
struct Cli {
    /// Directory for output files when neither --out nor the config names one.
    #[arg(long, global = true, env = "LDME_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distributed SGD on least squares.
    Dsgd(ExperimentArgs),
    /// Local SGD with quantized model deltas.
    LocalSgd(ExperimentArgs),
    /// Distributed power iteration.
    PowerIter(ExperimentArgs),
    /// Sub-linear budget simulation.
    SublinearSim(ExperimentArgs),
    /// Round-trip statistics of each quantizer on random input pairs.
    CodecBench(bench::CodecBenchArgs),
    /// Bits, error and success rate of the mean estimation protocols.
    ProtocolBench(bench::ProtocolBenchArgs),
}

#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// `key = value` config file. Flags override its settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Numbered preset to start from (1-6, 8).
    #[arg(long)]
    preset: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    machines: Option<usize>,
    /// Lattice modulus, and QSGD level count.
    #[arg(short, long)]
    q: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    seeds: Vec<u64>,
    /// Run a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: lattice, lattice+rotation, qsgd_l2, qsgd_range, hadamard, none.
    #[arg(long, value_delimiter = ',')]
    quantizers: Vec<QuantizerChoice>,
    /// fixed:<y>, scale15, scale3 or periodic16.
    #[arg(long)]
    y_rule: Option<YRule>,
    /// LIBSVM file to train on.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    init_weight: Option<f64>,
    #[arg(long)]
    local_steps: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    bits_per_coord: Option<f64>,
    /// Output file. Without it (and without --out-dir) CSV goes to stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// csv or json. Defaults to the output file's extension, else csv.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Replace per-seed rows with their mean.
    #[arg(long)]
    mean: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let out_dir = cli.out_dir.as_deref();
    match cli.command {
        Command::Dsgd(a) => experiment(ExperimentKind::Dsgd, a, out_dir),
        Command::LocalSgd(a) => experiment(ExperimentKind::LocalSgd, a, out_dir),
        Command::PowerIter(a) => experiment(ExperimentKind::PowerIter, a, out_dir),
        Command::SublinearSim(a) => experiment(ExperimentKind::SublinearSim, a, out_dir),
        Command::CodecBench(a) => bench::codec_bench(&a),
        Command::ProtocolBench(a) => bench::protocol_bench(&a),
    }
}

fn resolve(kind: ExperimentKind, a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = if let Some(path) = &a.config {
        ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
    } else if let Some(id) = a.preset {
        ExperimentConfig::preset(id)?
    } else {
        ExperimentConfig::new(kind)
    };
    if cfg.experiment != kind {
        bail!("config describes a {} run, not {kind}", cfg.experiment);
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(v) = a.dim {
        cfg.dim = v;
    }
    if let Some(v) = a.machines {
        cfg.machines = v;
    }
    if let Some(v) = a.q {
        cfg.q = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.iterations {
        cfg.iterations = v;
    }
    if let Some(s) = a.seed {
        cfg.seeds = vec![s];
    } else if !a.seeds.is_empty() {
        cfg.seeds = a.seeds.clone();
    }
    if !a.quantizers.is_empty() {
        cfg.quantizers = a.quantizers.clone();
    }
    if let Some(v) = a.y_rule {
        cfg.y_rule = v;
    }
    if let Some(v) = &a.dataset {
        cfg.dataset = Some(v.clone());
    }
    if let Some(v) = a.init_weight {
        cfg.init_weight = v;
    }
    if let Some(v) = a.local_steps {
        cfg.local_steps = v;
    }
    if let Some(v) = a.warmup {
        cfg.warmup = v;
    }
    if let Some(v) = a.bits_per_coord {
        cfg.bits_per_coord = v;
    }
    if let Some(v) = &a.out {
        cfg.output = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn format_for(path: Option<&Path>, explicit: Option<OutputFormat>) -> OutputFormat {
    explicit.unwrap_or_else(|| match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => OutputFormat::Json,
        _ => OutputFormat::Csv,
    })
}

fn experiment(kind: ExperimentKind, a: ExperimentArgs, out_dir: Option<&Path>) -> Result<()> {
    let cfg = resolve(kind, &a)?;
    if a.dry_run {
        print!("{}", cfg.to_kv());
        return Ok(());
    }
    let mut records = run(&cfg)?;
    if a.mean {
        records = mean_across_seeds(&records);
    }
    let path = cfg.output.clone().or_else(|| {
        out_dir.map(|d| {
            let ext = match a.format {
                Some(OutputFormat::Json) => "json",
                _ => "csv",
            };
            d.join(format!("{kind}.{ext}"))
        })
    });
    let format = format_for(path.as_deref(), a.format);
    match path {
        Some(p) => {
            emit(&records, &p, format)?;
            eprintln!("{}", summary(&records, &p));
        }
        None => write_stdout(&records, format)?,
    }
    Ok(())
}

fn write_stdout(records: &[ResultRecord], format: OutputFormat) -> Result<()> {
    let mut out = io::stdout().lock();
    match format {
        OutputFormat::Csv => write_csv(records, &mut out)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, records)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn summary(records: &[ResultRecord], path: &Path) -> String {
    let failures: u64 = records.iter().map(|r| r.decode_failures).sum();
    let diverged = records.iter().filter(|r| r.diverged).count();
    format!(
        "wrote {} rows to {} ({failures} decode failures, {diverged} diverged rows)",
        records.len(),
        path.display()
    )
}
