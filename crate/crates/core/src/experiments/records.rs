//! Per-iteration result rows and their CSV / JSON files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row per (experiment, seed, quantizer, iteration). Columns that do
/// not apply to an experiment are `None` (an empty CSV cell).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    /// `None` on rows averaged across seeds.
    pub seed: Option<u64>,
    pub quantizer: String,
    pub iteration: u64,
    pub loss: Option<f64>,
    /// `||EST - grad||^2` against the full-data gradient.
    pub output_variance: Option<f64>,
    /// Mean over machines of `||g_i - grad||^2`.
    pub input_variance: Option<f64>,
    /// `||Q(x) - x||^2` for the averaged quantity.
    pub quant_error: Option<f64>,
    pub alignment: Option<f64>,
    /// Protocol bits sent by all machines this iteration.
    pub bits: u64,
    /// Calibration and control bits (y broadcasts, warmup).
    pub overhead_bits: u64,
    pub y: Option<f64>,
    pub g_diff_l2: Option<f64>,
    pub g_diff_linf: Option<f64>,
    pub g0_l2: Option<f64>,
    pub g0_range: Option<f64>,
    pub decode_failures: u64,
    pub diverged: bool,
    /// `synthetic`, `libsvm` or `synthetic-fallback`.
    pub dataset: String,
}

pub const CSV_COLUMNS: [&str; 19] = [
    "experiment",
    "seed",
    "quantizer",
    "iteration",
    "loss",
    "output_variance",
    "input_variance",
    "quant_error",
    "alignment",
    "bits",
    "overhead_bits",
    "y",
    "g_diff_l2",
    "g_diff_linf",
    "g0_l2",
    "g0_range",
    "decode_failures",
    "diverged",
    "dataset",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Parameter(format!("unknown format {s:?}"))),
        }
    }
}

/// 17 significant digits, enough to read back the same f64.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

impl ResultRecord {
    fn to_row(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.quantizer.clone(),
            self.iteration.to_string(),
            fmt_opt(self.loss),
            fmt_opt(self.output_variance),
            fmt_opt(self.input_variance),
            fmt_opt(self.quant_error),
            fmt_opt(self.alignment),
            self.bits.to_string(),
            self.overhead_bits.to_string(),
            fmt_opt(self.y),
            fmt_opt(self.g_diff_l2),
            fmt_opt(self.g_diff_linf),
            fmt_opt(self.g0_l2),
            fmt_opt(self.g0_range),
            self.decode_failures.to_string(),
            self.diverged.to_string(),
            self.dataset.clone(),
        ]
    }

    fn from_row(row: &csv::StringRecord, line: usize) -> Result<Self> {
        let cell = |i: usize| row.get(i).unwrap_or("");
        let err = |i: usize, what: &str| Error::Parse {
            line,
            column: i + 1,
            message: format!("bad {what} {:?} in column {}", cell(i), CSV_COLUMNS[i]),
        };
        let int = |i: usize| cell(i).parse::<u64>().map_err(|_| err(i, "integer"));
        let opt = |i: usize| -> Result<Option<f64>> {
            match cell(i) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| err(i, "float")),
            }
        };
        if row.len() != CSV_COLUMNS.len() {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("expected {} columns, got {}", CSV_COLUMNS.len(), row.len()),
            });
        }
        Ok(ResultRecord {
            experiment: cell(0).to_string(),
            seed: match cell(1) {
                "" => None,
                _ => Some(int(1)?),
            },
            quantizer: cell(2).to_string(),
            iteration: int(3)?,
            loss: opt(4)?,
            output_variance: opt(5)?,
            input_variance: opt(6)?,
            quant_error: opt(7)?,
            alignment: opt(8)?,
            bits: int(9)?,
            overhead_bits: int(10)?,
            y: opt(11)?,
            g_diff_l2: opt(12)?,
            g_diff_linf: opt(13)?,
            g0_l2: opt(14)?,
            g0_range: opt(15)?,
            decode_failures: int(16)?,
            diverged: cell(17).parse().map_err(|_| err(17, "bool"))?,
            dataset: cell(18).to_string(),
        })
    }
}

pub fn write_csv<W: Write>(records: &[ResultRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in records {
        out.write_record(r.to_row())?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "unexpected CSV header".into(),
        });
    }
    rd.records()
        .enumerate()
        .map(|(i, row)| ResultRecord::from_row(&row?, i + 2))
        .collect()
}

/// Writes `records` to `path`. Floats that JSON cannot hold (NaN and
/// infinities) become `null` there; CSV keeps them.
pub fn emit(records: &[ResultRecord], path: &Path, format: OutputFormat) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    match format {
        OutputFormat::Csv => write_csv(records, &mut w)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, records)?;
            w.write_all(b"\n").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_records(path: &Path, format: OutputFormat) -> Result<Vec<ResultRecord>> {
    let f = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        OutputFormat::Csv => read_csv(BufReader::new(f)),
        OutputFormat::Json => Ok(serde_json::from_reader(BufReader::new(f))?),
    }
}

/// Averages rows across seeds, keyed by (experiment, quantizer, iteration).
/// Optional columns average over the seeds that have them; counters sum
/// to a mean too (rounded down); `diverged` is true if any seed diverged.
pub fn mean_across_seeds(records: &[ResultRecord]) -> Vec<ResultRecord> {
    let mut groups: BTreeMap<(String, String, u64), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.experiment.clone(), r.quantizer.clone(), r.iteration))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|rows| {
            let n = rows.len() as u64;
            let avg = |f: fn(&ResultRecord) -> Option<f64>| {
                let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let first = rows[0];
            ResultRecord {
                experiment: first.experiment.clone(),
                seed: None,
                quantizer: first.quantizer.clone(),
                iteration: first.iteration,
                loss: avg(|r| r.loss),
                output_variance: avg(|r| r.output_variance),
                input_variance: avg(|r| r.input_variance),
                quant_error: avg(|r| r.quant_error),
                alignment: avg(|r| r.alignment),
                bits: rows.iter().map(|r| r.bits).sum::<u64>() / n,
                overhead_bits: rows.iter().map(|r| r.overhead_bits).sum::<u64>() / n,
                y: avg(|r| r.y),
                g_diff_l2: avg(|r| r.g_diff_l2),
                g_diff_linf: avg(|r| r.g_diff_linf),
                g0_l2: avg(|r| r.g0_l2),
                g0_range: avg(|r| r.g0_range),
                decode_failures: rows.iter().map(|r| r.decode_failures).sum::<u64>() / n,
                diverged: rows.iter().any(|r| r.diverged),
                dataset: first.dataset.clone(),
            }
        })
        .collect()
}
