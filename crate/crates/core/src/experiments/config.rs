//! Experiment configuration and its `key = value` file format.
//!
//! ```text
//! # lines starting with '#' are comments
//! experiment = dsgd
//! samples = 8192
//! dim = 100
//! machines = 2
//! q = 8
//! lr = 0.1
//! iterations = 50
//! seeds = 0,10,20,30,40
//! quantizers = none,lattice,lattice+rotation,qsgd_l2,qsgd_range,hadamard
//! y_rule = scale15
//! ```
//!
//! Every key is optional; missing keys keep the values of the preset named
//! by `experiment`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SEEDS: [u64; 5] = [0, 10, 20, 30, 40];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Dsgd,
    LocalSgd,
    PowerIter,
    SublinearSim,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Dsgd => "dsgd",
            ExperimentKind::LocalSgd => "local-sgd",
            ExperimentKind::PowerIter => "power-iter",
            ExperimentKind::SublinearSim => "sublinear-sim",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dsgd" => ExperimentKind::Dsgd,
            "local-sgd" => ExperimentKind::LocalSgd,
            "power-iter" => ExperimentKind::PowerIter,
            "sublinear-sim" => ExperimentKind::SublinearSim,
            _ => return Err(Error::Parameter(format!("unknown experiment {s:?}"))),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantizerChoice {
    Lattice,
    LatticeRotation,
    QsgdL2,
    QsgdRange,
    Hadamard,
    None,
}

impl QuantizerChoice {
    pub const ALL: [QuantizerChoice; 6] = [
        QuantizerChoice::None,
        QuantizerChoice::Lattice,
        QuantizerChoice::LatticeRotation,
        QuantizerChoice::QsgdL2,
        QuantizerChoice::QsgdRange,
        QuantizerChoice::Hadamard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuantizerChoice::Lattice => "lattice",
            QuantizerChoice::LatticeRotation => "lattice+rotation",
            QuantizerChoice::QsgdL2 => "qsgd_l2",
            QuantizerChoice::QsgdRange => "qsgd_range",
            QuantizerChoice::Hadamard => "hadamard",
            QuantizerChoice::None => "none",
        }
    }

    pub fn is_lattice(self) -> bool {
        matches!(self, QuantizerChoice::Lattice | QuantizerChoice::LatticeRotation)
    }

    pub fn is_rotated(self) -> bool {
        matches!(self, QuantizerChoice::LatticeRotation | QuantizerChoice::Hadamard)
    }
}

impl FromStr for QuantizerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuantizerChoice::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown quantizer {s:?}")))
    }
}

impl fmt::Display for QuantizerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the lattice distance bound `y` is set between iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum YRule {
    Fixed(f64),
    /// `1.5 max ||Q(g_i) - Q(g_j)||_inf` from the current quantized inputs.
    Scale15,
    /// `3 max ||Q(g_i) - Q(g_j)||_inf`, broadcast by the leader as a float.
    Scale3,
    /// Every 5 iterations machine 0 draws a second batch and sends
    /// `1.6 ||g_0 - g_0'||_inf` as a float.
    Periodic16,
}

impl YRule {
    /// Multiplier applied to measured distances.
    pub fn factor(self) -> f64 {
        match self {
            YRule::Fixed(_) => 1.0,
            YRule::Scale15 => 1.5,
            YRule::Scale3 => 3.0,
            YRule::Periodic16 => 1.6,
        }
    }
}

impl FromStr for YRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scale15" => YRule::Scale15,
            "scale3" => YRule::Scale3,
            "periodic16" => YRule::Periodic16,
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parameter(format!("unknown y rule {s:?}")))?;
                YRule::Fixed(v)
            }
        })
    }
}

impl fmt::Display for YRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YRule::Fixed(v) => write!(f, "fixed:{v}"),
            YRule::Scale15 => f.write_str("scale15"),
            YRule::Scale3 => f.write_str("scale3"),
            YRule::Periodic16 => f.write_str("periodic16"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub samples: usize,
    pub dim: usize,
    pub machines: usize,
    /// Lattice modulus, and QSGD level count.
    pub q: u64,
    pub lr: f64,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub quantizers: Vec<QuantizerChoice>,
    pub y_rule: YRule,
    pub output: Option<PathBuf>,
    /// LIBSVM file; synthetic least squares when absent.
    pub dataset: Option<PathBuf>,
    /// Every coordinate of the initial model.
    pub init_weight: f64,
    /// Local steps between averaging rounds.
    pub local_steps: usize,
    /// Full-precision iterations before power iteration fixes `y`.
    pub warmup: usize,
    /// Budget for the sublinear simulation.
    pub bits_per_coord: f64,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            samples: 8192,
            dim: 100,
            machines: 2,
            q: 8,
            lr: 0.1,
            iterations: 50,
            seeds: DEFAULT_SEEDS.to_vec(),
            quantizers: QuantizerChoice::ALL.to_vec(),
            y_rule: YRule::Scale15,
            output: None,
            dataset: None,
            init_weight: 0.0,
            local_steps: 10,
            warmup: 20,
            bits_per_coord: 0.5,
        };
        match experiment {
            ExperimentKind::Dsgd => {}
            ExperimentKind::LocalSgd => {
                c.iterations = 30;
                c.quantizers = vec![
                    QuantizerChoice::None,
                    QuantizerChoice::LatticeRotation,
                    QuantizerChoice::Hadamard,
                    QuantizerChoice::QsgdL2,
                ];
            }
            ExperimentKind::PowerIter => {
                c.dim = 128;
                c.q = 64;
                c.iterations = 200;
            }
            ExperimentKind::SublinearSim => {
                c.dim = 256;
                c.y_rule = YRule::Periodic16;
                c.quantizers = vec![QuantizerChoice::None];
            }
        }
        c
    }

    /// Settings of the numbered experiments 1 to 6 and 8.
    pub fn preset(id: u32) -> Result<Self> {
        Ok(match id {
            1 => ExperimentConfig {
                quantizers: vec![QuantizerChoice::None],
                ..Self::new(ExperimentKind::Dsgd)
            },
            2 => Self::new(ExperimentKind::Dsgd),
            3 => ExperimentConfig {
                lr: 0.8,
                ..Self::new(ExperimentKind::Dsgd)
            },
            4 => Self::new(ExperimentKind::SublinearSim),
            5 => ExperimentConfig {
                dim: 12,
                machines: 8,
                q: 16,
                init_weight: -1000.0,
                y_rule: YRule::Scale3,
                ..Self::new(ExperimentKind::Dsgd)
            },
            6 => Self::new(ExperimentKind::LocalSgd),
            8 => Self::new(ExperimentKind::PowerIter),
            _ => return Err(Error::Parameter(format!("no preset for experiment {id}"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("samples", self.samples),
            ("dim", self.dim),
            ("iterations", self.iterations),
            ("local_steps", self.local_steps),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Parameter(format!("{k} must be positive")));
            }
        }
        if self.machines < 2 {
            return Err(Error::Parameter(format!("machines must be >= 2, got {}", self.machines)));
        }
        if self.samples < self.machines {
            return Err(Error::Parameter(format!(
                "{} samples cannot feed {} machines",
                self.samples, self.machines
            )));
        }
        if self.q < 2 {
            return Err(Error::Parameter(format!("q must be >= 2, got {}", self.q)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Parameter(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.bits_per_coord > 0.0 && self.bits_per_coord.is_finite()) {
            return Err(Error::Parameter(format!("bits_per_coord must be positive, got {}", self.bits_per_coord)));
        }
        if !self.init_weight.is_finite() {
            return Err(Error::Parameter("init_weight must be finite".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("seed list is empty".into()));
        }
        if self.quantizers.is_empty() {
            return Err(Error::Parameter("quantizer list is empty".into()));
        }
        if let YRule::Fixed(v) = self.y_rule {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("fixed y must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parameter(format!("bad value {v:?} for {key}")))
        }
        match key {
            "experiment" => self.experiment = value.parse()?,
            "samples" => self.samples = num(key, value)?,
            "dim" => self.dim = num(key, value)?,
            "machines" => self.machines = num(key, value)?,
            "q" => self.q = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "seeds" => {
                self.seeds = split_list(value).map(|s| num(key, s)).collect::<Result<_>>()?;
            }
            "quantizers" => {
                self.quantizers = split_list(value).map(str::parse).collect::<Result<_>>()?;
            }
            "y_rule" => self.y_rule = value.parse()?,
            "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            "dataset" => self.dataset = (!value.is_empty()).then(|| PathBuf::from(value)),
            "init_weight" => self.init_weight = num(key, value)?,
            "local_steps" => self.local_steps = num(key, value)?,
            "warmup" => self.warmup = num(key, value)?,
            "bits_per_coord" => self.bits_per_coord = num(key, value)?,
            _ => return Err(Error::Parameter(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a config file body. An `experiment` line, wherever it
    /// appears, picks the preset the other keys override.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                column: 1,
                message: "expected key = value".into(),
            })?;
            pairs.push((i + 1, k.trim(), v.trim()));
        }
        let kind = match pairs.iter().rev().find(|(_, k, _)| *k == "experiment") {
            Some((_, _, v)) => v.parse()?,
            None => ExperimentKind::Dsgd,
        };
        let mut c = Self::new(kind);
        for (line, k, v) in pairs {
            c.set(k, v).map_err(|e| Error::Parse {
                line,
                column: 1,
                message: e.to_string(),
            })?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Renders the config in the format [`ExperimentConfig::parse`] reads.
    pub fn to_kv(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let lines = [
            ("experiment", self.experiment.to_string()),
            ("samples", self.samples.to_string()),
            ("dim", self.dim.to_string()),
            ("machines", self.machines.to_string()),
            ("q", self.q.to_string()),
            ("lr", self.lr.to_string()),
            ("iterations", self.iterations.to_string()),
            ("seeds", join(self.seeds.iter().map(u64::to_string).collect())),
            ("quantizers", join(self.quantizers.iter().map(|q| q.to_string()).collect())),
            ("y_rule", self.y_rule.to_string()),
            ("output", path(&self.output)),
            ("dataset", path(&self.dataset)),
            ("init_weight", self.init_weight.to_string()),
            ("local_steps", self.local_steps.to_string()),
            ("warmup", self.warmup.to_string()),
            ("bits_per_coord", self.bits_per_coord.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        for id in [1, 2, 3, 4, 5, 6, 8] {
            let mut c = ExperimentConfig::preset(id).unwrap();
            c.output = Some("out/x.csv".into());
            c.y_rule = YRule::Fixed(0.25);
            assert_eq!(ExperimentConfig::parse(&c.to_kv()).unwrap(), c);
        }
    }

    #[test]
    fn parse_overrides_preset() {
        let c = ExperimentConfig::parse("# power\nq = 16\nexperiment = power-iter\nseeds = 1, 2\n").unwrap();
        assert_eq!(c.experiment, ExperimentKind::PowerIter);
        assert_eq!(c.dim, 128);
        assert_eq!(c.q, 16);
        assert_eq!(c.seeds, vec![1, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ExperimentConfig::parse("q 8"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("\nbogus = 1"), Err(Error::Parse { line: 2, .. })));
        assert!(ExperimentConfig::parse("seeds = ").is_err());
        assert!(ExperimentConfig::parse("machines = 1").is_err());
        assert!(ExperimentConfig::parse("quantizers = lattice,foo").is_err());
        assert!(ExperimentConfig::parse("y_rule = fixed:-1").is_err());
        assert!(ExperimentConfig::preset(7).is_err());
    }
}
