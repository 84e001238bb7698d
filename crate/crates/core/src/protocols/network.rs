//! Simulated synchronous network with exact bit accounting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{check_finite, Error, Result};
use crate::random::SharedRandomness;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Leader election, tree layout, seed exchange.
    Setup,
    /// Full-precision exchanges that fix parameters such as `y`.
    Calibration,
    /// Control values the protocol needs each round (e.g. a broadcast `y`).
    Control,
    Protocol,
}

/// One delivered message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub phase: Phase,
    pub from: usize,
    pub to: usize,
    pub bits: u64,
    pub kind: String,
}

/// Per-machine sent and received bits, split by phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BitMeter {
    sent: Vec<u64>,
    received: Vec<u64>,
    overhead_sent: Vec<u64>,
    overhead_received: Vec<u64>,
    messages_sent: Vec<u32>,
    messages_received: Vec<u32>,
    trace: Vec<TraceEvent>,
}

impl BitMeter {
    pub fn new(n: usize) -> Self {
        BitMeter {
            sent: vec![0; n],
            received: vec![0; n],
            overhead_sent: vec![0; n],
            overhead_received: vec![0; n],
            messages_sent: vec![0; n],
            messages_received: vec![0; n],
            trace: Vec::new(),
        }
    }

    pub fn machines(&self) -> usize {
        self.sent.len()
    }

    /// Records a message. Messages a machine sends to itself are free and
    /// not recorded.
    pub fn record(&mut self, phase: Phase, from: usize, to: usize, bits: u64, kind: &str) {
        if from == to {
            return;
        }
        match phase {
            Phase::Protocol => {
                self.sent[from] += bits;
                self.received[to] += bits;
                self.messages_sent[from] += 1;
                self.messages_received[to] += 1;
            }
            _ => {
                self.overhead_sent[from] += bits;
                self.overhead_received[to] += bits;
            }
        }
        self.trace.push(TraceEvent {
            phase,
            from,
            to,
            bits,
            kind: kind.to_string(),
        });
    }

    /// Protocol-phase bits sent by each machine.
    pub fn sent(&self) -> &[u64] {
        &self.sent
    }

    pub fn received(&self) -> &[u64] {
        &self.received
    }

    /// Setup, calibration and control bits sent by each machine.
    pub fn overhead_sent(&self) -> &[u64] {
        &self.overhead_sent
    }

    pub fn overhead_received(&self) -> &[u64] {
        &self.overhead_received
    }

    pub fn messages_sent(&self) -> &[u32] {
        &self.messages_sent
    }

    pub fn messages_received(&self) -> &[u32] {
        &self.messages_received
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn total_sent(&self) -> u64 {
        self.sent.iter().sum()
    }

    pub fn total_received(&self) -> u64 {
        self.received.iter().sum()
    }

    /// Bits of one phase, summed over the trace.
    pub fn phase_total(&self, phase: Phase) -> u64 {
        self.trace
            .iter()
            .filter(|e| e.phase == phase)
            .map(|e| e.bits)
            .sum()
    }

    /// Largest protocol-phase sent + received count over machines.
    pub fn max_machine_bits(&self) -> u64 {
        self.sent
            .iter()
            .zip(&self.received)
            .map(|(s, r)| s + r)
            .max()
            .unwrap_or(0)
    }

    pub fn mean_machine_bits(&self) -> f64 {
        if self.sent.is_empty() {
            return 0.0;
        }
        (self.total_sent() + self.total_received()) as f64 / self.sent.len() as f64
    }

    /// Total sent equals total received, per phase and overall.
    pub fn is_conserved(&self) -> bool {
        self.total_sent() == self.total_received()
            && self.overhead_sent.iter().sum::<u64>() == self.overhead_received.iter().sum::<u64>()
    }

    /// Writes the trace as JSON lines.
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.trace {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n").map_err(|source| Error::Io {
                path: "<trace>".into(),
                source,
            })?;
        }
        Ok(())
    }
}

/// Machines with their inputs, a shared seed and a bit meter.
#[derive(Clone, Debug)]
pub struct SimNetwork {
    inputs: Vec<Vec<f64>>,
    shared: SharedRandomness,
    meter: BitMeter,
}

impl SimNetwork {
    pub fn new(inputs: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let d = inputs
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Parameter("network needs at least one machine".into()))?;
        if d == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        for x in &inputs {
            crate::error::check_dim(d, x.len())?;
            check_finite(x)?;
        }
        let n = inputs.len();
        Ok(SimNetwork {
            inputs,
            shared: SharedRandomness::new(seed),
            meter: BitMeter::new(n),
        })
    }

    pub fn machines(&self) -> usize {
        self.inputs.len()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn input(&self, v: usize) -> &[f64] {
        &self.inputs[v]
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn shared(&self) -> SharedRandomness {
        self.shared
    }

    pub fn meter(&self) -> &BitMeter {
        &self.meter
    }

    /// Delivers `bits` from `from` to `to` and meters it.
    pub fn send(&mut self, phase: Phase, from: usize, to: usize, bits: &BitString, kind: &str) -> BitString {
        self.meter.record(phase, from, to, bits.len() as u64, kind);
        bits.clone()
    }

    /// Meters a message whose content the simulation does not need.
    pub fn charge(&mut self, phase: Phase, from: usize, to: usize, bits: u64, kind: &str) {
        self.meter.record(phase, from, to, bits, kind);
    }

    /// Exact mean of the inputs.
    pub fn mean(&self) -> Vec<f64> {
        mean_of(&self.inputs)
    }

    /// Largest pairwise infinity-norm distance between inputs.
    pub fn max_pairwise_linf(&self) -> f64 {
        max_pairwise_linf(&self.inputs)
    }
}

pub fn mean_of(vectors: &[Vec<f64>]) -> Vec<f64> {
    let d = vectors[0].len();
    let mut out = vec![0.0; d];
    for v in vectors {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
    }
    let n = vectors.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_pairwise_linf(vectors: &[Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            m = m.max(linf_distance(&vectors[i], &vectors[j]));
        }
    }
    m
}

/// Problems observed during a run. Nothing here aborts the run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Receivers that decoded something other than what the sender encoded.
    pub decode_failures: usize,
    /// Input pairs farther apart than the codec's guaranteed decoding radius.
    pub distance_violations: usize,
    /// `Far` replies across all robust sessions.
    pub escalations: u32,
    /// Robust sessions that hit the modulus cap.
    pub escalation_aborts: usize,
    /// Robust sessions that accepted a wrong point.
    pub checksum_collisions: usize,
    pub warnings: Vec<String>,
}

/// Outcome of one protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    /// Output of every machine.
    pub outputs: Vec<Vec<f64>>,
    pub success: bool,
    pub meter: BitMeter,
    pub diagnostics: Diagnostics,
    pub leader: Option<usize>,
}

impl ProtocolResult {
    /// The common output (machine 0's, identical to all others on success).
    pub fn estimate(&self) -> &[f64] {
        &self.outputs[0]
    }

    /// All machines hold bit-identical outputs.
    pub fn outputs_identical(&self) -> bool {
        let first: Vec<u64> = self.outputs[0].iter().map(|v| v.to_bits()).collect();
        self.outputs
            .iter()
            .all(|o| o.iter().map(|v| v.to_bits()).eq(first.iter().copied()))
    }
}
