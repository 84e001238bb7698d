use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::codec::{Encoded, VectorCodec};
use crate::error::{Error, Result};
use crate::quantizer::{EncodeMode, LatticeCodec, QuantParams};
use crate::random::{Domain, RoundId, SharedRandomness};

use super::network::{linf_distance, Diagnostics, Phase, ProtocolResult, SimNetwork};
use super::{TAG_TREE_LEAF, TAG_TREE_NODE};

/// Most messages a machine sends, and most it receives, in one tree run:
/// one as a leaf, one as an internal node and two while relaying the
/// broadcast.
pub const TREE_MESSAGE_CAP: u32 = 4;

/// Aggregation tree over the sampled machines. Leaves beyond the sample
/// (padding up to a power of two) carry weight zero and are pruned, and a
/// node left with one child is replaced by that child.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeLayout {
    Leaf {
        machine: usize,
    },
    Node {
        /// Machine that receives both children and computes the average.
        machine: usize,
        weight: usize,
        left: Box<TreeLayout>,
        right: Box<TreeLayout>,
    },
}

impl TreeLayout {
    /// Internal node machines are the leftmost leaf of their right subtree,
    /// so no machine holds more than one internal node.
    pub fn build(leaves: &[usize]) -> Result<Self> {
        if leaves.is_empty() {
            return Err(Error::Parameter("tree needs at least one leaf".into()));
        }
        Ok(Self::build_in(leaves, leaves.len().next_power_of_two()))
    }

    fn build_in(leaves: &[usize], capacity: usize) -> Self {
        if leaves.len() == 1 {
            return TreeLayout::Leaf { machine: leaves[0] };
        }
        let half = capacity / 2;
        if leaves.len() <= half {
            return Self::build_in(leaves, half);
        }
        let right = Self::build_in(&leaves[half..], half);
        TreeLayout::Node {
            machine: right.leftmost(),
            weight: leaves.len(),
            left: Box::new(Self::build_in(&leaves[..half], half)),
            right: Box::new(right),
        }
    }

    pub fn machine(&self) -> usize {
        match self {
            TreeLayout::Leaf { machine } | TreeLayout::Node { machine, .. } => *machine,
        }
    }

    pub fn weight(&self) -> usize {
        match self {
            TreeLayout::Leaf { .. } => 1,
            TreeLayout::Node { weight, .. } => *weight,
        }
    }

    fn leftmost(&self) -> usize {
        match self {
            TreeLayout::Leaf { machine } => *machine,
            TreeLayout::Node { left, .. } => left.leftmost(),
        }
    }

    /// Number of internal levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeLayout::Leaf { .. } => 0,
            TreeLayout::Node { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Lattice parameters for the tree with `m`: modulus `m^3` and side
/// `2y / m^2`.
pub fn tree_params(m: u64, y: f64, d: usize, shared: SharedRandomness) -> Result<QuantParams> {
    if m < 2 {
        return Err(Error::Parameter(format!("m must be >= 2, got {m}")));
    }
    let q = m
        .checked_pow(3)
        .ok_or_else(|| Error::Parameter(format!("m^3 overflows for m = {m}")))?;
    QuantParams::with_side(q, 2.0 * y / (m * m) as f64, d, shared, EncodeMode::SharedOffset)
}

/// Tree protocol with the lattice codec parameterised by `m` and `y`.
pub fn tree_mean_estimation(net: &mut SimNetwork, m: u64, y: f64, round: RoundId) -> Result<ProtocolResult> {
    let params = tree_params(m, y, net.dim(), net.shared())?;
    let codec = LatticeCodec::new(params.clone());
    tree_aggregate(net, &codec, m, round, Some(params.decode_radius()))
}

/// Samples `min(m, n)` machines, averages their inputs up a binary tree
/// (re-quantizing at every hop) and relays the root's quantized average to
/// all machines down a binary heap rooted at the root machine.
pub fn tree_aggregate(
    net: &mut SimNetwork,
    codec: &dyn VectorCodec,
    m: u64,
    round: RoundId,
    radius: Option<f64>,
) -> Result<ProtocolResult> {
    let n = net.machines();
    let t = (m.min(n as u64)) as usize;
    if t == 0 {
        return Err(Error::Parameter("m must be positive".into()));
    }
    let mut rng = net.shared().stream(Domain::Tree, round, 0);
    let leaves: Vec<usize> = sample(&mut rng, n, t).into_vec();
    let layout = TreeLayout::build(&leaves)?;
    let mut diag = Diagnostics::default();
    if let Some(r) = radius {
        diag.distance_violations = (0..n)
            .filter(|&v| leaves.iter().any(|&u| u != v && linf_distance(net.input(u), net.input(v)) > r))
            .count();
        if diag.distance_violations > 0 {
            diag.warnings.push(format!(
                "{} machines lie beyond the decoding radius of a sampled input",
                diag.distance_violations
            ));
        }
    }

    let (root, root_round) = aggregate(net, codec, &layout, round, &mut diag)?;
    let holder = layout.machine();

    // Broadcast heap: position 0 is the root machine, the rest in id order.
    let mut order = vec![holder];
    order.extend((0..n).filter(|&v| v != holder));
    let mut outputs = vec![Vec::new(); n];
    outputs[holder] = root.value.clone();
    for (i, &v) in order.iter().enumerate().skip(1) {
        let parent = order[(i - 1) / 2];
        let bits = net.send(Phase::Protocol, parent, v, &root.bits, "quantized-mean");
        let dec = codec.decode(&bits, net.input(v), root_round)?;
        if dec != root.value {
            diag.decode_failures += 1;
        }
        outputs[v] = dec;
    }

    let meter = net.meter().clone();
    let over = (0..n)
        .filter(|&v| meter.messages_sent()[v] > TREE_MESSAGE_CAP || meter.messages_received()[v] > TREE_MESSAGE_CAP)
        .count();
    if over > 0 {
        diag.warnings.push(format!("{over} machines exceeded the per-machine message cap"));
    }
    Ok(ProtocolResult {
        outputs,
        success: diag.decode_failures == 0 && over == 0,
        meter,
        diagnostics: diag,
        leader: Some(holder),
    })
}

/// Returns the encoding of this subtree's average, made by its machine, and
/// the round it was encoded in.
fn aggregate(
    net: &mut SimNetwork,
    codec: &dyn VectorCodec,
    node: &TreeLayout,
    round: RoundId,
    diag: &mut Diagnostics,
) -> Result<(Encoded, RoundId)> {
    match node {
        TreeLayout::Leaf { machine } => {
            let r = round.child(TAG_TREE_LEAF, *machine as u64);
            Ok((codec.encode(net.input(*machine), r)?, r))
        }
        TreeLayout::Node {
            machine,
            weight,
            left,
            right,
        } => {
            let mut sum = vec![0.0; net.dim()];
            for child in [left, right] {
                let (enc, r) = aggregate(net, codec, child, round, diag)?;
                let value = if child.machine() == *machine {
                    enc.value
                } else {
                    let bits = net.send(Phase::Protocol, child.machine(), *machine, &enc.bits, "quantized-partial");
                    let dec = codec.decode(&bits, net.input(*machine), r)?;
                    if dec != enc.value {
                        diag.decode_failures += 1;
                    }
                    dec
                };
                let w = child.weight() as f64;
                sum.iter_mut().zip(&value).for_each(|(s, v)| *s += w * v);
            }
            let avg: Vec<f64> = sum.iter().map(|s| s / *weight as f64).collect();
            let r = round.child(TAG_TREE_NODE, *machine as u64);
            Ok((codec.encode(&avg, r)?, r))
        }
    }
}
