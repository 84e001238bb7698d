//! Mean estimation and variance reduction over a simulated network.
//!
//! Every protocol takes a [`SimNetwork`] holding the machines' inputs and a
//! [`RoundId`]; all randomness (leader, sampled machines, lattice offsets,
//! hash keys) is derived from the network's shared seed and that round, and
//! every message gets its own child round so offsets are independent across
//! senders.

mod allgather;
mod network;
mod star;
mod tree;
mod variance;

pub use allgather::{allgather_exchange, allgather_mean_estimation};
pub use network::{
    linf_distance, max_pairwise_linf, mean_of, BitMeter, Diagnostics, Phase, ProtocolResult,
    SimNetwork, TraceEvent,
};
pub use star::{star_exchange, star_mean_estimation};
pub use tree::{tree_aggregate, tree_mean_estimation, tree_params, TreeLayout, TREE_MESSAGE_CAP};
pub use variance::{
    robust_variance_reduction, variance_reduction, vr_distance_bound, Topology, VrParams, MIN_Y,
};

use rand::Rng;

use crate::random::{Domain, RoundId, SharedRandomness};

// Child-round tags. Each encoded message uses `round.child(tag, index)`.
pub(crate) const TAG_UP: u64 = 1;
pub(crate) const TAG_DOWN: u64 = 2;
pub(crate) const TAG_EXCHANGE: u64 = 3;
pub(crate) const TAG_TREE_LEAF: u64 = 4;
pub(crate) const TAG_TREE_NODE: u64 = 5;
pub(crate) const TAG_ROBUST_UP: u64 = 6;
pub(crate) const TAG_ROBUST_DOWN: u64 = 7;

/// Leader for `round`, uniform over the `n` machines.
pub fn choose_leader(shared: &SharedRandomness, round: RoundId, n: usize) -> usize {
    shared.stream(Domain::Leader, round, 0).random_range(0..n)
}
