use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::nearest_point;
use crate::quantizer::{EncodeMode, QuantParams};
use crate::random::RoundId;
use crate::robust::{robust_agreement, robust_agreement_from_point, Agreement, Direction, RobustConfig};

use super::network::{mean_of, Diagnostics, Phase, ProtocolResult, SimNetwork};
use super::{choose_leader, star_mean_estimation, tree_mean_estimation, TAG_ROBUST_DOWN, TAG_ROBUST_UP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Star,
    Tree,
}

/// Parameters of the variance-reduction reduction. `sigma^2` bounds the
/// expected squared l2 distance of each input from the true vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VrParams {
    pub sigma: f64,
    pub alpha: f64,
    /// Lattice modulus for the star; the tree's `m` for the tree.
    pub q: u64,
    pub topology: Topology,
}

impl VrParams {
    /// `alpha = n` and `q = n^2 alpha`.
    pub fn optimal(n: usize, sigma: f64, topology: Topology) -> Self {
        let n64 = n.max(2) as u64;
        VrParams {
            sigma,
            alpha: n64 as f64,
            q: n64 * n64 * n64,
            topology,
        }
    }
}

/// Smallest distance bound used, so that `sigma = 0` still gives a lattice.
pub const MIN_Y: f64 = 1e-9;

/// Distance bound `2 sigma sqrt(alpha n)`. By Chebyshev and a union bound,
/// all inputs lie within it of each other with probability `>= 1 - 1/alpha`.
pub fn vr_distance_bound(sigma: f64, alpha: f64, n: usize) -> f64 {
    2.0 * sigma * (alpha * n as f64).sqrt()
}

/// Runs mean estimation with `y = 2 sigma sqrt(alpha n)`.
pub fn variance_reduction(net: &mut SimNetwork, vr: &VrParams, round: RoundId) -> Result<ProtocolResult> {
    if vr.alpha.is_nan() || vr.alpha <= 1.0 {
        return Err(Error::Parameter(format!("alpha must exceed 1, got {}", vr.alpha)));
    }
    if !(vr.sigma >= 0.0 && vr.sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be finite and >= 0, got {}", vr.sigma)));
    }
    // sigma = 0 means identical inputs; any positive y decodes them.
    let y = vr_distance_bound(vr.sigma, vr.alpha, net.machines()).max(MIN_Y);
    match vr.topology {
        Topology::Star => {
            let params = QuantParams::new(vr.q, y, net.dim(), net.shared(), EncodeMode::SharedOffset)?;
            star_mean_estimation(net, &params, round)
        }
        Topology::Tree => tree_mean_estimation(net, vr.q, y, round),
    }
}

/// Star variance reduction where every transfer is a robust agreement with
/// side length `2 sigma / (q - 1)`, so no distance bound is needed. The
/// leader quantizes the average once and sends that same point to everyone.
pub fn robust_variance_reduction(net: &mut SimNetwork, sigma: f64, q: u64, round: RoundId) -> Result<ProtocolResult> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    if q < 2 {
        return Err(Error::Parameter(format!("q must be >= 2, got {q}")));
    }
    let side = 2.0 * sigma / (q - 1) as f64;
    let params = QuantParams::with_side(q, side, net.dim(), net.shared(), EncodeMode::SharedOffset)?;
    let config = RobustConfig::with_defaults(params.clone())?;
    let n = net.machines();
    let leader = choose_leader(&net.shared(), round, n);
    let mut diag = Diagnostics::default();

    let mut gathered = Vec::with_capacity(n);
    for u in 0..n {
        let r = round.child(TAG_ROBUST_UP, u as u64);
        if u == leader {
            let spec = params.lattice(r);
            gathered.push(spec.embed(&nearest_point(net.input(u), &spec)?));
            continue;
        }
        match robust_agreement(net.input(u), net.input(leader), &config, r) {
            Ok(a) => {
                meter_agreement(net, &a, u, leader, &mut diag);
                gathered.push(a.estimate);
            }
            Err(Error::EscalationFailed { iterations, r_max }) => {
                diag.escalation_aborts += 1;
                diag.warnings.push(format!(
                    "machine {u}: escalation aborted after {iterations} iterations (r_max {r_max})"
                ));
            }
            Err(e) => return Err(e),
        }
    }
    let avg = mean_of(&gathered);

    let r = round.child(TAG_ROBUST_DOWN, 0);
    let spec = params.lattice(r);
    let z = nearest_point(&avg, &spec)?;
    let value = spec.embed(&z);
    let mut outputs = vec![Vec::new(); n];
    outputs[leader] = value.clone();
    for v in (0..n).filter(|&v| v != leader) {
        match robust_agreement_from_point(&z, net.input(v), &config, r) {
            Ok(a) => {
                meter_agreement(net, &a, leader, v, &mut diag);
                outputs[v] = a.estimate;
            }
            Err(Error::EscalationFailed { iterations, r_max }) => {
                diag.escalation_aborts += 1;
                diag.warnings.push(format!(
                    "broadcast to {v}: escalation aborted after {iterations} iterations (r_max {r_max})"
                ));
                outputs[v] = avg.clone();
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ProtocolResult {
        outputs,
        success: diag.escalation_aborts == 0 && diag.checksum_collisions == 0,
        meter: net.meter().clone(),
        diagnostics: diag,
        leader: Some(leader),
    })
}

fn meter_agreement(net: &mut SimNetwork, a: &Agreement, encoder: usize, decoder: usize, diag: &mut Diagnostics) {
    for t in &a.transcript {
        match t.direction {
            Direction::Forward => net.charge(Phase::Protocol, encoder, decoder, t.bits as u64, "robust-color"),
            Direction::Reply => net.charge(Phase::Protocol, decoder, encoder, t.bits as u64, "far"),
        }
    }
    diag.escalations += a.escalations;
    if a.collision {
        diag.checksum_collisions += 1;
        diag.decode_failures += 1;
    }
}
