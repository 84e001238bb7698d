use crate::codec::VectorCodec;
use crate::error::Result;
use crate::quantizer::{LatticeCodec, QuantParams};
use crate::random::RoundId;

use super::network::{linf_distance, mean_of, Diagnostics, Phase, ProtocolResult, SimNetwork};
use super::{choose_leader, TAG_DOWN, TAG_UP};

/// Star protocol with the lattice codec. A pair of inputs farther apart than
/// the codec's decoding radius is reported as a distance violation.
pub fn star_mean_estimation(net: &mut SimNetwork, params: &QuantParams, round: RoundId) -> Result<ProtocolResult> {
    let codec = LatticeCodec::new(params.clone());
    star_exchange(net, &codec, round, Some(params.decode_radius()))
}

/// Every machine quantizes its input and sends it to a leader drawn from the
/// shared seed. The leader averages the decoded vectors (its own included,
/// quantized but not sent), quantizes the average and sends it to every
/// machine. Each machine outputs the decoded broadcast; the leader outputs
/// the value it encoded.
pub fn star_exchange(
    net: &mut SimNetwork,
    codec: &dyn VectorCodec,
    round: RoundId,
    radius: Option<f64>,
) -> Result<ProtocolResult> {
    let n = net.machines();
    let leader = choose_leader(&net.shared(), round, n);
    let mut diag = Diagnostics::default();
    if let Some(r) = radius {
        diag.distance_violations = (0..n)
            .filter(|&u| u != leader && linf_distance(net.input(u), net.input(leader)) > r)
            .count();
    }

    let mut gathered = Vec::with_capacity(n);
    for u in 0..n {
        let enc = codec.encode(net.input(u), round.child(TAG_UP, u as u64))?;
        if u == leader {
            gathered.push(enc.value);
            continue;
        }
        let bits = net.send(Phase::Protocol, u, leader, &enc.bits, "quantized-input");
        let dec = codec.decode(&bits, net.input(leader), round.child(TAG_UP, u as u64))?;
        if dec != enc.value {
            diag.decode_failures += 1;
        }
        gathered.push(dec);
    }
    let avg = mean_of(&gathered);

    let down = round.child(TAG_DOWN, 0);
    let enc = codec.encode(&avg, down)?;
    let mut outputs = Vec::with_capacity(n);
    for v in 0..n {
        if v == leader {
            outputs.push(enc.value.clone());
            continue;
        }
        let bits = net.send(Phase::Protocol, leader, v, &enc.bits, "quantized-mean");
        let dec = codec.decode(&bits, net.input(v), down)?;
        if dec != enc.value {
            diag.decode_failures += 1;
        }
        outputs.push(dec);
    }
    if diag.distance_violations > 0 {
        diag.warnings.push(format!(
            "{} inputs lie beyond the decoding radius of the leader's input",
            diag.distance_violations
        ));
    }
    Ok(ProtocolResult {
        outputs,
        success: diag.decode_failures == 0,
        meter: net.meter().clone(),
        diagnostics: diag,
        leader: Some(leader),
    })
}
