use crate::codec::VectorCodec;
use crate::error::Result;
use crate::quantizer::{LatticeCodec, QuantParams};
use crate::random::RoundId;

use super::network::{linf_distance, mean_of, Diagnostics, Phase, ProtocolResult, SimNetwork};
use super::TAG_EXCHANGE;

/// All-to-all exchange with the lattice codec.
pub fn allgather_mean_estimation(net: &mut SimNetwork, params: &QuantParams, round: RoundId) -> Result<ProtocolResult> {
    let codec = LatticeCodec::new(params.clone());
    allgather_exchange(net, &codec, round, Some(params.decode_radius()))
}

/// Each machine quantizes its input once and sends it to every other
/// machine; everyone averages the `n` quantized vectors. With two machines
/// this is the symmetric exchange "u sends to v and vice versa", which uses
/// the same bits per machine as the star but skips re-quantizing the mean.
pub fn allgather_exchange(
    net: &mut SimNetwork,
    codec: &dyn VectorCodec,
    round: RoundId,
    radius: Option<f64>,
) -> Result<ProtocolResult> {
    let n = net.machines();
    let mut diag = Diagnostics::default();
    if let Some(r) = radius {
        for u in 0..n {
            for v in u + 1..n {
                if linf_distance(net.input(u), net.input(v)) > r {
                    diag.distance_violations += 1;
                }
            }
        }
    }
    let encoded = (0..n)
        .map(|u| codec.encode(net.input(u), round.child(TAG_EXCHANGE, u as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut outputs = Vec::with_capacity(n);
    for v in 0..n {
        let mut seen = Vec::with_capacity(n);
        for (u, enc) in encoded.iter().enumerate() {
            if u == v {
                seen.push(enc.value.clone());
                continue;
            }
            let bits = net.send(Phase::Protocol, u, v, &enc.bits, "quantized-input");
            let dec = codec.decode(&bits, net.input(v), round.child(TAG_EXCHANGE, u as u64))?;
            if dec != enc.value {
                diag.decode_failures += 1;
            }
            seen.push(dec);
        }
        outputs.push(mean_of(&seen));
    }
    if diag.distance_violations > 0 {
        diag.warnings.push(format!(
            "{} input pairs lie beyond the decoding radius",
            diag.distance_violations
        ));
    }
    Ok(ProtocolResult {
        outputs,
        success: diag.decode_failures == 0,
        meter: net.meter().clone(),
        diagnostics: diag,
        leader: None,
    })
}
