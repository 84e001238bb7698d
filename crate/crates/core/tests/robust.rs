mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lattice_dme::quantizer::{perturb_within, EncodeMode, QuantParams};
use lattice_dme::robust::{robust_agreement, robust_decode, robust_encode, Direction, RobustConfig, RobustOutcome, RobustSession};
use lattice_dme::{RoundId, SharedRandomness};

use common::{z_critical, Moments};

fn config(q: u64, d: usize, k: u32, r_max: u64) -> RobustConfig {
    let p = QuantParams::new(q, 1.0, d, SharedRandomness::new(5), EncodeMode::SharedOffset).unwrap();
    RobustConfig::new(p, k, r_max).unwrap()
}

#[test]
fn short_checksum_collision_rate() {
    // with 8 checksum bits, far pairs slip through at about 2^-8
    let (q, d, k) = (4, 6, 8);
    let cfg = config(q, d, k, 1 << 20);
    let s = cfg.params().side();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000u64;
    let mut wrong = 0u64;
    for t in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-50.0..50.0)).collect();
        let x_v: Vec<f64> = x.iter().map(|v| v + rng.random_range(5.0..20.0) * q as f64 * s).collect();
        let mut session = RobustSession::new(cfg.clone(), RoundId(t));
        let msg = robust_encode(&x, &mut session).unwrap();
        let truth = session.lattice().embed(session.point().unwrap());
        if let RobustOutcome::Decoded(v) = robust_decode(&msg, &x_v, &session).unwrap() {
            if v != truth {
                wrong += 1;
            }
        }
    }
    let p = 2f64.powi(-(k as i32));
    let rate = wrong as f64 / n as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!(rate <= p + 3.0 * sigma, "collision rate {rate}");
    assert!(wrong > 0, "expected some collisions at k = 8");
}

#[test]
fn agreement_estimate_is_unbiased() {
    let cfg = config(8, 8, 32, 1 << 20);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
    let x_v = perturb_within(&x, 0.4, &mut rng);
    let mut m = Moments::new(8);
    for t in 0..100_000u64 {
        let a = robust_agreement(&x, &x_v, &cfg, RoundId(t)).unwrap();
        m.push(&a.estimate, &x);
    }
    assert!(m.max_abs_z() < z_critical(1e-4), "{}", m.max_abs_z());
}

proptest! {
    #[test]
    fn schedule_and_geometric_sum(q in 2u64..40, d in 1usize..50, log_r_max in 10u32..40) {
        let r_max = 1u64 << log_r_max;
        let cfg = config(q, d, 32, r_max);
        let mut i = 0;
        let mut residue_total = 0usize;
        while let Some(r) = cfg.modulus_at(i) {
            let expect = (q as u128).pow(1 << i);
            prop_assert_eq!(r as u128, expect);
            prop_assert!(r <= r_max);
            let residue = cfg.message_bits(i).unwrap() - 32;
            residue_total += residue;
            prop_assert!(residue_total <= 2 * residue + i as usize);
            i += 1;
        }
        prop_assert!(i >= 1);
        prop_assert!((q as u128).pow(1 << i) > r_max as u128);
    }

    #[test]
    fn outliers_escalate_until_decoded(dist in 1.0f64..200.0, seed in 0u64..1000) {
        let cfg = config(4, 3, 32, 1 << 20);
        let s = cfg.params().side();
        let x = vec![0.1, -0.2, 0.3];
        let mut x_v = x.clone();
        x_v[seed as usize % 3] += dist * s;
        match robust_agreement(&x, &x_v, &cfg, RoundId(seed)) {
            Ok(a) => {
                let spec = cfg.params().lattice(RoundId(seed));
                let z = lattice_dme::lattice::nearest_point(&x, &spec).unwrap();
                prop_assert!(a.collision || a.estimate == spec.embed(&z));
                let fwd = a.transcript.iter().filter(|e| e.direction == Direction::Forward).count();
                prop_assert_eq!(fwd as u32, a.escalations + 1);
            }
            Err(lattice_dme::Error::EscalationFailed { .. }) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
