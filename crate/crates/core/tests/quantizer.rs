use num_bigint::BigUint;
use proptest::prelude::*;

use lattice_dme::lattice::{count_points_in_ball, LatticeSpec, Norm};
use lattice_dme::quantizer::{decode, encode, perturb_within, EncodeMode, QuantParams};
use lattice_dme::{RoundId, SharedRandomness};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(q: u64, y: f64, d: usize, seed: u64, mode: EncodeMode) -> QuantParams {
    QuantParams::new(q, y, d, SharedRandomness::new(seed), mode).unwrap()
}

proptest! {
    #[test]
    fn shared_offset_encoding_is_deterministic(
        x in proptest::collection::vec(-1e3f64..1e3, 1..40),
        q in 2u64..300,
        seed in any::<u64>(),
        round in any::<u64>(),
    ) {
        let p = params(q, 2.0, x.len(), seed, EncodeMode::SharedOffset);
        let a = encode(&x, &p, RoundId(round)).unwrap();
        let b = encode(&x, &p.clone(), RoundId(round)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bit_length_is_ceil_d_log2_q(d in 1usize..200, q in 2u64..100_000, hull in any::<bool>()) {
        let mode = if hull { EncodeMode::StochasticHull } else { EncodeMode::SharedOffset };
        let p = params(q, 1.0, d, 1, mode);
        let oracle = (BigUint::from(q).pow(d as u32) - 1u32).bits() as usize;
        prop_assert_eq!(p.bit_len(), oracle);
        prop_assert_eq!(encode(&vec![0.1; d], &p, RoundId(0)).unwrap().bit_length(), oracle);
    }

    #[test]
    fn in_range_pairs_decode(
        q in 2u64..70,
        d in 1usize..30,
        seed in any::<u64>(),
        hull in any::<bool>(),
    ) {
        let mode = if hull { EncodeMode::StochasticHull } else { EncodeMode::SharedOffset };
        let p = params(q, 1.5, d, seed, mode);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = perturb_within(&vec![0.0; d], 100.0, &mut rng);
        let x_ref = perturb_within(&x, p.decode_radius(), &mut rng);
        let (msg, z) = p.encode_point(&x, RoundId(seed)).unwrap();
        prop_assert_eq!(p.decode_point(&msg, &x_ref).unwrap(), z.clone());
        let value = decode(&msg, &x_ref, &p).unwrap();
        prop_assert_eq!(value, p.lattice(RoundId(seed)).embed(&z));
    }

    #[test]
    fn ball_count_within_volume_bounds(
        center in proptest::collection::vec(-50f64..50.0, 1..4),
        side in 0.2f64..3.0,
        rel in 0.01f64..10.0,
        seed in any::<u64>(),
    ) {
        let d = center.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = LatticeSpec::with_random_offset(d, side, &mut rng).unwrap();
        let radius = rel * side;
        let count = count_points_in_ball(&center, radius, &spec, Norm::LInf).unwrap() as f64;
        let r = side / 2.0;
        let lo = ((radius - r) / r).max(0.0).powi(d as i32);
        let hi = ((radius + r) / r).powi(d as i32);
        prop_assert!(lo <= count && count <= hi, "{} not in [{}, {}]", count, lo, hi);
    }
}
