use std::collections::BTreeMap;
use std::sync::Arc;

use keyext::ciphers::{Construction, IdealCipher, KeyMaterial, Permutation};
use keyext::classical::{
    classical_period_find, em_subgroup_attack, exhaustive_search, guess_and_em_attack, guess_and_em_attack_with,
    tradeoff_curve, write_curve_csv, ClassicalPeriod, CurveKind, EmVariant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn periodic_table(n: u32, s: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    // f(x) = P(min(x, x⊕s)) for a random injection P
    let p = Permutation::random(n, rng.gen()).unwrap();
    (0..1u64 << n).map(|x| p.apply(x.min(x ^ s) as u32) as u64).collect()
}

fn random_efx(n: u32, kappa: u32, seed: u64) -> Construction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1a);
    let keys = KeyMaterial::whitened(
        rng.gen_range(0..1 << kappa),
        rng.gen_range(0..1 << n),
        rng.gen_range(0..1 << n),
    );
    Construction::efx(
        Arc::new(IdealCipher::new(n, kappa, 2 * seed).unwrap()),
        Arc::new(IdealCipher::new(n, kappa, 2 * seed + 1).unwrap()),
        keys,
    )
    .unwrap()
}

#[test]
fn collisions_reveal_the_period() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let s = rng.gen_range(1..256u64);
        let f = periodic_table(8, s, &mut rng);
        let r = classical_period_find(&f, u64::MAX, &mut rng).unwrap();
        assert_eq!(r.outcome, ClassicalPeriod::Period(s));
        assert!(r.queries <= 129);
    }
}

#[test]
fn birthday_regime_at_ten_bits() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut counts: Vec<u64> = (0..200)
        .map(|_| {
            let s = rng.gen_range(1..1024u64);
            let f = periodic_table(10, s, &mut rng);
            classical_period_find(&f, u64::MAX, &mut rng).unwrap().queries
        })
        .collect();
    counts.sort_unstable();
    let median = counts[100];
    assert!((16..=128).contains(&median), "median {median}");
}

#[test]
fn exhaustive_search_is_sound() {
    for seed in 0..10u64 {
        let inst = random_efx(2, 2, seed);
        let pairs: Vec<(u32, u32)> = (0..4).map(|x| (x, inst.encrypt(x).unwrap())).collect();
        let r = exhaustive_search(&inst, &pairs).unwrap();
        assert!(r.consistent && r.success);
        assert!(r.offline_evals <= pairs.len() as u64 * 2 * (1 << (2 + 4)));
        // the planted key is one of the consistent tuples
        let keys = inst.keys();
        let (shape, _) = inst.efx_shape().unwrap();
        assert!(pairs.iter().all(|&(x, y)| shape.evaluate(keys.k, keys.k1, keys.k2, x) == y));
    }
    let inst = random_efx(2, 2, 0);
    assert!(exhaustive_search(&inst, &[(0, 1)]).is_err());
}

#[test]
fn guess_and_em_full_codebook() {
    let mut wins = 0;
    for seed in 0..100u64 {
        let inst = random_efx(4, 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = guess_and_em_attack(&inst, 16, &mut rng).unwrap();
        assert_eq!(r.online_queries, 16);
        wins += r.success as u32;
    }
    assert!(wins >= 90, "{wins}");
}

#[test]
fn collision_variant_full_codebook() {
    let mut wins = 0;
    for seed in 0..50u64 {
        let inst = random_efx(4, 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        wins += guess_and_em_attack_with(&inst, 16, EmVariant::Collision, &mut rng).unwrap().success as u32;
    }
    assert!(wins >= 45, "{wins}");
    let inst = random_efx(4, 4, 0);
    assert!(guess_and_em_attack_with(&inst, 8, EmVariant::Collision, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn guess_and_em_small_data() {
    for d in [4u64, 8] {
        let mut wins = 0;
        for seed in 0..50u64 {
            let inst = random_efx(4, 4, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = guess_and_em_attack(&inst, d, &mut rng).unwrap();
            assert!(r.guesses_tried >= 1);
            wins += r.consistent as u32;
        }
        assert!(wins >= 45, "D={d}: {wins}");
    }
    assert!(guess_and_em_attack(&random_efx(4, 4, 0), 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn planted_guess_always_completes() {
    for seed in 0..30u64 {
        let inst = random_efx(6, 4, seed);
        let keys = inst.keys().clone();
        let (shape, _) = inst.efx_shape().unwrap();
        let outer = shape.outer.clone().unwrap();
        let z: BTreeMap<u32, u32> =
            (0..8u32).map(|x| (x, outer.decrypt(keys.k, inst.encrypt(x).unwrap()))).collect();
        let r = em_subgroup_attack(6, |x| shape.inner.encrypt(keys.k, x), &z, 8).unwrap();
        assert_eq!(r.keys, Some((keys.k1, keys.k2)));
    }
}

#[test]
fn wrong_guesses_rarely_complete() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut audits, mut false_positives) = (0, 0);
    for seed in 0..40u64 {
        let inst = random_efx(8, 4, seed);
        let k = inst.keys().k;
        let (shape, _) = inst.efx_shape().unwrap();
        let outer = shape.outer.clone().unwrap();
        let cts: Vec<u32> = (0..16u32).map(|x| inst.encrypt(x).unwrap()).collect();
        for _ in 0..4 {
            let wrong = (k + rng.gen_range(1..16)) % 16;
            let z: BTreeMap<u32, u32> = (0..16u32).map(|x| (x, outer.decrypt(wrong, cts[x as usize]))).collect();
            audits += 1;
            false_positives += em_subgroup_attack(8, |x| shape.inner.encrypt(wrong, x), &z, 16).unwrap().keys.is_some() as u32;
        }
    }
    assert!((false_positives as f64) < 0.1 * audits as f64, "{false_positives}/{audits}");
}

#[test]
fn measured_points_track_the_reference() {
    // n = κ = 4: T within ×8 of max(2^{κ+n}/D, 2^{κ+n/2}) up to the constant
    // of two evaluations per representative
    for d in [4u64, 8, 16] {
        let mut total = 0u64;
        let trials = 20;
        for seed in 0..trials {
            let inst = random_efx(4, 4, seed);
            total += guess_and_em_attack(&inst, d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().offline_evals;
        }
        let measured = total as f64 / trials as f64;
        let reference = CurveKind::ClassicalEfx.log2_time(4, 4, (d as f64).log2()).exp2();
        assert!(measured / reference < 8.0 && reference / measured < 8.0, "D={d}: {measured} vs {reference}");
    }
}

#[test]
fn reference_curves() {
    let grid: Vec<f64> = (0..=16).map(|i| i as f64 * 0.5).collect();
    let (n, kappa) = (8u32, 16u32);
    let efx = tradeoff_curve(CurveKind::ClassicalEfx, n, kappa, &grid).unwrap();
    let fx = tradeoff_curve(CurveKind::ClassicalFx, n, kappa, &grid).unwrap();
    let q1 = tradeoff_curve(CurveKind::QuantumQ1, n, kappa, &grid).unwrap();
    assert_eq!(efx[0].log2_t, 24.0);
    assert_eq!(fx[0].log2_t, 24.0);
    assert_eq!(efx.last().unwrap().log2_t, 20.0);
    assert_eq!(fx.last().unwrap().log2_t, 16.0);
    for w in efx.windows(2) {
        if w[1].log2_d <= 4.0 {
            assert!(w[1].log2_t < w[0].log2_t);
        } else {
            assert_eq!(w[1].log2_t, 20.0);
        }
    }
    for (q, f) in q1.iter().zip(&fx) {
        if q.log2_d <= 8.0 && (kappa as f64 + n as f64 - q.log2_d) / 2.0 >= q.log2_d {
            assert_eq!(q.log2_t, f.log2_t / 2.0);
        }
    }

    let mut csv = Vec::new();
    write_curve_csv(&efx[..2], n, &mut csv).unwrap();
    assert_eq!(
        String::from_utf8(csv).unwrap(),
        "attack,log2D_over_n,log2T_over_n,measured_or_formula\nclassical-efx,0,3,formula\nclassical-efx,0.0625,2.9375,formula\n"
    );
}

#[test]
fn gap_polylines() {
    let n = 8;
    assert_eq!(CurveKind::ClassicalEfx.polyline(n, 2 * n), vec![(0.0, 3.0), (0.5, 2.5), (1.0, 2.5)]);
    assert_eq!(CurveKind::ClassicalFx.polyline(n, 2 * n), vec![(0.0, 3.0), (1.0, 2.0)]);
    assert_eq!(CurveKind::QuantumQ1.polyline(n, 2 * n), vec![(0.0, 1.5), (1.0, 1.0)]);
    assert_eq!(CurveKind::QuantumQ2.polyline(n, 2 * n), vec![(0.0, 1.0), (1.0, 1.0)]);
}
