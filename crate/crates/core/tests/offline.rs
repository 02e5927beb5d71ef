use std::collections::BTreeSet;
use std::sync::Arc;

use keyext::ciphers::{BlockCipher, Construction, IdealCipher, KeyDerivation, KeyMaterial, Permutation};
use keyext::offline::{
    build_database_cpa, build_database_kpa, em_q2_attack, generalized_offline_simon, grover_meets_simon_attack,
    offline_simon_attack, offline_simon_attack_on, random_known_set, test_key_guess, AttackMode, AttackOptions,
    ClosureFamily, ShapeFamily, TestMethod,
};
use keyext::qsim::grover_iterations;
use keyext::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_efx(n: u32, kappa: u32, seed: u64) -> Construction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe7f);
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

fn random_em(n: u32, seed: u64) -> Construction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe3);
    // Simon's promise needs a nonzero period
    let (k1, k2) = (rng.gen_range(1..1 << n), rng.gen_range(0..1 << n));
    Construction::even_mansour(Permutation::random(n, seed).unwrap(), k1, k2).unwrap()
}

fn success_rate(trials: u64, mut run: impl FnMut(u64) -> bool) -> f64 {
    (0..trials).filter(|&s| run(s)).count() as f64 / trials as f64
}

#[test]
fn efx_tensor_recovers_full_key() {
    let rate = success_rate(200, |seed| {
        let inst = random_efx(4, 4, seed);
        let report = offline_simon_attack(&inst, &AttackOptions::new(2, 6).seed(seed)).unwrap();
        if report.success {
            let keys = inst.keys();
            assert_eq!((report.k, report.k1, report.k2), (Some(keys.k), Some(keys.k1), Some(keys.k2)));
        }
        assert_eq!(report.online_queries, 4);
        assert_eq!(report.iterations, 6);
        report.success
    });
    assert!(rate >= 0.9, "success rate {rate}");
}

#[test]
fn em_exact_reduces_to_simon() {
    let rate = success_rate(200, |seed| {
        let inst = random_em(3, seed);
        let opts = AttackOptions::new(3, 7).mode(AttackMode::Exact).seed(seed);
        offline_simon_attack(&inst, &opts).unwrap().success
    });
    assert!(rate >= 0.95, "success rate {rate}");
}

#[test]
fn exact_mode_runs_the_joint_state() {
    // κ + (n−u) + c(u+n) = 2 + 1 + 4·3 = 15 qubits
    let rate = success_rate(40, |seed| {
        let inst = random_efx(2, 2, seed);
        let opts = AttackOptions::new(1, 4).mode(AttackMode::Exact).seed(seed);
        offline_simon_attack(&inst, &opts).unwrap().success
    });
    assert!(rate > 0.5, "success rate {rate}");
}

#[test]
fn exact_mode_respects_qubit_cap() {
    let inst = random_efx(4, 4, 1);
    let opts = AttackOptions::new(2, 6).mode(AttackMode::Exact);
    assert!(matches!(offline_simon_attack(&inst, &opts), Err(Error::QubitCap { .. })));
    assert_eq!(inst.online_forward(), 0);
}

#[test]
fn iterations_follow_the_guess_space() {
    for u in 0..=4 {
        let inst = random_efx(4, 4, 3);
        let r = offline_simon_attack(&inst, &AttackOptions::new(u, 8).seed(3)).unwrap();
        let expected = grover_iterations((-(8.0 - u as f64)).exp2()).unwrap();
        assert_eq!(r.iterations, expected);
        assert_eq!(r.online_queries, 1 << u);
    }
}

#[test]
fn two_xor_and_defx_are_recovered() {
    let mut wins = (0, 0);
    for seed in 0..30u64 {
        let e = Arc::new(IdealCipher::new(4, 4, seed).unwrap());
        let two = Construction::two_xor(e.clone(), KeyDerivation::default(), (seed % 16) as u32, 7).unwrap();
        wins.0 += offline_simon_attack(&two, &AttackOptions::new(2, 6).seed(seed)).unwrap().success as u32;
        let defx = Construction::defx(
            e.clone(),
            Arc::new(IdealCipher::new(4, 4, seed + 100).unwrap()),
            Arc::new(IdealCipher::new(4, 4, seed + 200).unwrap()),
            KeyMaterial::whitened(3, 11, 6),
        )
        .unwrap();
        wins.1 += offline_simon_attack(&defx, &AttackOptions::new(4, 8).seed(seed)).unwrap().success as u32;
    }
    assert!(wins.0 >= 25 && wins.1 >= 25, "{wins:?}");
}

#[test]
fn defx_needs_full_codebook() {
    let e = Arc::new(IdealCipher::new(4, 4, 5).unwrap());
    let defx = Construction::defx(e.clone(), e.clone(), e, KeyMaterial::whitened(1, 2, 3)).unwrap();
    assert!(offline_simon_attack(&defx, &AttackOptions::new(2, 6)).is_err());
}

#[test]
fn success_reports_reproduce_the_codebook() {
    for seed in 0..40u64 {
        let inst = random_efx(4, 4, seed);
        let r = offline_simon_attack(&inst, &AttackOptions::new(3, 7).seed(seed)).unwrap();
        if r.success {
            let keys = KeyMaterial::whitened(r.k.unwrap(), r.k1.unwrap(), r.k2.unwrap());
            assert!((0..16).all(|x| inst.evaluate_with(&keys, x) == inst.evaluate_with(inst.keys(), x)));
        }
    }
}

#[test]
fn correct_guess_always_passes() {
    let inst = random_efx(4, 4, 9);
    let db = build_database_cpa(&inst, 2, 6).unwrap();
    let (shape, (k, k1, _)) = inst.efx_shape().unwrap();
    let family = ShapeFamily::new(shape, 2).unwrap();
    let guess = ((k as u64) << 2) | (k1 & 3) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = test_key_guess(&db, &family, guess, TestMethod::Exhaustive, &mut rng).unwrap();
    assert!(out.passes);
    assert!((out.pass_probability - 1.0).abs() < 1e-12);
}

#[test]
fn kpa_database_with_no_gaps_matches_cpa() {
    let inst = random_efx(4, 3, 2);
    let known: BTreeSet<u32> = (0..16).collect();
    let db = build_database_kpa(&inst, &known, 8).unwrap();
    let r = offline_simon_attack_on(&inst, &db, &AttackOptions::new(4, 8).seed(2)).unwrap();
    assert!(r.success);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let partial = build_database_kpa(&inst, &random_known_set(4, 1.0 / 16.0, &mut rng).unwrap(), 8).unwrap();
    assert!(offline_simon_attack_on(&inst, &partial, &AttackOptions::new(4, 6)).is_err());
}

#[test]
fn gms_counts_two_batches_per_iteration() {
    for seed in 0..10u64 {
        let e = Arc::new(IdealCipher::new(4, 4, seed).unwrap());
        let fx = Construction::fx(e, KeyMaterial::whitened(5, 12, 9)).unwrap();
        let r = grover_meets_simon_attack(&fx, 8, seed).unwrap();
        assert_eq!(r.quantum_queries, 2 * 8 * r.total_iterations);
        assert_eq!(r.iterations, 3);
        assert!(r.online_queries <= 4);
    }
    let em = random_em(4, 1);
    let r = grover_meets_simon_attack(&em, 8, 1).unwrap();
    assert_eq!((r.iterations, r.quantum_queries), (0, 0));
    assert!(r.success);
}

#[test]
fn em_q2_recovers_k1() {
    let rate = success_rate(200, |seed| em_q2_attack(&random_em(6, seed), 10, seed).unwrap().success);
    assert!(rate >= 0.95, "success rate {rate}");
    let flat = Construction::even_mansour(Permutation::identity(4).unwrap(), 0, 0).unwrap();
    let r = em_q2_attack(&flat, 8, 0).unwrap();
    assert!(!r.success);
    assert_eq!(r.note.as_deref(), Some("degenerate"));
}

#[test]
fn generalized_engine_reproduces_fx() {
    let e = Arc::new(IdealCipher::new(4, 3, 17).unwrap());
    let fx = Construction::fx(e.clone(), KeyMaterial::whitened(6, 10, 3)).unwrap();
    let db = build_database_cpa(&fx, 4, 8).unwrap();
    let e2 = e.clone();
    let family = ClosureFamily {
        u: 4,
        out_bits: 4,
        guess_bits: 3,
        evals_per_register: 1,
        payload_map: Arc::new(|_, w| w),
        xor_fn: Arc::new(move |y, x| e2.encrypt(y as u32, x)),
        relabel: None,
    };
    family.validate().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let out = generalized_offline_simon(&db, &family, &AttackOptions::new(4, 8), &mut rng).unwrap();
    assert_eq!(out.guess, Some(6));
    assert_eq!(out.period_basis, vec![10]);

    let constant = ClosureFamily { xor_fn: Arc::new(|_, x| x), ..family };
    let out = generalized_offline_simon(&db, &constant, &AttackOptions::new(4, 8), &mut rng).unwrap();
    assert_eq!(out.guess, None);
}
