use std::collections::HashMap;

use keyext::ciphers::Permutation;
use keyext::gf2::PeriodOutcome;
use keyext::qsim::{default_samples, simon_full, simon_subroutine};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upper 0.1% points of the chi-square distribution.
const CHI2_999_DF7: f64 = 24.322;
const CHI2_999_DF23: f64 = 49.728;

fn chi_square(counts: &[u64], expected: f64) -> f64 {
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// Probability that `c` uniform vectors of a `d`-dimensional space span it.
fn full_rank_probability(d: u32, c: usize) -> f64 {
    (0..d).map(|i| 1.0 - 2f64.powi(i as i32 - c as i32)).product()
}

#[test]
fn two_bit_permutations_are_uniform() {
    let trials = 100_000u64;
    let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
    for seed in 0..trials {
        *counts.entry(Permutation::random(2, seed).unwrap().table()).or_default() += 1;
    }
    assert_eq!(counts.len(), 24);
    let p = 1.0 / 24.0;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    for (table, &c) in &counts {
        assert!((c as f64 / trials as f64 - p).abs() <= 3.0 * sigma, "{table:?}: {c}");
    }
    let cells: Vec<u64> = counts.values().copied().collect();
    assert!(chi_square(&cells, trials as f64 * p) < CHI2_999_DF23);
}

#[test]
fn injective_simon_samples_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut f: Vec<u64> = (0..8).collect();
    f.shuffle(&mut rng);
    let trials = 100_000u64;
    let mut counts = [0u64; 8];
    for _ in 0..trials {
        counts[simon_subroutine(&f, &mut rng).unwrap() as usize] += 1;
    }
    assert!(chi_square(&counts, trials as f64 / 8.0) < CHI2_999_DF7, "{counts:?}");
}

fn three_sigma_of(p: f64, trials: u64) -> f64 {
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

#[test]
fn simon_full_rates_match_the_rank_probability() {
    let (n, trials) = (8u32, 1000u64);
    let c = default_samples(n);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut periodic_hits = 0u64;
    let mut injective_hits = 0u64;
    for _ in 0..trials {
        let s = rng.gen_range(1..1u64 << n);
        let mut labels: Vec<u64> = (0..1u64 << n).collect();
        labels.shuffle(&mut rng);
        let periodic: Vec<u64> = (0..1u64 << n).map(|x| labels[x.min(x ^ s) as usize]).collect();
        let (outcome, samples) = simon_full(&periodic, c, &mut rng).unwrap();
        assert!(samples.iter().all(|y| (y & s).count_ones() % 2 == 0));
        periodic_hits += (outcome == PeriodOutcome::Period(s)) as u64;

        labels.shuffle(&mut rng);
        injective_hits += (simon_full(&labels, c, &mut rng).unwrap().0 == PeriodOutcome::Injective) as u64;
    }
    // samples are uniform on s⊥ (dimension n − 1) or on the whole space
    let periodic = full_rank_probability(n - 1, c);
    let injective = full_rank_probability(n, c);
    assert!((periodic - 0.96931).abs() < 1e-5 && (injective - 0.93902).abs() < 1e-5);
    let rate = |hits: u64| hits as f64 / trials as f64;
    assert!((rate(periodic_hits) - periodic).abs() <= three_sigma_of(periodic, trials), "{periodic_hits}");
    assert!((rate(injective_hits) - injective).abs() <= three_sigma_of(injective, trials), "{injective_hits}");
}
