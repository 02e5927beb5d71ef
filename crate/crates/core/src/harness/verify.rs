use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config_error;
use crate::bounds::{efx_classical_bound, efx_required_resources, quantum_distinguish_bound, BoundParams};
use crate::ciphers::Permutation;
use crate::classical::{classical_period_find, ClassicalPeriod};
use crate::error::{Error, Result};
use crate::gf2::{dot, Gf2Matrix, PeriodOutcome};
use crate::qsim::{amplify, simon_full, simon_subroutine, StateVector, UniformPrep, NORM_TOLERANCE};

/// Functions checked by the oracle-equivalence suite: every n ≤ 2 function
/// with at most one period, then seeded n = 3 functions up to this total.
pub const ORACLE_INSTANCES: usize = 10_000;
/// Simon samples per oracle-equivalence instance; a rank shortfall at
/// n = 3 then has probability below 2^{-20}.
pub const ORACLE_SAMPLES: usize = 24;
/// Random points of the bounds-grid suite.
const BOUND_POINTS: usize = 10_000;
/// Failure messages kept per suite.
const MAX_FAILURES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifySuite {
    Unitarity,
    Orthogonality,
    OracleEquivalence,
    BoundsGrid,
}

impl VerifySuite {
    pub const ALL: [VerifySuite; 4] =
        [VerifySuite::Unitarity, VerifySuite::Orthogonality, VerifySuite::OracleEquivalence, VerifySuite::BoundsGrid];

    pub fn name(self) -> &'static str {
        match self {
            VerifySuite::Unitarity => "unitarity",
            VerifySuite::Orthogonality => "orthogonality",
            VerifySuite::OracleEquivalence => "oracle-equivalence",
            VerifySuite::BoundsGrid => "bounds-grid",
        }
    }
}

impl fmt::Display for VerifySuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VerifySuite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VerifySuite::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| config_error("suite", format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides the Hadamard constant in the unitarity suite, to check
    /// that the suite catches a corrupted gate.
    #[doc(hidden)]
    pub hadamard_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: VerifySuite,
    pub passed: bool,
    pub checks: u64,
    pub failed: u64,
    /// The first few failures.
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

struct Tally {
    suite: VerifySuite,
    checks: u64,
    failed: u64,
    failures: Vec<String>,
}

impl Tally {
    fn new(suite: VerifySuite) -> Self {
        Self { suite, checks: 0, failed: 0, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(what());
            }
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult { suite: self.suite, passed: self.failed == 0, checks: self.checks, failed: self.failed, failures: self.failures }
    }
}

/// Runs the selected suites (all of them when `suites` is empty), in the
/// canonical order and each once.
pub fn verify(suites: &[VerifySuite], options: &VerifyOptions) -> Result<VerifySummary> {
    let mut chosen: Vec<VerifySuite> = if suites.is_empty() { VerifySuite::ALL.to_vec() } else { suites.to_vec() };
    chosen.sort_unstable();
    chosen.dedup();
    let results = chosen
        .into_iter()
        .map(|suite| {
            let mut rng = ChaCha8Rng::seed_from_u64(super::derive_seed(options.seed, suite as u64));
            match suite {
                VerifySuite::Unitarity => unitarity(options, &mut rng),
                VerifySuite::Orthogonality => orthogonality(&mut rng),
                VerifySuite::OracleEquivalence => oracle_equivalence(&mut rng),
                VerifySuite::BoundsGrid => bounds_grid(&mut rng),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifySummary { passed: results.iter().all(|r| r.passed), suites: results })
}

fn random_state(layout: &[(&str, u32)], rng: &mut ChaCha8Rng) -> Result<StateVector> {
    let qubits: u32 = layout.iter().map(|l| l.1).sum();
    let mut amps: Vec<Complex64> =
        (0..1usize << qubits).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(layout, amps)
}

fn distance(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Every gate preserves the norm of random states, and H, the XOR oracle
/// and the reflections are involutions.
fn unitarity(options: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<SuiteResult> {
    let mut t = Tally::new(VerifySuite::Unitarity);
    for width in 1..=5u32 {
        for _ in 0..8 {
            let layout = [("a", width), ("b", width)];
            let start = random_state(&layout, rng)?;
            let mut sv = start.clone();
            if let Some(scale) = options.hadamard_scale {
                sv.inject_hadamard_scale(scale);
            }
            sv.hadamard("a")?;
            let norm = sv.norm_sqr();
            t.check((norm - 1.0).abs() < NORM_TOLERANCE, || format!("H on {width} qubits: norm {norm}"));
            sv.hadamard("a")?;
            let d = distance(&sv, &start);
            t.check(d < NORM_TOLERANCE, || format!("H·H on {width} qubits: distance {d}"));

            let f: Vec<u64> = (0..1u64 << width).map(|_| rng.gen_range(0..1u64 << width)).collect();
            let mut sv = start.clone();
            sv.apply_xor_oracle(&f, "a", "b")?;
            let norm = sv.norm_sqr();
            t.check((norm - 1.0).abs() < NORM_TOLERANCE, || format!("oracle on {width} qubits: norm {norm}"));
            sv.apply_xor_oracle(&f, "a", "b")?;
            let d = distance(&sv, &start);
            t.check(d < NORM_TOLERANCE, || format!("oracle twice on {width} qubits: distance {d}"));

            let p = Permutation::random(width, rng.gen())?;
            let mut sv = start.clone();
            sv.apply_inplace_perm(&p, "b")?;
            sv.apply_inplace_perm(&p.inverse(), "b")?;
            let d = distance(&sv, &start);
            t.check(d < NORM_TOLERANCE, || format!("permutation and inverse on {width} qubits: distance {d}"));

            let mut sv = start.clone();
            sv.reflect_zero("a")?;
            sv.reflect_zero("a")?;
            let d = distance(&sv, &start);
            t.check(d < NORM_TOLERANCE, || format!("reflection twice on {width} qubits: distance {d}"));
        }
    }
    for m in 1..=8u32 {
        let prep = UniformPrep { register: "y".into(), qubits: m };
        let marked = rng.gen_range(0..1usize << m);
        let mut sv = amplify(&prep, |i| i == marked, m as u64)?;
        let norm = sv.norm_sqr();
        t.check((norm - 1.0).abs() < NORM_TOLERANCE, || format!("{m}-qubit amplification: norm {norm}"));
        if let Some(scale) = options.hadamard_scale {
            sv.inject_hadamard_scale(scale);
            sv.hadamard("y")?;
            let norm = sv.norm_sqr();
            t.check((norm - 1.0).abs() < NORM_TOLERANCE, || format!("{m}-qubit H after amplification: norm {norm}"));
        }
    }
    Ok(t.finish())
}

/// f(x) = P(min(x, x ⊕ s)) for a random injection P, so f has period s
/// and no other collisions.
fn periodic_table(n: u32, s: u64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    let p = Permutation::random(n, rng.gen())?;
    Ok((0..1u64 << n).map(|x| p.apply(x.min(x ^ s) as u32) as u64).collect())
}

/// Simon samples are orthogonal to the planted period, and nullspace
/// vectors are orthogonal to the rows they come from.
fn orthogonality(rng: &mut ChaCha8Rng) -> Result<SuiteResult> {
    let mut t = Tally::new(VerifySuite::Orthogonality);
    for n in 2..=8u32 {
        for _ in 0..20 {
            let s = rng.gen_range(1..1u64 << n);
            let f = periodic_table(n, s, rng)?;
            for _ in 0..n + 4 {
                let y = simon_subroutine(&f, rng)?;
                t.check(dot(y, s) == 0, || format!("n={n}: sample {y:#b} not orthogonal to period {s:#b}"));
            }
        }
        for _ in 0..20 {
            let rows: Vec<u64> = (0..rng.gen_range(1..=n)).map(|_| rng.gen_range(0..1u64 << n)).collect();
            let m = Gf2Matrix::from_rows(n, rows.iter().copied())?;
            let basis = m.nullspace_basis();
            t.check(basis.len() as u32 + m.rank() == n, || format!("n={n}: rank-nullity fails for {rows:?}"));
            for v in basis {
                t.check(rows.iter().all(|&r| dot(r, v) == 0), || format!("n={n}: {v:#b} not in the nullspace of {rows:?}"));
            }
        }
    }
    Ok(t.finish())
}

/// All functions on n bits as tables, for small n.
fn all_functions(n: u32) -> impl Iterator<Item = Vec<u64>> {
    let size = 1usize << n;
    let count = 1u64 << (n as usize * size);
    (0..count).map(move |code| (0..size).map(|x| (code >> (n as usize * x)) & ((1 << n) - 1)).collect())
}

/// The unique nonzero period of `f`, Ok(None) if f is injective, Err if
/// Simon's promise fails.
fn promise(f: &[u64]) -> std::result::Result<Option<u64>, ()> {
    let size = f.len() as u64;
    let periods: Vec<u64> = (1..size).filter(|&s| (0..size).all(|x| f[x as usize] == f[(x ^ s) as usize])).collect();
    let mut values = f.to_vec();
    values.sort_unstable();
    values.dedup();
    match periods.as_slice() {
        [] if values.len() as u64 == size => Ok(None),
        [s] if values.len() as u64 * 2 == size => Ok(Some(*s)),
        _ => Err(()),
    }
}

/// Simon's algorithm and the classical collision search agree on every
/// promise-respecting function of the enumeration.
fn oracle_equivalence(rng: &mut ChaCha8Rng) -> Result<SuiteResult> {
    let mut t = Tally::new(VerifySuite::OracleEquivalence);
    let mut instances: Vec<(u32, Vec<u64>)> = Vec::new();
    for n in 1..=2u32 {
        instances.extend(all_functions(n).filter(|f| promise(f).is_ok()).map(|f| (n, f)));
    }
    while instances.len() < ORACLE_INSTANCES {
        let f = if instances.len() % 2 == 0 {
            Permutation::random(3, rng.gen())?.table().into_iter().map(u64::from).collect()
        } else {
            let s = rng.gen_range(1..8u64);
            periodic_table(3, s, rng)?
        };
        instances.push((3, f));
    }
    for (n, f) in &instances {
        let expected = promise(f).expect("enumeration keeps promise instances only");
        let classical = classical_period_find(f, u64::MAX, rng)?.outcome;
        let (quantum, _) = simon_full(f, ORACLE_SAMPLES, rng)?;
        let agree = match (expected, classical, quantum) {
            (None, ClassicalPeriod::Injective, PeriodOutcome::Injective) => true,
            (Some(s), ClassicalPeriod::Period(a), PeriodOutcome::Period(b)) => a == s && b == s,
            _ => false,
        };
        t.check(agree, || format!("n={n}, f={f:?}: classical {classical:?}, Simon {quantum:?}"));
    }
    Ok(t.finish())
}

/// Bounds stay in [0, 1], grow with T and D, and the resource floors
/// reach their target.
fn bounds_grid(rng: &mut ChaCha8Rng) -> Result<SuiteResult> {
    let mut t = Tally::new(VerifySuite::BoundsGrid);
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    for _ in 0..BOUND_POINTS {
        let n = rng.gen_range(1..=128u32);
        let kappa = rng.gen_range(1..=256u32);
        let d = rng.gen_range(0.0..=n as f64).exp2().floor();
        let t_ = rng.gen_range(0.0..(kappa + n) as f64 * 1.5).exp2();
        let b = efx_classical_bound(&BoundParams::new(n, kappa, d, t_))?;
        t.check(unit(b.small_d) && unit(b.any_d), || format!("n={n} κ={kappa} D={d} T={t_}: {b:?}"));
        let q = rng.gen_range(0.0..kappa as f64).exp2();
        let qb = quantum_distinguish_bound(q, kappa)?;
        t.check(unit(qb), || format!("q={q} κ={kappa}: {qb}"));
    }
    for (n, kappa) in [(8u32, 16u32), (16, 32), (32, 64)] {
        let mut last = (0.0, 0.0);
        for i in 0..=64 {
            let lt = (kappa + n) as f64 * 1.5 * i as f64 / 64.0;
            let b = efx_classical_bound(&BoundParams::new(n, kappa, (n as f64 / 2.0).exp2(), lt.exp2()))?;
            t.check(b.small_d >= last.0 && b.any_d >= last.1, || format!("n={n} κ={kappa}: not monotone in T at 2^{lt}"));
            last = (b.small_d, b.any_d);
        }
        let mut last = 0.0;
        for ld in 0..=n {
            let b = efx_classical_bound(&BoundParams::new(n, kappa, (ld as f64).exp2(), (kappa as f64).exp2()))?;
            t.check(b.small_d >= last, || format!("n={n} κ={kappa}: not monotone in D at 2^{ld}"));
            last = b.small_d;
        }
        for target in [0.01, 0.1, 0.5, 1.0] {
            let floors = efx_required_resources(n, kappa, target)?;
            let at = |d: f64, tt: f64| efx_classical_bound(&BoundParams::new(n, kappa, d, tt));
            let small = at(floors.d_at_dt_floor, floors.dt_floor / floors.d_at_dt_floor)?.small_d;
            let any = at(1.0, floors.t_floor)?.any_d;
            t.check(small >= target * (1.0 - 1e-9), || format!("n={n} κ={kappa}: D·T floor gives {small} < {target}"));
            t.check(any >= target * (1.0 - 1e-9), || format!("n={n} κ={kappa}: T floor gives {any} < {target}"));
        }
    }
    Ok(t.finish())
}
