//! Experiment plumbing: flat configs, seeded trial runs, sweeps, plots and
//! the verification gate behind the CLI.

mod plot;
mod sweep;
mod verify;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ciphers::{Construction, ConstructionKind, IdealCipher, KeyDerivation, KeyMaterial, Permutation, MAX_BLOCK_BITS, MAX_KEY_BITS};
use crate::classical::{exhaustive_search, guess_and_em_attack_with, ClassicalReport, EmVariant, MAX_EXHAUSTIVE_BITS};
use crate::error::{Error, Result};
use crate::offline::{
    build_database_cpa, build_database_kpa, database_overlap, em_q2_attack, exact_qubits, grover_meets_simon_attack,
    offline_simon_attack, offline_simon_attack_on, random_known_set, AttackMode, AttackOptions, AttackReport,
    GuessFamily, ShapeFamily, DEFAULT_MAX_ROUNDS,
};
use crate::qsim::{default_samples, DEFAULT_QUBIT_CAP};

pub use plot::{extent_of, plot_curves, read_series, Extent, PlotStyle, Series};
pub use sweep::{sweep, SweepAxis, SweepRow, SweepTable, FIDELITY_SIGMAS};
pub use verify::{verify, SuiteResult, VerifyOptions, VerifySuite, VerifySummary, ORACLE_INSTANCES, ORACLE_SAMPLES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttackKind {
    /// Q1 offline-Simon with a classical database.
    OfflineSimon,
    /// Q2 Grover-meets-Simon.
    GroverMeetsSimon,
    /// Q2 Simon attack on Even-Mansour.
    EmQ2,
    /// Classical: guess k, then attack the Even-Mansour core.
    GuessAndEm,
    /// Classical: exhaustive search over (k, k1, k2).
    Exhaustive,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::OfflineSimon,
        AttackKind::GroverMeetsSimon,
        AttackKind::EmQ2,
        AttackKind::GuessAndEm,
        AttackKind::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::OfflineSimon => "offline-simon",
            AttackKind::GroverMeetsSimon => "grover-meets-simon",
            AttackKind::EmQ2 => "em-q2",
            AttackKind::GuessAndEm => "guess-and-em",
            AttackKind::Exhaustive => "exhaustive",
        }
    }

    pub fn is_classical(self) -> bool {
        matches!(self, AttackKind::GuessAndEm | AttackKind::Exhaustive)
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let alias = match norm.as_str() {
            "gms" => "grover-meets-simon",
            "offline" | "q1" => "offline-simon",
            other => other,
        };
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| config_error("attack", format!("unknown attack `{s}`")))
    }
}

fn from_str_de<'de, D: Deserializer<'de>, T: FromStr<Err = Error>>(d: D) -> std::result::Result<T, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn display_ser<S: Serializer, T: fmt::Display>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl Serialize for AttackKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        display_ser(self, s)
    }
}

impl<'de> Deserialize<'de> for AttackKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        from_str_de(d)
    }
}

pub(crate) fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.into(), reason: reason.into() }
}

/// One experiment, read from a flat TOML file. Fields left out take the
/// defaults noted on each; `u`, `c` and `D` default from `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub attack: AttackKind,
    #[serde(deserialize_with = "from_str_de", serialize_with = "display_ser")]
    pub construction: ConstructionKind,
    pub n: u32,
    /// Block cipher key bits; ignored by EM and ITERATED_EM.
    #[serde(default)]
    pub kappa: u32,
    /// Database input bits; defaults to n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<u32>,
    /// Simon samples per test; defaults to n + 4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default)]
    pub mode: AttackMode,
    /// Fraction of the codebook missing from a known-plaintext database.
    #[serde(default)]
    pub alpha: f64,
    /// Classical online queries; defaults to 2^n.
    #[serde(default, rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    #[serde(default = "one")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub max_rounds: u32,
    #[serde(default)]
    pub em_variant: EmVariant,
    /// JSON report path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Sweep CSV path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn one() -> u64 {
    1
}

fn default_rounds() -> u32 {
    DEFAULT_MAX_ROUNDS
}

impl ExperimentConfig {
    pub fn new(attack: AttackKind, construction: ConstructionKind, n: u32, kappa: u32) -> Self {
        Self {
            attack,
            construction,
            n,
            kappa,
            u: None,
            c: None,
            mode: AttackMode::Tensor,
            alpha: 0.0,
            d: None,
            trials: 1,
            seed: 0,
            max_rounds: DEFAULT_MAX_ROUNDS,
            em_variant: EmVariant::Subgroup,
            report: None,
            csv: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            // the key on the offending line, if the error points at one
            let field = e
                .span()
                .and_then(|span| {
                    let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
                    let line = text[start..].lines().next()?;
                    line.split_once('=').map(|(key, _)| key.trim().to_string())
                })
                .unwrap_or_else(|| "<file>".into());
            config_error(&field, e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn u(&self) -> u32 {
        self.u.unwrap_or(self.n)
    }

    pub fn c(&self) -> usize {
        self.c.unwrap_or_else(|| default_samples(self.n))
    }

    pub fn d(&self) -> u64 {
        self.d.unwrap_or(1u64 << self.n.min(63))
    }

    /// Key bits of the block cipher as the attacks see them.
    pub fn effective_kappa(&self) -> u32 {
        match self.construction {
            ConstructionKind::Em => 0,
            ConstructionKind::IteratedEm => self.n,
            _ => self.kappa,
        }
    }

    /// Checks every field against the preconditions of the modules it
    /// drives, without querying anything.
    pub fn validate(&self) -> Result<()> {
        use ConstructionKind as K;
        let (n, kind) = (self.n, self.construction);
        if !(1..=MAX_BLOCK_BITS).contains(&n) {
            return Err(config_error("n", format!("{n} outside 1..={MAX_BLOCK_BITS}")));
        }
        let keyed = !matches!(kind, K::Em | K::IteratedEm);
        if keyed && !(1..=MAX_KEY_BITS).contains(&self.kappa) {
            return Err(config_error("kappa", format!("{} outside 1..={MAX_KEY_BITS} for {kind}", self.kappa)));
        }
        if self.u() > n {
            return Err(config_error("u", format!("{} exceeds n = {n}", self.u())));
        }
        if self.c() == 0 {
            return Err(config_error("c", "needs at least one sample"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(config_error("alpha", format!("{} outside [0, 1)", self.alpha)));
        }
        if self.max_rounds == 0 {
            return Err(config_error("max_rounds", "needs at least one round"));
        }
        if self.alpha > 0.0 && (self.attack != AttackKind::OfflineSimon || self.u() != n) {
            return Err(config_error("alpha", "known-plaintext databases need offline-simon with u = n"));
        }
        match self.attack {
            AttackKind::OfflineSimon => {
                if matches!(kind, K::Defx | K::Ecbc3 | K::IteratedEm) && self.u() != n {
                    return Err(config_error("u", format!("{kind} has an inner layer, so u must equal n")));
                }
                if self.mode == AttackMode::Exact {
                    let g = self.effective_kappa() + n - self.u();
                    let qubits = exact_qubits(g, self.c(), self.u(), n);
                    if qubits > DEFAULT_QUBIT_CAP {
                        return Err(config_error(
                            "mode",
                            format!("EXACT needs {qubits} qubits, cap is {DEFAULT_QUBIT_CAP}"),
                        ));
                    }
                }
            }
            AttackKind::GroverMeetsSimon => {
                if !matches!(kind, K::Fx | K::Efx | K::TwoXor | K::Em) {
                    return Err(config_error("construction", format!("grover-meets-simon does not apply to {kind}")));
                }
            }
            AttackKind::EmQ2 => {
                if kind != K::Em {
                    return Err(config_error("construction", "em-q2 needs EM"));
                }
            }
            AttackKind::GuessAndEm | AttackKind::Exhaustive => {
                if matches!(kind, K::Defx | K::Ecbc3 | K::IteratedEm) {
                    return Err(config_error("construction", format!("{} does not apply to {kind}", self.attack)));
                }
                let d = self.d();
                if d == 0 || d > 1u64 << n {
                    return Err(config_error("D", format!("{d} outside 1..=2^{n}")));
                }
                if self.attack == AttackKind::GuessAndEm {
                    if d < 2 {
                        return Err(config_error("D", "guess-and-em needs at least two queries"));
                    }
                    if self.em_variant == EmVariant::Collision && d != 1u64 << n {
                        return Err(config_error("em_variant", "the collision variant needs D = 2^n"));
                    }
                } else {
                    if d < 2 {
                        return Err(config_error("D", "exhaustive search needs at least two pairs"));
                    }
                    if self.effective_kappa() + 2 * n > MAX_EXHAUSTIVE_BITS {
                        return Err(config_error(
                            "n",
                            format!("exhaustive search over κ + 2n > {MAX_EXHAUSTIVE_BITS} bits"),
                        ));
                    }
                }
            }
        }
        if matches!(self.mode, AttackMode::Exact) && self.attack != AttackKind::OfflineSimon {
            return Err(config_error("mode", format!("EXACT applies to offline-simon only, not {}", self.attack)));
        }
        Ok(())
    }
}

/// `hash(base, index)`: the first output of the ChaCha8 stream `index`
/// keyed by `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

/// A random instance of `kind` with ideal-cipher or random-permutation
/// components, deterministic in `seed`. EM draws a nonzero k1 so that
/// Simon's promise holds; ITERATED_EM uses the schedule a,a,b,a,b,a over
/// five rounds.
pub fn random_instance(kind: ConstructionKind, n: u32, kappa: u32, seed: u64) -> Result<Construction> {
    use ConstructionKind as K;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let block = 1u32 << n;
    let cipher = |i: u64| -> Result<Arc<IdealCipher>> { Ok(Arc::new(IdealCipher::new(n, kappa, derive_seed(seed, i))?)) };
    let key = |rng: &mut ChaCha8Rng| rng.gen_range(0..1u32 << kappa);
    match kind {
        K::Em => {
            let (k1, k2) = (rng.gen_range(1..block.max(2)), rng.gen_range(0..block));
            Construction::even_mansour(Permutation::random(n, derive_seed(seed, 1))?, k1 % block, k2)
        }
        K::Fx => {
            let keys = KeyMaterial::whitened(key(&mut rng), rng.gen_range(0..block), rng.gen_range(0..block));
            Construction::fx(cipher(1)?, keys)
        }
        K::Efx => {
            let keys = KeyMaterial::whitened(key(&mut rng), rng.gen_range(0..block), rng.gen_range(0..block));
            Construction::efx(cipher(1)?, cipher(2)?, keys)
        }
        K::TwoXor => {
            let (k, z) = (key(&mut rng), rng.gen_range(0..block));
            Construction::two_xor(cipher(1)?, KeyDerivation::default(), k, z)
        }
        K::Defx => {
            let keys = KeyMaterial::whitened(key(&mut rng), rng.gen_range(0..block), rng.gen_range(0..block));
            Construction::defx(cipher(1)?, cipher(2)?, cipher(3)?, keys)
        }
        K::Ecbc3 => {
            let (k, m1, m2) = (key(&mut rng), rng.gen_range(0..block), rng.gen_range(0..block));
            Construction::ecbc3(cipher(1)?, KeyDerivation::default(), k, m1, m2)
        }
        K::IteratedEm => {
            let perms = (1..=5).map(|i| Permutation::random(n, derive_seed(seed, i))).collect::<Result<Vec<_>>>()?;
            let round_keys = vec![rng.gen_range(0..block), rng.gen_range(0..block)];
            Construction::iterated_em(perms, round_keys, vec![0, 0, 1, 0, 1, 0])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrialReport {
    Quantum(AttackReport),
    Classical(ClassicalReport),
}

impl TrialReport {
    pub fn success(&self) -> bool {
        match self {
            TrialReport::Quantum(r) => r.success,
            TrialReport::Classical(r) => r.success,
        }
    }

    pub fn consistent(&self) -> bool {
        match self {
            TrialReport::Quantum(r) => r.consistent,
            TrialReport::Classical(r) => r.consistent,
        }
    }

    pub fn online_queries(&self) -> u64 {
        match self {
            TrialReport::Quantum(r) => r.online_queries,
            TrialReport::Classical(r) => r.online_queries,
        }
    }

    pub fn quantum_queries(&self) -> u64 {
        match self {
            TrialReport::Quantum(r) => r.quantum_queries,
            TrialReport::Classical(_) => 0,
        }
    }

    pub fn offline_evals(&self) -> u64 {
        match self {
            TrialReport::Quantum(r) => r.offline_evals,
            TrialReport::Classical(r) => r.offline_evals,
        }
    }

    pub fn iterations(&self) -> u64 {
        match self {
            TrialReport::Quantum(r) => r.iterations,
            TrialReport::Classical(_) => 0,
        }
    }

    /// Total simulated cost: `sim_time_units` or `time_units`.
    pub fn time_units(&self) -> u64 {
        match self {
            TrialReport::Quantum(r) => r.sim_time_units,
            TrialReport::Classical(r) => r.time_units,
        }
    }

    /// The cost the trade-off curves measure: the first search round for
    /// the quantum attacks, the whole run for the classical ones.
    pub fn tradeoff_time(&self) -> u64 {
        match self {
            TrialReport::Quantum(r) => r.search_time_units,
            TrialReport::Classical(r) => r.time_units,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    /// `⟨ψ|ψ′⟩` of the known-plaintext database against the full one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub database_overlap: Option<f64>,
    pub report: TrialReport,
}

/// Counters summed over the trials.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: u64,
    pub successes: u64,
    pub consistent: u64,
    pub success_rate: f64,
    #[serde(rename = "total_D")]
    pub total_online_queries: u64,
    pub total_quantum_queries: u64,
    #[serde(rename = "total_T")]
    pub total_offline_evals: u64,
    pub total_iterations: u64,
    pub total_time_units: u64,
    pub total_tradeoff_time: u64,
}

impl Summary {
    pub fn of(records: &[TrialRecord]) -> Self {
        let mut s = Summary { trials: records.len() as u64, ..Default::default() };
        for r in records.iter().map(|r| &r.report) {
            s.successes += r.success() as u64;
            s.consistent += r.consistent() as u64;
            s.total_online_queries += r.online_queries();
            s.total_quantum_queries += r.quantum_queries();
            s.total_offline_evals += r.offline_evals();
            s.total_iterations += r.iterations();
            s.total_time_units += r.time_units();
            s.total_tradeoff_time += r.tradeoff_time();
        }
        if s.trials > 0 {
            s.success_rate = s.successes as f64 / s.trials as f64;
        }
        s
    }

    pub fn mean(&self, total: u64) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            total as f64 / self.trials as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// One trial; the instance and attack seeds both derive from `seed`.
pub fn run_trial(config: &ExperimentConfig, trial: u64, seed: u64) -> Result<TrialRecord> {
    let (n, u, c) = (config.n, config.u(), config.c());
    let instance = random_instance(config.construction, n, config.kappa, seed)?;
    let attack_seed = derive_seed(seed, 1);
    let options = AttackOptions::new(u, c).mode(config.mode).seed(attack_seed).max_rounds(config.max_rounds);
    let mut overlap = None;
    let report = match config.attack {
        AttackKind::OfflineSimon if config.alpha > 0.0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
            let known: BTreeSet<u32> = random_known_set(n, config.alpha, &mut rng)?;
            let db = build_database_kpa(&instance, &known, c)?;
            let full = build_database_cpa(&instance.clone(), n, c)?;
            overlap = Some(database_overlap(&full, &db)?);
            TrialReport::Quantum(offline_simon_attack_on(&instance, &db, &options)?)
        }
        AttackKind::OfflineSimon => TrialReport::Quantum(offline_simon_attack(&instance, &options)?),
        AttackKind::GroverMeetsSimon => TrialReport::Quantum(grover_meets_simon_attack(&instance, c, attack_seed)?),
        AttackKind::EmQ2 => TrialReport::Quantum(em_q2_attack(&instance, c, attack_seed)?),
        AttackKind::GuessAndEm => {
            let mut rng = ChaCha8Rng::seed_from_u64(attack_seed);
            TrialReport::Classical(guess_and_em_attack_with(&instance, config.d(), config.em_variant, &mut rng)?)
        }
        AttackKind::Exhaustive => {
            let pairs = (0..config.d() as u32).map(|x| Ok((x, instance.encrypt(x)?))).collect::<Result<Vec<_>>>()?;
            TrialReport::Classical(exhaustive_search(&instance, &pairs)?)
        }
    };
    Ok(TrialRecord { trial, seed, database_overlap: overlap, report })
}

/// Runs `config.trials` independent trials in parallel. The report is a
/// pure function of the config; trial i uses seed `hash(seed, i)`.
pub fn run_attack(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i, derive_seed(config.seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { config: config.clone(), summary: Summary::of(&trials), trials })
}

/// The guess space of the offline search of a config, for reference
/// iteration counts: `κ + n − u`, or κ for Grover-meets-Simon.
pub fn search_bits(config: &ExperimentConfig) -> Option<u32> {
    match config.attack {
        AttackKind::OfflineSimon => {
            let inst = random_instance(config.construction, config.n, config.kappa, 0).ok()?;
            let (shape, _) = inst.efx_shape()?;
            Some(ShapeFamily::new(shape, config.u()).ok()?.guess_bits())
        }
        AttackKind::GroverMeetsSimon => Some(config.effective_kappa()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_per_trial() {
        let seeds: BTreeSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }

    #[test]
    fn every_kind_builds() {
        for kind in ConstructionKind::ALL {
            let inst = random_instance(kind, 4, 4, 11).unwrap();
            assert_eq!(inst.kind(), kind);
            assert!(inst.efx_shape().is_some(), "{kind}");
        }
        assert_ne!(random_instance(ConstructionKind::Em, 1, 0, 3).unwrap().keys().k1, 0);
    }

    #[test]
    fn field_level_errors() {
        let err = ExperimentConfig::from_toml("attack = \"offline-simon\"\nconstruction = \"EFX\"\nn = 4\nkappa = 4\nu = 7\n")
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "u"), "{err}");
        let err = ExperimentConfig::from_toml("attack = \"offline-simon\"\nconstruction = \"EFX\"\nn = 4\nbogus = 1\n")
            .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = ExperimentConfig::from_toml("attack = \"nope\"\nconstruction = \"EFX\"\nn = 4\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "attack"), "{err}");
    }
}
