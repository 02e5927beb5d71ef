//! The offline-Simon attack family: query databases, the reversible
//! periodicity test, and the key searches built on top of them.

mod attacks;
mod database;
mod keytest;
mod search;

use serde::{Deserialize, Serialize};

use crate::ciphers::ConstructionKind;

pub use attacks::{
    em_q2_attack, grover_meets_simon_attack, offline_simon_attack, offline_simon_attack_on, EM_Q2_MAX_AMBIGUITY,
    GMS_CHECK_PAIRS,
};
pub use database::{
    build_database_cpa, build_database_kpa, database_overlap, fidelity_bound, random_known_set, DbRegister,
    QueryDatabase,
};
pub use keytest::{
    rank_deficiency_probability, register_distributions, sample_from, simon_distribution, test_key_guess,
    ClosureFamily, GuessFamily, PayloadMap, ShapeFamily, TestMethod, TestOutcome,
};
pub(crate) use search::exact_qubits;
pub use search::{generalized_offline_simon, search, GeneralizedOutcome, SearchOutcome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AttackMode {
    /// Full joint state vector of the search register and the database.
    Exact,
    /// Per-register exact distributions and the closed-form amplification
    /// curve.
    #[default]
    Tensor,
}

impl std::str::FromStr for AttackMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EXACT" => Ok(AttackMode::Exact),
            "TENSOR" => Ok(AttackMode::Tensor),
            other => Err(crate::error::invalid("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOptions {
    /// Input bits per database register (database size 2^u).
    pub u: u32,
    /// Number of database registers, i.e. Simon samples per test.
    pub c: usize,
    pub mode: AttackMode,
    /// Search rounds before giving up; each failed round excludes the
    /// measured guess from the test.
    pub max_rounds: u32,
    pub seed: u64,
}

impl AttackOptions {
    pub fn new(u: u32, c: usize) -> Self {
        Self { u, c, mode: AttackMode::Tensor, max_rounds: DEFAULT_MAX_ROUNDS, seed: 0 }
    }

    pub fn mode(mut self, mode: AttackMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn max_rounds(mut self, rounds: u32) -> Self {
        self.max_rounds = rounds;
        self
    }
}

pub const DEFAULT_MAX_ROUNDS: u32 = 3;

/// Outcome and cost accounting of one attack run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: String,
    pub construction: ConstructionKind,
    pub mode: AttackMode,
    pub seed: u64,
    /// The recovered keys reproduce the construction on every input.
    pub success: bool,
    /// The recovered keys agree with every recorded query.
    pub consistent: bool,
    pub k: Option<u32>,
    pub k1: Option<u32>,
    pub k2: Option<u32>,
    /// Classical online queries.
    #[serde(rename = "D")]
    pub online_queries: u64,
    /// Superposition queries to the construction.
    pub quantum_queries: u64,
    /// Queries spent completing and checking candidate keys.
    pub recovery_queries: u64,
    /// Cipher evaluations made offline.
    pub offline_evals: u64,
    /// Amplification iterations of the first search round.
    pub iterations: u64,
    pub total_iterations: u64,
    pub search_rounds: u32,
    /// Guesses whose test passes with probability at least 1/2.
    pub passing_keys: u64,
    pub ambiguous: bool,
    /// offline_evals + n³ per rank computation + n·2^u for the database.
    pub sim_time_units: u64,
    /// Cost of the first search round alone: iterations · (test evals + n³).
    pub search_time_units: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AttackReport {
    pub(crate) fn empty(attack: &str, construction: ConstructionKind, mode: AttackMode, seed: u64) -> Self {
        Self {
            attack: attack.to_string(),
            construction,
            mode,
            seed,
            success: false,
            consistent: false,
            k: None,
            k1: None,
            k2: None,
            online_queries: 0,
            quantum_queries: 0,
            recovery_queries: 0,
            offline_evals: 0,
            iterations: 0,
            total_iterations: 0,
            search_rounds: 0,
            passing_keys: 0,
            ambiguous: false,
            sim_time_units: 0,
            search_time_units: 0,
            note: None,
        }
    }
}
