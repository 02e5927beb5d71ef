use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::ciphers::Construction;
use crate::error::{invalid, Error, Result};

/// One register of the query state: `Σ_x |x⟩|payload[x]⟩`, where missing
/// inputs carry the placeholder 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DbRegister {
    pub payload: Vec<u32>,
    pub missing: Vec<bool>,
}

impl DbRegister {
    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }
}

/// The c-register query state, kept in tensor form.
///
/// Inputs are u-bit values embedded as the high bits of the plaintext,
/// `x ∥ 0^{n−u}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryDatabase {
    u: u32,
    n: u32,
    registers: Vec<DbRegister>,
    pairs: Vec<(u32, u32)>,
}

impl QueryDatabase {
    /// Builds a database from an explicit payload table and mask, without
    /// querying anything. Used for synthetic functions.
    pub fn from_table(u: u32, n_out: u32, c: usize, payload: Vec<u32>, missing: Vec<bool>) -> Result<Self> {
        if payload.len() != 1usize << u || missing.len() != payload.len() {
            return Err(Error::SizeMismatch(format!("payload of {} entries for u = {u}", payload.len())));
        }
        if c == 0 {
            return Err(invalid("c", "at least one register is needed"));
        }
        if let Some(v) = payload.iter().find(|&&v| (v as u64) >> n_out != 0) {
            return Err(Error::SizeMismatch(format!("payload {v} wider than {n_out} bits")));
        }
        let pairs = (0..payload.len())
            .filter(|&x| !missing[x])
            .map(|x| ((x as u32) << (n_out.saturating_sub(u)), payload[x]))
            .collect();
        Ok(Self { u, n: n_out, registers: vec![DbRegister { payload, missing }; c], pairs })
    }

    pub fn u(&self) -> u32 {
        self.u
    }

    pub fn n_out(&self) -> u32 {
        self.n
    }

    pub fn c(&self) -> usize {
        self.registers.len()
    }

    pub fn registers(&self) -> &[DbRegister] {
        &self.registers
    }

    pub fn register(&self, i: usize) -> &DbRegister {
        &self.registers[i]
    }

    /// The classical plaintext/ciphertext pairs behind the database.
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn embed(&self, x: u32) -> u32 {
        x << (self.n - self.u)
    }

    /// Missing fraction α of the first register (all registers share it).
    pub fn alpha(&self) -> f64 {
        self.registers[0].missing_count() as f64 / (1u64 << self.u) as f64
    }
}

/// Queries `x ∥ 0^{n−u}` for every u-bit x once; all c registers are
/// filled from that single classical pass.
pub fn build_database_cpa(instance: &Construction, u: u32, c: usize) -> Result<QueryDatabase> {
    let n = instance.block_bits();
    if u > n {
        return Err(invalid("u", format!("{u} exceeds block size {n}")));
    }
    if c == 0 {
        return Err(invalid("c", "at least one register is needed"));
    }
    let mut payload = Vec::with_capacity(1usize << u);
    let mut pairs = Vec::with_capacity(1usize << u);
    for x in 0..1u32 << u {
        let p = x << (n - u);
        let y = instance.encrypt(p)?;
        payload.push(y);
        pairs.push((p, y));
    }
    let missing = vec![false; payload.len()];
    Ok(QueryDatabase { u, n, registers: vec![DbRegister { payload, missing }; c], pairs })
}

/// Known-plaintext database over the full block (u = n). Unknown inputs
/// hold the placeholder 0.
pub fn build_database_kpa(instance: &Construction, known: &BTreeSet<u32>, c: usize) -> Result<QueryDatabase> {
    let n = instance.block_bits();
    if c == 0 {
        return Err(invalid("c", "at least one register is needed"));
    }
    if let Some(&x) = known.iter().find(|&&x| (x as u64) >> n != 0) {
        return Err(invalid("known_inputs", format!("{x} is not an {n}-bit block")));
    }
    let size = 1usize << n;
    let mut payload = vec![0u32; size];
    let mut missing = vec![true; size];
    let mut pairs = Vec::with_capacity(known.len());
    for &x in known {
        let y = instance.encrypt(x)?;
        payload[x as usize] = y;
        missing[x as usize] = false;
        pairs.push((x, y));
    }
    Ok(QueryDatabase { u: n, n, registers: vec![DbRegister { payload, missing }; c], pairs })
}

/// A uniformly random known set with exactly `round(α·2^n)` inputs left out.
pub fn random_known_set<R: Rng + ?Sized>(n: u32, alpha: f64, rng: &mut R) -> Result<BTreeSet<u32>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("{alpha} outside [0, 1]")));
    }
    let size = 1usize << n;
    let missing = (alpha * size as f64).round() as usize;
    let left_out: BTreeSet<u32> = sample(rng, size, missing).into_iter().map(|i| i as u32).collect();
    Ok((0..size as u32).filter(|x| !left_out.contains(x)).collect())
}

/// `⟨ψ|ψ′⟩ = ∏ᵢ (1 − αᵢ)`, with αᵢ the fraction of inputs whose payload
/// differs between the two registers. A placeholder equal to the true
/// payload is not a mismatch.
pub fn database_overlap(full: &QueryDatabase, partial: &QueryDatabase) -> Result<f64> {
    if full.u != partial.u || full.c() != partial.c() {
        return Err(Error::SizeMismatch(format!(
            "databases of shape (u={}, c={}) and (u={}, c={})",
            full.u,
            full.c(),
            partial.u,
            partial.c()
        )));
    }
    let size = (1u64 << full.u) as f64;
    Ok(full
        .registers
        .iter()
        .zip(&partial.registers)
        .map(|(a, b)| {
            let mismatches = a.payload.iter().zip(&b.payload).filter(|(x, y)| x != y).count();
            1.0 - mismatches as f64 / size
        })
        .product())
}

/// `(1 − √(2cα))²`, or 0 once `2cα > 1`.
pub fn fidelity_bound(c: usize, alpha: f64) -> Result<f64> {
    if alpha < 0.0 || alpha.is_nan() {
        return Err(invalid("alpha", format!("{alpha} is negative")));
    }
    let x = 2.0 * c as f64 * alpha;
    if x > 1.0 {
        return Ok(0.0);
    }
    Ok((1.0 - x.sqrt()).powi(2).clamp(0.0, 1.0))
}
