//! Ideal-model primitives and the keyed constructions built from them.
//!
//! Every primitive is a small explicit table so that the attacks and the
//! simulator can evaluate it exhaustively. Block and key sizes are capped at
//! 16 bits.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_BLOCK_BITS: u32 = 16;
pub const MAX_KEY_BITS: u32 = 16;

fn check_block_bits(n: u32) -> Result<()> {
    if (1..=MAX_BLOCK_BITS).contains(&n) {
        Ok(())
    } else {
        Err(invalid("n", format!("block size {n} outside 1..={MAX_BLOCK_BITS}")))
    }
}

fn check_key_bits(kappa: u32) -> Result<()> {
    if (1..=MAX_KEY_BITS).contains(&kappa) {
        Ok(())
    } else {
        Err(invalid("kappa", format!("key size {kappa} outside 1..={MAX_KEY_BITS}")))
    }
}

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A bijection on n-bit blocks stored as a forward and an inverse table.
#[derive(Clone, PartialEq, Eq)]
pub struct Permutation {
    n: u32,
    table: Vec<u16>,
    inverse: Vec<u16>,
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Permutation")
            .field("n", &self.n)
            .field("table", &self.table)
            .finish()
    }
}

impl Permutation {
    /// Uniformly random permutation drawn by a Fisher-Yates shuffle of the
    /// seeded stream. Deterministic in `(n, seed)`.
    pub fn random(n: u32, seed: u64) -> Result<Self> {
        check_block_bits(n)?;
        Ok(Self::shuffled(n, &mut seeded_stream(seed, 0)))
    }

    fn shuffled(n: u32, rng: &mut ChaCha8Rng) -> Self {
        let mut table: Vec<u16> = (0..1u32 << n).map(|v| v as u16).collect();
        table.shuffle(rng);
        Self::from_forward(n, table)
    }

    fn from_forward(n: u32, table: Vec<u16>) -> Self {
        let mut inverse = vec![0u16; table.len()];
        for (x, &y) in table.iter().enumerate() {
            inverse[y as usize] = x as u16;
        }
        Self { n, table, inverse }
    }

    pub fn identity(n: u32) -> Result<Self> {
        check_block_bits(n)?;
        Ok(Self::from_forward(n, (0..1u32 << n).map(|v| v as u16).collect()))
    }

    /// Builds a permutation from an explicit table, rejecting non-bijections.
    pub fn from_table(n: u32, table: &[u32]) -> Result<Self> {
        check_block_bits(n)?;
        let size = 1usize << n;
        if table.len() != size {
            return Err(invalid("table", format!("expected {size} entries, got {}", table.len())));
        }
        let mut seen = vec![false; size];
        for &y in table {
            let slot = seen
                .get_mut(y as usize)
                .ok_or_else(|| invalid("table", format!("entry {y} out of range")))?;
            if *slot {
                return Err(invalid("table", format!("entry {y} repeated")));
            }
            *slot = true;
        }
        Ok(Self::from_forward(n, table.iter().map(|&v| v as u16).collect()))
    }

    pub fn block_bits(&self) -> u32 {
        self.n
    }

    pub fn apply(&self, x: u32) -> u32 {
        self.table[x as usize] as u32
    }

    pub fn invert(&self, y: u32) -> u32 {
        self.inverse[y as usize] as u32
    }

    pub fn inverse(&self) -> Permutation {
        Permutation {
            n: self.n,
            table: self.inverse.clone(),
            inverse: self.table.clone(),
        }
    }

    pub fn table(&self) -> Vec<u32> {
        self.table.iter().map(|&v| v as u32).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.table.iter().enumerate().all(|(x, &y)| x == y as usize)
    }

    /// Debug dump: the forward table as little-endian 16-bit entries.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.table.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_le_bytes())?;
        Ok(())
    }

    pub fn from_le_bytes(n: u32, bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 2 != 0 {
            return Err(invalid("dump", "odd byte count"));
        }
        let table: Vec<u32> = bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect();
        Self::from_table(n, &table)
    }
}

/// A keyed family of permutations of n-bit blocks, queryable in both
/// directions.
pub trait BlockCipher: Send + Sync + fmt::Debug {
    fn block_bits(&self) -> u32;
    fn key_bits(&self) -> u32;
    fn encrypt(&self, key: u32, x: u32) -> u32;
    fn decrypt(&self, key: u32, y: u32) -> u32;
}

/// Seeded ideal cipher. The permutation of each key is drawn lazily from its
/// own ChaCha stream, so memory grows with the keys actually touched.
pub struct IdealCipher {
    n: u32,
    kappa: u32,
    seed: u64,
    cache: Vec<OnceLock<Permutation>>,
}

impl fmt::Debug for IdealCipher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdealCipher")
            .field("n", &self.n)
            .field("kappa", &self.kappa)
            .field("seed", &self.seed)
            .finish()
    }
}

impl IdealCipher {
    pub fn new(n: u32, kappa: u32, seed: u64) -> Result<Self> {
        check_block_bits(n)?;
        check_key_bits(kappa)?;
        Ok(Self {
            n,
            kappa,
            seed,
            cache: (0..1usize << kappa).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The permutation E_key, materialized on first use.
    pub fn permutation(&self, key: u32) -> &Permutation {
        self.cache[key as usize].get_or_init(|| {
            // stream 0 is reserved for standalone permutations
            Permutation::shuffled(self.n, &mut seeded_stream(self.seed, key as u64 + 1))
        })
    }

    pub fn materialized(&self) -> usize {
        self.cache.iter().filter(|c| c.get().is_some()).count()
    }
}

impl BlockCipher for IdealCipher {
    fn block_bits(&self) -> u32 {
        self.n
    }
    fn key_bits(&self) -> u32 {
        self.kappa
    }
    fn encrypt(&self, key: u32, x: u32) -> u32 {
        self.permutation(key).apply(x)
    }
    fn decrypt(&self, key: u32, y: u32) -> u32 {
        self.permutation(key).invert(y)
    }
}

/// E_k(x) = x for every key. Used to collapse constructions in tests.
#[derive(Debug, Clone)]
pub struct IdentityCipher {
    pub n: u32,
    pub kappa: u32,
}

impl BlockCipher for IdentityCipher {
    fn block_bits(&self) -> u32 {
        self.n
    }
    fn key_bits(&self) -> u32 {
        self.kappa
    }
    fn encrypt(&self, _key: u32, x: u32) -> u32 {
        x
    }
    fn decrypt(&self, _key: u32, y: u32) -> u32 {
        y
    }
}

/// A public permutation viewed as a cipher with an empty key.
#[derive(Debug, Clone)]
pub struct PublicPermutation(pub Arc<Permutation>);

impl BlockCipher for PublicPermutation {
    fn block_bits(&self) -> u32 {
        self.0.block_bits()
    }
    fn key_bits(&self) -> u32 {
        0
    }
    fn encrypt(&self, _key: u32, x: u32) -> u32 {
        self.0.apply(x)
    }
    fn decrypt(&self, _key: u32, y: u32) -> u32 {
        self.0.invert(y)
    }
}

/// `E_{π(k)}`: the base cipher under a derived key.
#[derive(Debug, Clone)]
pub struct RelatedKeyCipher {
    pub base: Arc<dyn BlockCipher>,
    pub derivation: KeyDerivation,
}

impl BlockCipher for RelatedKeyCipher {
    fn block_bits(&self) -> u32 {
        self.base.block_bits()
    }
    fn key_bits(&self) -> u32 {
        self.base.key_bits()
    }
    fn encrypt(&self, key: u32, x: u32) -> u32 {
        self.base.encrypt(self.derivation.derive(key), x)
    }
    fn decrypt(&self, key: u32, y: u32) -> u32 {
        self.base.decrypt(self.derivation.derive(key), y)
    }
}

/// `second_k ∘ first_k` under one shared key.
#[derive(Debug, Clone)]
pub struct CascadeCipher {
    pub first: Arc<dyn BlockCipher>,
    pub second: Arc<dyn BlockCipher>,
}

impl BlockCipher for CascadeCipher {
    fn block_bits(&self) -> u32 {
        self.first.block_bits()
    }
    fn key_bits(&self) -> u32 {
        self.first.key_bits()
    }
    fn encrypt(&self, key: u32, x: u32) -> u32 {
        self.second.encrypt(key, self.first.encrypt(key, x))
    }
    fn decrypt(&self, key: u32, y: u32) -> u32 {
        self.first.decrypt(key, self.second.decrypt(key, y))
    }
}

/// A run of public permutations keyed by XORing the same n-bit key between
/// them: optionally before the first and after the last one.
#[derive(Debug, Clone)]
pub struct EmChainCipher {
    pub perms: Vec<Arc<Permutation>>,
    pub key_before: bool,
    pub key_after: bool,
}

impl BlockCipher for EmChainCipher {
    fn block_bits(&self) -> u32 {
        self.perms[0].block_bits()
    }
    fn key_bits(&self) -> u32 {
        self.perms[0].block_bits()
    }
    fn encrypt(&self, key: u32, x: u32) -> u32 {
        let mut v = if self.key_before { x ^ key } else { x };
        let last = self.perms.len() - 1;
        for (i, p) in self.perms.iter().enumerate() {
            v = p.apply(v);
            if i < last || self.key_after {
                v ^= key;
            }
        }
        v
    }
    fn decrypt(&self, key: u32, y: u32) -> u32 {
        let mut v = y;
        let last = self.perms.len() - 1;
        for (i, p) in self.perms.iter().enumerate().rev() {
            if i < last || self.key_after {
                v ^= key;
            }
            v = p.invert(v);
        }
        if self.key_before {
            v ^= key
        }
        v
    }
}

/// Fixpoint-free map on κ-bit keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyDerivation {
    /// k ↦ k ⊕ c with c ≠ 0.
    Xor(u32),
    Table(Arc<Permutation>),
}

impl Default for KeyDerivation {
    fn default() -> Self {
        KeyDerivation::Xor(1)
    }
}

impl KeyDerivation {
    pub fn xor(constant: u32) -> Result<Self> {
        if constant == 0 {
            return Err(invalid("derivation", "xor with 0 has fixpoints"));
        }
        Ok(KeyDerivation::Xor(constant))
    }

    pub fn table(p: Permutation) -> Result<Self> {
        if let Some(k) = (0..1u32 << p.block_bits()).find(|&k| p.apply(k) == k) {
            return Err(invalid("derivation", format!("fixpoint at {k}")));
        }
        Ok(KeyDerivation::Table(Arc::new(p)))
    }

    pub fn derive(&self, k: u32) -> u32 {
        match self {
            KeyDerivation::Xor(c) => k ^ c,
            KeyDerivation::Table(p) => p.apply(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConstructionKind {
    Em,
    Fx,
    Efx,
    TwoXor,
    Defx,
    IteratedEm,
    Ecbc3,
}

impl ConstructionKind {
    pub const ALL: [ConstructionKind; 7] = [
        ConstructionKind::Em,
        ConstructionKind::Fx,
        ConstructionKind::Efx,
        ConstructionKind::TwoXor,
        ConstructionKind::Defx,
        ConstructionKind::IteratedEm,
        ConstructionKind::Ecbc3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstructionKind::Em => "EM",
            ConstructionKind::Fx => "FX",
            ConstructionKind::Efx => "EFX",
            ConstructionKind::TwoXor => "TWO_XOR",
            ConstructionKind::Defx => "DEFX",
            ConstructionKind::IteratedEm => "ITERATED_EM",
            ConstructionKind::Ecbc3 => "ECBC3",
        }
    }
}

impl fmt::Display for ConstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstructionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', ' '], "_");
        let alias = match norm.as_str() {
            "2XOR" => "TWO_XOR",
            "ECBC" | "ECBC_MAC" => "ECBC3",
            other => other,
        };
        ConstructionKind::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| invalid("construction", format!("unknown kind `{s}`")))
    }
}

/// Secret key material. Which fields are read depends on the kind:
/// EM uses (k1, k2); FX, EFX and DEFX use (k, k1, k2); TWO_XOR uses (k, z = k1);
/// ITERATED_EM uses `round_keys` indexed by `schedule`; ECBC3 uses (k, m1, m2).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    #[serde(default)]
    pub k: u32,
    #[serde(default)]
    pub k1: u32,
    #[serde(default)]
    pub k2: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub round_keys: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<usize>,
    #[serde(default)]
    pub m1: u32,
    #[serde(default)]
    pub m2: u32,
}

impl KeyMaterial {
    pub fn whitened(k: u32, k1: u32, k2: u32) -> Self {
        Self {
            k,
            k1,
            k2,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub enum Component {
    Cipher(Arc<dyn BlockCipher>),
    Permutation(Arc<Permutation>),
    Derivation(KeyDerivation),
}

impl Component {
    pub fn cipher<C: BlockCipher + 'static>(c: C) -> Self {
        Component::Cipher(Arc::new(c))
    }
    pub fn permutation(p: Permutation) -> Self {
        Component::Permutation(Arc::new(p))
    }
}

#[derive(Debug, Clone)]
enum Layers {
    Em { perm: Arc<Permutation> },
    Fx { cipher: Arc<dyn BlockCipher> },
    Efx { inner: Arc<dyn BlockCipher>, outer: Arc<dyn BlockCipher> },
    TwoXor { cipher: Arc<dyn BlockCipher>, derivation: KeyDerivation },
    Defx { first: Arc<dyn BlockCipher>, second: Arc<dyn BlockCipher>, third: Arc<dyn BlockCipher> },
    IteratedEm { perms: Vec<Arc<Permutation>> },
    Ecbc3 { cipher: Arc<dyn BlockCipher>, derivation: KeyDerivation },
}

/// The EFX skeleton `outer_k(k2 ⊕ inner_k(k1 ⊕ pre_k(x)))` that the
/// offline-Simon attacks work on. Missing layers are the identity.
#[derive(Debug, Clone)]
pub struct EfxShape {
    pub n: u32,
    /// Bits of the inner key k (0 for Even-Mansour).
    pub kappa: u32,
    pub pre: Option<Arc<dyn BlockCipher>>,
    pub inner: Arc<dyn BlockCipher>,
    pub outer: Option<Arc<dyn BlockCipher>>,
}

impl EfxShape {
    pub fn evaluate(&self, k: u32, k1: u32, k2: u32, x: u32) -> u32 {
        let x = self.pre.as_ref().map_or(x, |p| p.encrypt(k, x));
        let mid = self.inner.encrypt(k, k1 ^ x) ^ k2;
        self.outer.as_ref().map_or(mid, |o| o.encrypt(k, mid))
    }

    /// Number of cipher evaluations one `evaluate` call costs.
    pub fn layers(&self) -> u64 {
        1 + self.pre.is_some() as u64 + self.outer.is_some() as u64
    }
}

/// A keyed construction with online query counters.
#[derive(Debug)]
pub struct Construction {
    kind: ConstructionKind,
    n: u32,
    kappa: u32,
    layers: Layers,
    keys: KeyMaterial,
    forward: AtomicU64,
    backward: AtomicU64,
    quantum: AtomicU64,
}

impl Clone for Construction {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            n: self.n,
            kappa: self.kappa,
            layers: self.layers.clone(),
            keys: self.keys.clone(),
            forward: AtomicU64::new(self.online_forward()),
            backward: AtomicU64::new(self.online_backward()),
            quantum: AtomicU64::new(self.quantum_queries()),
        }
    }
}

fn components_error(kind: ConstructionKind, reason: impl Into<String>) -> Error {
    Error::Components {
        kind: kind.to_string(),
        reason: reason.into(),
    }
}

impl Construction {
    pub fn new(kind: ConstructionKind, components: Vec<Component>, keys: KeyMaterial) -> Result<Self> {
        let mut ciphers = Vec::new();
        let mut perms = Vec::new();
        let mut derivations = Vec::new();
        for c in components {
            match c {
                Component::Cipher(c) => ciphers.push(c),
                Component::Permutation(p) => perms.push(p),
                Component::Derivation(d) => derivations.push(d),
            }
        }
        let expect = |c: usize, p: usize, d: usize| -> Result<()> {
            if ciphers.len() == c && perms.len() == p && derivations.len() == d {
                Ok(())
            } else {
                Err(components_error(
                    kind,
                    format!(
                        "expected {c} cipher(s), {p} permutation(s), {d} key derivation(s); got {}, {}, {}",
                        ciphers.len(),
                        perms.len(),
                        derivations.len()
                    ),
                ))
            }
        };
        let layers = match kind {
            ConstructionKind::Em => {
                expect(0, 1, 0)?;
                Layers::Em { perm: perms.remove(0) }
            }
            ConstructionKind::Fx => {
                expect(1, 0, 0)?;
                Layers::Fx { cipher: ciphers.remove(0) }
            }
            ConstructionKind::Efx => {
                expect(2, 0, 0)?;
                let outer = ciphers.pop().unwrap();
                Layers::Efx { inner: ciphers.remove(0), outer }
            }
            ConstructionKind::TwoXor => {
                expect(1, 0, 1)?;
                Layers::TwoXor { cipher: ciphers.remove(0), derivation: derivations.remove(0) }
            }
            ConstructionKind::Defx => {
                expect(3, 0, 0)?;
                let third = ciphers.pop().unwrap();
                let second = ciphers.pop().unwrap();
                Layers::Defx { first: ciphers.remove(0), second, third }
            }
            ConstructionKind::IteratedEm => {
                if perms.is_empty() || !ciphers.is_empty() || !derivations.is_empty() {
                    return Err(components_error(kind, "expected r >= 1 permutations only"));
                }
                if keys.schedule.len() != perms.len() + 1 {
                    return Err(components_error(
                        kind,
                        format!("schedule needs {} entries for {} rounds", perms.len() + 1, perms.len()),
                    ));
                }
                if let Some(&bad) = keys.schedule.iter().find(|&&i| i >= keys.round_keys.len()) {
                    return Err(components_error(
                        kind,
                        format!("schedule index {bad} out of bounds for {} round keys", keys.round_keys.len()),
                    ));
                }
                Layers::IteratedEm { perms }
            }
            ConstructionKind::Ecbc3 => {
                expect(1, 0, 1)?;
                Layers::Ecbc3 { cipher: ciphers.remove(0), derivation: derivations.remove(0) }
            }
        };

        let (n, kappa) = layers.sizes();
        check_block_bits(n)?;
        if !layers.consistent(n, kappa) {
            return Err(components_error(kind, "components disagree on block or key size"));
        }
        let block_max = 1u64 << n;
        let key_max = 1u64 << kappa;
        let check = |name: &'static str, v: u32, max: u64| -> Result<()> {
            if (v as u64) < max {
                Ok(())
            } else {
                Err(invalid(name, format!("{v} does not fit in {} bits", max.trailing_zeros())))
            }
        };
        check("k", keys.k, key_max)?;
        for (name, v) in [("k1", keys.k1), ("k2", keys.k2), ("m1", keys.m1), ("m2", keys.m2)] {
            check(name, v, block_max)?;
        }
        for &rk in &keys.round_keys {
            check("round_keys", rk, block_max)?;
        }

        Ok(Self {
            kind,
            n,
            kappa,
            layers,
            keys,
            forward: AtomicU64::new(0),
            backward: AtomicU64::new(0),
            quantum: AtomicU64::new(0),
        })
    }

    pub fn even_mansour(perm: Permutation, k1: u32, k2: u32) -> Result<Self> {
        Self::new(ConstructionKind::Em, vec![Component::permutation(perm)], KeyMaterial::whitened(0, k1, k2))
    }

    pub fn fx(cipher: Arc<dyn BlockCipher>, keys: KeyMaterial) -> Result<Self> {
        Self::new(ConstructionKind::Fx, vec![Component::Cipher(cipher)], keys)
    }

    pub fn efx(inner: Arc<dyn BlockCipher>, outer: Arc<dyn BlockCipher>, keys: KeyMaterial) -> Result<Self> {
        Self::new(ConstructionKind::Efx, vec![Component::Cipher(inner), Component::Cipher(outer)], keys)
    }

    pub fn two_xor(cipher: Arc<dyn BlockCipher>, derivation: KeyDerivation, k: u32, z: u32) -> Result<Self> {
        Self::new(
            ConstructionKind::TwoXor,
            vec![Component::Cipher(cipher), Component::Derivation(derivation)],
            KeyMaterial::whitened(k, z, z),
        )
    }

    pub fn defx(
        first: Arc<dyn BlockCipher>,
        second: Arc<dyn BlockCipher>,
        third: Arc<dyn BlockCipher>,
        keys: KeyMaterial,
    ) -> Result<Self> {
        Self::new(
            ConstructionKind::Defx,
            vec![Component::Cipher(first), Component::Cipher(second), Component::Cipher(third)],
            keys,
        )
    }

    pub fn ecbc3(cipher: Arc<dyn BlockCipher>, derivation: KeyDerivation, k: u32, m1: u32, m2: u32) -> Result<Self> {
        Self::new(
            ConstructionKind::Ecbc3,
            vec![Component::Cipher(cipher), Component::Derivation(derivation)],
            KeyMaterial {
                k,
                m1,
                m2,
                ..Default::default()
            },
        )
    }

    pub fn iterated_em(perms: Vec<Permutation>, round_keys: Vec<u32>, schedule: Vec<usize>) -> Result<Self> {
        Self::new(
            ConstructionKind::IteratedEm,
            perms.into_iter().map(Component::permutation).collect(),
            KeyMaterial {
                round_keys,
                schedule,
                ..Default::default()
            },
        )
    }

    pub fn kind(&self) -> ConstructionKind {
        self.kind
    }

    pub fn block_bits(&self) -> u32 {
        self.n
    }

    /// Bits of the cipher key k; 0 for the permutation-based kinds.
    pub fn key_bits(&self) -> u32 {
        self.kappa
    }

    pub fn keys(&self) -> &KeyMaterial {
        &self.keys
    }

    pub fn online_forward(&self) -> u64 {
        self.forward.load(Ordering::Relaxed)
    }

    pub fn online_backward(&self) -> u64 {
        self.backward.load(Ordering::Relaxed)
    }

    pub fn quantum_queries(&self) -> u64 {
        self.quantum.load(Ordering::Relaxed)
    }

    /// Charges `count` superposition queries. The simulator computes the
    /// corresponding tables through [`Construction::evaluate_with`].
    pub fn record_quantum_queries(&self, count: u64) {
        self.quantum.fetch_add(count, Ordering::Relaxed);
    }

    pub fn reset_counters(&self) {
        self.forward.store(0, Ordering::Relaxed);
        self.backward.store(0, Ordering::Relaxed);
        self.quantum.store(0, Ordering::Relaxed);
    }

    /// Cipher or permutation evaluations per block.
    pub fn layer_count(&self) -> u64 {
        match &self.layers {
            Layers::Em { .. } | Layers::Fx { .. } => 1,
            Layers::Efx { .. } | Layers::TwoXor { .. } => 2,
            Layers::Defx { .. } => 3,
            Layers::IteratedEm { perms } => perms.len() as u64,
            Layers::Ecbc3 { .. } => 4,
        }
    }

    fn check_block(&self, v: u32) -> Result<()> {
        if (v as u64) < (1u64 << self.n) {
            Ok(())
        } else {
            Err(invalid("x", format!("{v} is not an {}-bit block", self.n)))
        }
    }

    /// One online chosen-plaintext query.
    pub fn encrypt(&self, x: u32) -> Result<u32> {
        self.check_block(x)?;
        self.forward.fetch_add(1, Ordering::Relaxed);
        Ok(self.evaluate_with(&self.keys, x))
    }

    /// One online chosen-ciphertext query. ECBC3 is forward-only.
    pub fn decrypt(&self, y: u32) -> Result<u32> {
        self.check_block(y)?;
        let x = self.invert_with(&self.keys, y)?;
        self.backward.fetch_add(1, Ordering::Relaxed);
        Ok(x)
    }

    /// Evaluates the construction under arbitrary key material without
    /// touching the online counters (offline computation).
    pub fn evaluate_with(&self, keys: &KeyMaterial, x: u32) -> u32 {
        match &self.layers {
            Layers::Em { perm } => perm.apply(x ^ keys.k1) ^ keys.k2,
            Layers::Fx { cipher } => cipher.encrypt(keys.k, x ^ keys.k1) ^ keys.k2,
            Layers::Efx { inner, outer } => outer.encrypt(keys.k, keys.k2 ^ inner.encrypt(keys.k, keys.k1 ^ x)),
            Layers::TwoXor { cipher, derivation } => {
                let z = keys.k1;
                cipher.encrypt(derivation.derive(keys.k), cipher.encrypt(keys.k, x ^ z) ^ z)
            }
            Layers::Defx { first, second, third } => {
                third.encrypt(keys.k, keys.k2 ^ second.encrypt(keys.k, keys.k1 ^ first.encrypt(keys.k, x)))
            }
            Layers::IteratedEm { perms } => {
                let mut v = x ^ keys.round_keys[keys.schedule[0]];
                for (i, p) in perms.iter().enumerate() {
                    v = p.apply(v) ^ keys.round_keys[keys.schedule[i + 1]];
                }
                v
            }
            Layers::Ecbc3 { cipher, derivation } => {
                let k = keys.k;
                let cbc = cipher.encrypt(k, keys.m2 ^ cipher.encrypt(k, keys.m1 ^ cipher.encrypt(k, x)));
                cipher.encrypt(derivation.derive(k), cbc)
            }
        }
    }

    pub fn invert_with(&self, keys: &KeyMaterial, y: u32) -> Result<u32> {
        Ok(match &self.layers {
            Layers::Em { perm } => perm.invert(y ^ keys.k2) ^ keys.k1,
            Layers::Fx { cipher } => cipher.decrypt(keys.k, y ^ keys.k2) ^ keys.k1,
            Layers::Efx { inner, outer } => inner.decrypt(keys.k, outer.decrypt(keys.k, y) ^ keys.k2) ^ keys.k1,
            Layers::TwoXor { cipher, derivation } => {
                let z = keys.k1;
                cipher.decrypt(keys.k, cipher.decrypt(derivation.derive(keys.k), y) ^ z) ^ z
            }
            Layers::Defx { first, second, third } => first.decrypt(
                keys.k,
                second.decrypt(keys.k, third.decrypt(keys.k, y) ^ keys.k2) ^ keys.k1,
            ),
            Layers::IteratedEm { perms } => {
                let r = perms.len();
                let mut v = y ^ keys.round_keys[keys.schedule[r]];
                for (i, p) in perms.iter().enumerate().rev() {
                    v = p.invert(v) ^ keys.round_keys[keys.schedule[i]];
                }
                v
            }
            Layers::Ecbc3 { .. } => {
                return Err(Error::Unsupported("ECBC3 is a MAC and has no inverse".into()));
            }
        })
    }

    /// The EFX view of this construction used by the offline-Simon attacks,
    /// together with the true (k, k1, k2) in that view.
    ///
    /// ITERATED_EM is supported for schedules of the form a,a,b,a,b,a, which
    /// decompose as DEFX with k = K_a and k1 = k2 = K_b.
    pub fn efx_shape(&self) -> Option<(EfxShape, (u32, u32, u32))> {
        let keys = &self.keys;
        let (shape, view) = match &self.layers {
            Layers::Em { perm } => (
                EfxShape {
                    n: self.n,
                    kappa: 0,
                    pre: None,
                    inner: Arc::new(PublicPermutation(perm.clone())),
                    outer: None,
                },
                (0, keys.k1, keys.k2),
            ),
            Layers::Fx { cipher } => (
                EfxShape { n: self.n, kappa: self.kappa, pre: None, inner: cipher.clone(), outer: None },
                (keys.k, keys.k1, keys.k2),
            ),
            Layers::Efx { inner, outer } => (
                EfxShape {
                    n: self.n,
                    kappa: self.kappa,
                    pre: None,
                    inner: inner.clone(),
                    outer: Some(outer.clone()),
                },
                (keys.k, keys.k1, keys.k2),
            ),
            Layers::TwoXor { cipher, derivation } => (
                EfxShape {
                    n: self.n,
                    kappa: self.kappa,
                    pre: None,
                    inner: cipher.clone(),
                    outer: Some(Arc::new(RelatedKeyCipher { base: cipher.clone(), derivation: derivation.clone() })),
                },
                (keys.k, keys.k1, keys.k1),
            ),
            Layers::Defx { first, second, third } => (
                EfxShape {
                    n: self.n,
                    kappa: self.kappa,
                    pre: Some(first.clone()),
                    inner: second.clone(),
                    outer: Some(third.clone()),
                },
                (keys.k, keys.k1, keys.k2),
            ),
            Layers::Ecbc3 { cipher, derivation } => (
                EfxShape {
                    n: self.n,
                    kappa: self.kappa,
                    pre: Some(cipher.clone()),
                    inner: cipher.clone(),
                    // E_{k'} ∘ E_k seen as one cipher keyed by k
                    outer: Some(Arc::new(CascadeCipher {
                        first: cipher.clone(),
                        second: Arc::new(RelatedKeyCipher { base: cipher.clone(), derivation: derivation.clone() }),
                    })),
                },
                (keys.k, keys.m1, keys.m2),
            ),
            Layers::IteratedEm { perms } => {
                let s = &keys.schedule;
                if perms.len() != 5 {
                    return None;
                }
                let (a, b) = (s[0], s[2]);
                if a == b || s != &[a, a, b, a, b, a] {
                    return None;
                }
                let chain = |ps: &[Arc<Permutation>], before: bool, after: bool| -> Arc<dyn BlockCipher> {
                    Arc::new(EmChainCipher { perms: ps.to_vec(), key_before: before, key_after: after })
                };
                (
                    EfxShape {
                        n: self.n,
                        kappa: self.n,
                        pre: Some(chain(&perms[0..2], true, false)),
                        inner: chain(&perms[2..4], false, false),
                        outer: Some(chain(&perms[4..5], false, true)),
                    },
                    (keys.round_keys[a], keys.round_keys[b], keys.round_keys[b]),
                )
            }
        };
        Some((shape, view))
    }
}

impl Layers {
    fn sizes(&self) -> (u32, u32) {
        match self {
            Layers::Em { perm } => (perm.block_bits(), 0),
            Layers::IteratedEm { perms } => (perms[0].block_bits(), 0),
            Layers::Fx { cipher } | Layers::TwoXor { cipher, .. } | Layers::Ecbc3 { cipher, .. } => {
                (cipher.block_bits(), cipher.key_bits())
            }
            Layers::Efx { inner, .. } => (inner.block_bits(), inner.key_bits()),
            Layers::Defx { first, .. } => (first.block_bits(), first.key_bits()),
        }
    }

    fn consistent(&self, n: u32, kappa: u32) -> bool {
        let same = |c: &Arc<dyn BlockCipher>| c.block_bits() == n && c.key_bits() == kappa;
        match self {
            Layers::Em { .. } | Layers::Fx { .. } => true,
            Layers::IteratedEm { perms } => perms.iter().all(|p| p.block_bits() == n),
            Layers::TwoXor { derivation, .. } | Layers::Ecbc3 { derivation, .. } => match derivation {
                KeyDerivation::Xor(c) => (*c as u64) < (1u64 << kappa),
                KeyDerivation::Table(p) => p.block_bits() == kappa,
            },
            Layers::Efx { inner, outer } => same(inner) && same(outer),
            Layers::Defx { first, second, third } => same(first) && same(second) && same(third),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(n: u32, kappa: u32, seed: u64) -> Arc<dyn BlockCipher> {
        Arc::new(IdealCipher::new(n, kappa, seed).unwrap())
    }

    #[test]
    fn one_bit_permutations() {
        for seed in 0..20 {
            let t = Permutation::random(1, seed).unwrap().table();
            assert!(t == vec![0, 1] || t == vec![1, 0]);
        }
    }

    #[test]
    fn permutation_is_deterministic_and_bijective() {
        let a = Permutation::random(3, 99).unwrap();
        let b = Permutation::random(3, 99).unwrap();
        assert_eq!(a, b);
        for x in 0..8 {
            assert_eq!(a.invert(a.apply(x)), x);
        }
        assert!(Permutation::random(0, 1).is_err());
        assert!(Permutation::random(17, 1).is_err());
    }

    #[test]
    fn permutation_rejects_non_bijection() {
        assert!(Permutation::from_table(2, &[0, 1, 1, 3]).is_err());
        assert!(Permutation::from_table(2, &[0, 1, 2]).is_err());
        assert!(Permutation::from_table(2, &[0, 1, 2, 4]).is_err());
        assert!(Permutation::from_table(2, &[3, 1, 2, 0]).is_ok());
    }

    #[test]
    fn dump_roundtrip() {
        let p = Permutation::random(5, 7).unwrap();
        let bytes = p.to_le_bytes();
        assert_eq!(bytes.len(), 64);
        assert_eq!(u16::from_le_bytes([bytes[2], bytes[3]]) as u32, p.apply(1));
        assert_eq!(Permutation::from_le_bytes(5, &bytes).unwrap(), p);
    }

    #[test]
    fn ideal_cipher_is_lazy_and_deterministic() {
        let e = IdealCipher::new(4, 4, 11).unwrap();
        assert_eq!(e.materialized(), 0);
        let first = e.permutation(5).clone();
        assert_eq!(e.materialized(), 1);
        let again = IdealCipher::new(4, 4, 11).unwrap();
        assert_eq!(again.permutation(5), &first);
        for k in 0..16 {
            for x in 0..16 {
                assert_eq!(e.decrypt(k, e.encrypt(k, x)), x);
            }
        }
        assert!(IdealCipher::new(4, 0, 1).is_err());
        assert!(IdealCipher::new(4, 17, 1).is_err());
    }

    #[test]
    fn distinct_keys_give_distinct_permutations() {
        // two independent 4-bit permutations coincide with probability 1/16!
        let equal = (0..200u64)
            .filter(|&s| {
                let e = IdealCipher::new(4, 4, s).unwrap();
                e.permutation(0) == e.permutation(1)
            })
            .count();
        assert_eq!(equal, 0);
    }

    #[test]
    fn default_derivation() {
        let d = KeyDerivation::default();
        assert_eq!(d.derive(0), 1);
        assert_eq!(d.derive(255), 254);
        assert!((0..256).all(|k| d.derive(k) != k));
        assert!(KeyDerivation::xor(0).is_err());
        assert!(KeyDerivation::table(Permutation::identity(3).unwrap()).is_err());
        let shift = Permutation::from_table(2, &[1, 2, 3, 0]).unwrap();
        assert!(KeyDerivation::table(shift).is_ok());
    }

    #[test]
    fn identity_stubs_collapse_formulas() {
        let id: Arc<dyn BlockCipher> = Arc::new(IdentityCipher { n: 4, kappa: 4 });
        let efx = Construction::efx(id.clone(), id.clone(), KeyMaterial::whitened(3, 0b1010, 0b0110)).unwrap();
        for x in 0..16 {
            assert_eq!(efx.encrypt(x).unwrap(), x ^ 0b1010 ^ 0b0110);
        }
        let mac = Construction::ecbc3(id.clone(), KeyDerivation::default(), 2, 0, 0).unwrap();
        for x in 0..16 {
            assert_eq!(mac.encrypt(x).unwrap(), x);
        }
        let em = Construction::even_mansour(Permutation::identity(4).unwrap(), 0, 0).unwrap();
        assert!((0..16).all(|x| em.encrypt(x).unwrap() == x));
    }

    #[test]
    fn ecbc3_is_forward_only() {
        let mac = Construction::ecbc3(ideal(4, 4, 1), KeyDerivation::default(), 2, 5, 9).unwrap();
        assert!(matches!(mac.decrypt(0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn wrong_component_counts_are_rejected() {
        let e = ideal(4, 4, 1);
        let r = Construction::new(ConstructionKind::Efx, vec![Component::Cipher(e.clone())], KeyMaterial::default());
        assert!(matches!(r, Err(Error::Components { .. })));
        let r = Construction::new(
            ConstructionKind::Defx,
            vec![Component::Cipher(e.clone()), Component::Cipher(e.clone())],
            KeyMaterial::default(),
        );
        assert!(r.is_err());
        let perms = vec![Permutation::random(4, 1).unwrap(), Permutation::random(4, 2).unwrap()];
        assert!(Construction::iterated_em(perms.clone(), vec![1, 2], vec![0, 1, 2]).is_err());
        assert!(Construction::iterated_em(perms.clone(), vec![1, 2], vec![0, 1]).is_err());
        assert!(Construction::iterated_em(perms, vec![1, 2], vec![0, 1, 0]).is_ok());
    }

    #[test]
    fn key_ranges_are_checked() {
        assert!(Construction::efx(ideal(4, 4, 1), ideal(4, 4, 2), KeyMaterial::whitened(16, 0, 0)).is_err());
        assert!(Construction::efx(ideal(4, 4, 1), ideal(4, 4, 2), KeyMaterial::whitened(0, 16, 0)).is_err());
        assert!(Construction::efx(ideal(4, 4, 1), ideal(3, 4, 2), KeyMaterial::default()).is_err());
    }

    #[test]
    fn efx_matches_table_composition() {
        let e1 = IdealCipher::new(3, 3, 21).unwrap();
        let e2 = IdealCipher::new(3, 3, 22).unwrap();
        let (k, k1, k2) = (5, 0b011, 0b110);
        let t1 = e1.permutation(k).table();
        let t2 = e2.permutation(k).table();
        let efx = Construction::efx(Arc::new(e1), Arc::new(e2), KeyMaterial::whitened(k, k1, k2)).unwrap();
        for x in 0..8u32 {
            let expected = t2[(k2 ^ t1[(k1 ^ x) as usize]) as usize];
            assert_eq!(efx.encrypt(x).unwrap(), expected);
        }
        assert_eq!(efx.online_forward(), 8);
    }

    #[test]
    fn em_decrypt_matches_table_inversion() {
        let p = Permutation::random(4, 3).unwrap();
        let t = p.table();
        let em = Construction::even_mansour(p, 0b1001, 0b0111).unwrap();
        for y in 0..16u32 {
            let pre = t.iter().position(|&v| v == y ^ 0b0111).unwrap() as u32;
            assert_eq!(em.decrypt(y).unwrap(), pre ^ 0b1001);
        }
        assert_eq!(em.online_backward(), 16);
    }

    #[test]
    fn two_xor_is_an_efx_instance() {
        let e = ideal(4, 4, 5);
        let d = KeyDerivation::default();
        for k in 0..16 {
            for z in 0..16 {
                let two = Construction::two_xor(e.clone(), d.clone(), k, z).unwrap();
                let outer: Arc<dyn BlockCipher> = Arc::new(RelatedKeyCipher { base: e.clone(), derivation: d.clone() });
                let efx = Construction::efx(e.clone(), outer, KeyMaterial::whitened(k, z, z)).unwrap();
                for x in 0..16 {
                    assert_eq!(two.encrypt(x).unwrap(), efx.encrypt(x).unwrap());
                }
            }
        }
    }

    #[test]
    fn defx_is_efx_after_first_layer() {
        let (e1, e2, e3) = (ideal(4, 4, 1), ideal(4, 4, 2), ideal(4, 4, 3));
        let keys = KeyMaterial::whitened(9, 4, 13);
        let defx = Construction::defx(e1.clone(), e2.clone(), e3.clone(), keys.clone()).unwrap();
        let efx = Construction::efx(e2, e3, keys).unwrap();
        for x in 0..16 {
            assert_eq!(defx.encrypt(x).unwrap(), efx.encrypt(e1.encrypt(9, x)).unwrap());
        }
    }

    #[test]
    fn iterated_em_schedule_decomposes_as_defx() {
        let perms: Vec<Permutation> = (0..5).map(|i| Permutation::random(4, 40 + i).unwrap()).collect();
        let c = Construction::iterated_em(perms, vec![0b1011, 0b0110], vec![0, 0, 1, 0, 1, 0]).unwrap();
        let (shape, (k, k1, k2)) = c.efx_shape().unwrap();
        assert_eq!((k, k1, k2), (0b1011, 0b0110, 0b0110));
        for x in 0..16 {
            assert_eq!(shape.evaluate(k, k1, k2, x), c.encrypt(x).unwrap());
            assert_eq!(c.decrypt(c.encrypt(x).unwrap()).unwrap(), x);
        }
        let other = Construction::iterated_em(
            (0..3).map(|i| Permutation::random(4, i).unwrap()).collect(),
            vec![1, 2],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        assert!(other.efx_shape().is_none());
    }

    #[test]
    fn shapes_reproduce_every_kind() {
        let e = ideal(4, 4, 8);
        let p = Permutation::random(4, 8).unwrap();
        let d = KeyDerivation::default();
        let all = vec![
            Construction::even_mansour(p, 3, 12).unwrap(),
            Construction::fx(e.clone(), KeyMaterial::whitened(2, 7, 9)).unwrap(),
            Construction::efx(e.clone(), ideal(4, 4, 9), KeyMaterial::whitened(2, 7, 9)).unwrap(),
            Construction::two_xor(e.clone(), d.clone(), 6, 11).unwrap(),
            Construction::defx(e.clone(), ideal(4, 4, 9), ideal(4, 4, 10), KeyMaterial::whitened(1, 2, 3)).unwrap(),
            Construction::ecbc3(e.clone(), d, 14, 5, 10).unwrap(),
        ];
        for c in &all {
            let (shape, (k, k1, k2)) = c.efx_shape().unwrap();
            for x in 0..16 {
                assert_eq!(shape.evaluate(k, k1, k2, x), c.evaluate_with(c.keys(), x), "{}", c.kind());
            }
        }
    }

    #[test]
    fn kind_names_parse() {
        for kind in ConstructionKind::ALL {
            assert_eq!(kind.name().parse::<ConstructionKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert_eq!("2xor".parse::<ConstructionKind>().unwrap(), ConstructionKind::TwoXor);
        assert!("3XOR".parse::<ConstructionKind>().is_err());
    }
}
