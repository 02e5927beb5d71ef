use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::ciphers::EfxShape;
use crate::error::{invalid, Error, Result};
use crate::gf2::{self, Basis};

use super::database::{DbRegister, QueryDatabase};

/// A key-indexed family of in-place maps turning the database function f
/// into `g_y`, periodic only for the right y.
///
/// For a register `Σ_x |x⟩|w⟩` the maps act as
/// `|x⟩|w⟩ ↦ |x'⟩|xor_value(y, x') ⊕ map_payload(y, w)⟩` with
/// `x' = relabel(y, x)`.
pub trait GuessFamily: Send + Sync {
    fn u(&self) -> u32;
    fn out_bits(&self) -> u32;
    fn guess_bits(&self) -> u32;
    /// Cipher evaluations one application of the maps costs per register.
    fn evals_per_register(&self) -> u64;

    fn relabel(&self, _guess: u64, x: u32) -> u32 {
        x
    }
    fn map_payload(&self, guess: u64, w: u32) -> u32;
    fn xor_value(&self, guess: u64, x: u32) -> u32;

    /// The table of `g_y` on one register.
    fn transformed(&self, guess: u64, reg: &DbRegister) -> Vec<u32> {
        let mut g = vec![0u32; reg.payload.len()];
        for (x, &w) in reg.payload.iter().enumerate() {
            let x2 = self.relabel(guess, x as u32);
            g[x2 as usize] = self.xor_value(guess, x2) ^ self.map_payload(guess, w);
        }
        g
    }
}

/// The family of an EFX-shaped construction, guess = `y2 ∥ y1` with y2 the
/// inner key and y1 the low n−u bits of k1.
#[derive(Clone, Debug)]
pub struct ShapeFamily {
    shape: EfxShape,
    u: u32,
}

impl ShapeFamily {
    pub fn new(shape: EfxShape, u: u32) -> Result<Self> {
        if u > shape.n {
            return Err(invalid("u", format!("{u} exceeds block size {}", shape.n)));
        }
        if shape.pre.is_some() && u != shape.n {
            return Err(invalid("u", "a first keyed layer needs the full codebook (u = n)"));
        }
        Ok(Self { shape, u })
    }

    pub fn shape(&self) -> &EfxShape {
        &self.shape
    }

    /// Splits a guess into (y2, y1).
    pub fn split(&self, guess: u64) -> (u32, u32) {
        let low = self.shape.n - self.u;
        ((guess >> low) as u32, (guess & ((1u64 << low) - 1)) as u32)
    }
}

impl GuessFamily for ShapeFamily {
    fn u(&self) -> u32 {
        self.u
    }
    fn out_bits(&self) -> u32 {
        self.shape.n
    }
    fn guess_bits(&self) -> u32 {
        self.shape.kappa + self.shape.n - self.u
    }
    fn evals_per_register(&self) -> u64 {
        self.shape.layers()
    }
    fn relabel(&self, guess: u64, x: u32) -> u32 {
        match &self.shape.pre {
            Some(p) => p.encrypt(self.split(guess).0, x),
            None => x,
        }
    }
    fn map_payload(&self, guess: u64, w: u32) -> u32 {
        match &self.shape.outer {
            Some(o) => o.decrypt(self.split(guess).0, w),
            None => w,
        }
    }
    fn xor_value(&self, guess: u64, x: u32) -> u32 {
        let (y2, y1) = self.split(guess);
        self.shape.inner.encrypt(y2, (x << (self.shape.n - self.u)) | y1)
    }
}

pub type PayloadMap = Arc<dyn Fn(u64, u32) -> u32 + Send + Sync>;

/// A family given directly as closures, for plugging in new constructions.
#[derive(Clone)]
pub struct ClosureFamily {
    pub u: u32,
    pub out_bits: u32,
    pub guess_bits: u32,
    pub evals_per_register: u64,
    /// Bijection on payloads applied in place.
    pub payload_map: PayloadMap,
    /// Function XORed into the payload register.
    pub xor_fn: PayloadMap,
    /// Optional bijective relabeling of the inputs.
    pub relabel: Option<PayloadMap>,
}

impl std::fmt::Debug for ClosureFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosureFamily")
            .field("u", &self.u)
            .field("out_bits", &self.out_bits)
            .field("guess_bits", &self.guess_bits)
            .finish()
    }
}

impl ClosureFamily {
    /// Checks that the maps are bijective and in range for every guess.
    /// Exhaustive, so only for small families.
    pub fn validate(&self) -> Result<()> {
        if self.guess_bits > 20 || self.u > 16 || self.out_bits > 16 {
            return Err(invalid("family", "too large to validate"));
        }
        let (inputs, outputs) = (1u32 << self.u, 1u32 << self.out_bits);
        for y in 0..1u64 << self.guess_bits {
            let mut seen = vec![false; outputs as usize];
            for w in 0..outputs {
                let v = (self.payload_map)(y, w);
                if v >= outputs || std::mem::replace(&mut seen[v as usize], true) {
                    return Err(invalid("family", format!("payload map of guess {y} is not a bijection")));
                }
            }
            if let Some(r) = &self.relabel {
                let mut seen = vec![false; inputs as usize];
                for x in 0..inputs {
                    let v = r(y, x);
                    if v >= inputs || std::mem::replace(&mut seen[v as usize], true) {
                        return Err(invalid("family", format!("relabeling of guess {y} is not a bijection")));
                    }
                }
            }
            if let Some(x) = (0..inputs).find(|&x| (self.xor_fn)(y, x) >= outputs) {
                return Err(invalid("family", format!("xor function of guess {y} leaves range at {x}")));
            }
        }
        Ok(())
    }
}

impl GuessFamily for ClosureFamily {
    fn u(&self) -> u32 {
        self.u
    }
    fn out_bits(&self) -> u32 {
        self.out_bits
    }
    fn guess_bits(&self) -> u32 {
        self.guess_bits
    }
    fn evals_per_register(&self) -> u64 {
        self.evals_per_register
    }
    fn relabel(&self, guess: u64, x: u32) -> u32 {
        self.relabel.as_ref().map_or(x, |r| r(guess, x))
    }
    fn map_payload(&self, guess: u64, w: u32) -> u32 {
        (self.payload_map)(guess, w)
    }
    fn xor_value(&self, guess: u64, x: u32) -> u32 {
        (self.xor_fn)(guess, x)
    }
}

/// Post-Hadamard distribution of the input register of `Σ_x |x⟩|g(x)⟩`
/// after the output is traced out:
/// `P(z) = 2^{−2u} Σ_d #{x : g(x) = g(x⊕d)} (−1)^{d·z}`.
pub fn simon_distribution(g: &[u32]) -> Vec<f64> {
    let size = g.len();
    let mut corr = vec![0f64; size];
    for d in 0..size {
        corr[d] = (0..size).filter(|&x| g[x] == g[x ^ d]).count() as f64;
    }
    walsh_hadamard(&mut corr);
    let norm = (size * size) as f64;
    corr.iter().map(|&v| (v / norm).max(0.0)).collect()
}

fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for chunk in v.chunks_mut(2 * h) {
            let (a, b) = chunk.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (p, q) = (*x, *y);
                *x = p + q;
                *y = p - q;
            }
        }
        h *= 2;
    }
}

/// Exact probability that independent samples, the i-th drawn from
/// `dists[i]`, span a space of dimension below u. Dynamic programming over
/// the spanned subspace.
pub fn rank_deficiency_probability(dists: &[&[f64]], u: u32) -> f64 {
    if u == 0 {
        return 0.0;
    }
    let mut states: BTreeMap<Vec<u64>, (Basis, f64)> = BTreeMap::new();
    states.insert(Vec::new(), (Basis::new(), 1.0));
    for dist in dists {
        let support: Vec<(u64, f64)> = dist
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(z, &p)| (z as u64, p))
            .collect();
        let mut next: BTreeMap<Vec<u64>, (Basis, f64)> = BTreeMap::new();
        for (basis, mass) in states.into_values() {
            for &(z, p) in &support {
                let mut b = basis.clone();
                b.insert(z);
                if b.rank() == u {
                    continue;
                }
                next.entry(b.canonical()).or_insert_with(|| (b, 0.0)).1 += mass * p;
            }
        }
        states = next;
    }
    states.values().map(|(_, p)| *p).sum::<f64>().clamp(0.0, 1.0)
}

pub fn sample_from<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> u64 {
    let total: f64 = dist.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (z, &p) in dist.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = z;
        if target < acc {
            return z as u64;
        }
    }
    last as u64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestMethod {
    /// Exact probability; the guess passes when it is at least 1/2.
    Exhaustive,
    /// One sampled tuple decides; the probability is estimated from `trials`
    /// tuples.
    MonteCarlo { trials: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOutcome {
    pub passes: bool,
    pub pass_probability: f64,
}

/// Per-register Simon distributions of `g_y`, reusing the result when
/// consecutive registers hold the same data.
pub fn register_distributions<F: GuessFamily + ?Sized>(db: &QueryDatabase, family: &F, guess: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(db.c());
    for (i, reg) in db.registers().iter().enumerate() {
        if i > 0 && reg == db.register(i - 1) {
            let prev = out[i - 1].clone();
            out.push(prev);
        } else {
            out.push(simon_distribution(&family.transformed(guess, reg)));
        }
    }
    out
}

pub(crate) fn check_family<F: GuessFamily + ?Sized>(db: &QueryDatabase, family: &F) -> Result<()> {
    if family.u() != db.u() || family.out_bits() != db.n_out() {
        return Err(Error::SizeMismatch(format!(
            "family expects (u={}, n={}), database has (u={}, n={})",
            family.u(),
            family.out_bits(),
            db.u(),
            db.n_out()
        )));
    }
    if family.guess_bits() > 24 {
        return Err(invalid("guess_bits", format!("{} bits of search space is too large", family.guess_bits())));
    }
    Ok(())
}

/// The reversible periodicity test for one guess: rank of c Simon samples
/// of `g_y` below u.
pub fn test_key_guess<F: GuessFamily + ?Sized, R: Rng + ?Sized>(
    db: &QueryDatabase,
    family: &F,
    guess: u64,
    method: TestMethod,
    rng: &mut R,
) -> Result<TestOutcome> {
    check_family(db, family)?;
    if guess >> family.guess_bits() != 0 {
        return Err(invalid("guess", format!("{guess} wider than {} bits", family.guess_bits())));
    }
    let dists = register_distributions(db, family, guess);
    let u = db.u();
    match method {
        TestMethod::Exhaustive => {
            if u > 8 {
                return Err(invalid("u", "exhaustive test is limited to u ≤ 8"));
            }
            let refs: Vec<&[f64]> = dists.iter().map(|d| d.as_slice()).collect();
            let p = rank_deficiency_probability(&refs, u);
            Ok(TestOutcome { passes: p >= 0.5, pass_probability: p })
        }
        TestMethod::MonteCarlo { trials } => {
            let draw = |rng: &mut R| {
                let samples: Vec<u64> = dists.iter().map(|d| sample_from(d, rng)).collect();
                gf2::rank_of(&samples) < u
            };
            let passes = draw(rng);
            let hits = (0..trials).filter(|_| draw(rng)).count();
            let pass_probability = if trials == 0 { passes as u8 as f64 } else { hits as f64 / trials as f64 };
            Ok(TestOutcome { passes, pass_probability })
        }
    }
}
