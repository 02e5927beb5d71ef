//! Classical baselines: collision-based period finding, exhaustive key
//! search, guess-then-Even-Mansour on EFX, and time-data trade-off curves.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ciphers::{Construction, ConstructionKind, EfxShape};
use crate::error::{invalid, Error, Result};

/// Largest `κ + 2n` the exhaustive search enumerates.
pub const MAX_EXHAUSTIVE_BITS: u32 = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassicalPeriod {
    Period(u64),
    Injective,
    Exhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodSearch {
    pub outcome: ClassicalPeriod,
    /// Distinct points of f evaluated.
    pub queries: u64,
}

/// Queries f on distinct points in random order until two inputs collide,
/// returning their XOR.
pub fn classical_period_find<R: Rng + ?Sized>(f: &[u64], budget: u64, rng: &mut R) -> Result<PeriodSearch> {
    let size = f.len();
    if !size.is_power_of_two() {
        return Err(Error::SizeMismatch(format!("table length {size} is not a power of two")));
    }
    let mut seen = HashMap::new();
    let mut queries = 0;
    for x in sample(rng, size, size) {
        if queries == budget {
            return Ok(PeriodSearch { outcome: ClassicalPeriod::Exhausted, queries });
        }
        queries += 1;
        if let Some(&y) = seen.get(&f[x]) {
            return Ok(PeriodSearch { outcome: ClassicalPeriod::Period((x ^ y) as u64), queries });
        }
        seen.insert(f[x], x);
    }
    Ok(PeriodSearch { outcome: ClassicalPeriod::Injective, queries })
}

/// Outcome and cost accounting of one classical attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalReport {
    pub attack: String,
    pub construction: ConstructionKind,
    /// The recovered keys reproduce the construction on every input.
    pub success: bool,
    /// The recovered keys agree with every recorded pair.
    pub consistent: bool,
    pub k: Option<u32>,
    pub k1: Option<u32>,
    pub k2: Option<u32>,
    #[serde(rename = "D")]
    pub online_queries: u64,
    /// Block cipher or permutation evaluations made offline.
    #[serde(rename = "T")]
    pub offline_evals: u64,
    /// offline_evals plus one unit per table insertion or lookup.
    pub time_units: u64,
    pub memory_cells: u64,
    pub guesses_tried: u64,
}

impl ClassicalReport {
    fn empty(attack: &str, construction: ConstructionKind) -> Self {
        Self {
            attack: attack.into(),
            construction,
            success: false,
            consistent: false,
            k: None,
            k1: None,
            k2: None,
            online_queries: 0,
            offline_evals: 0,
            time_units: 0,
            memory_cells: 0,
            guesses_tried: 0,
        }
    }

    fn record(&mut self, instance: &Construction, shape: &EfxShape, keys: (u32, u32, u32)) {
        (self.k, self.k1, self.k2) = (Some(keys.0), Some(keys.1), Some(keys.2));
        self.consistent = true;
        self.success =
            (0..1u32 << shape.n).all(|x| shape.evaluate(keys.0, keys.1, keys.2, x) == instance.evaluate_with(instance.keys(), x));
    }
}

fn shape_of(instance: &Construction) -> Result<EfxShape> {
    instance
        .efx_shape()
        .map(|(s, _)| s)
        .ok_or_else(|| Error::Unsupported(format!("{} has no EFX decomposition", instance.kind())))
}

/// Tries every (k, k1, k2) against the pairs, in that order, and stops at
/// the first tuple consistent with all of them.
pub fn exhaustive_search(instance: &Construction, pairs: &[(u32, u32)]) -> Result<ClassicalReport> {
    if pairs.len() < 2 {
        return Err(invalid("pairs", "at least two known pairs are needed"));
    }
    let shape = shape_of(instance)?;
    let (n, kappa) = (shape.n, shape.kappa);
    if kappa + 2 * n > MAX_EXHAUSTIVE_BITS {
        return Err(invalid("instance", format!("κ + 2n = {} exceeds {MAX_EXHAUSTIVE_BITS}", kappa + 2 * n)));
    }
    let layers = shape.layers();
    let mut report = ClassicalReport::empty("exhaustive", instance.kind());
    report.memory_cells = pairs.len() as u64;
    for k in 0..1u32 << kappa {
        for k1 in 0..1u32 << n {
            for k2 in 0..1u32 << n {
                report.guesses_tried += 1;
                let mut ok = true;
                for &(x, y) in pairs {
                    report.offline_evals += layers;
                    if shape.evaluate(k, k1, k2, x) != y {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    report.time_units = report.offline_evals;
                    report.record(instance, &shape, (k, k1, k2));
                    return Ok(report);
                }
            }
        }
    }
    report.time_units = report.offline_evals;
    Ok(report)
}

/// Result of the Even-Mansour sub-attack on peeled pairs `z = k2 ⊕ P(k1 ⊕ x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmRecovery {
    pub keys: Option<(u32, u32)>,
    pub evals: u64,
    pub table_ops: u64,
}

/// Even-Mansour key recovery from pairs on the subgroup `[0, d)` (a power
/// of two), matching `z(x) ⊕ z(x⊕1)` against `P(p) ⊕ P(p⊕1)` over the coset
/// representatives p. Candidates are checked against every pair given.
pub fn em_subgroup_attack<P: Fn(u32) -> u32>(n: u32, perm: P, z: &BTreeMap<u32, u32>, d: u32) -> Result<EmRecovery> {
    if d < 2 || !d.is_power_of_two() || d as u64 > 1u64 << n {
        return Err(invalid("D", format!("{d} is not a power of two in [2, 2^{n}]")));
    }
    let mut out = EmRecovery { keys: None, evals: 0, table_ops: 0 };
    let mut diffs: HashMap<u32, Vec<u32>> = HashMap::new();
    for x in (0..d).step_by(2) {
        let (Some(&a), Some(&b)) = (z.get(&x), z.get(&(x ^ 1))) else {
            return Err(invalid("pairs", format!("missing subgroup input {x}")));
        };
        diffs.entry(a ^ b).or_default().push(x);
        out.table_ops += 1;
    }
    for p in (0..1u32 << n).step_by(d as usize) {
        let (pp, pq) = (perm(p), perm(p ^ 1));
        out.evals += 2;
        out.table_ops += 1;
        let Some(xs) = diffs.get(&(pp ^ pq)) else { continue };
        for &x in xs {
            // k1 ⊕ x ∈ {p, p⊕1}
            for (k1, pk) in [(p ^ x, pp), (p ^ 1 ^ x, pq)] {
                let k2 = z[&x] ^ pk;
                let mut ok = true;
                for (&xi, &zi) in z {
                    out.evals += 1;
                    if perm(k1 ^ xi) ^ k2 != zi {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    out.keys = Some((k1, k2));
                    return Ok(out);
                }
            }
        }
    }
    Ok(out)
}

/// Pairs an Even-Mansour candidate from a collision is checked against
/// before it is returned.
pub const EM_CANDIDATE_CHECKS: u32 = 4;

/// Even-Mansour key recovery with the full codebook available: `z(x) ⊕ P(x)`
/// has period k1, found by collisions in random order. `z` is read lazily,
/// so only the points visited are peeled. Collisions that do not complete
/// to a key matching `z` on the first [`EM_CANDIDATE_CHECKS`] inputs are
/// skipped.
pub fn em_collision_attack<P, Z, R>(n: u32, perm: P, mut z: Z, rng: &mut R) -> EmRecovery
where
    P: Fn(u32) -> u32,
    Z: FnMut(u32) -> u32,
    R: Rng + ?Sized,
{
    let size = 1usize << n;
    let mut out = EmRecovery { keys: None, evals: 0, table_ops: 0 };
    let mut cache = BTreeMap::new();
    let mut peeled = |x: u32| *cache.entry(x).or_insert_with(|| z(x));
    let mut seen: HashMap<u32, Vec<u32>> = HashMap::new();
    for x in sample(rng, size, size) {
        let x = x as u32;
        out.evals += 1;
        let f = peeled(x) ^ perm(x);
        out.table_ops += 1;
        let partners = seen.get(&f).cloned().unwrap_or_default();
        for y in partners {
            let k1 = x ^ y;
            out.evals += 1;
            let k2 = peeled(x) ^ perm(x ^ k1);
            let mut ok = true;
            for xi in 0..EM_CANDIDATE_CHECKS.min(size as u32) {
                out.evals += 1;
                if perm(k1 ^ xi) ^ k2 != peeled(xi) {
                    ok = false;
                    break;
                }
            }
            if ok {
                out.keys = Some((k1, k2));
                return out;
            }
        }
        seen.entry(f).or_default().push(x);
    }
    out
}

/// Subgroup size the pair variant matches on: the largest power of two not
/// above `min(D, 2^{⌈n/2⌉})`.
pub fn effective_subgroup(n: u32, d: u64) -> u32 {
    let cap = 1u64 << n.div_ceil(2);
    let m = d.min(cap);
    1u32 << (63 - m.leading_zeros())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmVariant {
    /// Difference matching on a subgroup of at most `2^{⌈n/2⌉}` pairs.
    #[default]
    Subgroup,
    /// Collisions of `z(x) ⊕ P(x)` over the full codebook.
    Collision,
}

/// Guess k, peel the outer cipher off the recorded ciphertexts, then attack
/// the remaining Even-Mansour layer keyed by (k1, k2). Queries the first D
/// plaintexts.
pub fn guess_and_em_attack<R: Rng + ?Sized>(instance: &Construction, d: u64, rng: &mut R) -> Result<ClassicalReport> {
    guess_and_em_attack_with(instance, d, EmVariant::Subgroup, rng)
}

/// [`guess_and_em_attack`] with a chosen Even-Mansour sub-attack. The
/// collision variant needs D = 2^n.
pub fn guess_and_em_attack_with<R: Rng + ?Sized>(
    instance: &Construction,
    d: u64,
    variant: EmVariant,
    rng: &mut R,
) -> Result<ClassicalReport> {
    let shape = shape_of(instance)?;
    if shape.pre.is_some() {
        return Err(Error::Unsupported(format!("{} has a first keyed layer", instance.kind())));
    }
    let n = shape.n;
    if d < 2 || d > 1u64 << n {
        return Err(invalid("D", format!("{d} outside [2, 2^{n}]")));
    }
    let mut report = ClassicalReport::empty("guess-and-em", instance.kind());
    let pairs = (0..d as u32).map(|x| Ok((x, instance.encrypt(x)?))).collect::<Result<Vec<_>>>()?;
    report.online_queries = instance.online_forward();
    report.memory_cells = d;
    let full = variant == EmVariant::Collision;
    if full && d != 1u64 << n {
        return Err(invalid("D", "the collision variant needs the full codebook"));
    }
    let sub = effective_subgroup(n, d);

    let peel_cost = shape.outer.is_some() as u64;
    for k in 0..1u32 << shape.kappa {
        report.guesses_tried += 1;
        let peel = |y: u32| shape.outer.as_ref().map_or(y, |o| o.decrypt(k, y));
        let perm = |x: u32| shape.inner.encrypt(k, x);
        let (em, checked) = if full {
            let mut peels = 0;
            let em = em_collision_attack(
                n,
                perm,
                |x| {
                    peels += peel_cost;
                    peel(pairs[x as usize].1)
                },
                rng,
            );
            report.offline_evals += peels;
            (em, 0)
        } else {
            let z: BTreeMap<u32, u32> = pairs[..sub as usize].iter().map(|&(x, y)| (x, peel(y))).collect();
            report.offline_evals += sub as u64 * peel_cost;
            (em_subgroup_attack(n, perm, &z, sub)?, sub as usize)
        };
        report.offline_evals += em.evals;
        report.time_units += em.table_ops;
        let Some((k1, k2)) = em.keys else { continue };
        // the remaining pairs decide between surviving guesses
        let rest_ok = pairs[checked..].iter().all(|&(x, y)| {
            report.offline_evals += shape.layers();
            shape.evaluate(k, k1, k2, x) == y
        });
        if rest_ok {
            report.time_units += report.offline_evals;
            report.record(instance, &shape, (k, k1, k2));
            return Ok(report);
        }
    }
    report.time_units += report.offline_evals;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CurveKind {
    /// Classical attack on EFX and 2XOR.
    ClassicalEfx,
    ClassicalFx,
    /// Offline-Simon with classical queries, D = 2^u.
    QuantumQ1,
    /// Grover-meets-Simon with superposition queries.
    QuantumQ2,
}

impl CurveKind {
    pub const ALL: [CurveKind; 4] =
        [CurveKind::ClassicalEfx, CurveKind::ClassicalFx, CurveKind::QuantumQ1, CurveKind::QuantumQ2];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::ClassicalEfx => "classical-efx",
            CurveKind::ClassicalFx => "classical-fx",
            CurveKind::QuantumQ1 => "quantum-q1",
            CurveKind::QuantumQ2 => "quantum-q2",
        }
    }

    /// log₂ T at log₂ D, up to constant and polynomial factors.
    pub fn log2_time(self, n: u32, kappa: u32, log2_d: f64) -> f64 {
        let (n, kappa) = (n as f64, kappa as f64);
        match self {
            CurveKind::ClassicalEfx => (kappa + n - log2_d).max(kappa + n / 2.0),
            CurveKind::ClassicalFx => kappa + n - log2_d,
            CurveKind::QuantumQ1 => log2_d.max((kappa + n - log2_d) / 2.0),
            CurveKind::QuantumQ2 => kappa / 2.0,
        }
    }

    /// Corners of the curve over `log₂ D ∈ [0, n]`, in D/n and T/n units.
    pub fn polyline(self, n: u32, kappa: u32) -> Vec<(f64, f64)> {
        let nf = n as f64;
        let kink = match self {
            CurveKind::ClassicalEfx => Some(nf / 2.0),
            CurveKind::QuantumQ1 => Some((kappa as f64 + nf) / 3.0),
            _ => None,
        };
        let mut xs = vec![0.0, nf];
        xs.extend(kink.filter(|&k| k > 0.0 && k < nf));
        xs.sort_by(f64::total_cmp);
        xs.into_iter().map(|x| (x / nf, self.log2_time(n, kappa, x) / nf)).collect()
    }
}

impl std::str::FromStr for CurveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('_', "-");
        CurveKind::ALL
            .into_iter()
            .find(|k| k.name() == t)
            .or(match t.as_str() {
                "2xor" | "efx" => Some(CurveKind::ClassicalEfx),
                "fx" => Some(CurveKind::ClassicalFx),
                "q1" => Some(CurveKind::QuantumQ1),
                "q2" => Some(CurveKind::QuantumQ2),
                _ => None,
            })
            .ok_or_else(|| invalid("attack", format!("unknown curve `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointSource {
    Formula,
    Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub attack: String,
    pub log2_d: f64,
    pub log2_t: f64,
    pub source: PointSource,
}

/// Reference curve on a grid of log₂ D values.
pub fn tradeoff_curve(kind: CurveKind, n: u32, kappa: u32, log2_d_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    if log2_d_grid.is_empty() {
        return Err(invalid("grid", "empty D grid"));
    }
    if let Some(d) = log2_d_grid.iter().find(|&&d| !(0.0..=n as f64).contains(&d)) {
        return Err(invalid("grid", format!("log2 D = {d} outside [0, {n}]")));
    }
    Ok(log2_d_grid
        .iter()
        .map(|&d| CurvePoint {
            attack: kind.name().into(),
            log2_d: d,
            log2_t: kind.log2_time(n, kappa, d),
            source: PointSource::Formula,
        })
        .collect())
}

/// CSV with columns `attack, log2D_over_n, log2T_over_n, measured_or_formula`.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], n: u32, mut out: W) -> Result<()> {
    writeln!(out, "attack,log2D_over_n,log2T_over_n,measured_or_formula")?;
    for p in points {
        let source = match p.source {
            PointSource::Formula => "formula",
            PointSource::Measured => "measured",
        };
        writeln!(out, "{},{},{},{}", p.attack, p.log2_d / n as f64, p.log2_t / n as f64, source)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_is_injective() {
        let f: Vec<u64> = (0..16).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = classical_period_find(&f, u64::MAX, &mut rng).unwrap();
        assert_eq!(r, PeriodSearch { outcome: ClassicalPeriod::Injective, queries: 16 });
        let r = classical_period_find(&f, 5, &mut rng).unwrap();
        assert_eq!(r.outcome, ClassicalPeriod::Exhausted);
    }

    #[test]
    fn effective_subgroup_sizes() {
        assert_eq!(effective_subgroup(4, 2), 2);
        assert_eq!(effective_subgroup(4, 3), 2);
        assert_eq!(effective_subgroup(4, 16), 4);
        assert_eq!(effective_subgroup(5, 16), 8);
    }

    #[test]
    fn curve_endpoints() {
        assert_eq!(CurveKind::ClassicalEfx.log2_time(4, 8, 4.0), 10.0);
        assert_eq!(CurveKind::ClassicalFx.log2_time(4, 8, 4.0), 8.0);
        assert_eq!(CurveKind::ClassicalEfx.log2_time(4, 8, 0.0), 12.0);
        assert_eq!(CurveKind::ClassicalFx.log2_time(4, 8, 0.0), 12.0);
        assert_eq!(CurveKind::QuantumQ1.log2_time(4, 8, 4.0), 4.0);
        assert!(tradeoff_curve(CurveKind::QuantumQ2, 4, 8, &[]).is_err());
        assert_eq!("2XOR".parse::<CurveKind>().unwrap(), CurveKind::ClassicalEfx);
    }
}
