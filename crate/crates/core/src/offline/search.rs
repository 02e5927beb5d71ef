use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::{self, Gf2Matrix};
use crate::qsim::{self, StateVector, DEFAULT_QUBIT_CAP};

use super::database::QueryDatabase;
use super::keytest::{check_family, rank_deficiency_probability, register_distributions, sample_from, GuessFamily};
use super::{AttackMode, AttackOptions};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchOutcome {
    /// The first measured guess the verifier accepted.
    pub found: Option<u64>,
    /// Iterations of the first round, `⌊(π/4)/arcsin(2^{−g/2})⌋`.
    pub iterations: u64,
    pub total_iterations: u64,
    pub rounds: u32,
    /// Guesses whose test passes with probability at least 1/2.
    pub passing: Vec<u64>,
    /// Every measured guess, in order.
    pub candidates: Vec<u64>,
}

/// Exact pass probability of every guess.
pub(crate) fn pass_probabilities<F: GuessFamily + ?Sized>(db: &QueryDatabase, family: &F) -> Vec<f64> {
    (0..1u64 << family.guess_bits())
        .map(|y| {
            let dists = register_distributions(db, family, y);
            let refs: Vec<&[f64]> = dists.iter().map(|d| d.as_slice()).collect();
            rank_deficiency_probability(&refs, db.u())
        })
        .collect()
}

/// Qubits of the joint search state: guess register plus c registers of
/// u input and n output qubits.
pub(crate) fn exact_qubits(guess_bits: u32, c: usize, u: u32, out_bits: u32) -> u32 {
    if guess_bits == 0 {
        u + out_bits
    } else {
        guess_bits + c as u32 * (u + out_bits)
    }
}

/// Fresh Simon samples of `g_y`, one per database register: measured on a
/// state vector in EXACT mode, drawn from the exact distribution otherwise.
pub(crate) fn fresh_samples<F: GuessFamily + ?Sized, R: Rng + ?Sized>(
    db: &QueryDatabase,
    family: &F,
    guess: u64,
    mode: AttackMode,
    rng: &mut R,
) -> Result<Vec<u64>> {
    match mode {
        AttackMode::Tensor => {
            let dists = register_distributions(db, family, guess);
            Ok(dists.iter().map(|d| sample_from(d, rng)).collect())
        }
        AttackMode::Exact => db
            .registers()
            .iter()
            .map(|reg| {
                let g: Vec<u64> = family.transformed(guess, reg).into_iter().map(u64::from).collect();
                qsim::simon_sample(&g, family.out_bits(), rng)
            })
            .collect(),
    }
}

/// Amplitude-amplified search for a guess whose test passes, followed by
/// `verify` on the measured guess. A rejected guess is excluded from the
/// test of later rounds; every round runs the same iteration count.
pub fn search<F, R, V>(
    db: &QueryDatabase,
    family: &F,
    mode: AttackMode,
    max_rounds: u32,
    rng: &mut R,
    mut verify: V,
) -> Result<SearchOutcome>
where
    F: GuessFamily + ?Sized,
    R: Rng + ?Sized,
    V: FnMut(u64, &mut R) -> Result<bool>,
{
    check_family(db, family)?;
    let g = family.guess_bits();
    let size = 1u64 << g;
    let probabilities = pass_probabilities(db, family);
    let passing: Vec<u64> = (0..size).filter(|&y| probabilities[y as usize] >= 0.5).collect();
    let t = qsim::grover_iterations(1.0 / size as f64)?;
    let mut out = SearchOutcome { iterations: t, passing, ..Default::default() };

    let mut engine = match mode {
        AttackMode::Exact if g > 0 => Some(ExactEngine::new(db, family)?),
        _ => None,
    };
    let mut excluded = vec![false; size as usize];
    for _ in 0..max_rounds {
        let candidate = match engine.as_mut() {
            Some(e) => e.run(t, &excluded, rng)?,
            None => tensor_candidate(&probabilities, &excluded, t, rng),
        };
        out.rounds += 1;
        out.total_iterations += t;
        out.candidates.push(candidate);
        if verify(candidate, rng)? {
            out.found = Some(candidate);
            break;
        }
        excluded[candidate as usize] = true;
        if excluded.iter().all(|&e| e) {
            break;
        }
    }
    Ok(out)
}

/// The search outcome under the single-marked curve: on success the
/// measured guess is uniform among the remaining passers, otherwise
/// uniform among the rest.
fn tensor_candidate<R: Rng + ?Sized>(probabilities: &[f64], excluded: &[bool], iterations: u64, rng: &mut R) -> u64 {
    let size = probabilities.len() as u64;
    let marked: Vec<u64> =
        (0..size).filter(|&y| !excluded[y as usize] && probabilities[y as usize] >= 0.5).collect();
    if marked.len() as u64 == size {
        return marked[rng.gen_range(0..marked.len())];
    }
    let success = if marked.is_empty() { 0.0 } else { qsim::amplified_success(1.0 / size as f64, iterations) };
    if rng.gen::<f64>() < success {
        return marked[rng.gen_range(0..marked.len())];
    }
    loop {
        let y = rng.gen_range(0..size);
        if marked.binary_search(&y).is_err() {
            return y;
        }
    }
}

/// The joint state `Σ_y |y⟩ ⊗ |ψ⟩` with the c database registers, evolved
/// gate by gate.
struct ExactEngine {
    sv: StateVector,
    forward: Vec<u32>,
    backward: Vec<u32>,
    guess_bits: u32,
    u: u32,
    inputs: Vec<String>,
    offsets: Vec<u32>,
}

impl ExactEngine {
    fn new<F: GuessFamily + ?Sized>(db: &QueryDatabase, family: &F) -> Result<Self> {
        let (g, u, out, c) = (family.guess_bits(), db.u(), db.n_out(), db.c());
        let qubits = exact_qubits(g, c, u, out);
        if qubits > DEFAULT_QUBIT_CAP {
            return Err(Error::QubitCap { required: qubits, cap: DEFAULT_QUBIT_CAP });
        }
        let names: Vec<(String, u32)> = std::iter::once(("y".to_string(), g))
            .chain((0..c).flat_map(|i| [(format!("x{i}"), u), (format!("w{i}"), out)]))
            .collect();
        let layout: Vec<(&str, u32)> = names.iter().map(|(n, w)| (n.as_str(), *w)).collect();
        let offsets: Vec<u32> = (0..c as u32).map(|i| g + i * (u + out)).collect();

        let dim = 1usize << qubits;
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let amp = Complex64::new(((1u64 << g) as f64 * (1u64 << (c as u32 * u)) as f64).sqrt().recip(), 0.0);
        for y in 0..1usize << g {
            for tuple in 0..1usize << (c as u32 * u) {
                let mut index = y;
                for (i, &off) in offsets.iter().enumerate() {
                    let x = (tuple >> (i as u32 * u)) & ((1 << u) - 1);
                    let w = db.register(i).payload[x] as usize;
                    index |= (x | w << u) << off;
                }
                amps[index] = amp;
            }
        }
        let sv = StateVector::from_amplitudes(&layout, amps)?;

        let (xmask, wmask) = ((1usize << u) - 1, (1usize << out) - 1);
        let mut forward = vec![0u32; dim];
        let mut backward = vec![0u32; dim];
        for i in 0..dim {
            let y = (i & ((1 << g) - 1)) as u64;
            let mut j = y as usize;
            for &off in &offsets {
                let x = (i >> off) & xmask;
                let w = (i >> (off + u)) & wmask;
                let x2 = family.relabel(y, x as u32);
                let w2 = family.xor_value(y, x2) ^ family.map_payload(y, w as u32);
                j |= (x2 as usize | (w2 as usize) << u) << off;
            }
            forward[i] = j as u32;
            backward[j] = i as u32;
        }
        Ok(Self {
            sv,
            forward,
            backward,
            guess_bits: g,
            u,
            inputs: (0..c).map(|i| format!("x{i}")).collect(),
            offsets,
        })
    }

    fn run<R: Rng + ?Sized>(
        &mut self,
        iterations: u64,
        excluded: &[bool],
        rng: &mut R,
    ) -> Result<u64> {
        let (gmask, xmask, u) = ((1usize << self.guess_bits) - 1, (1usize << self.u) - 1, self.u);
        for _ in 0..iterations {
            let forward = &self.forward;
            self.sv.permute_basis(|i| forward[i] as usize);
            for name in &self.inputs {
                self.sv.hadamard(name)?;
            }
            let offsets = &self.offsets;
            self.sv.phase_flip(|i| {
                if excluded[i & gmask] {
                    return false;
                }
                let samples: Vec<u64> = offsets.iter().map(|&off| ((i >> off) & xmask) as u64).collect();
                gf2::rank_of(&samples) < u
            });
            for name in &self.inputs {
                self.sv.hadamard(name)?;
            }
            let backward = &self.backward;
            self.sv.permute_basis(|i| backward[i] as usize);
            self.sv.hadamard("y")?;
            self.sv.reflect_zero("y")?;
            self.sv.hadamard("y")?;
        }
        let measured = self.sv.measure("y", rng)?.value;
        // return the guess register to the uniform superposition; the
        // database registers are reused as they are
        self.sv.permute_basis(|i| i ^ measured as usize);
        self.sv.hadamard("y")?;
        Ok(measured)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedOutcome {
    pub guess: Option<u64>,
    /// Nullspace basis of the fresh samples taken at the accepted guess.
    pub period_basis: Vec<u64>,
    pub search: SearchOutcome,
}

/// The generic engine: finds y such that `g_y(f)` is periodic, accepting a
/// measured guess when a fresh batch of samples is again rank deficient.
pub fn generalized_offline_simon<F: GuessFamily + ?Sized, R: Rng + ?Sized>(
    db: &QueryDatabase,
    family: &F,
    options: &AttackOptions,
    rng: &mut R,
) -> Result<GeneralizedOutcome> {
    let mut basis = Vec::new();
    let outcome = search(db, family, options.mode, options.max_rounds, rng, |y, rng| {
        let samples = fresh_samples(db, family, y, options.mode, rng)?;
        let m = Gf2Matrix::from_rows(db.u(), samples)?;
        if m.rank() < db.u() {
            basis = m.nullspace_basis();
            Ok(true)
        } else {
            Ok(false)
        }
    })?;
    Ok(GeneralizedOutcome { guess: outcome.found, period_basis: basis, search: outcome })
}
