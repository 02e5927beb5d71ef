//! Dense state-vector simulation of the quantum building blocks.
//!
//! Registers are laid out from the least significant qubit upward in
//! declaration order, so a basis index is `Σ value_r << offset_r`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ciphers::Permutation;
use crate::error::{invalid, Error, Result};
use crate::gf2::{self, PeriodOutcome};

pub const DEFAULT_QUBIT_CAP: u32 = 26;
pub const SIMON_MAX_BITS: u32 = 12;
/// Norm drift tolerated after any gate.
pub const NORM_TOLERANCE: f64 = 1e-9;

const PARALLEL_MIN: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub offset: u32,
    pub width: u32,
}

impl Register {
    pub fn mask(&self) -> usize {
        ((1usize << self.width) - 1) << self.offset
    }

    pub fn value(&self, index: usize) -> usize {
        (index >> self.offset) & ((1usize << self.width) - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub register: String,
    pub value: u64,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct StateVector {
    registers: Vec<Register>,
    num_qubits: u32,
    amps: Vec<Complex64>,
    hadamard_scale: f64,
}

impl StateVector {
    /// All-zero state over the given `(name, width)` registers.
    pub fn new(layout: &[(&str, u32)]) -> Result<Self> {
        Self::with_cap(layout, DEFAULT_QUBIT_CAP)
    }

    pub fn with_cap(layout: &[(&str, u32)], cap: u32) -> Result<Self> {
        let mut registers = Vec::with_capacity(layout.len());
        let mut offset = 0u32;
        for &(name, width) in layout {
            if registers.iter().any(|r: &Register| r.name == name) {
                return Err(invalid("layout", format!("register `{name}` declared twice")));
            }
            registers.push(Register { name: name.to_string(), offset, width });
            offset += width;
        }
        if offset > cap {
            return Err(Error::QubitCap { required: offset, cap });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << offset];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { registers, num_qubits: offset, amps, hadamard_scale: FRAC_1_SQRT_2 })
    }

    pub fn from_amplitudes(layout: &[(&str, u32)], amps: Vec<Complex64>) -> Result<Self> {
        let mut sv = Self::new(layout)?;
        if amps.len() != sv.amps.len() {
            return Err(Error::SizeMismatch(format!("{} amplitudes for {} qubits", amps.len(), sv.num_qubits)));
        }
        sv.amps = amps;
        Ok(sv)
    }

    pub fn num_qubits(&self) -> u32 {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Replaces the state by the basis state with the given register values.
    pub fn set_basis(&mut self, values: &[(&str, u64)]) -> Result<()> {
        let mut index = 0usize;
        for &(name, v) in values {
            let r = self.register(name)?;
            if v >> r.width != 0 {
                return Err(Error::SizeMismatch(format!("{v} does not fit register `{name}`")));
            }
            index |= (v as usize) << r.offset;
        }
        self.amps.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        self.amps[index] = Complex64::new(1.0, 0.0);
        Ok(())
    }

    /// Overrides the Hadamard normalization constant. Only for mutation
    /// checks of the verification suites.
    #[doc(hidden)]
    pub fn inject_hadamard_scale(&mut self, scale: f64) {
        self.hadamard_scale = scale;
    }

    pub fn hadamard(&mut self, name: &str) -> Result<()> {
        let r = self.register(name)?.clone();
        for q in r.offset..r.offset + r.width {
            self.hadamard_qubit(q);
        }
        Ok(())
    }

    fn hadamard_qubit(&mut self, q: u32) {
        let h = self.hadamard_scale;
        let half = 1usize << q;
        let butterfly = |chunk: &mut [Complex64]| {
            let (lo, hi) = chunk.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = (x + y) * h;
                *b = (x - y) * h;
            }
        };
        if self.amps.len() >= PARALLEL_MIN {
            self.amps.par_chunks_mut(2 * half).for_each(butterfly);
        } else {
            self.amps.chunks_mut(2 * half).for_each(butterfly);
        }
    }

    /// Relabels basis states by `map`, which must be a bijection on indices.
    pub fn permute_basis<F: Fn(usize) -> usize + Sync>(&mut self, map: F) {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            out[map(i)] = *a;
        }
        self.amps = out;
    }

    /// `|x⟩|y⟩ ↦ |x⟩|y ⊕ f(x)⟩`.
    pub fn apply_xor_oracle(&mut self, f: &[u64], input: &str, output: &str) -> Result<()> {
        let (ri, ro) = (self.register(input)?.clone(), self.register(output)?.clone());
        if f.len() != 1usize << ri.width {
            return Err(Error::SizeMismatch(format!("table of {} entries on {}-qubit register", f.len(), ri.width)));
        }
        if let Some(v) = f.iter().find(|&&v| v >> ro.width != 0) {
            return Err(Error::SizeMismatch(format!("value {v} wider than {}-qubit register", ro.width)));
        }
        self.permute_basis(|i| i ^ ((f[ri.value(i)] as usize) << ro.offset));
        Ok(())
    }

    /// `|z⟩ ↦ |p(z)⟩` on one register, as a direct amplitude permutation.
    pub fn apply_inplace_perm(&mut self, p: &Permutation, name: &str) -> Result<()> {
        let r = self.register(name)?.clone();
        if p.block_bits() != r.width {
            return Err(Error::SizeMismatch(format!("{}-bit permutation on {}-qubit register", p.block_bits(), r.width)));
        }
        let mask = r.mask();
        self.permute_basis(|i| (i & !mask) | ((p.apply(r.value(i) as u32) as usize) << r.offset));
        Ok(())
    }

    /// Negates the amplitude of every basis state the predicate accepts.
    pub fn phase_flip<F: Fn(usize) -> bool + Sync>(&mut self, good: F) {
        let flip = |(i, a): (usize, &mut Complex64)| {
            if good(i) {
                *a = -*a;
            }
        };
        if self.amps.len() >= PARALLEL_MIN {
            self.amps.par_iter_mut().enumerate().for_each(flip);
        } else {
            self.amps.iter_mut().enumerate().for_each(flip);
        }
    }

    /// `2|0⟩⟨0| − I` restricted to one register (identity on the others).
    pub fn reflect_zero(&mut self, name: &str) -> Result<()> {
        let mask = self.register(name)?.mask();
        self.phase_flip(|i| i & mask != 0);
        Ok(())
    }

    /// Born distribution of one register.
    pub fn marginal(&self, name: &str) -> Result<Vec<f64>> {
        let r = self.register(name)?;
        let mut p = vec![0.0; 1usize << r.width];
        for (i, a) in self.amps.iter().enumerate() {
            p[r.value(i)] += a.norm_sqr();
        }
        Ok(p)
    }

    /// Samples a register by the Born rule and collapses the state onto the
    /// outcome in place.
    pub fn measure<R: Rng + ?Sized>(&mut self, name: &str, rng: &mut R) -> Result<MeasurementOutcome> {
        let marginal = self.marginal(name)?;
        let total: f64 = marginal.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::DegenerateState);
        }
        let value = sample_index(&marginal, total, rng);
        let probability = marginal[value] / total;
        let r = self.register(name)?.clone();
        let scale = 1.0 / (probability * total).sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a = if r.value(i) == value { *a * scale } else { Complex64::new(0.0, 0.0) };
        }
        Ok(MeasurementOutcome { register: name.to_string(), value: value as u64, probability })
    }

    /// The state of register `keep` alone, once every other register holds a
    /// basis value (after measuring them).
    pub fn factor_out(&self, keep: &str) -> Result<StateVector> {
        let r = self.register(keep)?.clone();
        let first = self.amps.iter().position(|a| a.norm_sqr() > 0.0).ok_or(Error::DegenerateState)?;
        let rest = first & !r.mask();
        let amps: Vec<Complex64> = (0..1usize << r.width).map(|v| self.amps[rest | v << r.offset]).collect();
        let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (kept - self.norm_sqr()).abs() > NORM_TOLERANCE {
            return Err(Error::Unsupported(format!("register `{keep}` is entangled with the others")));
        }
        let mut sv = StateVector::from_amplitudes(&[(keep, r.width)], amps)?;
        sv.hadamard_scale = self.hadamard_scale;
        Ok(sv)
    }

    /// Debug dump: one row per nonzero amplitude.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let names: Vec<&str> = self.registers.iter().map(|r| r.name.as_str()).collect();
        writeln!(out, "index,{},re,im", names.join(","))?;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let values: Vec<String> = self.registers.iter().map(|r| r.value(i).to_string()).collect();
            writeln!(out, "{i},{},{:e},{:e}", values.join(","), a.re, a.im)?;
        }
        Ok(())
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

fn check_simon_table(f: &[u64]) -> Result<u32> {
    let n = f.len().trailing_zeros();
    if f.len() != 1usize << n || n == 0 {
        return Err(Error::SizeMismatch(format!("table length {} is not 2^n", f.len())));
    }
    if n > SIMON_MAX_BITS {
        return Err(invalid("n", format!("{n} exceeds the Simon cap {SIMON_MAX_BITS}")));
    }
    if let Some(v) = f.iter().find(|&&v| v >> n != 0) {
        return Err(Error::SizeMismatch(format!("value {v} wider than {n} bits")));
    }
    Ok(n)
}

/// One run of Simon's subroutine on `f : {0,1}^n → {0,1}^n`: Hadamard,
/// oracle, measure the output, Hadamard, measure the input.
pub fn simon_subroutine<R: Rng + ?Sized>(f: &[u64], rng: &mut R) -> Result<u64> {
    let n = check_simon_table(f)?;
    simon_sample(f, n, rng)
}

/// Simon's subroutine for a function with `f.len()` inputs and
/// `out_bits`-bit outputs, under the general qubit cap.
pub fn simon_sample<R: Rng + ?Sized>(f: &[u64], out_bits: u32, rng: &mut R) -> Result<u64> {
    let u = f.len().trailing_zeros();
    if f.len() != 1usize << u {
        return Err(Error::SizeMismatch(format!("table length {} is not a power of two", f.len())));
    }
    let mut sv = StateVector::new(&[("x", u), ("y", out_bits)])?;
    sv.hadamard("x")?;
    sv.apply_xor_oracle(f, "x", "y")?;
    sv.measure("y", rng)?;
    let mut x = sv.factor_out("x")?;
    x.hadamard("x")?;
    Ok(x.measure("x", rng)?.value)
}

/// `c` Simon samples followed by period recovery.
pub fn simon_full<R: Rng + ?Sized>(f: &[u64], c: usize, rng: &mut R) -> Result<(PeriodOutcome, Vec<u64>)> {
    let n = check_simon_table(f)?;
    let samples = (0..c).map(|_| simon_subroutine(f, rng)).collect::<Result<Vec<_>>>()?;
    Ok((gf2::recover_period(n, &samples)?, samples))
}

/// Default Simon sample count for an n-bit function.
pub fn default_samples(n: u32) -> usize {
    n as usize + 4
}

/// `⌊(π/4)/arcsin√p⌋`.
pub fn grover_iterations(p: f64) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("{p} outside (0, 1]")));
    }
    Ok((FRAC_PI_4 / p.sqrt().asin()).floor() as u64)
}

/// `sin²((2t+1)·arcsin√p)`.
pub fn amplified_success(p: f64, t: u64) -> f64 {
    ((2 * t + 1) as f64 * p.sqrt().asin()).sin().powi(2)
}

/// A state-preparation circuit A and its inverse.
pub trait StatePrep {
    fn layout(&self) -> Vec<(String, u32)>;
    fn prepare(&self, sv: &mut StateVector) -> Result<()>;
    fn unprepare(&self, sv: &mut StateVector) -> Result<()>;

    /// `A (2|0⟩⟨0| − I) A†` on the prepared registers.
    fn reflect(&self, sv: &mut StateVector) -> Result<()> {
        self.unprepare(sv)?;
        for (name, _) in self.layout() {
            sv.reflect_zero(&name)?;
        }
        self.prepare(sv)
    }
}

/// Hadamard on a single m-qubit register.
#[derive(Clone, Debug)]
pub struct UniformPrep {
    pub register: String,
    pub qubits: u32,
}

impl StatePrep for UniformPrep {
    fn layout(&self) -> Vec<(String, u32)> {
        vec![(self.register.clone(), self.qubits)]
    }
    fn prepare(&self, sv: &mut StateVector) -> Result<()> {
        sv.hadamard(&self.register)
    }
    fn unprepare(&self, sv: &mut StateVector) -> Result<()> {
        sv.hadamard(&self.register)
    }
}

/// The amplified state: `(A S₀ A† S_good)^t A|0⟩`, up to global phase.
pub fn amplify<P: StatePrep, F: Fn(usize) -> bool + Sync>(prep: &P, good: F, iterations: u64) -> Result<StateVector> {
    let layout = prep.layout();
    let refs: Vec<(&str, u32)> = layout.iter().map(|(n, w)| (n.as_str(), *w)).collect();
    let mut sv = StateVector::new(&refs)?;
    prep.prepare(&mut sv)?;
    for _ in 0..iterations {
        sv.phase_flip(&good);
        prep.reflect(&mut sv)?;
    }
    Ok(sv)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifyOutcome {
    pub outcome: MeasurementOutcome,
    pub good: bool,
    /// Born weight of the good set just before measurement.
    pub success_probability: f64,
}

/// Amplitude amplification followed by a measurement of the first prepared
/// register.
pub fn amplitude_amplify<P: StatePrep, F: Fn(usize) -> bool + Sync, R: Rng + ?Sized>(
    prep: &P,
    good: F,
    iterations: u64,
    rng: &mut R,
) -> Result<AmplifyOutcome> {
    let mut sv = amplify(prep, &good, iterations)?;
    let success_probability = sv
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| good(*i))
        .map(|(_, a)| a.norm_sqr())
        .sum();
    let name = prep.layout()[0].0.clone();
    let outcome = sv.measure(&name, rng)?;
    let offset = sv.register(&name)?.offset;
    let good = good((outcome.value as usize) << offset);
    Ok(AmplifyOutcome { outcome, good, success_probability })
}
