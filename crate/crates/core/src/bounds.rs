//! Closed-form security bounds for EFX: the two classical sPRP bounds,
//! their inversion into resource floors, the quantum distinguishing bound
//! and the classical cost of emulating a quantum search.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: u32,
    pub kappa: u32,
    /// Online (construction) queries.
    #[serde(rename = "D")]
    pub d: f64,
    /// Offline (block cipher) queries.
    #[serde(rename = "T")]
    pub t: f64,
    /// Quantum queries.
    #[serde(default)]
    pub q: f64,
}

impl BoundParams {
    pub fn new(n: u32, kappa: u32, d: f64, t: f64) -> Self {
        Self { n, kappa, d, t, q: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("D", self.d), ("T", self.t), ("q", self.q)] {
            if !(v >= 0.0) || v.is_infinite() {
                return Err(invalid(name, format!("{v} is not a nonnegative number")));
            }
        }
        if self.d.log2() > self.n as f64 {
            return Err(invalid("D", format!("{} exceeds 2^{}", self.d, self.n)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBounds {
    /// The bound mostly useful for D ≤ 2^{n/2}.
    pub small_d: f64,
    /// The bound independent of D.
    pub any_d: f64,
}

/// `log₂(2^n − s)`, or None when it is not positive. Works for 2^n beyond
/// the f64 range as long as `s/2^n` is representable.
fn log2_gap(n: f64, s: f64) -> Option<f64> {
    let scaled = if s == 0.0 { 0.0 } else { s.signum() * (s.abs().log2() - n).exp2() };
    let r = 1.0 - scaled;
    (r > 0.0).then(|| n + r.log2())
}

fn sum_exp2(logs: &[f64]) -> f64 {
    logs.iter().map(|&l| l.exp2()).sum()
}

/// Both classical advantage bounds, each clamped to [0, 1]; a non-positive
/// denominator makes the first one vacuous (1).
///
/// First: `1/α + 3·T·min(D, 2^{n/2})/2^{κ+n+1} + α²T²D / (2^{2κ+2}(2^n−D+1)(2^n−αT/2^κ−D+1))`
/// with `1/α = (T²D/2^{2(κ+n)})^{1/3}`. Second: `3T/2^{κ+n/2+1}`.
pub fn efx_classical_bound(p: &BoundParams) -> Result<ClassicalBounds> {
    p.validate()?;
    let (n, kappa) = (p.n as f64, p.kappa as f64);
    let any_d = if p.t == 0.0 { 0.0 } else { sum_exp2(&[3f64.log2() + p.t.log2() - (kappa + n / 2.0 + 1.0)]) };
    let small_d = if p.t == 0.0 || p.d == 0.0 {
        0.0
    } else {
        let (lt, ld) = (p.t.log2(), p.d.log2());
        let inv_alpha = (2.0 * lt + ld - 2.0 * (kappa + n)) / 3.0;
        let second = 3f64.log2() + lt + ld.min(n / 2.0) - (kappa + n + 1.0);
        // αT/2^κ
        let spread = (lt - inv_alpha - kappa).exp2();
        match (log2_gap(n, p.d - 1.0), log2_gap(n, spread + p.d - 1.0)) {
            (Some(g1), Some(g2)) => {
                let third = 2.0 * (lt - inv_alpha) + ld - (2.0 * kappa + 2.0) - g1 - g2;
                sum_exp2(&[inv_alpha, second, third])
            }
            _ => 1.0,
        }
    };
    Ok(ClassicalBounds { small_d: clamp_unit(small_d), any_d: clamp_unit(any_d) })
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        1.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceFloors {
    /// Smallest D·T at which the first bound reaches the target, over
    /// D ≤ 2^{n/2}.
    pub dt_floor: f64,
    /// The D achieving `dt_floor`.
    pub d_at_dt_floor: f64,
    /// Smallest T at which the D-independent bound reaches the target.
    pub t_floor: f64,
}

/// Steps of the log₂ D grid used when minimizing D·T.
const FLOOR_D_STEPS: u32 = 64;
const BISECTION_ROUNDS: u32 = 200;

/// Inverts the two bounds: the least resources an adversary needs before
/// either bound allows advantage `target`.
pub fn efx_required_resources(n: u32, kappa: u32, target: f64) -> Result<ResourceFloors> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Unreachable(target));
    }
    let t_floor = target * (kappa as f64 + n as f64 / 2.0 + 1.0).exp2() / 3.0;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=FLOOR_D_STEPS {
        let ld = (n as f64 / 2.0) * i as f64 / FLOOR_D_STEPS as f64;
        let d = ld.exp2();
        let reach = |lt: f64| efx_classical_bound(&BoundParams::new(n, kappa, d, lt.exp2())).map(|b| b.small_d >= target);
        // keeps 2^T finite
        let (mut lo, mut hi) = (-1000.0f64, 1000.0f64);
        if !reach(hi)? {
            continue;
        }
        for _ in 0..BISECTION_ROUNDS {
            let mid = (lo + hi) / 2.0;
            if reach(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let dt = d * hi.exp2();
        if dt < best.0 {
            best = (dt, d);
        }
    }
    if best.0.is_infinite() {
        return Err(Error::Unreachable(target));
    }
    Ok(ResourceFloors { dt_floor: best.0, d_at_dt_floor: best.1, t_floor })
}

/// `min(1, 4q²/2^κ)`.
pub fn quantum_distinguish_bound(q: f64, kappa: u32) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(invalid("q", format!("{q} is negative")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(clamp_unit((2.0 + 2.0 * q.log2() - kappa as f64).exp2()))
}

/// Classical gates needed to emulate a quantum search of the given time.
pub fn extqsearch_classical_time(quantum_time: f64) -> Result<f64> {
    if !(quantum_time >= 1.0) {
        return Err(invalid("quantum_time", format!("{quantum_time} is below 1")));
    }
    Ok(quantum_time * quantum_time)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_offline_queries_means_no_advantage() {
        let b = efx_classical_bound(&BoundParams::new(8, 16, 16.0, 0.0)).unwrap();
        assert_eq!((b.small_d, b.any_d), (0.0, 0.0));
    }

    #[test]
    fn quantum_bound_examples() {
        assert_eq!(quantum_distinguish_bound(0.0, 8).unwrap(), 0.0);
        assert_eq!(quantum_distinguish_bound(4.0, 8).unwrap(), 0.25);
        assert_eq!(quantum_distinguish_bound(8.0, 8).unwrap(), 1.0);
        assert!(quantum_distinguish_bound(-1.0, 8).is_err());
    }

    #[test]
    fn emulation_squares() {
        assert_eq!(extqsearch_classical_time(1.0).unwrap(), 1.0);
        let (a, b) = (12.0, 40.0);
        assert_eq!(
            extqsearch_classical_time(a * b).unwrap(),
            extqsearch_classical_time(a).unwrap() * extqsearch_classical_time(b).unwrap()
        );
        assert!(extqsearch_classical_time(0.5).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(efx_classical_bound(&BoundParams::new(4, 4, -1.0, 1.0)).is_err());
        assert!(efx_classical_bound(&BoundParams::new(4, 4, 32.0, 1.0)).is_err());
        assert!(efx_required_resources(4, 4, 0.0).is_err());
        assert!(efx_required_resources(4, 4, 1.5).is_err());
    }
}
