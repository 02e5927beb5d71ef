use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{config_error, run_attack, search_bits, AttackKind, ExperimentConfig, ExperimentReport};
use crate::ciphers::ConstructionKind;
use crate::classical::CurveKind;
use crate::error::{Error, Result};
use crate::offline::fidelity_bound;
use crate::qsim::grover_iterations;

/// Binomial standard deviations of slack allowed when flagging a point
/// against the known-plaintext fidelity bound.
pub const FIDELITY_SIGMAS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "u")]
    U,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "D")]
    D,
    #[serde(rename = "n")]
    N,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::U => "u",
            SweepAxis::Alpha => "alpha",
            SweepAxis::D => "D",
            SweepAxis::N => "n",
        }
    }

    /// The config for one point of the axis.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut config = base.clone();
        let integer = || -> Result<u64> {
            if value >= 0.0 && value.fract() == 0.0 && value < u32::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(config_error(self.name(), format!("{value} is not a nonnegative integer")))
            }
        };
        match self {
            SweepAxis::U => config.u = Some(integer()? as u32),
            SweepAxis::Alpha => config.alpha = value,
            SweepAxis::D => config.d = Some(integer()?),
            SweepAxis::N => config.n = integer()? as u32,
        }
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "u" => Ok(SweepAxis::U),
            "alpha" => Ok(SweepAxis::Alpha),
            "D" | "d" => Ok(SweepAxis::D),
            "n" => Ok(SweepAxis::N),
            other => Err(config_error("axis", format!("unknown axis `{other}`, expected u, alpha, D or n"))),
        }
    }
}

/// One point of a sweep. Totals equal the sums over the point's trial
/// reports; means divide them by `trials`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub attack: String,
    pub construction: ConstructionKind,
    pub n: u32,
    pub kappa: u32,
    pub u: u32,
    pub c: usize,
    /// Classical query budget; empty for the quantum attacks, whose D is
    /// in `mean_D`.
    #[serde(rename = "D")]
    pub d: Option<u64>,
    pub alpha: f64,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    #[serde(rename = "total_D")]
    pub total_online_queries: u64,
    pub total_quantum_queries: u64,
    #[serde(rename = "total_T")]
    pub total_offline_evals: u64,
    pub total_iterations: u64,
    pub total_time_units: u64,
    pub total_tradeoff_time: u64,
    #[serde(rename = "mean_D")]
    pub mean_online_queries: f64,
    #[serde(rename = "mean_T")]
    pub mean_offline_evals: f64,
    pub mean_iterations: f64,
    pub mean_time_units: f64,
    /// `⌊(π/4)/arcsin 2^{−g/2}⌋` over the config's guess space.
    pub formula_iterations: Option<u64>,
    #[serde(rename = "log2D_over_n")]
    pub log2_d_over_n: Option<f64>,
    #[serde(rename = "log2T_over_n")]
    pub log2_t_over_n: Option<f64>,
    #[serde(rename = "reference_log2T_over_n")]
    pub reference_log2_t_over_n: Option<f64>,
    pub fidelity_bound: Option<f64>,
    /// Success rate at α = 0 with the same config.
    pub baseline_rate: Option<f64>,
    /// `success_rate + 3σ ≥ fidelity_bound · baseline_rate`.
    pub meets_fidelity: Option<bool>,
}

const HEADER: [&str; 30] = [
    "axis",
    "value",
    "attack",
    "construction",
    "n",
    "kappa",
    "u",
    "c",
    "D",
    "alpha",
    "trials",
    "successes",
    "success_rate",
    "total_D",
    "total_quantum_queries",
    "total_T",
    "total_iterations",
    "total_time_units",
    "total_tradeoff_time",
    "mean_D",
    "mean_T",
    "mean_iterations",
    "mean_time_units",
    "formula_iterations",
    "log2D_over_n",
    "log2T_over_n",
    "reference_log2T_over_n",
    "fidelity_bound",
    "baseline_rate",
    "meets_fidelity",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepRow {
    fn from_report(axis: SweepAxis, value: f64, report: &ExperimentReport) -> Self {
        let config = &report.config;
        let s = &report.summary;
        let n = config.n as f64;
        let measured = |total: u64| (s.trials > 0 && total > 0).then(|| s.mean(total).log2() / n);
        let curve = match (config.attack, config.construction) {
            (AttackKind::OfflineSimon, _) => Some(CurveKind::QuantumQ1),
            (AttackKind::GroverMeetsSimon | AttackKind::EmQ2, _) => Some(CurveKind::QuantumQ2),
            (AttackKind::GuessAndEm, ConstructionKind::Fx | ConstructionKind::Em) => Some(CurveKind::ClassicalFx),
            (AttackKind::GuessAndEm, _) => Some(CurveKind::ClassicalEfx),
            (AttackKind::Exhaustive, _) => None,
        };
        let log2_d = measured(s.total_online_queries);
        let reference = curve.zip(log2_d).map(|(k, ld)| k.log2_time(config.n, config.effective_kappa(), ld * n) / n);
        let formula_iterations = search_bits(config).map(|g| {
            if g == 0 {
                0
            } else {
                grover_iterations((-(g as f64)).exp2()).expect("2^-g lies in (0, 1]")
            }
        });
        Self {
            axis,
            value,
            attack: config.attack.name().into(),
            construction: config.construction,
            n: config.n,
            kappa: config.kappa,
            u: config.u(),
            c: config.c(),
            d: config.attack.is_classical().then(|| config.d()),
            alpha: config.alpha,
            trials: s.trials,
            successes: s.successes,
            success_rate: s.success_rate,
            total_online_queries: s.total_online_queries,
            total_quantum_queries: s.total_quantum_queries,
            total_offline_evals: s.total_offline_evals,
            total_iterations: s.total_iterations,
            total_time_units: s.total_time_units,
            total_tradeoff_time: s.total_tradeoff_time,
            mean_online_queries: s.mean(s.total_online_queries),
            mean_offline_evals: s.mean(s.total_offline_evals),
            mean_iterations: s.mean(s.total_iterations),
            mean_time_units: s.mean(s.total_time_units),
            formula_iterations,
            log2_d_over_n: log2_d,
            log2_t_over_n: measured(s.total_tradeoff_time),
            reference_log2_t_over_n: reference,
            fidelity_bound: None,
            baseline_rate: None,
            meets_fidelity: None,
        }
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.axis.to_string(),
            self.value.to_string(),
            format!("measured-{}", self.attack),
            self.construction.to_string(),
            self.n.to_string(),
            self.kappa.to_string(),
            self.u.to_string(),
            self.c.to_string(),
            opt(self.d),
            self.alpha.to_string(),
            self.trials.to_string(),
            self.successes.to_string(),
            self.success_rate.to_string(),
            self.total_online_queries.to_string(),
            self.total_quantum_queries.to_string(),
            self.total_offline_evals.to_string(),
            self.total_iterations.to_string(),
            self.total_time_units.to_string(),
            self.total_tradeoff_time.to_string(),
            self.mean_online_queries.to_string(),
            self.mean_offline_evals.to_string(),
            self.mean_iterations.to_string(),
            self.mean_time_units.to_string(),
            opt(self.formula_iterations),
            opt(self.log2_d_over_n),
            opt(self.log2_t_over_n),
            opt(self.reference_log2_t_over_n),
            opt(self.fidelity_bound),
            opt(self.baseline_rate),
            opt(self.meets_fidelity),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// The full report behind each row, in row order.
    pub reports: Vec<ExperimentReport>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.into());
        w.write_record(HEADER).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.cells()).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

/// Runs `config` once per value of `axis`. Every point is validated before
/// any of them runs; the first invalid one aborts with its index. On the
/// alpha axis each row is compared with the α = 0 rate of the same config.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepTable> {
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            axis.apply(config, v).map_err(|e| config_error(&format!("values[{i}]"), format!("{} = {v}: {e}", axis)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = SweepTable { axis, rows: Vec::new(), reports: Vec::new() };
    for (&value, point) in values.iter().zip(&configs) {
        let report = run_attack(point)?;
        table.rows.push(SweepRow::from_report(axis, value, &report));
        table.reports.push(report);
    }
    if axis == SweepAxis::Alpha && !values.is_empty() {
        let baseline = match table.rows.iter().position(|r| r.alpha == 0.0) {
            Some(i) => table.rows[i].success_rate,
            None => run_attack(&axis.apply(config, 0.0)?)?.summary.success_rate,
        };
        for row in &mut table.rows {
            let bound = fidelity_bound(row.c, row.alpha)?;
            let target = bound * baseline;
            let sigma = (target * (1.0 - target) / row.trials.max(1) as f64).sqrt();
            row.fidelity_bound = Some(bound);
            row.baseline_rate = Some(baseline);
            row.meets_fidelity = Some(row.success_rate + FIDELITY_SIGMAS * sigma >= target);
        }
    }
    Ok(table)
}
