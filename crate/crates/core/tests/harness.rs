use std::f64::consts::FRAC_PI_4;
use std::process::Command;

use keyext::ciphers::ConstructionKind;
use keyext::classical::{tradeoff_curve, write_curve_csv, CurveKind, PointSource};
use keyext::harness::{
    extent_of, plot_curves, read_series, run_attack, sweep, verify, AttackKind, ExperimentConfig, PlotStyle, SweepAxis,
    TrialReport, VerifyOptions, VerifySuite,
};
use keyext::offline::AttackMode;
use keyext::Error;

fn efx_config(trials: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(AttackKind::OfflineSimon, ConstructionKind::Efx, 4, 4);
    c.u = Some(2);
    c.c = Some(6);
    c.trials = trials;
    c.seed = 21;
    c
}

#[test]
fn reports_are_byte_identical() {
    let config = efx_config(12);
    let a = run_attack(&config).unwrap().to_json().unwrap();
    let b = run_attack(&config).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let mut other = config.clone();
    other.seed = 22;
    assert_ne!(a, run_attack(&other).unwrap().to_json().unwrap());
}

#[test]
fn zero_trials_give_an_empty_report() {
    let report = run_attack(&efx_config(0)).unwrap();
    assert!(report.trials.is_empty());
    let s = &report.summary;
    assert_eq!((s.trials, s.successes, s.total_online_queries, s.total_offline_evals, s.total_time_units), (0, 0, 0, 0, 0));
    assert_eq!(s.success_rate, 0.0);
}

#[test]
fn exact_cap_is_rejected_up_front() {
    let mut config = efx_config(1000);
    config.mode = AttackMode::Exact;
    // κ + n − u + c(u + n) = 6 + 36 qubits
    let err = run_attack(&config).unwrap_err();
    assert!(matches!(err, Error::Config { ref field, .. } if field == "mode"), "{err}");
    let text = "attack = \"offline-simon\"\nconstruction = \"EFX\"\nn = 4\nkappa = 4\nu = 2\nc = 6\nmode = \"EXACT\"\n";
    assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config { .. })));
}

#[test]
fn toml_round_trip() {
    let text = "attack = \"gms\"\nconstruction = \"2xor\"\nn = 4\nkappa = 4\nc = 8\ntrials = 3\nseed = 5\n";
    let config = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(config.attack, AttackKind::GroverMeetsSimon);
    assert_eq!(config.construction, ConstructionKind::TwoXor);
    assert_eq!((config.u(), config.c()), (4, 8));
    let again = ExperimentConfig::from_toml(&toml::to_string(&config).unwrap()).unwrap();
    assert_eq!(config, again);
}

#[test]
fn u_sweep_follows_the_iteration_formula() {
    let config = efx_config(8);
    let values: Vec<f64> = (0..=4).map(f64::from).collect();
    let table = sweep(&config, SweepAxis::U, &values).unwrap();
    for (row, u) in table.rows.iter().zip(0u32..) {
        let g = (4 + 4 - u) as f64;
        let expected = (FRAC_PI_4 / (-g / 2.0).exp2().asin()).floor() as u64;
        assert_eq!(row.formula_iterations, Some(expected), "u={u}");
        assert_eq!(row.mean_iterations, expected as f64, "u={u}");
        assert_eq!(row.mean_online_queries, (1u64 << u) as f64);
    }
}

#[test]
fn sweep_totals_match_trial_reports() {
    let table = sweep(&efx_config(6), SweepAxis::U, &[2.0, 4.0]).unwrap();
    for (row, report) in table.rows.iter().zip(&table.reports) {
        let reports: Vec<&TrialReport> = report.trials.iter().map(|t| &t.report).collect();
        let sum = |f: fn(&TrialReport) -> u64| reports.iter().map(|r| f(r)).sum::<u64>();
        assert_eq!(row.total_online_queries, sum(|r| r.online_queries()));
        assert_eq!(row.total_offline_evals, sum(|r| r.offline_evals()));
        assert_eq!(row.total_iterations, sum(|r| r.iterations()));
        assert_eq!(row.total_time_units, sum(|r| r.time_units()));
        assert_eq!(row.successes, reports.iter().filter(|r| r.success()).count() as u64);
    }
    let csv = table.to_csv().unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "total_T").unwrap();
    for (record, row) in reader.records().zip(&table.rows) {
        assert_eq!(record.unwrap()[col].parse::<u64>().unwrap(), row.total_offline_evals);
    }
}

#[test]
fn alpha_sweep_flags_the_fidelity_bound() {
    let mut config = efx_config(100);
    config.u = Some(4);
    let table = sweep(&config, SweepAxis::Alpha, &[0.0, 1.0 / 64.0, 1.0 / 32.0]).unwrap();
    for row in &table.rows {
        let (bound, baseline) = (row.fidelity_bound.unwrap(), row.baseline_rate.unwrap());
        let expected = (1.0 - (2.0 * 6.0 * row.alpha).sqrt()).powi(2);
        assert!((bound - expected).abs() < 1e-12);
        assert_eq!(baseline, table.rows[0].success_rate);
        assert_eq!(row.meets_fidelity, Some(true), "alpha {}", row.alpha);
    }
    // 1/64 of 16 inputs rounds to none missing, 1/32 to one
    assert!(table.reports[1].trials.iter().all(|t| t.database_overlap == Some(1.0)));
    // unless the missing output happens to equal the placeholder 0
    let expected = (1.0 - 1.0 / 16.0f64).powi(6);
    for record in &table.reports[2].trials {
        let overlap = record.database_overlap.unwrap();
        assert!((overlap - expected).abs() < 1e-12 || overlap == 1.0, "{overlap}");
    }
    assert!(table.reports[2].trials.iter().any(|t| t.database_overlap != Some(1.0)));
}

#[test]
fn empty_and_invalid_sweeps() {
    let table = sweep(&efx_config(1), SweepAxis::U, &[]).unwrap();
    let csv = table.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("axis,value,attack"));
    let err = sweep(&efx_config(1), SweepAxis::U, &[1.0, 2.0, 9.0]).unwrap_err();
    assert!(matches!(err, Error::Config { ref field, .. } if field == "values[2]"), "{err}");
}

#[test]
fn classical_and_q2_configs_run() {
    let mut config = ExperimentConfig::new(AttackKind::GuessAndEm, ConstructionKind::Efx, 4, 4);
    config.d = Some(8);
    config.trials = 10;
    let report = run_attack(&config).unwrap();
    assert!(report.trials.iter().all(|t| t.report.online_queries() == 8));
    assert!(report.summary.successes >= 8);

    let mut config = ExperimentConfig::new(AttackKind::EmQ2, ConstructionKind::Em, 6, 0);
    config.c = Some(10);
    config.trials = 20;
    let report = run_attack(&config).unwrap();
    assert!(report.trials.iter().all(|t| t.report.quantum_queries() == 10));
    assert!(report.summary.successes >= 19);
}

fn fig4_series() -> Vec<keyext::harness::Series> {
    let n = 8;
    let grid: Vec<f64> = (0..=16).map(|i| i as f64 / 2.0).collect();
    let mut points = Vec::new();
    for kind in CurveKind::ALL {
        points.extend(tradeoff_curve(kind, n, 2 * n, &grid).unwrap());
    }
    let mut csv = Vec::new();
    write_curve_csv(&points, n, &mut csv).unwrap();
    read_series(&String::from_utf8(csv).unwrap()).unwrap()
}

#[test]
fn fig4_polylines() {
    let series = fig4_series();
    let on = |attack: &str, pts: &[(f64, f64)]| {
        let s = series.iter().find(|s| s.attack == attack).unwrap();
        assert_eq!(s.source, PointSource::Formula);
        for p in pts {
            assert!(s.points.contains(p), "{attack} misses {p:?}");
        }
    };
    on("classical-efx", &[(0.0, 3.0), (0.5, 2.5), (1.0, 2.5)]);
    on("quantum-q1", &[(0.0, 1.5), (1.0, 1.0)]);
}

#[test]
fn svg_polylines_map_back_to_the_data() {
    let n = 8;
    let points = tradeoff_curve(CurveKind::ClassicalEfx, n, 2 * n, &[0.0, 4.0, 8.0]).unwrap();
    let mut csv = Vec::new();
    write_curve_csv(&points, n, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    let style = PlotStyle::default();
    let svg = plot_curves(&csv, &style).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let extent = extent_of(&read_series(&csv).unwrap());
    let line = svg.lines().find(|l| l.contains(r#"data-attack="classical-efx""#)).unwrap();
    let coords = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
    let data: Vec<(f64, f64)> = coords
        .split(' ')
        .map(|pair| {
            let (x, y) = pair.split_once(',').unwrap();
            style.unproject(&extent, x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    for (got, want) in data.iter().zip([(0.0, 3.0), (0.5, 2.5), (1.0, 2.5)]) {
        assert!((got.0 - want.0).abs() < 1e-3 && (got.1 - want.1).abs() < 1e-3, "{got:?} vs {want:?}");
    }
}

#[test]
fn plot_edge_cases() {
    let svg = plot_curves("", &PlotStyle::default()).unwrap();
    assert!(svg.contains("class=\"axes\"") && !svg.contains("<polyline"));
    let svg = plot_curves("attack,log2D_over_n,log2T_over_n,measured_or_formula\n", &PlotStyle::default()).unwrap();
    assert!(!svg.contains("<polyline"));
    assert!(matches!(plot_curves("a,b\n1,2\n", &PlotStyle::default()), Err(Error::Schema(_))));
}

#[test]
fn verify_gate() {
    let summary = verify(&[], &VerifyOptions::default()).unwrap();
    assert!(summary.passed);
    assert_eq!(summary.suites.len(), 4);

    let only = verify(&[VerifySuite::Unitarity], &VerifyOptions::default()).unwrap();
    assert_eq!(only.suites.iter().map(|s| s.suite).collect::<Vec<_>>(), vec![VerifySuite::Unitarity]);

    let faulty = VerifyOptions { hadamard_scale: Some(0.7), ..Default::default() };
    let broken = verify(&[VerifySuite::Unitarity, VerifySuite::Orthogonality], &faulty).unwrap();
    assert!(!broken.passed);
    assert!(!broken.suites[0].passed && broken.suites[0].failed > 0);
    assert!(broken.suites[1].passed);
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_keyext")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "attack = \"offline-simon\"\nconstruction = \"EFX\"\nn = 4\nkappa = 4\nu = 3\nc = 7\ntrials = 4\n").unwrap();
    let hopeless = dir.path().join("hopeless.toml");
    // with u = 0 the test has no input bits to find a period on
    std::fs::write(&hopeless, "attack = \"offline-simon\"\nconstruction = \"EFX\"\nn = 4\nkappa = 4\nu = 0\nc = 7\ntrials = 2\n").unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "attack = \"offline-simon\"\nconstruction = \"EFX\"\nn = 40\n").unwrap();

    let p = |p: &std::path::Path| p.to_str().unwrap().to_string();
    let (code, json) = cli(&["attack", "--config", &p(&good), "--seed", "3"]);
    assert_eq!(code, 0);
    let (_, again) = cli(&["attack", "--config", &p(&good), "--seed", "3"]);
    assert_eq!(json, again);
    assert_eq!(cli(&["attack", "--config", &p(&hopeless)]).0, 1);
    assert_eq!(cli(&["attack", "--config", &p(&bad)]).0, 2);
    assert_eq!(cli(&["attack", "--config", &p(&dir.path().join("missing.toml"))]).0, 2);

    let (code, csv) = cli(&["sweep", "--config", &p(&good), "--axis", "u", "--values", "3", "4", "--out", "-"]);
    assert_eq!(code, 0);
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(cli(&["sweep", "--config", &p(&good), "--axis", "q", "--values", "1"]).0, 2);

    let curves = dir.path().join("curves.csv");
    let svg = dir.path().join("curves.svg");
    assert_eq!(cli(&["bounds", "--n", "8", "--kappa", "16", "--out", &p(&curves)]).0, 0);
    assert_eq!(cli(&["plot", "--in", &p(&curves), "--out", &p(&svg)]).0, 0);
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 4);

    let (code, summary) = cli(&["verify", "--suite", "unitarity", "bounds-grid"]);
    assert_eq!(code, 0);
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["suites"].as_array().unwrap().len(), 2);
    assert_eq!(cli(&["verify", "--suite", "nope"]).0, 2);
}
