//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use common::{dense_components, dense_sd_qp, ipm_solve, random_signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soilsd::synthetic::{generate_with, GeneratorParams};
use soilsd::{
    assemble, correct_daily, correct_power, decompose, filtered_rate_mae, loss_mae, scale_p95, soiling_rate,
    summary, DailySignal, PowerSeries, ScenarioConfig, SdConfig, SolveStatus, SolverSettings,
};
use soilsd_cli::{cmd_fleet, cmd_validate, AnalyzeOptions};

type Outcome = (bool, String);

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Raw daily energy: a performance index times a smooth irradiance-like envelope.
fn pseudo_energy(pi: &DailySignal<f64>) -> DailySignal<f64> {
    let values = pi
        .values()
        .iter()
        .enumerate()
        .map(|(t, v)| {
            let envelope = 30.0 * (1.0 + 0.35 * (std::f64::consts::TAU * (t as f64 - 172.0) / 365.0).cos());
            v.map(|p| p * envelope)
        })
        .collect();
    DailySignal::new(values).unwrap()
}

fn reconstruction_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let settings = SolverSettings::default();
    let mut worst = (0.0f64, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for i in 0..30 {
        let days = if i < 15 { 400 } else { 1095 };
        let sc = ScenarioConfig::preset(1 + (i % 6) as u8).unwrap();
        let params = GeneratorParams {
            missing_fraction: rng.gen_range(0.0..0.15),
            ..GeneratorParams::default()
        };
        let r = generate_with(&sc, &params, rng.gen(), days).unwrap();
        // alternate labeled inputs and percentile-scaled raw energy
        let (y, cfg) = if i % 2 == 0 {
            (r.pi.clone(), SdConfig::labeled())
        } else {
            (scale_p95(&pseudo_energy(&r.pi)).unwrap(), SdConfig::unlabeled())
        };
        let d = decompose(&y, &cfg, &settings).unwrap();
        let recon = y
            .known_values()
            .map(|(t, v)| (v - (d.x1[t] + d.x2[t] + d.x3[t] + d.x4[t])).abs())
            .fold(0.0, f64::max);
        let x4max = d.x4.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d2 = d.x3.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).fold(0.0, f64::max);
        let periodic = (cfg.period..days).all(|t| d.x2[t] == d.x2[t - cfg.period]);
        let secs = d.report.wall_time_secs;
        worst = (worst.0.max(recon), worst.1.max(x4max), worst.2.max(d2), worst.3.max(secs));
        let ok = d.report.status == SolveStatus::Optimal
            && recon <= 1e-9
            && x4max <= 1e-7
            && d.x3[0] == 0.0
            && d2 <= 1e-9
            && periodic
            && secs <= 30.0;
        if !ok {
            failures.push(format!("#{i} (T={days}, {:?})", d.report.status));
        }
    }
    (
        failures.is_empty(),
        format!(
            "30 signals; max recon {:.1e}, max x4 {:.1e}, max |D2 x3| {:.1e}, slowest solve {:.1}s{}",
            worst.0,
            worst.1,
            worst.2,
            worst.3,
            if failures.is_empty() { String::new() } else { format!("; failed {}", failures.join(", ")) }
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let cfg = SdConfig {
        period: 60,
        ..SdConfig::unlabeled()
    };
    let mut worst_obj = 0.0f64;
    let mut worst_comp = 0.0f64;
    let mut ok = true;
    for seed in 0..20 {
        let sig = random_signal(5000 + seed, 120, 60, 0.1);
        let d = decompose(&sig, &cfg, &SolverSettings::default()).unwrap();
        let reference = ipm_solve(&dense_sd_qp(sig.values(), &cfg));
        ok &= d.is_optimal() && reference.converged;
        worst_obj = worst_obj.max((d.objective - reference.objective).abs() / reference.objective.abs().max(1e-8));
        let (x2, x3, x4) = dense_components(&reference.z, 120, &cfg);
        let x4: Vec<f64> = x4.iter().map(|v| v.min(0.0)).collect();
        worst_comp = worst_comp
            .max(max_abs_diff(&d.x2, &x2))
            .max(max_abs_diff(&d.x3, &x3))
            .max(max_abs_diff(&d.x4, &x4));
    }
    ok &= worst_obj <= 1e-4 && worst_comp <= 1e-3;
    (
        ok,
        format!("20 instances vs dense interior point; worst objective rel {worst_obj:.1e}, worst component {worst_comp:.1e}"),
    )
}

fn injection_recovery() -> Outcome {
    let days = 730;
    let cleanings = [70usize, 190, 300, 450, 610];
    // realistic soiling: 0.1 %/day, the typical realized rate in the synthetic scenarios
    let rate = 1e-3;
    let slope = -1.5e-5;
    // tiled from one year so the truth is exactly periodic
    let profile: Vec<f64> = (0..365).map(|t| 0.02 * (std::f64::consts::TAU * t as f64 / 365.0).sin()).collect();
    let seasonal: Vec<f64> = (0..days).map(|t| profile[t % 365]).collect();
    let degradation: Vec<f64> = (0..days).map(|t| slope * t as f64).collect();
    let mut soil = vec![0.0; days];
    let mut since = 0usize;
    for (t, s) in soil.iter_mut().enumerate() {
        if cleanings.contains(&t) {
            since = 0;
        }
        *s = -rate * since as f64;
        since += 1;
    }
    let y: Vec<Option<f64>> = (0..days).map(|t| Some(1.0 + seasonal[t] + degradation[t] + soil[t])).collect();
    let sig = DailySignal::normalized(y).unwrap();
    let cfg = SdConfig::labeled();
    let d = decompose(&sig, &cfg, &SolverSettings::default()).unwrap();
    let mae = loss_mae(&soil, &d.x4).unwrap();
    let rel = ((d.degradation_slope - slope) / slope).abs();

    // objective of the injected truth, with the constant level folded into the seasonal term
    let problem = assemble(&sig, &cfg).unwrap();
    let x2: Vec<f64> = seasonal.iter().map(|s| 1.0 + s).collect();
    let truth_obj = problem.objective(&vec![0.0; days], &x2, &degradation, &soil);
    (
        d.is_optimal() && mae <= 5e-3 && rel <= 0.1,
        format!(
            "loss MAE {mae:.2e} (≤ 5e-3), slope {:.3e} vs {slope:.1e} ({:.0}% off, ≤ 10%); objective at estimate {:.3} vs at truth {truth_obj:.3}",
            d.degradation_slope,
            100.0 * rel,
            d.objective
        ),
    )
}

fn synthetic_study() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let rows = cmd_validate(10, 2024, 730, tmp.path(), &AnalyzeOptions::default(), jobs()).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let mut loss: Vec<f64> = rows.iter().map(|r| r.loss_mae).collect();
    let mut frate: Vec<f64> = rows.iter().map(|r| r.filtered_rate_mae).collect();
    let mut loss1: Vec<f64> = rows.iter().filter(|r| r.scenario == 1).map(|r| r.loss_mae).collect();
    let mut frate1: Vec<f64> = rows.iter().filter(|r| r.scenario == 1).map(|r| r.filtered_rate_mae).collect();
    let all_optimal = rows.iter().all(|r| r.status.is_optimal());
    let (ml, mf) = (median(&mut loss), median(&mut frate));
    (
        rows.len() == 60 && all_optimal && ml <= 0.02 && mf <= 1e-3 && secs <= 1800.0,
        format!(
            "60 solves in {secs:.0}s; median loss MAE {ml:.4}, median filtered rate MAE {mf:.2e}; scenario 1 medians {:.4} / {:.2e}",
            median(&mut loss1),
            median(&mut frate1)
        ),
    )
}

fn labeled_vs_unlabeled() -> Outcome {
    let sc = ScenarioConfig::preset(1).unwrap();
    let r = generate_with(&sc, &GeneratorParams::default(), 17, 730).unwrap();
    let settings = SolverSettings::default();
    let pi = decompose(&r.pi, &SdConfig::labeled(), &settings).unwrap();
    let energy = scale_p95(&pseudo_energy(&r.pi)).unwrap();
    let en = decompose(&energy, &SdConfig::unlabeled(), &settings).unwrap();
    let agree = loss_mae(&pi.x4, &en.x4).unwrap();
    (
        pi.is_optimal() && en.is_optimal() && agree <= 0.05,
        format!(
            "PI vs pseudo-energy soiling loss MAE {agree:.4} (≤ 0.05); vs truth {:.4} / {:.4}",
            loss_mae(&r.true_soiling, &pi.x4).unwrap(),
            loss_mae(&r.true_soiling, &en.x4).unwrap()
        ),
    )
}

fn metric_examples() -> Outcome {
    let mut checks: Vec<(&str, bool)> = vec![("loss identity", loss_mae(&[0.0, -0.3, -0.1], &[0.0, -0.3, -0.1]).unwrap() == 0.0)];
    checks.push(("loss mean", loss_mae(&[0.0, -0.02], &[0.0, -0.01]).unwrap() == 0.005));
    checks.push(("loss length", loss_mae(&[0.0], &[0.0, 0.0]).is_err()));
    checks.push((
        "rate definition",
        soiling_rate(&[0.0, -0.01, -0.02, 0.0]).unwrap() == vec![-0.01, -0.01, 0.02],
    ));
    checks.push(("rate constant", soiling_rate(&[0.4; 5]).unwrap() == vec![0.0; 4]));
    checks.push((
        "rate linear",
        soiling_rate(&(0..6).map(|t| -0.25 * t as f64).collect::<Vec<_>>()).unwrap() == vec![-0.25; 5],
    ));
    checks.push(("rate short", soiling_rate(&[0.0]).is_err()));
    // true rates [−0.01, −0.01, 0.02], estimated rates [−0.012, −0.008, 0.02]
    let f = filtered_rate_mae(&[0.0, -0.01, -0.02, 0.0], &[0.0, -0.012, -0.02, 0.0]).unwrap();
    checks.push(("filtered mask", f.mask == vec![true, true, false]));
    checks.push(("filtered value", (f.mae - 0.002f64).abs() <= 1e-15));
    let same = filtered_rate_mae(&[0.0, -0.01, -0.02, 0.0], &[0.0, -0.01, -0.02, 0.0]).unwrap();
    checks.push(("filtered identity", same.mae == 0.0));
    let flat = filtered_rate_mae(&[0.0; 4], &[0.0; 4]).unwrap();
    checks.push(("filtered empty", flat.mae == 0.0 && flat.is_empty_mask()));

    let sig = DailySignal::new(vec![Some(9.0), None, Some(4.0)]).unwrap();
    checks.push(("correct identity", correct_daily(&sig, &[0.0; 3]).unwrap().values() == sig.values()));
    let c = correct_daily(&sig, &[-0.1, -0.1, -0.2]).unwrap();
    checks.push(("correct 9 / 0.9", c.get(0) == Some(10.0) && c.get(1).is_none()));
    checks.push(("correct guard", correct_daily(&sig, &[-0.96, 0.0, 0.0]).is_err()));

    let t0 = chrono::NaiveDate::from_ymd_opt(2022, 5, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let stamps: Vec<_> = (0..8).map(|k| t0 + chrono::Duration::hours(6 * k)).collect();
    let power = PowerSeries::new(stamps, (0..8).map(|k| Some(1.0 + k as f64)).collect()).unwrap();
    let cp = correct_power(&power, &[-0.5, -0.2]).unwrap();
    checks.push(("correct broadcast", cp.values()[3] == Some(8.0) && cp.values()[4] == Some(5.0 / 0.8)));

    // round trip on a synthetic realization
    let r = generate_with(&ScenarioConfig::preset(5).unwrap(), &GeneratorParams::default(), 3, 730).unwrap();
    let clean = r.pi.clone();
    let soiled = DailySignal::normalized(
        clean.values().iter().zip(&r.true_soiling).map(|(v, s)| v.map(|v| v * (1.0 + s))).collect(),
    )
    .unwrap();
    let back = correct_daily(&soiled, &r.true_soiling).unwrap();
    let worst_rt = clean
        .known_values()
        .map(|(t, v)| (back.get(t).unwrap() - v).abs() / v.abs())
        .fold(0.0, f64::max);
    checks.push(("round trip", worst_rt <= 1e-12));

    // summary totals on a solved decomposition with the soiling replaced by constants
    let y = DailySignal::normalized(vec![Some(1.0); 400]).unwrap();
    let mut d = decompose(&y, &SdConfig::labeled(), &SolverSettings::default()).unwrap();
    d.x4 = vec![0.0; 400];
    checks.push(("total loss zero", summary(&d, &y, None).unwrap().total_energy_loss_fraction == 0.0));
    d.x4 = vec![-0.1; 400];
    checks.push((
        "total loss constant",
        (summary(&d, &y, None).unwrap().total_energy_loss_fraction - 0.1).abs() <= 1e-12,
    ));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    (
        failed.is_empty(),
        format!(
            "{} checks, round-trip rel error {worst_rt:.1e}{}",
            checks.len(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

fn data_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "manifest.json") {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let opts = AnalyzeOptions::default();
    let (v1, v2) = (tmp.path().join("v1"), tmp.path().join("v2"));
    cmd_validate(1, 99, 400, &v1, &opts, 1).unwrap();
    cmd_validate(1, 99, 400, &v2, &opts, jobs().max(2)).unwrap();
    let validate_same = data_files(&v1) == data_files(&v2);

    let sites = tmp.path().join("sites");
    fs::create_dir(&sites).unwrap();
    for k in 0..4u64 {
        let r = generate_with(&ScenarioConfig::preset(1 + k as u8).unwrap(), &GeneratorParams::default(), k, 400).unwrap();
        let e = pseudo_energy(&r.pi);
        let mut text = String::from("date,energy\n");
        for t in 0..e.len() {
            let date = r.pi.date_of(t).unwrap();
            text.push_str(&format!("{date},{}\n", e.get(t).map(|v| v.to_string()).unwrap_or_default()));
        }
        fs::write(sites.join(format!("site{k}.csv")), text).unwrap();
    }
    let (f1, f2) = (tmp.path().join("f1"), tmp.path().join("f2"));
    cmd_fleet(&sites, &f1, &opts, 1, 0.05).unwrap();
    cmd_fleet(&sites, &f2, &opts, jobs().max(2), 0.05).unwrap();
    let fleet_files = data_files(&f1);
    let fleet_same = fleet_files == data_files(&f2);
    (
        validate_same && fleet_same,
        format!(
            "validate rerun identical: {validate_same}; fleet rerun identical over {} files: {fleet_same}",
            fleet_files.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("reconstruction and feasibility", reconstruction_suite),
        ("solver oracle equivalence", oracle_equivalence),
        ("known-component recovery", injection_recovery),
        ("synthetic study", synthetic_study),
        ("labeled vs unlabeled consistency", labeled_vs_unlabeled),
        ("metric examples", metric_examples),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = match std::panic::catch_unwind(run) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({detail}) [{:.0}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
