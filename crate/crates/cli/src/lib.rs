//! Command implementations behind the `soilsd` binary.
//!
//! Every command writes plain CSV/JSON data files plus a `manifest.json`
//! describing the run. Data files are byte-identical across reruns with the
//! same inputs, configuration and seed; only the manifest carries wall-clock
//! fields.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use soilsd::io::{read_input_path, InputData};
use soilsd::synthetic::{generate, SyntheticRealization};
use soilsd::{
    assemble, correct_daily, decompose, filtered_rate_mae, integrate_daily, loss_mae, rate_mae, reformulate,
    scale_p95, scenario_suite, summary, DailySignal, Decomposition, ScenarioConfig, SdConfig, SdConfigFile,
    SolveReport, SolveStatus, SolverSettings,
};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "SOILSD_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("solver did not reach optimality: {0}")]
    NonOptimal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::NonOptimal(_) => EXIT_SOLVER,
        }
    }
}

impl From<soilsd::Error> for CliError {
    fn from(e: soilsd::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Options shared by the analysis commands.
#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Explicit config file; falls back to `$SOILSD_CONFIG`, then built-in defaults.
    pub config: Option<PathBuf>,
    /// Input is a performance index (τ1 = 0.5, no percentile scaling).
    pub labeled: bool,
    /// Overrides the residual quantile from the config.
    pub tau: Option<f64>,
    /// CSV `date,good` of day-level quality flags; days flagged 0 become missing.
    pub mask: Option<PathBuf>,
    /// Also write the assembled QP in the text dump format.
    pub dump_qp: bool,
}

impl AnalyzeOptions {
    pub fn resolve_config(&self) -> CliResult<SdConfig> {
        let path = self
            .config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let file = match path {
            Some(p) => SdConfigFile::load(&p)?,
            None => SdConfigFile::default(),
        };
        let mut cfg = file.resolve(self.labeled)?;
        if let Some(tau) = self.tau {
            cfg.tau1 = tau;
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

/// Solver summary recorded per site or realization. Wall time is kept out of the
/// data files and appears only here.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub name: String,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub polished: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub wall_time_secs: f64,
}

impl SolveSummary {
    fn new(name: &str, r: &SolveReport) -> Self {
        Self {
            name: name.to_string(),
            status: r.status,
            iterations: r.iterations,
            objective: r.objective,
            polished: r.polished,
            primal_residual: r.primal_residual,
            dual_residual: r.dual_residual,
            wall_time_secs: r.wall_time_secs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub created_utc: String,
    pub inputs: Vec<String>,
    pub config: Option<SdConfig>,
    pub solver: SolverSettings,
    pub seeds: Vec<u64>,
    pub parameters: serde_json::Value,
    pub solves: Vec<SolveSummary>,
    pub outputs: Vec<String>,
    /// False when any solve ended non-optimal or any site failed.
    pub complete: bool,
    pub failures: Vec<String>,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            inputs: Vec::new(),
            config: None,
            solver: SolverSettings::default(),
            seeds: Vec::new(),
            parameters: serde_json::Value::Null,
            solves: Vec::new(),
            outputs: Vec::new(),
            complete: true,
            failures: Vec::new(),
        }
    }

    fn write(mut self, out: &Path) -> CliResult<Self> {
        let path = out.join("manifest.json");
        self.outputs.push(path.display().to_string());
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Input(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(self)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn date_label(signal: &DailySignal<f64>, t: usize) -> String {
    match signal.date_of(t) {
        Some(d) => d.format("%Y-%m-%d").to_string(),
        None => t.to_string(),
    }
}

fn write_text(path: &Path, text: &str, outputs: &mut Vec<String>) -> CliResult<()> {
    fs::write(path, text)?;
    outputs.push(path.display().to_string());
    Ok(())
}

fn read_mask(path: &Path, signal: &DailySignal<f64>) -> CliResult<Vec<bool>> {
    let mut good = vec![true; signal.len()];
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let (d, flag) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""));
        let t = match signal.start_date() {
            Some(start) => {
                let date = chrono::NaiveDate::parse_from_str(d, "%Y-%m-%d")
                    .map_err(|_| CliError::Input(format!("{}: bad date `{d}`", path.display())))?;
                (date - start).num_days()
            }
            None => d.parse().map_err(|_| CliError::Input(format!("{}: bad day `{d}`", path.display())))?,
        };
        let ok = match flag {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(CliError::Input(format!("{}: bad flag `{flag}`", path.display()))),
        };
        if t >= 0 && (t as usize) < good.len() {
            good[t as usize] = ok;
        }
    }
    Ok(good)
}

/// Reads an input file and returns the prepared signal together with the
/// unscaled daily signal it came from.
pub fn prepare(input: &Path, opts: &AnalyzeOptions) -> CliResult<(DailySignal<f64>, DailySignal<f64>)> {
    let daily = match read_input_path(input)? {
        InputData::Power(p) => integrate_daily(&p)?,
        InputData::Daily(d) => d,
    };
    let daily = match &opts.mask {
        Some(m) => soilsd::apply_quality_mask(&daily, &read_mask(m, &daily)?)?,
        None => daily,
    };
    let prepared = if opts.labeled {
        let pi = DailySignal::normalized(daily.values().to_vec())?;
        match daily.start_date() {
            Some(s) => pi.with_start(s),
            None => pi,
        }
    } else {
        scale_p95(&daily)?
    };
    Ok((daily, prepared))
}

/// Result of a single-site analysis.
#[derive(Debug, Clone)]
pub struct SiteOutcome {
    pub decomposition: Decomposition<f64>,
    pub report: soilsd::SoilingReport,
    pub manifest: RunManifest,
}

/// Decomposes one input file and writes its outputs into `out`.
///
/// A non-optimal solve still writes every file (flagged incomplete in the
/// manifest) and then returns [`CliError::NonOptimal`].
pub fn cmd_analyze(input: &Path, out: &Path, opts: &AnalyzeOptions) -> CliResult<SiteOutcome> {
    let cfg = opts.resolve_config()?;
    let settings = SolverSettings::default();
    let (daily, y) = prepare(input, opts)?;
    fs::create_dir_all(out)?;
    let mut m = RunManifest::new("analyze");
    m.inputs.push(input.display().to_string());
    if let Some(p) = &opts.mask {
        m.inputs.push(p.display().to_string());
    }
    m.config = Some(cfg);
    m.solver = settings;
    m.parameters = serde_json::json!({ "labeled": opts.labeled, "scale": y.scale() });

    if opts.dump_qp {
        let (qp, _) = reformulate(&assemble(&y, &cfg)?);
        let path = out.join("qp.txt");
        qp.write_dump(fs::File::create(&path)?)?;
        m.outputs.push(path.display().to_string());
    }

    let d = decompose(&y, &cfg, &settings)?;
    let report = summary(&d, &y, None)?;
    m.solves.push(SolveSummary::new(&input.display().to_string(), &d.report));

    let mut comp = String::from("date,y,x1,x2,x3,x4\n");
    for t in 0..y.len() {
        let _ = writeln!(
            comp,
            "{},{},{},{},{},{}",
            date_label(&y, t),
            fmt_opt(y.get(t)),
            d.x1[t],
            d.x2[t],
            d.x3[t],
            d.x4[t]
        );
    }
    write_text(&out.join("components.csv"), &comp, &mut m.outputs)?;

    // corrected energy in the input's own units
    let corrected = correct_daily(&daily, &d.x4)?;
    let mut corr = String::from("date,energy,corrected\n");
    for t in 0..daily.len() {
        let _ = writeln!(
            corr,
            "{},{},{}",
            date_label(&daily, t),
            fmt_opt(daily.get(t)),
            fmt_opt(corrected.get(t))
        );
    }
    write_text(&out.join("corrected.csv"), &corr, &mut m.outputs)?;

    let json = serde_json::json!({ "status": d.report.status, "report": report });
    let text = serde_json::to_string_pretty(&json).map_err(|e| CliError::Input(e.to_string()))?;
    write_text(&out.join("report.json"), &(text + "\n"), &mut m.outputs)?;

    let optimal = d.is_optimal();
    if !optimal {
        m.complete = false;
        m.failures.push(format!("{}: {}", input.display(), d.report.status.as_str()));
    }
    let manifest = m.write(out)?;
    if !optimal {
        return Err(CliError::NonOptimal(d.report.status.as_str().to_string()));
    }
    Ok(SiteOutcome {
        decomposition: d,
        report,
        manifest,
    })
}

fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Input(e.to_string()))
}

/// One row of the fleet summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FleetRow {
    pub site: String,
    pub status: String,
    pub total_loss: Option<f64>,
    pub mean_soiling_rate: Option<f64>,
    pub outlier: bool,
    pub error: String,
}

/// Analyzes every `*.csv` file in `input_dir` into `out/sites/<name>/` and writes
/// `out/fleet_summary.csv`. Site failures are recorded, not propagated.
pub fn cmd_fleet(
    input_dir: &Path,
    out: &Path,
    opts: &AnalyzeOptions,
    jobs: usize,
    outlier_loss: f64,
) -> CliResult<Vec<FleetRow>> {
    let cfg = opts.resolve_config()?;
    let mut sites: Vec<PathBuf> = fs::read_dir(input_dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", input_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    sites.sort();
    if sites.is_empty() {
        return Err(CliError::Input(format!("no .csv files in {}", input_dir.display())));
    }
    fs::create_dir_all(out)?;

    let pool = thread_pool(jobs)?;
    let results: Vec<(FleetRow, Option<SolveSummary>)> = pool.install(|| {
        sites
            .par_iter()
            .map(|path| {
                let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let site_out = out.join("sites").join(&name);
                match cmd_analyze(path, &site_out, opts) {
                    Ok(o) => {
                        let loss = o.report.total_energy_loss_fraction;
                        let row = FleetRow {
                            site: name.clone(),
                            status: o.decomposition.report.status.as_str().to_string(),
                            total_loss: Some(loss),
                            mean_soiling_rate: Some(o.report.mean_soiling_rate),
                            outlier: loss > outlier_loss,
                            error: String::new(),
                        };
                        (row, Some(SolveSummary::new(&name, &o.decomposition.report)))
                    }
                    Err(e) => {
                        let status = match e {
                            CliError::NonOptimal(ref s) => s.clone(),
                            CliError::Input(_) => "input_error".to_string(),
                        };
                        let row = FleetRow {
                            site: name,
                            status,
                            total_loss: None,
                            mean_soiling_rate: None,
                            outlier: false,
                            error: e.to_string(),
                        };
                        (row, None)
                    }
                }
            })
            .collect()
    });

    let mut m = RunManifest::new("fleet");
    m.inputs = sites.iter().map(|p| p.display().to_string()).collect();
    m.config = Some(cfg);
    m.parameters = serde_json::json!({ "jobs": jobs, "outlier_loss": outlier_loss, "labeled": opts.labeled });
    let mut text = String::from("site,status,total_loss,mean_soiling_rate,outlier,error\n");
    let mut rows = Vec::with_capacity(results.len());
    for (row, solve) in results {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            row.site,
            row.status,
            fmt_opt(row.total_loss),
            fmt_opt(row.mean_soiling_rate),
            row.outlier,
            row.error.replace([',', '\n'], ";")
        );
        match solve {
            Some(s) => m.solves.push(s),
            None => {
                m.complete = false;
                m.failures.push(format!("{}: {}", row.site, row.error));
            }
        }
        rows.push(row);
    }
    write_text(&out.join("fleet_summary.csv"), &text, &mut m.outputs)?;
    m.write(out)?;
    Ok(rows)
}

/// One row of the validation study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub scenario: u8,
    pub seed: u64,
    pub loss_mae: f64,
    pub rate_mae: f64,
    pub filtered_rate_mae: f64,
    pub status: SolveStatus,
}

fn validate_one(r: &SyntheticRealization, cfg: &SdConfig, settings: &SolverSettings) -> CliResult<(ValidationRow, SolveReport)> {
    let d = decompose(&r.pi, cfg, settings)?;
    let row = ValidationRow {
        scenario: r.scenario,
        seed: r.seed,
        loss_mae: loss_mae(&r.true_soiling, &d.x4)?,
        rate_mae: rate_mae(&r.true_soiling, &d.x4)?,
        filtered_rate_mae: filtered_rate_mae(&r.true_soiling, &d.x4)?.mae,
        status: d.report.status,
    };
    Ok((row, d.report))
}

/// Runs the six-scenario synthetic study and writes `out/validation.csv`
/// (one row per realization, scenario-major).
pub fn cmd_validate(
    per_scenario: usize,
    seed: u64,
    days: usize,
    out: &Path,
    opts: &AnalyzeOptions,
    jobs: usize,
) -> CliResult<Vec<ValidationRow>> {
    // realizations are performance indices
    let opts = AnalyzeOptions {
        labeled: true,
        ..opts.clone()
    };
    let cfg = opts.resolve_config()?;
    let settings = SolverSettings::default();
    let suite = scenario_suite(per_scenario, seed, days)?;
    fs::create_dir_all(out)?;

    let pool = thread_pool(jobs)?;
    let results: Vec<CliResult<(ValidationRow, SolveReport)>> =
        pool.install(|| suite.par_iter().map(|r| validate_one(r, &cfg, &settings)).collect());

    let mut m = RunManifest::new("validate");
    m.config = Some(cfg);
    m.seeds = vec![seed];
    m.parameters = serde_json::json!({ "per_scenario": per_scenario, "days": days, "jobs": jobs });
    let mut text = String::from("scenario,seed,loss_mae,rate_mae,filtered_rate_mae,status\n");
    let mut rows = Vec::new();
    for (r, res) in suite.iter().zip(results) {
        match res {
            Ok((row, report)) => {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{}",
                    row.scenario,
                    row.seed,
                    row.loss_mae,
                    row.rate_mae,
                    row.filtered_rate_mae,
                    row.status.as_str()
                );
                if !row.status.is_optimal() {
                    m.complete = false;
                    m.failures.push(format!("scenario {} seed {}: {}", r.scenario, r.seed, row.status.as_str()));
                }
                m.solves.push(SolveSummary::new(&format!("{}-{}", r.scenario, r.seed), &report));
                rows.push(row);
            }
            Err(e) => {
                let _ = writeln!(text, "{},{},,,,error", r.scenario, r.seed);
                m.complete = false;
                m.failures.push(format!("scenario {} seed {}: {e}", r.scenario, r.seed));
            }
        }
    }
    write_text(&out.join("validation.csv"), &text, &mut m.outputs)?;
    m.write(out)?;
    Ok(rows)
}

/// Writes one synthetic realization as `synth.csv` plus `synth.json`.
pub fn cmd_synth(scenario: u8, seed: u64, days: usize, out: &Path) -> CliResult<SyntheticRealization> {
    let sc = ScenarioConfig::preset(scenario)?;
    let r = generate(&sc, seed, days)?;
    fs::create_dir_all(out)?;
    let mut text = String::from("date,pi,true_soiling,true_seasonal,true_degradation,true_noise\n");
    for t in 0..r.len() {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            date_label(&r.pi, t),
            fmt_opt(r.pi.get(t)),
            r.true_soiling[t],
            r.true_seasonal[t],
            r.true_degradation[t],
            r.true_noise[t]
        );
    }
    let mut outputs = Vec::new();
    write_text(&out.join("synth.csv"), &text, &mut outputs)?;
    let meta = serde_json::json!({
        "scenario": sc,
        "seed": seed,
        "days": days,
        "cleaning_days": r.cleaning_days,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Input(e.to_string()))?;
    write_text(&out.join("synth.json"), &(text + "\n"), &mut outputs)?;
    Ok(r)
}
