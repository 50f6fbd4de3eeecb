//! The `scenplan` command line.

use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use scenplan_core::sizing::{standard_sample_size, IncrementalSchedule, RiskParams};
use scenplan_core::{Method, SizingMode};

use crate::config::LoadedConfig;
use crate::error::{AppError, Result};
use crate::manifest::{ManifestFile, RunManifest, Timing};
use crate::parallel;
use crate::report::{self, ReportFile, SUMMARY_HEADER};

#[derive(Debug, Parser)]
#[command(
    name = "scenplan",
    version,
    about = "Scenario-based energy management for a multi-zone building"
)]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for validation; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<NonZeroUsize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the standard sample size and the incremental schedule.
    Size(SizeArgs),
    /// Solve the experiment and write reports and plot data.
    Run(RunArgs),
    /// Empirical risk of a stored solution over independent validation sets.
    Validate(ValidateArgs),
}

fn probability(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

fn confidence(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1]"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exact,
    Explicit,
}

impl From<ModeArg> for SizingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => SizingMode::Exact,
            ModeArg::Explicit => SizingMode::Explicit,
        }
    }
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    /// Violation level; defaults to the config's comfort epsilon.
    #[arg(long, value_parser = probability)]
    pub epsilon: Option<f64>,
    /// Confidence parameter; defaults to the config's risk beta.
    #[arg(long, value_parser = confidence)]
    pub beta: Option<f64>,
    /// Decision variables; defaults to 3 × horizon of the config.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub dims: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Deterministic,
    Standard,
    Incremental,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Deterministic => Method::Deterministic,
            MethodArg::Standard => Method::Standard,
            MethodArg::Incremental => Method::Incremental,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Methods to run, in order; all three when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Vec<MethodArg>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// A report JSON or a text file with one decision vector.
    pub solution: PathBuf,
    #[arg(long)]
    pub sets: Option<usize>,
    #[arg(long)]
    pub set_size: Option<usize>,
}

/// Collects output files and records them in the manifest.
struct Output {
    dir: Option<PathBuf>,
    manifest: RunManifest,
}

impl Output {
    fn new(cli: &Cli, argv: Vec<String>, default_dir: Option<&str>) -> Result<Self> {
        let dir = cli.out.clone().or_else(|| default_dir.map(PathBuf::from));
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| AppError::io(d, e))?;
        }
        let manifest = RunManifest::new(
            argv,
            cli.config.as_deref(),
            cli.seed,
            dir.as_deref().unwrap_or_else(|| Path::new("")),
        );
        Ok(Output { dir, manifest })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = &self.dir {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| AppError::io(&path, e))?;
            self.manifest.files.push(ManifestFile::new(name, contents.as_bytes()));
        }
        Ok(())
    }

    fn time(&mut self, label: impl Into<String>, start: Instant) {
        self.manifest.timings.push(Timing {
            label: label.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    fn finish(self) -> Result<()> {
        if let Some(dir) = &self.dir {
            let path = dir.join("manifest.json");
            let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
            fs::write(&path, json + "\n").map_err(|e| AppError::io(&path, e))?;
        }
        Ok(())
    }
}

fn require_config(cli: &Cli) -> Result<LoadedConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| AppError::Usage("this command needs --config".into()))?;
    LoadedConfig::load(path)
}

fn cmd_size(cli: &Cli, args: &SizeArgs, argv: Vec<String>) -> Result<String> {
    let config = match &cli.config {
        Some(p) => Some(LoadedConfig::load(p)?),
        None => None,
    };
    let missing = |flag: &str| AppError::Usage(format!("--{flag} is required without --config"));
    let epsilon = match (args.epsilon, &config) {
        (Some(e), _) => e,
        (None, Some(c)) => c.config.comfort.epsilon,
        (None, None) => return Err(missing("epsilon")),
    };
    let beta = match (args.beta, &config) {
        (Some(b), _) => b,
        (None, Some(c)) => c.config.risk.beta,
        (None, None) => return Err(missing("beta")),
    };
    let dims = match (args.dims, &config) {
        (Some(d), _) => d as usize,
        (None, Some(c)) => c.config.horizon_steps * scenplan_core::model::N_INPUTS,
        (None, None) => return Err(missing("dims")),
    };
    let mode: SizingMode = match (args.mode, &config) {
        (Some(m), _) => m.into(),
        (None, Some(c)) => c.config.risk.mode,
        (None, None) => SizingMode::default(),
    };
    let usage = |e: scenplan_core::Error| AppError::Usage(e.to_string());

    // beta = 1 is a valid degenerate input for the closed-form standard
    // size but not for the incremental split.
    let standard = if beta == 1.0 {
        if mode != SizingMode::Explicit {
            return Err(AppError::Usage(
                "--beta 1 is only meaningful with --mode explicit".into(),
            ));
        }
        (2.0 * dims as f64 / epsilon).ceil() as u64
    } else {
        standard_sample_size(&RiskParams::new(epsilon, beta, dims).map_err(usage)?, mode)
    };
    let mut csv = format!("standard,{mode},{standard}\n");
    if beta < 1.0 {
        let params = RiskParams::new(epsilon, beta, dims).map_err(usage)?;
        let schedule =
            IncrementalSchedule::compute(&params, mode).map_err(|e| AppError::from_core("incremental schedule", e))?;
        csv.push_str("j,m_j,beta_j,n_j\n");
        for e in &schedule.entries {
            csv.push_str(&format!("{},{},{},{}\n", e.j, e.m_j, e.beta_j, e.n_j));
        }
    }
    let mut out = Output::new(cli, argv, None)?;
    out.write("sizing.csv", &csv)?;
    out.finish()?;
    Ok(csv)
}

fn cmd_run(cli: &Cli, args: &RunArgs, argv: Vec<String>) -> Result<String> {
    let loaded = require_config(cli)?;
    let exp = loaded.experiment(cli.seed)?;
    let methods: Vec<Method> = if args.method.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.method.iter().map(|&m| m.into()).collect()
    };
    let mut out = Output::new(cli, argv, Some("out"))?;
    out.manifest.seed = Some(exp.seed);
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let validation = parallel::validation_scenarios(&exp, 0, exp.validation_size);
    for method in methods {
        let start = Instant::now();
        log::info!("running {method}");
        let solution = exp
            .solve(method)
            .map_err(|e| AppError::from_core(format!("{method} run"), e))?;
        let eval = exp
            .evaluator(&solution.u)
            .map_err(|e| AppError::from_core("validation", e))?;
        let violations = parallel::count_violations(&eval, &validation)?;
        out.time(method.as_str(), start);

        let report = exp.report(&solution, violations);
        let row = report::summary_row(&report);
        let file = ReportFile::new(report, &solution, exp.beta, exp.mode, exp.lifted.horizon);
        let json = serde_json::to_string_pretty(&file).expect("report serializes") + "\n";
        out.write(&report::method_file("report", method, "json"), &json)?;

        let nominal = solution
            .nominal_flux
            .clone()
            .unwrap_or_else(|| exp.occupancy.expected_flux(exp.lifted.horizon));
        out.write(
            &report::method_file("nominal", method, "csv"),
            &report::nominal_csv(&exp.lifted, &solution.u, &nominal),
        )?;
        out.write(
            &report::method_file("trajectories", method, "csv"),
            &report::trajectories_csv(&exp.lifted, &solution.u, validation.iter().map(|s| s.flux.as_slice())),
        )?;
        summary.push_str(&row);
        summary.push('\n');
    }
    out.write("summary.csv", &summary)?;
    out.finish()?;
    Ok(summary)
}

fn read_solution(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let bad = |reason: String| AppError::Format {
        path: path.to_path_buf(),
        reason,
    };
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let decision = value
            .get("decision")
            .cloned()
            .ok_or_else(|| bad("no `decision` field".into()))?;
        serde_json::from_value(decision).map_err(|e| bad(e.to_string()))
    } else {
        text.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|e| bad(format!("bad number `{t}`: {e}"))))
            .collect()
    }
}

fn cmd_validate(cli: &Cli, args: &ValidateArgs, argv: Vec<String>) -> Result<String> {
    let loaded = require_config(cli)?;
    let exp = loaded.experiment(cli.seed)?;
    let u = read_solution(&args.solution)?;
    if u.len() != exp.lifted.decision_dim() {
        return Err(AppError::Format {
            path: args.solution.clone(),
            reason: format!(
                "decision has {} entries but the config has {} decision variables",
                u.len(),
                exp.lifted.decision_dim()
            ),
        });
    }
    let sets = args.sets.unwrap_or(loaded.config.validation.sets);
    let set_size = args.set_size.unwrap_or(loaded.config.validation.set_size);
    let mut out = Output::new(cli, argv, Some("out"))?;
    out.manifest.seed = Some(exp.seed);
    let start = Instant::now();
    let hist = parallel::risk_histogram(&exp, &DVector::from_vec(u), sets, set_size)?;
    out.time("validate", start);
    out.write("histogram.csv", &report::histogram_csv(&hist, set_size))?;
    let summary = report::histogram_summary_csv(&hist, set_size);
    out.write("histogram_summary.csv", &summary)?;
    out.finish()?;
    Ok(summary)
}

/// Runs a parsed command; returns what goes to stdout.
pub fn execute(cli: &Cli, argv: Vec<String>) -> Result<String> {
    let run = || match &cli.command {
        Command::Size(a) => cmd_size(cli, a, argv),
        Command::Run(a) => cmd_run(cli, a, argv),
        Command::Validate(a) => cmd_validate(cli, a, argv),
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.get())
            .build()
            .map_err(|e| AppError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(run),
        None => run(),
    }
}
