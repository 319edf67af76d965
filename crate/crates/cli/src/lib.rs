//! `filmforge` command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input (config, materials,
//! arguments), 2 for runtime and numeric failures.

pub mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use filmforge_core::agent::DqnTrainer;
use filmforge_core::environment::TRACE_HEADER;
use filmforge_core::optics::format_sig6;
use filmforge_core::{ga, Error, OptimizerKind, Result, RunReport, SpectralResponse};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{Problem, ProblemConfig};

#[derive(Debug, Parser)]
#[command(name = "filmforge", version, about = "Design multilayer thin-film coatings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Dqn,
    Ga,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Dqn => OptimizerKind::Dqn,
            OptimizerArg::Ga => OptimizerKind::Ga,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one design and write its spectrum.
    Evaluate {
        config: PathBuf,
        /// Free-layer thicknesses in nm, comma separated. Defaults to the
        /// initial thicknesses of the config.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        thicknesses: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimise the free-layer thicknesses.
    Optimize {
        config: PathBuf,
        #[arg(long, value_enum)]
        optimizer: Option<OptimizerArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Episodes (DQN) or generations (GA).
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-step DQN trace.
        #[arg(long)]
        trace: bool,
    },
    /// Run two optimizers per seed under the same evaluation budget.
    Compare {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long, value_enum, default_value = "dqn")]
        left: OptimizerArg,
        #[arg(long, value_enum, default_value = "ga")]
        right: OptimizerArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub thicknesses_nm: Vec<f64>,
    pub response: SpectralResponse,
    pub aim: f64,
}

/// Evaluates the config's stack at `thicknesses` (or its initial thicknesses).
pub fn evaluate(problem: &Problem, thicknesses: Option<&[f64]>) -> Result<Evaluation> {
    let d = thicknesses.unwrap_or(&problem.config.initial_thicknesses_nm).to_vec();
    if d.len() != problem.template().free_layer_count() {
        return Err(Error::Validation(format!(
            "{} thicknesses given for {} free layers",
            d.len(),
            problem.template().free_layer_count()
        )));
    }
    if let Some((i, x)) = d.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Validation(format!("layer {}: thickness {x} must be finite and >= 0", i + 1)));
    }
    let evaluator = filmforge_core::StackEvaluator::new(problem.template(), problem.grid())?;
    let response = evaluator.response(&d)?;
    let aim = filmforge_core::optics::aim_value(&response, &problem.weights());
    Ok(Evaluation {
        thicknesses_nm: d,
        response,
        aim,
    })
}

/// Output of one optimisation run.
#[derive(Debug, Clone)]
pub struct Optimized {
    pub report: RunReport,
    pub trace: Option<Vec<String>>,
}

/// Runs one optimizer. `episodes` overrides DQN episodes or GA generations.
pub fn optimize(
    problem: &Problem,
    optimizer: OptimizerKind,
    seed: u64,
    episodes: Option<u64>,
    trace: bool,
) -> Result<Optimized> {
    match optimizer {
        OptimizerKind::Dqn => {
            let mut settings = problem.config.dqn_settings(seed, episodes);
            settings.record_trace = trace;
            let mut trainer = DqnTrainer::new(problem.env.clone(), settings.clone())?;
            for _ in 0..settings.episodes {
                if trainer.budget_exhausted() {
                    break;
                }
                trainer.run_episode()?;
            }
            let trace = trace.then(|| trainer.trace().to_vec());
            Ok(Optimized {
                report: trainer.into_report()?,
                trace,
            })
        }
        OptimizerKind::Ga => {
            let mut cfg = problem.config.ga_config(seed);
            if let Some(g) = episodes {
                cfg.generations = g;
            }
            let out = ga::run_ga(problem.template(), problem.grid(), &problem.weights(), &cfg)?;
            Ok(Optimized {
                report: out.report,
                trace: None,
            })
        }
    }
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    #[serde(flatten)]
    run: &'a RunReport,
    config: &'a ProblemConfig,
}

/// Report JSON: run summary followed by the resolved config.
pub fn report_json(report: &RunReport, config: &ProblemConfig) -> String {
    let mut s = serde_json::to_string_pretty(&ReportDocument { run: report, config }).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `report.json`, `spectrum.csv`, `convergence.csv` and, if given,
/// `trace.csv` into `dir`.
pub fn write_run_outputs(dir: &Path, run: &Optimized, config: &ProblemConfig) -> Result<()> {
    write_atomic(&dir.join("report.json"), &report_json(&run.report, config))?;
    if let Some(resp) = &run.report.best_response {
        write_atomic(&dir.join("spectrum.csv"), &resp.to_csv())?;
    }
    write_atomic(&dir.join("convergence.csv"), &run.report.convergence_csv())?;
    if let Some(rows) = &run.trace {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        write_atomic(&dir.join("trace.csv"), &s)?;
    }
    Ok(())
}

/// One side of a comparison row.
#[derive(Debug, Clone, PartialEq)]
pub struct SideResult {
    pub evaluations: u64,
    pub best_aim: f64,
    pub mean_r: f64,
    pub mean_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub seed: u64,
    pub outcome: std::result::Result<(SideResult, SideResult), String>,
}

/// Evaluation budget both sides get: the config's `dqn.max_evaluations` if
/// set, else what a full GA run would use.
pub fn compare_budget(config: &ProblemConfig) -> u64 {
    config
        .dqn
        .max_evaluations
        .unwrap_or_else(|| config.ga_config(0).planned_evaluations())
}

fn run_budgeted(problem: &Problem, optimizer: OptimizerKind, seed: u64, budget: u64) -> Result<SideResult> {
    let report = match optimizer {
        OptimizerKind::Dqn => {
            let mut s = problem.config.dqn_settings(seed, Some(u64::MAX));
            s.max_evaluations = Some(budget);
            filmforge_core::agent::train(problem.env.clone(), s)?
        }
        OptimizerKind::Ga => {
            let mut cfg = problem.config.ga_config(seed);
            let per_gen = (cfg.population_size - cfg.elitism_count) as u64;
            cfg.generations = budget.saturating_sub(cfg.population_size as u64) / per_gen;
            cfg.max_evaluations = Some(budget);
            ga::run_ga(problem.template(), problem.grid(), &problem.weights(), &cfg)?.report
        }
    };
    Ok(SideResult {
        evaluations: report.evaluations,
        best_aim: report.best_aim,
        mean_r: report.mean_r,
        mean_t: report.mean_t,
    })
}

/// Runs both optimizers for every seed, seeds in parallel. A failing seed is
/// recorded in its row and does not stop the others.
pub fn compare(problem: &Problem, seeds: &[u64], left: OptimizerKind, right: OptimizerKind) -> Vec<CompareRow> {
    let budget = compare_budget(&problem.config);
    seeds
        .par_iter()
        .map(|&seed| {
            let outcome = run_budgeted(problem, left, seed, budget)
                .and_then(|l| Ok((l, run_budgeted(problem, right, seed, budget)?)))
                .map_err(|e| e.to_string());
            CompareRow { seed, outcome }
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn side_cells(s: &SideResult) -> String {
    format!(
        "{},{},{},{}",
        s.evaluations,
        format_sig6(s.best_aim),
        format_sig6(s.mean_r),
        format_sig6(s.mean_t)
    )
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

/// Per-seed rows plus a `median` row over the successful seeds.
pub fn compare_csv(rows: &[CompareRow], left: OptimizerKind, right: OptimizerKind) -> String {
    let mut out = String::from(
        "seed,status,left,left_evaluations,left_best_aim,left_mean_R,left_mean_T,\
         right,right_evaluations,right_best_aim,right_mean_R,right_mean_T\n",
    );
    let (l, r) = (left.as_str(), right.as_str());
    let mut ok = Vec::new();
    for row in rows {
        match &row.outcome {
            Ok((a, b)) => {
                let _ = writeln!(out, "{},ok,{l},{},{r},{}", row.seed, side_cells(a), side_cells(b));
                ok.push((a, b));
            }
            Err(msg) => {
                let _ = writeln!(out, "{},{},{l},,,,,{r},,,,", row.seed, csv_quote(&format!("error: {msg}")));
            }
        }
    }
    let med = |f: &dyn Fn(&(&SideResult, &SideResult)) -> f64| {
        let mut v: Vec<f64> = ok.iter().map(f).collect();
        median(&mut v)
    };
    if ok.is_empty() {
        let _ = writeln!(out, "median,no successful seeds,{l},,,,,{r},,,,");
    } else {
        let cells = |side: [f64; 4]| {
            format!(
                "{},{},{},{}",
                format_sig6(side[0]),
                format_sig6(side[1]),
                format_sig6(side[2]),
                format_sig6(side[3])
            )
        };
        let left_cells = cells([
            med(&|p| p.0.evaluations as f64).unwrap_or(f64::NAN),
            med(&|p| p.0.best_aim).unwrap_or(f64::NAN),
            med(&|p| p.0.mean_r).unwrap_or(f64::NAN),
            med(&|p| p.0.mean_t).unwrap_or(f64::NAN),
        ]);
        let right_cells = cells([
            med(&|p| p.1.evaluations as f64).unwrap_or(f64::NAN),
            med(&|p| p.1.best_aim).unwrap_or(f64::NAN),
            med(&|p| p.1.mean_r).unwrap_or(f64::NAN),
            med(&|p| p.1.mean_t).unwrap_or(f64::NAN),
        ]);
        let _ = writeln!(out, "median,ok,{l},{left_cells},{r},{right_cells}");
    }
    out
}

fn out_dir(arg: Option<PathBuf>, config: &ProblemConfig) -> PathBuf {
    arg.unwrap_or_else(|| PathBuf::from(&config.output_dir))
}

/// Executes a parsed command line, printing a summary to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    match cli.command {
        Command::Evaluate { config, thicknesses, out } => {
            let cfg = ProblemConfig::load(&config)?;
            let problem = cfg.resolve()?;
            let ev = evaluate(&problem, thicknesses.as_deref())?;
            let dir = out_dir(out, &cfg);
            write_atomic(&dir.join("spectrum.csv"), &ev.response.to_csv())?;
            writeln!(
                stdout,
                "mean_R={} mean_T={} mean_A={} aim={}",
                format_sig6(ev.response.mean_r),
                format_sig6(ev.response.mean_t),
                format_sig6(ev.response.mean_a),
                format_sig6(ev.aim)
            )
            .map_err(io)?;
        }
        Command::Optimize {
            config,
            optimizer,
            seed,
            episodes,
            out,
            trace,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let problem = cfg.resolve()?;
            let kind = optimizer.map(OptimizerKind::from).unwrap_or(cfg.optimizer);
            let run = optimize(&problem, kind, seed.unwrap_or(cfg.seed), episodes, trace)?;
            write_run_outputs(&out_dir(out, &cfg), &run, &cfg)?;
            let r = &run.report;
            writeln!(
                stdout,
                "{} seed={} best_aim={} mean_R={} mean_T={} mean_A={} evaluations={} thicknesses_nm={:?}",
                r.optimizer.as_str(),
                r.seed,
                format_sig6(r.best_aim),
                format_sig6(r.mean_r),
                format_sig6(r.mean_t),
                format_sig6(r.mean_a),
                r.evaluations,
                r.best_thicknesses_nm
            )
            .map_err(io)?;
        }
        Command::Compare {
            config,
            seeds,
            left,
            right,
            out,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let problem = cfg.resolve()?;
            let (l, r) = (left.into(), right.into());
            let rows = compare(&problem, &seeds, l, r);
            let csv = compare_csv(&rows, l, r);
            write_atomic(&out_dir(out, &cfg).join("compare.csv"), &csv)?;
            stdout.write_all(csv.as_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_validation() {
        1
    } else {
        2
    }
}
