//! `careflow`: drive the guideline/resource pipeline from the command line.
//!
//! Stages are ordinary files in the formats documented in `docs/FORMATS.md`,
//! so guideline models, demand maps, and schedules can be edited and
//! re-verified independently.
//!
//! Exit codes: 0 success (all properties hold), 1 property violated,
//! 2 input error, 3 state budget exhausted.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use careflow_core::integrate::{assemble_with, AssembleOptions, Assembly};
use careflow_core::simulate::{simulate, Resolver, Script};
use careflow_core::verify::{verify, Verdict, VerificationResult, VerifyOptions};
use careflow_core::{
    annotate, format_system, parse_demand_map, parse_property_file, parse_schedule, parse_system,
    validate_model, DemandMap, SystemModel, Trace,
};

#[derive(Parser)]
#[command(name = "careflow", version, about = "Model, integrate, and verify clinical guideline statecharts under resource schedules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    #[default]
    Table,
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// Attach resource-demand annotations to a guideline model
    Annotate {
        /// Guideline model file
        model: PathBuf,
        /// Demand map file (`procedure : demand` lines)
        demand_map: PathBuf,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize resource charts, rewrite guards, and assemble the system
    Integrate {
        /// Annotated guideline model file
        model: PathBuf,
        /// Demand map file
        demand_map: PathBuf,
        /// Resource schedule file (`resource:[a,b];...` lines)
        schedule: PathBuf,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the explicit timer chart alongside the step clock
        #[arg(long)]
        timer: bool,
    },
    /// Check safety properties by bounded exploration
    Verify {
        /// Assembled system file
        system: PathBuf,
        /// Property file (`A[] Chart.State imply <expr>` lines)
        properties: PathBuf,
        /// Exploration bound in minutes (default: schedule horizon + 60)
        #[arg(long)]
        horizon: Option<u32>,
        /// Worker threads for successor expansion
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory for counterexample trace and script files
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
        /// Abort with exit code 3 past this many distinct configurations
        #[arg(long, default_value_t = VerifyOptions::DEFAULT_MAX_STATES)]
        max_states: usize,
    },
    /// Run one scripted or seeded execution path
    Simulate {
        /// Assembled system file
        system: PathBuf,
        /// Choice script resolving havoc values and transition picks
        #[arg(long, conflicts_with = "seed")]
        script: Option<PathBuf>,
        /// Seed for pseudo-random choice resolution
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of ticks to run
        #[arg(long, default_value_t = 60)]
        ticks: u32,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Annotate, integrate, and verify in one pass
    Pipeline {
        /// Guideline model file
        model: PathBuf,
        /// Demand map file
        demand_map: PathBuf,
        /// Resource schedule file
        schedule: PathBuf,
        /// Property file
        properties: PathBuf,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory for stage outputs and counterexample files
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
        #[arg(long, default_value_t = VerifyOptions::DEFAULT_MAX_STATES)]
        max_states: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Annotate { model, demand_map, out } => {
            let guideline = load_system(&model)?;
            let dmap = load_demand_map(&demand_map)?;
            let annotated = annotate_all(&guideline, &dmap);
            emit(out.as_deref(), &format_system(&annotated))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Integrate { model, demand_map, schedule, out, timer } => {
            let guideline = load_system(&model)?;
            let dmap = load_demand_map(&demand_map)?;
            let sched = load_schedule(&schedule)?;
            let assembly = assemble_checked(&guideline, &dmap, &sched, timer)?;
            emit(out.as_deref(), &format_system(&assembly.model))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { system, properties, horizon, jobs, out, format, max_states } => {
            let model = load_system(&system)?;
            let props = parse_property_file(&read(&properties)?)
                .with_context(|| format!("in property file {}", properties.display()))?;
            verify_and_report(&model, &props, horizon, jobs, max_states, &out, format)
        }
        Command::Simulate { system, script, seed, ticks, format, out } => {
            let model = load_system(&system)?;
            let resolver = match script {
                Some(path) => Resolver::Script(
                    Script::parse(&read(&path)?)
                        .with_context(|| format!("in script file {}", path.display()))?,
                ),
                None => Resolver::Seed(seed),
            };
            let trace = simulate(&model, resolver, ticks)?;
            let rendered = match format {
                OutputFormat::Table => trace.to_table(),
                OutputFormat::Records => trace.to_records(),
            };
            emit(out.as_deref(), &rendered)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Pipeline {
            model, demand_map, schedule, properties, horizon, jobs, out, format, max_states,
        } => {
            let guideline = load_system(&model)?;
            let dmap = load_demand_map(&demand_map)?;
            let sched = load_schedule(&schedule)?;
            let props = parse_property_file(&read(&properties)?)
                .with_context(|| format!("in property file {}", properties.display()))?;

            let annotated = annotate_all(&guideline, &dmap);
            let assembly = assemble_checked(&annotated, &dmap, &sched, false)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let stem = model
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into());
            std::fs::write(
                out.join(format!("{stem}.annotated.sys")),
                format_system(&annotated),
            )?;
            std::fs::write(
                out.join(format!("{stem}.system.sys")),
                format_system(&assembly.model),
            )?;
            verify_and_report(&assembly.model, &props, horizon, jobs, max_states, &out, format)
        }
    }
}

fn annotate_all(guideline: &SystemModel, dmap: &DemandMap) -> SystemModel {
    let mut out = guideline.clone();
    for chart in &mut out.charts {
        *chart = annotate(chart, dmap);
    }
    out
}

fn assemble_checked(
    guideline: &SystemModel,
    dmap: &DemandMap,
    schedule: &careflow_core::AvailabilityMap,
    timer: bool,
) -> Result<Assembly> {
    let assembly = assemble_with(
        guideline,
        dmap,
        schedule,
        AssembleOptions { include_timer: timer },
    )?;
    for warning in &assembly.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(assembly)
}

#[allow(clippy::too_many_arguments)]
fn verify_and_report(
    model: &SystemModel,
    props: &[careflow_core::Property],
    horizon: Option<u32>,
    jobs: usize,
    max_states: usize,
    out: &Path,
    format: OutputFormat,
) -> Result<ExitCode> {
    let mut options = VerifyOptions::for_model(model);
    if let Some(h) = horizon {
        if h == 0 {
            bail!("--horizon must be >= 1");
        }
        options.horizon = h;
    }
    options.jobs = jobs.max(1);
    options.max_states = max_states;

    let results = verify(model, props, options)?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut trace_files = Vec::new();
    for result in &results {
        if let Some(cx) = &result.counterexample {
            let trace_path = out.join(format!("{}.trace", result.property));
            let script_path = out.join(format!("{}.script", result.property));
            std::fs::write(&trace_path, cx.to_records())
                .with_context(|| format!("writing {}", trace_path.display()))?;
            std::fs::write(&script_path, replay_script(cx))
                .with_context(|| format!("writing {}", script_path.display()))?;
            trace_files.push((result.property.clone(), trace_path));
        }
    }

    print!("{}", render_results(&results, &trace_files, format));

    let code = if results.iter().any(|r| r.verdict == Verdict::ResourceLimit) {
        3
    } else if results.iter().any(|r| r.verdict == Verdict::Violated) {
        1
    } else {
        0
    };
    Ok(ExitCode::from(code))
}

fn replay_script(cx: &Trace) -> String {
    let ticks = cx.len().saturating_sub(1);
    format!("# replay with: careflow simulate <system> --script <this file> --ticks {ticks}\n{}", cx.to_script())
}

fn render_results(
    results: &[VerificationResult],
    trace_files: &[(String, PathBuf)],
    format: OutputFormat,
) -> String {
    let trace_of = |name: &str| {
        trace_files
            .iter()
            .find(|(p, _)| p == name)
            .map(|(_, path)| path.display().to_string())
            .unwrap_or_else(|| "-".into())
    };
    match format {
        OutputFormat::Records => {
            let mut outp = String::new();
            for r in results {
                let _ = writeln!(
                    outp,
                    "property={}|verdict={}|states={}|horizon={}|trace={}",
                    r.property,
                    r.verdict,
                    r.states_explored,
                    r.horizon,
                    trace_of(&r.property)
                );
            }
            outp
        }
        OutputFormat::Table => {
            let mut rows = vec![[
                "property".to_string(),
                "verdict".to_string(),
                "states".to_string(),
                "horizon".to_string(),
                "trace".to_string(),
            ]];
            for r in results {
                rows.push([
                    r.property.clone(),
                    r.verdict.to_string(),
                    r.states_explored.to_string(),
                    r.horizon.to_string(),
                    trace_of(&r.property),
                ]);
            }
            render_columns(&rows)
        }
    }
}

fn render_columns(rows: &[[String; 5]]) -> String {
    let mut widths = [0usize; 5];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        for (i, (cell, width)) in row.iter().zip(widths).enumerate() {
            if i + 1 == row.len() {
                out.push_str(cell);
            } else {
                let _ = write!(out, "{cell:<width$}  ");
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_system(path: &Path) -> Result<SystemModel> {
    let model =
        parse_system(&read(path)?).with_context(|| format!("in model file {}", path.display()))?;
    let diags = validate_model(&model);
    if !diags.is_empty() {
        let listing: Vec<String> = diags.iter().map(|d| format!("  - {d}")).collect();
        bail!("model {} failed validation:\n{}", path.display(), listing.join("\n"));
    }
    Ok(model)
}

fn load_demand_map(path: &Path) -> Result<DemandMap> {
    parse_demand_map(&read(path)?)
        .with_context(|| format!("in demand map {}", path.display()))
}

fn load_schedule(path: &Path) -> Result<careflow_core::AvailabilityMap> {
    parse_schedule(&read(path)?)
        .with_context(|| format!("in schedule {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
