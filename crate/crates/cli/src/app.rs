use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dcf_core::{evaluate, simulate, AccessMode};

use crate::record::{write_csv, RunRecord};
use crate::settings::{Format, GlobalArgs, Settings};
use crate::sweep::{self, Axis, SourceSel, SweepSpec};
use crate::validate::{self, Tolerances};

#[derive(Debug, Parser)]
#[command(name = "dcf-cli", version, about = "802.11 DCF saturation throughput, delay and discard analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print derived channel times for both access modes.
    Table1,
    /// Evaluate the analytical model at one point.
    Solve,
    /// Simulate one point.
    Simulate,
    /// Sweep one parameter.
    Sweep(SweepArgs),
    /// Compare analysis and simulation over a grid.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// fig2, fig3 or fig4.
    #[arg(long)]
    pub preset: Option<String>,
    /// n, pf or f.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated axis values (`inf` allowed for f).
    #[arg(long)]
    pub values: Option<String>,
    /// Linear range start:stop:step.
    #[arg(long)]
    pub range: Option<String>,
    /// Log-spaced range start:stop:count.
    #[arg(long)]
    pub logspace: Option<String>,
    /// Second parameter, e.g. `pf=0.1,0.5`.
    #[arg(long)]
    pub curve: Option<String>,
    /// Comma-separated access modes; presets default to both.
    #[arg(long)]
    pub modes: Option<String>,
    /// analytic, sim or both.
    #[arg(long)]
    pub source: Option<String>,
    /// Comma-separated metric columns to fill.
    #[arg(long)]
    pub outputs: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ValidateArgs {
    /// Override every relative tolerance.
    #[arg(long = "max-rel-err")]
    pub max_rel_err: Option<f64>,
    /// Custom points, e.g. `n=1:pf=0,n=5:pf=0.1:mode=rtscts`.
    #[arg(long)]
    pub points: Option<String>,
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn provenance(settings: &Settings, with_generator: bool) -> Vec<String> {
    let mut lines = vec![
        format!("dcf-cli {}", env!("CARGO_PKG_VERSION")),
        format!("config {}", settings.echo()),
    ];
    if with_generator {
        lines.push(format!(
            "generator {} seed {}",
            dcf_core::sim::GENERATOR,
            settings.sim.seed
        ));
    }
    lines
}

fn emit(settings: &Settings, comments: Vec<String>, records: &[RunRecord], single: bool) -> Result<()> {
    let mut out = open_output(settings.out.as_deref())?;
    match settings.format {
        Format::Csv => write_csv(&mut out, &comments, records)?,
        Format::Json => {
            if single {
                serde_json::to_writer_pretty(&mut out, &records[0])?;
            } else {
                serde_json::to_writer_pretty(&mut out, records)?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_modes(list: &str) -> Result<Vec<AccessMode>> {
    list.split(',')
        .map(|m| m.trim().parse::<AccessMode>().map_err(Into::into))
        .collect()
}

pub fn build_sweep(args: &SweepArgs, settings: &Settings) -> Result<SweepSpec> {
    let mut spec = match &args.preset {
        Some(name) => sweep::preset(name, &settings.scenario, settings.normalization)?,
        None => {
            let axis: Axis = args
                .axis
                .as_deref()
                .context("a sweep needs --preset or --axis")?
                .parse()?;
            SweepSpec {
                axis,
                values: Vec::new(),
                curve: None,
                fixed: settings.scenario.clone(),
                modes: vec![settings.scenario.mode],
                source: SourceSel::Analytic,
                outputs: Vec::new(),
                normalization: settings.normalization,
            }
        }
    };
    if let Some(axis) = &args.axis {
        spec.axis = axis.parse()?;
    }
    let explicit = [
        args.values.as_deref().map(sweep::parse_values),
        args.range.as_deref().map(sweep::parse_range),
        args.logspace.as_deref().map(sweep::parse_logspace),
    ];
    for values in explicit.into_iter().flatten() {
        spec.values = values?;
    }
    if let Some(curve) = &args.curve {
        let (axis, values) = curve
            .split_once('=')
            .context("--curve expects axis=v1,v2,...")?;
        spec.curve = Some((axis.trim().parse()?, sweep::parse_values(values)?));
    }
    if let Some(modes) = &args.modes {
        spec.modes = parse_modes(modes)?;
    }
    if let Some(source) = &args.source {
        spec.source = source.parse()?;
    }
    if let Some(outputs) = &args.outputs {
        spec.outputs = outputs.split(',').map(|s| s.trim().to_string()).collect();
    }
    spec.validate()?;
    Ok(spec)
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let settings = cli.global.resolve()?;
    match cli.command {
        Command::Table1 => {
            let (text, pass) = crate::table1::render(&settings.scenario.timing);
            let mut out = open_output(settings.out.as_deref())?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(if pass == Some(false) {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Solve => {
            let metrics = evaluate(&settings.scenario, settings.normalization)?;
            let record = RunRecord::analytic(&settings.scenario, &metrics);
            emit(&settings, provenance(&settings, false), &[record], true)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate => {
            let result = simulate(&settings.scenario, &settings.sim)?;
            let record = RunRecord::simulated(&settings.scenario, &settings.sim, &result);
            emit(&settings, provenance(&settings, true), &[record], true)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let spec = build_sweep(&args, &settings)?;
            let records = spec.run(&settings.sim)?;
            let mut comments = provenance(&settings, spec.source != SourceSel::Analytic);
            comments.push(format!(
                "sweep preset={} axis={:?} points={} curve={:?} modes={:?} source={:?}",
                args.preset.as_deref().unwrap_or("-"),
                spec.axis,
                spec.values.len(),
                spec.curve,
                spec.modes,
                spec.source
            ));
            emit(&settings, comments, &records, false)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let points = match &args.points {
                Some(p) => validate::parse_points(p, &settings.scenario)?,
                None => validate::default_grid(&settings.scenario),
            };
            let tol = match args.max_rel_err {
                Some(r) => Tolerances::default().with_max_rel_err(r),
                None => Tolerances::default(),
            };
            let report = validate::run(&points, &settings.sim, &tol)?;
            // Text on standard output (JSON with --format json); --out always
            // receives the JSON report.
            let json = serde_json::to_string_pretty(&report)? + "\n";
            let body = match settings.format {
                Format::Csv => report.to_text(),
                Format::Json => json.clone(),
            };
            let mut stdout = open_output(None)?;
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
            if let Some(path) = &settings.out {
                std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
