use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use autochain::pipeline::{Pipeline, PipelineConfig, PipelineError};
use autochain::sim::read_trace_csv;
use clap::{Args, Parser, Subcommand};
use plotters::prelude::*;

#[derive(Parser)]
#[command(name = "autochain", version, about = "Event chain to ROS-node code, validated and simulated")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Backend name from the config's `backends` map.
    #[arg(long)]
    backend: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reject wiring with topics nobody publishes.
    #[arg(long)]
    strict: bool,
    /// Save HTTP exchanges to <out>/recorded_fixture.json.
    #[arg(long)]
    record_fixtures: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Acquire the event chain and diff it against the component registry.
    Ingest(Common),
    /// Build the instance model.
    Model(Common),
    /// Check the constraints; exits 2 on any failure.
    Validate(Common),
    /// Render the templates.
    Generate(Common),
    /// Acquire function code for new components.
    FunctionCode(Common),
    /// Run the scenario at every configured speed.
    Simulate(Common),
    /// Every stage in order, then write report.json.
    Run(Common),
    /// Multi-run evaluation over replay fixtures or live backends.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Number of runs per backend.
        #[arg(long)]
        runs: Option<usize>,
        /// Backends to evaluate (repeatable); defaults to the config's list.
        #[arg(long = "eval-backend")]
        backends: Vec<String>,
    },
    /// Render a trace CSV to an SVG chart.
    Plot {
        trace: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn pipeline(c: &Common) -> Result<Pipeline, PipelineError> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    cfg.strict |= c.strict;
    Ok(Pipeline::new(cfg)?.with_backend(c.backend.clone()).recording(c.record_fixtures))
}

fn print_artifacts(p: &Pipeline, artifacts: &[String]) {
    for a in artifacts {
        println!("{}", p.out().join(a).display());
    }
}

fn stage(c: &Common, f: impl FnOnce(&Pipeline) -> Result<Vec<String>, PipelineError>) -> Result<(), PipelineError> {
    let p = pipeline(c)?;
    let r = f(&p);
    p.save_recording()?;
    print_artifacts(&p, &r?);
    Ok(())
}

fn dispatch(cmd: Command) -> Result<i32, PipelineError> {
    match cmd {
        Command::Ingest(c) => stage(&c, |p| p.ingest())?,
        Command::Model(c) => stage(&c, |p| p.model())?,
        Command::Validate(c) => {
            let p = pipeline(&c)?;
            match p.validate() {
                Ok((_, report)) => print!("{report}"),
                Err(e @ PipelineError::Gate { .. }) => {
                    if let Ok(text) = std::fs::read_to_string(p.out().join(autochain::pipeline::VALIDATION_FILE)) {
                        eprint!("{text}");
                    }
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
        }
        Command::Generate(c) => stage(&c, |p| p.generate())?,
        Command::FunctionCode(c) => stage(&c, |p| p.function_code())?,
        Command::Simulate(c) => {
            let p = pipeline(&c)?;
            let r = p.simulate();
            if let Ok((_, summaries)) = &r {
                for s in summaries {
                    println!(
                        "v0={} safe={} final_gap={:.3} engagement={:?}",
                        s.v0, s.safe, s.final_gap, s.engagement_time
                    );
                }
            }
            r?;
        }
        Command::Run(c) => {
            let p = pipeline(&c)?;
            let report = p.run()?;
            for s in &report.stages {
                let msg = s.message.as_deref().unwrap_or("");
                println!("{:<14} {:?} {msg}", s.stage, s.status);
            }
            return Ok(report.exit_code);
        }
        Command::Eval { common, runs, backends } => {
            let p = pipeline(&common)?;
            let backends = if backends.is_empty() {
                common
                    .backend
                    .clone()
                    .map(|b| vec![b])
                    .unwrap_or_else(|| p.cfg.eval.backends.clone())
            } else {
                backends
            };
            if backends.is_empty() {
                return Err(PipelineError::Config("no backends to evaluate".into()));
            }
            let report = p.eval(&backends, runs.unwrap_or(p.cfg.eval.runs))?;
            print!("{report}");
        }
        Command::Plot { .. } => unreachable!("handled before dispatch"),
    }
    Ok(0)
}

type Column = Box<dyn Fn(&autochain::sim::TraceRow) -> f64>;

fn plot(trace: &Path, output: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(trace).with_context(|| format!("reading {}", trace.display()))?;
    let rows = read_trace_csv(&text).with_context(|| format!("parsing {}", trace.display()))?;
    if rows.is_empty() {
        bail!("{} has no rows", trace.display());
    }
    let t_end = rows.last().map(|r| r.time).unwrap_or(1.0).max(1e-3);
    let v_max = rows.iter().map(|r| r.speed).fold(1.0, f64::max) * 1.05;
    let g_max = rows.iter().map(|r| r.gap).fold(1.0, f64::max) * 1.05;

    let root = SVGBackend::new(output, (900, 720)).into_drawing_area();
    root.fill(&WHITE)?;
    let panels = root.split_evenly((3, 1));
    let series: [(&str, f64, Column, RGBColor); 3] = [
        ("speed [m/s]", v_max, Box::new(|r| r.speed), BLUE),
        ("gap [m]", g_max, Box::new(|r| r.gap), GREEN),
        ("brake force", 1.05, Box::new(|r| r.brake_force), RED),
    ];
    for (area, (label, y_max, f, color)) in panels.iter().zip(series) {
        let mut chart = ChartBuilder::on(area)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(50)
            .build_cartesian_2d(0.0..t_end, 0.0..y_max)?;
        chart.configure_mesh().x_desc("time [s]").y_desc(label).draw()?;
        chart.draw_series(LineSeries::new(rows.iter().map(|r| (r.time, f(r))), &color))?;
    }
    root.present()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Command::Plot { trace, output } = &cli.command {
        let output = output.clone().unwrap_or_else(|| trace.with_extension("svg"));
        return match plot(trace, &output) {
            Ok(()) => {
                println!("{}", output.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        };
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
