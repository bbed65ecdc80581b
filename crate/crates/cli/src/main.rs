//! `rectnav`: corridor generation, closed-loop navigation runs and
//! corridor-method benchmarks from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rectnav_core::bench::Method;

/// Process exit codes. These values are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// I/O failure or any other runtime error.
    Failure = 1,
    /// Malformed input file or bad command-line usage.
    Parse = 2,
    /// A goal has no path from its start.
    Unreachable = 3,
    /// An agent collided.
    Collision = 4,
    /// An agent stopped making progress before reaching its goal.
    Stuck = 5,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

#[derive(Debug, Parser)]
#[command(name = "rectnav", version, about = "Rotated rectangular corridors and barrier-constrained receding-horizon navigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan a path on a map and cover it with corridors.
    Corridors {
        #[arg(long)]
        map: PathBuf,
        /// Start position `X,Y` in meters.
        #[arg(long, value_parser = commands::parse_point, allow_hyphen_values = true)]
        start: rectnav_core::Point2,
        /// Goal position `X,Y` in meters.
        #[arg(long, value_parser = commands::parse_point, allow_hyphen_values = true)]
        goal: rectnav_core::Point2,
        #[arg(long, default_value = "mdsrc")]
        method: Method,
        /// Corridor parameters as JSON; unspecified fields keep defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Corridor JSON destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render map, path corridors and endpoints.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run a navigation scenario and write per-agent trace CSVs.
    Navigate {
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for `agent<i>.csv` traces and `agent<i>_corridors.json`.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Re-render a saved run as SVG.
    Render {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long = "trace", required = true, num_args = 1..)]
        traces: Vec<PathBuf>,
        #[arg(long = "corridors", num_args = 1..)]
        corridors: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare corridor methods over generated maps or one fixed map.
    Bench {
        /// Generator settings, e.g. `counts=5,10,15,20 size_min=1 size_max=3`.
        #[arg(long, num_args = 1.., conflicts_with = "map")]
        gen: Vec<String>,
        /// Fixed map; seeds then only vary the sampled points.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value_t = 24)]
        targets: usize,
        /// Seeds as `1,2,3` or a range `1..=10`.
        #[arg(long, default_value = "0", value_parser = commands::parse_seeds)]
        seeds: commands::Seeds,
        #[arg(long, value_delimiter = ',', default_value = "mdsrc,src")]
        methods: Vec<Method>,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Include wall-clock timings; the report is then not reproducible.
        #[arg(long)]
        timing: bool,
        /// Report destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Corridors {
            map,
            start,
            goal,
            method,
            params,
            out,
            svg,
        } => commands::corridors(&map, start, goal, method, params.as_deref(), out.as_deref(), svg.as_deref()),
        Command::Navigate { scenario, out_dir, svg } => commands::navigate(&scenario, &out_dir, svg.as_deref()),
        Command::Render {
            scenario,
            traces,
            corridors,
            out,
        } => commands::render(&scenario, &traces, &corridors, &out),
        Command::Bench {
            gen,
            map,
            targets,
            seeds,
            methods,
            params,
            timing,
            out,
        } => commands::bench(&gen, map.as_deref(), targets, seeds, methods, params.as_deref(), timing, out.as_deref()),
    };
    match result {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            e.exit.into()
        }
    }
}
