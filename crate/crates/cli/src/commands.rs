use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use rectnav_core::bench::{run_bench, BenchSpec, MapSource, Method};
use rectnav_core::corridor::{compute_metrics, corridors_from_json, corridors_to_json, plan_path, sequential_corridors};
use rectnav_core::gridmap::load_map;
use rectnav_core::mapgen::GeneratorSpec;
use rectnav_core::navsim::{self, trace_from_csv, trace_to_csv, NavStatus};
use rectnav_core::render::{render_svg, Disk};
use rectnav_core::scenario::{load_scenario, ScenarioError};
use rectnav_core::{Control, CorridorParams, OccupancyGrid, Point2, Pose};

use crate::Exit;

pub struct CliError {
    pub exit: Exit,
    pub error: anyhow::Error,
}

type CliResult = Result<Exit, CliError>;

trait ExitContext<T> {
    fn exit(self, exit: Exit) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> ExitContext<T> for Result<T, E> {
    fn exit(self, exit: Exit) -> Result<T, CliError> {
        self.map_err(|e| CliError { exit, error: e.into() })
    }
}

pub fn parse_point(s: &str) -> Result<Point2, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    let p = Point2::new(
        x.trim().parse().map_err(|_| format!("bad x coordinate {x:?}"))?,
        y.trim().parse().map_err(|_| format!("bad y coordinate {y:?}"))?,
    );
    if !p.is_finite() {
        return Err(format!("point {s:?} is not finite"));
    }
    Ok(p)
}

/// Seeds as a comma list or an inclusive `a..=b` / half-open `a..b` range.
pub fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("bad seed {t:?}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed list {s:?} is empty"));
    }
    Ok(Seeds(seeds))
}

#[derive(Debug, Clone)]
pub struct Seeds(pub Vec<u64>);

fn parse_generator(items: &[String]) -> anyhow::Result<(GeneratorSpec, Vec<usize>)> {
    let mut spec = GeneratorSpec::default();
    let mut counts = vec![5, 10, 15, 20];
    for item in items.iter().flat_map(|s| s.split_whitespace()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("generator setting {item:?} is not key=value"))?;
        let float = || value.parse::<f64>().with_context(|| format!("{key}: bad number {value:?}"));
        match key {
            "counts" => {
                counts = value
                    .split(',')
                    .map(|c| c.parse::<usize>().with_context(|| format!("counts: bad entry {c:?}")))
                    .collect::<Result<_, _>>()?
            }
            "width" => spec.width_m = float()?,
            "height" => spec.height_m = float()?,
            "resolution" => spec.resolution = float()?,
            "size_min" => spec.size_min = float()?,
            "size_max" => spec.size_max = float()?,
            "rotated_fraction" => spec.rotated_fraction = float()?,
            "border_gap" => spec.border_gap = float()?,
            other => return Err(anyhow!("unknown generator setting {other:?}")),
        }
    }
    let sane = spec.width_m > 0.0
        && spec.height_m > 0.0
        && spec.resolution > 0.0
        && spec.size_min > 0.0
        && spec.size_min <= spec.size_max
        && (0.0..=1.0).contains(&spec.rotated_fraction)
        && spec.border_gap >= 0.0;
    if !sane {
        return Err(anyhow!("inconsistent generator settings {spec:?}"));
    }
    Ok((spec, counts))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .exit(Exit::Failure)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .exit(Exit::Failure)
}

fn write_or_stdout(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write(p, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .context("writing stdout")
            .exit(Exit::Failure),
    }
}

fn load_grid(path: &Path) -> Result<OccupancyGrid, CliError> {
    load_map(&read(path)?)
        .with_context(|| format!("parsing map {}", path.display()))
        .exit(Exit::Parse)
}

fn load_params(path: Option<&Path>) -> Result<CorridorParams, CliError> {
    let Some(path) = path else {
        return Ok(CorridorParams::default());
    };
    let params: CorridorParams = serde_json::from_str(&read(path)?)
        .with_context(|| format!("parsing corridor parameters {}", path.display()))
        .exit(Exit::Parse)?;
    params
        .validate()
        .with_context(|| format!("corridor parameters {}", path.display()))
        .exit(Exit::Parse)?;
    Ok(params)
}

fn scenario_exit(e: &ScenarioError) -> Exit {
    match e {
        ScenarioError::Io { .. } => Exit::Failure,
        _ => Exit::Parse,
    }
}

pub fn corridors(
    map: &Path,
    start: Point2,
    goal: Point2,
    method: Method,
    params: Option<&Path>,
    out: Option<&Path>,
    svg: Option<&Path>,
) -> CliResult {
    let grid = load_grid(map)?;
    let params = method.params(&load_params(params)?);
    let path = plan_path(&grid, start, goal, &params)
        .with_context(|| format!("planning on {}", map.display()))
        .exit(Exit::Unreachable)?;
    let t0 = Instant::now();
    let corridors = sequential_corridors(&grid, &path, &params).exit(Exit::Failure)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let metrics = compute_metrics(&corridors, elapsed).exit(Exit::Failure)?;
    write_or_stdout(out, &corridors_to_json(&corridors))?;
    if let Some(svg) = svg {
        let trace: Vec<_> = path
            .points
            .iter()
            .map(|&p| navsim::TraceRecord {
                time: 0.0,
                agent: 0,
                pose: Pose::new(p.x, p.y, 0.0),
                command: Control::ZERO,
                corridor_index: 0,
                min_h: None,
                solver_status: None,
                relaxed: false,
            })
            .collect();
        write(svg, &render_svg(&grid, &corridors, &trace, &[]))?;
    }
    eprintln!(
        "method={} NC={} MA={:.4} TS={:.6}",
        method.as_str(),
        metrics.nc,
        metrics.ma,
        metrics.ts
    );
    Ok(Exit::Ok)
}

fn obstacle_disks(obstacles: &[navsim::ScriptedObstacle]) -> Vec<Disk> {
    obstacles
        .iter()
        .map(|o| Disk {
            center: o.position,
            radius: o.radius,
        })
        .collect()
}

pub fn navigate(scenario_path: &Path, out_dir: &Path, svg: Option<&Path>) -> CliResult {
    let (scenario, setup) = load_scenario(scenario_path).map_err(|e| CliError {
        exit: scenario_exit(&e),
        error: e.into(),
    })?;
    let t0 = Instant::now();
    let result = navsim::run(&setup).exit(Exit::Failure)?;
    let elapsed = t0.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .exit(Exit::Failure)?;
    for (i, outcome) in result.outcomes.iter().enumerate() {
        let rows: Vec<_> = result.trace.iter().filter(|r| r.agent == i).cloned().collect();
        write(&out_dir.join(format!("agent{i}.csv")), &trace_to_csv(&rows, &setup.nav))?;
        write(
            &out_dir.join(format!("agent{i}_corridors.json")),
            &corridors_to_json(&result.initial_corridors[i]),
        )?;
        let min_h = outcome.min_h.map(|h| format!("{h:.6}")).unwrap_or_else(|| "none".into());
        println!(
            "agent {i}: status={} ticks={} path_length={:.3} breaches={} relaxed_ticks={} replans={} min_h={min_h}",
            outcome.status.as_str(),
            outcome.ticks,
            outcome.path_length,
            outcome.breaches,
            outcome.relaxed_ticks,
            outcome.replans,
        );
        if let Some(err) = &outcome.error {
            eprintln!("agent {i}: {err}");
        }
    }
    if let Some(d) = result.min_pairwise_distance {
        println!("min_pairwise_distance={d:.6}");
    }
    eprintln!("runtime={elapsed:.3}s");

    if let Some(svg) = svg {
        let corridors: Vec<_> = result.initial_corridors.concat();
        write(svg, &render_svg(&setup.grid, &corridors, &result.trace, &obstacle_disks(&scenario.obstacles)))?;
    }

    let any = |s: NavStatus| result.outcomes.iter().any(|o| o.status == s);
    Ok(if any(NavStatus::Collided) {
        Exit::Collision
    } else if any(NavStatus::Unreachable) {
        Exit::Unreachable
    } else if result.all_reached() {
        Exit::Ok
    } else {
        Exit::Stuck
    })
}

pub fn render(scenario_path: &Path, traces: &[std::path::PathBuf], corridor_files: &[std::path::PathBuf], out: &Path) -> CliResult {
    let (scenario, setup) = load_scenario(scenario_path).map_err(|e| CliError {
        exit: scenario_exit(&e),
        error: e.into(),
    })?;
    let mut trace = Vec::new();
    for path in traces {
        let rows = trace_from_csv(&read(path)?)
            .with_context(|| format!("parsing trace {}", path.display()))
            .exit(Exit::Parse)?;
        trace.extend(rows);
    }
    // Same row order as a live run: by tick, then agent.
    trace.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.agent.cmp(&b.agent)));
    let mut corridors = Vec::new();
    for path in corridor_files {
        let cs = corridors_from_json(&read(path)?)
            .with_context(|| format!("parsing corridors {}", path.display()))
            .exit(Exit::Parse)?;
        corridors.extend(cs);
    }
    write(out, &render_svg(&setup.grid, &corridors, &trace, &obstacle_disks(&scenario.obstacles)))?;
    Ok(Exit::Ok)
}

#[allow(clippy::too_many_arguments)]
pub fn bench(
    gen: &[String],
    map: Option<&Path>,
    targets: usize,
    seeds: Seeds,
    methods: Vec<Method>,
    params: Option<&Path>,
    timing: bool,
    out: Option<&Path>,
) -> CliResult {
    let source = match map {
        Some(path) => MapSource::Fixed {
            name: path.display().to_string(),
            grid: load_grid(path)?,
        },
        None => {
            let (spec, counts) = parse_generator(gen).exit(Exit::Parse)?;
            MapSource::Generated { spec, counts }
        }
    };
    let spec = BenchSpec {
        source,
        targets,
        seeds: seeds.0,
        methods,
        params: load_params(params)?,
        timing,
    };
    let report = run_bench(&spec).exit(Exit::Failure)?;
    write_or_stdout(out, &report.to_json())?;
    for entry in &report.sweep {
        for m in &entry.methods {
            let count = entry.obstacle_count.map(|c| c.to_string()).unwrap_or_else(|| "map".into());
            eprintln!(
                "count={count} method={} samples={} NC={:.3} (var {:.3}) MA={:.4} (var {:.4})",
                m.method.as_str(),
                m.samples,
                m.nc.mean,
                m.nc.variance,
                m.ma.mean,
                m.ma.variance
            );
        }
    }
    Ok(Exit::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_and_seeds_parse() {
        assert_eq!(parse_point("1.5, -2").unwrap(), Point2::new(1.5, -2.0));
        assert!(parse_point("1.5").is_err());
        assert!(parse_point("a,2").is_err());
        assert_eq!(parse_seeds("3,1").unwrap().0, vec![3, 1]);
        assert_eq!(parse_seeds("1..=3").unwrap().0, vec![1, 2, 3]);
        assert_eq!(parse_seeds("1..3").unwrap().0, vec![1, 2]);
        assert!(parse_seeds("3..3").is_err());
    }

    #[test]
    fn generator_settings_parse() {
        let (spec, counts) = parse_generator(&["counts=5,10".into(), "size_max=2.5 rotated_fraction=1".into()]).unwrap();
        assert_eq!(counts, vec![5, 10]);
        assert_eq!(spec.size_max, 2.5);
        assert_eq!(spec.rotated_fraction, 1.0);
        assert!(parse_generator(&["bogus=1".into()]).is_err());
        assert!(parse_generator(&["size_min=4".into()]).is_err());
    }
}
