//! Corridor-method comparison over generated maps.
//!
//! For every obstacle count and seed a map is generated, one start and a
//! batch of targets are sampled, and each target's path is covered with
//! corridors by every method. The path is shared between methods so the
//! comparison isolates corridor construction.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::{compute_metrics, plan_path, sequential_corridors, CorridorError, CorridorMetrics, CorridorParams};
use crate::geom::Point2;
use crate::gridmap::OccupancyGrid;
use crate::mapgen::{generate, sample_free, substream, GeneratorSpec};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Draws per sampled point before giving up on a map.
const SAMPLE_ATTEMPTS: usize = 10_000;
/// Fresh maps tried per (count, seed) when a start cannot be placed.
const MAP_RETRIES: u64 = 16;
/// Resamples per target when no path exists.
const TARGET_RETRIES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Best of `n_c` frame orientations.
    Mdsrc,
    /// Axis-aligned only.
    Src,
}

impl Method {
    pub fn params(&self, base: &CorridorParams) -> CorridorParams {
        match self {
            Method::Mdsrc => *base,
            Method::Src => base.axis_aligned(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mdsrc => "mdsrc",
            Method::Src => "src",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mdsrc" => Ok(Method::Mdsrc),
            "src" => Ok(Method::Src),
            other => Err(format!("unknown method {other:?} (expected mdsrc or src)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("invalid benchmark spec: {0}")]
    Invalid(String),
    #[error("could not place a start on any map for count {count}, seed {seed}")]
    NoStart { count: usize, seed: u64 },
    #[error("corridor construction failed on count {count}, seed {seed}: {reason}")]
    Corridor { count: usize, seed: u64, reason: String },
}

/// Where benchmark maps come from.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    /// One generated map per obstacle count and seed.
    Generated { spec: GeneratorSpec, counts: Vec<usize> },
    /// A fixed map; seeds only vary the sampled points.
    Fixed { name: String, grid: OccupancyGrid },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub source: MapSource,
    pub targets: usize,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub params: CorridorParams,
    /// Include wall-clock corridor timings (not reproducible run to run).
    pub timing: bool,
}

/// Mean and sample variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                variance: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, variance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: Method,
    pub samples: usize,
    pub nc: Summary,
    pub ma: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    /// Absent for a fixed map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstacle_count: Option<usize>,
    /// Targets for which no path existed even after resampling.
    pub skipped_targets: usize,
    pub methods: Vec<MethodStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    pub params: CorridorParams,
    pub seeds: Vec<u64>,
    pub targets_per_map: usize,
    pub sweep: Vec<SweepEntry>,
}

impl BenchReport {
    /// Stats for `method` at obstacle count `count` (`None` for a fixed map).
    pub fn stats(&self, count: Option<usize>, method: Method) -> Option<&MethodStats> {
        self.sweep
            .iter()
            .find(|e| e.obstacle_count == count)?
            .methods
            .iter()
            .find(|m| m.method == method)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Metrics of each method on one path's corridors. Timing covers corridor
/// construction only. `None` means the pair is unusable: there is no path, or
/// the path squeezes through a gap too narrow to seed a corridor.
pub fn measure(grid: &OccupancyGrid, start: Point2, goal: Point2, params: &CorridorParams, methods: &[Method]) -> Result<Option<Vec<CorridorMetrics>>, String> {
    let Ok(path) = plan_path(grid, start, goal, params) else {
        return Ok(None);
    };
    let mut out = Vec::with_capacity(methods.len());
    for m in methods {
        let p = m.params(params);
        let t0 = Instant::now();
        let corridors = match sequential_corridors(grid, &path, &p) {
            Ok(c) => c,
            Err(e) if seed_blocked(&e) => return Ok(None),
            Err(e) => return Err(e.to_string()),
        };
        let elapsed = t0.elapsed().as_secs_f64();
        out.push(compute_metrics(&corridors, elapsed).map_err(|e| e.to_string())?);
    }
    Ok(Some(out))
}

fn seed_blocked(e: &CorridorError) -> bool {
    match e {
        CorridorError::AtPathIndex { source, .. } => seed_blocked(source),
        CorridorError::InitialSquareBlocked(_) | CorridorError::SeedOccupied(_) => true,
        _ => false,
    }
}

pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport, BenchError> {
    let counts: Vec<Option<usize>> = match &spec.source {
        MapSource::Generated { counts, .. } => counts.iter().map(|&c| Some(c)).collect(),
        MapSource::Fixed { .. } => vec![None],
    };
    if counts.is_empty() || spec.seeds.is_empty() || spec.methods.is_empty() || spec.targets == 0 {
        return Err(BenchError::Invalid("counts, seeds, methods and targets must be nonempty".into()));
    }
    spec.params.validate().map_err(|e| BenchError::Invalid(e.to_string()))?;

    let mut sweep = Vec::with_capacity(counts.len());
    for (ci, &count) in counts.iter().enumerate() {
        let mut samples: Vec<Vec<CorridorMetrics>> = vec![Vec::new(); spec.methods.len()];
        let mut skipped = 0;
        for &seed in &spec.seeds {
            // Stream layout: maps on even streams, point sampling on odd ones.
            let base = (ci as u64) * 2 * MAP_RETRIES;
            let placed = (0..MAP_RETRIES).find_map(|attempt| {
                let grid = match &spec.source {
                    MapSource::Generated { spec: gen, .. } => {
                        let gen = GeneratorSpec {
                            obstacle_count: count.unwrap_or(0),
                            ..gen.clone()
                        };
                        generate(&gen, &mut substream(seed, base + 2 * attempt)).0
                    }
                    MapSource::Fixed { grid, .. } => grid.clone(),
                };
                let search = grid.dilated(spec.params.delta_l0 + grid.resolution());
                let mut rng = substream(seed, base + 2 * attempt + 1);
                let start = sample_free(&search, &mut rng, SAMPLE_ATTEMPTS)?;
                Some((grid, search, rng, start))
            });
            let Some((grid, search, mut rng, start)) = placed else {
                return Err(BenchError::NoStart {
                    count: count.unwrap_or(0),
                    seed,
                });
            };
            for _ in 0..spec.targets {
                let mut done = false;
                for _ in 0..TARGET_RETRIES {
                    let Some(goal) = sample_free(&search, &mut rng, SAMPLE_ATTEMPTS) else {
                        break;
                    };
                    let measured = measure(&grid, start, goal, &spec.params, &spec.methods).map_err(|reason| {
                        BenchError::Corridor {
                            count: count.unwrap_or(0),
                            seed,
                            reason,
                        }
                    })?;
                    if let Some(metrics) = measured {
                        for (bucket, m) in samples.iter_mut().zip(metrics) {
                            bucket.push(m);
                        }
                        done = true;
                        break;
                    }
                }
                if !done {
                    skipped += 1;
                }
            }
        }
        let methods = spec
            .methods
            .iter()
            .zip(&samples)
            .map(|(&method, ms)| {
                let nc: Vec<f64> = ms.iter().map(|m| m.nc as f64).collect();
                let ma: Vec<f64> = ms.iter().map(|m| m.ma).collect();
                let ts: Vec<f64> = ms.iter().map(|m| m.ts).collect();
                MethodStats {
                    method,
                    samples: ms.len(),
                    nc: Summary::of(&nc),
                    ma: Summary::of(&ma),
                    ts: spec.timing.then(|| Summary::of(&ts)),
                }
            })
            .collect();
        sweep.push(SweepEntry {
            obstacle_count: count,
            skipped_targets: skipped,
            methods,
        });
    }

    let (generator, map) = match &spec.source {
        MapSource::Generated { spec, .. } => (Some(spec.clone()), None),
        MapSource::Fixed { name, .. } => (None, Some(name.clone())),
    };
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        generator,
        map,
        params: spec.params,
        seeds: spec.seeds.clone(),
        targets_per_map: spec.targets,
        sweep,
    })
}
