//! Simulation runs, density sweeps and their text outputs.
//!
//! Every output here is a pure function of the configuration and flags:
//! per-run seeds are derived from the base seed and the run's indices, and
//! parallel results are merged back in index order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::kinematics::{Model, SimState};
use crate::lattice::Tile;
use crate::metrics::{self, DeadlockDetector, FdPoint, MetricsRecord, RunSeries};
use crate::scenario::{self, ScenarioConfig, ScenarioError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit code: 2 for I/O problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Io { .. } | ExperimentError::Scenario(ScenarioError::Io { .. }) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(scenario::parse_config(&text).map_err(ScenarioError::from)?)
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one run inside a sweep, mixed from the base seed and the
/// (parameter, density, seed) indices.
pub fn derive_seed(base: u64, param_index: u64, density_index: u64, seed_index: u64) -> u64 {
    [param_index, density_index, seed_index]
        .into_iter()
        .fold(splitmix64(base), |acc, i| splitmix64(acc ^ splitmix64(i.wrapping_add(1))))
}

/// Text frame: one character per cell, row 0 first.
pub fn render(state: &SimState) -> String {
    let g = &state.grid;
    let mut chars: Vec<char> = (0..g.cell_count())
        .map(|i| if g.tile(g.pos_of(i)) == Tile::Wall { '#' } else { '.' })
        .collect();
    for a in &state.agents {
        chars[g.index(a.pos)] = a.species.symbol();
    }
    let mut out = String::with_capacity(chars.len() + g.height() as usize);
    for row in chars.chunks(g.width() as usize) {
        out.extend(row);
        out.push('\n');
    }
    out
}

/// Outcome of a single simulation.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub state: SimState,
}

/// Runs `config.rounds` rounds, calling `on_round` after every round.
pub fn simulate(
    config: &ScenarioConfig,
    base_dir: &Path,
    model: Model,
    mut on_round: impl FnMut(&SimState, &MetricsRecord),
) -> Result<RunOutput, ExperimentError> {
    let mut state = scenario::build(config, base_dir)?.with_model(model);
    let floor = state.grid.floor_count();
    let mut detector = DeadlockDetector::new(config.deadlock_window, config.deadlock_eps);
    let mut records = Vec::with_capacity(config.rounds as usize);
    for _ in 0..config.rounds {
        state.step();
        let r = metrics::measure(&state, floor, &mut detector);
        on_round(&state, &r);
        records.push(r);
    }
    Ok(RunOutput { records, state })
}

pub const METRICS_HEADER: &str = "round,species,n_agents,mean_speed,flow,lane_order,deadlock";

/// `metrics.csv`: a comment line, the header, then three rows per round
/// (right, left, total).
pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# rows per round: 3 (right, left, total); rounds: {}; data rows: {}",
        records.len(),
        3 * records.len()
    );
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in records {
        let groups = [("right", &r.species[0]), ("left", &r.species[1]), ("total", &r.total)];
        for (name, g) in groups {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{}",
                r.round, name, g.n_agents, g.mean_speed, g.flow, r.lane_order, r.deadlock as u8
            );
        }
    }
    s
}

/// Post-warmup summary of one run.
pub fn summary_line(config: &ScenarioConfig, out: &RunOutput) -> String {
    let series = RunSeries::from_records(&out.records);
    let p = metrics::fd_aggregate(config.density, std::slice::from_ref(&series), config.warmup as usize);
    format!(
        "rounds={} agents={} mean_speed={:.4} mean_flow={:.4} lane_order={:.4} deadlock={}",
        config.rounds,
        out.state.population(),
        p.mean_speed,
        p.mean_flow,
        p.mean_lane_order,
        if series.deadlocked { "yes" } else { "no" }
    )
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Write a frame every this many rounds (0 = never).
    pub snapshot_every: u64,
}

/// The `run` command: simulates and writes `metrics.csv` (and frames) into
/// `out_dir`. Returns the summary line.
pub fn run_to_dir(
    config: &ScenarioConfig,
    base_dir: &Path,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<String, ExperimentError> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let frames_dir = out_dir.join("frames");
    if opts.snapshot_every > 0 {
        fs::create_dir_all(&frames_dir).map_err(io_err(&frames_dir))?;
    }
    let mut frame_error = None;
    let out = simulate(&config, base_dir, Model::Counterflow, |state, _| {
        if opts.snapshot_every > 0 && state.round % opts.snapshot_every == 0 && frame_error.is_none() {
            let path = frames_dir.join(format!("{:06}.txt", state.round));
            if let Err(e) = fs::write(&path, render(state)) {
                frame_error = Some(ExperimentError::Io {
                    path: path.display().to_string(),
                    source: e,
                });
            }
        }
    })?;
    if let Some(e) = frame_error {
        return Err(e);
    }
    let path = out_dir.join("metrics.csv");
    fs::write(&path, metrics_csv(&out.records)).map_err(io_err(&path))?;
    Ok(summary_line(&config, &out))
}

/// Parses a density list: `0.1,0.2,0.3` or `0.05..0.6 step 0.05`.
pub fn parse_densities(spec: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = || ExperimentError::Usage(format!("--densities: cannot parse `{spec}`"));
    let values = if let Some((range, step)) = spec.split_once("step") {
        let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let step: f64 = step.trim().parse().map_err(|_| bad())?;
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| round9(lo + k as f64 * step)).collect()
    } else {
        spec.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(ExperimentError::Usage(format!("--densities: values must lie in [0, 1], got `{spec}`")));
    }
    Ok(values)
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Runs `seeds` simulations per density and aggregates them.
pub fn fd_sweep(
    config: &ScenarioConfig,
    base_dir: &Path,
    densities: &[f64],
    seeds: usize,
    param_index: u64,
    jobs: usize,
    model: Model,
) -> Result<Vec<FdPoint>, ExperimentError> {
    let tasks: Vec<(usize, usize)> = (0..densities.len())
        .flat_map(|d| (0..seeds).map(move |s| (d, s)))
        .collect();
    let run_one = |&(d, s): &(usize, usize)| -> Result<RunSeries, ExperimentError> {
        let mut cfg = config.clone();
        cfg.density = densities[d];
        cfg.seed = derive_seed(config.seed, param_index, d as u64, s as u64);
        let mut series = RunSeries::default();
        simulate(&cfg, base_dir, model, |_, r| series.push(r))?;
        Ok(series)
    };
    let results: Vec<Result<RunSeries, ExperimentError>> = if jobs <= 1 {
        tasks.iter().map(run_one).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ExperimentError::Usage(format!("--jobs: {e}")))?;
        pool.install(|| tasks.par_iter().map(run_one).collect())
    };
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(results
        .chunks(seeds.max(1))
        .zip(densities)
        .map(|(runs, &d)| metrics::fd_aggregate(d, runs, config.warmup as usize))
        .collect())
}

pub const FD_HEADER: &str = "density,mean_flow,std_flow,mean_speed,mean_lane_order,deadlock_fraction,n_seeds";

fn fd_fields(p: &FdPoint) -> [String; 7] {
    [
        format!("{:.6}", p.density),
        format!("{:.6}", p.mean_flow),
        format!("{:.6}", p.std_flow),
        format!("{:.6}", p.mean_speed),
        format!("{:.6}", p.mean_lane_order),
        format!("{:.6}", p.deadlock_fraction),
        p.n_seeds.to_string(),
    ]
}

/// `fd.csv`; `std_flow` is the population standard deviation across seeds.
pub fn fd_csv(points: &[FdPoint]) -> String {
    let mut s = String::from("# std_flow: population standard deviation over seeds (divide by n_seeds)\n");
    s.push_str(FD_HEADER);
    s.push('\n');
    for p in points {
        s.push_str(&fd_fields(p).join(","));
        s.push('\n');
    }
    s
}

/// Whitespace-column twin of `fd.csv` for gnuplot.
pub fn fd_dat(points: &[FdPoint]) -> String {
    let mut s = format!("# {}\n", FD_HEADER.replace(',', " "));
    for p in points {
        s.push_str(&fd_fields(p).join(" "));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    KF,
    NMax,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self, ExperimentError> {
        match name {
            "kf" => Ok(SweepParam::KF),
            "n_max" => Ok(SweepParam::NMax),
            other => Err(ExperimentError::Usage(format!(
                "--param: unknown parameter `{other}` (expected kf or n_max)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::KF => "kf",
            SweepParam::NMax => "n_max",
        }
    }

    /// Applies `value` to a copy of `config`, validating the result.
    pub fn apply(self, config: &ScenarioConfig, value: &str) -> Result<ScenarioConfig, ExperimentError> {
        let mut cfg = config.clone();
        let bad = |why: String| ExperimentError::Usage(format!("--values: `{value}` for {}: {why}", self.name()));
        cfg.set(self.name(), value).map_err(|e| bad(format!("{e:?}")))?;
        cfg.validate().map_err(|(_, m)| bad(m))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct SweepCurve {
    pub value: String,
    pub points: Vec<FdPoint>,
}

pub fn sweep(
    config: &ScenarioConfig,
    base_dir: &Path,
    param: SweepParam,
    values: &[String],
    densities: &[f64],
    seeds: usize,
    jobs: usize,
) -> Result<Vec<SweepCurve>, ExperimentError> {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let cfg = param.apply(config, v)?;
            let points = fd_sweep(&cfg, base_dir, densities, seeds, k as u64, jobs, Model::Counterflow)?;
            Ok(SweepCurve { value: v.clone(), points })
        })
        .collect()
}

/// Long-format table of all sweep curves.
pub fn sweep_csv(param: SweepParam, curves: &[SweepCurve]) -> String {
    let mut s = String::from("# std_flow: population standard deviation over seeds (divide by n_seeds)\n");
    let _ = writeln!(s, "param,value,{FD_HEADER}");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(s, "{},{},{}", param.name(), c.value, fd_fields(p).join(","));
        }
    }
    s
}

/// Writes `fd.csv` and `fd.dat` into `out_dir`.
pub fn write_fd(out_dir: &Path, stem: &str, points: &[FdPoint]) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv = out_dir.join(format!("{stem}.csv"));
    let dat = out_dir.join(format!("{stem}.dat"));
    fs::write(&csv, fd_csv(points)).map_err(io_err(&csv))?;
    fs::write(&dat, fd_dat(points)).map_err(io_err(&dat))?;
    Ok(vec![csv, dat])
}
