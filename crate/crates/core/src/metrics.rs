//! Per-round observables and fundamental-diagram aggregation.

use crate::kinematics::{Agent, SimState};
use crate::lattice::{Offset, Species};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupStats {
    pub n_agents: usize,
    /// Mean Euclidean displacement, cells per round.
    pub mean_speed: f64,
    /// Density times mean displacement projected on the walking direction.
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub round: u64,
    /// Indexed by `Species::index()`.
    pub species: [GroupStats; 2],
    pub total: GroupStats,
    pub lane_order: f64,
    pub deadlock: bool,
}

/// Mean of the Euclidean lengths of `displacements`; 0 for none.
pub fn mean_speed(displacements: impl IntoIterator<Item = Offset>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for d in displacements {
        sum += d.norm();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// `J = ρ · v̄` with `v̄` projected on each agent's heading, over `floor_cells`.
pub fn flow<'a>(agents: impl IntoIterator<Item = &'a Agent>, floor_cells: usize) -> f64 {
    if floor_cells == 0 {
        return 0.0;
    }
    let progress: i64 = agents
        .into_iter()
        .map(|a| (a.species.heading() * a.vel.dx) as i64)
        .sum();
    progress as f64 / floor_cells as f64
}

/// Row-wise segregation of the two species:
/// `Y = Σ_rows w_r |n⁺_r − n⁻_r| / (n⁺_r + n⁻_r)` with `w_r = n_r / N`.
/// Returns 0 for an empty population.
pub fn lane_order_parameter(agents: &[Agent], height: i32) -> f64 {
    if agents.is_empty() {
        return 0.0;
    }
    let mut rows = vec![[0i64; 2]; height.max(1) as usize];
    for a in agents {
        rows[a.pos.y as usize][a.species.index()] += 1;
    }
    let imbalance: i64 = rows.iter().map(|[r, l]| (r - l).abs()).sum();
    imbalance as f64 / agents.len() as f64
}

/// True iff `history` contains `window` consecutive values below `eps`.
pub fn deadlock_detector(history: &[f64], window: usize, eps: f64) -> bool {
    let mut run = 0;
    for &v in history {
        run = if v < eps { run + 1 } else { 0 };
        if run >= window {
            return true;
        }
    }
    false
}

/// Streaming form of [`deadlock_detector`]; rounds in which one species is
/// absent reset the count.
#[derive(Debug, Clone)]
pub struct DeadlockDetector {
    pub window: usize,
    pub eps: f64,
    run: usize,
}

impl DeadlockDetector {
    pub fn new(window: usize, eps: f64) -> Self {
        DeadlockDetector { window, eps, run: 0 }
    }

    pub fn push(&mut self, mean_speed: f64, both_species: bool) -> bool {
        self.run = if both_species && mean_speed < self.eps { self.run + 1 } else { 0 };
        self.run >= self.window
    }
}

fn group<'a>(agents: impl Iterator<Item = &'a Agent> + Clone, floor_cells: usize) -> GroupStats {
    GroupStats {
        n_agents: agents.clone().count(),
        mean_speed: mean_speed(agents.clone().map(|a| a.vel)),
        flow: flow(agents, floor_cells),
    }
}

/// Measures the state right after a round.
pub fn measure(state: &SimState, floor_cells: usize, detector: &mut DeadlockDetector) -> MetricsRecord {
    let species = Species::ALL.map(|s| group(state.agents.iter().filter(move |a| a.species == s), floor_cells));
    let total = group(state.agents.iter(), floor_cells);
    let both = species.iter().all(|g| g.n_agents > 0);
    MetricsRecord {
        round: state.round,
        species,
        total,
        lane_order: lane_order_parameter(&state.agents, state.grid.height()),
        deadlock: detector.push(total.mean_speed, both),
    }
}

/// Per-round totals of one run, enough to aggregate a fundamental diagram.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSeries {
    pub flow: Vec<f64>,
    pub mean_speed: Vec<f64>,
    pub lane_order: Vec<f64>,
    pub deadlocked: bool,
}

impl RunSeries {
    pub fn push(&mut self, r: &MetricsRecord) {
        self.flow.push(r.total.flow);
        self.mean_speed.push(r.total.mean_speed);
        self.lane_order.push(r.lane_order);
        self.deadlocked |= r.deadlock;
    }

    pub fn from_records(records: &[MetricsRecord]) -> Self {
        let mut s = RunSeries::default();
        records.iter().for_each(|r| s.push(r));
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdPoint {
    pub density: f64,
    pub mean_flow: f64,
    /// Population standard deviation of per-seed time averages.
    pub std_flow: f64,
    pub mean_speed: f64,
    pub mean_lane_order: f64,
    pub n_seeds: usize,
    pub deadlock_fraction: f64,
}

fn time_average(xs: &[f64], warmup: usize) -> f64 {
    let tail = &xs[warmup.min(xs.len())..];
    if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Time-averages each run after `warmup` rounds, then averages across runs.
/// Deadlocked runs stay in the averages.
pub fn fd_aggregate(density: f64, runs: &[RunSeries], warmup: usize) -> FdPoint {
    let flows: Vec<f64> = runs.iter().map(|r| time_average(&r.flow, warmup)).collect();
    let speeds: Vec<f64> = runs.iter().map(|r| time_average(&r.mean_speed, warmup)).collect();
    let lanes: Vec<f64> = runs.iter().map(|r| time_average(&r.lane_order, warmup)).collect();
    let (mean_flow, std_flow) = mean_std(&flows);
    let deadlocked = runs.iter().filter(|r| r.deadlocked).count();
    FdPoint {
        density,
        mean_flow,
        std_flow,
        mean_speed: mean_std(&speeds).0,
        mean_lane_order: mean_std(&lanes).0,
        n_seeds: runs.len(),
        deadlock_fraction: if runs.is_empty() { 0.0 } else { deadlocked as f64 / runs.len() as f64 },
    }
}
