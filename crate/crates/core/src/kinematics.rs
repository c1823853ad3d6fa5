//! Agents, reachable cells, destination probabilities and the round update.
//!
//! The update is random sequential: every round the agent order is shuffled
//! once, then each agent in turn draws one destination from its reachable
//! cells against the positions already updated this round. The random stream
//! is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with a 64-bit seed; a round
//! consumes exactly one shuffle plus one uniform draw per agent, whatever the
//! counterflow settings, so runs with `k_f = 0` replay the base model bit for
//! bit.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::counterflow::{self, CounterflowParams, NeighborRef};
use crate::lattice::{supercover, Goal, Grid, Offset, Pos, Species, StaticField, Tile};

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: u32,
    pub pos: Pos,
    /// Displacement realised in the previous round.
    pub vel: Offset,
    pub v_max: u32,
    pub species: Species,
}

impl Agent {
    pub fn new(id: u32, pos: Pos, v_max: u32, species: Species) -> Self {
        Agent {
            id,
            pos,
            vel: Offset::ZERO,
            v_max,
            species,
        }
    }

    pub fn with_vel(mut self, vel: Offset) -> Self {
        self.vel = vel;
        self
    }
}

/// Seeded simulation random stream.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// Whether the comoving potential takes part in destination selection.
/// `Base` never looks at neighbours at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Base,
    Counterflow,
}

/// What happens to an agent standing on one of its goal cells at the end of
/// a round.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// Nothing (directional goals, periodic corridors).
    None,
    /// Removed and re-inserted on a random free cell of its origin edge; if
    /// the edge is full the agent waits for a later round.
    Respawn { origins: [Vec<Pos>; 2] },
    /// Removed from the simulation.
    Exit,
}

const EMPTY: u32 = u32::MAX;

/// Cell occupancy: which agent index stands on each cell.
#[derive(Debug, Clone)]
pub struct Occupancy {
    cells: Vec<u32>,
}

impl Occupancy {
    pub fn new(grid: &Grid, agents: &[Agent]) -> Self {
        let mut cells = vec![EMPTY; grid.cell_count()];
        for (k, a) in agents.iter().enumerate() {
            cells[grid.index(a.pos)] = k as u32;
        }
        Occupancy { cells }
    }

    pub fn is_occupied(&self, grid: &Grid, p: Pos) -> bool {
        self.cells[grid.index(p)] != EMPTY
    }

    fn set(&mut self, grid: &Grid, p: Pos, slot: Option<usize>) {
        self.cells[grid.index(p)] = slot.map_or(EMPTY, |k| k as u32);
    }
}

/// Candidate moves for one speed: every offset in the disk of radius
/// `v_max` with the cells its straight path touches, ordered by (dy, dx).
#[derive(Debug, Clone)]
pub struct ReachStencil {
    v_max: u32,
    moves: Vec<(Offset, Vec<Offset>)>,
}

impl ReachStencil {
    pub fn new(v_max: u32) -> Self {
        let r = v_max as i32;
        let mut moves = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let off = Offset::new(dx, dy);
                if off.norm_sq() > (r * r) as i64 {
                    continue;
                }
                let mut path = Vec::new();
                supercover(Pos::new(0, 0), off, |p| {
                    if p != Pos::new(0, 0) {
                        path.push(Offset::new(p.x, p.y));
                    }
                });
                moves.push((off, path));
            }
        }
        ReachStencil { v_max, moves }
    }

    pub fn v_max(&self) -> u32 {
        self.v_max
    }
}

/// Floor cells within Euclidean radius `v_max` of the agent whose straight
/// path from the agent's cell touches neither walls nor other agents, plus
/// the agent's own cell; ordered by (dy, dx). Each entry carries the
/// displacement that reaches it.
pub fn reachable_cells(agent: &Agent, grid: &Grid, occupancy: &Occupancy) -> Vec<(Pos, Offset)> {
    let mut out = Vec::new();
    reachable_cells_into(agent, &ReachStencil::new(agent.v_max), grid, occupancy, &mut out);
    out
}

pub fn reachable_cells_into(
    agent: &Agent,
    stencil: &ReachStencil,
    grid: &Grid,
    occupancy: &Occupancy,
    out: &mut Vec<(Pos, Offset)>,
) {
    debug_assert_eq!(stencil.v_max, agent.v_max);
    out.clear();
    let at = agent.pos;
    'moves: for (off, path) in &stencil.moves {
        if off.is_zero() {
            out.push((at, *off));
            continue;
        }
        for step in path {
            let Some(c) = grid.wrap(Pos::new(at.x + step.dx, at.y + step.dy)) else {
                continue 'moves;
            };
            if grid.tile(c) == Tile::Wall || occupancy.is_occupied(grid, c) {
                continue 'moves;
            }
        }
        let dest = grid.wrap(Pos::new(at.x + off.dx, at.y + off.dy)).expect("path ends on the destination");
        out.push((dest, *off));
    }
}

/// Selection distribution over `candidates`:
/// `w(c) ∝ exp(k_S · (S(pos) − S(c))) · exp(k_f · Σ sign_j P_j(c))`.
///
/// Weights are formed in log space relative to the best candidate and
/// floored at the smallest positive normal `f64` before normalising.
pub fn destination_probabilities(
    agent: &Agent,
    candidates: &[Pos],
    field: &StaticField,
    neighbors: &[NeighborRef],
    k_s: f64,
    params: &CounterflowParams,
    grid: &Grid,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(candidates.len());
    destination_probabilities_into(agent, candidates, field, neighbors, k_s, params, grid, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
pub fn destination_probabilities_into(
    agent: &Agent,
    candidates: &[Pos],
    field: &StaticField,
    neighbors: &[NeighborRef],
    k_s: f64,
    params: &CounterflowParams,
    grid: &Grid,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.extend(candidates.iter().map(|&c| {
        let mut log_w = k_s * field.gain(grid, agent.pos, c);
        if k_s == 0.0 && log_w.is_nan() {
            log_w = 0.0;
        }
        if !neighbors.is_empty() {
            log_w += counterflow::counterflow_exponent(c, neighbors, grid, params);
        }
        log_w
    }));
    normalize_log_weights(out);
}

/// Turns log-weights into probabilities in place.
pub fn normalize_log_weights(weights: &mut [f64]) {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for w in weights.iter_mut() {
        let v = if max.is_infinite() {
            if *w == max {
                1.0
            } else {
                0.0
            }
        } else {
            (*w - max).exp()
        };
        *w = v.max(f64::MIN_POSITIVE);
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// Inverse-CDF draw: first index whose cumulative weight exceeds
/// `u · Σ weights`. Weights need not be normalised.
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if acc > target {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Complete simulation state; the unit of stepping.
#[derive(Debug, Clone)]
pub struct SimState {
    pub grid: Grid,
    pub fields: [StaticField; 2],
    pub agents: Vec<Agent>,
    /// Agents removed at a goal and waiting for a free origin cell.
    pub waiting: Vec<Agent>,
    pub round: u64,
    pub rng: SimRng,
    pub params: CounterflowParams,
    pub k_s: f64,
    pub model: Model,
    pub boundary: Boundary,
    occupancy: Occupancy,
    goal_mask: [Vec<bool>; 2],
    stencils: Vec<ReachStencil>,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    order: Vec<usize>,
    neighbors: Vec<NeighborRef>,
    reach: Vec<(Pos, Offset)>,
    cells: Vec<Pos>,
    probs: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error("agent {id} at ({x}, {y}): {reason}")]
    BadAgent { id: u32, x: i32, y: i32, reason: &'static str },
}

impl SimState {
    pub fn new(
        grid: Grid,
        agents: Vec<Agent>,
        params: CounterflowParams,
        k_s: f64,
        rng: SimRng,
        boundary: Boundary,
    ) -> Result<Self, StateError> {
        let fields = [
            StaticField::build(&grid, Species::Right)?,
            StaticField::build(&grid, Species::Left)?,
        ];
        let mut seen = vec![false; grid.cell_count()];
        for a in &agents {
            let bad = |reason| StateError::BadAgent {
                id: a.id,
                x: a.pos.x,
                y: a.pos.y,
                reason,
            };
            if !grid.is_floor(a.pos) {
                return Err(bad("not on a floor cell"));
            }
            if std::mem::replace(&mut seen[grid.index(a.pos)], true) {
                return Err(bad("cell already occupied"));
            }
            if a.v_max == 0 {
                return Err(bad("v_max must be at least 1"));
            }
        }
        let goal_mask = Species::ALL.map(|s| {
            let mut mask = vec![false; grid.cell_count()];
            if let Goal::Cells(cells) = grid.goal(s) {
                for &c in cells {
                    mask[grid.index(c)] = true;
                }
            }
            mask
        });
        let occupancy = Occupancy::new(&grid, &agents);
        let top = agents.iter().map(|a| a.v_max).max().unwrap_or(0);
        let stencils = (0..=top).map(ReachStencil::new).collect();
        Ok(SimState {
            grid,
            fields,
            agents,
            waiting: Vec::new(),
            round: 0,
            rng,
            params,
            k_s,
            model: Model::Counterflow,
            boundary,
            occupancy,
            goal_mask,
            stencils,
            scratch: Scratch::default(),
        })
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn occupancy(&self) -> &Occupancy {
        &self.occupancy
    }

    pub fn field(&self, species: Species) -> &StaticField {
        &self.fields[species.index()]
    }

    /// Agents on the grid plus those waiting to respawn.
    pub fn population(&self) -> usize {
        self.agents.len() + self.waiting.len()
    }

    /// Advances the state by one round.
    pub fn step(&mut self) {
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.order.clear();
        scratch.order.extend(0..self.agents.len());
        self.rng.shuffle(&mut scratch.order);

        for &k in &scratch.order {
            match self.model {
                Model::Counterflow => counterflow::select_neighbors_into(
                    k,
                    &self.agents,
                    &self.grid,
                    &self.fields,
                    &self.params,
                    &mut scratch.neighbors,
                ),
                Model::Base => scratch.neighbors.clear(),
            }
            let agent = &self.agents[k];
            let stencil = &self.stencils[agent.v_max as usize];
            reachable_cells_into(agent, stencil, &self.grid, &self.occupancy, &mut scratch.reach);
            scratch.cells.clear();
            scratch.cells.extend(scratch.reach.iter().map(|&(c, _)| c));
            destination_probabilities_into(
                agent,
                &scratch.cells,
                &self.fields[agent.species.index()],
                &scratch.neighbors,
                self.k_s,
                &self.params,
                &self.grid,
                &mut scratch.probs,
            );
            let u = self.rng.uniform();
            let (dest, disp) = scratch.reach[sample_index(&scratch.probs, u)];
            let old = agent.pos;
            self.occupancy.set(&self.grid, old, None);
            self.occupancy.set(&self.grid, dest, Some(k));
            let agent = &mut self.agents[k];
            agent.pos = dest;
            agent.vel = disp;
        }
        self.scratch = scratch;
        self.handle_goals();
        self.round += 1;
    }

    pub fn run(&mut self, rounds: u64) {
        for _ in 0..rounds {
            self.step();
        }
    }

    fn handle_goals(&mut self) {
        if matches!(self.boundary, Boundary::None) {
            return;
        }
        let grid = &self.grid;
        let mask = &self.goal_mask;
        let arrived = |a: &Agent| mask[a.species.index()][grid.index(a.pos)];
        if self.agents.iter().any(arrived) {
            let (gone, stay): (Vec<Agent>, Vec<Agent>) = std::mem::take(&mut self.agents).into_iter().partition(arrived);
            self.agents = stay;
            if matches!(self.boundary, Boundary::Respawn { .. }) {
                self.waiting.extend(gone);
            }
            self.occupancy = Occupancy::new(&self.grid, &self.agents);
        }
        let Boundary::Respawn { origins } = &self.boundary else {
            return;
        };
        let mut still_waiting = Vec::new();
        for mut a in std::mem::take(&mut self.waiting) {
            let free: Vec<Pos> = origins[a.species.index()]
                .iter()
                .copied()
                .filter(|&c| !self.occupancy.is_occupied(&self.grid, c))
                .collect();
            if free.is_empty() {
                still_waiting.push(a);
                continue;
            }
            a.pos = free[self.rng.below(free.len())];
            self.occupancy.set(&self.grid, a.pos, Some(self.agents.len()));
            self.agents.push(a);
        }
        self.waiting = still_waiting;
    }

    /// Checks exclusion, floor placement, the speed bound and occupancy
    /// bookkeeping.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![false; self.grid.cell_count()];
        for (k, a) in self.agents.iter().enumerate() {
            if !self.grid.is_floor(a.pos) {
                return Err(format!("agent {} off floor at {:?}", a.id, a.pos));
            }
            let i = self.grid.index(a.pos);
            if std::mem::replace(&mut seen[i], true) {
                return Err(format!("two agents share {:?}", a.pos));
            }
            if a.vel.norm_sq() > (a.v_max as i64).pow(2) {
                return Err(format!("agent {} moved {:?} beyond v_max {}", a.id, a.vel, a.v_max));
            }
            if self.occupancy.cells[i] != k as u32 {
                return Err(format!("occupancy out of sync at {:?}", a.pos));
            }
        }
        let marked = self.occupancy.cells.iter().filter(|&&c| c != EMPTY).count();
        if marked != self.agents.len() {
            return Err(format!("occupancy marks {marked} cells for {} agents", self.agents.len()));
        }
        Ok(())
    }
}
