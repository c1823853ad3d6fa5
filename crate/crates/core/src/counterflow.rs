//! Comoving dynamic potential for counterflow.
//!
//! Every agent `j` drags a wedge-shaped potential along its direction of
//! motion. An agent `i` looking at candidate cells adds up the potentials of
//! its visible nearest neighbours, signed by whether `j` walks roughly with
//! (+1) or against (−1) it, and multiplies the base selection weight of each
//! cell by `exp(k_f · Σ sign_j · P_j(cell))`. Comoving neighbours therefore
//! attract, opposing ones repel, which is what lets lanes self-organise.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::kinematics::Agent;
use crate::lattice::{Grid, Offset, Pos, StaticField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{name}` = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("basewidth a = {a} exceeds baselength b = {b}")]
    WedgeOrientation { a: f64, b: f64 },
}

/// Which face of the wedge applies near the motion axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegionVariant {
    /// The |d_perp|-dependent face applies where |d_perp|/|d_par| ≤ a/b.
    #[default]
    AsWritten,
    /// Branch bodies swapped: a continuous rectangular pyramid.
    Pyramid,
}

impl RegionVariant {
    pub fn name(self) -> &'static str {
        match self {
            RegionVariant::AsWritten => "as_written",
            RegionVariant::Pyramid => "pyramid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "as_written" => Some(RegionVariant::AsWritten),
            "pyramid" => Some(RegionVariant::Pyramid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterflowParams {
    /// Coupling strength `k_f`.
    pub k_f: f64,
    /// Maximum number of neighbours considered.
    pub n_max: usize,
    /// Neighbour search radius in cells.
    pub r_max: f64,
    /// Potential height scale.
    pub h: f64,
    /// Stationary offset added to the relative speed.
    pub delta: f64,
    /// Basewidth of the wedge, orthogonal to motion.
    pub a: f64,
    /// Baselength of the wedge, along motion.
    pub b: f64,
    /// Half-angle of the field of view, radians.
    pub fov_half_angle: f64,
    pub region_variant: RegionVariant,
}

impl Default for CounterflowParams {
    fn default() -> Self {
        CounterflowParams {
            k_f: 0.8,
            n_max: 12,
            r_max: 15.0,
            h: 4.0,
            delta: 0.2,
            a: 2.0,
            b: 15.0,
            fov_half_angle: FRAC_PI_2,
            region_variant: RegionVariant::AsWritten,
        }
    }
}

impl CounterflowParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let check = |name, value: f64, ok: bool, expected| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::OutOfRange { name, value, expected })
            }
        };
        check("kf", self.k_f, self.k_f >= 0.0, ">= 0")?;
        check("rmax", self.r_max, self.r_max > 0.0, "> 0")?;
        check("h", self.h, self.h >= 0.0, ">= 0")?;
        check("delta", self.delta, self.delta >= 0.0, ">= 0")?;
        check("a", self.a, self.a > 0.0, "> 0")?;
        check("b", self.b, self.b > 0.0, "> 0")?;
        check(
            "fov",
            self.fov_half_angle,
            (0.0..=std::f64::consts::PI).contains(&self.fov_half_angle),
            "in [0, pi]",
        )?;
        if self.a > self.b {
            return Err(ParamError::WedgeOrientation { a: self.a, b: self.b });
        }
        Ok(())
    }

    /// Peak of the potential for an emitter moving at `speed` out of `v_max`.
    pub fn height(&self, speed: f64, v_max: f64) -> f64 {
        2.0 * self.h * (speed / v_max + self.delta)
    }
}

/// Sign of the scalar product of two velocities; 0 when they are
/// perpendicular or either is zero.
pub fn sign_factor(v_i: (f64, f64), v_j: (f64, f64)) -> i8 {
    let dot = v_i.0 * v_j.0 + v_i.1 * v_j.1;
    if dot > 0.0 {
        1
    } else if dot < 0.0 {
        -1
    } else {
        0
    }
}

/// Expresses a world offset in the frame of an emitter moving along
/// `direction`: returns `(d_par, d_perp)` with d_perp measured to the left.
/// `None` for a zero direction.
pub fn rotate_to_agent_frame(direction: (f64, f64), offset: (f64, f64)) -> Option<(f64, f64)> {
    let len = direction.0.hypot(direction.1);
    if len == 0.0 {
        return None;
    }
    let (ux, uy) = (direction.0 / len, direction.1 / len);
    Some(rotate_unit((ux, uy), offset))
}

#[inline]
fn rotate_unit((ux, uy): (f64, f64), (dx, dy): (f64, f64)) -> (f64, f64) {
    (dx * ux + dy * uy, dy * ux - dx * uy)
}

/// Comoving potential of an emitter at frame coordinates `(d_par, d_perp)`.
pub fn comoving_potential(d_par: f64, d_perp: f64, speed: f64, v_max: f64, p: &CounterflowParams) -> f64 {
    p.height(speed, v_max) * wedge_profile(d_par, d_perp, p)
}

/// Unit-height wedge shape, supported on |d_par| ≤ b, |d_perp| ≤ a.
#[inline]
pub fn wedge_profile(d_par: f64, d_perp: f64, p: &CounterflowParams) -> f64 {
    let (par, perp) = (d_par.abs(), d_perp.abs());
    if par > p.b || perp > p.a {
        return 0.0;
    }
    // |perp|/|par| ≤ a/b, cross-multiplied: 0/0 → 0 and x/0 → ∞ fall out.
    let near_axis = perp * p.b <= p.a * par;
    let across = 1.0 - perp / p.a;
    let along = 1.0 - par / p.b;
    let v = match (p.region_variant, near_axis) {
        (RegionVariant::AsWritten, true) | (RegionVariant::Pyramid, false) => across,
        (RegionVariant::AsWritten, false) | (RegionVariant::Pyramid, true) => along,
    };
    v.max(0.0)
}

/// One selected neighbour of an agent, with what is needed to evaluate its
/// potential at any cell.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRef {
    pub agent_id: u32,
    /// Minimal-image Euclidean distance between cell centres.
    pub distance: f64,
    pub sign: i8,
    pub pos: Pos,
    /// Unit vector of the emitter's motion frame.
    pub frame: (f64, f64),
    /// Peak value `2h(v/v_max + δ)` of the emitter's potential.
    pub height: f64,
}

impl NeighborRef {
    pub fn potential_at(&self, grid: &Grid, cell: Pos, p: &CounterflowParams) -> f64 {
        let off = grid.torus_delta(self.pos, cell).as_f64();
        let (par, perp) = rotate_unit(self.frame, off);
        self.height * wedge_profile(par, perp, p)
    }
}

/// Direction an agent is facing: its velocity, or the steepest descent of
/// its static field when it did not move. Never zero.
pub fn facing(agent: &Agent, grid: &Grid, fields: &[StaticField; 2]) -> Offset {
    if agent.vel.is_zero() {
        fields[agent.species.index()].descent(grid, agent.pos)
    } else {
        agent.vel
    }
}

fn unit(d: Offset) -> (f64, f64) {
    let len = d.norm();
    (d.dx as f64 / len, d.dy as f64 / len)
}

// Integer dot product, so perpendicular facings give exactly 0.
fn facing_sign(a: Offset, b: Offset) -> i8 {
    let dot = a.dx as i64 * b.dx as i64 + a.dy as i64 * b.dy as i64;
    dot.signum() as i8
}

/// Neighbours of `agents[i]` within `r_max`, wall-visible and inside the
/// field of view, nearest first (ties by id), at most `n_max`.
pub fn select_neighbors(
    i: usize,
    agents: &[Agent],
    grid: &Grid,
    fields: &[StaticField; 2],
    p: &CounterflowParams,
) -> Vec<NeighborRef> {
    let mut out = Vec::new();
    select_neighbors_into(i, agents, grid, fields, p, &mut out);
    out
}

pub fn select_neighbors_into(
    i: usize,
    agents: &[Agent],
    grid: &Grid,
    fields: &[StaticField; 2],
    p: &CounterflowParams,
    out: &mut Vec<NeighborRef>,
) {
    out.clear();
    if p.n_max == 0 {
        return;
    }
    let me = &agents[i];
    let look = facing(me, grid, fields);
    let r2 = p.r_max * p.r_max;
    let mut found: Vec<(i64, u32, usize)> = Vec::new();
    for (j, other) in agents.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = grid.torus_delta(me.pos, other.pos);
        let d2 = d.norm_sq();
        if d2 as f64 > r2 {
            continue;
        }
        if !in_view(look, d, p.fov_half_angle) {
            continue;
        }
        if !grid.visible(me.pos, d) {
            continue;
        }
        found.push((d2, other.id, j));
    }
    found.sort_unstable_by_key(|&(d2, id, _)| (d2, id));
    found.truncate(p.n_max);
    out.extend(found.into_iter().map(|(d2, _, j)| {
        let other = &agents[j];
        let frame = facing(other, grid, fields);
        let speed = other.vel.norm().min(other.v_max as f64);
        NeighborRef {
            agent_id: other.id,
            distance: (d2 as f64).sqrt(),
            sign: facing_sign(look, frame),
            pos: other.pos,
            frame: unit(frame),
            height: p.height(speed, other.v_max as f64),
        }
    }));
}

/// Whether `offset` lies within `half_angle` of `look` (boundary included).
/// Dot and cross products are formed in integers, so the right-angle
/// boundary is exact.
#[inline]
pub fn in_view(look: Offset, offset: Offset, half_angle: f64) -> bool {
    let dot = look.dx as i64 * offset.dx as i64 + look.dy as i64 * offset.dy as i64;
    if half_angle == FRAC_PI_2 {
        return dot >= 0;
    }
    let cross = look.dx as i64 * offset.dy as i64 - look.dy as i64 * offset.dx as i64;
    (cross.abs() as f64).atan2(dot as f64) <= half_angle
}

/// `k_f · Σ sign_j · P_j(cell)`, the logarithm of the counterflow factor.
pub fn counterflow_exponent(cell: Pos, neighbors: &[NeighborRef], grid: &Grid, p: &CounterflowParams) -> f64 {
    let sum: f64 = neighbors
        .iter()
        .filter(|n| n.sign != 0)
        .map(|n| n.sign as f64 * n.potential_at(grid, cell, p))
        .sum();
    p.k_f * sum
}

/// Multiplicative selection factor for `cell`.
pub fn counterflow_factor(cell: Pos, neighbors: &[NeighborRef], grid: &Grid, p: &CounterflowParams) -> f64 {
    counterflow_exponent(cell, neighbors, grid, p).exp()
}
