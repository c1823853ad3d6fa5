//! Brute-force reference implementations shared by the integration tests.
//! Each one is deliberately naive and shares no code with the library.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::f64::consts::SQRT_2;

use fastflow_core::{Agent, CounterflowParams, Grid, Pos, Species, StaticField, Tile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact `s + d·√2` comparison via `p + q·√2` sign analysis.
fn cmp_len(a: (i64, i64), b: (i64, i64)) -> Ordering {
    let (p, q) = (a.0 - b.0, a.1 - b.1);
    // sign(p + q√2)
    let sign = if p >= 0 && q >= 0 {
        (p + q).signum()
    } else if p <= 0 && q <= 0 {
        -((-p - q).signum())
    } else if p > 0 {
        (p * p - 2 * q * q).signum()
    } else {
        (2 * q * q - p * p).signum()
    };
    sign.cmp(&0)
}

/// Bellman–Ford relaxation to a fixed point over the 8-connected floor
/// graph. Unreachable cells and walls are `INFINITY`.
pub fn field_oracle(grid: &Grid, goals: &[Pos]) -> Vec<f64> {
    let (w, h) = (grid.width(), grid.height());
    let mut best: Vec<Option<(i64, i64)>> = vec![None; (w * h) as usize];
    let idx = |x: i32, y: i32| (y * w + x) as usize;
    for g in goals {
        best[idx(g.x, g.y)] = Some((0, 0));
    }
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                if grid.tile(Pos::new(x, y)) == Tile::Wall {
                    continue;
                }
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (mut nx, ny) = (x + dx, y + dy);
                        if grid.periodic_x() {
                            nx = (nx + w) % w;
                        }
                        if nx < 0 || nx >= w || ny < 0 || ny >= h {
                            continue;
                        }
                        let Some((s, d)) = best[idx(nx, ny)] else { continue };
                        let cand = if dx != 0 && dy != 0 { (s, d + 1) } else { (s + 1, d) };
                        let slot = &mut best[idx(x, y)];
                        if slot.is_none_or(|cur| cmp_len(cand, cur) == Ordering::Less) {
                            *slot = Some(cand);
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    best.into_iter()
        .map(|b| b.map_or(f64::INFINITY, |(s, d)| s as f64 + d as f64 * SQRT_2))
        .collect()
}

/// Minimal-image displacement by enumerating the three x-images.
pub fn delta_oracle(grid: &Grid, from: Pos, to: Pos) -> (i32, i32) {
    let dy = to.y - from.y;
    if !grid.periodic_x() {
        return (to.x - from.x, dy);
    }
    let w = grid.width();
    let raw = to.x - from.x;
    let best = [raw - w, raw, raw + w]
        .into_iter()
        .min_by_key(|&c| (c.abs(), -c))
        .unwrap();
    (best, dy)
}

/// Cells whose closed unit square meets the segment between centres, by a
/// separating-axis test in doubled integer coordinates.
pub fn segment_cells(delta: (i32, i32)) -> Vec<(i32, i32)> {
    let (ex, ey) = (2 * delta.0 as i64, 2 * delta.1 as i64);
    let mut out = Vec::new();
    for cy in delta.1.min(0)..=delta.1.max(0) {
        for cx in delta.0.min(0)..=delta.0.max(0) {
            let (x, y) = (2 * cx as i64, 2 * cy as i64);
            let mut pos = false;
            let mut neg = false;
            for (kx, ky) in [(-1, -1), (-1, 1), (1, -1), (1, 1)] {
                let c = ex * (y + ky) - ey * (x + kx);
                pos |= c >= 0;
                neg |= c <= 0;
            }
            if pos && neg {
                out.push((cx, cy));
            }
        }
    }
    out
}

pub fn los_oracle(grid: &Grid, from: Pos, to: Pos) -> bool {
    if !grid.is_floor(from) || !grid.is_floor(to) {
        return false;
    }
    let d = delta_oracle(grid, from, to);
    let clear = |d: (i32, i32)| {
        segment_cells(d).into_iter().all(|(cx, cy)| {
            let (mut x, y) = (from.x + cx, from.y + cy);
            if grid.periodic_x() {
                x = x.rem_euclid(grid.width());
            }
            x >= 0 && x < grid.width() && y >= 0 && y < grid.height() && grid.is_floor(Pos::new(x, y))
        })
    };
    // Half-width ties on a periodic grid: either straight image will do.
    if grid.periodic_x() && 2 * d.0 == grid.width() {
        return clear(d) || clear((d.0 - grid.width(), d.1));
    }
    clear(d)
}

fn facing_oracle(a: &Agent, grid: &Grid, fields: &[StaticField; 2]) -> (i64, i64) {
    if a.vel.dx != 0 || a.vel.dy != 0 {
        (a.vel.dx as i64, a.vel.dy as i64)
    } else {
        let d = fields[a.species.index()].descent(grid, a.pos);
        (d.dx as i64, d.dy as i64)
    }
}

/// Filter every other agent by radius, view cone and walls; sort by
/// (distance, id); truncate. Returns `(id, sign)` pairs.
pub fn neighbors_oracle(
    i: usize,
    agents: &[Agent],
    grid: &Grid,
    fields: &[StaticField; 2],
    p: &CounterflowParams,
) -> Vec<(u32, i8)> {
    let me = &agents[i];
    let look = facing_oracle(me, grid, fields);
    let mut found = Vec::new();
    for (j, other) in agents.iter().enumerate() {
        if j == i {
            continue;
        }
        let (dx, dy) = delta_oracle(grid, me.pos, other.pos);
        let dist = ((dx * dx + dy * dy) as f64).sqrt();
        if dist > p.r_max {
            continue;
        }
        let dot = look.0 * dx as i64 + look.1 * dy as i64;
        let cross = look.0 * dy as i64 - look.1 * dx as i64;
        let angle = (cross.abs() as f64).atan2(dot as f64);
        let inside = if p.fov_half_angle == std::f64::consts::FRAC_PI_2 { dot >= 0 } else { angle <= p.fov_half_angle };
        if !inside || !los_oracle(grid, me.pos, other.pos) {
            continue;
        }
        let f = facing_oracle(other, grid, fields);
        let sign = (look.0 * f.0 + look.1 * f.1).signum() as i8;
        found.push((dist, other.id, sign));
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    found.truncate(p.n_max);
    found.into_iter().map(|(_, id, s)| (id, s)).collect()
}

/// Random grid with walls at roughly `wall_p`; never entirely wall.
pub fn random_grid(rng: &mut ChaCha8Rng, max_w: i32, max_h: i32, periodic: bool, wall_p: f64) -> Grid {
    loop {
        let w = rng.random_range(1..=max_w);
        let h = rng.random_range(1..=max_h);
        let mut g = Grid::new(w, h, periodic).unwrap();
        for y in 0..h {
            for x in 0..w {
                if rng.random_bool(wall_p) {
                    g.set_tile(Pos::new(x, y), Tile::Wall);
                }
            }
        }
        if g.floor_count() > 0 {
            return g;
        }
    }
}

/// Places `n` agents (or fewer if floor runs out) with random species,
/// speeds up to `v_max` and random velocities within that bound.
pub fn random_agents(rng: &mut ChaCha8Rng, grid: &Grid, n: usize, v_max: u32) -> Vec<Agent> {
    let mut floor = grid.floor_cells();
    for k in (1..floor.len()).rev() {
        floor.swap(k, rng.random_range(0..=k));
    }
    floor
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(k, pos)| {
            let species = if rng.random_bool(0.5) { Species::Right } else { Species::Left };
            let r = v_max as i32;
            let vel = loop {
                let (dx, dy) = (rng.random_range(-r..=r), rng.random_range(-r..=r));
                if dx * dx + dy * dy <= r * r {
                    break fastflow_core::Offset::new(dx, dy);
                }
            };
            Agent::new(k as u32 * 3 + 1, pos, v_max, species).with_vel(if rng.random_bool(0.2) {
                fastflow_core::Offset::ZERO
            } else {
                vel
            })
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
