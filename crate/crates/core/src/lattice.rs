//! Discrete geometry: the cell grid, periodic wrapping, static floor fields
//! and wall line-of-sight.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("grid dimensions must be at least 1x1, got {width}x{height}")]
    InvalidDimensions { width: i32, height: i32 },
    #[error("goal cell ({x}, {y}) is not a floor cell")]
    GoalNotFloor { x: i32, y: i32 },
    #[error("periodic grids only support directional goals")]
    PeriodicWithGoalCells,
    #[error("no floor cell can reach a goal of species {0}")]
    Unreachable(Species),
}

/// Integer cell coordinate. `y = 0` is the first printed row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }
}

/// Integer displacement between two cells, also used as an agent velocity
/// (cells per round).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Offset {
    pub dx: i32,
    pub dy: i32,
}

impl Offset {
    pub const ZERO: Offset = Offset { dx: 0, dy: 0 };

    pub const fn new(dx: i32, dy: i32) -> Self {
        Offset { dx, dy }
    }

    pub fn norm_sq(self) -> i64 {
        let (dx, dy) = (self.dx as i64, self.dy as i64);
        dx * dx + dy * dy
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn is_zero(self) -> bool {
        self.dx == 0 && self.dy == 0
    }

    pub fn as_f64(self) -> (f64, f64) {
        (self.dx as f64, self.dy as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tile {
    Wall,
    Floor,
}

/// Walking direction class. Rightward agents head for +x (or the `E` goal
/// cells of a map), leftward agents for −x (or the `W` goal cells).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    Right,
    Left,
}

impl Species {
    pub const ALL: [Species; 2] = [Species::Right, Species::Left];

    pub fn index(self) -> usize {
        match self {
            Species::Right => 0,
            Species::Left => 1,
        }
    }

    /// Sign of the nominal walking direction along x.
    pub fn heading(self) -> i32 {
        match self {
            Species::Right => 1,
            Species::Left => -1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Species::Right => '>',
            Species::Left => '<',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Right => "right",
            Species::Left => "left",
        }
    }
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    /// Uniform walking direction along the species' heading.
    Direction,
    /// Explicit goal cells.
    Cells(Vec<Pos>),
}

#[derive(Debug)]
pub struct Grid {
    width: i32,
    height: i32,
    tiles: Vec<Tile>,
    periodic_x: bool,
    goals: [Goal; 2],
    wall_table: OnceLock<Vec<u32>>,
}

impl Clone for Grid {
    fn clone(&self) -> Self {
        Grid {
            width: self.width,
            height: self.height,
            tiles: self.tiles.clone(),
            periodic_x: self.periodic_x,
            goals: self.goals.clone(),
            wall_table: OnceLock::new(),
        }
    }
}

impl Grid {
    /// All-floor grid with directional goals.
    pub fn new(width: i32, height: i32, periodic_x: bool) -> Result<Self, LatticeError> {
        if width < 1 || height < 1 {
            return Err(LatticeError::InvalidDimensions { width, height });
        }
        let n = (width * height) as usize;
        Ok(Grid {
            width,
            height,
            tiles: vec![Tile::Floor; n],
            periodic_x,
            goals: [Goal::Direction, Goal::Direction],
            wall_table: OnceLock::new(),
        })
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn periodic_x(&self) -> bool {
        self.periodic_x
    }

    pub fn goal(&self, species: Species) -> &Goal {
        &self.goals[species.index()]
    }

    pub fn set_tile(&mut self, p: Pos, tile: Tile) {
        let i = self.index(p);
        self.tiles[i] = tile;
        self.wall_table = OnceLock::new();
    }

    pub fn set_goal(&mut self, species: Species, goal: Goal) -> Result<(), LatticeError> {
        if let Goal::Cells(cells) = &goal {
            if self.periodic_x {
                return Err(LatticeError::PeriodicWithGoalCells);
            }
            for &c in cells {
                if !self.is_floor(c) {
                    return Err(LatticeError::GoalNotFloor { x: c.x, y: c.y });
                }
            }
        }
        self.goals[species.index()] = goal;
        Ok(())
    }

    pub fn contains(&self, p: Pos) -> bool {
        p.x >= 0 && p.x < self.width && p.y >= 0 && p.y < self.height
    }

    /// Maps a possibly out-of-range coordinate back onto the grid, wrapping x
    /// on periodic grids. `None` if it falls off a non-periodic edge.
    pub fn wrap(&self, p: Pos) -> Option<Pos> {
        if p.y < 0 || p.y >= self.height {
            return None;
        }
        if self.periodic_x {
            Some(Pos::new(wrap_coord(p.x, self.width), p.y))
        } else if p.x >= 0 && p.x < self.width {
            Some(p)
        } else {
            None
        }
    }

    pub fn index(&self, p: Pos) -> usize {
        debug_assert!(self.contains(p), "{p:?} outside grid");
        (p.y * self.width + p.x) as usize
    }

    pub fn pos_of(&self, index: usize) -> Pos {
        let i = index as i32;
        Pos::new(i % self.width, i / self.width)
    }

    pub fn tile(&self, p: Pos) -> Tile {
        self.tiles[self.index(p)]
    }

    pub fn is_floor(&self, p: Pos) -> bool {
        self.contains(p) && self.tile(p) == Tile::Floor
    }

    pub fn cell_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn floor_cells(&self) -> Vec<Pos> {
        (0..self.tiles.len())
            .filter(|&i| self.tiles[i] == Tile::Floor)
            .map(|i| self.pos_of(i))
            .collect()
    }

    pub fn floor_count(&self) -> usize {
        self.tiles.iter().filter(|&&t| t == Tile::Floor).count()
    }

    /// Minimal-image displacement from `from` to `to`. On a periodic grid dx
    /// lies in (−width/2, width/2]; an exact half-width tie resolves to +.
    pub fn torus_delta(&self, from: Pos, to: Pos) -> Offset {
        let dy = to.y - from.y;
        let mut dx = to.x - from.x;
        if self.periodic_x {
            dx = wrap_coord(dx, self.width);
            if 2 * dx > self.width {
                dx -= self.width;
            }
        }
        Offset::new(dx, dy)
    }

    /// Wall visibility between two cell centres: every cell touched by the
    /// segment (corner touches included) must be floor.
    pub fn line_of_sight(&self, from: Pos, to: Pos) -> bool {
        if !self.is_floor(from) || !self.is_floor(to) {
            return false;
        }
        self.visible(from, self.torus_delta(from, to))
    }

    /// [`Grid::line_of_sight`] from a floor cell along a minimal-image
    /// offset. Segments whose bounding box holds no wall are clear without
    /// walking them.
    /// At an exact half-width tie on a periodic grid both images are
    /// tried, which keeps visibility symmetric.
    pub fn visible(&self, from: Pos, delta: Offset) -> bool {
        if self.periodic_x && 2 * delta.dx == self.width {
            let other = Offset::new(delta.dx - self.width, delta.dy);
            return self.visible_along(from, delta) || self.visible_along(from, other);
        }
        self.visible_along(from, delta)
    }

    fn visible_along(&self, from: Pos, delta: Offset) -> bool {
        let (x0, x1) = (from.x.min(from.x + delta.dx), from.x.max(from.x + delta.dx));
        let (y0, y1) = (from.y.min(from.y + delta.dy), from.y.max(from.y + delta.dy));
        if y0 < 0 || y1 >= self.height {
            return false;
        }
        if self.walls_in(x0, x1, y0, y1) == Some(0) {
            return true;
        }
        self.walk_clear(from, delta)
    }

    fn walk_clear(&self, from: Pos, delta: Offset) -> bool {
        let mut clear = true;
        supercover(from, delta, |p| {
            if clear {
                clear = matches!(self.wrap(p), Some(q) if self.tile(q) == Tile::Floor);
            }
        });
        clear
    }

    /// Wall count in the inclusive rectangle, x possibly wrapping on a
    /// periodic grid. `None` if it leaves a non-periodic grid.
    fn walls_in(&self, x0: i32, x1: i32, y0: i32, y1: i32) -> Option<u32> {
        let table = self.wall_table.get_or_init(|| self.build_wall_table());
        let stride = (self.width + 1) as usize;
        let at = |x: i32, y: i32| table[y as usize * stride + x as usize];
        let rect = |x0: i32, x1: i32| at(x1 + 1, y1 + 1) + at(x0, y0) - at(x0, y1 + 1) - at(x1 + 1, y0);
        if x0 >= 0 && x1 < self.width {
            return Some(rect(x0, x1));
        }
        if !self.periodic_x || x1 - x0 >= self.width {
            return if self.periodic_x { Some(rect(0, self.width - 1)) } else { None };
        }
        let (a, b) = (x0.rem_euclid(self.width), x1.rem_euclid(self.width));
        Some(rect(a, self.width - 1) + rect(0, b))
    }

    fn build_wall_table(&self) -> Vec<u32> {
        let stride = (self.width + 1) as usize;
        let mut t = vec![0u32; stride * (self.height + 1) as usize];
        for y in 0..self.height {
            for x in 0..self.width {
                let wall = (self.tile(Pos::new(x, y)) == Tile::Wall) as u32;
                let (i, j) = ((y + 1) as usize, (x + 1) as usize);
                t[i * stride + j] = wall + t[(i - 1) * stride + j] + t[i * stride + j - 1] - t[(i - 1) * stride + j - 1];
            }
        }
        t
    }
}

#[inline]
fn wrap_coord(x: i32, width: i32) -> i32 {
    if (0..width).contains(&x) {
        x
    } else if (-width..0).contains(&x) {
        x + width
    } else {
        x.rem_euclid(width)
    }
}

/// Visits every cell whose closed square the segment between the centres of
/// `from` and `from + delta` touches, in walking order. Coordinates are not
/// wrapped. When the segment passes exactly through a lattice corner both
/// side cells are visited.
pub fn supercover(from: Pos, delta: Offset, mut visit: impl FnMut(Pos)) {
    let (nx, ny) = (delta.dx.abs() as i64, delta.dy.abs() as i64);
    let (sx, sy) = (delta.dx.signum(), delta.dy.signum());
    let (mut ix, mut iy) = (0i64, 0i64);
    let mut p = from;
    visit(p);
    while ix < nx || iy < ny {
        let decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx;
        match decision.cmp(&0) {
            Ordering::Equal => {
                visit(Pos::new(p.x + sx, p.y));
                visit(Pos::new(p.x, p.y + sy));
                p = Pos::new(p.x + sx, p.y + sy);
                ix += 1;
                iy += 1;
            }
            Ordering::Less => {
                p.x += sx;
                ix += 1;
            }
            Ordering::Greater => {
                p.y += sy;
                iy += 1;
            }
        }
        visit(p);
    }
}

/// Shortest 8-connected path length kept as exact step counts, so that
/// comparisons never suffer from rounding: value = straight + diagonal·√2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PathLen {
    straight: u32,
    diagonal: u32,
}

impl PathLen {
    const ZERO: PathLen = PathLen { straight: 0, diagonal: 0 };

    fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }
}

impl Ord for PathLen {
    fn cmp(&self, other: &Self) -> Ordering {
        // Compare s1 + d1·√2 against s2 + d2·√2 exactly: sign of p + q·√2.
        let p = self.straight as i64 - other.straight as i64;
        let q = self.diagonal as i64 - other.diagonal as i64;
        match (p.signum(), q.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            _ => {
                // Opposite signs: compare p² with 2q².
                let lhs = p * p;
                let rhs = 2 * q * q;
                if p > 0 {
                    lhs.cmp(&rhs)
                } else {
                    rhs.cmp(&lhs)
                }
            }
        }
    }
}

impl PartialOrd for PathLen {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const MOORE: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Static floor field of one species. Distances are in cell units; walls and
/// unreachable cells hold `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct StaticField {
    species: Species,
    directional: bool,
    values: Vec<f64>,
    descent: Vec<Offset>,
}

impl StaticField {
    pub fn build(grid: &Grid, species: Species) -> Result<Self, LatticeError> {
        let n = grid.cell_count();
        let mut values = vec![f64::INFINITY; n];
        let heading = species.heading();
        let directional = matches!(grid.goal(species), Goal::Direction);
        match grid.goal(species) {
            Goal::Direction => {
                for i in 0..n {
                    let p = grid.pos_of(i);
                    if grid.tile(p) == Tile::Floor {
                        let x = if heading > 0 { grid.width() - 1 - p.x } else { p.x };
                        values[i] = x as f64;
                    }
                }
            }
            Goal::Cells(cells) => {
                for (i, d) in shortest_paths(grid, cells).into_iter().enumerate() {
                    if let Some(d) = d {
                        values[i] = d.value();
                    }
                }
            }
        }
        let floor_reachable = (0..n).any(|i| values[i].is_finite());
        if !floor_reachable {
            return Err(LatticeError::Unreachable(species));
        }
        let mut field = StaticField {
            species,
            directional,
            values,
            descent: Vec::new(),
        };
        field.descent = (0..n).map(|i| field.steepest_descent(grid, grid.pos_of(i))).collect();
        Ok(field)
    }

    pub fn species(&self) -> Species {
        self.species
    }

    pub fn is_directional(&self) -> bool {
        self.directional
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, grid: &Grid, p: Pos) -> f64 {
        self.values[grid.index(p)]
    }

    /// Decrease of the field when moving from `from` to `to`. Directional
    /// fields use the minimal-image displacement so the wrap seam is invisible.
    pub fn gain(&self, grid: &Grid, from: Pos, to: Pos) -> f64 {
        if self.directional {
            return (self.species.heading() * grid.torus_delta(from, to).dx) as f64;
        }
        let (a, b) = (self.value(grid, from), self.value(grid, to));
        match (a.is_finite(), b.is_finite()) {
            (true, true) => a - b,
            (false, false) => 0.0,
            (true, false) => f64::NEG_INFINITY,
            (false, true) => f64::INFINITY,
        }
    }

    /// Facing used when an agent at `p` has no velocity: the Moore step of
    /// steepest descent, or the species heading where there is none.
    pub fn descent(&self, grid: &Grid, p: Pos) -> Offset {
        self.descent[grid.index(p)]
    }

    // Ties go to the smallest counter-clockwise angle from +x.
    fn steepest_descent(&self, grid: &Grid, p: Pos) -> Offset {
        let fallback = Offset::new(self.species.heading(), 0);
        if self.directional || grid.tile(p) == Tile::Wall {
            return fallback;
        }
        let here = self.value(grid, p);
        if !here.is_finite() {
            return fallback;
        }
        let mut best: Option<(f64, (i32, i32))> = None;
        for &(dx, dy) in &MOORE {
            let Some(q) = grid.wrap(Pos::new(p.x + dx, p.y + dy)) else {
                continue;
            };
            let v = self.value(grid, q);
            if !v.is_finite() {
                continue;
            }
            let len = if dx != 0 && dy != 0 { SQRT_2 } else { 1.0 };
            let slope = (here - v) / len;
            if slope > 0.0 && best.is_none_or(|(s, _)| slope > s) {
                best = Some((slope, (dx, dy)));
            }
        }
        best.map_or(fallback, |(_, (dx, dy))| Offset::new(dx, dy))
    }
}

/// Multi-source Dijkstra over the 8-connected floor graph.
fn shortest_paths(grid: &Grid, goals: &[Pos]) -> Vec<Option<PathLen>> {
    #[derive(PartialEq, Eq)]
    struct Entry(PathLen, usize);
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            other.0.cmp(&self.0).then_with(|| other.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut dist: Vec<Option<PathLen>> = vec![None; grid.cell_count()];
    let mut heap = BinaryHeap::new();
    for &g in goals {
        let i = grid.index(g);
        if dist[i].is_none() {
            dist[i] = Some(PathLen::ZERO);
            heap.push(Entry(PathLen::ZERO, i));
        }
    }
    while let Some(Entry(d, i)) = heap.pop() {
        if dist[i].is_some_and(|best| d > best) {
            continue;
        }
        let p = grid.pos_of(i);
        for &(dx, dy) in &MOORE {
            let Some(q) = grid.wrap(Pos::new(p.x + dx, p.y + dy)) else {
                continue;
            };
            if grid.tile(q) != Tile::Floor {
                continue;
            }
            let mut next = d;
            if dx != 0 && dy != 0 {
                next.diagonal += 1;
            } else {
                next.straight += 1;
            }
            let j = grid.index(q);
            if dist[j].is_none_or(|best| next < best) {
                dist[j] = Some(next);
                heap.push(Entry(next, j));
            }
        }
    }
    dist
}
