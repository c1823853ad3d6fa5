//! Scenario configuration, map files, and the corridor / open-area builders.
//!
//! Configuration is a flat `key = value` document with `#` comments:
//!
//! ```text
//! kind = corridor      # corridor | open_area | map
//! seed = 42
//! density = 0.3
//! kf = 0.8
//! ```
//!
//! `kind` and `seed` are required; everything else has a default.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::counterflow::{CounterflowParams, ParamError, RegionVariant};
use crate::kinematics::{Agent, Boundary, SimRng, SimState, StateError};
use crate::lattice::{Goal, Grid, LatticeError, Pos, Species, Tile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    CorridorPeriodic,
    OpenArea,
    MapFile,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::CorridorPeriodic => "corridor",
            ScenarioKind::OpenArea => "open_area",
            ScenarioKind::MapFile => "map",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "corridor" => Some(ScenarioKind::CorridorPeriodic),
            "open_area" => Some(ScenarioKind::OpenArea),
            "map" => Some(ScenarioKind::MapFile),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub width: i32,
    pub height: i32,
    /// Agents per floor cell.
    pub density: f64,
    /// Fraction of rightward agents.
    pub split: f64,
    pub v_max: u32,
    /// Static floor field coupling.
    pub k_s: f64,
    pub counterflow: CounterflowParams,
    pub rounds: u64,
    pub warmup: u64,
    pub map_path: Option<String>,
    pub deadlock_window: usize,
    pub deadlock_eps: f64,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        ScenarioConfig {
            kind,
            seed,
            width: 60,
            height: 10,
            density: 0.2,
            split: 0.5,
            v_max: 3,
            k_s: DEFAULT_K_S,
            counterflow: CounterflowParams::default(),
            rounds: 2000,
            warmup: 1500,
            map_path: None,
            deadlock_window: 50,
            deadlock_eps: 0.05,
        }
    }

    /// Range checks that do not depend on where a value came from.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let fail = |key, msg: String| Err((key, msg));
        if self.width < 1 {
            return fail("width", format!("{} must be >= 1", self.width));
        }
        if self.height < 1 {
            return fail("height", format!("{} must be >= 1", self.height));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return fail("density", format!("{} must be in [0, 1]", self.density));
        }
        if !(0.0..=1.0).contains(&self.split) {
            return fail("split", format!("{} must be in [0, 1]", self.split));
        }
        if self.v_max < 1 {
            return fail("vmax", "must be >= 1".into());
        }
        if !(self.k_s >= 0.0 && self.k_s.is_finite()) {
            return fail("ks", format!("{} must be a finite value >= 0", self.k_s));
        }
        if self.rounds < 1 {
            return fail("rounds", "must be >= 1".into());
        }
        if self.warmup >= self.rounds {
            return fail("warmup", format!("{} must be smaller than rounds = {}", self.warmup, self.rounds));
        }
        if self.deadlock_window < 1 {
            return fail("deadlock_window", "must be >= 1".into());
        }
        if !(self.deadlock_eps >= 0.0 && self.deadlock_eps.is_finite()) {
            return fail("deadlock_eps", format!("{} must be >= 0", self.deadlock_eps));
        }
        if self.kind == ScenarioKind::CorridorPeriodic {
            if self.height < 3 {
                return fail("height", format!("{} leaves no floor between the corridor walls", self.height));
            }
            if self.width < 2 * self.v_max as i32 + 1 {
                return fail("width", format!("{} is narrower than one round's reach", self.width));
            }
        }
        if self.kind == ScenarioKind::MapFile && self.map_path.is_none() {
            return fail("map_path", "required for kind = map".into());
        }
        if let Err(e) = self.counterflow.validate() {
            return match e {
                ParamError::OutOfRange { name, .. } => fail(name, e.to_string()),
                ParamError::WedgeOrientation { .. } => fail("a", e.to_string()),
            };
        }
        Ok(())
    }

    /// Renders the configuration as a document `parse_config` reads back
    /// to an identical value.
    pub fn to_text(&self) -> String {
        let c = &self.counterflow;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("kind", self.kind.name().into());
        put("seed", self.seed.to_string());
        put("width", self.width.to_string());
        put("height", self.height.to_string());
        put("density", fmt_f64(self.density));
        put("split", fmt_f64(self.split));
        put("vmax", self.v_max.to_string());
        put("ks", fmt_f64(self.k_s));
        put("kf", fmt_f64(c.k_f));
        put("n_max", c.n_max.to_string());
        put("rmax", fmt_f64(c.r_max));
        put("h", fmt_f64(c.h));
        put("delta", fmt_f64(c.delta));
        put("a", fmt_f64(c.a));
        put("b", fmt_f64(c.b));
        put("fov", fmt_f64(c.fov_half_angle));
        put("region_variant", c.region_variant.name().into());
        put("rounds", self.rounds.to_string());
        put("warmup", self.warmup.to_string());
        if let Some(p) = &self.map_path {
            put("map_path", p.clone());
        }
        put("deadlock_window", self.deadlock_window.to_string());
        put("deadlock_eps", fmt_f64(self.deadlock_eps));
        s
    }

    /// Sets a parameter by its configuration key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigErrorKind> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, ConfigErrorKind> {
            v.parse().map_err(|_| ConfigErrorKind::Invalid(v.to_string()))
        }
        let c = &mut self.counterflow;
        match key {
            "kind" => self.kind = ScenarioKind::parse(value).ok_or_else(|| ConfigErrorKind::Invalid(value.into()))?,
            "seed" => self.seed = num(value)?,
            "width" => self.width = num(value)?,
            "height" => self.height = num(value)?,
            "density" => self.density = num(value)?,
            "split" => self.split = num(value)?,
            "vmax" => self.v_max = num(value)?,
            "ks" => self.k_s = num(value)?,
            "kf" => c.k_f = num(value)?,
            "n_max" => c.n_max = num(value)?,
            "rmax" => c.r_max = num(value)?,
            "h" => c.h = num(value)?,
            "delta" => c.delta = num(value)?,
            "a" => c.a = num(value)?,
            "b" => c.b = num(value)?,
            "fov" => c.fov_half_angle = num(value)?,
            "region_variant" => {
                c.region_variant = RegionVariant::parse(value).ok_or_else(|| ConfigErrorKind::Invalid(value.into()))?
            }
            "rounds" => self.rounds = num(value)?,
            "warmup" => self.warmup = num(value)?,
            "map_path" => self.map_path = Some(value.to_string()),
            "deadlock_window" => self.deadlock_window = num(value)?,
            "deadlock_eps" => self.deadlock_eps = num(value)?,
            _ => return Err(ConfigErrorKind::Unknown),
        }
        Ok(())
    }
}

/// Default static-field coupling for the base model.
pub const DEFAULT_K_S: f64 = 5.0;

pub const CONFIG_KEYS: &[&str] = &[
    "kind",
    "seed",
    "width",
    "height",
    "density",
    "split",
    "vmax",
    "ks",
    "kf",
    "n_max",
    "rmax",
    "h",
    "delta",
    "a",
    "b",
    "fov",
    "region_variant",
    "rounds",
    "warmup",
    "map_path",
    "deadlock_window",
    "deadlock_eps",
];

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigErrorKind {
    Unknown,
    Invalid(String),
    OutOfRange(String),
    Missing,
    Duplicate,
    Syntax,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", self.describe())]
pub struct ConfigError {
    /// 1-based line; 0 when the problem is not tied to a line.
    pub line: usize,
    pub key: String,
    pub kind: ConfigErrorKind,
}

impl ConfigError {
    fn describe(&self) -> String {
        let at = if self.line > 0 { format!("line {}: ", self.line) } else { String::new() };
        match &self.kind {
            ConfigErrorKind::Unknown => format!("{at}unknown key `{}`", self.key),
            ConfigErrorKind::Invalid(v) => format!("{at}invalid value `{v}` for `{}`", self.key),
            ConfigErrorKind::OutOfRange(m) => format!("{at}`{}` out of range: {m}", self.key),
            ConfigErrorKind::Missing => format!("missing required key `{}`", self.key),
            ConfigErrorKind::Duplicate => format!("{at}duplicate key `{}`", self.key),
            ConfigErrorKind::Syntax => format!("{at}expected `key = value`"),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::new(ScenarioKind::CorridorPeriodic, 0);
    let mut lines: HashMap<String, usize> = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError {
                line,
                key: body.to_string(),
                kind: ConfigErrorKind::Syntax,
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let err = |kind| ConfigError {
            line,
            key: key.to_string(),
            kind,
        };
        if lines.insert(key.to_string(), line).is_some() {
            return Err(err(ConfigErrorKind::Duplicate));
        }
        cfg.set(key, value).map_err(err)?;
    }
    for required in ["kind", "seed"] {
        if !lines.contains_key(required) {
            return Err(ConfigError {
                line: 0,
                key: required.to_string(),
                kind: ConfigErrorKind::Missing,
            });
        }
    }
    cfg.validate().map_err(|(key, msg)| ConfigError {
        line: lines.get(key).copied().unwrap_or(0),
        key: key.to_string(),
        kind: ConfigErrorKind::OutOfRange(msg),
    })?;
    Ok(cfg)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("map line {line}: {message}")]
    Map { line: usize, message: String },
    #[error("scenario kind `{0}` cannot be built this way")]
    WrongKind(&'static str),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A parsed map: tiles, goal cells and pre-seeded agents.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub width: i32,
    pub height: i32,
    pub rows: Vec<String>,
}

impl MapSpec {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let rows: Vec<String> = text
            .lines()
            .map(|l| l.trim_end_matches('\r').to_string())
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(ScenarioError::Map {
                line: 1,
                message: "empty map".into(),
            });
        }
        let width = rows[0].chars().count();
        for (n, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(ScenarioError::Map {
                    line: n + 1,
                    message: format!("row has {} cells, expected {width}", row.chars().count()),
                });
            }
            if let Some(c) = row.chars().find(|c| !"#.<>EW".contains(*c)) {
                return Err(ScenarioError::Map {
                    line: n + 1,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
        Ok(MapSpec {
            width: width as i32,
            height: rows.len() as i32,
            rows,
        })
    }

    fn cells(&self) -> impl Iterator<Item = (Pos, char)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(y, row)| row.chars().enumerate().map(move |(x, c)| (Pos::new(x as i32, y as i32), c)))
    }
}

/// Number of agents for a density over `floor` cells.
pub fn agent_count(density: f64, floor: usize) -> usize {
    ((density * floor as f64) + 1e-9).floor() as usize
}

/// Places `⌊density · |floor|⌋` agents on distinct random floor cells, the
/// first `⌊split · n⌋` of them rightward.
fn seed_agents(floor: &[Pos], density: f64, split: f64, v_max: u32, rng: &mut SimRng) -> Vec<Agent> {
    let n = agent_count(density, floor.len());
    let n_right = agent_count(split, n);
    let mut cells = floor.to_vec();
    rng.shuffle(&mut cells);
    cells
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(k, pos)| {
            let species = if k < n_right { Species::Right } else { Species::Left };
            Agent::new(k as u32, pos, v_max, species)
        })
        .collect()
}

/// Periodic corridor bounded by wall rows at the top and bottom.
pub fn build_corridor(config: &ScenarioConfig) -> Result<SimState, ScenarioError> {
    if config.kind != ScenarioKind::CorridorPeriodic {
        return Err(ScenarioError::WrongKind(config.kind.name()));
    }
    let mut grid = Grid::new(config.width, config.height, true)?;
    for x in 0..config.width {
        grid.set_tile(Pos::new(x, 0), Tile::Wall);
        grid.set_tile(Pos::new(x, config.height - 1), Tile::Wall);
    }
    let mut rng = SimRng::new(config.seed);
    let agents = seed_agents(&grid.floor_cells(), config.density, config.split, config.v_max, &mut rng);
    Ok(SimState::new(
        grid,
        agents,
        config.counterflow.clone(),
        config.k_s,
        rng,
        Boundary::None,
    )?)
}

/// Open rectangle: rightward agents enter on the left edge and leave on the
/// right edge, leftward ones the other way round.
pub fn build_open_area(config: &ScenarioConfig) -> Result<SimState, ScenarioError> {
    if config.kind != ScenarioKind::OpenArea {
        return Err(ScenarioError::WrongKind(config.kind.name()));
    }
    let (w, h) = (config.width, config.height);
    let mut grid = Grid::new(w, h, false)?;
    let left: Vec<Pos> = (0..h).map(|y| Pos::new(0, y)).collect();
    let right: Vec<Pos> = (0..h).map(|y| Pos::new(w - 1, y)).collect();
    grid.set_goal(Species::Right, Goal::Cells(right.clone()))?;
    grid.set_goal(Species::Left, Goal::Cells(left.clone()))?;
    let mut rng = SimRng::new(config.seed);
    let agents = seed_agents(&grid.floor_cells(), config.density, config.split, config.v_max, &mut rng);
    Ok(SimState::new(
        grid,
        agents,
        config.counterflow.clone(),
        config.k_s,
        rng,
        Boundary::Respawn { origins: [left, right] },
    )?)
}

/// Builds from a map. Goal cells in the map replace directional goals;
/// agents reaching them leave the simulation. Without pre-seeded agents
/// the map is populated by density and split.
pub fn build_from_map(config: &ScenarioConfig, map: &MapSpec) -> Result<SimState, ScenarioError> {
    let mut grid = Grid::new(map.width, map.height, false)?;
    let mut goals: [Vec<Pos>; 2] = [Vec::new(), Vec::new()];
    let mut agents = Vec::new();
    for (p, c) in map.cells() {
        match c {
            '#' => grid.set_tile(p, Tile::Wall),
            'E' => goals[0].push(p),
            'W' => goals[1].push(p),
            '>' | '<' => {
                let species = if c == '>' { Species::Right } else { Species::Left };
                agents.push(Agent::new(agents.len() as u32, p, config.v_max, species));
            }
            _ => {}
        }
    }
    let has_goals = goals.iter().any(|g| !g.is_empty());
    for s in Species::ALL {
        let cells = std::mem::take(&mut goals[s.index()]);
        if !cells.is_empty() {
            grid.set_goal(s, Goal::Cells(cells))?;
        }
    }
    let mut rng = SimRng::new(config.seed);
    if agents.is_empty() {
        agents = seed_agents(&grid.floor_cells(), config.density, config.split, config.v_max, &mut rng);
    }
    let boundary = if has_goals { Boundary::Exit } else { Boundary::None };
    Ok(SimState::new(
        grid,
        agents,
        config.counterflow.clone(),
        config.k_s,
        rng,
        boundary,
    )?)
}

/// Builds the initial state for any scenario kind. Relative map paths are
/// resolved against `base_dir`.
pub fn build(config: &ScenarioConfig, base_dir: &Path) -> Result<SimState, ScenarioError> {
    match config.kind {
        ScenarioKind::CorridorPeriodic => build_corridor(config),
        ScenarioKind::OpenArea => build_open_area(config),
        ScenarioKind::MapFile => {
            let rel = config.map_path.as_deref().ok_or_else(|| ConfigError {
                line: 0,
                key: "map_path".into(),
                kind: ConfigErrorKind::Missing,
            })?;
            let path = base_dir.join(rel);
            let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                path: path.display().to_string(),
                source,
            })?;
            build_from_map(config, &MapSpec::parse(&text)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor(width: i32, height: i32, density: f64, split: f64, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            width,
            height,
            density,
            split,
            ..ScenarioConfig::new(ScenarioKind::CorridorPeriodic, seed)
        }
    }

    #[test]
    fn defaults_from_minimal_document() {
        let cfg = parse_config("kind = corridor\nseed = 7\n").unwrap();
        let c = &cfg.counterflow;
        assert_eq!((c.k_f, c.n_max, c.h, c.delta, c.a, c.b, c.r_max), (0.8, 12, 4.0, 0.2, 2.0, 15.0, 15.0));
        assert_eq!(c.fov_half_angle, std::f64::consts::FRAC_PI_2);
        assert_eq!(cfg.v_max, 3);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = parse_config("kind = corridor\nseed = 1\nkf = -1\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (3, "kf"));
        assert!(matches!(e.kind, ConfigErrorKind::OutOfRange(_)));
        assert!(e.to_string().contains("kf") && e.to_string().contains("line 3"));

        let e = parse_config("kind = corridor\nseed = 1\nkff = 1\n").unwrap_err();
        assert_eq!((e.line, e.kind.clone()), (3, ConfigErrorKind::Unknown));
        let e = parse_config("kind = corridor\n").unwrap_err();
        assert_eq!((e.key.as_str(), e.kind.clone()), ("seed", ConfigErrorKind::Missing));
        let e = parse_config("kind = corridor\nseed = x\n").unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::Invalid(_)));
        let e = parse_config("kind = corridor\nseed = 1\nseed = 2\n").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::Duplicate);
        let e = parse_config("kind = corridor\nseed = 1\nrounds = 10\nwarmup = 10\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (4, "warmup"));
    }

    #[test]
    fn n_max_override_and_comments() {
        let cfg = parse_config("# test\nkind = open_area # inline\nseed = 3\nn_max = 6\n").unwrap();
        assert_eq!(cfg.counterflow.n_max, 6);
        assert_eq!(cfg.kind, ScenarioKind::OpenArea);
        let mut expect = ScenarioConfig::new(ScenarioKind::OpenArea, 3);
        expect.counterflow.n_max = 6;
        assert_eq!(cfg, expect);
    }

    #[test]
    fn corridor_counts() {
        let s = build_corridor(&corridor(60, 10, 0.0, 0.5, 1)).unwrap();
        assert!(s.agents.is_empty());
        let s = build_corridor(&corridor(12, 5, 1.0, 0.5, 1)).unwrap();
        assert_eq!(s.agents.len(), 36);
        let s = build_corridor(&corridor(60, 10, 0.2, 0.5, 1)).unwrap();
        assert_eq!(s.agents.len(), 96);
        let right = s.agents.iter().filter(|a| a.species == Species::Right).count();
        assert_eq!(right, 48);
        assert!(s.grid.periodic_x());
        assert_eq!(s.grid.tile(Pos::new(5, 0)), Tile::Wall);
        assert_eq!(s.grid.tile(Pos::new(5, 9)), Tile::Wall);
        s.check_invariants().unwrap();
    }

    #[test]
    fn open_area_counts() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::OpenArea, 5);
        cfg.width = 20;
        cfg.height = 20;
        cfg.density = 0.1;
        let s = build_open_area(&cfg).unwrap();
        assert_eq!(s.agents.len(), 40);
        cfg.split = 1.0;
        let s = build_open_area(&cfg).unwrap();
        assert!(s.agents.iter().all(|a| a.species == Species::Right));
        assert!(build_corridor(&cfg).is_err());
    }

    #[test]
    fn map_parsing() {
        let map = MapSpec::parse("#####\nW.>.E\n#.<.#\n#####\n").unwrap();
        let cfg = ScenarioConfig::new(ScenarioKind::MapFile, 1);
        let s = build_from_map(&cfg, &map).unwrap();
        assert_eq!(s.agents.len(), 2);
        assert_eq!(s.agents[0].species, Species::Right);
        assert_eq!(s.agents[1].pos, Pos::new(2, 2));
        assert_eq!(s.field(Species::Right).value(&s.grid, Pos::new(3, 1)), 1.0);
        assert!(MapSpec::parse("##\n#\n").is_err());
        assert!(matches!(MapSpec::parse("#x\n"), Err(ScenarioError::Map { line: 1, .. })));
    }
}
