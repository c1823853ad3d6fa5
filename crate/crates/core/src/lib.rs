//! Floor-field pedestrian cellular automaton with a comoving dynamic
//! potential for counterflow, plus the measurement harness used to study
//! lane formation, deadlocks and fundamental diagrams.
//!
//! All lengths are in cells and all times in rounds.

pub mod counterflow;
pub mod experiment;
pub mod kinematics;
pub mod lattice;
pub mod metrics;
pub mod scenario;

pub use counterflow::{CounterflowParams, NeighborRef, RegionVariant};
pub use kinematics::{Agent, Boundary, Model, SimRng, SimState};
pub use lattice::{Goal, Grid, Offset, Pos, Species, StaticField, Tile};
pub use metrics::{FdPoint, MetricsRecord};
pub use scenario::{parse_config, ScenarioConfig, ScenarioKind};
