//! RAM-level variations of small arcade games, and the tooling to measure how
//! agents cope with them.
//!
//! Every game keeps its whole mutable state in a 128-byte [`RamState`]. A
//! variation is a [`PatchSpec`]: an ordered list of conditional writes to RAM
//! cells that fire around each logic tick. Because the games render purely
//! from RAM, the same mechanism covers gameplay changes (an enemy that stops
//! moving) and visual ones (recolored sprites).
//!
//! The crate is split into:
//!
//! - [`machine`]: the deterministic tick/render contract and snapshots;
//! - [`games`]: three native games and their built-in variants;
//! - [`patch`]: patch documents, rule evaluation and [`PatchedMachine`];
//! - [`agents`]: scripted, random, tabular and external-process agents;
//! - [`eval`]: the evaluation protocol and score logs;
//! - [`metrics`]: HNS, performance change, IQM and bootstrap intervals.

pub mod agents;
pub mod eval;
pub mod frame;
pub mod games;
pub mod machine;
pub mod metrics;
pub mod patch;
pub mod ram;
pub mod rng;

pub use frame::{Frame, Rgb, FRAME_HEIGHT, FRAME_WIDTH};
pub use games::{Game, GameError};
pub use machine::{Env, Machine, MachineConfig, MachineError, Snapshot, StepOutcome, TickResult};
pub use patch::{PatchSpec, PatchedMachine};
pub use ram::{Action, RamState, RAM_SIZE};
