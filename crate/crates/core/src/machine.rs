//! The deterministic machine: one game, 128 bytes of RAM, a step counter and
//! an RNG. Nothing else carries state, so a [`Snapshot`] of those three is a
//! complete save state.

use thiserror::Error;

use crate::frame::Frame;
use crate::games::{self, Game, GameError};
use crate::patch::{apply_rules, PatchRule, Trigger};
use crate::ram::{Action, RamState, RAM_SIZE};
use crate::rng::SplitMix64;

pub const DEFAULT_MAX_STEPS: u32 = 10_000;
pub const SNAPSHOT_LEN: usize = RAM_SIZE + 2 + 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("episode is over; reset before stepping")]
    EpisodeOver,
    #[error("invalid machine config: {0}")]
    InvalidConfig(String),
    #[error("snapshot must be {SNAPSHOT_LEN} bytes, got {0}")]
    BadSnapshot(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineConfig {
    pub game_id: String,
    pub seed: u64,
    pub max_steps_per_episode: u32,
}

impl MachineConfig {
    pub fn new(game_id: impl Into<String>, seed: u64) -> Self {
        MachineConfig {
            game_id: game_id.into(),
            seed,
            max_steps_per_episode: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_max_steps(mut self, max_steps: u32) -> Self {
        self.max_steps_per_episode = max_steps;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub frame: Frame,
    pub reward: i32,
    pub terminated: bool,
    pub ram_after: RamState,
}

/// Result of a tick without rendering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TickResult {
    pub reward: i32,
    pub terminated: bool,
}

/// 138-byte save state: RAM, big-endian step counter, big-endian RNG state.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Snapshot(pub [u8; SNAPSHOT_LEN]);

impl Snapshot {
    pub fn as_bytes(&self) -> &[u8; SNAPSHOT_LEN] {
        &self.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MachineError> {
        let arr: [u8; SNAPSHOT_LEN] = bytes
            .try_into()
            .map_err(|_| MachineError::BadSnapshot(bytes.len()))?;
        Ok(Snapshot(arr))
    }

    pub fn ram(&self) -> RamState {
        RamState::from_slice(&self.0[..RAM_SIZE]).expect("snapshot ram is 128 bytes")
    }

    pub fn steps(&self) -> u16 {
        u16::from_be_bytes([self.0[RAM_SIZE], self.0[RAM_SIZE + 1]])
    }

    pub fn rng_state(&self) -> u64 {
        u64::from_be_bytes(self.0[RAM_SIZE + 2..].try_into().unwrap())
    }
}

/// Anything the evaluation harness can drive: a bare [`Machine`] or a
/// [`crate::PatchedMachine`].
pub trait Env: Send {
    fn game(&self) -> &'static dyn Game;

    /// `"original"` for an unpatched machine, otherwise the patch name.
    fn variant(&self) -> &str;

    /// Restarts the episode from the game's reset state.
    fn reset(&mut self, seed: u64);

    /// One logic tick, no rendering.
    fn advance(&mut self, action: Action) -> Result<TickResult, MachineError>;

    fn ram(&self) -> RamState;

    fn set_ram(&mut self, ram: RamState);

    fn steps(&self) -> u32;

    fn is_terminated(&self) -> bool;

    fn snapshot(&self) -> Snapshot;

    fn restore(&mut self, snapshot: &Snapshot);

    fn step(&mut self, action: Action) -> Result<StepOutcome, MachineError> {
        let tick = self.advance(action)?;
        let ram_after = self.ram();
        Ok(StepOutcome {
            frame: self.render(),
            reward: tick.reward,
            terminated: tick.terminated,
            ram_after,
        })
    }

    fn render_into(&self, frame: &mut Frame) {
        self.game().render(&self.ram(), frame);
    }

    fn render(&self) -> Frame {
        let mut frame = Frame::new(0);
        self.render_into(&mut frame);
        frame
    }

    fn score(&self) -> i32 {
        self.game().score(&self.ram())
    }
}

#[derive(Clone)]
pub struct Machine {
    game: &'static dyn Game,
    ram: RamState,
    rng: SplitMix64,
    steps: u16,
    max_steps: u16,
    terminated: bool,
}

impl std::fmt::Debug for Machine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Machine")
            .field("game", &self.game.id())
            .field("steps", &self.steps)
            .field("terminated", &self.terminated)
            .finish_non_exhaustive()
    }
}

impl Machine {
    pub fn create(config: &MachineConfig) -> Result<Machine, MachineError> {
        let game = games::game(&config.game_id)?;
        let max_steps = u16::try_from(config.max_steps_per_episode)
            .ok()
            .filter(|&m| m > 0)
            .ok_or_else(|| {
                MachineError::InvalidConfig(format!(
                    "max_steps_per_episode must be in 1..=65535, got {}",
                    config.max_steps_per_episode
                ))
            })?;
        let mut machine = Machine {
            game,
            ram: RamState::zeroed(),
            rng: SplitMix64::new(config.seed),
            steps: 0,
            max_steps,
            terminated: false,
        };
        machine.reset_with(config.seed, &[]);
        Ok(machine)
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps as u32
    }

    pub(crate) fn reset_with(&mut self, seed: u64, rules: &[PatchRule]) {
        self.rng = SplitMix64::new(seed);
        self.steps = 0;
        self.game.reset(&mut self.ram, &mut self.rng);
        if !rules.is_empty() {
            let prev = self.ram;
            apply_rules(rules, Trigger::OnReset, &mut self.ram, &prev);
        }
        self.refresh_terminated();
    }

    /// One tick with patch hooks. `prev` for hold effects is the RAM as it
    /// stood at the end of the previous tick, i.e. at entry.
    pub(crate) fn advance_with(
        &mut self,
        action: Action,
        rules: &[PatchRule],
    ) -> Result<TickResult, MachineError> {
        if self.terminated {
            return Err(MachineError::EpisodeOver);
        }
        let before = self.game.score(&self.ram);
        let prev = self.ram;
        if !rules.is_empty() {
            apply_rules(rules, Trigger::PreStep, &mut self.ram, &prev);
        }
        let action = self.game.sanitize(action);
        self.game.tick(&mut self.ram, action, &mut self.rng);
        if !rules.is_empty() {
            apply_rules(rules, Trigger::PostStep, &mut self.ram, &prev);
        }
        self.steps += 1;
        self.refresh_terminated();
        Ok(TickResult {
            reward: self.game.score(&self.ram) - before,
            terminated: self.terminated,
        })
    }

    fn refresh_terminated(&mut self) {
        self.terminated = self.game.is_over(&self.ram) || self.steps >= self.max_steps;
    }

    pub(crate) fn restore_state(&mut self, snapshot: &Snapshot) {
        self.ram = snapshot.ram();
        self.steps = snapshot.steps();
        self.rng = SplitMix64::from_state(snapshot.rng_state());
        self.refresh_terminated();
    }

    pub(crate) fn make_snapshot(&self) -> Snapshot {
        let mut out = [0u8; SNAPSHOT_LEN];
        out[..RAM_SIZE].copy_from_slice(self.ram.as_bytes());
        out[RAM_SIZE..RAM_SIZE + 2].copy_from_slice(&self.steps.to_be_bytes());
        out[RAM_SIZE + 2..].copy_from_slice(&self.rng.state().to_be_bytes());
        Snapshot(out)
    }
}

impl Env for Machine {
    fn game(&self) -> &'static dyn Game {
        self.game
    }

    fn variant(&self) -> &str {
        "original"
    }

    fn reset(&mut self, seed: u64) {
        self.reset_with(seed, &[]);
    }

    fn advance(&mut self, action: Action) -> Result<TickResult, MachineError> {
        self.advance_with(action, &[])
    }

    fn ram(&self) -> RamState {
        self.ram
    }

    fn set_ram(&mut self, ram: RamState) {
        self.ram = ram;
        self.refresh_terminated();
    }

    fn steps(&self) -> u32 {
        self.steps as u32
    }

    fn is_terminated(&self) -> bool {
        self.terminated
    }

    fn snapshot(&self) -> Snapshot {
        self.make_snapshot()
    }

    fn restore(&mut self, snapshot: &Snapshot) {
        self.restore_state(snapshot);
    }
}

/// Renders `ram` as the named game would. Pure.
pub fn render(ram: &RamState, game_id: &str) -> Result<Frame, GameError> {
    let game = games::game(game_id)?;
    let mut frame = Frame::new(0);
    game.render(ram, &mut frame);
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::paddleball as pb;

    fn paddleball(seed: u64) -> Machine {
        Machine::create(&MachineConfig::new("paddleball", seed)).unwrap()
    }

    #[test]
    fn create_applies_reset() {
        let m = paddleball(0);
        assert_eq!(m.ram().read(pb::PLAYER_Y), 105);
        assert_eq!(m.ram().read(pb::ENEMY_Y), 105);
        assert_eq!(m.steps(), 0);
        assert_eq!(paddleball(7).ram(), paddleball(7).ram());
    }

    #[test]
    fn unknown_game_is_rejected() {
        let err = Machine::create(&MachineConfig::new("nosuchgame", 0)).unwrap_err();
        assert_eq!(err, MachineError::Game(GameError::UnknownGame("nosuchgame".into())));
        assert!(render(&RamState::zeroed(), "nosuchgame").is_err());
    }

    #[test]
    fn max_steps_must_fit_the_snapshot_counter() {
        let cfg = MachineConfig::new("paddleball", 0).with_max_steps(70_000);
        assert!(matches!(Machine::create(&cfg), Err(MachineError::InvalidConfig(_))));
        let cfg = MachineConfig::new("paddleball", 0).with_max_steps(0);
        assert!(matches!(Machine::create(&cfg), Err(MachineError::InvalidConfig(_))));
    }

    #[test]
    fn stepping_after_termination_fails() {
        let cfg = MachineConfig::new("crossing", 0).with_max_steps(3);
        let mut m = Machine::create(&cfg).unwrap();
        for i in 0..3 {
            let out = m.step(Action::Up).unwrap();
            assert_eq!(out.terminated, i == 2);
        }
        assert_eq!(m.step(Action::Noop), Err(MachineError::EpisodeOver));
    }

    #[test]
    fn set_ram_round_trips_and_drives_next_step() {
        let mut m = paddleball(1);
        let mut r = m.ram();
        r.write(pb::BALL_DX, 254);
        m.set_ram(r);
        assert_eq!(m.ram(), r);
        let x = r.read(pb::BALL_X);
        let out = m.step(Action::Noop).unwrap();
        assert_eq!(out.ram_after.read(pb::BALL_X), x - 2);
    }

    #[test]
    fn get_ram_returns_a_copy() {
        let m = paddleball(2);
        let mut copy = m.ram();
        copy.write(0, 0xff);
        assert_ne!(m.ram().read(0), 0xff);
    }

    #[test]
    fn snapshot_layout() {
        let mut m = paddleball(11);
        for _ in 0..300 {
            m.step(Action::Down).unwrap();
        }
        let snap = m.snapshot();
        assert_eq!(snap.as_bytes().len(), 138);
        assert_eq!(&snap.as_bytes()[..128], m.ram().as_bytes());
        assert_eq!(&snap.as_bytes()[128..130], &300u16.to_be_bytes());
        assert_eq!(Snapshot::from_bytes(&[0; 10]), Err(MachineError::BadSnapshot(10)));
    }
}
