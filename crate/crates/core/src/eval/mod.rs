//! The evaluation protocol: noop starts, ε-greedy and sticky-action wrappers,
//! frameskip, and per-episode score records.
//!
//! Per decision the wrappers run in a fixed order:
//! agent → ε-greedy → sticky → frameskip.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{Agent, AgentError, EpisodeInfo, FrameStack, Observation};
use crate::machine::{Env, MachineError};
use crate::ram::Action;

mod log;
mod matrix;

pub use self::log::{read_samples, read_samples_from, write_samples, write_samples_to, SAMPLES_HEADER};
pub use matrix::{build_env, run_matrix, CellFailure, CellSpec, InvalidEpisode, MatrixResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("samples file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("samples parse error at row {row}: {message}")]
    Parse { row: u64, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalProtocol {
    pub n_episodes: u32,
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    pub frameskip: u32,
    pub frames_stacked: usize,
    pub repeat_action_probability: f64,
    pub max_noop_start: u32,
    /// Emulator ticks before an episode is truncated.
    pub max_steps: u32,
    /// Off by default so logs stay byte-identical across reruns.
    pub record_wall_time: bool,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            n_episodes: 30,
            seeds: vec![0, 1, 2],
            epsilon: 0.001,
            frameskip: 4,
            frames_stacked: 4,
            repeat_action_probability: 0.25,
            max_noop_start: 30,
            max_steps: 10_000,
            record_wall_time: false,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidProtocol(m.to_string()));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.repeat_action_probability) {
            return bad("repeat_action_probability must be in [0, 1]");
        }
        if self.frameskip == 0 {
            return bad("frameskip must be at least 1");
        }
        if self.n_episodes == 0 || self.frames_stacked == 0 || self.seeds.is_empty() {
            return bad("episode count, frame stack depth and seed list must be non-empty");
        }
        if self.max_steps == 0 || self.max_steps > u16::MAX as u32 {
            return bad("max_steps must be in 1..=65535");
        }
        Ok(())
    }
}

/// One episode's record, a row of the samples CSV.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScoreSample {
    pub game: String,
    pub variant: String,
    pub agent: String,
    pub seed: u64,
    pub episode: u32,
    pub score: i64,
    pub steps: u32,
    pub wall_ms: u64,
}

/// Full account of an episode, for tests and diagnostics.
#[derive(Clone, Debug, Default)]
pub struct EpisodeTrace {
    pub score: i64,
    /// Agent decisions.
    pub steps: u32,
    pub noops: u32,
    pub sticky_forced: u32,
    pub eps_replaced: u32,
    pub wall_ms: u64,
    /// Populated only when recording was requested.
    pub chosen: Vec<Action>,
    pub executed: Vec<Action>,
}

/// Seeds for the independent random streams of one episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeStreams {
    pub machine: u64,
    pub harness: u64,
    pub agent: u64,
}

fn stream_seed(seed: u64, game: &str, variant: &str, agent: &str, episode: u32, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    for part in [game, variant, agent] {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part.as_bytes());
    }
    h.update(episode.to_be_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Derives the episode's streams from its identity alone, so results do not
/// depend on scheduling or on which other cells run.
pub fn derive_streams(seed: u64, game: &str, variant: &str, agent: &str, episode: u32) -> EpisodeStreams {
    EpisodeStreams {
        machine: stream_seed(seed, game, variant, agent, episode, "machine"),
        harness: stream_seed(seed, game, variant, agent, episode, "harness"),
        agent: stream_seed(seed, game, variant, agent, episode, "agent"),
    }
}

pub fn harness_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Noop-start count, uniform on `0..=max`. The first draw from the harness stream.
pub fn draw_noop_count(rng: &mut ChaCha8Rng, max: u32) -> u32 {
    rng.gen_range(0..=max)
}

/// One decision's wrapper outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wrapped {
    pub action: Action,
    pub eps_replaced: bool,
    pub sticky_forced: bool,
}

/// Applies ε-greedy then sticky actions to the agent's choice. Both uniforms
/// are drawn every decision so the stream stays aligned whatever happens.
pub fn wrap_action(
    chosen: Action,
    previous: Action,
    legal: &[Action],
    protocol: &EvalProtocol,
    rng: &mut ChaCha8Rng,
) -> Wrapped {
    let u_eps: f64 = rng.gen();
    let pick = rng.gen_range(0..legal.len());
    let u_sticky: f64 = rng.gen();
    let eps_replaced = u_eps < protocol.epsilon;
    let issued = if eps_replaced { legal[pick] } else { chosen };
    let sticky_forced = u_sticky < protocol.repeat_action_probability;
    Wrapped {
        action: if sticky_forced { previous } else { issued },
        eps_replaced,
        sticky_forced,
    }
}

fn agent_err(e: AgentError) -> EvalError {
    EvalError::Agent(e)
}

/// Plays one episode on a freshly reset `env`.
///
/// Score is the sum of rewards over agent decisions; rewards collected during
/// the noop start are not credited to the agent.
pub fn run_episode(
    env: &mut dyn Env,
    agent: &mut dyn Agent,
    protocol: &EvalProtocol,
    harness_seed: u64,
    record_actions: bool,
) -> Result<EpisodeTrace, EvalError> {
    let started = Instant::now();
    let game = env.game();
    let legal = game.legal_actions();
    let mut rng = harness_rng(harness_seed);
    let mut trace = EpisodeTrace {
        noops: draw_noop_count(&mut rng, protocol.max_noop_start),
        ..Default::default()
    };

    'noops: for _ in 0..trace.noops {
        for _ in 0..protocol.frameskip {
            if env.is_terminated() {
                break 'noops;
            }
            env.advance(Action::Noop)?;
        }
    }

    let variant = env.variant().to_string();
    agent
        .reset(&EpisodeInfo {
            game: game.id(),
            variant: &variant,
            legal_actions: legal,
        })
        .map_err(agent_err)?;

    let mut frames = FrameStack::new(protocol.frames_stacked);
    frames.fill_with(|f| env.render_into(f));
    let mut previous = Action::Noop;
    while !env.is_terminated() {
        let chosen = agent
            .decide(&Observation {
                game: game.id(),
                legal_actions: legal,
                ram: env.ram(),
                frames: &frames,
                score: env.score(),
                tick: env.steps(),
            })
            .map_err(agent_err)?;
        let chosen = game.sanitize(chosen);
        let wrapped = wrap_action(chosen, previous, legal, protocol, &mut rng);
        trace.steps += 1;
        trace.eps_replaced += wrapped.eps_replaced as u32;
        trace.sticky_forced += wrapped.sticky_forced as u32;
        if record_actions {
            trace.chosen.push(chosen);
            trace.executed.push(wrapped.action);
        }
        previous = wrapped.action;
        for _ in 0..protocol.frameskip {
            if env.is_terminated() {
                break;
            }
            trace.score += env.advance(wrapped.action)?.reward as i64;
        }
        frames.push_with(|f| env.render_into(f));
    }
    if protocol.record_wall_time {
        trace.wall_ms = started.elapsed().as_millis() as u64;
    }
    Ok(trace)
}
