use std::sync::Arc;

use rayon::prelude::*;

use super::{derive_streams, run_episode, EvalError, EvalProtocol, ScoreSample};
use crate::agents::AgentFactory;
use crate::games::Game;
use crate::machine::{Env, Machine, MachineConfig};
use crate::patch::{PatchSpec, PatchedMachine};

/// One (game, variant, agent) cell of the matrix.
#[derive(Clone)]
pub struct CellSpec {
    pub game: &'static dyn Game,
    /// `None` plays the original game.
    pub variant: Option<PatchSpec>,
    pub agent: Arc<dyn AgentFactory>,
}

impl CellSpec {
    pub fn variant_name(&self) -> &str {
        self.variant.as_ref().map_or("original", |v| v.name.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvalidEpisode {
    pub game: String,
    pub variant: String,
    pub agent: String,
    pub seed: u64,
    pub episode: u32,
    pub reason: String,
}

/// Invalid episodes of one cell, grouped for reporting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellFailure {
    pub game: String,
    pub variant: String,
    pub agent: String,
    pub invalid_episodes: usize,
    pub first_reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct MatrixResult {
    /// Sorted by (game, variant, agent, seed, episode).
    pub samples: Vec<ScoreSample>,
    pub invalid: Vec<InvalidEpisode>,
}

impl MatrixResult {
    pub fn failures(&self) -> Vec<CellFailure> {
        let mut out: Vec<CellFailure> = Vec::new();
        for inv in &self.invalid {
            match out
                .iter_mut()
                .find(|f| f.game == inv.game && f.variant == inv.variant && f.agent == inv.agent)
            {
                Some(f) => f.invalid_episodes += 1,
                None => out.push(CellFailure {
                    game: inv.game.clone(),
                    variant: inv.variant.clone(),
                    agent: inv.agent.clone(),
                    invalid_episodes: 1,
                    first_reason: inv.reason.clone(),
                }),
            }
        }
        out
    }
}

/// A freshly reset environment for `game` with an optional patch.
pub fn build_env(
    game: &dyn Game,
    variant: Option<&PatchSpec>,
    seed: u64,
    max_steps: u32,
) -> Result<Box<dyn Env>, EvalError> {
    let config = MachineConfig::new(game.id(), seed).with_max_steps(max_steps);
    let machine = Machine::create(&config)?;
    Ok(match variant {
        None => Box::new(machine),
        Some(spec) => Box::new(
            PatchedMachine::attach(machine, spec.clone(), seed)
                .map_err(|e| EvalError::InvalidProtocol(e.to_string()))?,
        ),
    })
}

fn run_one(cell: &CellSpec, protocol: &EvalProtocol, seed: u64, episode: u32) -> Result<ScoreSample, InvalidEpisode> {
    let variant = cell.variant_name();
    let agent_id = cell.agent.id();
    let streams = derive_streams(seed, cell.game.id(), variant, agent_id, episode);
    let outcome = build_env(cell.game, cell.variant.as_ref(), streams.machine, protocol.max_steps).and_then(|mut env| {
        let mut agent = cell.agent.build(streams.agent);
        run_episode(env.as_mut(), agent.as_mut(), protocol, streams.harness, false)
    });
    match outcome {
        Ok(trace) => Ok(ScoreSample {
            game: cell.game.id().into(),
            variant: variant.into(),
            agent: agent_id.into(),
            seed,
            episode,
            score: trace.score,
            steps: trace.steps,
            wall_ms: trace.wall_ms,
        }),
        Err(e) => Err(InvalidEpisode {
            game: cell.game.id().into(),
            variant: variant.into(),
            agent: agent_id.into(),
            seed,
            episode,
            reason: e.to_string(),
        }),
    }
}

/// Runs every cell for every seed and episode, in parallel on `jobs`
/// threads (0 = rayon's default). Failed episodes are collected, not fatal.
pub fn run_matrix(cells: &[CellSpec], protocol: &EvalProtocol, jobs: usize) -> Result<MatrixResult, EvalError> {
    protocol.validate()?;
    let tasks: Vec<(usize, u64, u32)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, _)| {
            protocol
                .seeds
                .iter()
                .flat_map(move |&s| (0..protocol.n_episodes).map(move |e| (c, s, e)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::InvalidProtocol(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<ScoreSample, InvalidEpisode>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, s, e)| run_one(&cells[c], protocol, s, e))
            .collect()
    });
    let mut result = MatrixResult::default();
    for outcome in outcomes {
        match outcome {
            Ok(sample) => result.samples.push(sample),
            Err(invalid) => {
                ::log::warn!(
                    "invalid episode {}/{}/{} seed {} episode {}: {}",
                    invalid.game,
                    invalid.variant,
                    invalid.agent,
                    invalid.seed,
                    invalid.episode,
                    invalid.reason
                );
                result.invalid.push(invalid);
            }
        }
    }
    result.samples.sort();
    result.invalid.sort_by(|a, b| {
        (&a.game, &a.variant, &a.agent, a.seed, a.episode).cmp(&(&b.game, &b.variant, &b.agent, b.seed, b.episode))
    });
    Ok(result)
}
