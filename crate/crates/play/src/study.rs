//! Study file (`token,game,variant`), session logs and study aggregation.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ramhack::games::{builtin_variant, game};
use ramhack::metrics::{human_aggregate, performance_change, ReferenceScores};
use ramhack::PatchSpec;

use crate::messages::Phase;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("study file row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("session log {path} row {row}: {message}")]
    Log { path: String, row: usize, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StudyError {
    StudyError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyEntry {
    pub token: String,
    pub game: String,
    pub variant: String,
}

/// Token → (game, variant). Every token appears once and names a built-in
/// variant of a registered game.
#[derive(Clone, Debug, Default)]
pub struct Study {
    entries: BTreeMap<String, StudyEntry>,
}

pub const STUDY_HEADER: &str = "token,game,variant";

impl Study {
    pub fn parse(text: &str) -> Result<Study, StudyError> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| StudyError::Parse { row: 1, message: e.to_string() })?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != STUDY_HEADER {
            return Err(StudyError::Parse {
                row: 1,
                message: format!("expected header '{STUDY_HEADER}', found '{header}'"),
            });
        }
        let mut study = Study::default();
        for (i, rec) in r.deserialize::<StudyEntry>().enumerate() {
            let row = i + 2;
            let entry = rec.map_err(|e| StudyError::Parse { row, message: e.to_string() })?;
            let bad = |message: String| StudyError::Parse { row, message };
            if entry.token.is_empty() || !entry.token.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(bad(format!("token '{}' must be non-empty [A-Za-z0-9_-]", entry.token)));
            }
            game(&entry.game).map_err(|e| bad(e.to_string()))?;
            builtin_variant(&entry.game, &entry.variant).map_err(|e| bad(e.to_string()))?;
            if study.entries.contains_key(&entry.token) {
                return Err(bad(format!("duplicate token '{}'", entry.token)));
            }
            study.entries.insert(entry.token.clone(), entry);
        }
        Ok(study)
    }

    pub fn load(path: &Path) -> Result<Study, StudyError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Study::parse(&text)
    }

    pub fn get(&self, token: &str) -> Option<&StudyEntry> {
        self.entries.get(token)
    }

    pub fn entries(&self) -> impl Iterator<Item = &StudyEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl StudyEntry {
    pub fn patch(&self) -> PatchSpec {
        builtin_variant(&self.game, &self.variant).expect("validated at load")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLogRow {
    pub token: String,
    pub phase: Phase,
    pub episode: u32,
    pub score: i32,
    pub steps: u32,
    /// UTC, ISO-8601.
    pub timestamp: String,
}

pub const SESSION_HEADER: &str = "token,phase,episode,score,steps,timestamp";

pub fn session_log_path(dir: &Path, token: &str) -> PathBuf {
    dir.join(format!("{token}.csv"))
}

pub fn complete_marker(dir: &Path, token: &str) -> PathBuf {
    dir.join(format!("{token}.complete"))
}

pub fn aborted_marker(dir: &Path, token: &str) -> PathBuf {
    dir.join(format!("{token}.aborted"))
}

/// Append-only per-token log; every row is flushed as it is written.
pub struct SessionLog {
    dir: PathBuf,
    token: String,
    file: File,
}

impl SessionLog {
    pub fn open(dir: &Path, token: &str) -> Result<SessionLog, StudyError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = session_log_path(dir, token);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        if file.metadata().map_err(|e| io_err(&path, e))?.len() == 0 {
            writeln!(file, "{SESSION_HEADER}").map_err(|e| io_err(&path, e))?;
        }
        Ok(SessionLog {
            dir: dir.to_path_buf(),
            token: token.to_string(),
            file,
        })
    }

    pub fn append(&mut self, row: &SessionLogRow) -> Result<(), StudyError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.serialize(row).expect("in-memory write");
        let bytes = w.into_inner().expect("flush");
        let path = session_log_path(&self.dir, &self.token);
        self.file
            .write_all(&bytes)
            .and_then(|_| self.file.flush())
            .map_err(|e| io_err(&path, e))
    }

    pub fn mark(&self, complete: bool) -> Result<(), StudyError> {
        let path = if complete {
            complete_marker(&self.dir, &self.token)
        } else {
            aborted_marker(&self.dir, &self.token)
        };
        std::fs::write(&path, chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)).map_err(|e| io_err(&path, e))
    }
}

pub fn read_session_log(path: &Path) -> Result<Vec<SessionLogRow>, StudyError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let log_err = |row: usize, message: String| StudyError::Log {
        path: path.display().to_string(),
        row,
        message,
    };
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| log_err(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != SESSION_HEADER {
        return Err(log_err(1, format!("unexpected header '{header}'")));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| log_err(i + 2, e.to_string())))
        .collect()
}

/// Human results for one (game, variant) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyCell {
    pub game: String,
    pub variant: String,
    pub participants: usize,
    /// Mean of per-participant IQMs on the original game.
    pub eval1: f64,
    /// Same on the variant.
    pub eval2: f64,
    /// Eval1 → eval2 performance change; needs random baselines for both.
    pub performance_change: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub cells: Vec<StudyCell>,
    /// Sessions that started but did not complete all phases.
    pub excluded: usize,
}

/// Aggregates complete sessions per (game, variant). Sessions with a log but
/// no completion marker are excluded and counted.
pub fn aggregate_study(log_dir: &Path, study: &Study, references: &ReferenceScores) -> Result<StudyReport, StudyError> {
    type Cell = (BTreeMap<String, Vec<f64>>, BTreeMap<String, Vec<f64>>);
    let mut cells: BTreeMap<(String, String), Cell> = BTreeMap::new();
    let mut excluded = 0;
    for entry in study.entries() {
        let log = session_log_path(log_dir, &entry.token);
        let complete = complete_marker(log_dir, &entry.token).exists();
        if !complete {
            if log.exists() || aborted_marker(log_dir, &entry.token).exists() {
                log::warn!("excluding incomplete session {}", entry.token);
                excluded += 1;
            }
            continue;
        }
        let rows = read_session_log(&log)?;
        let cell = cells.entry((entry.game.clone(), entry.variant.clone())).or_default();
        for row in rows {
            let target = match row.phase {
                Phase::Eval1 => &mut cell.0,
                Phase::Eval2 => &mut cell.1,
                Phase::Train => continue,
            };
            target.entry(entry.token.clone()).or_default().push(row.score as f64);
        }
    }
    let mut out = Vec::new();
    for ((game, variant), (eval1, eval2)) in cells {
        if eval1.is_empty() || eval2.is_empty() {
            continue;
        }
        let m_orig = human_aggregate(&eval1).expect("non-empty");
        let m_modif = human_aggregate(&eval2).expect("non-empty");
        let pc = match (references.get(&game, "original"), references.get(&game, &variant)) {
            (Some(ro), Some(rm)) => performance_change(m_modif, rm.random, m_orig, ro.random).ok(),
            _ => None,
        };
        out.push(StudyCell {
            participants: eval1.len().max(eval2.len()),
            game,
            variant,
            eval1: m_orig,
            eval2: m_modif,
            performance_change: pc,
        });
    }
    Ok(StudyReport { cells: out, excluded })
}
