//! Score statistics: human-normalized score, performance change, IQM,
//! percentile bootstrap intervals and per-participant human aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::ScoreSample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate reference: {0}")]
    DegenerateReference(String),
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 2 values, got {0}")]
    InsufficientData(usize),
    #[error("no reference scores for {game}/{variant}")]
    MissingReference { game: String, variant: String },
    #[error("non-finite input")]
    NonFinite,
    #[error("references file: {0}")]
    References(String),
}

fn finite(xs: &[f64]) -> Result<(), MetricsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MetricsError::NonFinite)
    }
}

/// Human-normalized score `(A − R) / |H − R|`.
pub fn hns(agent: f64, random: f64, human: f64) -> Result<f64, MetricsError> {
    finite(&[agent, random, human])?;
    if human == random {
        return Err(MetricsError::DegenerateReference(format!("human = random = {human}")));
    }
    Ok((agent - random) / (human - random).abs())
}

/// Random-baseline-ablated change from the original to the modified game:
/// `((Mm − Rm) − (Mo − Ro)) / |Mo − Ro|`. Zero means no change, −1 means the
/// agent fell to random level.
pub fn performance_change(m_modif: f64, r_modif: f64, m_orig: f64, r_orig: f64) -> Result<f64, MetricsError> {
    finite(&[m_modif, r_modif, m_orig, r_orig])?;
    let base = m_orig - r_orig;
    if base == 0.0 {
        return Err(MetricsError::DegenerateReference(format!(
            "original score equals random baseline ({m_orig})"
        )));
    }
    Ok(((m_modif - r_modif) - base) / base.abs())
}

/// Interquartile mean: drops `floor(n/4)` values from each end of the sorted
/// list and averages the rest.
pub fn iqm(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(iqm_sorted(&sorted))
}

fn iqm_sorted(sorted: &[f64]) -> f64 {
    let cut = sorted.len() / 4;
    let kept = &sorted[cut..sorted.len() - cut];
    kept.iter().sum::<f64>() / kept.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiEstimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub resamples: u32,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: u32,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 2000,
            level: 0.95,
            seed: 0,
        }
    }
}

/// Linear-interpolated empirical quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval for the IQM. With `strata` (one label per
/// value, usually the seed) each resample draws within every stratum
/// separately, keeping the stratum sizes.
pub fn bootstrap_ci(values: &[f64], strata: Option<&[u64]>, config: &BootstrapConfig) -> Result<CiEstimate, MetricsError> {
    bootstrap_ci_with(values, strata, config, iqm_sorted)
}

/// [`bootstrap_ci`] for any statistic. `statistic` receives each resample
/// sorted ascending.
pub fn bootstrap_ci_with(
    values: &[f64],
    strata: Option<&[u64]>,
    config: &BootstrapConfig,
    statistic: impl Fn(&[f64]) -> f64,
) -> Result<CiEstimate, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::InsufficientData(values.len()));
    }
    finite(values)?;
    if config.resamples == 0 || !(0.0 < config.level && config.level < 1.0) {
        return Err(MetricsError::DegenerateReference("bootstrap needs resamples > 0 and level in (0,1)".into()));
    }
    let groups: Vec<Vec<f64>> = match strata {
        Some(labels) => {
            assert_eq!(labels.len(), values.len(), "one stratum label per value");
            let mut by: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            for (v, s) in values.iter().zip(labels) {
                by.entry(*s).or_default().push(*v);
            }
            by.into_values().collect()
        }
        None => vec![values.to_vec()],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stats = Vec::with_capacity(config.resamples as usize);
    let mut buf = Vec::with_capacity(values.len());
    for _ in 0..config.resamples {
        buf.clear();
        for g in &groups {
            for _ in 0..g.len() {
                buf.push(g[rng.gen_range(0..g.len())]);
            }
        }
        buf.sort_by(f64::total_cmp);
        stats.push(statistic(&buf));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - config.level) / 2.0;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let point = statistic(&sorted);
    // Rounding in the resample means can leave constant data a hair off.
    let (lo, hi) = (quantile(&stats, alpha), quantile(&stats, 1.0 - alpha));
    Ok(CiEstimate {
        point,
        lo: lo.min(hi),
        hi: hi.max(lo),
        resamples: config.resamples,
        seed: config.seed,
    })
}

/// Mean over participants of each participant's IQM.
pub fn human_aggregate(per_participant: &BTreeMap<String, Vec<f64>>) -> Result<f64, MetricsError> {
    if per_participant.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut total = 0.0;
    for scores in per_participant.values() {
        total += iqm(scores)?;
    }
    Ok(total / per_participant.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub game: String,
    pub variant: String,
    pub random: f64,
    pub human: Option<f64>,
    pub source: String,
}

/// Random (R) and human (H) reference scores per (game, variant).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReferenceScores {
    entries: BTreeMap<(String, String), ReferenceEntry>,
}

pub const REFERENCES_HEADER: &str = "game,variant,random,human,source";

/// Published random and human scores for the real Atari games (originals only).
/// They describe the Atari titles, not the native games in this crate.
pub const ATARI_EXPERT_REFERENCE_CSV: &str = include_str!("../data/atari_expert_reference.csv");

/// In-house random-agent scores for the Atari games and their variants.
pub const ATARI_INHOUSE_RANDOM_CSV: &str = include_str!("../data/atari_inhouse_random.csv");

impl ReferenceScores {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: ReferenceEntry) {
        self.entries.insert((entry.game.clone(), entry.variant.clone()), entry);
    }

    pub fn get(&self, game: &str, variant: &str) -> Option<&ReferenceEntry> {
        self.entries.get(&(game.to_string(), variant.to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = &ReferenceEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries of `other` replace ours on the same cell.
    pub fn merge(&mut self, other: ReferenceScores) {
        self.entries.extend(other.entries);
    }

    pub fn from_csv_str(text: &str) -> Result<ReferenceScores, MetricsError> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| MetricsError::References(e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != REFERENCES_HEADER {
            return Err(MetricsError::References(format!(
                "expected header '{REFERENCES_HEADER}', found '{header}'"
            )));
        }
        let mut refs = ReferenceScores::new();
        for (i, row) in r.deserialize::<ReferenceEntry>().enumerate() {
            let entry = row.map_err(|e| MetricsError::References(format!("row {}: {e}", i + 2)))?;
            refs.insert(entry);
        }
        Ok(refs)
    }

    pub fn load(path: &Path) -> Result<ReferenceScores, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|e| MetricsError::References(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    /// Random baselines measured in-house: the IQM of `random_agent`'s
    /// samples in each (game, variant) cell.
    pub fn from_random_samples(samples: &[ScoreSample], random_agent: &str) -> ReferenceScores {
        let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for s in samples.iter().filter(|s| s.agent == random_agent) {
            cells
                .entry((s.game.clone(), s.variant.clone()))
                .or_default()
                .push(s.score as f64);
        }
        let mut refs = ReferenceScores::new();
        for ((game, variant), scores) in cells {
            refs.insert(ReferenceEntry {
                random: iqm(&scores).expect("non-empty cell"),
                human: None,
                source: "in_house_random".into(),
                game,
                variant,
            });
        }
        refs
    }

    /// Copies human scores of the original games onto entries lacking one.
    pub fn with_human_from(mut self, other: &ReferenceScores) -> ReferenceScores {
        for e in self.entries.values_mut() {
            if e.human.is_none() {
                e.human = other.get(&e.game, &e.variant).and_then(|o| o.human);
            }
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub game: String,
    pub variant: String,
    pub agent: String,
    pub episodes: usize,
    pub iqm: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub hns: Option<f64>,
    /// Versus the same agent on the original game; `None` on original rows.
    pub performance_change: Option<f64>,
}

/// Per (game, variant, agent) IQM with bootstrap CI (stratified by seed),
/// HNS where a human score exists, and performance change against the
/// agent's original-game IQM. Original rows come first within each game.
pub fn report(
    samples: &[ScoreSample],
    references: &ReferenceScores,
    bootstrap: &BootstrapConfig,
) -> Result<Vec<ReportRow>, MetricsError> {
    // (game, variant, agent) -> (scores, seeds)
    type Cells = BTreeMap<(String, String, String), (Vec<f64>, Vec<u64>)>;
    let mut cells: Cells = BTreeMap::new();
    for s in samples {
        let cell = cells
            .entry((s.game.clone(), s.variant.clone(), s.agent.clone()))
            .or_default();
        cell.0.push(s.score as f64);
        cell.1.push(s.seed);
    }
    let mut missing: BTreeSet<(String, String)> = BTreeSet::new();
    for (game, variant, _) in cells.keys() {
        if references.get(game, variant).is_none() {
            missing.insert((game.clone(), variant.clone()));
        }
    }
    if let Some((game, variant)) = missing.into_iter().next() {
        return Err(MetricsError::MissingReference { game, variant });
    }

    let mut rows = Vec::new();
    for ((game, variant, agent), (scores, seeds)) in &cells {
        let point = iqm(scores)?;
        let (lo, hi) = if scores.len() >= 2 {
            let ci = bootstrap_ci(scores, Some(seeds), bootstrap)?;
            (ci.lo, ci.hi)
        } else {
            (point, point)
        };
        let reference = references.get(game, variant).expect("checked above");
        let hns_value = reference.human.and_then(|h| hns(point, reference.random, h).ok());
        let pc = if variant == "original" {
            None
        } else {
            let original = cells.get(&(game.clone(), "original".into(), agent.clone()));
            match (original, references.get(game, "original")) {
                (Some((orig_scores, _)), Some(orig_ref)) => {
                    performance_change(point, reference.random, iqm(orig_scores)?, orig_ref.random).ok()
                }
                _ => None,
            }
        };
        rows.push(ReportRow {
            game: game.clone(),
            variant: variant.clone(),
            agent: agent.clone(),
            episodes: scores.len(),
            iqm: point,
            ci_lo: lo,
            ci_hi: hi,
            hns: hns_value,
            performance_change: pc,
        });
    }
    rows.sort_by(|a, b| {
        (&a.game, a.variant != "original", &a.variant, &a.agent).cmp(&(&b.game, b.variant != "original", &b.variant, &b.agent))
    });
    Ok(rows)
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "-".to_string(), f)
}

/// Markdown table; variant rows are indented under their game's original rows.
pub fn report_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str("| game / variant | agent | n | IQM | 95% CI | HNS | PC |\n");
    out.push_str("|---|---|---:|---:|---|---:|---:|\n");
    for r in rows {
        let label = if r.variant == "original" {
            r.game.clone()
        } else {
            format!("&nbsp;&nbsp;{}", r.variant)
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.2} | [{:.2}, {:.2}] | {} | {} |",
            label,
            r.agent,
            r.episodes,
            r.iqm,
            r.ci_lo,
            r.ci_hi,
            opt(r.hns, |v| format!("{v:.3}")),
            opt(r.performance_change, |v| format!("{:+.1}%", v * 100.0)),
        );
    }
    out
}

pub const REPORT_HEADER: &str = "game,variant,agent,episodes,iqm,ci_lo,ci_hi,hns,performance_change";

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(REPORT_HEADER.split(',')).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.game.clone(),
            r.variant.clone(),
            r.agent.clone(),
            r.episodes.to_string(),
            format!("{:.6}", r.iqm),
            format!("{:.6}", r.ci_lo),
            format!("{:.6}", r.ci_hi),
            r.hns.map_or(String::new(), |v| format!("{v:.6}")),
            r.performance_change.map_or(String::new(), |v| format!("{v:.6}")),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
