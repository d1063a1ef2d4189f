//! The `ramhack` command line.
//!
//! Every subcommand is a function returning an [`Output`] (exit code plus the
//! text for stdout and stderr) so tests can drive the CLI in-process. Exit
//! codes: 0 success, 1 a run that failed or did not pass, 2 bad arguments or
//! selections.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use ramhack::agents::{prepare, AgentFactory, AgentKind};
use ramhack::eval::{run_matrix, write_samples, CellSpec, EvalProtocol, MatrixResult};
use ramhack::games::{self, builtin_variant, builtin_variants, register_builtin_games, variant_summary, Game};
use ramhack::metrics::{report, report_csv, report_markdown, BootstrapConfig, ReferenceScores, ReportRow};
use ramhack::patch::parse_patch;
use ramhack::PatchSpec;
use ramhack_play::{ServerConfig, SessionConfig, Study};

pub mod args;

pub use args::{Cli, Command, EvalArgs, PlayArgs, ReportFormat};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output {
            code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    fn usage(msg: impl Into<String>) -> Self {
        Output {
            code: 2,
            stdout: String::new(),
            stderr: format!("error: {}\n", msg.into()),
        }
    }

    fn failed(msg: impl Into<String>) -> Self {
        Output {
            code: 1,
            stdout: String::new(),
            stderr: format!("error: {}\n", msg.into()),
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// `env_out` is the value of RAMHACK_OUT, which overrides `--out`.
pub fn run<I, T>(args: I, env_out: Option<PathBuf>) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Output::ok(text)
            } else {
                Output {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    match cli.command {
        Command::List => Output::ok(cmd_list()),
        Command::RamMap { game } => match cmd_ram_map(&game) {
            Ok(text) => Output::ok(text),
            Err(e) => Output::usage(e.to_string()),
        },
        Command::Eval(mut args) => {
            if let Some(dir) = env_out {
                args.out = dir;
            }
            match RunConfig::resolve(&args) {
                Ok(config) => cmd_eval(&config),
                Err(out) => out,
            }
        }
        Command::DemoShortcut { jobs } => cmd_demo_shortcut(jobs),
        Command::PlayServe(args) => cmd_play_serve(&args),
    }
}

pub fn cmd_list() -> String {
    let mut out = String::from("games\n");
    let games = register_builtin_games();
    for g in &games {
        let _ = writeln!(out, "  {:<12} {}", g.id(), g.description());
    }
    out.push_str("variants\n");
    let mut rows = Vec::new();
    for g in &games {
        for v in builtin_variants(g.id()).expect("registered game") {
            let summary = variant_summary(g.id(), &v.name).unwrap_or("");
            rows.push((format!("{} {}", g.id(), v.name), summary));
        }
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (key, summary) in rows {
        let _ = writeln!(out, "  {key:<width$}  {summary}");
    }
    out.push_str("agents\n");
    for (kind, description) in AgentKind::builtin() {
        let _ = writeln!(out, "  {:<16} {}", kind.id(), description);
    }
    let _ = writeln!(out, "  {:<16} subprocess speaking JSON lines on stdin/stdout", "external:<cmd>");
    out
}

/// Aligned table: SYMBOL ADDR ENCODING RANGE MEANING.
pub fn cmd_ram_map(game_id: &str) -> Result<String, games::GameError> {
    let game = games::game(game_id)?;
    let header = ["SYMBOL", "ADDR", "ENCODING", "RANGE", "MEANING"];
    let mut rows: Vec<[String; 5]> = vec![header.map(String::from)];
    for c in game.ram_map() {
        rows.push([
            c.symbol.clone(),
            c.address.to_string(),
            c.encoding.label().to_string(),
            c.range.clone(),
            c.meaning.clone(),
        ]);
    }
    let mut widths = [0usize; 4];
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for r in &rows {
        let line = format!(
            "{:<w0$}  {:<w1$}  {:<w2$}  {:<w3$}  {}",
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3],
        );
        out.push_str(line.trim_end());
        out.push('\n');
    }
    Ok(out)
}

/// A fully resolved evaluation request.
pub struct RunConfig {
    pub cells: Vec<CellSpec>,
    pub protocol: EvalProtocol,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
    pub jobs: usize,
}

const DEMO_VARIANTS: [&str; 2] = ["original", "lazy_enemy"];
const DEMO_AGENTS: [&str; 3] = ["ball_tracker", "enemy_tracker", "random"];

/// The agent whose scores serve as the in-run random baseline.
pub const BASELINE_AGENT: &str = "random";

impl RunConfig {
    /// Resolves every selection against the registries. Trainable agents are
    /// trained here, before any evaluation episode runs.
    pub fn resolve(args: &EvalArgs) -> Result<RunConfig, Output> {
        let protocol = EvalProtocol {
            n_episodes: args.episodes,
            seeds: args.seeds.clone(),
            epsilon: args.epsilon,
            frameskip: args.frameskip,
            repeat_action_probability: args.sticky,
            max_noop_start: args.noop_max,
            ..EvalProtocol::default()
        };
        protocol.validate().map_err(|e| Output::usage(e.to_string()))?;

        let explicit_games = args.games.is_some();
        let games = resolve_games(args.games.as_deref().unwrap_or(&["paddleball".to_string()]))?;
        let variant_names: Vec<String> = match &args.variants {
            Some(v) => v.clone(),
            None if explicit_games => vec!["all".into()],
            None => DEMO_VARIANTS.map(String::from).to_vec(),
        };
        let agent_names: Vec<String> = match &args.agents {
            Some(a) => a.clone(),
            None if explicit_games => vec![BASELINE_AGENT.into()],
            None => DEMO_AGENTS.map(String::from).to_vec(),
        };
        let variants = resolve_variants(&games, &variant_names)?;

        let mut kinds = Vec::new();
        for name in &agent_names {
            let kind = AgentKind::parse(name).map_err(|_| Output::usage(format!("unknown agent '{name}'")))?;
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
        }
        // Performance change needs a random baseline on every cell.
        if !kinds.contains(&AgentKind::Random) {
            kinds.push(AgentKind::Random);
        }

        let mut cells = Vec::new();
        for &game in &games {
            for kind in &kinds {
                let factory: Arc<dyn AgentFactory> = prepare(kind, game).map_err(|e| Output::usage(e.to_string()))?;
                for v in variants.iter().filter(|v| v.game == game.id()) {
                    cells.push(CellSpec {
                        game,
                        variant: v.patch.clone(),
                        agent: factory.clone(),
                    });
                }
            }
        }
        Ok(RunConfig {
            cells,
            protocol,
            out_dir: args.out.clone(),
            format: args.format,
            jobs: args.jobs,
        })
    }
}

struct ResolvedVariant {
    game: &'static str,
    patch: Option<PatchSpec>,
}

fn resolve_games(names: &[String]) -> Result<Vec<&'static dyn Game>, Output> {
    if names.iter().any(|n| n == "all") {
        return Ok(register_builtin_games());
    }
    let mut out: Vec<&'static dyn Game> = Vec::new();
    for name in names {
        let g = games::game(name).map_err(|e| Output::usage(e.to_string()))?;
        if !out.iter().any(|x| x.id() == g.id()) {
            out.push(g);
        }
    }
    Ok(out)
}

fn resolve_variants(games: &[&'static dyn Game], names: &[String]) -> Result<Vec<ResolvedVariant>, Output> {
    let mut out: Vec<ResolvedVariant> = Vec::new();
    let mut push = |v: ResolvedVariant| {
        let name = |r: &ResolvedVariant| r.patch.as_ref().map(|p| p.name.clone());
        if !out.iter().any(|x| x.game == v.game && name(x) == name(&v)) {
            out.push(v);
        }
    };
    for name in names {
        if name == "all" || name == "original" {
            for g in games {
                push(ResolvedVariant { game: g.id(), patch: None });
                if name == "all" {
                    for p in builtin_variants(g.id()).expect("registered game") {
                        push(ResolvedVariant { game: g.id(), patch: Some(p) });
                    }
                }
            }
        } else if name.ends_with(".json") {
            let text = fs::read_to_string(name).map_err(|e| Output::usage(format!("{name}: {e}")))?;
            let patch = parse_patch(&text).map_err(|e| Output::usage(format!("{name}: {e}")))?;
            if patch.name == "original" {
                return Err(Output::usage(format!("{name}: a patch may not be named 'original'")));
            }
            let game = games
                .iter()
                .find(|g| g.id() == patch.game_id)
                .ok_or_else(|| Output::usage(format!("{name}: patch targets '{}', which is not selected", patch.game_id)))?;
            push(ResolvedVariant { game: game.id(), patch: Some(patch) });
        } else {
            let mut found = false;
            for g in games {
                if let Ok(p) = builtin_variant(g.id(), name) {
                    push(ResolvedVariant { game: g.id(), patch: Some(p) });
                    found = true;
                }
            }
            if !found {
                let ids: Vec<&str> = games.iter().map(|g| g.id()).collect();
                return Err(Output::usage(format!("unknown variant '{name}' for {}", ids.join(","))));
            }
        }
    }
    Ok(out)
}

fn run_and_report(config: &RunConfig) -> Result<(MatrixResult, Vec<ReportRow>), Output> {
    let result = run_matrix(&config.cells, &config.protocol, config.jobs).map_err(|e| Output::usage(e.to_string()))?;
    let references = ReferenceScores::from_random_samples(&result.samples, BASELINE_AGENT);
    let rows = report(&result.samples, &references, &BootstrapConfig::default()).map_err(|e| Output::failed(e.to_string()))?;
    Ok((result, rows))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Output> {
    fs::write(path, contents).map_err(|e| Output::failed(format!("{}: {e}", path.display())))
}

/// Runs the matrix, then writes `samples.csv` and the report into the output
/// directory. Prints the report and the paths written.
pub fn cmd_eval(config: &RunConfig) -> Output {
    let (result, rows) = match run_and_report(config) {
        Ok(r) => r,
        Err(out) => return out,
    };
    let written = (|| {
        fs::create_dir_all(&config.out_dir).map_err(|e| Output::failed(format!("{}: {e}", config.out_dir.display())))?;
        let samples_path = config.out_dir.join("samples.csv");
        write_samples(&result.samples, &samples_path).map_err(|e| Output::failed(e.to_string()))?;
        let report_path = config.out_dir.join(config.format.file_name());
        let text = match config.format {
            ReportFormat::Markdown => report_markdown(&rows),
            ReportFormat::Csv => report_csv(&rows),
        };
        write_file(&report_path, &text)?;
        Ok((samples_path, report_path, text))
    })();
    let (samples_path, report_path, text) = match written {
        Ok(w) => w,
        Err(out) => return out,
    };
    let mut out = Output::ok(text);
    let _ = writeln!(out.stdout, "\nsamples: {}", samples_path.display());
    let _ = writeln!(out.stdout, "report: {}", report_path.display());
    let failures = result.failures();
    if !failures.is_empty() {
        out.code = 1;
        for f in failures {
            let _ = writeln!(
                out.stderr,
                "error: {}/{}/{}: {} invalid episodes, first: {}",
                f.game, f.variant, f.agent, f.invalid_episodes, f.first_reason
            );
        }
    }
    out
}

/// Paddleball against the lazy_enemy patch under the default protocol.
pub fn demo_config(jobs: usize) -> RunConfig {
    let game = games::game("paddleball").expect("registered game");
    let lazy = builtin_variant("paddleball", "lazy_enemy").expect("built-in variant");
    let mut cells = Vec::new();
    for name in DEMO_AGENTS {
        let factory = prepare(&AgentKind::parse(name).expect("built-in agent"), game).expect("paddleball agent");
        for variant in [None, Some(lazy.clone())] {
            cells.push(CellSpec {
                game,
                variant,
                agent: factory.clone(),
            });
        }
    }
    RunConfig {
        cells,
        protocol: EvalProtocol::default(),
        out_dir: PathBuf::new(),
        format: ReportFormat::Markdown,
        jobs,
    }
}

/// Thresholds the demonstration must meet, as (agent, bound, upper).
/// `upper` means PC must be at most `bound`.
pub const SHORTCUT_THRESHOLDS: [(&str, f64, bool); 2] = [("enemy_tracker", -0.5, true), ("ball_tracker", -0.1, false)];

pub fn cmd_demo_shortcut(jobs: usize) -> Output {
    let config = demo_config(jobs);
    let (result, rows) = match run_and_report(&config) {
        Ok(r) => r,
        Err(out) => return out,
    };
    let mut iqms: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut pcs: BTreeMap<&str, Option<f64>> = BTreeMap::new();
    for r in &rows {
        iqms.insert((r.agent.as_str(), r.variant.as_str()), r.iqm);
        if r.variant == "lazy_enemy" {
            pcs.insert(r.agent.as_str(), r.performance_change);
        }
    }
    let fmt_pc = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:+.1}%", v * 100.0));
    let p = &config.protocol;
    let mut out = format!(
        "paddleball -> lazy_enemy, {} episodes x {} seeds per cell\n",
        p.n_episodes,
        p.seeds.len()
    );
    let _ = writeln!(out, "{:<14} {:>12} {:>14} {:>9}", "agent", "IQM original", "IQM lazy_enemy", "PC");
    for agent in DEMO_AGENTS {
        let _ = writeln!(
            out,
            "{:<14} {:>12.2} {:>14.2} {:>9}",
            agent,
            iqms.get(&(agent, "original")).copied().unwrap_or(f64::NAN),
            iqms.get(&(agent, "lazy_enemy")).copied().unwrap_or(f64::NAN),
            fmt_pc(pcs.get(agent).copied().flatten())
        );
    }
    let mut all_pass = result.invalid.is_empty();
    for (agent, bound, upper) in SHORTCUT_THRESHOLDS {
        let pc = pcs.get(agent).copied().flatten();
        let pass = pc.is_some_and(|v| if upper { v <= bound } else { v >= bound });
        all_pass &= pass;
        let _ = writeln!(
            out,
            "{agent}: PC {} {} {:+.1}%: {}",
            fmt_pc(pc),
            if upper { "<=" } else { ">=" },
            bound * 100.0,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(out, "SHORTCUT_DEMO: {}", if all_pass { "PASS" } else { "FAIL" });
    let mut output = Output::ok(out);
    if !all_pass {
        output.code = 1;
    }
    output
}

pub fn play_server_config(args: &PlayArgs) -> ServerConfig {
    ServerConfig {
        log_dir: args.log_dir.clone(),
        session: SessionConfig {
            train_min: Duration::from_secs(args.train_min_s),
            train_max: Duration::from_secs(args.train_max_s),
            eval1: Duration::from_secs(args.eval1_s),
            eval2: Duration::from_secs(args.eval2_s),
            tick_hz: args.tick_hz,
            reconnect_grace: Duration::from_secs(args.grace_s),
        },
    }
}

/// Blocks serving sessions; returns only on a startup or I/O error.
pub fn cmd_play_serve(args: &PlayArgs) -> Output {
    let config = play_server_config(args);
    if let Err(e) = config.session.validate() {
        return Output::usage(e);
    }
    let study = match Study::load(&args.study) {
        Ok(s) => s,
        Err(e) => return Output::usage(e.to_string()),
    };
    log::info!("{} study tokens, logging sessions to {}", study.len(), args.log_dir.display());
    match ramhack_play::run_blocking(args.bind, study, config) {
        Ok(()) => Output::ok(String::new()),
        Err(e) => Output::failed(e.to_string()),
    }
}
