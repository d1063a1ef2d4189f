use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ramhack", version, about = "RAM-level game variants and agent evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List games, variants and agents.
    List,
    /// Run an evaluation matrix and write samples.csv plus a report.
    Eval(EvalArgs),
    /// Run the paddleball enemy-tracking shortcut demonstration.
    DemoShortcut {
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Print a game's RAM map.
    RamMap { game: String },
    /// Serve human play sessions over WebSocket.
    PlayServe(PlayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "report.md",
            ReportFormat::Csv => "report.csv",
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct EvalArgs {
    /// Comma-separated game ids, or `all`. Default: paddleball.
    #[arg(long, value_delimiter = ',')]
    pub games: Option<Vec<String>>,
    /// Variant names, `original`, `all`, or paths to patch JSON files.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Agent ids; `external:<command>` runs a subprocess agent.
    #[arg(long, value_delimiter = ',')]
    pub agents: Option<Vec<String>>,
    /// Episodes per seed.
    #[arg(long, default_value_t = 30)]
    pub episodes: u32,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.001)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 4)]
    pub frameskip: u32,
    /// Probability of repeating the previous executed action.
    #[arg(long, default_value_t = 0.25)]
    pub sticky: f64,
    #[arg(long, default_value_t = 30)]
    pub noop_max: u32,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory. RAMHACK_OUT takes precedence.
    #[arg(long, default_value = "ramhack-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
    pub format: ReportFormat,
}

#[derive(Clone, Debug, Args)]
pub struct PlayArgs {
    /// CSV with columns token,game,variant.
    #[arg(long)]
    pub study: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long, default_value = "sessions")]
    pub log_dir: PathBuf,
    #[arg(long, default_value_t = 600)]
    pub train_min_s: u64,
    #[arg(long, default_value_t = 900)]
    pub train_max_s: u64,
    #[arg(long, default_value_t = 900)]
    pub eval1_s: u64,
    #[arg(long, default_value_t = 900)]
    pub eval2_s: u64,
    /// Seconds a dropped connection may take to come back.
    #[arg(long, default_value_t = 60)]
    pub grace_s: u64,
    #[arg(long, default_value_t = 30)]
    pub tick_hz: u32,
}
