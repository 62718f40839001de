//! `swaycue`: run calibration, trials and the full protocol against a live,
//! replayed or simulated sway source; report, render and re-analyse stored
//! trials; or serve the engine to an operator console.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{AudioOut, RenderArgs, SourceArgs};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use swaycue_core::audio::wav::WavFormat;
use swaycue_core::{Eyes, Group, Surface};
use uuid::Uuid;

#[derive(Debug, Parser)]
#[command(name = "swaycue", version, about = "Audio biofeedback for standing balance")]
pub struct Cli {
    /// TOML file with optional [sim], [render] and [source] sections
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Address the gateway binds for `serve`
    #[arg(long, global = true, value_name = "ADDR", default_value = swaycue_gateway::DEFAULT_BIND)]
    pub http: SocketAddr,
    /// Never open the network gateway
    #[arg(long, global = true)]
    pub headless: bool,
    /// More log output (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SubjectArgs {
    /// Subject identifier; also names the store file
    #[arg(long, default_value = "subject-1")]
    pub subject: String,
    /// younger, older or unspecified
    #[arg(long, default_value = "unspecified")]
    pub group: Group,
}

#[derive(Debug, Clone, Args)]
pub struct StoreArgs {
    /// Trial store directory (one .jsonl file per subject)
    #[arg(long, default_value = "trials", value_name = "DIR")]
    pub store: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average the natural-stance posture and print the baseline as JSON
    Calibrate {
        #[command(flatten)]
        source: SourceArgs,
        /// Calibration window in seconds
        #[arg(long, default_value_t = 5.0, value_name = "S")]
        window: f64,
        /// Also write the baseline to this file
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run and store one trial
    Trial {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        render: RenderArgs,
        #[command(flatten)]
        subject: SubjectArgs,
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, default_value = "open")]
        eyes: Eyes,
        #[arg(long, default_value = "floor")]
        surface: Surface,
        /// Play audio feedback during the trial
        #[arg(long)]
        abf: bool,
        /// Baseline JSON from `calibrate`; calibrates first when absent
        #[arg(long, value_name = "FILE")]
        baseline: Option<PathBuf>,
        /// Calibration window in seconds when calibrating first
        #[arg(long, default_value_t = 5.0, value_name = "S")]
        window: f64,
        /// Trial length in seconds
        #[arg(long, default_value_t = 60.0, value_name = "S")]
        duration: f64,
        /// Write the synthesis parameter timeline here
        #[arg(long, value_name = "FILE")]
        timeline: Option<PathBuf>,
        /// Live audio: `null`, `-` for raw s16le on stdout, or a file path
        #[arg(long, value_name = "SINK")]
        audio: Option<AudioOut>,
    },
    /// Run the eight-trial protocol, resuming whatever is already stored
    Protocol {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        render: RenderArgs,
        #[command(flatten)]
        subject: SubjectArgs,
        #[command(flatten)]
        store: StoreArgs,
        /// Shuffle the trial order with this seed
        #[arg(long, value_name = "N")]
        shuffle_seed: Option<u64>,
        /// Calibrate before each condition instead of once
        #[arg(long)]
        recalibrate_per_condition: bool,
        /// Start every trial without asking
        #[arg(short, long)]
        yes: bool,
        #[arg(long, default_value_t = 5.0, value_name = "S")]
        window: f64,
        #[arg(long, default_value_t = 60.0, value_name = "S")]
        duration: f64,
        #[arg(long, value_name = "SINK")]
        audio: Option<AudioOut>,
        /// Print the outcome as JSON
        #[arg(long)]
        json: bool,
    },
    /// Median improvement report over every subject in the store
    Report {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Render a sway series offline to WAV plus a JSON parameter timeline
    Render {
        /// CSV of t_s,pitch_deg,roll_deg, taken as already calibrated
        #[arg(long, value_name = "CSV", conflicts_with = "trial", required_unless_present = "trial")]
        csv: Option<PathBuf>,
        /// Stored trial to render
        #[arg(long, value_name = "UUID")]
        trial: Option<Uuid>,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long, value_name = "WAV")]
        out: PathBuf,
        /// s16 or f32
        #[arg(long, default_value = "f32")]
        wav_format: WavFormat,
        /// Timeline path; defaults to the WAV path with a .timeline.json suffix
        #[arg(long, value_name = "FILE")]
        timeline: Option<PathBuf>,
    },
    /// Recompute metrics from stored trials and check them
    Analyze {
        /// .jsonl files or store directories
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        /// Write a dispersion dataset per trial into this directory
        #[arg(long, value_name = "DIR")]
        dispersion_dir: Option<PathBuf>,
    },
    /// Run the engine behind the HTTP/WebSocket gateway until interrupted
    Serve {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        render: RenderArgs,
        #[command(flatten)]
        subject: SubjectArgs,
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, default_value_t = 5.0, value_name = "S")]
        window: f64,
        #[arg(long, default_value_t = 60.0, value_name = "S")]
        duration: f64,
        #[arg(long, value_name = "SINK")]
        audio: Option<AudioOut>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
