//! Config file plus command-line overrides.

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use swaycue_core::audio::live::{NullSink, Paced, RawPcmSink};
use swaycue_core::audio::{AudioSink, RenderConfig};
use swaycue_core::ingest::{Pacing, ReplayTiming, DEFAULT_SOURCE_TIMEOUT_S};
use swaycue_core::sim::FeedbackGains;
use swaycue_core::{Condition, DropoutPolicy, SimConfig, SourceConfig, SourceKind};

/// Contents of `--config FILE`. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub sim: SimConfig,
    pub render: RenderConfig,
    /// Used when no source flag is given. A `sim` source takes its
    /// parameters from `[sim]`.
    pub source: Option<SourceConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn parse_gains(s: &str) -> Result<FeedbackGains, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [low, medium, high] => Ok(FeedbackGains { low, medium, high }),
        _ => Err(format!("expected three comma-separated gains, got {}", v.len())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DropoutArg {
    HoldLast,
    Interpolate,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    /// Replay a CSV of t_s,pitch_deg,roll_deg
    #[arg(long, value_name = "CSV", conflicts_with_all = ["listen", "sim"])]
    pub replay: Option<PathBuf>,
    /// Receive 20-byte sensor datagrams on this UDP address
    #[arg(long, value_name = "ADDR", conflicts_with = "sim")]
    pub listen: Option<SocketAddr>,
    /// Use the simulated subject (the default when no source is configured)
    #[arg(long)]
    pub sim: bool,
    /// Simulator seed
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Simulator feedback gains for low, medium and high warnings
    #[arg(long, value_name = "LOW,MED,HIGH", value_parser = parse_gains)]
    pub gains: Option<FeedbackGains>,
    /// Deliver replayed or simulated samples at their own pace
    #[arg(long, conflicts_with = "fast")]
    pub realtime: bool,
    /// Deliver replayed or simulated samples as fast as they are consumed
    #[arg(long)]
    pub fast: bool,
    /// Ignore replay timestamps and space rows at the sample rate
    #[arg(long, requires = "replay")]
    pub reclock: bool,
    /// Sway sample rate in Hz
    #[arg(long, value_name = "HZ")]
    pub rate: Option<f64>,
    /// How gaps in the stream are filled
    #[arg(long, value_enum)]
    pub dropout: Option<DropoutArg>,
    /// Seconds of UDP silence before the source counts as lost
    #[arg(long, value_name = "S", requires = "listen")]
    pub timeout: Option<f64>,
}

impl SourceArgs {
    pub fn build(&self, file: &FileConfig) -> Result<SourceConfig> {
        let mut sim = file.sim;
        if let Some(s) = self.seed {
            sim.seed = s;
        }
        if let Some(g) = self.gains {
            sim.feedback_gains = g;
        }
        if let Some(r) = self.rate {
            sim.sample_rate = r;
        }
        let pacing = if self.realtime {
            Some(Pacing::Realtime)
        } else if self.fast {
            Some(Pacing::Fast)
        } else {
            None
        };

        let mut cfg = if let Some(path) = &self.replay {
            let timing = if self.reclock { ReplayTiming::Reclock } else { ReplayTiming::Original };
            SourceConfig::new(SourceKind::Replay { path: path.clone(), timing, pacing: pacing.unwrap_or_default() })
        } else if let Some(bind) = self.listen {
            SourceConfig::new(SourceKind::Udp { bind, timeout_s: self.timeout.unwrap_or(DEFAULT_SOURCE_TIMEOUT_S) })
        } else if self.sim || file.source.is_none() {
            let mut c = SourceConfig::new(SourceKind::Sim {
                sim,
                condition: Condition::default(),
                limit_s: None,
                pacing: pacing.unwrap_or_default(),
            });
            c.sample_rate = sim.sample_rate;
            c
        } else {
            let mut c = file.source.clone().unwrap_or_else(|| unreachable!());
            match &mut c.kind {
                SourceKind::Sim { sim: s, pacing: p, .. } => {
                    *s = sim;
                    if let Some(pc) = pacing {
                        *p = pc;
                    }
                }
                SourceKind::Replay { pacing: p, .. } => {
                    if let Some(pc) = pacing {
                        *p = pc;
                    }
                }
                SourceKind::Udp { .. } => {}
            }
            c
        };
        if (self.seed.is_some() || self.gains.is_some()) && !matches!(cfg.kind, SourceKind::Sim { .. }) {
            bail!("--seed and --gains apply only to the simulated source");
        }
        if let Some(r) = self.rate {
            cfg.sample_rate = r;
        }
        if let Some(d) = self.dropout {
            cfg.dropout_policy = match d {
                DropoutArg::HoldLast => DropoutPolicy::HoldLast,
                DropoutArg::Interpolate => DropoutPolicy::Interpolate,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RenderArgs {
    /// Audio sample rate in Hz
    #[arg(long, value_name = "HZ")]
    pub sample_rate: Option<u32>,
    /// Frames per render block
    #[arg(long, value_name = "FRAMES")]
    pub block_size: Option<usize>,
    /// Reference volume of the safety noise, in (0, 1]
    #[arg(long, value_name = "V")]
    pub volume: Option<f64>,
    /// Region-change crossfade in seconds
    #[arg(long, value_name = "S")]
    pub crossfade: Option<f64>,
    /// Noise generator seed
    #[arg(long, value_name = "N")]
    pub render_seed: Option<u64>,
}

impl RenderArgs {
    pub fn build(&self, file: &FileConfig) -> Result<RenderConfig> {
        let mut r = file.render;
        if let Some(v) = self.sample_rate {
            r.sample_rate = v;
        }
        if let Some(v) = self.block_size {
            r.block_size = v;
        }
        if let Some(v) = self.volume {
            r.reference_volume = v;
        }
        if let Some(v) = self.crossfade {
            r.crossfade = v;
        }
        if let Some(v) = self.render_seed {
            r.rng_seed = v;
        }
        r.validate()?;
        Ok(r)
    }
}

/// Where live audio goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AudioOut {
    Null,
    /// Raw interleaved s16le on stdout.
    Stdout,
    File(PathBuf),
}

impl std::str::FromStr for AudioOut {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "null" => Ok(AudioOut::Null),
            "-" => Ok(AudioOut::Stdout),
            "" => Err("empty audio target".into()),
            path => Ok(AudioOut::File(path.into())),
        }
    }
}

impl AudioOut {
    /// A sink paced at the audio rate.
    pub fn open(&self, sample_rate: u32) -> Result<Box<dyn AudioSink>> {
        fn paced<S: AudioSink + 'static>(s: S, sr: u32) -> Box<dyn AudioSink> {
            Box::new(Paced::new(s, sr))
        }
        Ok(match self {
            AudioOut::Null => paced(NullSink, sample_rate),
            AudioOut::Stdout => paced(RawPcmSink::new(std::io::stdout()), sample_rate),
            AudioOut::File(p) => {
                let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
                paced(RawPcmSink::new(std::io::BufWriter::new(f)), sample_rate)
            }
        })
    }
}

/// Results go to stdout unless stdout carries audio.
pub fn report_writer(audio: Option<&AudioOut>) -> Box<dyn Write> {
    if audio == Some(&AudioOut::Stdout) {
        Box::new(std::io::stderr())
    } else {
        Box::new(std::io::stdout())
    }
}
