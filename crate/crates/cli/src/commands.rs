use crate::config::{report_writer, AudioOut, FileConfig};
use crate::{Cli, Command, ReportFormat, SubjectArgs};
use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use swaycue_core::audio::wav::write_wav;
use swaycue_core::audio::{render_trial, Control, LiveRenderer, RenderConfig};
use swaycue_core::dispersion::dispersion_export;
use swaycue_core::ingest::{load_csv, ReplayTiming, DEFAULT_SAMPLE_RATE};
use swaycue_core::metrics::GroupReport;
use swaycue_core::session::{
    calibrate_source, load_jsonl, protocol_complete, report_from_records, run_trial, Operator, ProtocolOptions,
    SampleEvent, SessionError, TrialOrder, TrialSpec,
};
use swaycue_core::{
    apply_baseline, open_source, run_protocol, Baseline, Condition, Subject, SwayPoint, TrialRecord, TrialStatus,
    TrialStore,
};
use swaycue_gateway::api::TrialSummary;

pub fn run(cli: Cli) -> Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Calibrate { source, window, out } => {
            let cfg = source.build(&file)?;
            let mut src = open_source(&cfg)?;
            let b = calibrate_source(&mut *src, &cfg, window, &mut |_| {})?;
            let json = serde_json::to_string_pretty(&b)?;
            if let Some(path) = out {
                std::fs::write(&path, &json).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Trial {
            source,
            render,
            subject,
            store,
            eyes,
            surface,
            abf,
            baseline,
            window,
            duration,
            timeline,
            audio,
        } => {
            let cfg = source.build(&file)?.with_condition(Condition::new(eyes, surface));
            let render = render.build(&file)?;
            let store = TrialStore::open(&store.store)?;
            let baseline = match baseline {
                Some(path) => read_json::<Baseline>(&path)?,
                None => {
                    eprintln!("calibrating for {window} s");
                    calibrate_source(&mut *open_source(&cfg)?, &cfg, window, &mut |_| {})?
                }
            };
            let spec = TrialSpec {
                duration_s: duration,
                reference_volume: render.reference_volume,
                audio_sample_rate: render.sample_rate,
                ..TrialSpec::new(subject_of(&subject), Condition::new(eyes, surface), abf)
            };
            let renderer = live_renderer(audio.as_ref(), render)?;
            let abort = interrupt_flag();
            let mut src = open_source(&cfg)?;
            let result = run_trial(&mut *src, &cfg, Some(&baseline), &spec, &mut feed(renderer.as_ref()), &abort);
            stop_renderer(renderer)?;
            let (run, lost) = match result {
                Ok(run) => (run, None),
                Err(SessionError::SourceLost { partial, cause }) => (*partial, Some(cause)),
                Err(e) => return Err(e.into()),
            };
            store.append(&run.record)?;
            if let Some(path) = timeline {
                write_json(&path, &run.timeline)?;
            }
            let mut out = report_writer(audio.as_ref());
            writeln!(out, "{}", serde_json::to_string_pretty(&TrialSummary::from(&run.record))?)?;
            if let Some(cause) = lost {
                eprintln!("source lost: {cause}; partial trial stored as incomplete");
                return Ok(ExitCode::from(1));
            }
            Ok(if run.record.status == TrialStatus::Complete { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Protocol {
            source,
            render,
            subject,
            store,
            shuffle_seed,
            recalibrate_per_condition,
            yes,
            window,
            duration,
            audio,
            json,
        } => {
            let cfg = source.build(&file)?;
            let render = render.build(&file)?;
            let store = TrialStore::open(&store.store)?;
            let subject = subject_of(&subject);
            let opts = ProtocolOptions {
                order: shuffle_seed.map_or(TrialOrder::Fixed, |seed| TrialOrder::Shuffled { seed }),
                duration_s: duration,
                calibration_window_s: window,
                reference_volume: render.reference_volume,
                audio_sample_rate: render.sample_rate,
                recalibrate_per_condition,
            };
            let renderer = live_renderer(audio.as_ref(), render)?;
            let abort = interrupt_flag();
            let mut operator = StdinOperator { auto: yes, renderer: renderer.as_ref() };
            let mut observe = feed(renderer.as_ref());
            let outcome = run_protocol(
                &subject,
                &cfg,
                &store,
                &opts,
                &mut operator,
                &mut |_, _, ev| observe(ev),
                &abort,
            );
            drop((operator, observe));
            stop_renderer(renderer)?;
            let outcome = outcome?;
            let mut out = report_writer(audio.as_ref());
            let complete = outcome.records.len() == swaycue_core::session::PROTOCOL_TRIALS;
            if json {
                #[derive(Serialize)]
                struct Row {
                    condition: Condition,
                    p_r: f64,
                    p_v: f64,
                }
                let rows: Vec<Row> = Condition::ALL
                    .iter()
                    .filter_map(|c| outcome.improvements.get(c).map(|p| Row { condition: *c, p_r: p.p_r, p_v: p.p_v }))
                    .collect();
                let trials: Vec<TrialSummary> = outcome.records.iter().map(TrialSummary::from).collect();
                let v = serde_json::json!({
                    "subject_id": subject.id,
                    "complete": complete,
                    "newly_run": outcome.newly_run,
                    "trials": trials,
                    "improvements": rows,
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
            } else {
                writeln!(out, "subject {}: {} new trial(s), {} of 8 stored", subject.id, outcome.newly_run, outcome.records.len())?;
                for r in &outcome.records {
                    writeln!(out, "  {}  {:<13} abf {:<3}  {}", r.id, r.condition.to_string(), on_off(r.abf_on), status(r))?;
                }
                if !outcome.improvements.is_empty() {
                    writeln!(out, "{:<14} {:>9} {:>9}", "condition", "P_R %", "P_V %")?;
                    for (c, p) in Condition::ALL.iter().filter_map(|c| Some((c, outcome.improvements.get(c)?))) {
                        writeln!(out, "{:<14} {:>9.2} {:>9.2}", c.to_string(), p.p_r, p.p_v)?;
                    }
                }
            }
            Ok(if complete { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Report { store, format, out } => {
            let records = TrialStore::open(&store.store)?.load_all()?;
            let report = report_from_records(&records)?;
            let text = format_report(&report, format)?;
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Render { csv, trial, store, render, out, wav_format, timeline } => {
            let cfg = render.build(&file)?;
            let points: Vec<SwayPoint> = match (csv, trial) {
                (Some(path), _) => load_csv(&path, ReplayTiming::Original, DEFAULT_SAMPLE_RATE)?
                    .iter()
                    .map(|s| apply_baseline(s, &Baseline::zero()))
                    .collect(),
                (None, Some(id)) => {
                    TrialStore::open(&store.store)?.find(id)?.ok_or_else(|| anyhow!("no trial {id} in store"))?.samples
                }
                (None, None) => bail!("give --csv or --trial"),
            };
            let rendered = render_trial(&points, &cfg);
            write_wav(&out, &rendered.frames, rendered.sample_rate, wav_format)
                .with_context(|| format!("writing {}", out.display()))?;
            let tl_path = timeline.unwrap_or_else(|| default_timeline_path(&out));
            write_json(&tl_path, &rendered.timeline)?;
            let v = serde_json::json!({
                "wav": out,
                "timeline": tl_path,
                "sample_rate": rendered.sample_rate,
                "frames": rendered.frames.len(),
                "seconds": rendered.frames.len() as f64 / rendered.sample_rate as f64,
                "timeline_entries": rendered.timeline.len(),
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { inputs, format, dispersion_dir } => analyze(&inputs, format, dispersion_dir.as_deref()),
        Command::Serve { source, render, subject, store, window, duration, audio } => {
            if cli.headless {
                bail!("`serve` needs the gateway; drop --headless");
            }
            let mut cfg = swaycue_gateway::EngineConfig::new(source.build(&file)?, store.store, subject_of(&subject));
            cfg.render = render.build(&file)?;
            cfg.calibration_window_s = window;
            cfg.trial_duration_s = duration;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let sink = audio.as_ref().map(|a| a.open(cfg.render.sample_rate)).transpose()?;
                let engine = swaycue_gateway::start(cfg, sink)?;
                let gateway = swaycue_gateway::serve(cli.http, engine).await?;
                eprintln!("gateway listening on http://{}", gateway.local_addr());
                tokio::signal::ctrl_c().await?;
                eprintln!("shutting down");
                gateway.shutdown().await?;
                Ok::<_, anyhow::Error>(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn subject_of(s: &SubjectArgs) -> Subject {
    Subject::new(s.subject.clone(), s.group)
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn status(r: &TrialRecord) -> String {
    match &r.metrics {
        Some(m) => format!("{:?}  R {:.3}  V {:.4}", r.status, m.range, m.variance),
        None => format!("{:?}", r.status),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
    Ok(())
}

fn default_timeline_path(wav: &Path) -> PathBuf {
    let mut s = wav.with_extension("").into_os_string();
    s.push(".timeline.json");
    s.into()
}

fn format_report(report: &GroupReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Table => report.to_table(),
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => serde_json::to_string_pretty(report)? + "\n",
    })
}

/// Set on Ctrl-C so a running trial ends as aborted and is still stored.
fn interrupt_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    let spawned = std::thread::Builder::new().name("swaycue-signal".into()).spawn(move || {
        let Ok(rt) = tokio::runtime::Builder::new_current_thread().enable_io().build() else { return };
        if rt.block_on(tokio::signal::ctrl_c()).is_ok() {
            eprintln!("interrupted; finishing the current trial as aborted");
            f.store(true, Ordering::Release);
        }
    });
    if let Err(e) = spawned {
        log::warn!("Ctrl-C handling unavailable: {e}");
    }
    flag
}

fn live_renderer(audio: Option<&AudioOut>, cfg: RenderConfig) -> Result<Option<LiveRenderer>> {
    audio.map(|a| Ok(LiveRenderer::spawn(cfg, a.open(cfg.sample_rate)?)?)).transpose()
}

fn stop_renderer(r: Option<LiveRenderer>) -> Result<()> {
    if let Some(r) = r {
        r.send(Control::Mute);
        r.stop().context("audio output")?;
    }
    Ok(())
}

fn feed(renderer: Option<&LiveRenderer>) -> impl FnMut(&SampleEvent) + '_ {
    move |ev| {
        if let (Some(r), Some(p)) = (renderer, ev.params) {
            r.send(Control::Params(*p));
        }
    }
}

struct StdinOperator<'a> {
    auto: bool,
    renderer: Option<&'a LiveRenderer>,
}

impl Operator for StdinOperator<'_> {
    fn confirm(&mut self, condition: Condition, abf_on: bool) -> bool {
        if let Some(r) = self.renderer {
            r.send(Control::Mute);
        }
        eprintln!("next trial: {condition}, feedback {}", on_off(abf_on));
        if self.auto {
            return true;
        }
        eprint!("set up the subject, then press Enter (q to stop): ");
        let _ = std::io::stderr().flush();
        let mut line = String::new();
        match std::io::stdin().lock().read_line(&mut line) {
            Ok(0) | Err(_) => false,
            Ok(_) => !line.trim().eq_ignore_ascii_case("q"),
        }
    }
}

#[derive(Debug, Serialize)]
struct Checked {
    #[serde(flatten)]
    summary: TrialSummary,
    recomputed_matches: bool,
}

fn load_inputs(inputs: &[PathBuf]) -> Result<Vec<TrialRecord>> {
    let mut records = Vec::new();
    for path in inputs {
        if path.is_dir() {
            records.extend(TrialStore::open(path)?.load_all()?);
        } else {
            records.extend(load_jsonl(path)?);
        }
    }
    Ok(records)
}

fn analyze(inputs: &[PathBuf], format: ReportFormat, dispersion_dir: Option<&Path>) -> Result<ExitCode> {
    let records = load_inputs(inputs)?;
    let checked: Vec<Checked> = records
        .iter()
        .map(|r| Checked {
            summary: TrialSummary::from(r),
            recomputed_matches: match (&r.metrics, r.recompute_metrics()) {
                (Some(m), Ok(re)) => *m == re,
                (None, Err(_)) => r.samples.is_empty(),
                _ => false,
            },
        })
        .collect();
    if let Some(dir) = dispersion_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for r in &records {
            write_json(&dir.join(format!("{}.json", r.id)), &dispersion_export(&r.samples))?;
        }
    }
    let report = report_from_records(&records);
    let mismatches = checked.iter().filter(|c| !c.recomputed_matches).count();
    match format {
        ReportFormat::Json => {
            let v = serde_json::json!({
                "trials": checked,
                "mismatches": mismatches,
                "report": report.as_ref().ok(),
                "report_error": report.as_ref().err().map(|e| e.to_string()),
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        ReportFormat::Table | ReportFormat::Csv => {
            let csv = format == ReportFormat::Csv;
            if csv {
                println!("id,subject_id,condition,abf_on,status,n_samples,range,variance,recomputed_matches");
            }
            for c in &checked {
                let s = &c.summary;
                let (r, v) = s.metrics.map_or((f64::NAN, f64::NAN), |m| (m.range, m.variance));
                if csv {
                    println!(
                        "{},{},{},{},{:?},{},{r},{v},{}",
                        s.id, s.subject_id, s.condition, s.abf_on, s.status, s.n_samples, c.recomputed_matches
                    );
                } else {
                    println!(
                        "{}  {:<10} {:<13} abf {:<3} {:<10} n {:>5}  R {r:>8.3}  V {v:>9.4}  {}",
                        s.id,
                        s.subject_id,
                        s.condition.to_string(),
                        on_off(s.abf_on),
                        format!("{:?}", s.status),
                        s.n_samples,
                        if c.recomputed_matches { "ok" } else { "MISMATCH" }
                    );
                }
            }
            if !csv {
                let subjects: std::collections::BTreeSet<&str> = records.iter().map(|r| r.subject_id.as_str()).collect();
                for s in subjects {
                    let own: Vec<TrialRecord> = records.iter().filter(|r| r.subject_id == s).cloned().collect();
                    println!("{s}: protocol {}", if protocol_complete(&own) { "complete" } else { "incomplete" });
                }
                match &report {
                    Ok(rep) => print!("{}", rep.to_table()),
                    Err(e) => println!("report unavailable: {e}"),
                }
            }
        }
    }
    if mismatches > 0 {
        eprintln!("{mismatches} trial(s) do not match their recomputed metrics");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
