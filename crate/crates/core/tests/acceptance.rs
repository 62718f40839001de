//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};
use swaycue_core::audio::params::{lower_cutoff_hz, map_params};
use swaycue_core::audio::{render_trial, RenderConfig};
use swaycue_core::condition::{Condition, Group, Subject};
use swaycue_core::ingest::{Pacing, SourceConfig, SourceKind};
use swaycue_core::metrics::{median, paired_improvement, PairedImprovement, RegionOccupancy, TrialMetrics};
use swaycue_core::session::{run_protocol, AutoConfirm, ProtocolOptions, TrialStatus, TrialStore};
use swaycue_core::sim::{FeedbackGains, SimConfig};
use swaycue_core::{apply_baseline, classify, Baseline, RawSample, Region, SwayPoint};

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// -------------------------------------------------------------------- 1

/// Region inequalities in exact integer arithmetic on x = i/100, y = j/100.
fn table1_oracle(i: i64, j: i64) -> Region {
    if i <= -200 {
        return Region::E;
    }
    if i >= 200 {
        return Region::F;
    }
    if i * i + j * j <= 100 * 100 {
        return Region::A;
    }
    // ((y − 0.5)/2.25)² + (x/1.5)² ≤ 1, scaled by 225²·150²
    if (j - 50).pow(2) * 150 * 150 + i * i * 225 * 225 <= 225 * 225 * 150 * 150 {
        return Region::B;
    }
    // ((y − 0.5)/3)² + (x/2)² ≤ 1, scaled by 300²·200²
    if (j - 50).pow(2) * 200 * 200 + i * i * 300 * 300 <= 300 * 300 * 200 * 200 {
        return Region::C;
    }
    Region::D
}

fn classifier_grid() -> Result<String, String> {
    let start = Instant::now();
    let mut total = 0u64;
    let mut mismatches = Vec::new();
    for i in -2500i64..=2500 {
        let x = i as f64 / 100.0;
        for j in -2500i64..=2500 {
            let y = j as f64 / 100.0;
            total += 1;
            let got = classify(&SwayPoint::new(0.0, x, y));
            let want = table1_oracle(i, j);
            if got != want && mismatches.len() < 5 {
                mismatches.push(format!("({x}, {y}): {got} vs {want}"));
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(
        mismatches.is_empty() && elapsed < Duration::from_secs(60),
        format!("{total} points, mismatches {mismatches:?}, {:.2} s (limit 60 s)", elapsed.as_secs_f64()),
    )
}

// -------------------------------------------------------------------- 2

fn metrics(range: f64, variance: f64) -> TrialMetrics {
    TrialMetrics { range, variance, n: 1, region_occupancy: RegionOccupancy::from_counts([1, 0, 0, 0, 0, 0], 1) }
}

fn improvement_formula() -> Result<String, String> {
    let p = paired_improvement(&metrics(10.0, 4.0), &metrics(8.0, 3.0)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = metrics(rng.random_range(1e-3..100.0), rng.random_range(1e-6..1e4));
        let q = paired_improvement(&m, &m).map_err(|e| e.to_string())?;
        worst = worst.max(q.p_r.abs()).max(q.p_v.abs());
    }
    ensure(
        (p.p_r - 20.0).abs() <= 1e-12 && (p.p_v - 25.0).abs() <= 1e-12 && worst == 0.0,
        format!("P_R(10→8) = {:.15}, P_V(4→3) = {:.15}, max |P(m,m)| over 1000 = {worst}", p.p_r, p.p_v),
    )
}

// -------------------------------------------------------------------- 3

fn gate_period() -> Result<String, String> {
    let cfg = RenderConfig::default();
    let fs = cfg.sample_rate as f64;
    let mut out = Vec::new();
    let mut ok = true;
    for (x, channel) in [(20.0, 1usize), (-20.0, 0usize)] {
        let frames = render_point(x, 0.0, 2.0, 0.1, &cfg);
        let sig: Vec<f64> = frames.iter().map(|f| f[channel] as f64).collect();
        let period = envelope_period(&sig, fs);
        ok &= (period - 0.064).abs() <= 0.002;
        out.push(format!("x={x}: {:.2} ms", period * 1e3));
    }
    ensure(ok, format!("{} (want 64 ± 2 ms)", out.join(", ")))
}

// -------------------------------------------------------------------- 4

fn cutoff_endpoints() -> Result<String, String> {
    let lo = lower_cutoff_hz(-20.0);
    let hi = lower_cutoff_hz(20.0);
    let steps: Vec<f64> = (0..=400).map(|k| lower_cutoff_hz(-20.0 + k as f64 / 10.0)).collect();
    let monotone = steps.windows(2).all(|w| w[1] > w[0]);
    ensure(
        lo == 256.0 && hi == 4096.0 && monotone,
        format!("f_inf(-20) = {lo}, f_inf(20) = {hi}, strictly increasing over 401 steps: {monotone}"),
    )
}

// -------------------------------------------------------------------- 5

fn spectra() -> Result<String, String> {
    let start = Instant::now();
    let cfg = RenderConfig { rng_seed: 11, ..Default::default() };
    let fs = cfg.sample_rate as f64;
    let mut lines = Vec::new();
    let mut ok = true;

    let a = render_point(0.0, 0.0, 1.0, 0.05, &cfg);
    let (freqs, psd) = stereo_psd(&a, fs);
    let slope = psd_slope_db_per_octave(&freqs, &psd, 100.0, 10_000.0);
    ok &= (slope + 3.0).abs() <= 1.5;
    lines.push(format!("A slope {slope:.2} dB/oct"));

    let cases: [(&str, f64, f64); 9] = [
        ("B", 0.0, 2.5),
        ("C", 1.5, 0.0),
        ("D", 0.0, -3.5),
        ("D", 0.0, -20.0),
        ("D", 0.0, 20.0),
        ("E", -20.0, -20.0),
        ("E", -5.0, 0.0),
        ("F", 20.0, 20.0),
        ("F", 2.0, 0.0),
    ];
    for (label, x, y) in cases {
        let p = map_params(&SwayPoint::new(0.0, x, y));
        if p.region.as_str() != label {
            return Err(format!("({x}, {y}) classified {} not {label}", p.region));
        }
        let frames = render_point(x, y, 1.0, 0.05, &cfg);
        let (freqs, psd) = stereo_psd(&frames, fs);
        let frac = band_energy_fraction(&freqs, &psd, p.band_low, p.band_high);
        ok &= frac >= 0.85;
        lines.push(format!("{label}({x},{y}) [{:.0},{:.0}] {:.1}%", p.band_low, p.band_high, frac * 100.0));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(30);
    ensure(ok, format!("{}; {:.2} s (limit 30 s)", lines.join("; "), elapsed.as_secs_f64()))
}

// -------------------------------------------------------------------- 6

fn volume_ratios() -> Result<String, String> {
    let cfg = RenderConfig { rng_seed: 5, ..Default::default() };
    let rms = |x, y| stereo_rms(&render_point(x, y, 1.0, 0.05, &cfg));
    let a = rms(0.0, 0.0);
    let b = rms(0.0, 2.5) / a;
    let c = rms(1.5, 0.0) / a;
    ensure(
        (b / 1.5 - 1.0).abs() <= 0.10 && (c / 3.0 - 1.0).abs() <= 0.10,
        format!("B/A = {b:.3} (1.5 ± 10%), C/A = {c:.3} (3.0 ± 10%), band-energy correction 1"),
    )
}

// -------------------------------------------------------------------- 7

fn scripted_trial() -> Vec<SwayPoint> {
    // outward spiral crossing every region, then a sweep across x
    (0..1000)
        .map(|k| {
            let t = k as f64 / 50.0;
            if k < 600 {
                let r = 0.02 * k as f64;
                let th = 0.05 * k as f64;
                SwayPoint::new(t, r * th.cos(), r * th.sin())
            } else {
                SwayPoint::new(t, -20.0 + 40.0 * (k - 600) as f64 / 400.0, 0.5)
            }
        })
        .collect()
}

fn determinism() -> Result<String, String> {
    let cfg = RenderConfig { rng_seed: 77, ..Default::default() };
    let pts = scripted_trial();
    let a = render_trial(&pts, &cfg);
    let b = render_trial(&pts, &cfg);
    let same = a.frames.len() == b.frames.len()
        && a.frames.iter().zip(&b.frames).all(|(x, y)| x[0].to_bits() == y[0].to_bits() && x[1].to_bits() == y[1].to_bits());
    let regions: std::collections::BTreeSet<_> = a.timeline.entries.iter().map(|e| e.params.region).collect();
    ensure(
        same && a.timeline == b.timeline && regions.len() == 6,
        format!("{} frames, {} timeline entries, regions visited {}, bit-identical {same}", a.frames.len(), a.timeline.len(), regions.len()),
    )
}

// -------------------------------------------------------------------- 8

fn sim_source(seed: u64, gains: FeedbackGains) -> SourceConfig {
    let sim = SimConfig { seed, feedback_gains: gains, reaction_delay: 0.25, ..Default::default() };
    SourceConfig::new(SourceKind::Sim { sim, condition: Condition::default(), limit_s: None, pacing: Pacing::Fast })
}

fn closed_loop() -> Result<String, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = TrialStore::open(dir.path()).map_err(|e| e.to_string())?;
    let gains = FeedbackGains { low: 0.3, medium: 0.5, high: 0.7 };
    let mut per_condition: BTreeMap<Condition, Vec<PairedImprovement>> = BTreeMap::new();
    for seed in 0..20u64 {
        let subject = Subject::new(format!("sim-{seed}"), Group::Unspecified);
        let out = run_protocol(
            &subject,
            &sim_source(seed, gains),
            &store,
            &ProtocolOptions::default(),
            &mut AutoConfirm,
            &mut |_, _, _| {},
            &AtomicBool::new(false),
        )
        .map_err(|e| e.to_string())?;
        for (c, imp) in out.improvements {
            per_condition.entry(c).or_default().push(imp);
        }
    }
    let mut ok = per_condition.len() == 4;
    let mut lines = Vec::new();
    for (c, imps) in &per_condition {
        let pr = median(&imps.iter().map(|p| p.p_r).collect::<Vec<_>>()).unwrap_or(f64::NAN);
        let pv = median(&imps.iter().map(|p| p.p_v).collect::<Vec<_>>()).unwrap_or(f64::NAN);
        ok &= imps.len() == 20 && pr > 0.0 && pv > 0.0;
        lines.push(format!("{c}: P_R {pr:.1}%, P_V {pv:.1}%"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    ensure(ok, format!("median over 20 seeds: {}; {:.1} s (limit 300 s)", lines.join("; "), elapsed.as_secs_f64()))
}

// -------------------------------------------------------------------- 9

fn realtime_budget() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let baseline = Baseline { x0: 0.4, y0: -0.3, window: 5.0, n_samples: 250 };
    let raws: Vec<RawSample> = (0..100_000)
        .map(|k| RawSample { t: k as f64 / 50.0, pitch: rng.random_range(-25.0..25.0), roll: rng.random_range(-25.0..25.0) })
        .collect();
    let mut ns: Vec<u64> = Vec::with_capacity(raws.len());
    for r in &raws {
        let t0 = Instant::now();
        let p = apply_baseline(r, &baseline);
        let params = map_params(&p);
        std::hint::black_box(params);
        ns.push(t0.elapsed().as_nanos() as u64);
    }
    ns.sort_unstable();
    let p99 = ns[ns.len() * 99 / 100];

    let cfg = RenderConfig::default();
    let pts: Vec<SwayPoint> = {
        let mut x: f64 = 0.0;
        let mut y: f64 = 0.0;
        (0..3000)
            .map(|k| {
                x = 0.98 * x + rng.random_range(-0.5..0.5);
                y = 0.98 * y + rng.random_range(-0.5..0.5);
                SwayPoint::new(k as f64 / 50.0, x, y)
            })
            .collect()
    };
    let t0 = Instant::now();
    let rendered = render_trial(&pts, &cfg);
    let elapsed = t0.elapsed().as_secs_f64();
    let audio_s = rendered.frames.len() as f64 / cfg.sample_rate as f64;
    let speed = audio_s / elapsed;
    ensure(
        p99 < 100_000 && speed >= 10.0,
        format!("control path p99 {:.2} µs (limit 100 µs); render {audio_s:.0} s audio in {elapsed:.2} s = {speed:.1}× real time (min 10×)", p99 as f64 / 1e3),
    )
}

// -------------------------------------------------------------------- 10

fn protocol_cardinality() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = TrialStore::open(dir.path()).map_err(|e| e.to_string())?;
    let subject = Subject::new("subject-01", Group::Older);
    let out = run_protocol(
        &subject,
        &sim_source(42, FeedbackGains::default()),
        &store,
        &ProtocolOptions::default(),
        &mut AutoConfirm,
        &mut |_, _, _| {},
        &AtomicBool::new(false),
    )
    .map_err(|e| e.to_string())?;
    let loaded = store.load("subject-01").map_err(|e| e.to_string())?;
    let sizes: Vec<usize> = out.records.iter().map(|r| r.samples.len()).collect();
    let all_complete = out.records.iter().all(|r| r.status == TrialStatus::Complete);
    let recompute = loaded.iter().all(|r| r.recompute_metrics().ok() == r.metrics);
    let mut stored_sorted = loaded.clone();
    stored_sorted.sort_by_key(|r| r.id);
    let mut run_sorted = out.records.clone();
    run_sorted.sort_by_key(|r| r.id);
    ensure(
        out.records.len() == 8 && sizes.iter().all(|n| *n == 3000) && all_complete && stored_sorted == run_sorted && recompute,
        format!(
            "{} trials, sample counts {:?}, round-trip equal {}, metrics recompute exact {recompute}",
            out.records.len(),
            sizes,
            stored_sorted == run_sorted
        ),
    )
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("classifier matches exact-arithmetic grid oracle", classifier_grid),
        ("P_R/P_V formula exactness", improvement_formula),
        ("gate envelope period at |x| = 20", gate_period),
        ("f_inf endpoints and monotonicity", cutoff_endpoints),
        ("spectral slope and in-band energy", spectra),
        ("volume ratios B/A and C/A", volume_ratios),
        ("bit-identical offline renders", determinism),
        ("closed-loop improvement over 20 seeds", closed_loop),
        ("real-time budget", realtime_budget),
        ("protocol cardinality and persistence", protocol_cardinality),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
