use std::net::UdpSocket;
use std::time::{Duration, Instant};
use swaycue_core::ingest::{
    open_source, write_csv, Datagram, IngestError, Pacing, ReplayTiming, SampleSource, SourceConfig, SourceKind,
};
use swaycue_core::RawSample;

fn drain(src: &mut dyn SampleSource) -> Vec<RawSample> {
    let mut out = Vec::new();
    while let Some(s) = src.next_sample() {
        out.push(s.unwrap());
    }
    out
}

fn replay_cfg(path: &std::path::Path, pacing: Pacing) -> SourceConfig {
    SourceConfig::new(SourceKind::Replay { path: path.into(), timing: ReplayTiming::Original, pacing })
}

#[test]
fn replay_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("walk.csv");
    let samples: Vec<RawSample> =
        (0..300).map(|i| RawSample { t: i as f64 / 50.0, pitch: (i as f64 * 0.1).sin(), roll: 0.5 }).collect();
    write_csv(std::fs::File::create(&path).unwrap(), &samples).unwrap();
    let cfg = replay_cfg(&path, Pacing::Fast);
    let a = drain(&mut *open_source(&cfg).unwrap());
    let b = drain(&mut *open_source(&cfg).unwrap());
    assert_eq!(a, samples);
    assert_eq!(a, b);
}

#[test]
fn realtime_replay_takes_wall_clock_time() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    std::fs::write(&path, "t_s,pitch_deg,roll_deg\n0,0,0\n0.1,1,1\n0.2,2,2\n").unwrap();
    let start = Instant::now();
    let got = drain(&mut *open_source(&replay_cfg(&path, Pacing::Realtime)).unwrap());
    assert_eq!(got.len(), 3);
    assert!(start.elapsed() >= Duration::from_millis(190));
}

#[test]
fn malformed_replay_fails_at_open() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "t_s,pitch_deg,roll_deg\n0,0,0\n0.02,1\n").unwrap();
    match open_source(&replay_cfg(&path, Pacing::Fast)) {
        Err(IngestError::MalformedRecord { index, .. }) => assert_eq!(index, 3),
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("opened a malformed file"),
    }
}

#[test]
fn udp_stream_through_queue() {
    let probe = UdpSocket::bind("127.0.0.1:0").unwrap();
    let addr = probe.local_addr().unwrap();
    drop(probe);
    let cfg = SourceConfig::new(SourceKind::Udp { bind: addr, timeout_s: 0.5 });
    let mut src = open_source(&cfg).unwrap();
    let tx = UdpSocket::bind("127.0.0.1:0").unwrap();
    for seq in 0..10u32 {
        let d = Datagram { seq, timestamp_micros: 5_000_000 + seq as u64 * 20_000, pitch: seq as f32, roll: 0.0 };
        tx.send_to(&d.encode(), addr).unwrap();
        if seq == 4 {
            tx.send_to(&[1, 2, 3], addr).unwrap();
        }
    }
    let mut got = Vec::new();
    while got.len() < 10 {
        got.push(src.next_sample().unwrap().unwrap());
    }
    assert_eq!(got[9].t, 0.18);
    assert_eq!(got[3].pitch, 3.0);
    // nothing more arrives: the queue reports a timeout
    assert!(matches!(src.next_sample(), Some(Err(IngestError::Timeout { .. }))));
    assert_eq!(src.stats().corrupt, 1);
}

#[test]
fn udp_port_in_use_is_unavailable() {
    let held = UdpSocket::bind("127.0.0.1:0").unwrap();
    let cfg = SourceConfig::new(SourceKind::Udp { bind: held.local_addr().unwrap(), timeout_s: 1.0 });
    assert!(matches!(open_source(&cfg), Err(IngestError::SourceUnavailable { .. })));
}

#[test]
fn source_config_json_shape() {
    let cfg = SourceConfig::new(SourceKind::Udp { bind: "127.0.0.1:9000".parse().unwrap(), timeout_s: 2.0 });
    let v = serde_json::to_value(&cfg).unwrap();
    assert_eq!(v["kind"], "udp");
    assert_eq!(v["sample_rate"], 50.0);
    assert_eq!(v["dropout_policy"], "hold_last");
    let back: SourceConfig = serde_json::from_value(v).unwrap();
    assert_eq!(back, cfg);
    let minimal: SourceConfig = serde_json::from_str(r#"{"kind":"sim"}"#).unwrap();
    assert!(matches!(minimal.kind, SourceKind::Sim { limit_s: None, .. }));
}
