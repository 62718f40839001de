#![allow(dead_code)]

use std::time::{Duration, Instant};
use swaycue_core::ingest::{Pacing, SourceKind};
use swaycue_core::{Condition, Group, SimConfig, SourceConfig, Subject};
use swaycue_gateway::{serve, start, EngineConfig, EngineState, Phase, RunningGateway};

pub struct Harness {
    pub gateway: RunningGateway,
    pub base: String,
    pub http: reqwest::Client,
    pub dir: tempfile::TempDir,
}

pub fn sim_source(pacing: Pacing, seed: u64) -> SourceConfig {
    SourceConfig::new(SourceKind::Sim {
        sim: SimConfig { seed, ..Default::default() },
        condition: Condition::default(),
        limit_s: None,
        pacing,
    })
}

pub async fn launch(source: SourceConfig, tweak: impl FnOnce(&mut EngineConfig)) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = EngineConfig::new(source, dir.path(), Subject::new("s01", Group::Younger));
    tweak(&mut cfg);
    let engine = start(cfg, None).unwrap();
    let gateway = serve("127.0.0.1:0".parse().unwrap(), engine).await.unwrap();
    let base = format!("http://{}", gateway.local_addr());
    Harness { gateway, base, http: reqwest::Client::new(), dir }
}

impl Harness {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}/ws/telemetry", self.gateway.local_addr())
    }

    pub async fn state(&self) -> EngineState {
        self.http.get(self.url("/state")).send().await.unwrap().json().await.unwrap()
    }

    /// Polls `/state` until `done` holds.
    pub async fn wait_for(&self, timeout: Duration, done: impl Fn(&EngineState) -> bool) -> EngineState {
        let start = Instant::now();
        loop {
            let s = self.state().await;
            if done(&s) {
                return s;
            }
            assert!(start.elapsed() < timeout, "timed out waiting; last state {s:?}");
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }

    pub async fn calibrate(&self) -> EngineState {
        let r = self.http.post(self.url("/calibrate")).send().await.unwrap();
        assert_eq!(r.status(), 202);
        self.wait_for(Duration::from_secs(30), |s| s.phase == Phase::Ready).await
    }

    pub async fn start_trial(&self, condition: Condition, abf_on: bool) -> reqwest::Response {
        self.http
            .post(self.url("/trial/start"))
            .json(&serde_json::json!({ "condition": condition, "abf_on": abf_on }))
            .send()
            .await
            .unwrap()
    }
}
