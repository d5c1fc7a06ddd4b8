//! Streams a run into the HTTP ingestion service event by event, closes the
//! session, and checks the online score against offline detection.
//!
//! Run with: cargo run --example stream_service

use std::sync::Arc;

use agentsight::detector::{train_detector, DetectorConfig, DetectorKind};
use agentsight::event::serialize_event;
use agentsight::service::{serve, ServiceConfig, ServiceState};
use agentsight::sim::{generate_run, inject_failure, FailureClass, FailureSpec, SimConfig};

#[tokio::main]
async fn main() {
    let sim = SimConfig::default();
    let train: Vec<_> = (0..16).map(|i| generate_run(&sim, i).expect("run")).collect();
    let mut val = Vec::new();
    for i in 0..10 {
        let run = generate_run(&sim, 200 + i).expect("run");
        if i % 2 == 0 {
            val.push(run);
        } else {
            let spec = FailureSpec {
                class: FailureClass::DpiExhaustion,
                target_agent: 1,
                intensity: 1.0,
            };
            val.push(inject_failure(&run, &spec, sim.rng_seed).expect("inject"));
        }
    }
    let mut config = DetectorConfig::desk(DetectorKind::Epi);
    config.epi.hidden_dim = 16;
    config.epi.latent_dim = 8;
    config.epi.epochs = 10;
    let detector = Arc::new(train_detector(&config, &train, &val).expect("training"));

    let alerts = std::env::temp_dir().join("agentsight_service_example_alerts.jsonl");
    let _ = std::fs::remove_file(&alerts);
    let state = Arc::new(ServiceState::new(
        Some(detector.clone()),
        ServiceConfig { alerts_path: Some(alerts.clone()), bearer_token: None },
    ));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
    let addr = listener.local_addr().expect("addr");
    tokio::spawn(serve(listener, state));
    println!("service listening on {addr}");

    let spec =
        FailureSpec { class: FailureClass::DpiExhaustion, target_agent: 2, intensity: 1.0 };
    let run = inject_failure(&generate_run(&sim, 999).expect("run"), &spec, sim.rng_seed)
        .expect("inject");

    let client = reqwest::Client::new();
    let base = format!("http://{addr}");
    for event in &run.events {
        let response = client
            .post(format!("{base}/v1/events"))
            .body(serialize_event(event))
            .send()
            .await
            .expect("send");
        assert!(response.status().is_success(), "ingest failed: {}", response.status());
    }
    println!("streamed {} events for {}", run.events.len(), run.run_id);

    let close: serde_json::Value = client
        .post(format!("{base}/v1/runs/{}/close", run.run_id))
        .send()
        .await
        .expect("close")
        .json()
        .await
        .expect("json");
    println!(
        "close -> verdict {}, score {:.6}, latency {:.2} ms",
        close["verdict"], close["score"], close["latency_ms"]
    );

    let offline = detector.score_run(&run).expect("offline score");
    assert_eq!(
        close["score"].as_f64().unwrap().to_bits(),
        offline.value.to_bits(),
        "online and offline scores must match bit for bit"
    );
    println!("online score equals offline score bit-for-bit");

    let alert_lines = std::fs::read_to_string(&alerts).unwrap_or_default();
    println!("alerts.jsonl: {}", alert_lines.trim());
}
