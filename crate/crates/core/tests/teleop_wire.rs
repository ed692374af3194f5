use std::collections::BTreeSet;

use serde_json::Value;
use uwbnav_core::eval::{compute_metrics, EvalConfig};
use uwbnav_core::sim::load_scenario;
use uwbnav_core::teleop::*;
use uwbnav_core::uwb::RangingNoiseModel;

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/teleop-wire.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn noisy_session() -> Session {
    let scenario = load_scenario(
        "name = \"wire\"\n[map]\nmin = [-1.0, -1.5]\nmax = [3.0, 1.5]\nboundary_walls = true\nwalls = [[1.5, 0.8, 1.5, 1.5]]\n[start]\nx = 0.0\ny = 0.0\n[goals]\npoints = [[0.6, 0.0], [1.0, 0.0]]\n",
    )
    .unwrap();
    let cfg = EvalConfig {
        noise: RangingNoiseModel { sigma: 0.1, ..Default::default() },
        ..Default::default()
    };
    Session::new("wire", scenario, cfg, 5).unwrap()
}

/// Runs a scripted session and returns every frame the server emitted plus
/// the frames the client sent.
fn transcript() -> (Vec<WireMessage>, Vec<WireMessage>, Session) {
    let mut s = noisy_session();
    let client = vec![
        WireMessage::Hello(Hello { protocol: PROTOCOL_VERSION, role: Role::Driver, name: Some("script".into()), session: None, limits: None }),
        WireMessage::Command(CommandFrame { v: 1.5, omega: 0.0 }),
    ];
    s.connect(1);
    s.connect(2);
    let mut server = Vec::new();
    for m in &client {
        server.extend(s.handle(1, m.clone()).into_iter().map(|o| o.msg));
    }
    server.extend(s.handle(2, WireMessage::Hello(Hello { protocol: PROTOCOL_VERSION, role: Role::Driver, name: None, session: None, limits: None })).into_iter().map(|o| o.msg));
    server.extend(s.receive(2, r#"{"type":"command","v":1,"omega":0}"#).into_iter().map(|o| o.msg));
    for _ in 0..200 {
        server.extend(s.tick().into_iter().map(|o| o.msg));
    }
    (server, client, s)
}

fn keys(v: &Value, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                out.insert(k.clone());
                keys(v, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|v| keys(v, out)),
        _ => {}
    }
}

#[test]
fn every_frame_matches_the_published_schema() {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let (server, client, _) = transcript();
    let mut seen = BTreeSet::new();
    for m in server.iter().chain(&client) {
        let v: Value = serde_json::from_str(&m.to_json()).unwrap();
        seen.insert(v["type"].as_str().unwrap().to_string());
        let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{v}: {errors:?}");
    }
    let all: BTreeSet<String> = ["hello", "state", "command", "event", "result", "error"].iter().map(|s| s.to_string()).collect();
    assert_eq!(seen, all);
}

#[test]
fn schema_rejects_foreign_frames() {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let (server, _, _) = transcript();
    let state = server.iter().find(|m| matches!(m, WireMessage::State(_))).unwrap();
    let mut v: Value = serde_json::from_str(&state.to_json()).unwrap();
    assert!(validator.is_valid(&v));
    v["true_pose"] = serde_json::json!({"x": 0.0, "y": 0.0, "theta": 0.0});
    assert!(!validator.is_valid(&v));
    assert!(!validator.is_valid(&serde_json::json!({"type": "command", "v": 1.0})));
    assert!(!validator.is_valid(&serde_json::json!({"type": "hello", "protocol": 2, "role": "driver"})));
}

#[test]
fn state_frames_never_expose_truth_or_map() {
    let schema = schema();
    let state = &schema["$defs"]["state"];
    assert_eq!(state["additionalProperties"], Value::Bool(false));
    let mut props: Vec<&str> = state["properties"].as_object().unwrap().keys().map(String::as_str).collect();
    props.sort();
    assert_eq!(
        props,
        ["command", "est_pose", "goal_bearing", "goal_distance", "sectors", "seq", "t", "type", "waypoint", "waypoints"]
    );
    for def in ["est_pose", "command"] {
        assert_eq!(state["properties"][def]["additionalProperties"], Value::Bool(false));
    }

    let (server, _, session) = transcript();
    let forbidden = ["pose", "true_pose", "map", "walls", "segments", "obstacles", "bounds", "anchors", "goal", "goals"];
    let mut state_frames = Vec::new();
    for m in &server {
        let v: Value = serde_json::from_str(&m.to_json()).unwrap();
        let mut k = BTreeSet::new();
        keys(&v, &mut k);
        for f in forbidden {
            assert!(!k.contains(f), "{f} leaked in {v}");
        }
        if let WireMessage::State(s) = m {
            state_frames.push(s.clone());
        }
    }
    // With noisy ranging the broadcast pose is the estimate, not the truth.
    let log = session.log().unwrap();
    let mut differing = 0;
    for f in &state_frames {
        let sample = log.samples.iter().find(|s| (s.t - f.t).abs() < 1e-9).unwrap();
        assert_eq!([f.est_pose.x, f.est_pose.y], [sample.est_pose[0], sample.est_pose[1]]);
        if (f.est_pose.x - sample.pose[0]).hypot(f.est_pose.y - sample.pose[1]) > 1e-6 {
            differing += 1;
        }
    }
    assert!(differing * 2 > state_frames.len());
}

#[test]
fn scripted_session_feeds_metrics() {
    let (server, _, session) = transcript();
    let result = server.iter().find_map(|m| match m {
        WireMessage::Result(r) => Some(*r),
        _ => None,
    });
    assert_eq!(result.unwrap().outcome, Outcome::Goal);
    assert!(server.iter().any(|m| matches!(m, WireMessage::Event(EventFrame { kind: uwbnav_core::eval::EventKind::WaypointAdvanced, .. }))));
    let log = session.log().unwrap();
    assert!(log.planner.starts_with("human:"));
    let m = compute_metrics(std::slice::from_ref(log)).unwrap();
    assert_eq!(m.success_rate, 1.0);
}
