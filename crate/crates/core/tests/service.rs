use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use faceveil::detector::{BuiltinDetector, DetectorConfig};
use faceveil::imaging::{decode_png, encode_png, load_image};
use faceveil::service::{serve_on, AppState, ServiceConfig};
use proptest::prelude::*;
use serde_json::{json, Value};

fn asset(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets").join(rel)
}

fn start(config: ServiceConfig) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let det = Arc::new(BuiltinDetector::bundled(DetectorConfig::default()).unwrap());
            serve_on(listener, AppState::new(det, config)).await.unwrap();
        });
    });
    rx.recv_timeout(Duration::from_secs(10)).unwrap()
}

fn shared() -> SocketAddr {
    static ADDR: OnceLock<SocketAddr> = OnceLock::new();
    *ADDR.get_or_init(|| start(ServiceConfig::default()))
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(Duration::from_secs(60))).build().into()
}

fn call(addr: SocketAddr, method: &str, path: &str, body: Option<&[u8]>) -> (u16, Value) {
    let url = format!("http://{addr}{path}");
    let a = agent();
    let resp = match (method, body) {
        ("GET", _) => a.get(&url).call(),
        ("POST", b) => a.post(&url).header("content-type", "application/json").send(b.unwrap_or(b"")),
        ("PUT", b) => a.put(&url).send(b.unwrap_or(b"")),
        ("DELETE", _) => a.delete(&url).call(),
        _ => unreachable!(),
    };
    let mut resp = resp.unwrap();
    let status = resp.status().as_u16();
    let text = resp.body_mut().with_config().limit(64 << 20).read_to_string().unwrap();
    let value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("non-JSON body for {method} {path} ({status}): {e}: {text:?}"));
    (status, value)
}

fn post(addr: SocketAddr, path: &str, body: &Value) -> (u16, Value) {
    call(addr, "POST", path, Some(body.to_string().as_bytes()))
}

fn face_png() -> String {
    let img = load_image(asset("minicorpus/images/face_01.png")).unwrap();
    BASE64.encode(encode_png(&img).unwrap())
}

fn new_session(addr: SocketAddr) -> (String, Value) {
    let (status, v) = post(addr, "/session", &json!({"image": face_png()}));
    assert_eq!(status, 201, "{v}");
    (v["session_id"].as_str().unwrap().to_string(), v)
}

#[test]
fn filters_lists_eleven_kinds() {
    let (status, v) = call(shared(), "GET", "/filters", None);
    assert_eq!(status, 200);
    let kinds = v.as_array().unwrap();
    assert_eq!(kinds.len(), 11);
    for k in kinds {
        assert!(k["kind"].is_string() && k["params"].is_array() && k.get("default_grid").is_some());
        assert!(k.get("table1_reference_accuracy").is_some());
    }
}

#[test]
fn session_flow() {
    let addr = shared();
    let (id, created) = new_session(addr);
    assert_eq!(created["initial_detections"].as_array().unwrap().len(), 1);
    assert!(created["width"].as_u64().unwrap() > 0);

    let (status, v) = post(addr, &format!("/session/{id}/evade"), &json!({"filter_spec": {"kind": "identity"}}));
    assert_eq!(status, 200, "{v}");
    assert_eq!(v["evaded"], false);
    assert!(!v["detections"].as_array().unwrap().is_empty());
    assert!(v["psnr_db"].is_null());
    let out = decode_png(&BASE64.decode(v["image"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(out, load_image(asset("minicorpus/images/face_01.png")).unwrap());

    let (status, v) = post(addr, &format!("/session/{id}/context"), &json!({"eye_left": [46.19, 43.255], "eye_right": [70.39, 41.975]}));
    assert_eq!(status, 200, "{v}");
    assert!((v["iod"].as_f64().unwrap() - 24.2338).abs() < 1e-3, "{v}");

    let censor = json!({"filter_spec": {"kind": "censor", "params": {"thickness": 0.5, "color": "white"}}});
    let (status, v) = post(addr, &format!("/session/{id}/evade"), &censor);
    assert_eq!(status, 200, "{v}");
    assert_eq!(v["evaded"], true);
    assert_eq!(v["detections"], json!([]));
    assert!((v["psnr_db"].as_f64().unwrap() - 17.5307).abs() < 1e-3, "{v}");

    let (status, v) = post(addr, &format!("/session/{id}/evade"), &json!({"filter_spec": {"kind": "rotation", "params": {"degrees": 30}}}));
    assert_eq!(status, 200, "{v}");
    assert!(v["psnr_db"].is_null(), "dimensions change under rotation");

    let (status, v) = post(addr, &format!("/session/{id}/evade"), &json!({"filter_spec": {"kind": "blur", "params": {"sigma": -1}}}));
    assert_eq!((status, v["error"]["code"].as_str()), (422, Some("invalid_filter")));

    let (status, h) = call(addr, "GET", &format!("/session/{id}/history"), None);
    assert_eq!(status, 200);
    let h = h.as_array().unwrap();
    assert_eq!(h.len(), 3, "history counts successful evades only");
    let attempts: Vec<u64> = h.iter().map(|a| a["attempt"].as_u64().unwrap()).collect();
    assert_eq!(attempts, [1, 2, 3]);
    assert_eq!(h[1]["filter_spec"]["kind"], "censor");
}

#[test]
fn context_rejects_coincident_eyes() {
    let addr = shared();
    let (id, _) = new_session(addr);
    let (status, v) = post(addr, &format!("/session/{id}/context"), &json!({"eye_left": [40, 40], "eye_right": [40, 40]}));
    assert_eq!(status, 422);
    assert_eq!(v["error"]["code"], "invalid_context");
}

#[test]
fn faceless_images_need_context_for_region_filters() {
    let addr = shared();
    let blank = faceveil::imaging::Image::filled(64, 64, 3, 200).unwrap();
    let (status, v) = post(addr, "/session", &json!({"image": BASE64.encode(encode_png(&blank).unwrap())}));
    assert_eq!(status, 201);
    assert!(v["context_source"].is_null());
    let id = v["session_id"].as_str().unwrap();
    let (status, v) = post(addr, &format!("/session/{id}/evade"), &json!({"filter_spec": {"kind": "censor"}}));
    assert_eq!((status, v["error"]["code"].as_str()), (422, Some("context_required")));
    let (status, v) = post(addr, &format!("/session/{id}/evade"), &json!({"filter_spec": {"kind": "noise", "params": {"sigma": 5}}}));
    assert_eq!((status, &v["evaded"]), (200, &json!(true)));
}

#[test]
fn structured_errors() {
    let addr = shared();
    let cases: Vec<(&str, &str, Option<&[u8]>, u16)> = vec![
        ("GET", "/session/nope/history", None, 404),
        ("POST", "/session/nope/evade", Some(br#"{"filter_spec": {"kind": "identity"}}"#), 404),
        ("POST", "/session", Some(b"{"), 400),
        ("POST", "/session", Some(br#"{"image": "%%%"}"#), 400),
        ("POST", "/session", Some(br#"{"image": "aGVsbG8="}"#), 422),
        ("POST", "/session", Some(br#"{"image": 1, "x": 2}"#), 400),
        ("GET", "/nowhere", None, 404),
        ("DELETE", "/filters", None, 405),
        ("PUT", "/session", Some(b"{}"), 405),
    ];
    for (method, path, body, want) in cases {
        let (status, v) = call(addr, method, path, body);
        assert_eq!(status, want, "{method} {path}: {v}");
        assert!(v["error"]["code"].is_string() && v["error"]["message"].is_string(), "{v}");
    }
}

#[test]
fn oversized_bodies_get_413() {
    let addr = start(ServiceConfig { body_limit: 1024, ..Default::default() });
    let body = json!({"image": "A".repeat(4096)}).to_string();
    let (status, v) = call(addr, "POST", "/session", Some(body.as_bytes()));
    assert_eq!(status, 413);
    assert_eq!(v["error"]["code"], "payload_too_large");
    assert_eq!(ServiceConfig::default().body_limit, 20 * 1024 * 1024);
}

#[test]
fn sessions_are_bounded() {
    let addr = start(ServiceConfig { max_sessions: 2, ..Default::default() });
    let (first, _) = new_session(addr);
    new_session(addr);
    new_session(addr);
    let (status, _) = call(addr, "GET", &format!("/session/{first}/history"), None);
    assert_eq!(status, 404);
}

#[test]
fn idle_sessions_expire() {
    let addr = start(ServiceConfig { idle_timeout: Duration::from_millis(200), ..Default::default() });
    let (id, _) = new_session(addr);
    assert_eq!(call(addr, "GET", &format!("/session/{id}/history"), None).0, 200);
    std::thread::sleep(Duration::from_millis(600));
    assert_eq!(call(addr, "GET", &format!("/session/{id}/history"), None).0, 404);
}

fn endpoint() -> impl Strategy<Value = (&'static str, &'static str)> {
    prop_oneof![
        Just(("POST", "/session")),
        Just(("POST", "/session/{id}/context")),
        Just(("POST", "/session/{id}/evade")),
        Just(("GET", "/session/{id}/history")),
        Just(("GET", "/filters")),
    ]
}

fn junk_json() -> impl Strategy<Value = Vec<u8>> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i32>().prop_map(Value::from),
        (-1e6f64..1e6).prop_map(Value::from),
        "[a-z_]{0,8}".prop_map(Value::from),
    ];
    let value = leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
            proptest::collection::btree_map(
                prop_oneof![Just("image".to_string()), Just("filter_spec".to_string()), Just("kind".to_string()), Just("eye_left".to_string()), "[a-z]{1,6}"],
                inner,
                0..4
            )
            .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    });
    prop_oneof![value.prop_map(|v| v.to_string().into_bytes()), proptest::collection::vec(any::<u8>(), 0..64)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn fuzzed_requests_get_json(ep in endpoint(), body in junk_json(), real_session in any::<bool>()) {
        static SESSION: OnceLock<String> = OnceLock::new();
        let addr = shared();
        let id = if real_session { SESSION.get_or_init(|| new_session(addr).0).clone() } else { "x".into() };
        let path = ep.1.replace("{id}", &id);
        let (status, v) = call(addr, ep.0, &path, Some(&body));
        prop_assert!(status != 500, "{} {} -> {}", ep.0, path, v);
        if status >= 400 {
            prop_assert!(v["error"]["code"].is_string(), "{}", v);
        }
    }
}
