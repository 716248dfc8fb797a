//! Line-protocol client for third-party detectors, run either as a child
//! process (one JSON object per line on stdin/stdout) or behind HTTP POST.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{DetectError, Detection, FaceDetector};
use crate::imaging::{encode_png, BoundingBox, Image};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

const MAX_RESPONSE_BYTES: u64 = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Endpoint {
    Process {
        command: String,
        #[serde(default)]
        args: Vec<String>,
    },
    Http {
        url: String,
    },
}

/// How the image travels in a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageTransport {
    #[default]
    PngBase64,
    /// PNG written to a temporary file shared with the detector.
    Path,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub endpoint: Endpoint,
    #[serde(default)]
    pub transport: ImageTransport,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    /// Maximum requests in flight; 1 serializes all calls.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

fn default_timeout_secs() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

fn default_concurrency() -> usize {
    1
}

impl ExternalConfig {
    pub fn new(endpoint: Endpoint) -> Self {
        ExternalConfig { endpoint, transport: ImageTransport::default(), timeout_secs: default_timeout_secs(), concurrency: 1 }
    }

    /// Parses a command line (`cmd arg...`) or an `http://` URL.
    pub fn from_descriptor(descriptor: &str) -> Result<Self, DetectError> {
        let d = descriptor.trim();
        if d.starts_with("http://") || d.starts_with("https://") {
            return Ok(Self::new(Endpoint::Http { url: d.to_string() }));
        }
        let mut parts = d.split_whitespace().map(str::to_string);
        let command = parts.next().ok_or_else(|| DetectError::InvalidConfig("empty detector command".into()))?;
        Ok(Self::new(Endpoint::Process { command, args: parts.collect() }))
    }

    pub fn timeout(&self) -> Result<Duration, DetectError> {
        Duration::try_from_secs_f64(self.timeout_secs)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| DetectError::InvalidConfig(format!("timeout must be positive, got {}", self.timeout_secs)))
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_png_base64: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_path: Option<String>,
}

#[derive(Deserialize)]
struct Response {
    id: String,
    boxes: Vec<BoundingBox>,
}

struct ProcessWorker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl ProcessWorker {
    fn spawn(command: &str, args: &[String]) -> Result<Self, DetectError> {
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| DetectError::Spawn(format!("{command}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(ProcessWorker { child, stdin, lines: rx })
    }

    fn call(&mut self, request: &str, id: &str, timeout: Duration) -> Result<Response, DetectError> {
        let sent = self.stdin.write_all(request.as_bytes()).and_then(|_| self.stdin.write_all(b"\n")).and_then(|_| self.stdin.flush());
        if let Err(e) = sent {
            return Err(DetectError::Connect(format!("detector process is gone: {e}")));
        }
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return parse_response(&line, id),
                Ok(Err(e)) => return Err(DetectError::Protocol(format!("unreadable output: {e}"))),
                Err(RecvTimeoutError::Timeout) => return Err(DetectError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(DetectError::Protocol("detector closed its output without replying".into()))
                }
            }
        }
    }
}

impl Drop for ProcessWorker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn parse_response(body: &str, id: &str) -> Result<Response, DetectError> {
    let resp: Response =
        serde_json::from_str(body.trim()).map_err(|e| DetectError::Protocol(format!("malformed response: {e}")))?;
    if resp.id != id {
        return Err(DetectError::Protocol(format!("response id {:?} does not match request {id:?}", resp.id)));
    }
    if let Some(b) = resp.boxes.iter().find(|b| b.validate().is_err() || !b.w.is_finite() || !b.h.is_finite()) {
        return Err(DetectError::Protocol(format!("invalid box {} {} {} {}", b.x, b.y, b.w, b.h)));
    }
    Ok(resp)
}

enum Slot {
    Process(Option<ProcessWorker>),
    Http,
}

/// Detector backed by an external process or HTTP service.
pub struct ExternalDetector {
    config: ExternalConfig,
    timeout: Duration,
    agent: Option<ureq::Agent>,
    slots: Vec<Mutex<Slot>>,
    next_slot: AtomicUsize,
    next_id: AtomicU64,
}

impl std::fmt::Debug for ExternalDetector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalDetector").field("config", &self.config).finish_non_exhaustive()
    }
}

/// Temporary image file removed on drop.
struct TempImage(PathBuf);

impl Drop for TempImage {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

impl ExternalDetector {
    /// Validates the config; process detectors are started lazily on first use.
    pub fn new(config: ExternalConfig) -> Result<Self, DetectError> {
        let timeout = config.timeout()?;
        if config.concurrency == 0 {
            return Err(DetectError::InvalidConfig("concurrency must be at least 1".into()));
        }
        let agent = match &config.endpoint {
            Endpoint::Http { .. } => Some(
                ureq::Agent::config_builder()
                    .timeout_global(Some(timeout))
                    .http_status_as_error(false)
                    .build()
                    .into(),
            ),
            Endpoint::Process { command, .. } if command.is_empty() => {
                return Err(DetectError::InvalidConfig("empty detector command".into()))
            }
            Endpoint::Process { .. } => None,
        };
        let slots = (0..config.concurrency)
            .map(|_| {
                Mutex::new(match config.endpoint {
                    Endpoint::Process { .. } => Slot::Process(None),
                    Endpoint::Http { .. } => Slot::Http,
                })
            })
            .collect();
        Ok(ExternalDetector { config, timeout, agent, slots, next_slot: AtomicUsize::new(0), next_id: AtomicU64::new(0) })
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    fn request(&self, img: &Image, id: &str) -> Result<(String, Option<TempImage>), DetectError> {
        let png = encode_png(img).map_err(|e| DetectError::Image(e.to_string()))?;
        let (b64, temp) = match self.config.transport {
            ImageTransport::PngBase64 => (Some(base64::engine::general_purpose::STANDARD.encode(&png)), None),
            ImageTransport::Path => {
                let path = std::env::temp_dir().join(format!("faceveil-{}-{id}.png", std::process::id()));
                std::fs::write(&path, &png).map_err(|e| DetectError::Image(format!("{}: {e}", path.display())))?;
                (None, Some(TempImage(path)))
            }
        };
        let req = Request { id, image_png_base64: b64, image_path: temp.as_ref().map(|t| t.0.display().to_string()) };
        Ok((serde_json::to_string(&req).expect("request serializes"), temp))
    }

    fn call_http(&self, url: &str, body: &str, id: &str) -> Result<Response, DetectError> {
        let agent = self.agent.as_ref().expect("http agent");
        let mut resp = agent.post(url).header("content-type", "application/json").send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => DetectError::Timeout(self.timeout),
            other => DetectError::Connect(format!("{url}: {other}")),
        })?;
        let status = resp.status();
        let text = resp.body_mut().with_config().limit(MAX_RESPONSE_BYTES).read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => DetectError::Timeout(self.timeout),
            other => DetectError::Protocol(format!("unreadable response body: {other}")),
        })?;
        if !status.is_success() {
            return Err(DetectError::Protocol(format!("HTTP status {}", status.as_u16())));
        }
        parse_response(&text, id)
    }
}

impl FaceDetector for ExternalDetector {
    fn id(&self) -> String {
        match &self.config.endpoint {
            Endpoint::Process { command, .. } => format!("external:process:{command}"),
            Endpoint::Http { url } => format!("external:http:{url}"),
        }
    }

    fn detect(&self, img: &Image) -> Result<Vec<Detection>, DetectError> {
        let id = format!("req-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let (body, _temp) = self.request(img, &id)?;
        let slot = &self.slots[self.next_slot.fetch_add(1, Ordering::Relaxed) % self.slots.len()];
        let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
        let resp = match (&mut *guard, &self.config.endpoint) {
            (Slot::Process(worker), Endpoint::Process { command, args }) => {
                if worker.is_none() {
                    *worker = Some(ProcessWorker::spawn(command, args)?);
                }
                let result = worker.as_mut().expect("worker just started").call(&body, &id, self.timeout);
                if result.is_err() {
                    // The stream state is unknown after a failure; start afresh next time.
                    *worker = None;
                }
                result?
            }
            (Slot::Http, Endpoint::Http { url }) => self.call_http(url, &body, &id)?,
            _ => unreachable!("slot kind follows the endpoint"),
        };
        let (w, h) = (img.width() as f64, img.height() as f64);
        Ok(resp.boxes.into_iter().filter_map(|b| b.clip(w, h)).map(|bbox| Detection { bbox, support: 1 }).collect())
    }
}
