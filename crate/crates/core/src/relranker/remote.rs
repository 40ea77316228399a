//! Chat-completion scoring client with bounded retries.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine as _;
use regex::Regex;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::imageio::{png_bytes, upscale};
use crate::kv::KvDoc;
use crate::numcore::{Matrix, Rng};
use crate::relranker::prompt::{build_prompt, sample_descriptor, SYSTEM_PROMPT};
use crate::relranker::{ScoreRecord, MAX_SCORE};

/// Remote images are upscaled so the model sees a legible picture.
pub const REMOTE_UPSCALE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    Mock,
    Remote,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub max_retries: u32,
    pub timeout: Duration,
    pub backoff: Duration,
    pub max_parallel: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            kind: PredictorKind::Mock,
            endpoint: None,
            model: None,
            api_key_env: None,
            max_retries: 3,
            timeout: Duration::from_secs(30),
            backoff: Duration::from_millis(200),
            max_parallel: 4,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl PredictorConfig {
    pub fn mock(noise: f64, seed: u64) -> Self {
        PredictorConfig {
            noise,
            seed,
            ..Self::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        PredictorConfig {
            kind: PredictorKind::Remote,
            endpoint: Some(endpoint.into()),
            model: Some(model.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise {} outside [0, 1]", self.noise)));
        }
        if self.max_parallel == 0 {
            return Err(Error::Config("max_parallel must be at least 1".into()));
        }
        if self.kind == PredictorKind::Remote && (self.endpoint.is_none() || self.model.is_none()) {
            return Err(Error::Config("remote predictor needs endpoint and model".into()));
        }
        Ok(())
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let d = Self::default();
        let kind = match doc.get("predictor").unwrap_or("mock") {
            "mock" => PredictorKind::Mock,
            "remote" => PredictorKind::Remote,
            other => return Err(Error::Config(format!("unknown predictor {other:?}"))),
        };
        let cfg = PredictorConfig {
            kind,
            endpoint: doc.get("endpoint").map(str::to_string),
            model: doc.get("model").map(str::to_string),
            api_key_env: doc.get("api_key_env").map(str::to_string),
            max_retries: doc.parse_or("max_retries", d.max_retries)?,
            timeout: Duration::from_millis(doc.parse_or("timeout_ms", d.timeout.as_millis() as u64)?),
            backoff: Duration::from_millis(doc.parse_or("backoff_ms", d.backoff.as_millis() as u64)?),
            max_parallel: doc.parse_or("max_parallel", d.max_parallel)?,
            noise: doc.parse_or("noise", d.noise)?,
            seed: doc.parse_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Upper bound on the wall time of one scored sample.
    pub fn request_budget(&self) -> Duration {
        self.timeout * (self.max_retries + 1)
    }
}

/// First bracketed list of exactly `n` integers in `0..=5` found anywhere in `reply`.
pub fn parse_reply(reply: &str, n: usize) -> Option<Vec<u8>> {
    static LIST: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = LIST.get_or_init(|| Regex::new(r"\[([^\[\]]*)\]").expect("static regex"));
    re.captures_iter(reply).find_map(|cap| {
        let parts: Vec<&str> = cap[1].split(',').map(str::trim).collect();
        if parts.len() != n {
            return None;
        }
        let values: Option<Vec<u8>> = parts.iter().map(|p| p.parse::<u8>().ok()).collect();
        values.filter(|v| v.iter().all(|&s| s <= MAX_SCORE))
    })
}

pub fn image_data_url(image: &Matrix) -> Result<String> {
    let png = png_bytes(&upscale(image, REMOTE_UPSCALE))?;
    Ok(format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(png)
    ))
}

pub fn request_body(model: &str, prompt: &str, image_url: &str) -> Value {
    json!({
        "model": model,
        "temperature": 0,
        "messages": [
            {"role": "system", "content": SYSTEM_PROMPT},
            {"role": "user", "content": [
                {"type": "text", "text": prompt},
                {"type": "image_url", "image_url": {"url": image_url}}
            ]}
        ]
    })
}

fn reply_text(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v["choices"][0]["message"]["content"].as_str().map(str::to_string)
}

enum Attempt {
    Scored(Vec<u8>),
    Retry(String),
    Unparsable(String),
}

/// Scores images against a chat-completion endpoint.
pub struct RemoteScorer {
    cfg: PredictorConfig,
    names: Vec<String>,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl RemoteScorer {
    pub fn new(cfg: &PredictorConfig, names: &[String]) -> Result<Self> {
        cfg.validate()?;
        if cfg.kind != PredictorKind::Remote {
            return Err(Error::Config("remote scorer built from a mock config".into()));
        }
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| Error::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteScorer {
            cfg: cfg.clone(),
            names: names.to_vec(),
            agent,
            api_key,
        })
    }

    fn attempt(&self, body: &str, timeout: Duration, sample_id: usize) -> Result<Attempt> {
        let endpoint = self.cfg.endpoint.as_deref().expect("validated");
        let mut req = self
            .agent
            .post(endpoint)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .content_type("application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(format!("request failed: {e}"))),
        };
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(Error::Credential { status });
        }
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(format!("reading body failed: {e}"))),
        };
        if status >= 500 || status == 429 {
            return Ok(Attempt::Retry(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Error::Transport {
                sample_id,
                detail: format!("HTTP {status}: {text}"),
            });
        }
        let Some(reply) = reply_text(&text) else {
            return Ok(Attempt::Unparsable(text));
        };
        Ok(match parse_reply(&reply, self.names.len()) {
            Some(scores) => Attempt::Scored(scores),
            None => Attempt::Unparsable(reply),
        })
    }

    /// Scores one image; never exceeds [`PredictorConfig::request_budget`].
    pub fn score(&self, sample_id: usize, image: &Matrix) -> Result<ScoreRecord> {
        // Client timeouts fire a little late, so keep a margin inside the budget.
        let budget = self.cfg.request_budget();
        let deadline = Instant::now() + budget - (budget / 20).min(Duration::from_millis(100));
        let prompt = build_prompt(&self.names, &sample_descriptor(sample_id, image.rows()));
        let body = request_body(
            self.cfg.model.as_deref().expect("validated"),
            &prompt,
            &image_data_url(image)?,
        )
        .to_string();
        let mut jitter = Rng::derived(self.cfg.seed, sample_id as u64);
        let mut last_unparsable: Option<String> = None;
        let mut last_transport = String::from("no attempt completed");

        for attempt in 0..=self.cfg.max_retries {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                break;
            }
            match self.attempt(&body, self.cfg.timeout.min(remaining), sample_id)? {
                Attempt::Scored(scores) => return ScoreRecord::new(sample_id, scores),
                Attempt::Retry(why) => {
                    log::warn!("sample {sample_id}: attempt {} failed: {why}", attempt + 1);
                    last_transport = why;
                    last_unparsable = None;
                }
                Attempt::Unparsable(reply) => {
                    log::warn!("sample {sample_id}: attempt {} gave an unparsable reply", attempt + 1);
                    last_unparsable = Some(reply);
                }
            }
            if attempt < self.cfg.max_retries {
                let base = self.cfg.backoff.as_secs_f64() * 2f64.powi(attempt as i32);
                let wait = Duration::from_secs_f64(base * (0.5 + jitter.uniform()));
                std::thread::sleep(wait.min(deadline.saturating_duration_since(Instant::now())));
            }
        }
        Err(match last_unparsable {
            Some(reply) => Error::ScoringParse { sample_id, reply },
            None => Error::Transport {
                sample_id,
                detail: last_transport,
            },
        })
    }

    /// Scores many images with at most `max_parallel` requests in flight.
    /// Results come back ordered by sample id; the lowest failing id wins on error.
    pub fn score_all(&self, items: &[(usize, &Matrix)]) -> Result<Vec<ScoreRecord>> {
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<(usize, Result<ScoreRecord>)>> = Mutex::new(Vec::with_capacity(items.len()));
        let workers = self.cfg.max_parallel.min(items.len()).max(1);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&(id, image)) = items.get(k) else {
                        break;
                    };
                    let r = self.score(id, image);
                    results.lock().expect("results lock").push((id, r));
                });
            }
        });
        let mut results = results.into_inner().expect("results lock");
        results.sort_by_key(|(id, _)| *id);
        results.into_iter().map(|(_, r)| r).collect()
    }
}
