//! A minimal in-process HTTP server that imitates a chat-completion endpoint.
//!
//! Used by tests and local dry runs; it understands just enough HTTP/1.1 to
//! read one request per connection.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

#[derive(Clone, Debug)]
pub struct StubRequest {
    pub path: String,
    pub headers: HashMap<String, String>,
    pub body: String,
}

impl StubRequest {
    pub fn json(&self) -> Option<Value> {
        serde_json::from_str(&self.body).ok()
    }

    /// Text part of the user message, if the body has the expected shape.
    pub fn prompt_text(&self) -> Option<String> {
        let v = self.json()?;
        let content = v["messages"].as_array()?.iter().find(|m| m["role"] == "user")?["content"].clone();
        content
            .as_array()?
            .iter()
            .find(|p| p["type"] == "text")?["text"]
            .as_str()
            .map(str::to_string)
    }

    /// Sample id named in the prompt ("sample <id>").
    pub fn sample_id(&self) -> Option<usize> {
        let text = self.prompt_text()?;
        let rest = &text[text.find("sample ")? + 7..];
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        digits.parse().ok()
    }
}

#[derive(Clone, Debug)]
pub struct StubResponse {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl StubResponse {
    /// A 200 chat-completion whose assistant message is `content`.
    pub fn reply(content: &str) -> Self {
        let body = json!({
            "id": "stub",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
        });
        StubResponse {
            status: 200,
            body: body.to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn scores(scores: &[u8]) -> Self {
        let list: Vec<String> = scores.iter().map(u8::to_string).collect();
        Self::reply(&format!("[{}]", list.join(", ")))
    }

    pub fn status(status: u16) -> Self {
        StubResponse {
            status,
            body: json!({"error": {"message": "stub error"}}).to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

type Handler = dyn Fn(&StubRequest) -> StubResponse + Send + Sync;

/// Background server; shuts down when dropped.
pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    hits: Arc<AtomicUsize>,
    thread: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Serves on an ephemeral loopback port.
    pub fn start<F>(handler: F) -> std::io::Result<Self>
    where
        F: Fn(&StubRequest) -> StubResponse + Send + Sync + 'static,
    {
        Self::bind("127.0.0.1:0", handler)
    }

    pub fn bind<F>(addr: &str, handler: F) -> std::io::Result<Self>
    where
        F: Fn(&StubRequest) -> StubResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let hits = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let stop = Arc::clone(&stop);
            let hits = Arc::clone(&hits);
            std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    hits.fetch_add(1, Ordering::SeqCst);
                    let handler = Arc::clone(&handler);
                    std::thread::spawn(move || {
                        let _ = serve(stream, handler.as_ref());
                    });
                }
            })
        };
        Ok(StubServer {
            addr,
            stop,
            hits,
            thread: Some(thread),
        })
    }

    /// Replies with fixed scores per sample id; unknown ids get a 404.
    pub fn with_fixtures(fixtures: HashMap<usize, Vec<u8>>) -> std::io::Result<Self> {
        Self::start(move |req| match req.sample_id().and_then(|id| fixtures.get(&id)) {
            Some(scores) => StubResponse::scores(scores),
            None => StubResponse::status(404),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Number of connections accepted so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(stream: TcpStream, handler: &Handler) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut headers = HashMap::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let len: usize = headers.get("content-length").and_then(|v| v.parse().ok()).unwrap_or(0);
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    let req = StubRequest {
        path,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    let resp = handler(&req);
    if !resp.delay.is_zero() {
        std::thread::sleep(resp.delay);
    }
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        resp.status,
        reason(resp.status),
        resp.body.len(),
        resp.body
    )?;
    stream.flush()?;
    let _ = stream.shutdown(Shutdown::Both);
    Ok(())
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        401 => "Unauthorized",
        403 => "Forbidden",
        404 => "Not Found",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}
