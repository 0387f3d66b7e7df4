//! Minimal HTTP stub serving the scoring/sampling wire protocol.
//!
//! Built on `std::net` only; intended for tests and local experiments. A
//! [`StubServer`] runs an arbitrary handler on a background thread;
//! [`serve_model`] answers the protocol from any [`LanguageModel`], making it
//! the reference implementation a real service can be checked against.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Serialize;

use crate::lm_client::{LogprobRequest, LogprobResponse, SampleRequest, SampleResponse};
use crate::lm_core::{LanguageModel, TokenSeq};

/// A parsed incoming request.
pub struct StubRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl StubRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json<T: serde::de::DeserializeOwned>(&self) -> Result<T, serde_json::Error> {
        serde_json::from_slice(&self.body)
    }
}

/// Response returned by a handler. `delay` postpones the write, which lets
/// tests exercise client timeouts.
pub struct StubResponse {
    pub status: u16,
    pub body: String,
    pub delay: Option<Duration>,
}

impl StubResponse {
    pub fn json(value: &impl Serialize) -> Self {
        StubResponse {
            status: 200,
            body: serde_json::to_string(value).expect("stub response serializes"),
            delay: None,
        }
    }

    pub fn status(status: u16, body: impl Into<String>) -> Self {
        StubResponse {
            status,
            body: body.into(),
            delay: None,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

/// A one-thread-per-connection HTTP server bound to an ephemeral local port.
pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Start serving `handler` on 127.0.0.1 with an OS-assigned port.
    pub fn spawn<F>(handler: F) -> std::io::Result<StubServer>
    where
        F: Fn(&StubRequest) -> StubResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let handler = Arc::new(handler);
        let thread_hits = hits.clone();
        let thread_shutdown = shutdown.clone();
        let handle = std::thread::spawn(move || {
            while !thread_shutdown.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        thread_hits.fetch_add(1, Ordering::SeqCst);
                        let handler = handler.clone();
                        std::thread::spawn(move || handle_connection(stream, handler.as_ref()));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(2));
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(StubServer {
            addr,
            hits,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Number of connections accepted so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection<F>(mut stream: TcpStream, handler: &F)
where
    F: Fn(&StubRequest) -> StubResponse,
{
    let _ = stream.set_nodelay(true);
    let Some(request) = read_request(&mut stream) else {
        let _ = write_response(&mut stream, 400, "bad request");
        return;
    };
    let response = handler(&request);
    if let Some(delay) = response.delay {
        std::thread::sleep(delay);
    }
    let _ = write_response(&mut stream, response.status, &response.body);
}

fn read_request(stream: &mut TcpStream) -> Option<StubRequest> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_header_end(&buf) {
            break pos;
        }
        if buf.len() > 1 << 20 {
            return None;
        }
    };
    let head = String::from_utf8_lossy(&buf[..header_end]).into_owned();
    let mut lines = head.split("\r\n");
    let request_line = lines.next()?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut headers = Vec::new();
    for line in lines {
        if let Some((k, v)) = line.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let content_length: usize = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let mut body = buf[header_end + 4..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    body.truncate(content_length);
    Some(StubRequest {
        method,
        path,
        headers,
        body,
    })
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn write_response(stream: &mut TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        _ => "Error",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

/// Serve the wire protocol from a backend: `/v1/logprob` answers with the
/// model's log-probability, `/v1/sample` with `n` seeded samples.
pub fn serve_model(model: Arc<dyn LanguageModel>) -> std::io::Result<StubServer> {
    StubServer::spawn(move |request| {
        match (request.method.as_str(), request.path.as_str()) {
            ("POST", "/v1/logprob") => {
                let Ok(body) = request.json::<LogprobRequest>() else {
                    return StubResponse::status(400, "invalid logprob request");
                };
                let (Ok(prefix), Ok(continuation)) = (
                    TokenSeq::from_tokens(body.prefix),
                    TokenSeq::from_tokens(body.continuation),
                ) else {
                    return StubResponse::status(400, "empty token");
                };
                match model.logprob(&prefix, &continuation) {
                    Ok(logprob) => StubResponse::json(&LogprobResponse { logprob }),
                    Err(e) => StubResponse::status(500, e.to_string()),
                }
            }
            ("POST", "/v1/sample") => {
                let Ok(body) = request.json::<SampleRequest>() else {
                    return StubResponse::status(400, "invalid sample request");
                };
                let Ok(prefix) = TokenSeq::from_tokens(body.prefix) else {
                    return StubResponse::status(400, "empty token");
                };
                let stop = body.stop.into_iter().collect();
                match model.sample_n(&prefix, &stop, body.max_tokens, body.n, body.seed) {
                    Ok(samples) => StubResponse::json(&SampleResponse {
                        continuations: samples
                            .into_iter()
                            .map(|s| s.tokens().to_vec())
                            .collect(),
                    }),
                    Err(e) => StubResponse::status(500, e.to_string()),
                }
            }
            _ => StubResponse::status(404, "unknown endpoint"),
        }
    })
}
