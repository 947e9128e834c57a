//! HTTP transport behind a trait, so probing runs offline against stubs.

use std::collections::HashMap;
use std::io::Read;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use url::Url;

/// Response bodies are truncated to this many bytes.
pub const BODY_CAP: u64 = 2 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub location: Option<String>,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Dns(String),
    Other(String),
}

/// One GET without following redirects.
pub trait HttpClient: Send + Sync {
    fn get(&self, url: &Url, timeout: Duration) -> Result<HttpResponse, TransportError>;
}

impl<T: HttpClient + ?Sized> HttpClient for Arc<T> {
    fn get(&self, url: &Url, timeout: Duration) -> Result<HttpResponse, TransportError> {
        (**self).get(url, timeout)
    }
}

impl<T: HttpClient + ?Sized> HttpClient for &T {
    fn get(&self, url: &Url, timeout: Duration) -> Result<HttpResponse, TransportError> {
        (**self).get(url, timeout)
    }
}

/// Live client over `ureq`, redirects disabled so hops are counted here.
#[derive(Debug, Default, Clone)]
pub struct UreqClient;

fn read_body(resp: ureq::Response) -> Result<Vec<u8>, TransportError> {
    let mut body = Vec::new();
    resp.into_reader()
        .take(BODY_CAP)
        .read_to_end(&mut body)
        .map_err(|e| io_error(&e))?;
    Ok(body)
}

fn io_error(e: &std::io::Error) -> TransportError {
    match e.kind() {
        std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock => TransportError::Timeout,
        _ => TransportError::Other(e.to_string()),
    }
}

impl HttpClient for UreqClient {
    fn get(&self, url: &Url, timeout: Duration) -> Result<HttpResponse, TransportError> {
        let agent = ureq::AgentBuilder::new().redirects(0).timeout(timeout).build();
        let resp = match agent.request_url("GET", url).call() {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                return Err(match t.kind() {
                    ureq::ErrorKind::Dns => TransportError::Dns(msg),
                    _ if msg.contains("timed out") || msg.contains("Timeout") => TransportError::Timeout,
                    ureq::ErrorKind::Io => match std::error::Error::source(&t)
                        .and_then(|s| s.downcast_ref::<std::io::Error>())
                    {
                        Some(io) => io_error(io),
                        None => TransportError::Other(msg),
                    },
                    _ => TransportError::Other(msg),
                });
            }
        };
        let status = resp.status();
        let location = resp.header("location").map(str::to_string);
        Ok(HttpResponse {
            status,
            location,
            body: read_body(resp)?,
        })
    }
}

#[derive(Debug, Clone)]
pub enum StubReply {
    Respond { status: u16, location: Option<String>, body: String },
    /// Answers after `delay`; times out if the caller's budget is shorter.
    Delayed { delay: Duration, status: u16, body: String },
    Dns,
}

impl StubReply {
    pub fn ok(body: impl Into<String>) -> StubReply {
        StubReply::Respond { status: 200, location: None, body: body.into() }
    }
    pub fn status(status: u16) -> StubReply {
        StubReply::Respond { status, location: None, body: String::new() }
    }
    pub fn redirect(status: u16, to: impl Into<String>) -> StubReply {
        StubReply::Respond { status, location: Some(to.into()), body: String::new() }
    }
}

/// Scripted in-memory client; unknown URLs answer 404. Records every
/// request with its start time.
#[derive(Debug, Default)]
pub struct StubClient {
    routes: HashMap<String, StubReply>,
    log: Mutex<Vec<(String, Instant)>>,
    in_flight: Mutex<(usize, usize)>,
}

impl StubClient {
    pub fn new() -> StubClient {
        StubClient::default()
    }

    pub fn route(mut self, url: &str, reply: StubReply) -> StubClient {
        let key = Url::parse(url).map(|u| u.to_string()).unwrap_or_else(|_| url.to_string());
        self.routes.insert(key, reply);
        self
    }

    pub fn requests(&self) -> Vec<(String, Instant)> {
        self.log.lock().unwrap().clone()
    }

    /// Highest number of simultaneous requests observed.
    pub fn max_in_flight(&self) -> usize {
        self.in_flight.lock().unwrap().1
    }
}

impl HttpClient for StubClient {
    fn get(&self, url: &Url, timeout: Duration) -> Result<HttpResponse, TransportError> {
        self.log.lock().unwrap().push((url.to_string(), Instant::now()));
        {
            let mut f = self.in_flight.lock().unwrap();
            f.0 += 1;
            f.1 = f.1.max(f.0);
        }
        let result = match self.routes.get(url.as_str()) {
            None => Ok(HttpResponse { status: 404, location: None, body: Vec::new() }),
            Some(StubReply::Dns) => Err(TransportError::Dns(format!("cannot resolve {}", url.host_str().unwrap_or("")))),
            Some(StubReply::Respond { status, location, body }) => Ok(HttpResponse {
                status: *status,
                location: location.clone(),
                body: body.as_bytes().to_vec(),
            }),
            Some(StubReply::Delayed { delay, status, body }) => {
                if *delay > timeout {
                    std::thread::sleep(timeout);
                    Err(TransportError::Timeout)
                } else {
                    std::thread::sleep(*delay);
                    Ok(HttpResponse { status: *status, location: None, body: body.as_bytes().to_vec() })
                }
            }
        };
        self.in_flight.lock().unwrap().0 -= 1;
        result
    }
}

/// Per-host request spacing: successive requests to one host start at
/// least `delay` apart.
#[derive(Debug)]
pub struct HostLimiter {
    delay: Duration,
    next_slot: Mutex<HashMap<String, Instant>>,
}

impl HostLimiter {
    pub fn new(delay: Duration) -> HostLimiter {
        HostLimiter { delay, next_slot: Mutex::new(HashMap::new()) }
    }

    /// Blocks until the host's next slot and claims it.
    pub fn wait(&self, url: &Url) {
        let host = url.host_str().unwrap_or_default().to_ascii_lowercase();
        let start = {
            let mut slots = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let start = slots.get(&host).copied().filter(|t| *t > now).unwrap_or(now);
            slots.insert(host, start + self.delay);
            start
        };
        let wait = start.saturating_duration_since(Instant::now());
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}
