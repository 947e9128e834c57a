//! Policy-link accessibility and language-variant discovery.

pub mod client;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

pub use client::{HostLimiter, HttpClient, HttpResponse, StubClient, StubReply, TransportError, UreqClient};

use crate::policy::html::{looks_like_html, strip_html};
use crate::policy::{segment, Language, MIN_POLICY_WORDS};

pub const MAX_REDIRECTS: u32 = 5;
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const DEFAULT_CONCURRENCY: usize = 8;
pub const DEFAULT_HOST_DELAY_MS: u64 = 500;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProbeError {
    #[error("invalid url {url:?}: {reason}")]
    InvalidUrl { url: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkStatus {
    Ok,
    Code404,
    Code400,
    Code500,
    Code503,
    Code410,
    /// Any other final status, including redirect loops and exhausted hops.
    OtherCode(u16),
    Timeout,
    DnsFailure,
}

impl LinkStatus {
    pub fn from_code(code: u16) -> LinkStatus {
        match code {
            200..=299 => LinkStatus::Ok,
            404 => LinkStatus::Code404,
            400 => LinkStatus::Code400,
            500 => LinkStatus::Code500,
            503 => LinkStatus::Code503,
            410 => LinkStatus::Code410,
            n => LinkStatus::OtherCode(n),
        }
    }

    /// Row label used in reports; every `OtherCode` shares one row.
    pub fn class_label(self) -> &'static str {
        match self {
            LinkStatus::Ok => "Ok",
            LinkStatus::Code404 => "404",
            LinkStatus::Code400 => "400",
            LinkStatus::Code500 => "500",
            LinkStatus::Code503 => "503",
            LinkStatus::Code410 => "410",
            LinkStatus::OtherCode(_) => "Other",
            LinkStatus::Timeout => "Timeout",
            LinkStatus::DnsFailure => "DnsFailure",
        }
    }

    pub const CLASS_LABELS: [&'static str; 9] =
        ["Ok", "404", "400", "500", "503", "410", "Other", "Timeout", "DnsFailure"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub url: String,
    pub status: LinkStatus,
    pub elapsed_ms: u64,
    pub final_url: String,
    pub redirects: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn parse_http_url(url: &str) -> Result<Url, ProbeError> {
    let invalid = |reason: String| ProbeError::InvalidUrl { url: url.to_string(), reason };
    let u = Url::parse(url.trim()).map_err(|e| invalid(e.to_string()))?;
    if !matches!(u.scheme(), "http" | "https") {
        return Err(invalid(format!("scheme {} not supported", u.scheme())));
    }
    if u.host_str().is_none_or(str::is_empty) {
        return Err(invalid("missing host".into()));
    }
    Ok(u)
}

/// GET with redirects followed; also returns the final body when the
/// status is Ok.
pub fn fetch(
    url: &str,
    timeout_ms: u64,
    client: &dyn HttpClient,
    limiter: Option<&HostLimiter>,
) -> Result<(ProbeResult, Option<Vec<u8>>), ProbeError> {
    let mut current = parse_http_url(url)?;
    let budget = Duration::from_millis(timeout_ms);
    let mut spent = Duration::ZERO;
    let mut visited = HashSet::from([current.to_string()]);
    let mut redirects = 0;
    let finish = |status, spent: Duration, current: &Url, redirects, note: Option<String>| ProbeResult {
        url: url.to_string(),
        status,
        elapsed_ms: spent.as_millis() as u64,
        final_url: current.to_string(),
        redirects,
        note,
    };
    loop {
        let Some(remaining) = budget.checked_sub(spent).filter(|d| !d.is_zero()) else {
            return Ok((finish(LinkStatus::Timeout, spent, &current, redirects, None), None));
        };
        if let Some(l) = limiter {
            l.wait(&current);
        }
        let started = Instant::now();
        let reply = client.get(&current, remaining);
        spent += started.elapsed();
        let resp = match reply {
            Err(TransportError::Timeout) => {
                return Ok((finish(LinkStatus::Timeout, spent.min(budget), &current, redirects, None), None))
            }
            Err(TransportError::Dns(m)) => {
                return Ok((finish(LinkStatus::DnsFailure, spent, &current, redirects, Some(m)), None))
            }
            Err(TransportError::Other(m)) => {
                return Ok((finish(LinkStatus::OtherCode(0), spent, &current, redirects, Some(m)), None))
            }
            Ok(r) => r,
        };
        if spent > budget {
            return Ok((finish(LinkStatus::Timeout, budget, &current, redirects, None), None));
        }
        if (300..400).contains(&resp.status) {
            let Some(next) = resp.location.as_deref().and_then(|l| current.join(l).ok()) else {
                let note = Some("redirect without usable Location".to_string());
                return Ok((finish(LinkStatus::OtherCode(resp.status), spent, &current, redirects, note), None));
            };
            if !visited.insert(next.to_string()) {
                let note = Some(format!("redirect loop at {next}"));
                return Ok((finish(LinkStatus::OtherCode(resp.status), spent, &current, redirects, note), None));
            }
            if redirects == MAX_REDIRECTS {
                let note = Some(format!("more than {MAX_REDIRECTS} redirects"));
                return Ok((finish(LinkStatus::OtherCode(resp.status), spent, &current, redirects, note), None));
            }
            redirects += 1;
            current = next;
            continue;
        }
        let status = LinkStatus::from_code(resp.status);
        let body = (status == LinkStatus::Ok).then_some(resp.body);
        return Ok((finish(status, spent, &current, redirects, None), body));
    }
}

pub fn check_link(url: &str, timeout_ms: u64, client: &dyn HttpClient) -> Result<ProbeResult, ProbeError> {
    fetch(url, timeout_ms, client, None).map(|(r, _)| r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub timeout_ms: u64,
    pub concurrency: usize,
    pub host_delay_ms: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            timeout_ms: DEFAULT_TIMEOUT_MS,
            concurrency: DEFAULT_CONCURRENCY,
            host_delay_ms: DEFAULT_HOST_DELAY_MS,
        }
    }
}

/// Probes every URL with at most `concurrency` requests outstanding and
/// per-host spacing. Results follow input order.
pub fn probe_all(
    urls: &[String],
    config: ProbeConfig,
    client: &dyn HttpClient,
) -> Vec<Result<ProbeResult, ProbeError>> {
    let limiter = HostLimiter::new(Duration::from_millis(config.host_delay_ms));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ProbeResult, ProbeError>>>> = Mutex::new(vec![None; urls.len()]);
    let workers = config.concurrency.max(1).min(urls.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(url) = urls.get(i) else { break };
                let r = fetch(url, config.timeout_ms, client, Some(&limiter)).map(|(r, _)| r);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every index is filled")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantStatus {
    Covered,
    Missing,
}

static ANCHOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?is)<a\b[^>]*?\bhref\s*=\s*["']([^"']+)["'][^>]*>(.*?)</a\s*>"#).unwrap());

fn body_text(body: &[u8]) -> String {
    let text = String::from_utf8_lossy(body);
    if looks_like_html(&text) {
        strip_html(&text)
    } else {
        text.into_owned()
    }
}

/// Anchors whose text mentions "language" or names a language.
fn language_links(base: &Url, body: &[u8]) -> Vec<Url> {
    let html = String::from_utf8_lossy(body);
    let mut out = Vec::new();
    for cap in ANCHOR.captures_iter(&html) {
        let text = strip_html(&cap[2]).to_lowercase();
        let named = text.contains("language")
            || Language::KNOWN.iter().any(|l| {
                text.contains(&l.english_name().to_lowercase()) || text.contains(&l.native_name().to_lowercase())
            });
        if named {
            if let Ok(u) = base.join(cap[1].trim()) {
                if matches!(u.scheme(), "http" | "https") && !out.contains(&u) {
                    out.push(u);
                }
            }
        }
    }
    out
}

/// The URL with each two-letter path segment replaced by `code`.
fn mutate_language_segment(url: &Url, code: &str) -> Vec<Url> {
    let segments: Vec<&str> = url.path().split('/').collect();
    let mut out = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if seg.len() == 2 && seg.chars().all(|c| c.is_ascii_alphabetic()) && !seg.eq_ignore_ascii_case(code) {
            let mut s = segments.clone();
            s[i] = code;
            let mut u = url.clone();
            u.set_path(&s.join("/"));
            out.push(u);
        }
    }
    out
}

/// Which claimed languages have a reachable, substantive policy variant.
pub fn discover_language_variants(
    url: &str,
    claimed: &BTreeSet<String>,
    timeout_ms: u64,
    client: &dyn HttpClient,
    detector: &dyn Fn(&str) -> Language,
) -> Result<BTreeMap<String, VariantStatus>, ProbeError> {
    let base = parse_http_url(url)?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut covered: BTreeSet<Language> = BTreeSet::new();
    let mut examine = |target: &Url, covered: &mut BTreeSet<Language>| -> Option<Vec<u8>> {
        if !seen.insert(target.to_string()) {
            return None;
        }
        let (result, body) = fetch(target.as_str(), timeout_ms, client, None).ok()?;
        if result.status != LinkStatus::Ok {
            return None;
        }
        let body = body?;
        let text = body_text(&body);
        if segment(&text).word_count() >= MIN_POLICY_WORDS {
            let lang = detector(&text);
            if lang != Language::Unknown {
                covered.insert(lang);
            }
        }
        Some(body)
    };

    if let Some(body) = examine(&base, &mut covered) {
        for link in language_links(&base, &body) {
            examine(&link, &mut covered);
        }
    }
    for code in claimed {
        let Some(lang) = Language::from_code(code) else { continue };
        if covered.contains(&lang) {
            continue;
        }
        for candidate in mutate_language_segment(&base, lang.code()) {
            examine(&candidate, &mut covered);
        }
    }
    Ok(claimed
        .iter()
        .map(|code| {
            let hit = Language::from_code(code).is_some_and(|l| covered.contains(&l));
            (code.clone(), if hit { VariantStatus::Covered } else { VariantStatus::Missing })
        })
        .collect())
}
