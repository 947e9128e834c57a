//! HTML to plain text for policy pages.
//!
//! Drops script, style and head content, turns block-level tags into blank
//! lines so paragraphs survive, and decodes the common character entities.

use std::sync::LazyLock;

use regex::Regex;

static DROPPED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<(script|style|head|noscript|template)\b.*?</(script|style|head|noscript|template)\s*>|<!--.*?-->").unwrap());
static BLOCK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)</?(p|div|section|article|h[1-6]|li|ul|ol|table|tr|header|footer|main|nav|blockquote)\b[^>]*>|<br\s*/?>").unwrap()
});
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<[^>]*>").unwrap());
static NUMERIC_ENTITY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"&#(x[0-9a-fA-F]+|[0-9]+);").unwrap());

pub fn looks_like_html(text: &str) -> bool {
    let head: String = text.chars().take(2048).collect::<String>().to_ascii_lowercase();
    head.contains("<html") || head.contains("<!doctype html") || head.contains("<body") || head.contains("<p>")
}

fn decode_entities(s: &str) -> String {
    let s = NUMERIC_ENTITY.replace_all(s, |c: &regex::Captures<'_>| {
        let v = &c[1];
        let n = if let Some(hex) = v.strip_prefix('x') {
            u32::from_str_radix(hex, 16).ok()
        } else {
            v.parse().ok()
        };
        n.and_then(char::from_u32).map(String::from).unwrap_or_default()
    });
    s.replace("&nbsp;", " ")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

pub fn strip_html(html: &str) -> String {
    let s = DROPPED.replace_all(html, " ");
    let s = BLOCK.replace_all(&s, "\n\n");
    let s = TAG.replace_all(&s, " ");
    let s = decode_entities(&s);
    let mut out = String::new();
    let mut blank = true;
    for line in s.lines() {
        let line = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if line.is_empty() {
            if !blank {
                out.push('\n');
                blank = true;
            }
            continue;
        }
        if !blank {
            // consecutive inline lines belong to the same paragraph
            out.push(' ');
        } else if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&line);
        blank = false;
    }
    out.trim().to_string()
}
