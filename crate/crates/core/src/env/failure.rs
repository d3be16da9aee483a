use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ConsoleEntry, ConsoleLevel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureSource {
    App,
    ThirdParty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    ConsoleError,
    PageError,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub raw: String,
    pub signature: String,
    pub source: FailureSource,
    pub severity: Severity,
    /// (episode, step) of the first occurrence.
    pub first_seen: (usize, usize),
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?i)\b[a-z][a-z0-9+.-]*://[^\s"'`]*"#).unwrap())
}

fn quoted_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"``[^`']*''|"[^"]*"|'[^']*'|`[^`]*`"#).unwrap())
}

fn digits_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[0-9]+").unwrap())
}

fn strip_url(url: &str) -> &str {
    let end = url.find(['?', '#']).unwrap_or(url.len());
    &url[..end]
}

fn protected_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!("{}|{}", quoted_re().as_str(), url_re().as_str())).unwrap()
    })
}

/// Normalises a console message so that messages differing only in
/// parameters collide: URL query strings and fragments are dropped, digit runs
/// become `#` except inside quoted tokens and URLs, which are kept verbatim.
pub fn failure_signature(message: &str) -> String {
    let stripped = url_re().replace_all(message.trim(), |c: &regex::Captures<'_>| strip_url(&c[0]).to_string());
    let mut out = String::with_capacity(stripped.len());
    let mut last = 0;
    for m in protected_re().find_iter(&stripped) {
        out.push_str(&digits_re().replace_all(&stripped[last..m.start()], "#"));
        out.push_str(m.as_str());
        last = m.end();
    }
    out.push_str(&digits_re().replace_all(&stripped[last..], "#"));
    out
}

/// Deduplicating collector keyed by (source, signature).
#[derive(Clone, Debug, Default)]
pub struct FailureLog {
    app_origin: String,
    records: BTreeMap<(FailureSource, String), FailureRecord>,
}

impl FailureLog {
    /// `app_origin` is the start URL prefix; entries from other origins are
    /// classified as third party.
    pub fn new(app_origin: impl Into<String>) -> Self {
        Self { app_origin: app_origin.into(), records: BTreeMap::new() }
    }

    pub fn classify(&self, source_url: &str) -> FailureSource {
        if source_url.is_empty() || !source_url.contains("://") || source_url.starts_with(&self.app_origin) {
            FailureSource::App
        } else {
            FailureSource::ThirdParty
        }
    }

    /// Records error entries; returns how many were new.
    pub fn observe(&mut self, entries: &[ConsoleEntry], episode: usize, step: usize) -> usize {
        let mut new = 0;
        for e in entries.iter().filter(|e| e.level == ConsoleLevel::Error) {
            let signature = failure_signature(&e.message);
            if signature.is_empty() {
                continue;
            }
            let source = self.classify(&e.source_url);
            let severity = if e.message.contains("Uncaught") { Severity::PageError } else { Severity::ConsoleError };
            self.records.entry((source, signature.clone())).or_insert_with(|| {
                new += 1;
                FailureRecord { raw: e.message.clone(), signature, source, severity, first_seen: (episode, step) }
            });
        }
        new
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> Vec<FailureRecord> {
        let mut v: Vec<FailureRecord> = self.records.values().cloned().collect();
        v.sort_by(|a, b| a.first_seen.cmp(&b.first_seen).then_with(|| a.signature.cmp(&b.signature)));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gravatar_sizes_collapse() {
        let a = failure_signature("Access denied at \"http://gravatar.com/avatar/?r=g&s=560&d=blank\"");
        let b = failure_signature("Access denied at \"http://gravatar.com/avatar/?r=g&s=80&d=blank\"");
        assert_eq!(a, b);
    }

    #[test]
    fn quoted_state_names_stay_distinct() {
        let a = failure_signature("Error: Param values not valid for state \"petNew\"");
        let b = failure_signature("Error: Param values not valid for state \"ownerEdit\"");
        assert_ne!(a, b);
    }

    #[test]
    fn digits_outside_quotes_are_masked() {
        assert_eq!(failure_signature("timeout after 3000 ms (id 17)"), "timeout after # ms (id #)");
        assert_eq!(failure_signature("bad 'row 12'"), "bad 'row 12'");
    }

    #[test]
    fn idempotent() {
        for m in ["x 12 \"q 3\" http://a.b/c7?d=1#f", "plain", "Uncaught TypeError: a[0] is 5", "at http://h/x/42#z"] {
            let s = failure_signature(m);
            assert_eq!(failure_signature(&s), s);
        }
    }

    #[test]
    fn log_dedups_and_classifies() {
        let mut log = FailureLog::new("http://app.test");
        let e = |m: &str, src: &str| ConsoleEntry { level: ConsoleLevel::Error, message: m.into(), source_url: src.into() };
        let n = log.observe(
            &[e("boom 1", "http://app.test/x"), e("boom 2", "http://app.test/y"), e("boom 1", "http://cdn.other/z")],
            0,
            3,
        );
        assert_eq!(n, 2);
        let recs = log.records();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().any(|r| r.source == FailureSource::ThirdParty));
        assert_eq!(log.observe(&[e("boom 9", "http://app.test/q")], 1, 0), 0);
    }
}
