//! Grammar for inline citation markers.
//!
//! Numeric styles: `[3]`, ranges `[12-15]` (hyphen, en/em dash, minus, or a
//! spaced `--`), lists `[1, 4, 7]` possibly mixing ranges. Author-year
//! styles: `(Kang et al., 2022)`, `(Smith and Lee, 2019; Chen, 2020)`,
//! `(Chen, 2019, 2020a)`, narrative `Kang et al. (2022)` and bracketed
//! `[Smith 2019]`. Anything else is `Unknown`.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::text::fold;

/// Longest numeric range expanded; wider ranges are treated as unparseable.
const MAX_RANGE_SPAN: u32 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MarkerStyle {
    NumericBracket,
    NumericRange,
    NumericList,
    AuthorYear,
    Unknown,
}

/// A bibliography lookup key derived from a marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CitationKey {
    /// Printed reference-list label.
    Numeric(u32),
    /// First-author surname (folded) and year, with an optional `a`/`b` suffix.
    AuthorYear { surname: String, year: u16, suffix: Option<char> },
}

impl fmt::Display for CitationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CitationKey::Numeric(n) => write!(f, "{n}"),
            CitationKey::AuthorYear { surname, year, suffix } => {
                write!(f, "{surname}:{year}")?;
                if let Some(s) = suffix {
                    write!(f, "{s}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for CitationKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(n) = s.parse::<u32>() {
            return Ok(CitationKey::Numeric(n));
        }
        let (surname, rest) = s.rsplit_once(':').ok_or_else(|| format!("bad citation key `{s}`"))?;
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        let year = digits.parse::<u16>().map_err(|_| format!("bad year in `{s}`"))?;
        let tail: Vec<char> = rest[digits.len()..].chars().collect();
        let suffix = match tail.as_slice() {
            [] => None,
            [c] if c.is_ascii_lowercase() => Some(*c),
            _ => return Err(format!("bad year suffix in `{s}`")),
        };
        Ok(CitationKey::AuthorYear { surname: surname.to_string(), year, suffix })
    }
}

impl Serialize for CitationKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CitationKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerParse {
    pub surface: String,
    pub style: MarkerStyle,
    pub expanded_keys: Vec<CitationKey>,
}

pub fn parse_marker(surface: &str) -> MarkerParse {
    let s = surface.trim();
    let (style, expanded_keys) = classify(s).unwrap_or((MarkerStyle::Unknown, vec![]));
    MarkerParse { surface: surface.to_string(), style, expanded_keys }
}

fn classify(s: &str) -> Option<(MarkerStyle, Vec<CitationKey>)> {
    if s.is_empty() {
        return None;
    }
    let inner = strip_brackets(s).unwrap_or(s);
    // A bare parenthesized year is a narrative fragment whose author sits
    // outside the marker, not a reference number.
    if s.starts_with('(') && YEAR.find(inner).is_some_and(|m| m.as_str() == inner.trim()) {
        return None;
    }
    if let Some(numeric) = parse_numeric(inner) {
        return Some(numeric);
    }
    let keys = parse_author_year(s);
    (!keys.is_empty()).then_some((MarkerStyle::AuthorYear, keys))
}

fn strip_brackets(s: &str) -> Option<&str> {
    for (open, close) in [('[', ']'), ('(', ')')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return Some(inner);
        }
    }
    None
}

fn normalize_dashes(s: &str) -> String {
    let mut out = s.to_string();
    for d in ["---", "--", "\u{2014}", "\u{2013}", "\u{2012}", "\u{2212}", "\u{2010}", "\u{2011}"] {
        out = out.replace(d, "-");
    }
    out
}

enum NumItem {
    One(u32),
    Span(u32, u32),
}

fn parse_num(s: &str) -> Option<u32> {
    let s = s.trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn parse_numeric(inner: &str) -> Option<(MarkerStyle, Vec<CitationKey>)> {
    let normalized = normalize_dashes(inner);
    let mut items = Vec::new();
    for part in normalized.split([',', ';']) {
        let item = match part.split_once('-') {
            None => NumItem::One(parse_num(part)?),
            Some((a, b)) => {
                let (a, b) = (parse_num(a)?, parse_num(b)?);
                if a > b || b - a > MAX_RANGE_SPAN {
                    return None;
                }
                if a == b {
                    NumItem::One(a)
                } else {
                    NumItem::Span(a, b)
                }
            }
        };
        items.push(item);
    }

    let style = match items.as_slice() {
        [NumItem::One(_)] => MarkerStyle::NumericBracket,
        [NumItem::Span(..)] => MarkerStyle::NumericRange,
        _ => MarkerStyle::NumericList,
    };
    let mut keys: Vec<CitationKey> = Vec::new();
    for item in items {
        let (a, b) = match item {
            NumItem::One(n) => (n, n),
            NumItem::Span(a, b) => (a, b),
        };
        for n in a..=b {
            let k = CitationKey::Numeric(n);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    Some((style, keys))
}

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(1[5-9]\d\d|20\d\d)([a-z])?\b").unwrap());
static PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(?:e\.\s?g\.|i\.\s?e\.|see also|see|cf\.|compare)\s*,?\s*").unwrap());
static FIRST_AUTHOR_END: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\s+et\s+al\b|\s+and\s+|\s*&\s*|,").unwrap());
static SUFFIX_ONLY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*([a-z])\s*$").unwrap());

/// Keys from one `Author(s), year[, year...]` group.
fn parse_group(author_part: &str, years_part: &str, out: &mut Vec<CitationKey>) {
    let author = PREFIX.replace(author_part, "");
    let first = FIRST_AUTHOR_END.split(author.trim()).next().unwrap_or("").trim();
    let surname = fold(first);
    if !surname.chars().any(char::is_alphabetic) {
        return;
    }
    let mut last_year: Option<u16> = None;
    for piece in years_part.split(',') {
        let key = if let Some(c) = YEAR.captures(piece) {
            let year: u16 = c[1].parse().expect("regex guarantees digits");
            last_year = Some(year);
            Some((year, c.get(2).and_then(|m| m.as_str().chars().next())))
        } else if let (Some(year), Some(c)) = (last_year, SUFFIX_ONLY.captures(piece)) {
            // "2019a, b"
            Some((year, c[1].chars().next()))
        } else {
            None
        };
        if let Some((year, suffix)) = key {
            let k = CitationKey::AuthorYear { surname: surname.clone(), year, suffix };
            if !out.contains(&k) {
                out.push(k);
            }
        }
    }
}

fn parse_author_year(s: &str) -> Vec<CitationKey> {
    let mut keys = Vec::new();
    match strip_brackets(s) {
        Some(inner) => {
            for group in inner.split(';') {
                if let Some(m) = YEAR.find(group) {
                    parse_group(&group[..m.start()], &group[m.start()..], &mut keys);
                }
            }
        }
        None => {
            // Narrative: `Kang et al. (2022)` or `Smith [2019a, b]`
            let Some(open) = s.find(['(', '[']) else {
                if let Some(m) = YEAR.find(s) {
                    parse_group(&s[..m.start()], &s[m.start()..], &mut keys);
                }
                return keys;
            };
            let inner = s[open + 1..].trim_end_matches([')', ']']);
            if !YEAR.is_match(&s[..open]) {
                parse_group(&s[..open], inner, &mut keys);
            }
        }
    }
    keys
}
