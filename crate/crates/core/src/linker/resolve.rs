use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{expand_context, parse_marker, CitationContext, CitationKey, LinkError, LinkerConfig, MarkerStyle};
use crate::doc_model::{BibEntry, InlineCitationMarker, ParsedDocument};
use crate::metadata::{MetadataError, PaperLookup, PaperRecord};
use crate::text::fold_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UnresolvedReason {
    /// No bibliography entry matches the marker.
    NoBibMatch,
    /// The entry matched but the metadata lookup failed or found nothing.
    LookupFailed,
    /// The entry has neither a title nor an external id to look up.
    NoLookupKey,
}

/// One bibliography reference reached from a marker in the context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedReference {
    /// Unique within a context: the bib key, or `unmatched:<label>`.
    pub key: String,
    pub marker: InlineCitationMarker,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_key: Option<CitationKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bib: Option<BibEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper: Option<PaperRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<UnresolvedReason>,
    /// Set when an author-year key matched several entries; every candidate
    /// is listed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ambiguous: bool,
}

fn clean_label(label: &str) -> String {
    label.trim().trim_matches(['[', ']', '(', ')', '.']).trim().to_string()
}

/// Numeric label -> bib index. Explicit labels win; otherwise the 1-based
/// position in the reference list.
fn label_map(doc: &ParsedDocument) -> HashMap<String, usize> {
    let mut map = HashMap::new();
    for (i, b) in doc.bib_entries.iter().enumerate() {
        let label = b.label.as_deref().map(clean_label).unwrap_or_else(|| (i + 1).to_string());
        map.entry(label).or_insert(i);
    }
    map
}

/// Tokens of the first author segment of a raw reference string: everything
/// before the first `,`, `;`, `&` or ` and `.
fn first_author_tokens(raw: &str) -> Vec<String> {
    let lowered = raw.to_lowercase();
    let mut end = lowered.len();
    for pat in [",", ";", "&", " and "] {
        if let Some(i) = lowered.find(pat) {
            end = end.min(i);
        }
    }
    fold_tokens(&raw[..end.min(raw.len())])
}

fn contains_seq(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Bib entries whose first author and year match, preferring an exact
/// year-suffix match when the key carries one.
fn match_author_year<'a>(doc: &'a ParsedDocument, surname: &str, year: u16, suffix: Option<char>) -> Vec<&'a BibEntry> {
    let surname_tokens = fold_tokens(surname);
    let bare = year.to_string();
    let exact = suffix.map(|s| format!("{year}{s}"));
    let by_author: Vec<(&BibEntry, Vec<String>)> = doc
        .bib_entries
        .iter()
        .filter(|b| contains_seq(&first_author_tokens(&b.raw_text), &surname_tokens))
        .map(|b| (b, fold_tokens(&b.raw_text)))
        .collect();

    if let Some(exact) = &exact {
        let hits: Vec<&BibEntry> = by_author.iter().filter(|(_, t)| t.contains(exact)).map(|(b, _)| *b).collect();
        if !hits.is_empty() {
            return hits;
        }
    }
    by_author
        .iter()
        .filter(|(b, t)| {
            t.contains(&bare) || b.year == Some(year as i32) || t.iter().any(|tok| tok.len() == 5 && tok.starts_with(&bare))
        })
        .map(|(b, _)| *b)
        .collect()
}

enum Target<'a> {
    Bib(&'a BibEntry, Option<CitationKey>, bool),
    Unmatched(String, Option<CitationKey>),
}

fn targets_for<'a>(doc: &'a ParsedDocument, labels: &HashMap<String, usize>, m: &InlineCitationMarker) -> Vec<Target<'a>> {
    let parse = parse_marker(&m.surface);
    let upstream = m.bib_key.as_deref().and_then(|k| doc.bib(k));
    if let Some(bib) = upstream {
        if parse.expanded_keys.len() <= 1 {
            return vec![Target::Bib(bib, parse.expanded_keys.first().cloned(), false)];
        }
    }
    if parse.style == MarkerStyle::Unknown {
        return vec![Target::Unmatched(m.surface.trim().to_string(), None)];
    }

    let mut out = Vec::new();
    for key in parse.expanded_keys {
        match &key {
            CitationKey::Numeric(n) => match labels.get(&n.to_string()) {
                Some(&i) => out.push(Target::Bib(&doc.bib_entries[i], Some(key), false)),
                None => out.push(Target::Unmatched(key.to_string(), Some(key))),
            },
            CitationKey::AuthorYear { surname, year, suffix } => {
                let hits = match_author_year(doc, surname, *year, *suffix);
                let ambiguous = hits.len() > 1;
                if hits.is_empty() {
                    out.push(Target::Unmatched(key.to_string(), Some(key.clone())));
                }
                for b in hits {
                    out.push(Target::Bib(b, Some(key.clone()), ambiguous));
                }
            }
        }
    }
    out
}

type Lookup = (Option<PaperRecord>, Option<UnresolvedReason>);

/// Lookup failures become `LookupFailed`, except fixture misses, which must
/// surface.
fn lookup(lookup: &dyn PaperLookup, bib: &BibEntry) -> Result<Lookup, MetadataError> {
    let result = if let Some(id) = &bib.resolved_paper_id {
        lookup.lookup_id(id)
    } else if let Some(title) = bib.title.as_deref().filter(|t| !t.trim().is_empty()) {
        lookup.lookup_title(title)
    } else {
        return Ok((None, Some(UnresolvedReason::NoLookupKey)));
    };
    match result {
        Ok(Some(p)) => Ok((Some(p), None)),
        Ok(None) => Ok((None, Some(UnresolvedReason::LookupFailed))),
        Err(e @ MetadataError::FixtureMiss { .. }) => Err(e),
        Err(e) => {
            debug!(bib_key = %bib.bib_key, error = %e, "metadata lookup failed");
            Ok((None, Some(UnresolvedReason::LookupFailed)))
        }
    }
}

/// Expands `core` into a context and resolves every marker in it, in marker
/// order, deduplicated by bibliography key.
pub fn resolve_context(
    doc: &ParsedDocument,
    core: &[u32],
    config: &LinkerConfig,
    paper_lookup: &dyn PaperLookup,
) -> Result<CitationContext, LinkError> {
    let mut ctx = expand_context(doc, core, config.context_window)?;
    let labels = label_map(doc);
    let mut seen = HashSet::new();
    let mut resolved = Vec::new();

    for m in &ctx.found_markers {
        for target in targets_for(doc, &labels, m) {
            let entry = match target {
                Target::Bib(bib, citation_key, ambiguous) => {
                    if !seen.insert(bib.bib_key.clone()) {
                        continue;
                    }
                    let (paper, reason) = lookup(paper_lookup, bib)?;
                    ResolvedReference {
                        key: bib.bib_key.clone(),
                        marker: m.clone(),
                        citation_key,
                        bib: Some(bib.clone()),
                        paper,
                        reason,
                        ambiguous,
                    }
                }
                Target::Unmatched(label, citation_key) => {
                    let key = format!("unmatched:{label}");
                    if !seen.insert(key.clone()) {
                        continue;
                    }
                    ResolvedReference {
                        key,
                        marker: m.clone(),
                        citation_key,
                        bib: None,
                        paper: None,
                        reason: Some(UnresolvedReason::NoBibMatch),
                        ambiguous: false,
                    }
                }
            };
            resolved.push(entry);
        }
    }
    ctx.resolved = resolved;
    Ok(ctx)
}
