//! Normalized-title matching.

use std::collections::BTreeSet;

use rapidfuzz::distance::indel;

use crate::text::fold;

/// Minimum token-set ratio for accepting a title match.
pub const TITLE_MATCH_THRESHOLD: f64 = 0.9;

pub fn normalize_title(title: &str) -> String {
    fold(title)
}

fn ratio(a: &str, b: &str) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    indel::normalized_similarity(a.chars(), b.chars())
}

/// Token-set ratio in [0, 1] over normalized titles: the best indel
/// similarity among the sorted shared tokens and each side's shared tokens
/// plus its remainder. A title whose tokens are a subset of the other's
/// scores 1.
pub fn token_set_ratio(a: &str, b: &str) -> f64 {
    let (na, nb) = (normalize_title(a), normalize_title(b));
    let ta: BTreeSet<&str> = na.split(' ').filter(|t| !t.is_empty()).collect();
    let tb: BTreeSet<&str> = nb.split(' ').filter(|t| !t.is_empty()).collect();
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let shared: Vec<&str> = ta.intersection(&tb).copied().collect();
    let only_a: Vec<&str> = ta.difference(&tb).copied().collect();
    let only_b: Vec<&str> = tb.difference(&ta).copied().collect();
    if !shared.is_empty() && (only_a.is_empty() || only_b.is_empty()) {
        return 1.0;
    }
    let t0 = shared.join(" ");
    let join = |rest: &[&str]| {
        if t0.is_empty() {
            rest.join(" ")
        } else {
            format!("{t0} {}", rest.join(" "))
        }
    };
    let (t1, t2) = (join(&only_a), join(&only_b));
    let mut best = ratio(&t1, &t2);
    if !t0.is_empty() {
        best = best.max(ratio(&t0, &t1)).max(ratio(&t0, &t2));
    }
    best
}
