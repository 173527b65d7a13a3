//! String comparison functions used by feature extraction and fuzzy
//! retrieval.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashSet};
use std::hash::Hash;

/// Edit distance over arbitrary symbol sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(x != y);
            row[j + 1] = (diag + cost).min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

/// Levenshtein distance if it is at most `max`, computed inside a diagonal
/// band so long strings are rejected early.
pub fn levenshtein_within(a: &[char], b: &[char], max: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    if a.is_empty() || b.is_empty() {
        return Some(a.len().max(b.len()));
    }
    const FAR: usize = usize::MAX / 2;
    let n = b.len();
    let mut prev = vec![FAR; n + 1];
    let mut cur = vec![FAR; n + 1];
    for (j, p) in prev.iter_mut().enumerate().take(max.min(n) + 1) {
        *p = j;
    }
    for i in 1..=a.len() {
        let lo = i.saturating_sub(max).max(1);
        let hi = (i + max).min(n);
        cur.fill(FAR);
        if i <= max {
            cur[0] = i;
        }
        let mut best = cur[0];
        for j in lo..=hi {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let v = (prev[j - 1] + cost).min(prev[j] + 1).min(cur[j - 1] + 1);
            cur[j] = v;
            best = best.min(v);
        }
        if best > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[n];
    (d <= max).then_some(d)
}

fn bounded_similarity(distance: usize, len_a: usize, len_b: usize) -> f64 {
    let longest = len_a.max(len_b);
    if longest == 0 {
        1.0
    } else {
        1.0 - distance as f64 / longest as f64
    }
}

/// `1 - levenshtein / max(|a|, |b|)`; 1.0 for two empty strings.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    bounded_similarity(edit_distance(&a, &b), a.len(), b.len())
}

/// Levenshtein similarity where every token is one symbol.
pub fn token_levenshtein_similarity<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let a: Vec<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: Vec<&str> = b.iter().map(AsRef::as_ref).collect();
    bounded_similarity(edit_distance(&a, &b), a.len(), b.len())
}

/// `|a ∩ b| / |a ∪ b|`; 1.0 when both sets are empty.
pub fn jaccard<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let inter = a.iter().filter(|x| b.contains(*x)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Items with a weight in `[0, 1]`, typically segmenter probabilities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedSet {
    items: BTreeMap<String, f64>,
}

impl WeightedSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an item; a repeated key keeps its largest weight. Weights are
    /// clamped into `[0, 1]`.
    pub fn insert(&mut self, key: impl Into<String>, weight: f64) {
        let w = if weight.is_nan() { 0.0 } else { weight.clamp(0.0, 1.0) };
        self.items
            .entry(key.into())
            .and_modify(|v| *v = v.max(w))
            .or_insert(w);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.items.keys().map(String::as_str)
    }

    pub fn key_set(&self) -> HashSet<String> {
        self.items.keys().cloned().collect()
    }

    pub fn weight(&self, key: &str) -> Option<f64> {
        self.items.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl<K: Into<String>> FromIterator<(K, f64)> for WeightedSet {
    fn from_iter<I: IntoIterator<Item = (K, f64)>>(iter: I) -> Self {
        let mut set = WeightedSet::new();
        for (k, w) in iter {
            set.insert(k, w);
        }
        set
    }
}

/// Jaccard similarity where each shared item counts with its weight in `a`
/// instead of 1.
pub fn weighted_jaccard<T: Borrow<str> + Eq + Hash>(a: &WeightedSet, b: &HashSet<T>) -> f64 {
    let mut inter = 0usize;
    let mut weight = 0.0;
    for (k, w) in &a.items {
        if b.contains(k.as_str()) {
            inter += 1;
            weight += w;
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        weight / union as f64
    }
}

/// Length in characters of the longest common contiguous substring,
/// compared case-insensitively.
pub fn longest_common_substring(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().flat_map(char::to_lowercase).collect();
    let b: Vec<char> = b.chars().flat_map(char::to_lowercase).collect();
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for x in &a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Adjacent token pairs in order.
pub fn bigrams<S: AsRef<str>>(tokens: &[S]) -> Vec<(String, String)> {
    tokens
        .windows(2)
        .map(|w| (w[0].as_ref().to_string(), w[1].as_ref().to_string()))
        .collect()
}
