//! Text normalization, Cologne phonetic codes, year extraction and the
//! volume/issue merge.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::{SegmentKind, SegmentToken, SegmentedReference};

/// Characters replaced by a space before tokenizing. Typographic quotes and
/// dashes are folded in with their ASCII counterparts.
const STRIP: &[char] = &[
    '.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '{', '}', '"', '\'', '/', '\\', '-', '–',
    '—', '„', '“', '”', '‘', '’', '«', '»',
];

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "der", "die", "das", "und", "the", "of", "and", "in", "a", "für", "von", "zur", "zum", "on",
    "for",
];

/// Words inside an author segment that are never surnames.
const AUTHOR_NOISE: &[&str] = &[
    "und", "and", "et", "al", "hrsg", "hg", "eds", "ed", "u", "van", "von", "de", "der", "den",
    "zu", "le", "la",
];

pub fn is_strip_char(c: char) -> bool {
    STRIP.contains(&c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedText {
    pub tokens: Vec<String>,
    pub original: String,
}

impl NormalizedText {
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Lowercases, replaces punctuation with spaces and splits on whitespace.
pub fn normalize(text: &str) -> NormalizedText {
    NormalizedText {
        tokens: tokenize(text),
        original: text.to_string(),
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if is_strip_char(c) { ' ' } else { c })
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl Default for StopWords {
    fn default() -> Self {
        StopWords::new(DEFAULT_STOPWORDS.iter().copied())
    }
}

impl StopWords {
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        StopWords(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn remove_from(&self, tokens: Vec<String>) -> Vec<String> {
        tokens.into_iter().filter(|t| !self.contains(t)).collect()
    }
}

/// Plausibility window for publication years, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub min: u16,
    pub max: u16,
}

impl Default for YearWindow {
    fn default() -> Self {
        YearWindow {
            min: 1400,
            max: 2099,
        }
    }
}

/// Text processing settings shared by blocking and feature extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextConfig {
    pub stopwords: Vec<String>,
    pub year_min: u16,
    pub year_max: u16,
}

impl Default for TextConfig {
    fn default() -> Self {
        let w = YearWindow::default();
        TextConfig {
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            year_min: w.min,
            year_max: w.max,
        }
    }
}

impl TextConfig {
    pub fn stop_words(&self) -> StopWords {
        StopWords::new(&self.stopwords)
    }

    pub fn year_window(&self) -> YearWindow {
        YearWindow {
            min: self.year_min,
            max: self.year_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PhoneticCode(pub String);

impl PhoneticCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn fold_for_phonetics(word: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(word.len());
    for c in word.chars().flat_map(char::to_uppercase) {
        match c {
            'Ä' => out.push('A'),
            'Ö' => out.push('O'),
            'Ü' => out.push('U'),
            'ß' => out.extend(['S', 'S']),
            'A'..='Z' => out.push(c),
            _ => {}
        }
    }
    out
}

/// Cologne phonetics (Kölner Phonetik) code of a word. Input without any
/// Latin letters yields an empty code.
pub fn cologne_encode(word: &str) -> PhoneticCode {
    let letters = fold_for_phonetics(word);
    let mut digits: Vec<u8> = Vec::with_capacity(letters.len() + 2);

    for (i, &c) in letters.iter().enumerate() {
        let prev = if i > 0 { Some(letters[i - 1]) } else { None };
        let next = letters.get(i + 1).copied();
        let next_in = |set: &[char]| next.is_some_and(|n| set.contains(&n));
        let prev_in = |set: &[char]| prev.is_some_and(|p| set.contains(&p));

        match c {
            'A' | 'E' | 'I' | 'J' | 'O' | 'U' | 'Y' => digits.push(0),
            'H' => {}
            'B' => digits.push(1),
            'P' => digits.push(if next == Some('H') { 3 } else { 1 }),
            'D' | 'T' => digits.push(if next_in(&['C', 'S', 'Z']) { 8 } else { 2 }),
            'F' | 'V' | 'W' => digits.push(3),
            'G' | 'K' | 'Q' => digits.push(4),
            'C' => {
                let hard = if i == 0 {
                    next_in(&['A', 'H', 'K', 'L', 'O', 'Q', 'R', 'U', 'X'])
                } else {
                    next_in(&['A', 'H', 'K', 'O', 'Q', 'U', 'X']) && !prev_in(&['S', 'Z'])
                };
                digits.push(if hard { 4 } else { 8 });
            }
            'X' => {
                if prev_in(&['C', 'K', 'Q']) {
                    digits.push(8);
                } else {
                    digits.extend([4, 8]);
                }
            }
            'L' => digits.push(5),
            'M' | 'N' => digits.push(6),
            'R' => digits.push(7),
            'S' | 'Z' => digits.push(8),
            _ => {}
        }
    }

    digits.dedup();
    let code = digits
        .iter()
        .enumerate()
        .filter(|&(i, &d)| d != 0 || i == 0)
        .map(|(_, &d)| char::from(b'0' + d))
        .collect();
    PhoneticCode(code)
}

/// First plausible publication year in a string, ignoring numbers that are
/// part of a page range such as `1123-1144`. A trailing letter (`1989b`)
/// is tolerated.
pub fn extract_year(raw: &str) -> Option<String> {
    extract_year_in(raw, YearWindow::default())
}

pub fn extract_year_in(raw: &str, window: YearWindow) -> Option<String> {
    let chars: Vec<char> = raw.chars().collect();
    let is_dash = |c: char| matches!(c, '-' | '–' | '—');
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        if i - start != 4 {
            continue;
        }
        let mut after = i;
        if after < chars.len() && chars[after].is_alphabetic() {
            // a single suffix letter only, not the start of a word
            let next = chars.get(after + 1).copied();
            if next.is_some_and(char::is_alphanumeric) {
                continue;
            }
            after += 1;
        }
        let range_after = after + 1 < chars.len()
            && is_dash(chars[after])
            && chars[after + 1].is_ascii_digit();
        let range_before =
            start >= 2 && is_dash(chars[start - 1]) && chars[start - 2].is_ascii_digit();
        if range_after || range_before {
            continue;
        }
        let digits: String = chars[start..start + 4].iter().collect();
        let value: u16 = digits.parse().ok()?;
        if (window.min..=window.max).contains(&value) {
            return Some(digits);
        }
    }
    None
}

/// Maximal runs of ASCII digits, leading zeros removed.
pub fn digit_runs(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .map(|s| {
            let trimmed = s.trim_start_matches('0');
            if trimmed.is_empty() { "0" } else { trimmed }.to_string()
        })
        .collect()
}

/// Normalized words of a surname string, without particles and initials.
pub fn surname_words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|w| w.chars().count() >= 2 && !AUTHOR_NOISE.contains(&w.as_str()))
        .collect()
}

/// Surname candidates of an author segment in order of appearance, each
/// with the probability of the token it came from. Repeats keep the first
/// occurrence.
pub fn author_surnames(tokens: &[SegmentToken]) -> Vec<(String, f64)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in tokens {
        for w in surname_words(&t.text) {
            if seen.insert(w.clone()) {
                out.push((w, t.probability));
            }
        }
    }
    out
}

/// Folds the segmenter's volume and issue tokens into the number segment.
/// Volume tokens precede issue tokens; existing number tokens come first.
pub fn merge_number_segment(reference: &SegmentedReference) -> SegmentedReference {
    let mut merged = reference.clone();
    let mut number: Vec<SegmentToken> = merged
        .segments
        .remove(&SegmentKind::Number)
        .unwrap_or_default();
    number.append(&mut merged.volume);
    number.append(&mut merged.issue);
    if !number.is_empty() {
        merged.segments.insert(SegmentKind::Number, number);
    }
    merged
}

/// Merge plus raw-string year extraction: everything blocking and feature
/// extraction expect to have run.
pub fn preprocess(reference: &SegmentedReference, window: YearWindow) -> SegmentedReference {
    let mut r = merge_number_segment(reference);
    r.extracted_year = extract_year_in(&r.raw, window);
    r
}
