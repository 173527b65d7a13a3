//! Pair features.
//!
//! Group A compares segments with record fields, group P adds the
//! segmenter's probabilities (directly and as Jaccard weights), group B
//! compares the raw reference string with the record and ignores the
//! segmentation entirely. Features that cannot be computed because an input
//! is absent take [`MISSING`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocking::segment_year;
use crate::error::{Error, Result};
use crate::model::{BibRecord, CandidatePair, GoldStandard, SegmentKind, SegmentToken, SegmentedReference};
use crate::strsim::{
    bigrams, jaccard, levenshtein_similarity, longest_common_substring, token_levenshtein_similarity,
    weighted_jaccard, WeightedSet,
};
use crate::textnorm::{
    author_surnames, cologne_encode, digit_runs, extract_year_in, surname_words, tokenize, TextConfig,
};

pub const MISSING: f64 = -1.0;
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    /// Segment vs. record field comparisons.
    A,
    /// Segmentation probabilities.
    P,
    /// Raw string vs. record comparisons.
    B,
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureGroup::A => "A",
            FeatureGroup::P => "P",
            FeatureGroup::B => "B",
        })
    }
}

impl std::str::FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(FeatureGroup::A),
            "P" | "p" => Ok(FeatureGroup::P),
            "B" | "b" => Ok(FeatureGroup::B),
            _ => Err(Error::Invalid(format!("unknown feature group `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeatureSpec {
    pub name: &'static str,
    pub group: FeatureGroup,
}

const fn spec(name: &'static str, group: FeatureGroup) -> FeatureSpec {
    FeatureSpec { name, group }
}

/// The full feature list in vector order.
pub const FEATURES: [FeatureSpec; 22] = [
    spec("author_levenshtein", FeatureGroup::A),
    spec("author_phonetic_levenshtein", FeatureGroup::A),
    spec("author_jaccard", FeatureGroup::A),
    spec("title_jaccard", FeatureGroup::A),
    spec("title_levenshtein_char", FeatureGroup::A),
    spec("title_levenshtein_token", FeatureGroup::A),
    spec("source_jaccard", FeatureGroup::A),
    spec("source_levenshtein", FeatureGroup::A),
    spec("year_match", FeatureGroup::A),
    spec("pages_jaccard", FeatureGroup::A),
    spec("number_jaccard", FeatureGroup::A),
    spec("first_author_probability", FeatureGroup::P),
    spec("author_weighted_jaccard", FeatureGroup::P),
    spec("title_weighted_jaccard", FeatureGroup::P),
    spec("source_weighted_jaccard", FeatureGroup::P),
    spec("year_probability", FeatureGroup::P),
    spec("pages_probability", FeatureGroup::P),
    spec("number_probability", FeatureGroup::P),
    spec("raw_title_lcs_ratio", FeatureGroup::B),
    spec("raw_abbrev_occurs", FeatureGroup::B),
    spec("raw_year_match", FeatureGroup::B),
    spec("raw_title_bigram_coverage", FeatureGroup::B),
];

/// Which groups a feature vector carries. Columns keep the order of
/// [`FEATURES`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub groups: BTreeSet<FeatureGroup>,
}

impl FeatureSchema {
    pub fn new(groups: impl IntoIterator<Item = FeatureGroup>) -> Result<Self> {
        let groups: BTreeSet<_> = groups.into_iter().collect();
        if groups.is_empty() {
            return Err(Error::Invalid("feature schema needs at least one group".into()));
        }
        Ok(FeatureSchema { groups })
    }

    pub fn all() -> Self {
        FeatureSchema {
            groups: [FeatureGroup::A, FeatureGroup::P, FeatureGroup::B].into(),
        }
    }

    pub fn parse_groups(s: &str) -> Result<Self> {
        let groups = s
            .split(|c: char| c == '+' || c == ',' || c.is_whitespace())
            .filter(|g| !g.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        FeatureSchema::new(groups)
    }

    /// Stable identifier, e.g. `v1:A+P+B`.
    pub fn id(&self) -> String {
        let groups: Vec<String> = self.groups.iter().map(ToString::to_string).collect();
        format!("v{SCHEMA_VERSION}:{}", groups.join("+"))
    }

    pub fn columns(&self) -> Vec<usize> {
        FEATURES
            .iter()
            .enumerate()
            .filter(|(_, f)| self.groups.contains(&f.group))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.columns().len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Selects this schema's columns from a full-width vector.
    pub fn project(&self, full: &[f64]) -> Vec<f64> {
        self.columns().into_iter().map(|i| full[i]).collect()
    }

    pub fn manifest(&self) -> SchemaManifest {
        SchemaManifest {
            schema: self.id(),
            features: self
                .columns()
                .into_iter()
                .enumerate()
                .map(|(index, i)| ManifestEntry {
                    index,
                    name: FEATURES[i].name.to_string(),
                    group: FEATURES[i].group,
                    missing: MISSING,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub name: String,
    pub group: FeatureGroup,
    pub missing: f64,
}

/// Written next to featurized pairs so consumers can interpret columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaManifest {
    pub schema: String,
    pub features: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: String,
    pub values: Vec<f64>,
}

/// Pre-tokenized view of a reference; build once, compare against many
/// records.
#[derive(Debug, Clone)]
pub struct ReferenceView {
    surnames: Vec<(String, f64)>,
    title: Vec<(String, f64)>,
    source: Vec<(String, f64)>,
    year: Option<String>,
    year_probability: Option<f64>,
    pages: Option<HashSet<String>>,
    pages_probability: Option<f64>,
    number: Option<HashSet<String>>,
    number_probability: Option<f64>,
    raw_tokens: Vec<String>,
    raw_year: Option<String>,
}

fn weighted_words(tokens: Option<&[SegmentToken]>) -> Vec<(String, f64)> {
    tokens
        .unwrap_or_default()
        .iter()
        .flat_map(|t| tokenize(&t.text).into_iter().map(move |w| (w, t.probability)))
        .collect()
}

fn digit_set(tokens: &[SegmentToken]) -> HashSet<String> {
    tokens.iter().flat_map(|t| digit_runs(&t.text)).collect()
}

impl ReferenceView {
    pub fn new(reference: &SegmentedReference, text: &TextConfig) -> Self {
        let seg = |k| reference.segment(k);
        let non_empty = |s: HashSet<String>| (!s.is_empty()).then_some(s);
        ReferenceView {
            surnames: seg(SegmentKind::Author).map(author_surnames).unwrap_or_default(),
            title: weighted_words(seg(SegmentKind::Title)),
            source: weighted_words(seg(SegmentKind::Source)),
            year: seg(SegmentKind::Year).and_then(|t| segment_year(t, text)),
            year_probability: reference.segment_probability(SegmentKind::Year),
            pages: seg(SegmentKind::Page).map(digit_set).and_then(non_empty),
            pages_probability: reference.segment_probability(SegmentKind::Page),
            number: seg(SegmentKind::Number).map(digit_set).and_then(non_empty),
            number_probability: reference.segment_probability(SegmentKind::Number),
            raw_tokens: tokenize(&reference.raw),
            raw_year: extract_year_in(&reference.raw, text.year_window()),
        }
    }
}

/// Pre-tokenized view of a record.
#[derive(Debug, Clone)]
pub struct RecordView {
    surnames: Vec<String>,
    title: Vec<String>,
    source: Vec<String>,
    abbrev: Vec<String>,
    year: Option<String>,
    pages: Option<HashSet<String>>,
    number: Option<HashSet<String>>,
}

impl RecordView {
    pub fn new(record: &BibRecord) -> Self {
        let mut surnames = Vec::new();
        for a in &record.authors {
            for w in surname_words(&a.surname) {
                if !surnames.contains(&w) {
                    surnames.push(w);
                }
            }
        }
        let pages: HashSet<String> = record
            .pages
            .iter()
            .flat_map(|p| std::iter::once(&p.start).chain(p.end.as_ref()))
            .flat_map(|s| digit_runs(s))
            .collect();
        let number: HashSet<String> = record
            .volume
            .iter()
            .chain(record.issue.as_ref())
            .flat_map(|s| digit_runs(s))
            .collect();
        RecordView {
            surnames,
            title: tokenize(&record.title),
            source: tokenize(&record.source),
            abbrev: record.source_abbrev.as_deref().map(tokenize).unwrap_or_default(),
            year: record.year.clone(),
            pages: (!pages.is_empty()).then_some(pages),
            number: (!number.is_empty()).then_some(number),
        }
    }

    /// Full source name and abbreviation, whichever are present.
    fn source_variants(&self) -> Vec<&[String]> {
        [&self.source, &self.abbrev]
            .into_iter()
            .filter(|v| !v.is_empty())
            .map(Vec::as_slice)
            .collect()
    }
}

fn set_of<'a>(words: impl IntoIterator<Item = &'a String>) -> HashSet<String> {
    words.into_iter().cloned().collect()
}

fn weighted_set(words: &[(String, f64)]) -> WeightedSet {
    words.iter().map(|(w, p)| (w.clone(), *p)).collect()
}

/// Mean similarity over a greedy best-first one-to-one pairing.
fn greedy_pairing(a: &[String], b: &[String], sim: impl Fn(&str, &str) -> f64) -> f64 {
    let mut scored: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            scored.push((sim(x, y), i, j));
        }
    }
    scored.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut total = 0.0;
    let mut pairs = 0;
    for (s, i, j) in scored {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        total += s;
        pairs += 1;
    }
    if pairs == 0 {
        MISSING
    } else {
        total / pairs as f64
    }
}

fn indicator(a: Option<&String>, b: Option<&String>) -> f64 {
    match (a, b) {
        (Some(x), Some(y)) => f64::from(u8::from(x == y)),
        _ => MISSING,
    }
}

fn joined(words: &[String]) -> String {
    words.join(" ")
}

/// Computes the full-width vector in [`FEATURES`] order.
pub fn extract_full(reference: &ReferenceView, record: &RecordView) -> [f64; 22] {
    let mut v = [MISSING; 22];

    // authors
    let ref_names: Vec<String> = reference.surnames.iter().map(|(s, _)| s.clone()).collect();
    if !ref_names.is_empty() && !record.surnames.is_empty() {
        v[0] = greedy_pairing(&ref_names, &record.surnames, levenshtein_similarity);
        let code = |s: &String| cologne_encode(s).0;
        let ref_codes: Vec<String> = ref_names.iter().map(code).filter(|c| !c.is_empty()).collect();
        let rec_codes: Vec<String> = record.surnames.iter().map(code).filter(|c| !c.is_empty()).collect();
        v[1] = greedy_pairing(&ref_codes, &rec_codes, levenshtein_similarity);
        let rec_set = set_of(&record.surnames);
        v[2] = jaccard(&set_of(&ref_names), &rec_set);
        v[12] = weighted_jaccard(&weighted_set(&reference.surnames), &rec_set);
    }
    if let Some((_, p)) = reference.surnames.first() {
        v[11] = *p;
    }

    // title
    if !reference.title.is_empty() && !record.title.is_empty() {
        let words: Vec<String> = reference.title.iter().map(|(w, _)| w.clone()).collect();
        let rec_set = set_of(&record.title);
        v[3] = jaccard(&set_of(&words), &rec_set);
        v[4] = levenshtein_similarity(&joined(&words), &joined(&record.title));
        v[5] = token_levenshtein_similarity(&words, &record.title);
        v[13] = weighted_jaccard(&weighted_set(&reference.title), &rec_set);
    }

    // source, best of full name and abbreviation
    let variants = record.source_variants();
    if !reference.source.is_empty() && !variants.is_empty() {
        let words: Vec<String> = reference.source.iter().map(|(w, _)| w.clone()).collect();
        let ref_set = set_of(&words);
        let weighted = weighted_set(&reference.source);
        let best = |f: &dyn Fn(&[String]) -> f64| variants.iter().map(|s| f(s)).fold(f64::MIN, f64::max);
        v[6] = best(&|s| jaccard(&ref_set, &set_of(s)));
        v[7] = best(&|s| levenshtein_similarity(&joined(&words), &joined(s)));
        v[14] = best(&|s| weighted_jaccard(&weighted, &set_of(s)));
    }

    v[8] = indicator(reference.year.as_ref(), record.year.as_ref());
    if let (Some(a), Some(b)) = (&reference.pages, &record.pages) {
        v[9] = jaccard(a, b);
    }
    if let (Some(a), Some(b)) = (&reference.number, &record.number) {
        v[10] = jaccard(a, b);
    }
    v[15] = reference.year_probability.unwrap_or(MISSING);
    v[16] = reference.pages_probability.unwrap_or(MISSING);
    v[17] = reference.number_probability.unwrap_or(MISSING);

    // raw string only
    if !record.title.is_empty() {
        let title = joined(&record.title);
        let raw = joined(&reference.raw_tokens);
        v[18] = longest_common_substring(&title, &raw) as f64 / title.chars().count() as f64;
    }
    if !record.abbrev.is_empty() {
        let needle = format!(" {} ", joined(&record.abbrev));
        let hay = format!(" {} ", joined(&reference.raw_tokens));
        v[19] = f64::from(u8::from(hay.contains(&needle)));
    }
    v[20] = indicator(reference.raw_year.as_ref(), record.year.as_ref());
    if record.title.len() >= 2 {
        let title_pairs = bigrams(&record.title);
        let raw_pairs: HashSet<(String, String)> = bigrams(&reference.raw_tokens).into_iter().collect();
        let hit = title_pairs.iter().filter(|p| raw_pairs.contains(*p)).count();
        v[21] = hit as f64 / title_pairs.len() as f64;
    }
    v
}

/// Feature vector of one pair restricted to `schema`.
pub fn extract_features(
    reference: &SegmentedReference,
    record: &BibRecord,
    schema: &FeatureSchema,
    text: &TextConfig,
) -> FeatureVector {
    let full = extract_full(&ReferenceView::new(reference, text), &RecordView::new(record));
    FeatureVector {
        schema: schema.id(),
        values: schema.project(&full),
    }
}

/// Featurizes candidate pairs in parallel, keeping input order. Gold labels
/// are attached when a gold standard is given.
pub fn featurize_pairs(
    references: &[SegmentedReference],
    records: &[BibRecord],
    pairs: &[CandidatePair],
    schema: &FeatureSchema,
    gold: Option<&GoldStandard>,
    text: &TextConfig,
) -> Result<Vec<CandidatePair>> {
    let ref_views: HashMap<&str, ReferenceView> = references
        .par_iter()
        .map(|r| (r.id.as_str(), ReferenceView::new(r, text)))
        .collect();
    let records: HashMap<&str, &BibRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    pairs
        .par_iter()
        .map(|p| {
            let rv = ref_views
                .get(p.reference_id.as_str())
                .ok_or_else(|| Error::Invalid(format!("unknown reference `{}`", p.reference_id)))?;
            let rec = records
                .get(p.record_id.as_str())
                .ok_or_else(|| Error::Invalid(format!("unknown record `{}`", p.record_id)))?;
            let full = extract_full(rv, &RecordView::new(rec));
            let mut out = p.clone();
            out.features = Some(schema.project(&full));
            if let Some(g) = gold {
                out.gold_label = Some(g.is_match(&p.reference_id, &p.record_id));
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Author, Pages};
    use crate::textnorm::preprocess;

    fn toks(words: &[&str], p: f64) -> Vec<SegmentToken> {
        words.iter().map(|w| SegmentToken::new(*w, p).unwrap()).collect()
    }

    fn record() -> BibRecord {
        BibRecord {
            id: "d1".into(),
            authors: vec![Author::new("Müller", Some("Hans")), Author::new("Schmidt", Some("Anna"))],
            title: "Arbeit und Alltag im Wandel".into(),
            source: "Soziale Welt".into(),
            source_abbrev: Some("Soz. Welt".into()),
            year: Some("2001".into()),
            volume: Some("34".into()),
            issue: Some("2".into()),
            pages: Some(Pages {
                start: "45".into(),
                end: Some("67".into()),
            }),
        }
    }

    fn identical_reference(p: f64) -> SegmentedReference {
        let raw = "Müller, H. und Schmidt, A. (2001): Arbeit und Alltag im Wandel. Soz. Welt 34(2), 45-67.";
        let mut r = SegmentedReference::new("r1", raw)
            .with_segment(SegmentKind::Author, toks(&["Müller,", "H.", "und", "Schmidt,", "A."], p))
            .with_segment(SegmentKind::Year, toks(&["2001"], p))
            .with_segment(SegmentKind::Title, toks(&["Arbeit", "und", "Alltag", "im", "Wandel."], p))
            .with_segment(SegmentKind::Source, toks(&["Soziale", "Welt"], p))
            .with_segment(SegmentKind::Page, toks(&["45-67."], p));
        r.volume = toks(&["34"], p);
        r.issue = toks(&["2"], p);
        preprocess(&r, Default::default())
    }

    #[test]
    fn schema_has_22_features_in_three_groups() {
        let all = FeatureSchema::all();
        assert_eq!(all.len(), 22);
        assert_eq!(all.id(), "v1:A+P+B");
        assert_eq!(FeatureSchema::parse_groups("B").unwrap().len(), 4);
        assert_eq!(FeatureSchema::parse_groups("A+P").unwrap().len(), 18);
        assert!(FeatureSchema::parse_groups("").is_err());
        let m = FeatureSchema::parse_groups("B").unwrap().manifest();
        assert!(m.features.iter().all(|f| f.group == FeatureGroup::B));
        assert_eq!(m.features[0].index, 0);
    }

    #[test]
    fn identical_pair_scores_one_everywhere() {
        let v = extract_features(&identical_reference(1.0), &record(), &FeatureSchema::all(), &TextConfig::default());
        for (spec, x) in FEATURES.iter().zip(&v.values) {
            assert_eq!(*x, 1.0, "{}", spec.name);
        }
    }

    #[test]
    fn weighted_author_jaccard_worked_example() {
        let mut rec = record();
        rec.authors = ["x", "y", "uu", "vv"].iter().map(|s| Author::new(*s, None)).collect();
        let r = SegmentedReference::new("r", "raw")
            .with_segment(SegmentKind::Author, vec![
                SegmentToken::new("xx", 0.8).unwrap(),
                SegmentToken::new("yy", 0.9).unwrap(),
            ]);
        rec.authors[0].surname = "xx".into();
        rec.authors[1].surname = "yy".into();
        let v = extract_features(&r, &rec, &FeatureSchema::all(), &TextConfig::default()).values;
        assert!((v[12] - 0.425).abs() < 1e-12);
        assert_eq!(v[2], 0.5);
        assert_eq!(v[11], 0.8);
    }

    /// Hand-computed vector for a reference without a source segment.
    #[test]
    fn constructed_pair_without_source() {
        let raw = "Mueller, H. (2001): Arbeit im Wandel. Soz. Welt, S. 45.";
        let r = SegmentedReference::new("r", raw)
            .with_segment(SegmentKind::Author, toks(&["Mueller,", "H."], 0.5))
            .with_segment(SegmentKind::Year, toks(&["2001"], 0.8))
            .with_segment(SegmentKind::Title, vec![
                SegmentToken::new("Arbeit", 1.0).unwrap(),
                SegmentToken::new("im", 0.5).unwrap(),
                SegmentToken::new("Wandel.", 0.5).unwrap(),
            ])
            .with_segment(SegmentKind::Page, toks(&["S.", "45."], 0.6));
        let v = extract_features(&r, &record(), &FeatureSchema::all(), &TextConfig::default()).values;

        // mueller vs {müller, schmidt}: best pairing müller, 2 edits over 7 chars
        assert!((v[0] - (1.0 - 2.0 / 7.0)).abs() < 1e-12);
        // cologne: mueller 657 = müller 657
        assert_eq!(v[1], 1.0);
        // {mueller} vs {müller, schmidt}
        assert_eq!(v[2], 0.0);
        // {arbeit, im, wandel} vs {arbeit, und, alltag, im, wandel}
        assert_eq!(v[3], 3.0 / 5.0);
        // "arbeit im wandel" (16) vs "arbeit und alltag im wandel" (27): 11 insertions
        assert!((v[4] - (1.0 - 11.0 / 27.0)).abs() < 1e-12);
        // two token insertions over five tokens
        assert!((v[5] - (1.0 - 2.0 / 5.0)).abs() < 1e-12);
        assert_eq!(&v[6..8], &[MISSING, MISSING]);
        assert_eq!(v[8], 1.0);
        // {45} vs {45, 67}
        assert_eq!(v[9], 0.5);
        assert_eq!(v[10], MISSING);
        assert_eq!(v[11], 0.5);
        assert_eq!(v[12], 0.0);
        // (1.0 + 0.5 + 0.5) / 5
        assert!((v[13] - 0.4).abs() < 1e-12);
        assert_eq!(v[14], MISSING);
        assert_eq!(v[15], 0.8);
        assert_eq!(v[16], 0.6);
        assert_eq!(v[17], MISSING);
        // longest run shared with "arbeit und alltag im wandel" is " im wandel"
        assert!((v[18] - 10.0 / 27.0).abs() < 1e-12);
        assert_eq!(v[19], 1.0);
        assert_eq!(v[20], 1.0);
        // title bigrams: arbeit-und, und-alltag, alltag-im, im-wandel → 1 of 4
        assert_eq!(v[21], 0.25);
    }

    #[test]
    fn all_missing_for_empty_reference() {
        let r = SegmentedReference::new("r", "xyz");
        let mut rec = BibRecord::new("d", "");
        rec.authors.clear();
        let v = extract_features(&r, &rec, &FeatureSchema::all(), &TextConfig::default()).values;
        assert!(v.iter().all(|x| *x == MISSING));
    }

    #[test]
    fn string_group_ignores_segments() {
        let text = TextConfig::default();
        let b = FeatureSchema::parse_groups("B").unwrap();
        let with = extract_features(&identical_reference(0.3), &record(), &b, &text);
        let without = extract_features(&SegmentedReference::new("r1", identical_reference(1.0).raw), &record(), &b, &text);
        assert_eq!(with, without);
    }
}
