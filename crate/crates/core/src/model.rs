//! Shared domain types: segmented references, database records, candidate
//! pairs and the gold standard, plus corpus-level validation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One token emitted by the reference segmenter together with the
/// segmenter's certainty for the token's label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentToken {
    pub text: String,
    pub probability: f64,
}

impl SegmentToken {
    pub fn new(text: impl Into<String>, probability: f64) -> Result<Self> {
        let token = SegmentToken {
            text: text.into(),
            probability,
        };
        match token.problem() {
            None => Ok(token),
            Some(p) => Err(Error::Invalid(p)),
        }
    }

    fn problem(&self) -> Option<String> {
        if self.text.is_empty() {
            return Some("empty segment token".into());
        }
        if self.text.trim() != self.text {
            return Some(format!("token `{}` has surrounding whitespace", self.text));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Some(format!(
                "token `{}` has probability {} outside [0,1]",
                self.text, self.probability
            ));
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Author,
    Title,
    Year,
    Page,
    /// Volume and issue merged into one segment.
    Number,
    Source,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 6] = [
        SegmentKind::Author,
        SegmentKind::Title,
        SegmentKind::Year,
        SegmentKind::Page,
        SegmentKind::Number,
        SegmentKind::Source,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SegmentKind::Author => "author",
            SegmentKind::Title => "title",
            SegmentKind::Year => "year",
            SegmentKind::Page => "page",
            SegmentKind::Number => "number",
            SegmentKind::Source => "source",
        }
    }

    pub(crate) fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SegmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SegmentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown segment kind `{s}`")))
    }
}

/// A reference string plus its labeled segments.
///
/// `volume` and `issue` hold tokens carrying the segmenter's native labels;
/// they are folded into [`SegmentKind::Number`] by
/// [`merge_number_segment`](crate::textnorm::merge_number_segment).
/// Kinds without tokens are absent from `segments`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReferenceWire", into = "ReferenceWire")]
pub struct SegmentedReference {
    pub id: String,
    pub raw: String,
    pub segments: BTreeMap<SegmentKind, Vec<SegmentToken>>,
    pub volume: Vec<SegmentToken>,
    pub issue: Vec<SegmentToken>,
    pub extracted_year: Option<String>,
}

impl SegmentedReference {
    pub fn new(id: impl Into<String>, raw: impl Into<String>) -> Self {
        SegmentedReference {
            id: id.into(),
            raw: raw.into(),
            segments: BTreeMap::new(),
            volume: Vec::new(),
            issue: Vec::new(),
            extracted_year: None,
        }
    }

    /// Builder helper; empty token lists leave the kind absent.
    pub fn with_segment(mut self, kind: SegmentKind, tokens: Vec<SegmentToken>) -> Self {
        if tokens.is_empty() {
            self.segments.remove(&kind);
        } else {
            self.segments.insert(kind, tokens);
        }
        self
    }

    pub fn segment(&self, kind: SegmentKind) -> Option<&[SegmentToken]> {
        self.segments.get(&kind).map(Vec::as_slice)
    }

    /// Arithmetic mean of the token probabilities of a segment.
    pub fn segment_probability(&self, kind: SegmentKind) -> Option<f64> {
        let tokens = self.segment(kind)?;
        if tokens.is_empty() {
            return None;
        }
        Some(tokens.iter().map(|t| t.probability).sum::<f64>() / tokens.len() as f64)
    }

    fn tokens(&self) -> impl Iterator<Item = (String, &SegmentToken)> {
        self.segments
            .iter()
            .flat_map(|(k, ts)| ts.iter().map(move |t| (k.name().to_string(), t)))
            .chain(self.volume.iter().map(|t| ("volume".to_string(), t)))
            .chain(self.issue.iter().map(|t| ("issue".to_string(), t)))
    }
}

#[derive(Serialize, Deserialize)]
struct ReferenceWire {
    id: String,
    raw: String,
    #[serde(default)]
    segments: BTreeMap<String, Vec<SegmentToken>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extracted_year: Option<String>,
}

impl TryFrom<ReferenceWire> for SegmentedReference {
    type Error = String;

    fn try_from(wire: ReferenceWire) -> std::result::Result<Self, String> {
        let mut reference = SegmentedReference::new(wire.id, wire.raw);
        reference.extracted_year = wire.extracted_year;
        for (label, tokens) in wire.segments {
            if tokens.is_empty() {
                continue;
            }
            match label.as_str() {
                "volume" => reference.volume = tokens,
                "issue" => reference.issue = tokens,
                other => {
                    let kind = other.parse::<SegmentKind>().map_err(|e| e.to_string())?;
                    reference.segments.insert(kind, tokens);
                }
            }
        }
        Ok(reference)
    }
}

impl From<SegmentedReference> for ReferenceWire {
    fn from(r: SegmentedReference) -> Self {
        let mut segments: BTreeMap<String, Vec<SegmentToken>> = r
            .segments
            .into_iter()
            .filter(|(_, ts)| !ts.is_empty())
            .map(|(k, ts)| (k.name().to_string(), ts))
            .collect();
        if !r.volume.is_empty() {
            segments.insert("volume".into(), r.volume);
        }
        if !r.issue.is_empty() {
            segments.insert("issue".into(), r.issue);
        }
        ReferenceWire {
            id: r.id,
            raw: r.raw,
            segments,
            extracted_year: r.extracted_year,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub surname: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given: Option<String>,
}

impl Author {
    pub fn new(surname: impl Into<String>, given: Option<&str>) -> Self {
        Author {
            surname: surname.into(),
            given: given.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pages {
    pub start: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<String>,
}

/// One entry of the target bibliographic database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibRecord {
    pub id: String,
    #[serde(default)]
    pub authors: Vec<Author>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_abbrev: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages: Option<Pages>,
}

impl BibRecord {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        BibRecord {
            id: id.into(),
            authors: Vec::new(),
            title: title.into(),
            source: String::new(),
            source_abbrev: None,
            year: None,
            volume: None,
            issue: None,
            pages: None,
        }
    }
}

/// A (reference, record) pair surviving blocking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub reference_id: String,
    pub record_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_probability: Option<f64>,
}

impl CandidatePair {
    pub fn new(reference_id: impl Into<String>, record_id: impl Into<String>) -> Self {
        CandidatePair {
            reference_id: reference_id.into(),
            record_id: record_id.into(),
            features: None,
            gold_label: None,
            predicted_probability: None,
        }
    }
}

/// Reference id → all correct record ids (duplicates included, possibly none).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldStandard {
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

/// One line of the gold JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntry {
    pub reference_id: String,
    pub record_ids: Vec<String>,
}

impl GoldStandard {
    pub fn from_entries(entries: impl IntoIterator<Item = GoldEntry>) -> Self {
        let mut gold = GoldStandard::default();
        for e in entries {
            gold.entries
                .entry(e.reference_id)
                .or_default()
                .extend(e.record_ids);
        }
        gold
    }

    pub fn to_entries(&self) -> Vec<GoldEntry> {
        self.entries
            .iter()
            .map(|(r, ids)| GoldEntry {
                reference_id: r.clone(),
                record_ids: ids.iter().cloned().collect(),
            })
            .collect()
    }

    pub fn matches(&self, reference_id: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(reference_id)
    }

    pub fn is_match(&self, reference_id: &str, record_id: &str) -> bool {
        self.entries
            .get(reference_id)
            .is_some_and(|ids| ids.contains(record_id))
    }

    pub fn has_match(&self, reference_id: &str) -> bool {
        self.entries
            .get(reference_id)
            .is_some_and(|ids| !ids.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateReferenceId { id: String },
    DuplicateRecordId { id: String },
    EmptyRaw { reference_id: String },
    BadToken { reference_id: String, label: String, message: String },
    BadRecordYear { record_id: String, year: String },
    EmptyRecordField { record_id: String, field: String },
    UnknownGoldReference { reference_id: String },
    DanglingGoldId { reference_id: String, record_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub references: usize,
    pub records: usize,
    pub gold_entries: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub(crate) fn is_year(s: &str) -> bool {
    s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit())
}

/// Checks every model invariant across a loaded corpus and reports all
/// problems found.
pub fn validate_corpus(
    references: &[SegmentedReference],
    records: &[BibRecord],
    gold: &GoldStandard,
) -> ValidationReport {
    let mut violations = Vec::new();

    let mut ref_ids = HashSet::new();
    for r in references {
        if !ref_ids.insert(r.id.as_str()) {
            violations.push(Violation::DuplicateReferenceId { id: r.id.clone() });
        }
        if r.raw.trim().is_empty() {
            violations.push(Violation::EmptyRaw {
                reference_id: r.id.clone(),
            });
        }
        for (label, token) in r.tokens() {
            if let Some(message) = token.problem() {
                violations.push(Violation::BadToken {
                    reference_id: r.id.clone(),
                    label,
                    message,
                });
            }
        }
    }

    let mut record_ids = HashSet::new();
    for rec in records {
        if !record_ids.insert(rec.id.as_str()) {
            violations.push(Violation::DuplicateRecordId { id: rec.id.clone() });
        }
        if let Some(y) = &rec.year {
            if !is_year(y) {
                violations.push(Violation::BadRecordYear {
                    record_id: rec.id.clone(),
                    year: y.clone(),
                });
            }
        }
        let empty_optionals = [
            ("source_abbrev", rec.source_abbrev.as_deref()),
            ("volume", rec.volume.as_deref()),
            ("issue", rec.issue.as_deref()),
            ("pages.start", rec.pages.as_ref().map(|p| p.start.as_str())),
        ];
        for (field, value) in empty_optionals {
            if value.is_some_and(|v| v.trim().is_empty()) {
                violations.push(Violation::EmptyRecordField {
                    record_id: rec.id.clone(),
                    field: field.to_string(),
                });
            }
        }
    }

    for (reference_id, ids) in &gold.entries {
        if !ref_ids.contains(reference_id.as_str()) {
            violations.push(Violation::UnknownGoldReference {
                reference_id: reference_id.clone(),
            });
        }
        for record_id in ids {
            if !record_ids.contains(record_id.as_str()) {
                violations.push(Violation::DanglingGoldId {
                    reference_id: reference_id.clone(),
                    record_id: record_id.clone(),
                });
            }
        }
    }

    ValidationReport {
        references: references.len(),
        records: records.len(),
        gold_entries: gold.entries.len(),
        violations,
    }
}
