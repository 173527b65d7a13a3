//! Embedded inverted index with boolean, fuzzy and phrase queries ranked by
//! classic tf-idf.
//!
//! A document's score for one matched term is
//! `sqrt(tf) * (1 + ln(N / (df + 1)))^2 / sqrt(field_length)`. Fuzzy terms
//! score as the best-scoring index term they expand to, phrases as the sum
//! of both terms with the phrase frequency standing in for `tf`, and boolean
//! nodes sum the scores of their matching children. Hits are ordered by
//! score, ties by record id.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BibRecord;
use crate::strsim::levenshtein_within;
use crate::textnorm::{cologne_encode, digit_runs, surname_words, tokenize};

pub const MAX_FUZZY_EDITS: u8 = 2;
const FORMAT: &str = "citelink-index";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    AuthorsSurname,
    AuthorsSurnamePhonetic,
    Title,
    Source,
    SourceAbbrev,
    Year,
    Volume,
    Issue,
    Pages,
}

impl Field {
    pub const ALL: [Field; 9] = [
        Field::AuthorsSurname,
        Field::AuthorsSurnamePhonetic,
        Field::Title,
        Field::Source,
        Field::SourceAbbrev,
        Field::Year,
        Field::Volume,
        Field::Issue,
        Field::Pages,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::AuthorsSurname => "authors_surname",
            Field::AuthorsSurnamePhonetic => "authors_surname_phonetic",
            Field::Title => "title",
            Field::Source => "source",
            Field::SourceAbbrev => "source_abbrev",
            Field::Year => "year",
            Field::Volume => "volume",
            Field::Issue => "issue",
            Field::Pages => "pages",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownField(s.to_string()))
    }
}

/// The token sequence a record contributes to a field.
pub fn field_tokens(record: &BibRecord, field: Field) -> Vec<String> {
    match field {
        Field::AuthorsSurname => record
            .authors
            .iter()
            .flat_map(|a| surname_words(&a.surname))
            .collect(),
        Field::AuthorsSurnamePhonetic => record
            .authors
            .iter()
            .flat_map(|a| surname_words(&a.surname))
            .map(|w| cologne_encode(&w).0)
            .filter(|c| !c.is_empty())
            .collect(),
        Field::Title => tokenize(&record.title),
        Field::Source => tokenize(&record.source),
        Field::SourceAbbrev => record.source_abbrev.as_deref().map(tokenize).unwrap_or_default(),
        Field::Year => record.year.iter().cloned().collect(),
        Field::Volume => record.volume.as_deref().map(digit_runs).unwrap_or_default(),
        Field::Issue => record.issue.as_deref().map(digit_runs).unwrap_or_default(),
        Field::Pages => record
            .pages
            .as_ref()
            .map(|p| digit_runs(&p.start))
            .unwrap_or_default(),
    }
}

/// Boolean query tree. Terms are matched verbatim, so callers pass
/// normalized tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    ExactTerm { field: Field, term: String },
    FuzzyTerm { field: Field, term: String, max_edits: u8 },
    Phrase { field: Field, terms: (String, String) },
    And(Vec<Clause>),
    Or(Vec<Clause>),
}

impl Clause {
    pub fn exact(field: Field, term: impl Into<String>) -> Self {
        Clause::ExactTerm {
            field,
            term: term.into(),
        }
    }

    pub fn fuzzy(field: Field, term: impl Into<String>, max_edits: u8) -> Self {
        Clause::FuzzyTerm {
            field,
            term: term.into(),
            max_edits,
        }
    }

    pub fn phrase(field: Field, first: impl Into<String>, second: impl Into<String>) -> Self {
        Clause::Phrase {
            field,
            terms: (first.into(), second.into()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Clause::FuzzyTerm { max_edits, .. } if !(1..=MAX_FUZZY_EDITS).contains(max_edits) => Err(
                Error::InvalidQuery(format!("max_edits must be 1 or 2, got {max_edits}")),
            ),
            Clause::And(children) | Clause::Or(children) => {
                if children.is_empty() {
                    return Err(Error::InvalidQuery("boolean clause without children".into()));
                }
                children.iter().try_for_each(Clause::validate)
            }
            _ => Ok(()),
        }
    }

    pub fn fields(&self, out: &mut BTreeSet<Field>) {
        match self {
            Clause::ExactTerm { field, .. }
            | Clause::FuzzyTerm { field, .. }
            | Clause::Phrase { field, .. } => {
                out.insert(*field);
            }
            Clause::And(children) | Clause::Or(children) => {
                children.iter().for_each(|c| c.fields(out));
            }
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::ExactTerm { field, term } => write!(f, "{field}:{term}"),
            Clause::FuzzyTerm {
                field,
                term,
                max_edits,
            } => write!(f, "{field}:{term}~{max_edits}"),
            Clause::Phrase { field, terms } => write!(f, "{field}:\"{} {}\"", terms.0, terms.1),
            Clause::And(cs) | Clause::Or(cs) => {
                let op = if matches!(self, Clause::And(_)) { " AND " } else { " OR " };
                f.write_str("(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(op)?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub record_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub record: u32,
    pub positions: Vec<u32>,
}

impl Posting {
    pub fn term_frequency(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldIndex {
    /// Term → postings sorted by record ordinal.
    pub postings: BTreeMap<String, Vec<Posting>>,
    /// Token count per record ordinal.
    pub field_lengths: Vec<u32>,
    #[serde(skip)]
    deletions: DeletionMap,
}

/// Maps every string reachable from an index term by deleting up to
/// [`MAX_FUZZY_EDITS`] characters to the terms it came from. Any term within
/// `k` edits of a query shares such a variant with it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct DeletionMap {
    terms: Vec<Vec<char>>,
    keys: Vec<String>,
    variants: HashMap<String, Vec<u32>>,
}

fn deletion_variants(word: &[char], depth: u8, out: &mut BTreeSet<String>) {
    out.insert(word.iter().collect());
    if depth == 0 || word.is_empty() {
        return;
    }
    for i in 0..word.len() {
        let mut shorter = word.to_vec();
        shorter.remove(i);
        deletion_variants(&shorter, depth - 1, out);
    }
}

impl DeletionMap {
    fn build<'a>(terms: impl Iterator<Item = &'a String>) -> Self {
        let mut map = DeletionMap::default();
        for (id, term) in terms.enumerate() {
            let chars: Vec<char> = term.chars().collect();
            let mut variants = BTreeSet::new();
            deletion_variants(&chars, MAX_FUZZY_EDITS, &mut variants);
            for v in variants {
                map.variants.entry(v).or_default().push(id as u32);
            }
            map.terms.push(chars);
            map.keys.push(term.clone());
        }
        map
    }

    fn expand(&self, term: &str, max_edits: u8) -> Vec<&str> {
        let query: Vec<char> = term.chars().collect();
        let mut variants = BTreeSet::new();
        deletion_variants(&query, max_edits, &mut variants);
        let mut candidates: Vec<u32> = variants
            .iter()
            .filter_map(|v| self.variants.get(v))
            .flatten()
            .copied()
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        candidates
            .into_iter()
            .filter(|&id| {
                levenshtein_within(&self.terms[id as usize], &query, max_edits as usize).is_some()
            })
            .map(|id| self.keys[id as usize].as_str())
            .collect()
    }
}

impl FieldIndex {
    fn build(docs: &[Vec<String>]) -> Self {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut field_lengths = Vec::with_capacity(docs.len());
        for (ord, tokens) in docs.iter().enumerate() {
            field_lengths.push(tokens.len() as u32);
            for (pos, tok) in tokens.iter().enumerate() {
                let list = postings.entry(tok.clone()).or_default();
                match list.last_mut() {
                    Some(p) if p.record == ord as u32 => p.positions.push(pos as u32),
                    _ => list.push(Posting {
                        record: ord as u32,
                        positions: vec![pos as u32],
                    }),
                }
            }
        }
        let mut index = FieldIndex {
            postings,
            field_lengths,
            deletions: DeletionMap::default(),
        };
        index.rebuild_fuzzy();
        index
    }

    fn rebuild_fuzzy(&mut self) {
        self.deletions = DeletionMap::build(self.postings.keys());
    }

    pub fn doc_count(&self) -> usize {
        self.field_lengths.len()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Index terms within `max_edits` of `term`, in term order.
    pub fn fuzzy_terms(&self, term: &str, max_edits: u8) -> Vec<&str> {
        self.deletions.expand(term, max_edits)
    }

    fn idf(&self, df: usize) -> f64 {
        1.0 + (self.doc_count() as f64 / (df as f64 + 1.0)).ln()
    }

    fn weight(&self, idf: f64, freq: usize, record: u32) -> f64 {
        let len = self.field_lengths[record as usize] as f64;
        (freq as f64).sqrt() * idf * idf / len.sqrt()
    }

    fn term_scores(&self, term: &str) -> Vec<(u32, f64)> {
        let Some(list) = self.postings.get(term) else {
            return Vec::new();
        };
        let idf = self.idf(list.len());
        list.iter()
            .map(|p| (p.record, self.weight(idf, p.term_frequency(), p.record)))
            .collect()
    }

    fn phrase_scores(&self, first: &str, second: &str) -> Vec<(u32, f64)> {
        let (Some(a), Some(b)) = (self.postings.get(first), self.postings.get(second)) else {
            return Vec::new();
        };
        let (idf_a, idf_b) = (self.idf(a.len()), self.idf(b.len()));
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].record.cmp(&b[j].record) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let next: BTreeSet<u32> = b[j].positions.iter().copied().collect();
                    let freq = a[i]
                        .positions
                        .iter()
                        .filter(|&&p| next.contains(&(p + 1)))
                        .count();
                    if freq > 0 {
                        let r = a[i].record;
                        out.push((r, self.weight(idf_a, freq, r) + self.weight(idf_b, freq, r)));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    fn fuzzy_scores(&self, term: &str, max_edits: u8) -> Vec<(u32, f64)> {
        let mut best: BTreeMap<u32, f64> = BTreeMap::new();
        for t in self.fuzzy_terms(term, max_edits) {
            for (r, s) in self.term_scores(t) {
                best.entry(r).and_modify(|v| *v = v.max(s)).or_insert(s);
            }
        }
        best.into_iter().collect()
    }
}

/// Index over a fixed set of records; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    record_ids: Vec<String>,
    fields: BTreeMap<Field, FieldIndex>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    record_ids: Vec<String>,
    fields: BTreeMap<Field, FieldIndex>,
}

impl Index {
    pub fn build(records: &[BibRecord], fields: &[Field]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateRecordId(r.id.clone()));
            }
        }
        let fields: BTreeSet<Field> = fields.iter().copied().collect();
        let fields = fields
            .into_iter()
            .map(|f| {
                let docs: Vec<Vec<String>> = records.iter().map(|r| field_tokens(r, f)).collect();
                (f, FieldIndex::build(&docs))
            })
            .collect();
        Ok(Index {
            record_ids: records.iter().map(|r| r.id.clone()).collect(),
            fields,
        })
    }

    pub fn build_all(records: &[BibRecord]) -> Result<Self> {
        Index::build(records, &Field::ALL)
    }

    pub fn doc_count(&self) -> usize {
        self.record_ids.len()
    }

    pub fn record_id(&self, ordinal: u32) -> &str {
        &self.record_ids[ordinal as usize]
    }

    pub fn fields(&self) -> impl Iterator<Item = (Field, &FieldIndex)> {
        self.fields.iter().map(|(f, i)| (*f, i))
    }

    pub fn field(&self, field: Field) -> Result<&FieldIndex> {
        self.fields.get(&field).ok_or(Error::FieldNotIndexed(field.name()))
    }

    /// Records matching `query`, best first, at most `limit` of them.
    pub fn search(&self, query: &Clause, limit: usize) -> Result<Vec<RankedHit>> {
        if limit == 0 {
            return Err(Error::InvalidQuery("limit must be at least 1".into()));
        }
        query.validate()?;
        let mut used = BTreeSet::new();
        query.fields(&mut used);
        for f in used {
            self.field(f)?;
        }
        let mut scored = self.evaluate(query);
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.record_id(a.0).cmp(self.record_id(b.0)))
        });
        scored.truncate(limit);
        Ok(scored
            .into_iter()
            .map(|(r, score)| RankedHit {
                record_id: self.record_id(r).to_string(),
                score,
            })
            .collect())
    }

    /// Matching record ordinals with their scores, sorted by ordinal.
    fn evaluate(&self, clause: &Clause) -> Vec<(u32, f64)> {
        match clause {
            Clause::ExactTerm { field, term } => self.fields[field].term_scores(term),
            Clause::FuzzyTerm {
                field,
                term,
                max_edits,
            } => self.fields[field].fuzzy_scores(term, *max_edits),
            Clause::Phrase { field, terms } => self.fields[field].phrase_scores(&terms.0, &terms.1),
            Clause::And(children) => {
                let mut acc: Option<Vec<(u32, f64)>> = None;
                for child in children {
                    let hits = self.evaluate(child);
                    acc = Some(match acc {
                        None => hits.into_iter().map(|(r, s)| (r, 0.0 + s)).collect(),
                        Some(prev) => intersect(&prev, &hits),
                    });
                    if acc.as_ref().is_some_and(Vec::is_empty) {
                        return Vec::new();
                    }
                }
                acc.unwrap_or_default()
            }
            Clause::Or(children) => {
                let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
                for child in children {
                    for (r, s) in self.evaluate(child) {
                        *acc.entry(r).or_insert(0.0) += s;
                    }
                }
                acc.into_iter().collect()
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = IndexFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            record_ids: self.record_ids.clone(),
            fields: self.fields.clone(),
        };
        let path = path.as_ref();
        let bytes = serde_json::to_vec(&file)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: IndexFile = serde_json::from_slice(&bytes)?;
        if file.format != FORMAT || file.version != FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "{}: unsupported index format {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        let mut fields = file.fields;
        for f in fields.values_mut() {
            if f.field_lengths.len() != file.record_ids.len() {
                return Err(Error::Invalid(format!("{}: inconsistent field lengths", path.display())));
            }
            f.rebuild_fuzzy();
        }
        Ok(Index {
            record_ids: file.record_ids,
            fields,
        })
    }
}

fn intersect(a: &[(u32, f64)], b: &[(u32, f64)]) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out
}
