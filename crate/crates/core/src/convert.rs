//! Conversion of an exported gold corpus into the JSONL inputs.
//!
//! Three inputs are read:
//!
//! * references: one reference per line, `id<TAB>tagged`. The tagged string
//!   carries inline segmenter labels such as
//!   `<author><surname>Weber</surname>, <given-names>M.</given-names></author> (<year>1922</year>)`.
//!   A tag may carry `p="0.87"`, the certainty of every token inside it;
//!   tokens default to 1.0. The raw string is the text with tags removed.
//! * records: CSV with the header
//!   `id,authors,title,source,source_abbrev,year,volume,issue,pages`.
//!   Authors are `Surname, Given` separated by `;`, pages are `start-end`.
//! * gold: CSV with the header `reference_id,record_id`. A row with an
//!   empty `record_id` marks a reference known to have no match.
//!   References absent from the file get an empty entry.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Author, BibRecord, GoldStandard, Pages, SegmentKind, SegmentToken, SegmentedReference};

/// Where the tokens of one inline label go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Segment(SegmentKind),
    Volume,
    Issue,
    Ignored,
}

fn target_of(tag: &str) -> Target {
    match tag {
        "author" | "surname" | "given-names" | "given" => Target::Segment(SegmentKind::Author),
        "title" => Target::Segment(SegmentKind::Title),
        "year" => Target::Segment(SegmentKind::Year),
        "fpage" | "lpage" | "page" | "pages" => Target::Segment(SegmentKind::Page),
        "source" => Target::Segment(SegmentKind::Source),
        "volume" => Target::Volume,
        "issue" => Target::Issue,
        _ => Target::Ignored,
    }
}

fn token_texts(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
}

fn parse_probability(attrs: &str) -> Result<Option<f64>> {
    let Some(pos) = attrs.find("p=\"") else {
        return Ok(None);
    };
    let rest = &attrs[pos + 3..];
    let end = rest
        .find('"')
        .ok_or_else(|| Error::Invalid(format!("unterminated attribute in `{attrs}`")))?;
    rest[..end]
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Invalid(format!("bad probability `{}`", &rest[..end])))
}

/// Parses one tagged reference string.
pub fn parse_tagged(id: &str, tagged: &str) -> Result<SegmentedReference> {
    let mut raw = String::new();
    // open tags: (name, probability)
    let mut stack: Vec<(String, Option<f64>)> = Vec::new();
    let mut reference = SegmentedReference::new(id, "");
    let mut rest = tagged;
    while !rest.is_empty() {
        let (text, after) = match rest.find('<') {
            Some(i) => (&rest[..i], &rest[i..]),
            None => (rest, ""),
        };
        if !text.is_empty() {
            raw.push_str(text);
            let target = stack
                .iter()
                .rev()
                .map(|(name, _)| target_of(name))
                .find(|t| *t != Target::Ignored)
                .unwrap_or(Target::Ignored);
            let probability = stack.iter().rev().find_map(|(_, p)| *p).unwrap_or(1.0);
            for t in token_texts(text) {
                let token = SegmentToken::new(t, probability)?;
                match target {
                    Target::Segment(kind) => reference.segments.entry(kind).or_default().push(token),
                    Target::Volume => reference.volume.push(token),
                    Target::Issue => reference.issue.push(token),
                    Target::Ignored => {}
                }
            }
        }
        rest = after;
        if rest.is_empty() {
            break;
        }
        let close = rest
            .find('>')
            .ok_or_else(|| Error::Invalid(format!("reference {id}: unterminated tag")))?;
        let tag = &rest[1..close];
        rest = &rest[close + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some((open, _)) if open == name.trim() => {}
                _ => return Err(Error::Invalid(format!("reference {id}: unbalanced tag </{name}>"))),
            }
        } else {
            let (name, attrs) = tag.split_once(char::is_whitespace).unwrap_or((tag, ""));
            stack.push((name.to_string(), parse_probability(attrs)?));
        }
    }
    if let Some((open, _)) = stack.last() {
        return Err(Error::Invalid(format!("reference {id}: unclosed tag <{open}>")));
    }
    reference.raw = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    Ok(reference)
}

/// Reads `id<TAB>tagged` lines.
pub fn read_tagged_references(path: &Path) -> Result<Vec<SegmentedReference>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_error = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (id, tagged) = line
            .split_once('\t')
            .ok_or_else(|| parse_error("expected `id<TAB>tagged reference`".into()))?;
        out.push(parse_tagged(id.trim(), tagged).map_err(|e| parse_error(e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct RecordRow {
    id: String,
    #[serde(default)]
    authors: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    source_abbrev: String,
    #[serde(default)]
    year: String,
    #[serde(default)]
    volume: String,
    #[serde(default)]
    issue: String,
    #[serde(default)]
    pages: String,
}

fn non_empty(s: String) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

fn parse_authors(s: &str) -> Vec<Author> {
    s.split(';')
        .filter_map(|a| {
            let (surname, given) = match a.split_once(',') {
                Some((s, g)) => (s.trim(), Some(g.trim()).filter(|g| !g.is_empty())),
                None => (a.trim(), None),
            };
            (!surname.is_empty()).then(|| Author::new(surname, given))
        })
        .collect()
}

fn parse_pages(s: &str) -> Option<Pages> {
    let (start, end) = match s.split_once(['-', '–']) {
        Some((a, b)) => (a.trim(), Some(b.trim()).filter(|b| !b.is_empty())),
        None => (s.trim(), None),
    };
    (!start.is_empty()).then(|| Pages {
        start: start.to_string(),
        end: end.map(str::to_string),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

pub fn read_record_csv(path: &Path) -> Result<Vec<BibRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<RecordRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let mut record = BibRecord::new(row.id.trim(), row.title.trim());
        record.authors = parse_authors(&row.authors);
        record.source = row.source.trim().to_string();
        record.source_abbrev = non_empty(row.source_abbrev);
        record.year = non_empty(row.year);
        record.volume = non_empty(row.volume);
        record.issue = non_empty(row.issue);
        record.pages = parse_pages(&row.pages);
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct GoldRow {
    reference_id: String,
    #[serde(default)]
    record_id: String,
}

/// Reads gold pairs; every reference in `references` gets an entry.
pub fn read_gold_csv(path: &Path, references: &[SegmentedReference]) -> Result<GoldStandard> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut entries: BTreeMap<String, std::collections::BTreeSet<String>> =
        references.iter().map(|r| (r.id.clone(), Default::default())).collect();
    for row in reader.deserialize::<GoldRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let ids = entries.entry(row.reference_id.trim().to_string()).or_default();
        if let Some(id) = non_empty(row.record_id) {
            ids.insert(id);
        }
    }
    Ok(GoldStandard { entries })
}

/// Converted corpus, ready to be written as JSONL.
#[derive(Debug, Clone)]
pub struct Converted {
    pub references: Vec<SegmentedReference>,
    pub records: Vec<BibRecord>,
    pub gold: GoldStandard,
}

pub fn convert(references: &Path, records: &Path, gold: &Path) -> Result<Converted> {
    let references = read_tagged_references(references)?;
    let records = read_record_csv(records)?;
    let gold = read_gold_csv(gold, &references)?;
    Ok(Converted {
        references,
        records,
        gold,
    })
}
