//! Candidate retrieval: build queries for a reference, keep the top hits of
//! each query and merge them into one candidate set.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{Clause, Field, Index};
use crate::model::{GoldStandard, SegmentKind, SegmentToken, SegmentedReference};
use crate::strsim::bigrams;
use crate::textnorm::{author_surnames, digit_runs, extract_year_in, tokenize, TextConfig};

/// A non-empty subset of the six segment kinds, stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentCombination(u8);

impl SegmentCombination {
    pub const COUNT: usize = 63;

    pub fn new(kinds: impl IntoIterator<Item = SegmentKind>) -> Result<Self> {
        let mask = kinds.into_iter().fold(0u8, |m, k| m | 1 << k.ordinal());
        if mask == 0 {
            return Err(Error::Invalid("empty segment combination".into()));
        }
        Ok(SegmentCombination(mask))
    }

    /// All 63 combinations in mask order.
    pub fn all() -> impl Iterator<Item = SegmentCombination> {
        (1u8..=63).map(SegmentCombination)
    }

    pub fn kinds(self) -> Vec<SegmentKind> {
        SegmentKind::ALL
            .into_iter()
            .filter(|k| self.contains(*k))
            .collect()
    }

    pub fn contains(self, kind: SegmentKind) -> bool {
        self.0 & (1 << kind.ordinal()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for SegmentCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.kinds().iter().map(|k| k.name()).collect();
        f.write_str(&names.join("+"))
    }
}

impl Serialize for SegmentCombination {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.kinds().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SegmentCombination {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let kinds = Vec::<SegmentKind>::deserialize(d)?;
        SegmentCombination::new(kinds).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SegmentsOnly,
    StringsOnly,
    Combined,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::SegmentsOnly, Strategy::StringsOnly, Strategy::Combined];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SegmentsOnly => "segments_only",
            Strategy::StringsOnly => "strings_only",
            Strategy::Combined => "combined",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown blocking strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockingConfig {
    pub strategy: Strategy,
    pub cutoff: usize,
    pub enabled_combinations: BTreeSet<SegmentCombination>,
}

impl Default for BlockingConfig {
    fn default() -> Self {
        BlockingConfig {
            strategy: Strategy::Combined,
            cutoff: 5,
            enabled_combinations: SegmentCombination::all().collect(),
        }
    }
}

impl BlockingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff == 0 {
            return Err(Error::Invalid("blocking cutoff must be at least 1".into()));
        }
        Ok(())
    }
}

/// Title and source tokens are matched fuzzily; very short tokens would
/// expand to most of the vocabulary, so they get fewer edits.
fn fuzzy_token(field: Field, token: &str) -> Clause {
    match token.chars().count() {
        0..=2 => Clause::exact(field, token),
        3..=4 => Clause::fuzzy(field, token, 1),
        _ => Clause::fuzzy(field, token, 2),
    }
}

fn joined(tokens: &[SegmentToken]) -> String {
    tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
}

/// Year carried by a year segment, suffix letters removed.
pub fn segment_year(tokens: &[SegmentToken], text: &TextConfig) -> Option<String> {
    extract_year_in(&joined(tokens), text.year_window())
}

fn unique<T: Eq + std::hash::Hash + Clone>(items: Vec<T>) -> Vec<T> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|x| seen.insert(x.clone())).collect()
}

/// Query clause for one segment kind, or `None` when the reference lacks
/// usable content for it.
pub fn kind_clause(reference: &SegmentedReference, kind: SegmentKind, text: &TextConfig) -> Option<Clause> {
    let tokens = reference.segment(kind)?;
    let clause = match kind {
        SegmentKind::Author => {
            let names = author_surnames(tokens);
            if names.is_empty() {
                return None;
            }
            Clause::Or(
                names
                    .into_iter()
                    .map(|(s, _)| Clause::exact(Field::AuthorsSurname, s))
                    .collect(),
            )
        }
        SegmentKind::Year => Clause::exact(Field::Year, segment_year(tokens, text)?),
        SegmentKind::Title | SegmentKind::Source => {
            let field = if kind == SegmentKind::Title { Field::Title } else { Field::Source };
            let words = unique(tokenize(&joined(tokens)));
            if words.is_empty() {
                return None;
            }
            Clause::And(words.iter().map(|w| fuzzy_token(field, w)).collect())
        }
        SegmentKind::Number => {
            let numbers = unique(tokens.iter().flat_map(|t| digit_runs(&t.text)).collect());
            if numbers.is_empty() {
                return None;
            }
            Clause::Or(
                numbers
                    .into_iter()
                    .flat_map(|n| [Clause::exact(Field::Volume, n.clone()), Clause::exact(Field::Issue, n)])
                    .collect(),
            )
        }
        SegmentKind::Page => {
            let start = digit_runs(&joined(tokens)).into_iter().next()?;
            Clause::exact(Field::Pages, start)
        }
    };
    Some(clause)
}

fn combination_clause(
    reference: &SegmentedReference,
    combo: SegmentCombination,
    text: &TextConfig,
) -> Option<Clause> {
    let mut parts = Vec::with_capacity(combo.len());
    for kind in combo.kinds() {
        parts.push(kind_clause(reference, kind, text)?);
    }
    Some(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Clause::And(parts)
    })
}

/// One query per enabled combination whose kinds are all present.
pub fn segment_queries(
    reference: &SegmentedReference,
    combos: &BTreeSet<SegmentCombination>,
    text: &TextConfig,
) -> Vec<Clause> {
    combos
        .iter()
        .filter_map(|&c| combination_clause(reference, c, text))
        .collect()
}

/// Bigram phrase query over the title field built from the whole raw
/// string, plus the same query restricted to the year found in the string.
pub fn string_queries(reference: &SegmentedReference, text: &TextConfig) -> Vec<Clause> {
    let year = extract_year_in(&reference.raw, text.year_window());
    let stop = text.stop_words();
    let tokens: Vec<String> = tokenize(&reference.raw)
        .into_iter()
        .filter(|t| !stop.contains(t) && Some(t) != year.as_ref())
        .collect();
    let pairs = unique(bigrams(&tokens));
    if pairs.is_empty() {
        return Vec::new();
    }
    let bigram_query = Clause::Or(
        pairs
            .into_iter()
            .map(|(a, b)| Clause::phrase(Field::Title, a, b))
            .collect(),
    );
    let mut out = vec![bigram_query.clone()];
    if let Some(y) = year {
        out.push(Clause::And(vec![Clause::exact(Field::Year, y), bigram_query]));
    }
    out
}

pub fn queries(reference: &SegmentedReference, config: &BlockingConfig, text: &TextConfig) -> Vec<Clause> {
    match config.strategy {
        Strategy::SegmentsOnly => segment_queries(reference, &config.enabled_combinations, text),
        Strategy::StringsOnly => string_queries(reference, text),
        Strategy::Combined => {
            let mut qs = segment_queries(reference, &config.enabled_combinations, text);
            qs.extend(string_queries(reference, text));
            qs
        }
    }
}

/// Ranked record ids of every query, each cut at `limit`.
pub fn ranked_blocks(
    reference: &SegmentedReference,
    index: &Index,
    config: &BlockingConfig,
    text: &TextConfig,
    limit: usize,
) -> Result<Vec<Vec<String>>> {
    queries(reference, config, text)
        .iter()
        .map(|q| {
            Ok(index
                .search(q, limit)?
                .into_iter()
                .map(|h| h.record_id)
                .collect())
        })
        .collect()
}

/// Union of the per-query prefixes of length `cutoff`.
pub fn union_at_cutoff(blocks: &[Vec<String>], cutoff: usize) -> BTreeSet<String> {
    blocks
        .iter()
        .flat_map(|b| b.iter().take(cutoff).cloned())
        .collect()
}

pub fn retrieve_candidates(
    reference: &SegmentedReference,
    index: &Index,
    config: &BlockingConfig,
    text: &TextConfig,
) -> Result<BTreeSet<String>> {
    config.validate()?;
    let blocks = ranked_blocks(reference, index, config, text, config.cutoff)?;
    Ok(union_at_cutoff(&blocks, config.cutoff))
}

/// Candidate sets for many references, computed in parallel, in input order.
pub fn retrieve_all(
    references: &[SegmentedReference],
    index: &Index,
    config: &BlockingConfig,
    text: &TextConfig,
) -> Result<Vec<BTreeSet<String>>> {
    config.validate()?;
    references
        .par_iter()
        .map(|r| retrieve_candidates(r, index, config, text))
        .collect()
}

/// How a combination's query quality is measured when filtering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FilterMode {
    /// Share of answered references whose top hit is a gold match.
    #[default]
    PrecisionAtOne,
    /// Share of correct records among all hits kept at `cutoff`.
    RetrievedPrecision { cutoff: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationStat {
    pub combination: SegmentCombination,
    /// References carrying every kind of the combination.
    pub applicable: usize,
    /// Applicable references whose query returned at least one hit.
    pub answered: usize,
    pub retrieved: usize,
    pub correct: usize,
    /// `correct / retrieved`, 0 when nothing was retrieved.
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub threshold: f64,
    pub mode: FilterMode,
    pub retained: BTreeSet<SegmentCombination>,
    /// Combinations no reference could use.
    pub inapplicable: Vec<SegmentCombination>,
    pub stats: Vec<CombinationStat>,
}

/// Scores all 63 combinations against the gold standard and keeps those
/// whose precision reaches `threshold`.
pub fn filter_combinations(
    references: &[SegmentedReference],
    gold: &GoldStandard,
    index: &Index,
    threshold: f64,
    mode: FilterMode,
    text: &TextConfig,
) -> Result<FilterReport> {
    let limit = match mode {
        FilterMode::PrecisionAtOne => 1,
        FilterMode::RetrievedPrecision { cutoff } => cutoff.max(1),
    };
    let judged: Vec<&SegmentedReference> = references
        .iter()
        .filter(|r| gold.matches(&r.id).is_some())
        .collect();

    let stats: Vec<CombinationStat> = SegmentCombination::all()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&combo| -> Result<CombinationStat> {
            let mut stat = CombinationStat {
                combination: combo,
                applicable: 0,
                answered: 0,
                retrieved: 0,
                correct: 0,
                precision: 0.0,
            };
            for r in &judged {
                let Some(q) = combination_clause(r, combo, text) else {
                    continue;
                };
                stat.applicable += 1;
                let hits = index.search(&q, limit)?;
                if !hits.is_empty() {
                    stat.answered += 1;
                }
                stat.retrieved += hits.len();
                stat.correct += hits.iter().filter(|h| gold.is_match(&r.id, &h.record_id)).count();
            }
            if stat.retrieved > 0 {
                stat.precision = stat.correct as f64 / stat.retrieved as f64;
            }
            Ok(stat)
        })
        .collect::<Result<_>>()?;

    let retained = stats
        .iter()
        .filter(|s| s.applicable > 0 && s.precision >= threshold)
        .map(|s| s.combination)
        .collect();
    let inapplicable = stats
        .iter()
        .filter(|s| s.applicable == 0)
        .map(|s| s.combination)
        .collect();
    Ok(FilterReport {
        threshold,
        mode,
        retained,
        inapplicable,
        stats,
    })
}
