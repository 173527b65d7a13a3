//! Oracles, corpora and checks shared by the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use citelink::blocking::{retrieve_candidates, BlockingConfig, Strategy};
use citelink::classify::{train, ClassifierKind, Dataset};
use citelink::config::PipelineConfig;
use citelink::eval::{blocking_curve, grouped_kfold};
use citelink::features::FeatureSchema;
use citelink::index::{field_tokens, Clause, Field, Index};
use citelink::pipeline::{prepare, prepare_references, run_experiment};
use citelink::textnorm::TextConfig;
use citelink::io::{read_gold, read_records, read_references};
use citelink::model::{BibRecord, GoldStandard, SegmentedReference};
use citelink::strsim::{
    jaccard, levenshtein, levenshtein_similarity, levenshtein_within, longest_common_substring, weighted_jaccard,
    WeightedSet,
};
use citelink::synth::{generate, SynthConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use proptest::prelude::{prop_assert, prop_assert_eq, ProptestConfig, TestCaseError};
use proptest::test_runner::{RngAlgorithm, TestRng, TestRunner};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub struct Corpus {
    pub name: String,
    pub records: Vec<BibRecord>,
    pub references: Vec<SegmentedReference>,
    pub gold: GoldStandard,
}

/// The corpus in `CITELINK_GOLD_DIR` when set, the default synthetic corpus
/// otherwise.
pub fn evaluation_corpus() -> Corpus {
    match std::env::var_os("CITELINK_GOLD_DIR") {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            Corpus {
                name: format!("gold corpus at {}", dir.display()),
                records: read_records(dir.join("records.jsonl")).expect("records.jsonl"),
                references: read_references(dir.join("references.jsonl")).expect("references.jsonl"),
                gold: read_gold(dir.join("gold.jsonl")).expect("gold.jsonl"),
            }
        }
        None => synthetic(SynthConfig::default()),
    }
}

pub fn synthetic(config: SynthConfig) -> Corpus {
    let c = generate(&config);
    Corpus {
        name: format!(
            "synthetic corpus (seed {}, {} records, {} references)",
            config.seed, config.records, config.references
        ),
        records: c.records,
        references: c.references,
        gold: c.gold,
    }
}

pub fn small_corpus(seed: u64) -> Corpus {
    synthetic(SynthConfig {
        seed,
        records: 1500,
        references: 100,
        matched_references: 65,
    })
}

// ---- index oracle ----

pub struct Scan<'a> {
    pub records: &'a [BibRecord],
}

impl Scan<'_> {
    fn tokens(&self, r: usize, field: Field) -> Vec<String> {
        field_tokens(&self.records[r], field)
    }

    fn idf(&self, field: Field, term: &str) -> f64 {
        let df = (0..self.records.len())
            .filter(|&r| self.tokens(r, field).iter().any(|t| t == term))
            .count();
        1.0 + (self.records.len() as f64 / (df as f64 + 1.0)).ln()
    }

    fn term_score(&self, r: usize, field: Field, term: &str) -> Option<f64> {
        let tokens = self.tokens(r, field);
        let tf = tokens.iter().filter(|t| *t == term).count();
        if tf == 0 {
            return None;
        }
        let idf = self.idf(field, term);
        Some((tf as f64).sqrt() * idf * idf / (tokens.len() as f64).sqrt())
    }

    fn score(&self, r: usize, clause: &Clause) -> Option<f64> {
        match clause {
            Clause::ExactTerm { field, term } => self.term_score(r, *field, term),
            Clause::FuzzyTerm {
                field,
                term,
                max_edits,
            } => {
                let tokens = self.tokens(r, *field);
                tokens
                    .iter()
                    .filter(|t| levenshtein(t, term) <= *max_edits as usize)
                    .filter_map(|t| self.term_score(r, *field, t))
                    .reduce(f64::max)
            }
            Clause::Phrase { field, terms } => {
                let tokens = self.tokens(r, *field);
                let freq = tokens
                    .windows(2)
                    .filter(|w| w[0] == terms.0 && w[1] == terms.1)
                    .count();
                if freq == 0 {
                    return None;
                }
                let len = (tokens.len() as f64).sqrt();
                let part = |term: &str| {
                    let idf = self.idf(*field, term);
                    (freq as f64).sqrt() * idf * idf / len
                };
                Some(part(&terms.0) + part(&terms.1))
            }
            Clause::And(children) => {
                let mut total = 0.0;
                for c in children {
                    total += self.score(r, c)?;
                }
                Some(total)
            }
            Clause::Or(children) => {
                let scores: Vec<f64> = children.iter().filter_map(|c| self.score(r, c)).collect();
                (!scores.is_empty()).then(|| scores.iter().fold(0.0, |a, b| a + b))
            }
        }
    }

    pub fn search(&self, clause: &Clause, limit: usize) -> Vec<(String, f64)> {
        let mut hits: Vec<(String, f64)> = (0..self.records.len())
            .filter_map(|r| self.score(r, clause).map(|s| (self.records[r].id.clone(), s)))
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        hits.truncate(limit);
        hits
    }
}

pub fn mutate(rng: &mut ChaCha8Rng, term: &str) -> String {
    let mut chars: Vec<char> = term.chars().collect();
    for _ in 0..rng.gen_range(1..=2) {
        let c = *b"aeinrstu".choose(rng).unwrap() as char;
        match rng.gen_range(0..3) {
            0 if !chars.is_empty() => {
                let i = rng.gen_range(0..chars.len());
                chars.remove(i);
            }
            1 => {
                let i = rng.gen_range(0..=chars.len());
                chars.insert(i, c);
            }
            _ if !chars.is_empty() => {
                let i = rng.gen_range(0..chars.len());
                chars[i] = c;
            }
            _ => chars.push(c),
        }
    }
    chars.into_iter().collect()
}

pub fn random_leaf(rng: &mut ChaCha8Rng, records: &[BibRecord]) -> Clause {
    let field = *Field::ALL.choose(rng).unwrap();
    let tokens = loop {
        let t = field_tokens(records.choose(rng).unwrap(), field);
        if !t.is_empty() {
            break t;
        }
    };
    let term = tokens.choose(rng).unwrap().clone();
    match rng.gen_range(0..10) {
        0..=3 => Clause::exact(field, term),
        4 => Clause::exact(field, mutate(rng, &term)),
        5..=7 => {
            let term = if rng.gen_bool(0.5) { mutate(rng, &term) } else { term };
            Clause::fuzzy(field, term, rng.gen_range(1..=2))
        }
        _ => {
            let i = rng.gen_range(0..tokens.len());
            let next = if i + 1 < tokens.len() && rng.gen_bool(0.8) {
                tokens[i + 1].clone()
            } else {
                tokens.choose(rng).unwrap().clone()
            };
            Clause::phrase(field, tokens[i].clone(), next)
        }
    }
}

pub fn random_clause(rng: &mut ChaCha8Rng, records: &[BibRecord], depth: u32) -> Clause {
    if depth == 0 || rng.gen_bool(0.4) {
        return random_leaf(rng, records);
    }
    let children = (0..rng.gen_range(1..=3))
        .map(|_| random_clause(rng, records, depth - 1))
        .collect();
    if rng.gen_bool(0.5) {
        Clause::And(children)
    } else {
        Clause::Or(children)
    }
}

/// Compares `queries` random clauses on a 200-record sample against the
/// linear scan, ids and scores alike.
pub fn check_index_against_scan(queries: usize) -> Check {
    let corpus = synthetic(SynthConfig {
        seed: 7,
        records: 200,
        references: 20,
        matched_references: 10,
    });
    let records = &corpus.records;
    let index = Index::build_all(records).map_err(|e| e.to_string())?;
    let scan = Scan { records };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut nonempty = 0;
    for q in 0..queries {
        let clause = random_clause(&mut rng, records, 2);
        let limit = *[1usize, 5, 20, 200].choose(&mut rng).unwrap();
        let got = index.search(&clause, limit).map_err(|e| e.to_string())?;
        let want = scan.search(&clause, limit);
        let got_ids: Vec<&str> = got.iter().map(|h| h.record_id.as_str()).collect();
        let want_ids: Vec<&str> = want.iter().map(|h| h.0.as_str()).collect();
        if got_ids != want_ids {
            return Err(format!("query {q} `{clause}`: {got_ids:?} != {want_ids:?}"));
        }
        for (g, w) in got.iter().zip(&want) {
            if (g.score - w.1).abs() > 1e-9 * w.1.abs().max(1.0) {
                return Err(format!("query {q} `{clause}`: score {} != {}", g.score, w.1));
            }
        }
        nonempty += usize::from(!got.is_empty());
    }
    // the generator must exercise hits, not just empty results
    if nonempty * 2 < queries {
        return Err(format!("only {nonempty} of {queries} queries had hits"));
    }
    Ok(())
}

// ---- string metric oracles ----

/// Every string over `alphabet` with length at most `max_len`.
pub fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| alphabet.iter().map(move |c| format!("{s}{c}")))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Plain recursive definition of edit distance, memoized on suffix lengths.
pub fn edit_oracle(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if let Some(d) = memo[a.len()][b.len()] {
            return d;
        }
        let d = match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let replace = go(ra, rb, memo) + usize::from(x != y);
                replace.min(go(ra, b, memo) + 1).min(go(a, rb, memo) + 1)
            }
        };
        memo[a.len()][b.len()] = Some(d);
        d
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, &mut memo)
}

/// Longest substring of `a` (by enumeration) that `b` contains.
pub fn lcs_oracle(a: &str, b: &str) -> usize {
    let chars: Vec<char> = a.chars().collect();
    let mut best = 0;
    for i in 0..chars.len() {
        for j in i + 1..=chars.len() {
            if j - i > best && b.contains(&chars[i..j].iter().collect::<String>()) {
                best = j - i;
            }
        }
    }
    best
}

fn subsets(universe: &[&str]) -> Vec<HashSet<String>> {
    (0..1u32 << universe.len())
        .map(|mask| {
            universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| s.to_string())
                .collect()
        })
        .collect()
}

pub fn check_levenshtein_exhaustive(max_len: usize) -> Check {
    let strings = all_strings(&['a', 'b', 'c'], max_len);
    for a in &strings {
        let ac: Vec<char> = a.chars().collect();
        for b in &strings {
            let bc: Vec<char> = b.chars().collect();
            let d = edit_oracle(&ac, &bc);
            if levenshtein(a, b) != d {
                return Err(format!("levenshtein({a:?}, {b:?}) != {d}"));
            }
            for max in 0..=3 {
                if levenshtein_within(&ac, &bc, max) != (d <= max).then_some(d) {
                    return Err(format!("banded levenshtein({a:?}, {b:?}, {max}) disagrees"));
                }
            }
            let longest = ac.len().max(bc.len());
            let sim = if longest == 0 { 1.0 } else { 1.0 - d as f64 / longest as f64 };
            if levenshtein_similarity(a, b) != sim {
                return Err(format!("similarity({a:?}, {b:?}) != {sim}"));
            }
        }
    }
    Ok(())
}

pub fn check_lcs_exhaustive(max_len: usize) -> Check {
    let strings = all_strings(&['a', 'b', 'c'], max_len);
    for a in &strings {
        for b in &strings {
            let want = lcs_oracle(a, b);
            if longest_common_substring(a, b) != want {
                return Err(format!("lcs({a:?}, {b:?}) != {want}"));
            }
        }
    }
    Ok(())
}

pub fn check_lcs_sampled(max_len: usize, samples: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let word = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.gen_range(0..=max_len);
        (0..n).map(|_| *['a', 'b', 'c'].choose(rng).unwrap()).collect()
    };
    for _ in 0..samples {
        let (a, b) = (word(&mut rng), word(&mut rng));
        let want = lcs_oracle(&a, &b);
        if longest_common_substring(&a, &b) != want {
            return Err(format!("lcs({a:?}, {b:?}) != {want}"));
        }
    }
    Ok(())
}

pub fn check_jaccard_exhaustive() -> Check {
    let universe = ["a", "b", "c", "d"];
    let sets = subsets(&universe);
    let weights = [0.0, 0.25, 1.0, 0.5];
    for a in &sets {
        for b in &sets {
            let inter = universe.iter().filter(|u| a.contains(**u) && b.contains(**u)).count();
            let union = universe.iter().filter(|u| a.contains(**u) || b.contains(**u)).count();
            let expected = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
            if jaccard(a, b) != expected {
                return Err(format!("jaccard({a:?}, {b:?}) != {expected}"));
            }
            let weighted: WeightedSet = a
                .iter()
                .map(|k| (k.clone(), weights[universe.iter().position(|u| u == k).unwrap()]))
                .collect();
            let wsum: f64 = universe
                .iter()
                .enumerate()
                .filter(|(_, u)| a.contains(**u) && b.contains(**u))
                .map(|(i, _)| weights[i])
                .sum();
            let expected = if union == 0 { 1.0 } else { wsum / union as f64 };
            let got = weighted_jaccard(&weighted, b);
            if (got - expected).abs() > 1e-12 || got > jaccard(a, b) + 1e-12 {
                return Err(format!("weighted_jaccard({a:?}, {b:?}) = {got}, expected {expected}"));
            }
        }
    }
    Ok(())
}

// ---- property suites ----

fn runner(cases: u32) -> TestRunner {
    let config = ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn prop_levenshtein_metric(cases: u32) -> Check {
    runner(cases)
        .run(&("[abc]{0,8}", "[abc]{0,8}", "[abc]{0,8}"), |(a, b, c)| {
            let (ab, ba) = (levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn prop_weighted_jaccard_bound(cases: u32) -> Check {
    let strategy = (
        proptest::collection::btree_map("[a-f]{1,2}", 0.0f64..=1.0, 0..8),
        proptest::collection::hash_set("[a-f]{1,2}", 0..8),
    );
    runner(cases)
        .run(&strategy, |(weights, b)| {
            let a: WeightedSet = weights.iter().map(|(k, w)| (k.clone(), *w)).collect();
            let keys: HashSet<String> = a.key_set();
            let (w, u) = (weighted_jaccard(&a, &b), jaccard(&keys, &b));
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert!(w <= u + 1e-12, "weighted {} > unweighted {}", w, u);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn prop_fold_partition(cases: u32) -> Check {
    let strategy = (proptest::collection::btree_set("[a-z0-9]{1,6}", 2..150), 2usize..12, 1u64..u64::MAX);
    runner(cases)
        .run(&strategy, |(ids, k, seed)| {
            let ids: Vec<String> = ids.into_iter().collect();
            let k = k.min(ids.len());
            let folds = grouped_kfold(&ids, k, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(folds.len(), k);
            let total: usize = folds.iter().map(BTreeSet::len).sum();
            prop_assert_eq!(total, ids.len());
            let union: BTreeSet<&String> = folds.iter().flatten().collect();
            prop_assert_eq!(union.len(), ids.len());
            let sizes: Vec<usize> = folds.iter().map(BTreeSet::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(grouped_kfold(&ids, k, seed).unwrap(), folds);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Raising the cutoff only ever adds candidates.
pub fn prop_cutoff_monotonic(cases: u32) -> Check {
    let corpus = small_corpus(11);
    let index = Index::build_all(&corpus.records).map_err(|e| e.to_string())?;
    let text = TextConfig::default();
    let references = prepare_references(&corpus.references, &text);
    let strategy = (0..references.len(), 1usize..8, 0usize..6, 0..3usize);
    runner(cases)
        .run(&strategy, |(r, low, extra, s)| {
            let mut config = BlockingConfig {
                strategy: Strategy::ALL[s],
                cutoff: low,
                ..BlockingConfig::default()
            };
            let small = retrieve_candidates(&references[r], &index, &config, &text).unwrap();
            config.cutoff = low + extra;
            let large = retrieve_candidates(&references[r], &index, &config, &text).unwrap();
            prop_assert!(small.is_subset(&large));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Recall along a blocking curve never drops as the cutoff grows.
pub fn check_curve_recall_monotonic(seeds: &[u64]) -> Check {
    let text = TextConfig::default();
    for &seed in seeds {
        let corpus = small_corpus(seed);
        let index = Index::build_all(&corpus.records).map_err(|e| e.to_string())?;
        let references = prepare_references(&corpus.references, &text);
        for strategy in Strategy::ALL {
            let config = BlockingConfig {
                strategy,
                ..BlockingConfig::default()
            };
            let curve = blocking_curve(&references, &corpus.gold, &index, &config, &text, 15)
                .map_err(|e| e.to_string())?;
            let recalls: Vec<f64> = curve.points.iter().map(|p| p.recall.unwrap_or(0.0)).collect();
            if recalls.windows(2).any(|w| w[1] < w[0]) {
                return Err(format!("seed {seed} {}: recall drops in {recalls:?}", strategy.name()));
            }
        }
    }
    Ok(())
}

/// Two seeded runs of the whole pipeline serialize to the same bytes, for
/// both classifiers, including the trained model files.
pub fn check_determinism() -> Check {
    let corpus = small_corpus(5);
    let mut outputs = Vec::new();
    for kind in ClassifierKind::ALL {
        let mut config = PipelineConfig::default();
        config.classifier.kind = kind;
        config.eval.folds = 5;
        let run = || -> Result<Vec<u8>, String> {
            let report = run_experiment(&corpus.references, &corpus.records, &corpus.gold, &config)
                .map_err(|e| e.to_string())?;
            let index = Index::build_all(&corpus.records).map_err(|e| e.to_string())?;
            let prepared = prepare(&corpus.references, &corpus.records, &index, &corpus.gold, &config)
                .map_err(|e| e.to_string())?;
            let data = Dataset::from_pairs(FeatureSchema::all().id(), &prepared.pairs).map_err(|e| e.to_string())?;
            let model = train(&data, kind, &config.classifier.resolved_hyperparameters()).map_err(|e| e.to_string())?;
            let mut bytes = serde_json::to_vec(&report).map_err(|e| e.to_string())?;
            bytes.extend(model.to_json().map_err(|e| e.to_string())?.into_bytes());
            Ok(bytes)
        };
        let (first, second) = (run()?, run()?);
        if first != second {
            return Err(format!("{} runs differ", kind.name()));
        }
        outputs.push(first);
    }
    if outputs[0] == outputs[1] {
        return Err("classifiers produced identical output; the check is vacuous".into());
    }
    Ok(())
}
