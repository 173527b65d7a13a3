//! Evaluation against a gold standard: blocking curves, grouped k-fold
//! cross-validation, pair-level and top-1 metrics, and pipeline recall that
//! charges blocking misses to the matcher.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocking::{ranked_blocks, union_at_cutoff, BlockingConfig};
use crate::classify::{label, select_top1, train, ClassifierKind, Dataset, Hyperparameters};
use crate::features::FeatureSchema;
use crate::index::Index;
use crate::model::{CandidatePair, GoldStandard, SegmentedReference};
use crate::textnorm::TextConfig;
use crate::{Error, Result};

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Nothing was predicted positive; precision is reported as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
}

impl Metrics {
    /// From true-positive, predicted-positive and actual-positive counts.
    pub fn from_counts(tp: usize, predicted: usize, actual: usize) -> Metrics {
        let precision = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        let recall = if actual > 0 { tp as f64 / actual as f64 } else { 0.0 };
        Metrics {
            precision,
            recall,
            f1: f1(precision, recall),
            precision_undefined: predicted == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_fold: Vec<Metrics>,
    pub config_fingerprint: String,
}

impl EvalReport {
    /// Macro average: mean precision and recall over folds, F1 from those.
    pub fn macro_average(per_fold: Vec<Metrics>, config_fingerprint: impl Into<String>) -> EvalReport {
        let n = per_fold.len().max(1) as f64;
        let precision = per_fold.iter().map(|m| m.precision).sum::<f64>() / n;
        let recall = per_fold.iter().map(|m| m.recall).sum::<f64>() / n;
        EvalReport {
            precision,
            recall,
            f1: f1(precision, recall),
            per_fold,
            config_fingerprint: config_fingerprint.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cutoff: usize,
    pub precision: f64,
    /// Absent when no reference has a gold match.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingCurve {
    pub strategy: String,
    pub points: Vec<CurvePoint>,
}

/// Candidate quality at every cutoff from 1 to `max_cutoff`. Each
/// reference's ranked blocks are retrieved once at the largest cutoff and
/// truncated for smaller ones.
pub fn blocking_curve(
    references: &[SegmentedReference],
    gold: &GoldStandard,
    index: &Index,
    config: &BlockingConfig,
    text: &TextConfig,
    max_cutoff: usize,
) -> Result<BlockingCurve> {
    if max_cutoff == 0 {
        return Err(Error::Invalid("max cutoff must be at least 1".into()));
    }
    let blocks: Vec<Vec<Vec<String>>> = references
        .par_iter()
        .map(|r| ranked_blocks(r, index, config, text, max_cutoff))
        .collect::<Result<_>>()?;
    let points = (1..=max_cutoff)
        .map(|cutoff| {
            let candidates: Vec<BTreeSet<String>> = blocks.iter().map(|b| union_at_cutoff(b, cutoff)).collect();
            let s = blocking_summary(references, &candidates, gold);
            CurvePoint {
                cutoff,
                precision: s.pair_precision(),
                recall: s.recall,
            }
        })
        .collect();
    Ok(BlockingCurve {
        strategy: config.strategy.name().to_string(),
        points,
    })
}

/// `strategy,cutoff,precision,recall` rows; missing recall is left empty.
pub fn curves_to_csv(curves: &[BlockingCurve]) -> String {
    let mut out = String::from("strategy,cutoff,precision,recall\n");
    for c in curves {
        for p in &c.points {
            let recall = p.recall.map(|r| format!("{r:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:.6},{}", c.strategy, p.cutoff, p.precision, recall);
        }
    }
    out
}

/// Candidate-set statistics after blocking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingSummary {
    pub references: usize,
    pub pairs: usize,
    pub positive_pairs: usize,
    pub min_candidates: usize,
    pub mean_candidates: f64,
    pub sd_candidates: f64,
    pub max_candidates: usize,
    /// References with a gold match.
    pub matchable: usize,
    /// Matchable references with at least one correct candidate.
    pub found: usize,
    pub recall: Option<f64>,
}

impl BlockingSummary {
    pub fn pair_precision(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.positive_pairs as f64 / self.pairs as f64
        }
    }
}

/// `candidates[i]` belongs to `references[i]`.
pub fn blocking_summary(
    references: &[SegmentedReference],
    candidates: &[BTreeSet<String>],
    gold: &GoldStandard,
) -> BlockingSummary {
    let sizes: Vec<usize> = candidates.iter().map(BTreeSet::len).collect();
    let n = sizes.len();
    let pairs: usize = sizes.iter().sum();
    let mean = if n > 0 { pairs as f64 / n as f64 } else { 0.0 };
    let var = if n > 0 {
        sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / n as f64
    } else {
        0.0
    };
    let (mut positive_pairs, mut matchable, mut found) = (0, 0, 0);
    for (r, cands) in references.iter().zip(candidates) {
        let correct = cands.iter().filter(|c| gold.is_match(&r.id, c)).count();
        positive_pairs += correct;
        if gold.has_match(&r.id) {
            matchable += 1;
            if correct > 0 {
                found += 1;
            }
        }
    }
    BlockingSummary {
        references: n,
        pairs,
        positive_pairs,
        min_candidates: sizes.iter().copied().min().unwrap_or(0),
        mean_candidates: mean,
        sd_candidates: var.sqrt(),
        max_candidates: sizes.iter().copied().max().unwrap_or(0),
        matchable,
        found,
        recall: (matchable > 0).then(|| found as f64 / matchable as f64),
    }
}

/// Splits reference ids into `k` disjoint folds whose sizes differ by at
/// most one. Ids are sorted, shuffled with the seed, then dealt round-robin.
pub fn grouped_kfold(reference_ids: &[String], k: usize, seed: u64) -> Result<Vec<BTreeSet<String>>> {
    let mut ids: Vec<&String> = reference_ids.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 2 || k > ids.len() {
        return Err(Error::Invalid(format!(
            "fold count {k} must be between 2 and the number of references ({})",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![BTreeSet::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].insert(id.clone());
    }
    Ok(folds)
}

/// How cross-validation trains and which columns it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSetup {
    pub kind: ClassifierKind,
    pub hyperparameters: Hyperparameters,
    /// Schema the pairs' feature vectors were built with.
    pub input: FeatureSchema,
    /// Groups the classifier sees; must be a subset of `input`.
    pub groups: FeatureSchema,
    pub config_fingerprint: String,
}

/// Held-out predictions of a cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPredictions {
    /// One entry per input pair, in input order; `None` for pairs whose
    /// reference is in no fold.
    pub probabilities: Vec<Option<f64>>,
    /// Fold of each input pair.
    pub fold_of: Vec<Option<usize>>,
    pub folds: usize,
}

fn column_map(input: &FeatureSchema, groups: &FeatureSchema) -> Result<Vec<usize>> {
    let have = input.columns();
    groups
        .columns()
        .into_iter()
        .map(|c| {
            have.iter().position(|&h| h == c).ok_or_else(|| {
                Error::Invalid(format!(
                    "feature groups {} are not all present in input schema {}",
                    groups.id(),
                    input.id()
                ))
            })
        })
        .collect()
}

/// Trains one model per fold on the other folds and predicts its pairs.
/// Folds run in parallel; each training run is itself deterministic.
pub fn cross_validate_predictions(
    pairs: &[CandidatePair],
    folds: &[BTreeSet<String>],
    setup: &CvSetup,
) -> Result<CvPredictions> {
    let cols = column_map(&setup.input, &setup.groups)?;
    let fold_index: HashMap<&str, usize> = folds
        .iter()
        .enumerate()
        .flat_map(|(f, ids)| ids.iter().map(move |id| (id.as_str(), f)))
        .collect();
    let fold_of: Vec<Option<usize>> = pairs
        .iter()
        .map(|p| fold_index.get(p.reference_id.as_str()).copied())
        .collect();
    let projected: Vec<CandidatePair> = pairs
        .iter()
        .map(|p| {
            let mut q = p.clone();
            if let Some(f) = &p.features {
                if f.len() != setup.input.len() {
                    return Err(Error::SchemaMismatch {
                        expected: setup.input.id(),
                        found: format!("{} columns", f.len()),
                    });
                }
                q.features = Some(cols.iter().map(|&c| f[c]).collect());
            }
            Ok(q)
        })
        .collect::<Result<_>>()?;
    let data = Dataset::from_pairs(setup.groups.id(), &projected)?;

    let per_fold: Vec<Vec<(usize, f64)>> = (0..folds.len())
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = (0..pairs.len())
                .filter(|&i| fold_of[i].is_some_and(|g| g != f))
                .collect();
            let model = train(&data.subset(&train_idx), setup.kind, &setup.hyperparameters).map_err(|e| match e {
                Error::SingleClass { .. } => Error::SingleClass { fold: Some(f) },
                other => other,
            })?;
            (0..pairs.len())
                .filter(|&i| fold_of[i] == Some(f))
                .map(|i| Ok((i, model.predict_row(&data.rows[i])?)))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut probabilities = vec![None; pairs.len()];
    for (i, p) in per_fold.into_iter().flatten() {
        probabilities[i] = Some(p);
    }
    Ok(CvPredictions {
        probabilities,
        fold_of,
        folds: folds.len(),
    })
}

/// Pair-level metrics per fold, class "match" positive.
pub fn pair_report(pairs: &[CandidatePair], cv: &CvPredictions, fingerprint: &str) -> EvalReport {
    let mut counts = vec![(0usize, 0usize, 0usize); cv.folds];
    for ((p, prob), fold) in pairs.iter().zip(&cv.probabilities).zip(&cv.fold_of) {
        let (Some(prob), Some(f)) = (prob, fold) else {
            continue;
        };
        let gold = p.gold_label.unwrap_or(false);
        let predicted = label(*prob);
        let c = &mut counts[*f];
        c.0 += usize::from(gold && predicted);
        c.1 += usize::from(predicted);
        c.2 += usize::from(gold);
    }
    EvalReport::macro_average(
        counts.into_iter().map(|(tp, pr, ac)| Metrics::from_counts(tp, pr, ac)).collect(),
        fingerprint,
    )
}

/// Cross-validated pair-level precision, recall and F1.
pub fn cross_validate(pairs: &[CandidatePair], folds: &[BTreeSet<String>], setup: &CvSetup) -> Result<EvalReport> {
    let cv = cross_validate_predictions(pairs, folds, setup)?;
    Ok(pair_report(pairs, &cv, &setup.config_fingerprint))
}

/// Reference-level results of the top-1 rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Top1Reports {
    /// Recall over references with a correct candidate.
    pub post_blocking: EvalReport,
    /// Recall also counting matchable references that blocking lost.
    pub pipeline: EvalReport,
}

/// Applies top-1 selection per reference to held-out predictions. Every
/// reference id in `folds` is accounted for, including those without any
/// candidate pair.
pub fn top1_reports(
    pairs: &[CandidatePair],
    cv: &CvPredictions,
    folds: &[BTreeSet<String>],
    gold: &GoldStandard,
    fingerprint: &str,
) -> Top1Reports {
    let mut by_ref: BTreeMap<&str, Vec<CandidatePair>> = BTreeMap::new();
    for (p, prob) in pairs.iter().zip(&cv.probabilities) {
        if let Some(prob) = prob {
            let mut q = CandidatePair::new(p.reference_id.clone(), p.record_id.clone());
            q.predicted_probability = Some(*prob);
            q.gold_label = p.gold_label;
            by_ref.entry(p.reference_id.as_str()).or_default().push(q);
        }
    }
    let mut post = Vec::with_capacity(folds.len());
    let mut pipe = Vec::with_capacity(folds.len());
    for fold in folds {
        let (mut selected, mut correct, mut reachable, mut missed) = (0, 0, 0, 0);
        for id in fold {
            let group = by_ref.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            if let Some(choice) = select_top1(group) {
                selected += 1;
                if gold.is_match(id, choice) {
                    correct += 1;
                }
            }
            if group.iter().any(|p| p.gold_label == Some(true)) {
                reachable += 1;
            } else if gold.has_match(id) {
                missed += 1;
            }
        }
        post.push(Metrics::from_counts(correct, selected, reachable));
        pipe.push(Metrics::from_counts(correct, selected, reachable + missed));
    }
    Top1Reports {
        post_blocking: EvalReport::macro_average(post, fingerprint),
        pipeline: EvalReport::macro_average(pipe, fingerprint),
    }
}

/// Cross-validates and reports the top-1 rule, post-blocking and pipeline.
pub fn evaluate_top1(
    pairs: &[CandidatePair],
    folds: &[BTreeSet<String>],
    gold: &GoldStandard,
    setup: &CvSetup,
) -> Result<Top1Reports> {
    let cv = cross_validate_predictions(pairs, folds, setup)?;
    Ok(top1_reports(pairs, &cv, folds, gold, &setup.config_fingerprint))
}

/// Number of gold matches → number of references with that many.
pub fn match_count_histogram(gold: &GoldStandard) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for ids in gold.entries.values() {
        *h.entry(ids.len()).or_insert(0) += 1;
    }
    h
}
