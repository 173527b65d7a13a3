//! End-to-end runs: preprocessing, blocking, featurization and
//! cross-validated evaluation under one [`PipelineConfig`].

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocking::{filter_combinations, retrieve_all, FilterReport};
use crate::config::PipelineConfig;
use crate::eval::{
    blocking_summary, cross_validate_predictions, grouped_kfold, pair_report, top1_reports, BlockingSummary,
    CvSetup, EvalReport, Top1Reports,
};
use crate::features::{featurize_pairs, FeatureSchema};
use crate::index::Index;
use crate::model::{BibRecord, CandidatePair, GoldStandard, SegmentedReference};
use crate::textnorm::{preprocess, TextConfig};
use crate::Result;

/// Applies the volume/issue merge and raw-string year extraction.
pub fn prepare_references(references: &[SegmentedReference], text: &TextConfig) -> Vec<SegmentedReference> {
    let window = text.year_window();
    references.par_iter().map(|r| preprocess(r, window)).collect()
}

/// Flattens candidate sets into pairs, ordered by reference then record.
pub fn candidate_pairs(references: &[SegmentedReference], candidates: &[BTreeSet<String>]) -> Vec<CandidatePair> {
    references
        .iter()
        .zip(candidates)
        .flat_map(|(r, set)| set.iter().map(move |id| CandidatePair::new(r.id.clone(), id.clone())))
        .collect()
}

/// Blocking output of a run.
#[derive(Debug, Clone)]
pub struct Blocked {
    pub references: Vec<SegmentedReference>,
    pub candidates: Vec<BTreeSet<String>>,
    pub summary: BlockingSummary,
    /// Present when the combinations were chosen by the gold filter.
    pub filter: Option<FilterReport>,
}

/// Preprocesses references and retrieves their candidates. Without an
/// explicit combination list, the combinations are selected by scoring them
/// against the gold standard at the configured threshold, or all are used
/// when no gold standard is at hand.
pub fn block(
    references: &[SegmentedReference],
    index: &Index,
    gold: Option<&GoldStandard>,
    config: &PipelineConfig,
) -> Result<Blocked> {
    let references = prepare_references(references, &config.text);
    let mut blocking = config.blocking.blocking_config();
    let mut filter = None;
    if let (None, Some(gold)) = (&config.blocking.enabled_combinations, gold) {
        let report = filter_combinations(
            &references,
            gold,
            index,
            config.blocking.combination_threshold,
            config.blocking.filter_mode,
            &config.text,
        )?;
        blocking.enabled_combinations = report.retained.clone();
        filter = Some(report);
    }
    let candidates = retrieve_all(&references, index, &blocking, &config.text)?;
    let summary = blocking_summary(&references, &candidates, gold.unwrap_or(&GoldStandard::default()));
    Ok(Blocked {
        references,
        candidates,
        summary,
        filter,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub classifier: String,
    pub blocking: BlockingSummary,
    pub pairs: EvalReport,
    pub top1: Top1Reports,
}

/// Everything an evaluation needs after blocking: the full-width featurized
/// pairs and the folds. Schemas and classifiers can then be varied cheaply.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub blocked: Blocked,
    pub pairs: Vec<CandidatePair>,
    pub folds: Vec<BTreeSet<String>>,
}

/// Blocks and featurizes with all feature groups, then splits references
/// into folds. Every reference is assigned a fold, including those without
/// candidates, so blocking misses reach the pipeline recall.
pub fn prepare(
    references: &[SegmentedReference],
    records: &[BibRecord],
    index: &Index,
    gold: &GoldStandard,
    config: &PipelineConfig,
) -> Result<Prepared> {
    let blocked = block(references, index, Some(gold), config)?;
    let pairs = candidate_pairs(&blocked.references, &blocked.candidates);
    let pairs = featurize_pairs(
        &blocked.references,
        records,
        &pairs,
        &FeatureSchema::all(),
        Some(gold),
        &config.text,
    )?;
    let ids: Vec<String> = blocked.references.iter().map(|r| r.id.clone()).collect();
    let folds = grouped_kfold(&ids, config.eval.folds, config.eval.seed)?;
    Ok(Prepared { blocked, pairs, folds })
}

/// Cross-validates the classifier and feature groups of `config` on
/// prepared pairs.
pub fn evaluate(prepared: &Prepared, gold: &GoldStandard, config: &PipelineConfig) -> Result<ExperimentReport> {
    let fingerprint = config.fingerprint();
    let setup = CvSetup {
        kind: config.classifier.kind,
        hyperparameters: config.classifier.resolved_hyperparameters(),
        input: FeatureSchema::all(),
        groups: config.schema(),
        config_fingerprint: fingerprint.clone(),
    };
    let cv = cross_validate_predictions(&prepared.pairs, &prepared.folds, &setup)?;
    Ok(ExperimentReport {
        schema: setup.groups.id(),
        classifier: setup.kind.name().to_string(),
        blocking: prepared.blocked.summary.clone(),
        pairs: pair_report(&prepared.pairs, &cv, &fingerprint),
        top1: top1_reports(&prepared.pairs, &cv, &prepared.folds, gold, &fingerprint),
    })
}

/// Index, block, featurize and evaluate in one go.
pub fn run_experiment(
    references: &[SegmentedReference],
    records: &[BibRecord],
    gold: &GoldStandard,
    config: &PipelineConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    let index = Index::build_all(records)?;
    let prepared = prepare(references, records, &index, gold, config)?;
    evaluate(&prepared, gold, config)
}
