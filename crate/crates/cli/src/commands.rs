use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use citelink::blocking::{filter_combinations, BlockingConfig, FilterReport, SegmentCombination, Strategy};
use citelink::classify::{self, ClassifierModel, Dataset};
use citelink::config::PipelineConfig;
use citelink::eval::{blocking_curve, curves_to_csv, BlockingCurve, BlockingSummary};
use citelink::features::{featurize_pairs, SchemaManifest};
use citelink::index::Index;
use citelink::io::{
    read_gold, read_json, read_jsonl, read_records, read_references, write_corpus, write_json, write_jsonl,
};
use citelink::model::{validate_corpus, CandidatePair, GoldStandard};
use citelink::pipeline::{self, ExperimentReport};
use citelink::synth::{self, SynthConfig};

use crate::{Classify, Failure, Outcome};

/// Candidate set of one reference, one line of `candidates.jsonl`.
#[derive(Debug, Serialize, Deserialize)]
struct CandidateLine {
    reference_id: String,
    record_ids: Vec<String>,
    config_fingerprint: String,
}

/// One line of `pairs.jsonl`.
#[derive(Debug, Serialize, Deserialize)]
struct PairLine {
    #[serde(flatten)]
    pair: CandidatePair,
    config_fingerprint: String,
}

/// One line of `links.jsonl`.
#[derive(Debug, Serialize, Deserialize)]
struct LinkLine {
    reference_id: String,
    record_id: String,
    probability: f64,
    config_fingerprint: String,
}

#[derive(Debug, Serialize)]
struct Stamped<'a, T> {
    config_fingerprint: &'a str,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Serialize)]
struct BlockOutput<'a> {
    summary: &'a BlockingSummary,
    combinations: BTreeSet<SegmentCombination>,
    filter: Option<&'a FilterReport>,
}

#[derive(Debug, Serialize)]
struct EvaluateOutput<'a> {
    report: &'a ExperimentReport,
    retained_combinations: usize,
    curves: &'a [BlockingCurve],
    match_counts: BTreeMap<usize, usize>,
}

fn required(slot: &Option<PathBuf>, key: &str) -> Outcome<PathBuf> {
    slot.clone()
        .ok_or_else(|| Failure::Config(anyhow!("paths.{key} is not set")))
}

/// Fails with an input error unless `path` exists.
fn existing(path: PathBuf) -> Outcome<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Failure::Input(anyhow!("{} does not exist", path.display())))
    }
}

fn outputs(config: &PipelineConfig) -> Outcome<PathBuf> {
    let dir = config.paths.outputs.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).input()?;
    Ok(dir)
}

fn index_path(config: &PipelineConfig) -> Outcome<PathBuf> {
    match &config.paths.index {
        Some(p) => Ok(p.clone()),
        None => Ok(outputs(config)?.join("index.json")),
    }
}

fn model_path(config: &PipelineConfig) -> Outcome<PathBuf> {
    match &config.paths.models {
        Some(p) => Ok(p.clone()),
        None => Ok(outputs(config)?.join("model.json")),
    }
}

fn optional_gold(config: &PipelineConfig) -> Outcome<Option<GoldStandard>> {
    match &config.paths.gold {
        Some(p) => Ok(Some(read_gold(existing(p.clone())?).input()?)),
        None => Ok(None),
    }
}

pub fn index(config: &PipelineConfig) -> Outcome {
    let records_path = existing(required(&config.paths.records, "records")?)?;
    let records = read_records(&records_path).input()?;
    if records.is_empty() {
        warn!("{} holds no records; writing an empty index", records_path.display());
    }
    let index = Index::build_all(&records).input()?;
    let path = index_path(config)?;
    index.save(&path).input()?;
    println!("{} records indexed", index.doc_count());
    for (field, f) in index.fields() {
        println!("  {:<26} {:>8} terms", field.name(), f.postings.len());
    }
    info!("index written to {}", path.display());
    Ok(())
}

pub fn block(config: &PipelineConfig) -> Outcome {
    let references = read_references(existing(required(&config.paths.references, "references")?)?).input()?;
    let index = Index::load(existing(index_path(config)?)?).input()?;
    let gold = optional_gold(config)?;
    if gold.is_none() && config.blocking.enabled_combinations.is_none() {
        warn!("no gold standard and no enabled_combinations: using all 63 combinations");
    }
    let blocked = pipeline::block(&references, &index, gold.as_ref(), config).input()?;
    let fingerprint = config.fingerprint();
    let lines: Vec<CandidateLine> = blocked
        .references
        .iter()
        .zip(&blocked.candidates)
        .map(|(r, c)| CandidateLine {
            reference_id: r.id.clone(),
            record_ids: c.iter().cloned().collect(),
            config_fingerprint: fingerprint.clone(),
        })
        .collect();
    let dir = outputs(config)?;
    write_jsonl(dir.join("candidates.jsonl"), &lines).input()?;
    let combinations = match &blocked.filter {
        Some(f) => f.retained.clone(),
        None => config.blocking.blocking_config().enabled_combinations,
    };
    let out = Stamped {
        config_fingerprint: &fingerprint,
        body: BlockOutput {
            summary: &blocked.summary,
            combinations,
            filter: blocked.filter.as_ref(),
        },
    };
    write_json(dir.join("blocking_summary.json"), &out).input()?;
    let s = &blocked.summary;
    println!(
        "{} pairs for {} references (candidates min {} mean {:.1} sd {:.1} max {})",
        s.pairs, s.references, s.min_candidates, s.mean_candidates, s.sd_candidates, s.max_candidates
    );
    if let Some(r) = s.recall {
        println!("blocking recall {:.3} ({}/{})", r, s.found, s.matchable);
    }
    Ok(())
}

pub fn featurize(config: &PipelineConfig, unlabeled: bool) -> Outcome {
    let references = read_references(existing(required(&config.paths.references, "references")?)?).input()?;
    let references = pipeline::prepare_references(&references, &config.text);
    let records = read_records(existing(required(&config.paths.records, "records")?)?).input()?;
    let dir = outputs(config)?;
    let lines: Vec<CandidateLine> = read_jsonl(existing(dir.join("candidates.jsonl"))?).input()?;
    let gold = if unlabeled { None } else { optional_gold(config)? };
    let pairs: Vec<CandidatePair> = lines
        .iter()
        .flat_map(|l| l.record_ids.iter().map(|id| CandidatePair::new(l.reference_id.clone(), id.clone())))
        .collect();
    let schema = config.schema();
    let pairs = featurize_pairs(&references, &records, &pairs, &schema, gold.as_ref(), &config.text).input()?;
    let fingerprint = config.fingerprint();
    let out: Vec<PairLine> = pairs
        .into_iter()
        .map(|pair| PairLine {
            pair,
            config_fingerprint: fingerprint.clone(),
        })
        .collect();
    write_jsonl(dir.join("pairs.jsonl"), &out).input()?;
    write_json(
        dir.join("schema.json"),
        &Stamped {
            config_fingerprint: &fingerprint,
            body: schema.manifest(),
        },
    )
    .input()?;
    println!("{} feature vectors written ({})", out.len(), schema.id());
    Ok(())
}

fn read_pairs(dir: &Path) -> Outcome<(Vec<CandidatePair>, String)> {
    let lines: Vec<PairLine> = read_jsonl(existing(dir.join("pairs.jsonl"))?).input()?;
    #[derive(Deserialize)]
    struct ManifestFile {
        #[serde(flatten)]
        manifest: SchemaManifest,
    }
    let manifest: ManifestFile = read_json(existing(dir.join("schema.json"))?).input()?;
    Ok((lines.into_iter().map(|l| l.pair).collect(), manifest.manifest.schema))
}

pub fn train(config: &PipelineConfig) -> Outcome {
    let dir = outputs(config)?;
    let (pairs, schema) = read_pairs(&dir)?;
    if schema != config.schema().id() {
        return Err(Failure::Config(anyhow!(
            "pairs were featurized as {schema} but the configuration asks for {}",
            config.schema().id()
        )));
    }
    if pairs.iter().any(|p| p.gold_label.is_none()) {
        return Err(Failure::Input(anyhow!("training pairs must carry gold labels")));
    }
    let data = Dataset::from_pairs(schema, &pairs).input()?;
    let mut model = classify::train(&data, config.classifier.kind, &config.classifier.resolved_hyperparameters())
        .input()?;
    model.config_fingerprint = Some(config.fingerprint());
    let path = model_path(config)?;
    model.save(&path).input()?;
    println!(
        "{} model trained on {} pairs ({} positive), written to {}",
        model.kind.name(),
        data.len(),
        data.labels.iter().filter(|&&l| l).count(),
        path.display()
    );
    Ok(())
}

pub fn match_links(config: &PipelineConfig) -> Outcome {
    let dir = outputs(config)?;
    let model_path = existing(model_path(config)?)?;
    let (mut pairs, schema) = read_pairs(&dir)?;
    let model = ClassifierModel::load(&model_path, Some(&schema)).input()?;
    model.predict_pairs(&mut pairs).input()?;
    let mut by_ref: BTreeMap<&str, Vec<CandidatePair>> = BTreeMap::new();
    for p in &pairs {
        by_ref.entry(p.reference_id.as_str()).or_default().push(p.clone());
    }
    let fingerprint = config.fingerprint();
    let links: Vec<LinkLine> = by_ref
        .iter()
        .filter_map(|(r, group)| {
            let id = classify::select_top1(group)?;
            let p = group.iter().find(|p| p.record_id == id)?;
            Some(LinkLine {
                reference_id: r.to_string(),
                record_id: id.to_string(),
                probability: p.predicted_probability?,
                config_fingerprint: fingerprint.clone(),
            })
        })
        .collect();
    write_jsonl(dir.join("links.jsonl"), &links).input()?;
    println!("{} of {} references linked", links.len(), by_ref.len());
    Ok(())
}

pub fn evaluate(config: &PipelineConfig) -> Outcome {
    let references = read_references(existing(required(&config.paths.references, "references")?)?).input()?;
    let records = read_records(existing(required(&config.paths.records, "records")?)?).input()?;
    let gold = read_gold(existing(required(&config.paths.gold, "gold")?)?).input()?;
    let index = match &config.paths.index {
        Some(p) if p.exists() => Index::load(p).input()?,
        _ => Index::build_all(&records).input()?,
    };
    let prepared = pipeline::prepare(&references, &records, &index, &gold, config).input()?;
    let report = pipeline::evaluate(&prepared, &gold, config).input()?;

    let combinations: BTreeSet<_> = match &prepared.blocked.filter {
        Some(f) => f.retained.clone(),
        None => config.blocking.blocking_config().enabled_combinations,
    };
    let curves = Strategy::ALL
        .iter()
        .map(|&strategy| {
            let bc = BlockingConfig {
                strategy,
                cutoff: config.blocking.cutoff,
                enabled_combinations: combinations.clone(),
            };
            blocking_curve(
                &prepared.blocked.references,
                &gold,
                &index,
                &bc,
                &config.text,
                config.blocking.max_cutoff,
            )
        })
        .collect::<Result<Vec<_>, _>>()
        .input()?;

    let dir = outputs(config)?;
    let fingerprint = config.fingerprint();
    let out = Stamped {
        config_fingerprint: &fingerprint,
        body: EvaluateOutput {
            report: &report,
            retained_combinations: combinations.len(),
            curves: &curves,
            match_counts: citelink::eval::match_count_histogram(&gold),
        },
    };
    write_json(dir.join("report.json"), &out).input()?;
    let csv = format!("# config_fingerprint={fingerprint}\n{}", curves_to_csv(&curves));
    std::fs::write(dir.join("curves.csv"), csv).input()?;

    let b = &report.blocking;
    println!(
        "blocking: {} pairs, {} positive, mean {:.1} candidates, recall {:.3}",
        b.pairs,
        b.positive_pairs,
        b.mean_candidates,
        b.recall.unwrap_or(0.0)
    );
    println!(
        "pairs   {} {}: P {:.3} R {:.3} F1 {:.3}",
        report.schema, report.classifier, report.pairs.precision, report.pairs.recall, report.pairs.f1
    );
    println!(
        "top-1   post-blocking: P {:.3} R {:.3} F1 {:.3}",
        report.top1.post_blocking.precision, report.top1.post_blocking.recall, report.top1.post_blocking.f1
    );
    println!(
        "top-1   pipeline:      P {:.3} R {:.3} F1 {:.3}",
        report.top1.pipeline.precision, report.top1.pipeline.recall, report.top1.pipeline.f1
    );
    Ok(())
}

pub fn filter(config: &PipelineConfig) -> Outcome {
    let references = read_references(existing(required(&config.paths.references, "references")?)?).input()?;
    let references = pipeline::prepare_references(&references, &config.text);
    let gold = read_gold(existing(required(&config.paths.gold, "gold")?)?).input()?;
    let index = Index::load(existing(index_path(config)?)?).input()?;
    let report = filter_combinations(
        &references,
        &gold,
        &index,
        config.blocking.combination_threshold,
        config.blocking.filter_mode,
        &config.text,
    )
    .input()?;
    let fingerprint = config.fingerprint();
    write_json(
        outputs(config)?.join("combinations.json"),
        &Stamped {
            config_fingerprint: &fingerprint,
            body: &report,
        },
    )
    .input()?;
    println!(
        "{} of 63 combinations retained at threshold {} ({} inapplicable)",
        report.retained.len(),
        report.threshold,
        report.inapplicable.len()
    );
    Ok(())
}

pub fn validate(config: &PipelineConfig) -> Outcome {
    let references = read_references(existing(required(&config.paths.references, "references")?)?).input()?;
    let records = read_records(existing(required(&config.paths.records, "records")?)?).input()?;
    let gold = read_gold(existing(required(&config.paths.gold, "gold")?)?).input()?;
    let report = validate_corpus(&references, &records, &gold);
    println!(
        "{} references, {} records, {} gold entries",
        report.references, report.records, report.gold_entries
    );
    for v in &report.violations {
        println!("  {}", serde_json::to_string(v).input()?);
    }
    if report.is_valid() {
        println!("corpus is valid");
        Ok(())
    } else {
        Err(Failure::Input(anyhow!("{} violations found", report.violations.len())))
    }
}

pub fn convert(tagged: &Path, records: &Path, gold: &Path, out: &Path) -> Outcome {
    for p in [tagged, records, gold] {
        existing(p.to_path_buf())?;
    }
    let converted = citelink::convert::convert(tagged, records, gold).input()?;
    write_corpus(out, &converted.records, &converted.references, &converted.gold).input()?;
    println!(
        "{} references, {} records, {} gold entries written to {}",
        converted.references.len(),
        converted.records.len(),
        converted.gold.entries.len(),
        out.display()
    );
    Ok(())
}

pub fn synth(
    out: &Path,
    seed: u64,
    records: Option<usize>,
    references: Option<usize>,
    matched: Option<usize>,
) -> Outcome {
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        seed,
        records: records.unwrap_or(defaults.records),
        references: references.unwrap_or(defaults.references),
        matched_references: matched.unwrap_or(defaults.matched_references),
    };
    if config.matched_references > config.references || config.matched_references > config.records {
        return Err(Failure::Config(anyhow!(
            "matched references must not exceed references or records"
        )));
    }
    let corpus = synth::generate(&config);
    corpus.write(out).input()?;
    println!(
        "{} references ({} matched), {} records written to {}",
        corpus.references.len(),
        config.matched_references,
        corpus.records.len(),
        out.display()
    );
    Ok(())
}
