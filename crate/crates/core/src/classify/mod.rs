//! Binary match classifiers and the top-1 decision rule.
//!
//! Two interchangeable learners sit behind [`ClassifierModel`]: a linear
//! max-margin model with calibrated probabilities and a bagged tree
//! ensemble. Both are deterministic given their seed.

pub mod forest;
pub mod linear;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::model::CandidatePair;
use crate::{Error, Result};

pub use forest::{Forest, ForestParams};
pub use linear::{LinearModel, LinearParams};

/// Probabilities strictly above this are labeled "match".
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LargeMarginLinear,
    TreeEnsemble,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::LargeMarginLinear, ClassifierKind::TreeEnsemble];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LargeMarginLinear => "large_margin_linear",
            ClassifierKind::TreeEnsemble => "tree_ensemble",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "large_margin_linear" | "linear" | "svm" | "margin" => Ok(ClassifierKind::LargeMarginLinear),
            "tree_ensemble" | "forest" | "random_forest" | "rf" => Ok(ClassifierKind::TreeEnsemble),
            _ => Err(Error::Invalid(format!("unknown classifier kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub linear: LinearParams,
    pub forest: ForestParams,
}

impl Hyperparameters {
    /// Overrides the seed of both learners.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.linear.seed = seed;
        self.forest.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Parameters {
    LargeMarginLinear(LinearModel),
    TreeEnsemble(Forest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub hyperparameters: Hyperparameters,
    pub schema_version: String,
    pub parameters: Parameters,
    /// Fingerprint of the configuration the model was trained under.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_fingerprint: Option<String>,
}

/// Labeled training rows sharing one feature schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: String,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl Dataset {
    /// Collects featurized, labeled pairs; every pair must carry both.
    pub fn from_pairs(schema: impl Into<String>, pairs: &[CandidatePair]) -> Result<Self> {
        let mut ds = Dataset {
            schema: schema.into(),
            ids: Vec::with_capacity(pairs.len()),
            rows: Vec::with_capacity(pairs.len()),
            labels: Vec::with_capacity(pairs.len()),
        };
        for p in pairs {
            let id = pair_id(p);
            let features = p
                .features
                .clone()
                .ok_or_else(|| Error::Invalid(format!("pair {id} has no features")))?;
            let label = p
                .gold_label
                .ok_or_else(|| Error::Invalid(format!("pair {id} has no gold label")))?;
            ds.ids.push(id);
            ds.rows.push(features);
            ds.labels.push(label);
        }
        Ok(ds)
    }

    pub fn from_vectors(examples: &[(FeatureVector, bool)]) -> Result<Self> {
        let schema = examples.first().map(|(v, _)| v.schema.clone()).unwrap_or_default();
        let mut ds = Dataset {
            schema,
            ids: Vec::new(),
            rows: Vec::new(),
            labels: Vec::new(),
        };
        for (i, (v, label)) in examples.iter().enumerate() {
            if v.schema != ds.schema {
                return Err(Error::SchemaMismatch {
                    expected: ds.schema.clone(),
                    found: v.schema.clone(),
                });
            }
            ds.ids.push(format!("#{i}"));
            ds.rows.push(v.values.clone());
            ds.labels.push(*label);
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    fn check(&self) -> Result<()> {
        let width = self.rows.first().map_or(0, Vec::len);
        for (id, row) in self.ids.iter().zip(&self.rows) {
            if row.len() != width {
                return Err(Error::Invalid(format!(
                    "pair {id} has {} features, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(id.clone()));
            }
        }
        let positives = self.labels.iter().filter(|&&l| l).count();
        if positives == 0 || positives == self.labels.len() {
            return Err(Error::SingleClass { fold: None });
        }
        Ok(())
    }
}

fn pair_id(p: &CandidatePair) -> String {
    format!("({}, {})", p.reference_id, p.record_id)
}

/// Fits a model. Training is single-threaded and deterministic.
pub fn train(data: &Dataset, kind: ClassifierKind, hyperparameters: &Hyperparameters) -> Result<ClassifierModel> {
    data.check()?;
    let parameters = match kind {
        ClassifierKind::LargeMarginLinear => {
            Parameters::LargeMarginLinear(LinearModel::train(&data.rows, &data.labels, &hyperparameters.linear))
        }
        ClassifierKind::TreeEnsemble => {
            Parameters::TreeEnsemble(Forest::train(&data.rows, &data.labels, &hyperparameters.forest))
        }
    };
    Ok(ClassifierModel {
        kind,
        hyperparameters: hyperparameters.clone(),
        schema_version: data.schema.clone(),
        parameters,
        config_fingerprint: None,
    })
}

impl ClassifierModel {
    /// Match probability of a vector built under the training schema.
    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        if features.schema != self.schema_version {
            return Err(Error::SchemaMismatch {
                expected: self.schema_version.clone(),
                found: features.schema.clone(),
            });
        }
        self.predict_row(&features.values)
    }

    /// Like [`predict`](Self::predict) for a bare row; the caller vouches for
    /// the schema.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.width() {
            return Err(Error::Invalid(format!(
                "expected {} features, got {}",
                self.width(),
                row.len()
            )));
        }
        let p = match &self.parameters {
            Parameters::LargeMarginLinear(m) => m.probability(row),
            Parameters::TreeEnsemble(f) => f.probability(row),
        };
        Ok(p.clamp(0.0, 1.0))
    }

    pub fn width(&self) -> usize {
        match &self.parameters {
            Parameters::LargeMarginLinear(m) => m.weights.len(),
            Parameters::TreeEnsemble(f) => f.n_features,
        }
    }

    /// Fills `predicted_probability` on every pair, in parallel.
    pub fn predict_pairs(&self, pairs: &mut [CandidatePair]) -> Result<()> {
        use rayon::prelude::*;
        pairs.par_iter_mut().try_for_each(|p| {
            let row = p
                .features
                .as_deref()
                .ok_or_else(|| Error::Invalid(format!("pair {} has no features", pair_id(p))))?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(pair_id(p)));
            }
            p.predicted_probability = Some(self.predict_row(row)?);
            Ok(())
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Loads a model, refusing it when `expected_schema` differs from the
    /// schema it was trained on.
    pub fn load(path: &Path, expected_schema: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ClassifierModel = serde_json::from_str(&text)?;
        if let Some(expected) = expected_schema {
            if expected != model.schema_version {
                return Err(Error::SchemaMismatch {
                    expected: model.schema_version,
                    found: expected.to_string(),
                });
            }
        }
        Ok(model)
    }
}

pub fn label(probability: f64) -> bool {
    probability > DECISION_THRESHOLD
}

/// Picks the most probable match among one reference's pairs. Only pairs
/// above the decision threshold qualify; ties go to the smaller record id.
pub fn select_top1(pairs: &[CandidatePair]) -> Option<&str> {
    pairs
        .iter()
        .filter_map(|p| p.predicted_probability.filter(|&q| label(q)).map(|q| (q, p.record_id.as_str())))
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)))
        .map(|(_, id)| id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scored(record: &str, p: f64) -> CandidatePair {
        let mut c = CandidatePair::new("r", record);
        c.predicted_probability = Some(p);
        c
    }

    fn separable() -> Dataset {
        // 20 points, class decided by x + y > 1 with a clear margin
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let t = i as f64 / 10.0;
            rows.push(vec![0.1 + 0.3 * t, 0.2 * t]);
            labels.push(false);
            rows.push(vec![0.8 + 0.2 * t, 0.9 - 0.3 * t]);
            labels.push(true);
        }
        Dataset {
            schema: "toy".into(),
            ids: (0..20).map(|i| i.to_string()).collect(),
            rows,
            labels,
        }
    }

    fn accuracy(m: &ClassifierModel, d: &Dataset) -> f64 {
        let ok = d
            .rows
            .iter()
            .zip(&d.labels)
            .filter(|(r, &l)| label(m.predict_row(r).unwrap()) == l)
            .count();
        ok as f64 / d.len() as f64
    }

    #[test]
    fn separable_set_is_learned_by_both_kinds() {
        let d = separable();
        for kind in ClassifierKind::ALL {
            let m = train(&d, kind, &Hyperparameters::default()).unwrap();
            assert_eq!(accuracy(&m, &d), 1.0, "{kind}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let d = separable();
        for kind in ClassifierKind::ALL {
            let a = train(&d, kind, &Hyperparameters::default()).unwrap().to_json().unwrap();
            let b = train(&d, kind, &Hyperparameters::default()).unwrap().to_json().unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let mut d = separable();
        d.labels.iter_mut().for_each(|l| *l = true);
        assert!(matches!(
            train(&d, ClassifierKind::TreeEnsemble, &Hyperparameters::default()),
            Err(Error::SingleClass { fold: None })
        ));
    }

    #[test]
    fn non_finite_feature_names_the_pair() {
        let mut pairs = Vec::new();
        for (i, l) in [true, false, true].into_iter().enumerate() {
            let mut p = CandidatePair::new("ref7", format!("rec{i}"));
            p.features = Some(vec![i as f64]);
            p.gold_label = Some(l);
            pairs.push(p);
        }
        pairs[1].features = Some(vec![f64::NAN]);
        let d = Dataset::from_pairs("toy", &pairs).unwrap();
        match train(&d, ClassifierKind::LargeMarginLinear, &Hyperparameters::default()) {
            Err(Error::NonFinite(id)) => assert_eq!(id, "(ref7, rec1)"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let m = train(&separable(), ClassifierKind::LargeMarginLinear, &Hyperparameters::default()).unwrap();
        let v = FeatureVector {
            schema: "other".into(),
            values: vec![0.0, 0.0],
        };
        assert!(matches!(m.predict(&v), Err(Error::SchemaMismatch { .. })));
        let ok = FeatureVector {
            schema: "toy".into(),
            values: vec![0.9, 0.9],
        };
        assert!(m.predict(&ok).unwrap() > 0.5);
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = train(&separable(), ClassifierKind::TreeEnsemble, &Hyperparameters::default()).unwrap();
        m.save(&path).unwrap();
        assert_eq!(ClassifierModel::load(&path, Some("toy")).unwrap(), m);
        assert!(matches!(
            ClassifierModel::load(&path, Some("v1:A")),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn top1_examples() {
        let pairs = [scored("a", 0.9), scored("b", 0.7), scored("c", 0.3)];
        assert_eq!(select_top1(&pairs), Some("a"));
        assert_eq!(select_top1(&[scored("a", 0.4), scored("b", 0.2)]), None);
        assert_eq!(select_top1(&[scored("z", 0.8), scored("m", 0.8)]), Some("m"));
        assert_eq!(select_top1(&[scored("a", 0.5)]), None);
        assert_eq!(select_top1(&[]), None);
    }

    #[test]
    fn kind_names_parse() {
        for k in ClassifierKind::ALL {
            assert_eq!(k.name().parse::<ClassifierKind>().unwrap(), k);
        }
        assert!("knn".parse::<ClassifierKind>().is_err());
    }

    proptest! {
        #[test]
        fn top1_ignores_order(ps in prop::collection::vec((0u8..6, 0.0f64..1.0), 0..8), rot in 0usize..8) {
            let pairs: Vec<CandidatePair> =
                ps.iter().map(|(r, p)| scored(&format!("rec{r}"), *p)).collect();
            let mut rotated = pairs.clone();
            if !rotated.is_empty() {
                let k = rot % rotated.len();
                rotated.rotate_left(k);
            }
            rotated.reverse();
            let a = select_top1(&pairs);
            prop_assert_eq!(a, select_top1(&rotated));
            if let Some(id) = a {
                prop_assert!(pairs.iter().any(|p| p.record_id == id));
            }
        }

        #[test]
        fn linear_labels_survive_feature_rescaling(
            seed in 0u64..1000,
            column in 0usize..2,
            exponent in -6i32..6,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut d = separable();
            for r in &mut d.rows {
                r[0] += rng.gen_range(-0.05..0.05);
                r[1] += rng.gen_range(-0.05..0.05);
            }
            let factor = 2f64.powi(exponent);
            let mut scaled = d.clone();
            scaled.rows.iter_mut().for_each(|r| r[column] *= factor);
            let hp = Hyperparameters::default();
            let m1 = train(&d, ClassifierKind::LargeMarginLinear, &hp).unwrap();
            let m2 = train(&scaled, ClassifierKind::LargeMarginLinear, &hp).unwrap();
            for (a, b) in d.rows.iter().zip(&scaled.rows) {
                let (p1, p2) = (m1.predict_row(a).unwrap(), m2.predict_row(b).unwrap());
                prop_assert!((0.0..=1.0).contains(&p1));
                prop_assert_eq!(label(p1), label(p2));
            }
        }

        #[test]
        fn forest_probability_is_a_vote_count(trees in 1usize..12) {
            let d = separable();
            let hp = Hyperparameters {
                forest: ForestParams { trees, ..Default::default() },
                ..Default::default()
            };
            let m = train(&d, ClassifierKind::TreeEnsemble, &hp).unwrap();
            for r in &d.rows {
                let votes = m.predict_row(r).unwrap() * trees as f64;
                prop_assert!((votes - votes.round()).abs() < 1e-9);
            }
        }
    }
}
