//! End-to-end training: corpus → preprocessing → vocabulary → classifier →
//! [`ModelBundle`], optionally repeated over several seeds with dev-set
//! selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    train_forest, train_majority, train_svm, ClassWeighting, ForestParams, ModelBundle, ModelVariant, SvmParams,
    TrainingMetadata,
};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::features::{fit_vocabulary, DocumentVector, VocabularyConfig};
use crate::setting::Setting;
use crate::textprep::{preprocess, NormalizationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Majority,
    Svm,
    Forest,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Majority => "majority",
            ModelKind::Svm => "svm",
            ModelKind::Forest => "forest",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "majority" => Ok(ModelKind::Majority),
            "svm" => Ok(ModelKind::Svm),
            "forest" | "rf" => Ok(ModelKind::Forest),
            _ => Err(format!("unknown model kind {s:?} (expected majority, svm or forest)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub setting: Setting,
    pub kind: ModelKind,
    pub normalization: NormalizationConfig,
    pub vocabulary: VocabularyConfig,
    pub svm: SvmParams,
    pub forest: ForestParams,
    /// Overrides the seed inside `svm` and `forest`.
    pub seed: u64,
    /// Overrides the class weighting inside `svm` and `forest`.
    pub class_weight: ClassWeighting,
    /// Stored in the bundle metadata; `None` keeps bundles byte-reproducible.
    pub created_at: Option<u64>,
}

impl TrainConfig {
    pub fn new(setting: Setting, kind: ModelKind) -> Self {
        TrainConfig {
            setting,
            kind,
            normalization: NormalizationConfig::default(),
            vocabulary: VocabularyConfig::default(),
            svm: SvmParams::default(),
            forest: ForestParams::default(),
            seed: 0,
            class_weight: ClassWeighting::Uniform,
            created_at: None,
        }
    }
}

/// Trains on the records of `train` that take part in `config.setting`.
pub fn train_bundle(train: &Corpus, config: &TrainConfig) -> Result<ModelBundle> {
    let train = config.setting.select(train);
    if train.is_empty() {
        return Err(Error::Empty(format!("no training records for setting {}", config.setting)));
    }
    let labels = config.setting.label_map();
    let gold = config.setting.gold(&train)?;
    let vocabulary = fit_vocabulary(&train, &config.normalization, config.vocabulary)?;
    let vectors = || -> Vec<DocumentVector> {
        train
            .iter()
            .map(|r| vocabulary.vectorize(&preprocess(&r.text, &config.normalization)))
            .collect()
    };
    log::info!(
        "training {} on {} records ({} setting, {} terms, seed {})",
        config.kind,
        train.len(),
        config.setting,
        vocabulary.len(),
        config.seed
    );
    let model = match config.kind {
        ModelKind::Majority => ModelVariant::Majority(train_majority(&gold, labels.len())?),
        ModelKind::Svm => {
            let params = SvmParams {
                seed: config.seed,
                class_weight: config.class_weight,
                ..config.svm
            };
            ModelVariant::LinearSvm(train_svm(&vectors(), &gold, labels.len(), &params)?)
        }
        ModelKind::Forest => {
            let params = ForestParams {
                seed: config.seed,
                class_weight: config.class_weight,
                ..config.forest
            };
            ModelVariant::Forest(train_forest(&vectors(), &gold, labels.len(), &params)?)
        }
    };
    let metadata = TrainingMetadata {
        corpus_fingerprint: train.fingerprint(),
        seed: config.seed,
        created_at: config.created_at,
        setting: Some(config.setting.as_str().to_string()),
        n_training_examples: train.len(),
    };
    ModelBundle::new(config.normalization.clone(), vocabulary, model, labels, metadata)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerunRecord {
    pub seed: u64,
    pub dev_weighted_f1: f64,
    pub dev_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerunLog {
    pub runs: Vec<RerunRecord>,
    pub selected_seed: u64,
}

impl fmt::Display for RerunLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>20} {:>8} {:>8}", "seed", "dev_acc", "dev_wF1")?;
        for run in &self.runs {
            let mark = if run.seed == self.selected_seed { " *" } else { "" };
            writeln!(
                f,
                "{:>20} {:>8} {:>8}{mark}",
                run.seed,
                crate::eval::fmt3(run.dev_accuracy),
                crate::eval::fmt3(run.dev_weighted_f1)
            )?;
        }
        Ok(())
    }
}

/// Trains `n` models with seeds `config.seed .. config.seed + n` and keeps
/// the one with the best dev weighted F1 (earliest seed on ties).
pub fn train_with_reruns(train: &Corpus, dev: &Corpus, config: &TrainConfig, n: usize) -> Result<(ModelBundle, RerunLog)> {
    if n == 0 {
        return Err(Error::Config("reruns must be at least 1".into()));
    }
    let dev = config.setting.select(dev);
    if dev.is_empty() {
        return Err(Error::Empty(format!("no dev records for setting {}", config.setting)));
    }
    let dev_gold = config.setting.gold(&dev)?;
    let mut best: Option<(ModelBundle, f64)> = None;
    let mut runs = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let seed = config.seed.wrapping_add(i);
        let bundle = train_bundle(train, &TrainConfig { seed, ..config.clone() })?;
        let predicted = dev
            .iter()
            .map(|r| bundle.predict_text(&r.text).map(|p| p.label_index))
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate(&dev_gold, &predicted, bundle.labels())?;
        runs.push(RerunRecord {
            seed,
            dev_weighted_f1: report.weighted_f1,
            dev_accuracy: report.accuracy,
        });
        if best.as_ref().is_none_or(|(_, f1)| report.weighted_f1 > *f1) {
            best = Some((bundle, report.weighted_f1));
        }
    }
    let (bundle, _) = best.expect("n >= 1");
    let log = RerunLog {
        runs,
        selected_seed: bundle.metadata.seed,
    };
    Ok((bundle, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CategoryLabel, DeletionLabel, LabelSource, Provenance, TweetRecord};

    fn corpus() -> Corpus {
        let mut records = Vec::new();
        for i in 0..40 {
            let (text, label) = if i % 2 == 0 {
                (format!("spam offer buy now {i}"), DeletionLabel::Deleted)
            } else {
                (format!("good morning friends {i}"), DeletionLabel::NotDeleted)
            };
            let category = if i % 2 == 0 { CategoryLabel::Spam } else { CategoryLabel::NotDisinfo };
            records.push(
                TweetRecord::new(format!("t{i}"), text)
                    .with_deletion(label)
                    .with_category(category, LabelSource::Manual),
            );
        }
        Corpus::new(records, Provenance::named("toy")).unwrap()
    }

    #[test]
    fn each_kind_learns_the_toy_task() {
        let c = corpus();
        for kind in [ModelKind::Svm, ModelKind::Forest] {
            let mut config = TrainConfig::new(Setting::Deletion, kind);
            config.forest.n_trees = 10;
            let b = train_bundle(&c, &config).unwrap();
            assert_eq!(b.predict_text("buy now").unwrap().label, "deleted", "{kind}");
            assert_eq!(b.predict_text("good morning").unwrap().label, "not_deleted", "{kind}");
        }
        let b = train_bundle(&c, &TrainConfig::new(Setting::Disinfo, ModelKind::Majority)).unwrap();
        assert_eq!(b.predict_text("anything").unwrap().label, "disinfo");
        assert_eq!(b.metadata.n_training_examples, 40);
    }

    #[test]
    fn reruns_select_a_logged_seed() {
        let c = corpus();
        let mut config = TrainConfig::new(Setting::Deletion, ModelKind::Forest);
        config.forest.n_trees = 3;
        config.seed = 7;
        let (bundle, log) = train_with_reruns(&c, &c, &config, 3).unwrap();
        assert_eq!(log.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), [7, 8, 9]);
        let best = log.runs.iter().map(|r| r.dev_weighted_f1).fold(f64::MIN, f64::max);
        let first_best = log.runs.iter().find(|r| r.dev_weighted_f1 == best).unwrap();
        assert_eq!(log.selected_seed, first_best.seed);
        assert_eq!(bundle.metadata.seed, log.selected_seed);
    }

    #[test]
    fn empty_setting_is_an_error() {
        let c = corpus().filter(|r| r.deletion_label == DeletionLabel::Deleted);
        assert!(train_bundle(&c, &TrainConfig::new(Setting::Reason, ModelKind::Svm)).is_err());
    }
}
