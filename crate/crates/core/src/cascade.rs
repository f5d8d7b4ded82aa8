//! Three-stage check of a draft post: deletion risk, disinformative or not,
//! and (only for disinformative drafts) the likely reason.
//!
//! Stages 1 and 2 always run on the raw text, each with its own
//! preprocessing. Stage 3 runs only when stage 2 says `disinfo`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{Vocabulary, VocabularyConfig};
use crate::models::{
    load_bundle, save_bundle, LabelMap, LinearSvmModel, ModelBundle, ModelVariant, Prediction, SvmParams,
    TrainingMetadata,
};
use crate::setting::Setting;
use crate::textprep::NormalizationConfig;

/// Decision margins for the two binary stages. A stage answers with its
/// positive class (`deleted`, `disinfo`) when
/// `score[positive] - score[negative] >= threshold`; 0 reproduces argmax.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub deletion: f64,
    pub disinfo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub deletion: Verdict,
    pub disinfo: Verdict,
    pub reason: Option<Verdict>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeFingerprints {
    pub deletion: String,
    pub disinfo: String,
    pub reason: String,
    /// Over the three bundle fingerprints and the thresholds.
    pub cascade: String,
}

#[derive(Debug, Clone)]
pub struct CascadeBundle {
    deletion: ModelBundle,
    disinfo: ModelBundle,
    reason: ModelBundle,
    thresholds: Thresholds,
    fingerprints: CascadeFingerprints,
}

fn require_labels(stage: &str, bundle: &ModelBundle, setting: Setting) -> Result<()> {
    let expected = setting.label_map();
    if bundle.labels() != &expected {
        return Err(Error::Cascade(format!(
            "{stage} model has classes {:?}, expected {:?}",
            bundle.labels().names(),
            expected.names()
        )));
    }
    Ok(())
}

impl CascadeBundle {
    /// Checks that each bundle has the class set of its stage.
    pub fn new(deletion: ModelBundle, disinfo: ModelBundle, reason: ModelBundle, thresholds: Thresholds) -> Result<Self> {
        require_labels("deletion", &deletion, Setting::Deletion)?;
        require_labels("disinfo", &disinfo, Setting::Disinfo)?;
        require_labels("reason", &reason, Setting::Reason)?;
        if !(thresholds.deletion.is_finite() && thresholds.disinfo.is_finite()) {
            return Err(Error::Cascade("thresholds must be finite".into()));
        }
        let (d, i, r) = (deletion.fingerprint(), disinfo.fingerprint(), reason.fingerprint());
        let mut h = Sha256::new();
        for part in [&d, &i, &r] {
            h.update(part.as_bytes());
            h.update(b"\n");
        }
        h.update(thresholds.deletion.to_le_bytes());
        h.update(thresholds.disinfo.to_le_bytes());
        let fingerprints = CascadeFingerprints {
            deletion: d,
            disinfo: i,
            reason: r,
            cascade: hex::encode(h.finalize()),
        };
        Ok(CascadeBundle {
            deletion,
            disinfo,
            reason,
            thresholds,
            fingerprints,
        })
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn fingerprints(&self) -> &CascadeFingerprints {
        &self.fingerprints
    }

    pub fn stage(&self, setting: Setting) -> &ModelBundle {
        match setting {
            Setting::Deletion => &self.deletion,
            Setting::Disinfo => &self.disinfo,
            Setting::Reason => &self.reason,
        }
    }

    pub fn check(&self, text: &str) -> Result<CheckResult> {
        if text.trim().is_empty() {
            return Err(Error::Empty("text is empty".into()));
        }
        let deletion = binary_verdict(self.deletion.predict_text(text)?, self.deletion.labels(), self.thresholds.deletion);
        let disinfo = binary_verdict(self.disinfo.predict_text(text)?, self.disinfo.labels(), self.thresholds.disinfo);
        let reason = if disinfo.label == "disinfo" {
            let p = self.reason.predict_text(text)?;
            Some(Verdict {
                score: p.score(),
                label: p.label,
            })
        } else {
            None
        };

        let mut warnings = Vec::new();
        if deletion.label == "deleted" {
            warnings.push(Warning {
                code: "DELETE_RISK".into(),
                message: "This post resembles posts that were later deleted.".into(),
            });
        }
        if let Some(r) = &reason {
            let (code, message) = match r.label.as_str() {
                "hate_speech" => ("WARN_HS", "This post may be read as hate speech."),
                "offensive" => ("WARN_OFFENSIVE", "This post may be read as offensive."),
                "rumor" => ("WARN_RUMOR", "This post may spread a rumor."),
                _ => ("WARN_SPAM", "This post may be read as spam."),
            };
            warnings.push(Warning {
                code: code.into(),
                message: message.into(),
            });
        }
        Ok(CheckResult {
            deletion,
            disinfo,
            reason,
            warnings,
        })
    }
}

/// Class 0 is the positive class of both binary stages.
fn binary_verdict(p: Prediction, labels: &LabelMap, threshold: f64) -> Verdict {
    let positive = p.scores[0] - p.scores[1] >= threshold;
    let index = if positive { 0 } else { 1 };
    Verdict {
        label: labels.name(index).to_string(),
        score: p.scores[index],
    }
}

/// Parsed cascade manifest: `key=value` lines, `#` comments, blank lines
/// ignored. Keys: `deletion`, `disinfo`, `reason` (bundle paths, relative
/// to the manifest's directory) and optional `deletion_threshold`,
/// `disinfo_threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub deletion: PathBuf,
    pub disinfo: PathBuf,
    pub reason: PathBuf,
    pub thresholds: Thresholds,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut values: HashMap<&str, &str> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("manifest", i + 1, "expected key=value"))?;
            let (k, v) = (k.trim(), v.trim());
            if !matches!(k, "deletion" | "disinfo" | "reason" | "deletion_threshold" | "disinfo_threshold") {
                return Err(Error::parse("manifest", i + 1, format!("unknown key {k:?}")));
            }
            if values.insert(k, v).is_some() {
                return Err(Error::parse("manifest", i + 1, format!("duplicate key {k:?}")));
            }
        }
        let path = |k: &str| -> Result<PathBuf> {
            let v = values
                .get(k)
                .ok_or_else(|| Error::Cascade(format!("manifest is missing {k}")))?;
            Ok(base.join(v))
        };
        let threshold = |k: &str| -> Result<f64> {
            match values.get(k) {
                None => Ok(0.0),
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|t| t.is_finite())
                    .ok_or_else(|| Error::Cascade(format!("{k} must be a finite number, found {v:?}"))),
            }
        };
        Ok(Manifest {
            deletion: path("deletion")?,
            disinfo: path("disinfo")?,
            reason: path("reason")?,
            thresholds: Thresholds {
                deletion: threshold("deletion_threshold")?,
                disinfo: threshold("disinfo_threshold")?,
            },
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Manifest::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_text(&self, base: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        format!(
            "deletion={}\ndisinfo={}\nreason={}\ndeletion_threshold={}\ndisinfo_threshold={}\n",
            rel(&self.deletion),
            rel(&self.disinfo),
            rel(&self.reason),
            self.thresholds.deletion,
            self.thresholds.disinfo
        )
    }
}

pub fn load_cascade(manifest: &Path) -> Result<CascadeBundle> {
    let m = Manifest::read(manifest)?;
    CascadeBundle::new(
        load_bundle(&m.deletion)?,
        load_bundle(&m.disinfo)?,
        load_bundle(&m.reason)?,
        m.thresholds,
    )
}

/// Writes the three bundles as `deletion.bundle`, `disinfo.bundle`,
/// `reason.bundle` plus `cascade.manifest` into `dir`, returning the
/// manifest path.
pub fn save_cascade(cascade: &CascadeBundle, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        deletion: dir.join("deletion.bundle"),
        disinfo: dir.join("disinfo.bundle"),
        reason: dir.join("reason.bundle"),
        thresholds: cascade.thresholds,
    };
    save_bundle(&cascade.deletion, &manifest.deletion)?;
    save_bundle(&cascade.disinfo, &manifest.disinfo)?;
    save_bundle(&cascade.reason, &manifest.reason)?;
    let path = dir.join("cascade.manifest");
    fs::write(&path, manifest.to_text(dir))?;
    Ok(path)
}

/// Hand-built cascade for tests and demos.
///
/// The vocabulary is three terms, `cure`, `vermin` and `winner`. A text
/// containing exactly one of them vectorizes to a unit vector on that term;
/// any other text is the zero vector. Both binary stages use weight 2 on
/// every term with bias −0.5, so a trigger gives margin +1.5 and anything
/// else −0.5. The reason stage maps `vermin` → hate_speech, `cure` → rumor
/// and `winner` → spam, each with margin 1.5.
pub mod fixture {
    use super::*;

    pub const HS_TRIGGER_TEXT: &str = "you are all vermin";
    pub const BENIGN_TEXT: &str = "good morning everyone";
    pub const TERMS: [&str; 3] = ["cure", "vermin", "winner"];

    fn vocabulary() -> Vocabulary {
        Vocabulary::from_parts(
            TERMS.iter().map(|t| t.to_string()).collect(),
            vec![1; TERMS.len()],
            TERMS.len() as u64,
            VocabularyConfig {
                min_df: 1,
                max_features: None,
            },
        )
        .expect("fixture vocabulary is valid")
    }

    fn bundle(setting: Setting, weights: Vec<Vec<f64>>, biases: Vec<f64>) -> ModelBundle {
        let labels = setting.label_map();
        let model = LinearSvmModel::from_parts(TERMS.len(), labels.len(), weights, biases, SvmParams::default())
            .expect("fixture weights are valid");
        ModelBundle::new(
            NormalizationConfig::default(),
            vocabulary(),
            ModelVariant::LinearSvm(model),
            labels,
            TrainingMetadata {
                corpus_fingerprint: "fixture".into(),
                setting: Some(setting.as_str().into()),
                ..Default::default()
            },
        )
        .expect("fixture bundle is valid")
    }

    pub fn cascade() -> CascadeBundle {
        let binary = || (vec![vec![2.0; 3]], vec![-0.5]);
        let (w, b) = binary();
        let deletion = bundle(Setting::Deletion, w, b);
        let (w, b) = binary();
        let disinfo = bundle(Setting::Disinfo, w, b);
        let reason = bundle(
            Setting::Reason,
            vec![
                vec![0.0, 2.0, 0.0],
                vec![0.0, 0.0, 0.0],
                vec![2.0, 0.0, 0.0],
                vec![0.0, 0.0, 2.0],
            ],
            vec![-0.5, -0.2, -0.5, -0.5],
        );
        CascadeBundle::new(deletion, disinfo, reason, Thresholds::default()).expect("fixture cascade is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(r: &CheckResult) -> Vec<&str> {
        r.warnings.iter().map(|w| w.code.as_str()).collect()
    }

    #[test]
    fn trigger_and_benign() {
        let c = fixture::cascade();
        let r = c.check(fixture::HS_TRIGGER_TEXT).unwrap();
        assert_eq!(r.deletion, Verdict { label: "deleted".into(), score: 1.5 });
        assert_eq!(r.disinfo.label, "disinfo");
        assert_eq!(r.reason, Some(Verdict { label: "hate_speech".into(), score: 1.5 }));
        assert_eq!(codes(&r), ["DELETE_RISK", "WARN_HS"]);

        let r = c.check(fixture::BENIGN_TEXT).unwrap();
        assert_eq!(r.deletion, Verdict { label: "not_deleted".into(), score: 0.5 });
        assert_eq!(r.disinfo.label, "not_disinfo");
        assert_eq!(r.reason, None);
        assert!(r.warnings.is_empty());

        assert_eq!(codes(&c.check("free cure for all").unwrap()), ["DELETE_RISK", "WARN_RUMOR"]);
        assert_eq!(codes(&c.check("#winner @x").unwrap()), ["DELETE_RISK", "WARN_SPAM"]);
        assert!(c.check("  ").is_err());
    }

    #[test]
    fn thresholds_shift_decisions() {
        let base = fixture::cascade();
        let c = CascadeBundle::new(
            base.stage(Setting::Deletion).clone(),
            base.stage(Setting::Disinfo).clone(),
            base.stage(Setting::Reason).clone(),
            Thresholds { deletion: 4.0, disinfo: -2.0 },
        )
        .unwrap();
        // trigger margins are 3.0 (deletion: below 4) and benign −1.0 (disinfo: above −2)
        let r = c.check(fixture::BENIGN_TEXT).unwrap();
        assert_eq!(r.deletion.label, "not_deleted");
        assert_eq!(r.disinfo.label, "disinfo");
        assert_eq!(r.reason.as_ref().unwrap().label, "offensive");
        assert_eq!(codes(&r), ["WARN_OFFENSIVE"]);
        assert_ne!(c.fingerprints().cascade, base.fingerprints().cascade);
    }

    #[test]
    fn wrong_stage_rejected() {
        let f = fixture::cascade();
        let err = CascadeBundle::new(
            f.stage(Setting::Disinfo).clone(),
            f.stage(Setting::Disinfo).clone(),
            f.stage(Setting::Reason).clone(),
            Thresholds::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cascade(_)));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = fixture::cascade();
        let path = save_cascade(&c, dir.path()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("deletion=deletion.bundle"));
        let loaded = load_cascade(&path).unwrap();
        assert_eq!(loaded.fingerprints(), c.fingerprints());
        assert_eq!(
            loaded.check(fixture::HS_TRIGGER_TEXT).unwrap(),
            c.check(fixture::HS_TRIGGER_TEXT).unwrap()
        );
    }

    #[test]
    fn manifest_parsing() {
        let m = Manifest::parse(
            "# models\ndeletion = a.bundle\ndisinfo=b.bundle\nreason=/abs/c.bundle\ndisinfo_threshold=0.25\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(m.deletion, Path::new("/base/a.bundle"));
        assert_eq!(m.reason, Path::new("/abs/c.bundle"));
        assert_eq!(m.thresholds, Thresholds { deletion: 0.0, disinfo: 0.25 });
        assert!(Manifest::parse("deletion=a\n", Path::new(".")).is_err());
        assert!(Manifest::parse("bogus=1\n", Path::new(".")).is_err());
        assert!(Manifest::parse("deletion=a\ndisinfo=b\nreason=c\ndeletion_threshold=x\n", Path::new(".")).is_err());
    }

    proptest::proptest! {
        #[test]
        fn reason_present_iff_disinfo(words in proptest::collection::vec("[a-z]{1,7}|cure|vermin|winner", 1..6)) {
            let c = fixture::cascade();
            let r = c.check(&words.join(" ")).unwrap();
            proptest::prop_assert_eq!(r.reason.is_some(), r.disinfo.label == "disinfo");
            proptest::prop_assert_eq!(
                r.warnings.is_empty(),
                r.deletion.label != "deleted" && r.disinfo.label != "disinfo"
            );
        }
    }
}
