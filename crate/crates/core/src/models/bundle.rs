//! Self-contained model file: preprocessing config, vocabulary, classifier
//! and label map.
//!
//! Layout (format version 1):
//!
//! ```text
//! predelete-bundle\n
//! format_version=1\n
//! key=value\n ...            model_kind, labels, normalization,
//!                            vocabulary, hyperparameters, metadata
//! end_header\n
//! section*                   u16 name length, name (ASCII),
//!                            u8 kind (0 = f64 array, 1 = UTF-8 text),
//!                            u64 element count, payload
//! sha256                     32 bytes over everything before it
//! ```
//!
//! All integers and floats are little-endian; floats are IEEE-754 binary64
//! so a loaded model reproduces the saved model's predictions bit for bit.
//! Structured header values are single-line JSON.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    DecisionTree, ForestModel, ForestParams, LabelMap, LinearSvmModel, MajorityModel, ModelKind, ModelVariant,
    Prediction, SvmParams, TreeNode,
};
use crate::error::{Error, Result};
use crate::features::{DocumentVector, Vocabulary, VocabularyConfig};
use crate::textprep::{preprocess, NormalizationConfig};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8] = b"predelete-bundle\n";
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub corpus_fingerprint: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub created_at: Option<u64>,
    pub setting: Option<String>,
    pub n_training_examples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    normalization: NormalizationConfig,
    vocabulary: Vocabulary,
    model: ModelVariant,
    labels: LabelMap,
    pub metadata: TrainingMetadata,
}

impl ModelBundle {
    pub fn new(
        normalization: NormalizationConfig,
        vocabulary: Vocabulary,
        model: ModelVariant,
        labels: LabelMap,
        metadata: TrainingMetadata,
    ) -> Result<Self> {
        normalization.validate()?;
        if let Some(dim) = model.dim() {
            if dim != vocabulary.len() {
                return Err(Error::DimensionMismatch {
                    expected: vocabulary.len(),
                    found: dim,
                });
            }
        }
        if model.n_classes() != labels.len() {
            return Err(Error::Bundle(format!(
                "model has {} classes but the label map has {}",
                model.n_classes(),
                labels.len()
            )));
        }
        Ok(ModelBundle {
            normalization,
            vocabulary,
            model,
            labels,
            metadata,
        })
    }

    pub fn normalization(&self) -> &NormalizationConfig {
        &self.normalization
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn model(&self) -> &ModelVariant {
        &self.model
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn vectorize(&self, text: &str) -> DocumentVector {
        self.vocabulary.vectorize(&preprocess(text, &self.normalization))
    }

    pub fn predict_vector(&self, x: &DocumentVector) -> Result<Prediction> {
        self.model.predict(x, &self.labels)
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        self.predict_vector(&self.vectorize(text))
    }

    /// Hex SHA-256 of the serialized bundle (equal to its trailing checksum).
    pub fn fingerprint(&self) -> String {
        let bytes = self.to_bytes();
        hex::encode(&bytes[bytes.len() - CHECKSUM_LEN..])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let json = |v: &dyn erased::Json| v.to_json();
        let vocab_header = serde_json::json!({
            "min_df": self.vocabulary.config().min_df,
            "max_features": self.vocabulary.config().max_features,
            "n_documents": self.vocabulary.n_documents(),
            "size": self.vocabulary.len(),
        });
        let hyperparameters = match &self.model {
            ModelVariant::Majority(_) => serde_json::json!({}),
            ModelVariant::LinearSvm(m) => serde_json::to_value(m.params).unwrap(),
            ModelVariant::Forest(m) => serde_json::to_value(m.params).unwrap(),
        };
        let header = [
            ("format_version", FORMAT_VERSION.to_string()),
            ("model_kind", self.model.kind().as_str().to_string()),
            ("labels", json(&self.labels)),
            ("normalization", json(&self.normalization)),
            ("vocabulary", vocab_header.to_string()),
            ("hyperparameters", hyperparameters.to_string()),
            ("metadata", json(&self.metadata)),
        ];
        for (k, v) in header {
            out.extend_from_slice(format!("{k}={v}\n").as_bytes());
        }
        out.extend_from_slice(b"end_header\n");

        write_text(&mut out, "vocab.terms", &self.vocabulary.terms().join("\n"));
        let df: Vec<f64> = self.vocabulary.document_frequency().iter().map(|&d| d as f64).collect();
        write_floats(&mut out, "vocab.df", &df);

        match &self.model {
            ModelVariant::Majority(m) => {
                let counts: Vec<f64> = m.class_counts.iter().map(|&c| c as f64).collect();
                write_floats(&mut out, "majority.class_counts", &counts);
            }
            ModelVariant::LinearSvm(m) => {
                let shape = [m.dim() as f64, m.n_classes() as f64, m.weights().len() as f64];
                write_floats(&mut out, "svm.shape", &shape);
                let flat: Vec<f64> = m.weights().iter().flatten().copied().collect();
                write_floats(&mut out, "svm.weights", &flat);
                write_floats(&mut out, "svm.biases", m.biases());
            }
            ModelVariant::Forest(m) => {
                let shape = [m.dim() as f64, m.n_classes() as f64, m.trees().len() as f64];
                write_floats(&mut out, "forest.shape", &shape);
                let sizes: Vec<f64> = m.trees().iter().map(|t| t.nodes().len() as f64).collect();
                write_floats(&mut out, "forest.tree_sizes", &sizes);
                let mut flat = Vec::new();
                for tree in m.trees() {
                    for node in tree.nodes() {
                        match node {
                            TreeNode::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            } => {
                                flat.extend([*feature as f64, *threshold, *left as f64, *right as f64]);
                                flat.extend(std::iter::repeat_n(0.0, m.n_classes()));
                            }
                            TreeNode::Leaf { histogram } => {
                                flat.extend([-1.0, 0.0, 0.0, 0.0]);
                                flat.extend_from_slice(histogram);
                            }
                        }
                    }
                }
                write_floats(&mut out, "forest.nodes", &flat);
            }
        }

        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(MAGIC) {
            return Err(if MAGIC.starts_with(bytes) {
                Error::Checksum
            } else {
                Error::Bundle("not a model bundle (bad magic line)".into())
            });
        }
        let after_magic = &bytes[MAGIC.len()..];
        if let Some(end) = after_magic.iter().position(|&b| b == b'\n') {
            let line = std::str::from_utf8(&after_magic[..end]).map_err(|_| Error::Checksum)?;
            let found: u32 = line
                .strip_prefix("format_version=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Bundle(format!("expected format_version line, found {line:?}")))?;
            if found != FORMAT_VERSION {
                return Err(Error::UnsupportedVersion {
                    found,
                    supported: FORMAT_VERSION,
                });
            }
        }
        if bytes.len() < MAGIC.len() + CHECKSUM_LEN {
            return Err(Error::Checksum);
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(Error::Checksum);
        }
        parse_body(&body[MAGIC.len()..])
    }
}

mod erased {
    use serde::Serialize;

    pub trait Json {
        fn to_json(&self) -> String;
    }

    impl<T: Serialize> Json for T {
        fn to_json(&self) -> String {
            serde_json::to_string(self).expect("header values serialize")
        }
    }
}

fn write_section_header(out: &mut Vec<u8>, name: &str, kind: u8, count: usize) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(kind);
    out.extend_from_slice(&(count as u64).to_le_bytes());
}

fn write_floats(out: &mut Vec<u8>, name: &str, values: &[f64]) {
    write_section_header(out, name, 0, values.len());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_text(out: &mut Vec<u8>, name: &str, text: &str) {
    write_section_header(out, name, 1, text.len());
    out.extend_from_slice(text.as_bytes());
}

enum Section<'a> {
    Floats(Vec<f64>),
    Text(&'a str),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Bundle("section runs past end of file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse_body(body: &[u8]) -> Result<ModelBundle> {
    const END: &[u8] = b"end_header\n";
    let header_end = body
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Bundle("missing end_header".into()))?;
    let header_text = std::str::from_utf8(&body[..header_end]).map_err(|_| Error::Bundle("header is not UTF-8".into()))?;
    let mut header: HashMap<&str, &str> = HashMap::new();
    for line in header_text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Bundle(format!("malformed header line {line:?}")))?;
        header.insert(k, v);
    }
    let field = |k: &str| header.get(k).copied().ok_or_else(|| Error::Bundle(format!("missing header field {k}")));
    fn json<T: for<'de> Deserialize<'de>>(key: &str, value: &str) -> Result<T> {
        serde_json::from_str(value).map_err(|e| Error::Bundle(format!("header field {key}: {e}")))
    }

    let mut reader = Reader {
        bytes: &body[header_end + END.len()..],
        pos: 0,
    };
    let mut sections: HashMap<String, Section<'_>> = HashMap::new();
    while reader.pos < reader.bytes.len() {
        let name_len = u16::from_le_bytes(reader.take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(reader.take(name_len)?)
            .map_err(|_| Error::Bundle("section name is not UTF-8".into()))?
            .to_string();
        let kind = reader.take(1)?[0];
        let count = reader.u64()? as usize;
        let section = match kind {
            0 => {
                let raw = reader.take(count.checked_mul(8).ok_or_else(|| Error::Bundle("section too large".into()))?)?;
                Section::Floats(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
            }
            1 => Section::Text(
                std::str::from_utf8(reader.take(count)?).map_err(|_| Error::Bundle(format!("section {name} is not UTF-8")))?,
            ),
            other => return Err(Error::Bundle(format!("section {name} has unknown kind {other}"))),
        };
        sections.insert(name, section);
    }
    let terms_section = sections.remove("vocab.terms");
    let mut floats = |name: &str| match sections.remove(name) {
        Some(Section::Floats(v)) => Ok(v),
        _ => Err(Error::Bundle(format!("missing numeric section {name}"))),
    };
    let as_count = |v: f64| -> Result<u64> {
        if v >= 0.0 && v.fract() == 0.0 && v < 9.007_199_254_740_992e15 {
            Ok(v as u64)
        } else {
            Err(Error::Bundle(format!("expected a count, found {v}")))
        }
    };

    let kind: ModelKind = field("model_kind")?.parse().map_err(Error::Bundle)?;
    let labels: LabelMap = json("labels", field("labels")?)?;
    let normalization: NormalizationConfig = json("normalization", field("normalization")?)?;
    let metadata: TrainingMetadata = json("metadata", field("metadata")?)?;

    #[derive(Deserialize)]
    struct VocabHeader {
        min_df: u64,
        max_features: Option<usize>,
        n_documents: u64,
        size: usize,
    }
    let vh: VocabHeader = json("vocabulary", field("vocabulary")?)?;
    let df = floats("vocab.df")?.into_iter().map(as_count).collect::<Result<Vec<u64>>>()?;
    let terms: Vec<String> = match terms_section {
        Some(Section::Text("")) => Vec::new(),
        Some(Section::Text(t)) => t.split('\n').map(str::to_string).collect(),
        _ => return Err(Error::Bundle("missing section vocab.terms".into())),
    };
    if terms.len() != vh.size {
        return Err(Error::Bundle(format!("header declares {} terms, found {}", vh.size, terms.len())));
    }
    let vocabulary = Vocabulary::from_parts(
        terms,
        df,
        vh.n_documents,
        VocabularyConfig {
            min_df: vh.min_df,
            max_features: vh.max_features,
        },
    )?;

    let hyperparameters = field("hyperparameters")?;
    let model = match kind {
        ModelKind::Majority => {
            let counts = floats("majority.class_counts")?
                .into_iter()
                .map(as_count)
                .collect::<Result<Vec<u64>>>()?;
            ModelVariant::Majority(MajorityModel::from_counts(counts).map_err(|e| Error::Bundle(e.to_string()))?)
        }
        ModelKind::Svm => {
            let params: SvmParams = json("hyperparameters", hyperparameters)?;
            let shape = floats("svm.shape")?;
            let [dim, n_classes, n_sep] = shape_of::<3>(&shape, as_count)?;
            let flat = floats("svm.weights")?;
            if flat.len() != dim * n_sep {
                return Err(Error::Bundle("svm.weights has the wrong length".into()));
            }
            let weights = if dim == 0 {
                vec![Vec::new(); n_sep]
            } else {
                flat.chunks(dim).map(<[f64]>::to_vec).collect()
            };
            let biases = floats("svm.biases")?;
            ModelVariant::LinearSvm(LinearSvmModel::from_parts(dim, n_classes, weights, biases, params)?)
        }
        ModelKind::Forest => {
            let params: ForestParams = json("hyperparameters", hyperparameters)?;
            let shape = floats("forest.shape")?;
            let [dim, n_classes, n_trees] = shape_of::<3>(&shape, as_count)?;
            let sizes = floats("forest.tree_sizes")?;
            let flat = floats("forest.nodes")?;
            if sizes.len() != n_trees {
                return Err(Error::Bundle("forest.tree_sizes has the wrong length".into()));
            }
            let width = 4 + n_classes;
            let mut nodes_iter = flat.chunks_exact(width);
            if flat.len() % width != 0 {
                return Err(Error::Bundle("forest.nodes has the wrong length".into()));
            }
            let mut trees = Vec::with_capacity(n_trees);
            for &size in &sizes {
                let size = as_count(size)? as usize;
                let mut nodes = Vec::with_capacity(size);
                for _ in 0..size {
                    let row = nodes_iter
                        .next()
                        .ok_or_else(|| Error::Bundle("forest.nodes is shorter than declared".into()))?;
                    nodes.push(if row[0] < 0.0 {
                        TreeNode::Leaf {
                            histogram: row[4..].to_vec(),
                        }
                    } else {
                        TreeNode::Split {
                            feature: as_u32(row[0])?,
                            threshold: row[1],
                            left: as_u32(row[2])?,
                            right: as_u32(row[3])?,
                        }
                    });
                }
                trees.push(DecisionTree::from_nodes(nodes, n_classes, dim)?);
            }
            if nodes_iter.next().is_some() {
                return Err(Error::Bundle("forest.nodes is longer than declared".into()));
            }
            ModelVariant::Forest(ForestModel::from_trees(dim, n_classes, trees, params)?)
        }
    };

    ModelBundle::new(normalization, vocabulary, model, labels, metadata)
}

fn as_u32(v: f64) -> Result<u32> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::Bundle(format!("expected an index, found {v}")))
    }
}

fn shape_of<const N: usize>(values: &[f64], as_count: impl Fn(f64) -> Result<u64>) -> Result<[usize; N]> {
    if values.len() != N {
        return Err(Error::Bundle(format!("shape section needs {N} values, found {}", values.len())));
    }
    let mut out = [0usize; N];
    for (slot, &v) in out.iter_mut().zip(values) {
        *slot = as_count(v)? as usize;
    }
    Ok(out)
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    fs::write(path, bundle.to_bytes())?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    ModelBundle::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Vocabulary;
    use crate::models::{train_forest, train_svm, ForestParams, SvmParams};
    use crate::textprep::tokenize;

    fn vocab() -> Vocabulary {
        let docs: Vec<_> = ["red apple", "green apple", "red car", "blue car", "green tree"]
            .iter()
            .map(|d| tokenize(d))
            .collect();
        Vocabulary::fit(&docs, VocabularyConfig { min_df: 1, max_features: None }).unwrap()
    }

    fn bundles() -> Vec<ModelBundle> {
        let v = vocab();
        let texts = ["red apple", "green apple", "red car", "blue car", "green tree", "blue apple"];
        let xs: Vec<_> = texts.iter().map(|t| v.vectorize(&tokenize(t))).collect();
        let ys = vec![0, 0, 1, 1, 2, 0];
        let labels = LabelMap::new(["fruit", "vehicle", "plant"]).unwrap();
        let svm = train_svm(&xs, &ys, 3, &SvmParams { lambda: 0.01, ..Default::default() }).unwrap();
        let forest = train_forest(&xs, &ys, 3, &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        let majority = MajorityModel::from_counts(vec![3, 2, 1]).unwrap();
        [
            ModelVariant::LinearSvm(svm),
            ModelVariant::Forest(forest),
            ModelVariant::Majority(majority),
        ]
        .into_iter()
        .map(|m| {
            ModelBundle::new(
                NormalizationConfig::default(),
                v.clone(),
                m,
                labels.clone(),
                TrainingMetadata {
                    seed: 4,
                    ..Default::default()
                },
            )
            .unwrap()
        })
        .collect()
    }

    #[test]
    fn round_trip_is_exact() {
        for bundle in bundles() {
            let bytes = bundle.to_bytes();
            let back = ModelBundle::from_bytes(&bytes).unwrap();
            assert_eq!(back, bundle);
            assert_eq!(back.to_bytes(), bytes);
            for probe in ["red apple", "nothing known", "blue tree car"] {
                let a = bundle.predict_text(probe).unwrap();
                let b = back.predict_text(probe).unwrap();
                assert_eq!(a.label, b.label);
                let bits = |p: &Prediction| p.scores.iter().map(|s| s.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(&a), bits(&b));
            }
        }
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let bytes = bundles()[0].to_bytes();
        for cut in [1, 10, bytes.len() / 2, bytes.len() - 1] {
            let err = ModelBundle::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Checksum), "cut {cut}: {err:?}");
        }
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0x40;
        assert!(matches!(ModelBundle::from_bytes(&flipped), Err(Error::Checksum)));
    }

    #[test]
    fn future_version_is_named() {
        let bytes = bundles()[2].to_bytes();
        let text = String::from_utf8_lossy(&bytes).replacen("format_version=1", "format_version=7", 1);
        let err = ModelBundle::from_bytes(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedVersion { found: 7, supported: 1 }));
        let msg = err.to_string();
        assert!(msg.contains('7') && msg.contains('1'), "{msg}");
    }

    #[test]
    fn not_a_bundle() {
        assert!(matches!(ModelBundle::from_bytes(b"hello world"), Err(Error::Bundle(_))));
    }

    #[test]
    fn dimension_checked_at_construction() {
        let v = vocab();
        let svm = LinearSvmModel::from_parts(3, 2, vec![vec![0.0; 3]], vec![0.0], SvmParams::default()).unwrap();
        let err = ModelBundle::new(
            NormalizationConfig::default(),
            v,
            ModelVariant::LinearSvm(svm),
            LabelMap::new(["a", "b"]).unwrap(),
            TrainingMetadata::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
