//! Post records, corpus files, weak labelling, splitting and label
//! distribution tables.
//!
//! Every enum value has a fixed lowercase snake-case spelling that is used
//! verbatim in both JSONL and TSV files. Unknown and unlabeled values are
//! written out explicitly, never omitted.

mod io;
mod split;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_corpus, parse_corpus, write_corpus, CorpusFormat};
pub use split::{largest_remainder, stratified_split, Fractions, SplitResult, SplitSpec, StratifyOn};

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Position in declaration order; stable across releases.
            pub fn ordinal(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).unwrap()
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} value {:?} (expected one of: {})",
                        stringify!($name),
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum!(
    /// Whether the post was later removed from the platform.
    DeletionLabel {
        Deleted => "deleted",
        NotDeleted => "not_deleted",
        Unknown => "unknown",
    }
);

string_enum!(
    /// Fine-grained content category. The four harmful categories are
    /// collectively called disinformative.
    CategoryLabel {
        NotDisinfo => "not_disinfo",
        HateSpeech => "hate_speech",
        Offensive => "offensive",
        Rumor => "rumor",
        Spam => "spam",
        Unlabeled => "unlabeled",
    }
);

string_enum!(
    LabelSource {
        Manual => "manual",
        Weak => "weak",
        None => "none",
    }
);

string_enum!(
    /// Account status of the post's author at analysis time.
    UserStatus {
        Suspended => "suspended",
        AccountDeleted => "account_deleted",
        ActivePrivate => "active_private",
        ActivePublic => "active_public",
        Unknown => "unknown",
    }
);

impl CategoryLabel {
    pub const DISINFORMATIVE: [CategoryLabel; 4] = [
        CategoryLabel::HateSpeech,
        CategoryLabel::Offensive,
        CategoryLabel::Rumor,
        CategoryLabel::Spam,
    ];

    pub fn is_disinformative(self) -> bool {
        Self::DISINFORMATIVE.contains(&self)
    }
}

/// Engagement and markup flags carried by a post.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attributes {
    pub has_hashtag: bool,
    pub has_url: bool,
    pub has_mention: bool,
    pub is_reply: bool,
    pub is_retweet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attribute {
    Hashtag,
    Url,
    Mention,
    Reply,
    Retweet,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Hashtag,
        Attribute::Url,
        Attribute::Mention,
        Attribute::Reply,
        Attribute::Retweet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Hashtag => "Hashtags",
            Attribute::Url => "URLs",
            Attribute::Mention => "User Mentions",
            Attribute::Reply => "Replies",
            Attribute::Retweet => "Retweets",
        }
    }
}

impl Attributes {
    pub fn get(&self, attr: Attribute) -> bool {
        match attr {
            Attribute::Hashtag => self.has_hashtag,
            Attribute::Url => self.has_url,
            Attribute::Mention => self.has_mention,
            Attribute::Reply => self.is_reply,
            Attribute::Retweet => self.is_retweet,
        }
    }
}

/// One post with its labels.
///
/// `user_id` and `target` are optional extension columns: an opaque author
/// key used only by the account-status analysis, and a free-text annotation
/// of the entity a hateful post is aimed at.
#[derive(Debug, Clone, PartialEq)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    pub deletion_label: DeletionLabel,
    pub category_label: CategoryLabel,
    pub label_source: LabelSource,
    pub attributes: Attributes,
    pub user_status: UserStatus,
    pub user_id: Option<String>,
    pub target: Option<String>,
}

impl TweetRecord {
    /// Minimal record with unknown labels, mostly useful in tests and for
    /// drafts that are about to be scored.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        TweetRecord {
            id: id.into(),
            text: text.into(),
            deletion_label: DeletionLabel::Unknown,
            category_label: CategoryLabel::Unlabeled,
            label_source: LabelSource::None,
            attributes: Attributes::default(),
            user_status: UserStatus::Unknown,
            user_id: None,
            target: None,
        }
    }

    pub fn with_deletion(mut self, label: DeletionLabel) -> Self {
        self.deletion_label = label;
        self
    }

    pub fn with_category(mut self, label: CategoryLabel, source: LabelSource) -> Self {
        self.category_label = label;
        self.label_source = source;
        self
    }

    /// Checks the per-record invariants.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidRecord {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.is_empty() {
            return fail("id is empty");
        }
        if self.text.trim().is_empty() {
            return fail("text is empty after trimming whitespace");
        }
        if self.category_label != CategoryLabel::Unlabeled && self.label_source == LabelSource::None {
            return fail("a category label requires label_source manual or weak");
        }
        if self.label_source == LabelSource::Weak && self.category_label != CategoryLabel::NotDisinfo {
            return fail("weak labels may only assign not_disinfo");
        }
        Ok(())
    }
}

/// Where a corpus came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub loaded_at: Option<u64>,
}

impl Provenance {
    pub fn named(source: impl Into<String>) -> Self {
        Provenance {
            source: source.into(),
            loaded_at: None,
        }
    }
}

/// An ordered collection of records with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<TweetRecord>,
    pub provenance: Provenance,
}

impl Corpus {
    /// Validates every record and id uniqueness.
    pub fn new(records: Vec<TweetRecord>, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            record.validate()?;
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: record.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Corpus { records, provenance })
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TweetRecord> {
        self.records.iter()
    }

    pub fn into_records(self) -> Vec<TweetRecord> {
        self.records
    }

    /// Sub-corpus of the records matching `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&TweetRecord) -> bool) -> Corpus {
        Corpus {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Drops records whose text exactly repeats an earlier record's text.
    pub fn dedup_texts(&self) -> Corpus {
        let mut seen = HashSet::new();
        self.filter(|r| seen.insert(r.text.clone()))
    }

    /// Content fingerprint: SHA-256 over ids, texts and labels in order.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for r in &self.records {
            for part in [
                r.id.as_str(),
                r.text.as_str(),
                r.deletion_label.as_str(),
                r.category_label.as_str(),
                r.label_source.as_str(),
            ] {
                hasher.update((part.len() as u64).to_le_bytes());
                hasher.update(part.as_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a TweetRecord;
    type IntoIter = std::slice::Iter<'a, TweetRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakLabelRule {
    /// Non-deleted posts nobody annotated are taken to be not disinformative.
    NonDeletedAsNotDisinfo,
}

/// Applies a weak-labelling rule. Idempotent; manually labelled records are
/// never touched.
pub fn apply_weak_labels(corpus: &Corpus, rule: WeakLabelRule) -> Corpus {
    match rule {
        WeakLabelRule::NonDeletedAsNotDisinfo => {
            let records = corpus
                .records
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    if r.deletion_label == DeletionLabel::NotDeleted
                        && r.category_label == CategoryLabel::Unlabeled
                    {
                        r.category_label = CategoryLabel::NotDisinfo;
                        r.label_source = LabelSource::Weak;
                    }
                    r
                })
                .collect();
            Corpus {
                records,
                provenance: corpus.provenance.clone(),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionAxis {
    DeletionLabel,
    CategoryLabel,
    LabelSource,
}

impl FromStr for DistributionAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "deletion" | "deletion_label" => Ok(DistributionAxis::DeletionLabel),
            "category" | "category_label" => Ok(DistributionAxis::CategoryLabel),
            "source" | "label_source" => Ok(DistributionAxis::LabelSource),
            other => Err(format!("unknown axis {other:?} (expected deletion, category or source)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRow {
    pub value: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub total: usize,
    pub rows: Vec<DistributionRow>,
}

/// Counts per label value along one axis. Values that never occur are left
/// out; rows follow the enum's declaration order.
pub fn distribution_report(corpus: &Corpus, axis: DistributionAxis) -> DistributionReport {
    fn tally<T: Copy + Ord + fmt::Display>(
        all: &[T],
        values: impl Iterator<Item = T>,
        total: usize,
    ) -> Vec<DistributionRow> {
        let mut counts = vec![0usize; all.len()];
        for v in values {
            let i = all.iter().position(|a| *a == v).unwrap();
            counts[i] += 1;
        }
        all.iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0)
            .map(|(v, count)| DistributionRow {
                value: v.to_string(),
                count,
                percent: 100.0 * count as f64 / total as f64,
            })
            .collect()
    }

    let total = corpus.len();
    let rows = match axis {
        DistributionAxis::DeletionLabel => {
            tally(DeletionLabel::ALL, corpus.iter().map(|r| r.deletion_label), total)
        }
        DistributionAxis::CategoryLabel => {
            tally(CategoryLabel::ALL, corpus.iter().map(|r| r.category_label), total)
        }
        DistributionAxis::LabelSource => {
            tally(LabelSource::ALL, corpus.iter().map(|r| r.label_source), total)
        }
    };
    DistributionReport { total, rows }
}

impl fmt::Display for DistributionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.value.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>8}  {:>7}", "value", "count", "percent")?;
        for row in &self.rows {
            writeln!(f, "{:<width$}  {:>8}  {:>6.1}%", row.value, row.count, row.percent)?;
        }
        write!(f, "{:<width$}  {:>8}", "total", self.total)
    }
}
