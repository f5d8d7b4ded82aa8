//! The three classification tasks and how corpus records map onto their
//! class indices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CategoryLabel, Corpus, DeletionLabel, LabelSource, StratifyOn, TweetRecord};
use crate::error::{Error, Result};
use crate::models::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Will the post be deleted?
    Deletion,
    /// Is it disinformative (any of the four harmful categories)?
    Disinfo,
    /// Which harmful category?
    Reason,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Deletion, Setting::Disinfo, Setting::Reason];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Deletion => "deletion",
            Setting::Disinfo => "disinfo",
            Setting::Reason => "reason",
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Setting::Deletion => &["deleted", "not_deleted"],
            Setting::Disinfo => &["disinfo", "not_disinfo"],
            Setting::Reason => &["hate_speech", "offensive", "rumor", "spam"],
        }
    }

    pub fn label_map(self) -> LabelMap {
        LabelMap::new(self.class_names().iter().copied()).expect("fixed class names are valid")
    }

    pub fn stratify_on(self) -> StratifyOn {
        match self {
            Setting::Deletion => StratifyOn::DeletionLabel,
            Setting::Disinfo | Setting::Reason => StratifyOn::CategoryLabel,
        }
    }

    /// Class index of a record, or `None` when the record does not take
    /// part in this setting. The category settings use manual labels only;
    /// weakly labeled records are left out.
    pub fn class_of(self, record: &TweetRecord) -> Option<usize> {
        match self {
            Setting::Deletion => match record.deletion_label {
                DeletionLabel::Deleted => Some(0),
                DeletionLabel::NotDeleted => Some(1),
                DeletionLabel::Unknown => None,
            },
            Setting::Disinfo => {
                if record.label_source != LabelSource::Manual {
                    return None;
                }
                match record.category_label {
                    CategoryLabel::Unlabeled => None,
                    CategoryLabel::NotDisinfo => Some(1),
                    _ => Some(0),
                }
            }
            Setting::Reason => {
                if record.label_source != LabelSource::Manual {
                    return None;
                }
                CategoryLabel::DISINFORMATIVE
                    .iter()
                    .position(|&c| c == record.category_label)
            }
        }
    }

    /// The records that take part in this setting, in corpus order.
    pub fn select(self, corpus: &Corpus) -> Corpus {
        corpus.filter(|r| self.class_of(r).is_some())
    }

    /// Class indices for every record; errors on the first record that does
    /// not take part in the setting.
    pub fn gold(self, corpus: &Corpus) -> Result<Vec<usize>> {
        corpus
            .iter()
            .map(|r| {
                self.class_of(r).ok_or_else(|| Error::InvalidRecord {
                    id: r.id.clone(),
                    reason: format!(
                        "no {} label (deletion_label={}, category_label={}, label_source={})",
                        self.as_str(),
                        r.deletion_label,
                        r.category_label,
                        r.label_source
                    ),
                })
            })
            .collect()
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "deletion" | "i" => Ok(Setting::Deletion),
            "disinfo" | "ii" => Ok(Setting::Disinfo),
            "reason" | "iii" => Ok(Setting::Reason),
            _ => Err(format!("unknown setting {s:?} (expected deletion, disinfo or reason)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    #[test]
    fn class_mapping() {
        let r = TweetRecord::new("a", "x").with_deletion(DeletionLabel::Deleted);
        assert_eq!(Setting::Deletion.class_of(&r), Some(0));
        assert_eq!(Setting::Disinfo.class_of(&r), None);

        let hs = r.clone().with_category(CategoryLabel::HateSpeech, LabelSource::Manual);
        assert_eq!(Setting::Disinfo.class_of(&hs), Some(0));
        assert_eq!(Setting::Reason.class_of(&hs), Some(0));

        let spam = r.clone().with_category(CategoryLabel::Spam, LabelSource::Manual);
        assert_eq!(Setting::Reason.class_of(&spam), Some(3));

        let weak = TweetRecord::new("b", "y")
            .with_deletion(DeletionLabel::NotDeleted)
            .with_category(CategoryLabel::NotDisinfo, LabelSource::Weak);
        assert_eq!(Setting::Deletion.class_of(&weak), Some(1));
        assert_eq!(Setting::Disinfo.class_of(&weak), None);
        assert_eq!(Setting::Reason.class_of(&weak), None);
    }

    #[test]
    fn gold_requires_membership() {
        let c = Corpus::new(
            vec![
                TweetRecord::new("a", "x").with_deletion(DeletionLabel::Deleted),
                TweetRecord::new("b", "y"),
            ],
            Provenance::named("t"),
        )
        .unwrap();
        assert!(Setting::Deletion.gold(&c).is_err());
        assert_eq!(Setting::Deletion.gold(&Setting::Deletion.select(&c)).unwrap(), vec![0]);
    }

    #[test]
    fn parse_names() {
        for s in Setting::ALL {
            assert_eq!(s.as_str().parse::<Setting>().unwrap(), s);
        }
        assert_eq!("iii".parse::<Setting>().unwrap(), Setting::Reason);
        assert!("other".parse::<Setting>().is_err());
    }
}
