//! Corpus characterization: attribute percentages per slice, account
//! status of the users behind harmful posts, and target frequency counts.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::corpus::{Attribute, CategoryLabel, Corpus, DeletionLabel, UserStatus};
use crate::error::{Error, Result};
use crate::eval::round_half_even;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceAttributes {
    pub name: String,
    pub n: usize,
    /// Percent of records with each flag, in [`Attribute::ALL`] order,
    /// rounded to 3 decimals.
    pub percents: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeReport {
    pub slices: Vec<SliceAttributes>,
}

pub fn attribute_distribution(slices: &[(&str, &Corpus)]) -> Result<AttributeReport> {
    if slices.is_empty() {
        return Err(Error::Empty("no slices given".into()));
    }
    let mut out = Vec::with_capacity(slices.len());
    for (name, corpus) in slices {
        if corpus.is_empty() {
            return Err(Error::Empty(format!("slice {name:?} has no records")));
        }
        let n = corpus.len();
        let percents = Attribute::ALL
            .iter()
            .map(|&a| {
                let count = corpus.iter().filter(|r| r.attributes.get(a)).count();
                (a.name().to_string(), round_half_even(100.0 * count as f64 / n as f64, 3))
            })
            .collect();
        out.push(SliceAttributes {
            name: name.to_string(),
            n,
            percents,
        });
    }
    Ok(AttributeReport { slices: out })
}

/// Non-deleted, deleted, and disinformative (any harmful category) slices.
pub fn standard_slices(corpus: &Corpus) -> Vec<(String, Corpus)> {
    vec![
        (
            "Non-Deleted".to_string(),
            corpus.filter(|r| r.deletion_label == DeletionLabel::NotDeleted),
        ),
        (
            "Deleted".to_string(),
            corpus.filter(|r| r.deletion_label == DeletionLabel::Deleted),
        ),
        (
            "Disinformative".to_string(),
            corpus.filter(|r| r.category_label.is_disinformative()),
        ),
    ]
}

impl fmt::Display for AttributeReport {
    /// Whole percents, one column per slice.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = Attribute::ALL.iter().map(|a| a.name().len()).max().unwrap();
        let cols: Vec<usize> = self.slices.iter().map(|s| s.name.len().max(5)).collect();
        write!(f, "{:<width$}", "Attribute")?;
        for (s, w) in self.slices.iter().zip(&cols) {
            write!(f, "  {:>w$}", s.name)?;
        }
        writeln!(f)?;
        write!(f, "{:<width$}", "n")?;
        for (s, w) in self.slices.iter().zip(&cols) {
            write!(f, "  {:>w$}", s.n)?;
        }
        writeln!(f)?;
        for (i, a) in Attribute::ALL.iter().enumerate() {
            write!(f, "{:<width$}", a.name())?;
            for (s, w) in self.slices.iter().zip(&cols) {
                let cell = format!("{}%", round_half_even(s.percents[i].1, 0));
                write!(f, "  {cell:>w$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Statuses in report column order.
pub const STATUS_COLUMNS: [UserStatus; 5] = [
    UserStatus::Suspended,
    UserStatus::AccountDeleted,
    UserStatus::ActivePrivate,
    UserStatus::ActivePublic,
    UserStatus::Unknown,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatusRow {
    /// A category name, or `all_disinformative` for the overall row.
    pub category: String,
    pub users: usize,
    /// Unique users per status, in [`STATUS_COLUMNS`] order.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatusReport {
    pub rows: Vec<StatusRow>,
    /// Harmful posts that carry no user id and so are not attributed.
    pub records_without_user: usize,
    /// Users whose posts disagree on account status; the first post's
    /// status is used.
    pub conflicting_users: usize,
}

pub const OVERALL_ROW: &str = "all_disinformative";

/// Counts the unique users who authored at least one post in each harmful
/// category. A user appears once per category they posted in, and once in
/// the overall row. A user's status is taken from their first post.
pub fn user_status_breakdown(corpus: &Corpus) -> StatusReport {
    let mut status_of: HashMap<&str, UserStatus> = HashMap::new();
    let mut conflicting: std::collections::HashSet<&str> = Default::default();
    let mut members: Vec<std::collections::BTreeSet<&str>> = vec![Default::default(); CategoryLabel::DISINFORMATIVE.len()];
    let mut overall: std::collections::BTreeSet<&str> = Default::default();
    let mut records_without_user = 0;
    for r in corpus {
        let Some(c) = CategoryLabel::DISINFORMATIVE.iter().position(|&c| c == r.category_label) else {
            continue;
        };
        let Some(user) = r.user_id.as_deref() else {
            records_without_user += 1;
            continue;
        };
        let first = *status_of.entry(user).or_insert(r.user_status);
        if first != r.user_status {
            conflicting.insert(user);
        }
        members[c].insert(user);
        overall.insert(user);
    }
    let row = |category: &str, users: &std::collections::BTreeSet<&str>| {
        let mut counts = vec![0; STATUS_COLUMNS.len()];
        for u in users {
            let s = status_of[u];
            counts[STATUS_COLUMNS.iter().position(|&c| c == s).unwrap()] += 1;
        }
        StatusRow {
            category: category.to_string(),
            users: users.len(),
            counts,
        }
    };
    let mut rows: Vec<StatusRow> = CategoryLabel::DISINFORMATIVE
        .iter()
        .zip(&members)
        .map(|(c, users)| row(c.as_str(), users))
        .collect();
    rows.push(row(OVERALL_ROW, &overall));
    StatusReport {
        rows,
        records_without_user,
        conflicting_users: conflicting.len(),
    }
}

impl fmt::Display for StatusReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = OVERALL_ROW.len();
        write!(f, "{:<width$}  {:>6}", "category", "users")?;
        for s in STATUS_COLUMNS {
            write!(f, "  {:>20}", s.as_str())?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "{:<width$}  {:>6}", row.category, row.users)?;
            for &c in &row.counts {
                let pct = if row.users == 0 {
                    0.0
                } else {
                    100.0 * c as f64 / row.users as f64
                };
                let cell = format!("{c} ({}%)", round_half_even(pct, 0));
                write!(f, "  {cell:>20}")?;
            }
            writeln!(f)?;
        }
        if self.records_without_user > 0 {
            writeln!(f, "posts without a user id: {}", self.records_without_user)?;
        }
        if self.conflicting_users > 0 {
            writeln!(f, "users with conflicting statuses: {}", self.conflicting_users)?;
        }
        Ok(())
    }
}

/// Exact-string counts of the optional `target` column, most frequent
/// first (ties alphabetical). With `category` set only those posts count.
pub fn target_frequencies(corpus: &Corpus, category: Option<CategoryLabel>) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in corpus {
        if category.is_some_and(|c| c != r.category_label) {
            continue;
        }
        if let Some(t) = r.target.as_deref().map(str::trim).filter(|t| !t.is_empty()) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelSource, Provenance, TweetRecord};

    fn corpus(records: Vec<TweetRecord>) -> Corpus {
        Corpus::new(records, Provenance::named("t")).unwrap()
    }

    fn harmful(id: &str, user: &str, cat: CategoryLabel, status: UserStatus) -> TweetRecord {
        let mut r = TweetRecord::new(id, "x")
            .with_deletion(DeletionLabel::Deleted)
            .with_category(cat, LabelSource::Manual);
        r.user_id = Some(user.to_string());
        r.user_status = status;
        r
    }

    #[test]
    fn every_record_with_url() {
        let mut records: Vec<TweetRecord> = (0..3).map(|i| TweetRecord::new(i.to_string(), "x")).collect();
        for r in &mut records {
            r.attributes.has_url = true;
        }
        records[0].attributes.is_retweet = true;
        let c = corpus(records);
        let report = attribute_distribution(&[("all", &c)]).unwrap();
        let p = &report.slices[0].percents;
        assert_eq!(p[1], ("URLs".to_string(), 100.0));
        assert_eq!(p[4].1, 33.333);
        assert!(report.to_string().contains("100%"));
    }

    #[test]
    fn one_of_two_retweets() {
        let mut records: Vec<TweetRecord> = (0..2).map(|i| TweetRecord::new(i.to_string(), "x")).collect();
        records[1].attributes.is_retweet = true;
        let c = corpus(records);
        let report = attribute_distribution(&[("s", &c)]).unwrap();
        assert_eq!(report.slices[0].percents[4].1, 50.0);
    }

    #[test]
    fn empty_slice_is_named() {
        let c = corpus(vec![]);
        let err = attribute_distribution(&[("Deleted", &c)]).unwrap_err();
        assert!(err.to_string().contains("Deleted"));
        assert!(attribute_distribution(&[]).is_err());
    }

    #[test]
    fn single_spam_user() {
        let c = corpus(vec![harmful("1", "u", CategoryLabel::Spam, UserStatus::Suspended)]);
        let r = user_status_breakdown(&c);
        let spam = r.rows.iter().find(|r| r.category == "spam").unwrap();
        assert_eq!(spam.counts, vec![1, 0, 0, 0, 0]);
        assert_eq!(r.rows.iter().find(|r| r.category == "hate_speech").unwrap().users, 0);
    }

    #[test]
    fn multi_category_user_counts_per_category_once_overall() {
        let c = corpus(vec![
            harmful("1", "u", CategoryLabel::HateSpeech, UserStatus::ActivePublic),
            harmful("2", "u", CategoryLabel::Spam, UserStatus::ActivePublic),
            harmful("3", "u", CategoryLabel::Spam, UserStatus::ActivePublic),
            harmful("4", "v", CategoryLabel::Spam, UserStatus::AccountDeleted),
        ]);
        let r = user_status_breakdown(&c);
        let get = |name: &str| r.rows.iter().find(|r| r.category == name).unwrap();
        assert_eq!(get("hate_speech").users, 1);
        assert_eq!(get("spam").users, 2);
        assert_eq!(get(OVERALL_ROW).users, 2);
        for row in &r.rows {
            assert_eq!(row.counts.iter().sum::<usize>(), row.users);
        }
    }

    #[test]
    fn targets() {
        let mut records = vec![
            harmful("1", "u", CategoryLabel::HateSpeech, UserStatus::Unknown),
            harmful("2", "u", CategoryLabel::HateSpeech, UserStatus::Unknown),
            harmful("3", "u", CategoryLabel::HateSpeech, UserStatus::Unknown),
            harmful("4", "u", CategoryLabel::Spam, UserStatus::Unknown),
        ];
        records[0].target = Some("b".into());
        records[1].target = Some("a".into());
        records[2].target = Some("b".into());
        records[3].target = Some("c".into());
        let c = corpus(records);
        assert_eq!(
            target_frequencies(&c, Some(CategoryLabel::HateSpeech)),
            vec![("b".to_string(), 2), ("a".to_string(), 1)]
        );
        assert_eq!(target_frequencies(&c, None).len(), 3);
    }
}
