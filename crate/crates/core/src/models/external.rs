//! Predictions produced outside this toolkit (for example by a fine-tuned
//! transformer) read from a score file so they can be evaluated with the
//! same harness.
//!
//! Format: TSV, header `id<TAB>score_<class1><TAB>score_<class2>...` with the
//! classes in label-map order, then one row per evaluation record in corpus
//! order.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{LabelMap, Prediction};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRow {
    pub id: String,
    pub prediction: Prediction,
}

pub fn external_scores(path: &Path, labels: &LabelMap, corpus: &Corpus) -> Result<Vec<Prediction>> {
    let rows = parse_external_scores(BufReader::new(File::open(path)?), labels, corpus)?;
    Ok(rows.into_iter().map(|r| r.prediction).collect())
}

/// Line numbers in errors are 1-based and count the header.
pub fn parse_external_scores<R: BufRead>(reader: R, labels: &LabelMap, corpus: &Corpus) -> Result<Vec<ScoredRow>> {
    let err = |line: usize, reason: String| Error::ExternalScores { line, reason };
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| err(1, "missing header".into()))??;
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain(labels.names().iter().map(|n| format!("score_{n}")))
        .collect();
    let found: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    if found != expected {
        return Err(err(1, format!("header must be {:?}, found {:?}", expected.join("\t"), found.join("\t"))));
    }

    let records = corpus.records();
    let mut out = Vec::with_capacity(records.len());
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() && i >= records.len() {
            continue;
        }
        let record = records
            .get(i)
            .ok_or_else(|| err(line_no, format!("more rows than the {} evaluation records", records.len())))?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != expected.len() {
            return Err(err(line_no, format!("expected {} fields, found {}", expected.len(), fields.len())));
        }
        if fields[0] != record.id {
            return Err(err(line_no, format!("expected id {:?}, found {:?}", record.id, fields[0])));
        }
        let scores = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line_no, format!("invalid score {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(ScoredRow {
            id: record.id.clone(),
            prediction: Prediction::from_scores(scores, labels)?,
        });
    }
    if out.len() < records.len() {
        return Err(err(
            out.len() + 2,
            format!("missing row for record {:?}", records[out.len()].id),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Provenance, TweetRecord};

    fn corpus() -> Corpus {
        let records = ["a", "b", "c"].iter().map(|id| TweetRecord::new(*id, "text")).collect();
        Corpus::new(records, Provenance::named("test")).unwrap()
    }

    fn labels() -> LabelMap {
        LabelMap::new(["x", "y"]).unwrap()
    }

    #[test]
    fn reads_rows_in_order() {
        let file = "id\tscore_x\tscore_y\na\t1\t0\nb\t0\t1\nc\t0.5\t0.5\n";
        let rows = parse_external_scores(file.as_bytes(), &labels(), &corpus()).unwrap();
        let got: Vec<&str> = rows.iter().map(|r| r.prediction.label.as_str()).collect();
        assert_eq!(got, ["x", "y", "x"]);
    }

    #[test]
    fn missing_row_reports_its_line() {
        let file = "id\tscore_x\tscore_y\na\t1\t0\nb\t0\t1\n";
        match parse_external_scores(file.as_bytes(), &labels(), &corpus()) {
            Err(Error::ExternalScores { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn first_offending_row_is_named() {
        let file = "id\tscore_x\tscore_y\na\t1\t0\nz\t0\t1\nc\tnan\t1\n";
        match parse_external_scores(file.as_bytes(), &labels(), &corpus()) {
            Err(Error::ExternalScores { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("\"z\""), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        let bad_header = "id\tscore_y\tscore_x\n";
        assert!(matches!(
            parse_external_scores(bad_header.as_bytes(), &labels(), &corpus()),
            Err(Error::ExternalScores { line: 1, .. })
        ));
    }
}
