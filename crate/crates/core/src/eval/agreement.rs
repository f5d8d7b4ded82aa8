//! Fleiss' kappa and average observed agreement over an item × category
//! count table (row `i`, column `j` = number of annotators who put item `i`
//! in category `j`).

use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::fmt3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgreementBand {
    BelowModerate,
    Moderate,
    Substantial,
    Perfect,
}

impl fmt::Display for AgreementBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgreementBand::BelowModerate => "BelowModerate",
            AgreementBand::Moderate => "Moderate",
            AgreementBand::Substantial => "Substantial",
            AgreementBand::Perfect => "Perfect",
        })
    }
}

/// Interprets kappa on the two-decimal scale 0.41–0.60 / 0.61–0.80 /
/// 0.81–1.00. Kappa is rounded to two decimals first so every value falls in
/// exactly one band.
pub fn band(kappa: f64) -> AgreementBand {
    if kappa.is_nan() {
        return AgreementBand::BelowModerate;
    }
    let hundredths = (kappa * 100.0).round() as i64;
    match hundredths {
        81.. => AgreementBand::Perfect,
        61..=80 => AgreementBand::Substantial,
        41..=60 => AgreementBand::Moderate,
        _ => AgreementBand::BelowModerate,
    }
}

/// Annotators per item; every row must sum to the same `r >= 2`.
fn raters(table: &[Vec<u64>]) -> Result<u64> {
    let first = table.first().ok_or_else(|| Error::Agreement("no items".into()))?;
    let width = first.len();
    let r: u64 = first.iter().sum();
    for (i, row) in table.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Agreement(format!(
                "item {} has {} categories, expected {width}",
                i + 1,
                row.len()
            )));
        }
        let s: u64 = row.iter().sum();
        if s != r {
            return Err(Error::Agreement(format!("item {} has {s} annotations, expected {r}", i + 1)));
        }
    }
    if r < 2 {
        return Err(Error::Agreement(format!("need at least 2 annotators per item, found {r}")));
    }
    Ok(r)
}

/// Per-item share of agreeing annotator pairs.
fn item_agreement(row: &[u64], r: u64) -> f64 {
    let agreeing: u64 = row.iter().map(|&n| n * n.saturating_sub(1)).sum();
    agreeing as f64 / (r * (r - 1)) as f64
}

/// Mean over items of (agreeing pairs) / (r choose 2).
pub fn average_observed_agreement(table: &[Vec<u64>]) -> Result<f64> {
    let r = raters(table)?;
    Ok(table.iter().map(|row| item_agreement(row, r)).sum::<f64>() / table.len() as f64)
}

/// `(P̄ − P̄e) / (1 − P̄e)`. When chance agreement is 1 (every annotation
/// falls in a single category) kappa is 1 if observed agreement is also 1,
/// and undefined otherwise.
pub fn fleiss_kappa(table: &[Vec<u64>]) -> Result<f64> {
    let r = raters(table)?;
    let n_items = table.len() as f64;
    let p_bar = table.iter().map(|row| item_agreement(row, r)).sum::<f64>() / n_items;
    let total = n_items * r as f64;
    let k = table[0].len();
    let p_e: f64 = (0..k)
        .map(|j| {
            let p = table.iter().map(|row| row[j]).sum::<u64>() as f64 / total;
            p * p
        })
        .sum();
    if 1.0 - p_e <= f64::EPSILON {
        return if (1.0 - p_bar).abs() <= f64::EPSILON {
            Ok(1.0)
        } else {
            Err(Error::Agreement("kappa undefined: chance agreement is 1".into()))
        };
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub aoe: f64,
    pub n_items: usize,
    pub n_annotators: u64,
    pub band: AgreementBand,
}

impl AgreementReport {
    pub fn from_table(table: &[Vec<u64>]) -> Result<Self> {
        let kappa = fleiss_kappa(table)?;
        Ok(AgreementReport {
            kappa,
            aoe: average_observed_agreement(table)?,
            n_items: table.len(),
            n_annotators: raters(table)?,
            band: band(kappa),
        })
    }
}

impl fmt::Display for AgreementReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "items       {}", self.n_items)?;
        writeln!(f, "annotators  {}", self.n_annotators)?;
        writeln!(f, "kappa       {}", fmt3(self.kappa))?;
        writeln!(f, "AoE         {}", fmt3(self.aoe))?;
        writeln!(f, "band        {}", self.band)
    }
}

/// Category names (in first-seen order) and the item × category counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementTable {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl AgreementTable {
    /// Builds the table from one label list per item.
    pub fn from_labels<S: AsRef<str>>(items: &[Vec<S>]) -> Self {
        let mut categories: Vec<String> = Vec::new();
        for item in items {
            for label in item {
                if !categories.iter().any(|c| c == label.as_ref()) {
                    categories.push(label.as_ref().to_string());
                }
            }
        }
        let counts = items
            .iter()
            .map(|item| {
                let mut row = vec![0u64; categories.len()];
                for label in item {
                    let j = categories.iter().position(|c| c == label.as_ref()).unwrap();
                    row[j] += 1;
                }
                row
            })
            .collect();
        AgreementTable { categories, counts }
    }

    pub fn report(&self) -> Result<AgreementReport> {
        AgreementReport::from_table(&self.counts)
    }
}

/// Reads annotations as TSV: one row per item, one column per annotator,
/// each cell a category name. With `header` set the first line names the
/// annotators and is skipped. Blank lines are ignored.
pub fn parse_annotations<R: BufRead>(reader: R, header: bool) -> Result<AgreementTable> {
    let mut items: Vec<Vec<String>> = Vec::new();
    let mut width = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if (header && i == 0) || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(|c| c.trim().to_string()).collect();
        if let Some(empty) = cells.iter().position(String::is_empty) {
            return Err(Error::parse("annotations", i + 1, format!("column {} is empty", empty + 1)));
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::parse(
                    "annotations",
                    i + 1,
                    format!("expected {w} annotator columns, found {}", cells.len()),
                ));
            }
            _ => {}
        }
        items.push(cells);
    }
    if items.is_empty() {
        return Err(Error::Agreement("no items".into()));
    }
    Ok(AgreementTable::from_labels(&items))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_two_by_two() {
        // (A,A), (A,B): P̄ = 0.5, p = (0.75, 0.25), P̄e = 0.625
        let t = AgreementTable::from_labels(&[vec!["A", "A"], vec!["A", "B"]]);
        assert_eq!(t.counts, vec![vec![2, 0], vec![1, 1]]);
        assert!((fleiss_kappa(&t.counts).unwrap() + 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(average_observed_agreement(&t.counts).unwrap(), 0.5);
    }

    #[test]
    fn unanimous() {
        let t: Vec<Vec<u64>> = (0..10).map(|i| if i % 2 == 0 { vec![3, 0] } else { vec![0, 3] }).collect();
        assert_eq!(fleiss_kappa(&t).unwrap(), 1.0);
        assert_eq!(average_observed_agreement(&t).unwrap(), 1.0);
        // a single category everywhere: chance agreement is 1 as well
        let one = vec![vec![3u64]; 4];
        assert_eq!(fleiss_kappa(&one).unwrap(), 1.0);
    }

    #[test]
    fn three_annotators_pairs() {
        // (A,A,B): one agreeing pair out of three
        assert!((average_observed_agreement(&[vec![2, 1]]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ragged_and_degenerate() {
        assert!(fleiss_kappa(&[vec![2, 0], vec![1, 2]]).is_err());
        assert!(fleiss_kappa(&[vec![2, 0], vec![1]]).is_err());
        assert!(fleiss_kappa(&[vec![1, 0]]).is_err());
        assert!(fleiss_kappa(&[]).is_err());
    }

    #[test]
    fn bands() {
        assert_eq!(band(0.75), AgreementBand::Substantial);
        assert_eq!(band(0.41), AgreementBand::Moderate);
        assert_eq!(band(0.60), AgreementBand::Moderate);
        assert_eq!(band(0.605), AgreementBand::Substantial);
        assert_eq!(band(0.61), AgreementBand::Substantial);
        assert_eq!(band(0.80), AgreementBand::Substantial);
        assert_eq!(band(0.81), AgreementBand::Perfect);
        assert_eq!(band(1.0), AgreementBand::Perfect);
        assert_eq!(band(0.20), AgreementBand::BelowModerate);
        assert_eq!(band(-0.5), AgreementBand::BelowModerate);
    }

    #[test]
    fn tsv_input() {
        let tsv = "ann1\tann2\tann3\nhs\ths\ths\nspam\tspam\tspam\n\n";
        let t = parse_annotations(tsv.as_bytes(), true).unwrap();
        let r = t.report().unwrap();
        assert_eq!((r.kappa, r.aoe, r.band), (1.0, 1.0, AgreementBand::Perfect));
        assert!(r.to_string().contains("kappa       1.000"));
        assert!(parse_annotations("a\tb\nc\n".as_bytes(), false).is_err());
        assert!(parse_annotations("a\t\n".as_bytes(), false).is_err());
    }

    proptest::proptest! {
        #[test]
        fn permutation_invariance(
            rows in proptest::collection::vec(proptest::collection::vec(0usize..3, 4), 2..30),
            rot in 0usize..3,
        ) {
            let t = AgreementTable::from_labels(&rows.iter().map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>());
            let Ok(k) = fleiss_kappa(&t.counts) else { return Ok(()); };
            let aoe = average_observed_agreement(&t.counts).unwrap();

            let mut cols = t.counts.clone();
            for row in &mut cols {
                let len = row.len();
                row.rotate_left(rot % len);
            }
            let mut rev = cols.clone();
            rev.reverse();
            proptest::prop_assert!((fleiss_kappa(&rev).unwrap() - k).abs() < 1e-12);
            proptest::prop_assert!((average_observed_agreement(&rev).unwrap() - aoe).abs() < 1e-12);
        }
    }
}
