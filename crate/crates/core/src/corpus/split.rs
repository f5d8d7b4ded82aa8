//! Deterministic stratified train/dev/test splitting.
//!
//! Each stratum is shuffled with ChaCha8 seeded by `seed` on stream
//! `stratum ordinal`, then cut into three runs whose sizes come from
//! largest-remainder apportionment of the exact rational fractions. Parts
//! are returned in original record order, so a split is a pure function of
//! the input order, the fractions and the seed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CategoryLabel, Corpus, DeletionLabel, TweetRecord};
use crate::error::{Error, Result};

/// Three positive rationals `numerators[i] / denominator` summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fractions {
    numerators: [u64; 3],
    denominator: u64,
}

impl Fractions {
    pub fn new(numerators: [u64; 3], denominator: u64) -> Result<Self> {
        if numerators.iter().any(|&n| n == 0 || n >= denominator) {
            return Err(Error::InvalidSplit(format!(
                "every fraction must lie strictly between 0 and 1, got {numerators:?}/{denominator}"
            )));
        }
        if numerators.iter().sum::<u64>() != denominator {
            return Err(Error::InvalidSplit(format!(
                "fractions must sum to exactly 1, got {numerators:?}/{denominator}"
            )));
        }
        Ok(Fractions {
            numerators,
            denominator,
        })
    }

    /// The usual 70/10/20 train/dev/test proportions.
    pub fn seventy_ten_twenty() -> Self {
        Fractions::new([7, 1, 2], 10).unwrap()
    }

    pub fn numerators(&self) -> [u64; 3] {
        self.numerators
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn as_f64(&self) -> [f64; 3] {
        self.numerators.map(|n| n as f64 / self.denominator as f64)
    }
}

impl FromStr for Fractions {
    type Err = Error;

    /// Parses three comma-separated decimals (`0.7,0.1,0.2`) exactly.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidSplit(format!("expected three fractions, got {s:?}")));
        }
        let mut decimals = [(0u64, 0u32); 3];
        for (slot, part) in decimals.iter_mut().zip(&parts) {
            *slot = parse_decimal(part).ok_or_else(|| Error::InvalidSplit(format!("not a decimal fraction: {part:?}")))?;
        }
        let scale = decimals.iter().map(|d| d.1).max().unwrap();
        if scale > 12 {
            return Err(Error::InvalidSplit(format!("too many decimal places in {s:?}")));
        }
        let denominator = 10u64.pow(scale);
        let numerators = decimals.map(|(digits, places)| digits * 10u64.pow(scale - places));
        Fractions::new(numerators, denominator)
    }
}

/// "0.125" -> (125, 3)
fn parse_decimal(s: &str) -> Option<(u64, u32)> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 12 {
        return None;
    }
    let digits: u64 = format!("{int}{frac}").parse().ok()?;
    Some((digits, frac.len() as u32))
}

impl fmt::Display for Fractions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.numerators;
        write!(f, "{a}/{d},{b}/{d},{c}/{d}", d = self.denominator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratifyOn {
    DeletionLabel,
    CategoryLabel,
}

impl FromStr for StratifyOn {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "deletion" | "deletion_label" => Ok(StratifyOn::DeletionLabel),
            "category" | "category_label" => Ok(StratifyOn::CategoryLabel),
            other => Err(format!("unknown stratification {other:?} (expected deletion or category)")),
        }
    }
}

impl StratifyOn {
    fn stratum(self, record: &TweetRecord) -> Result<usize> {
        let fail = |value: &str| {
            Err(Error::InvalidSplit(format!(
                "record {:?} has no usable stratification label ({value})",
                record.id
            )))
        };
        match self {
            StratifyOn::DeletionLabel => match record.deletion_label {
                DeletionLabel::Unknown => fail("deletion_label=unknown"),
                label => Ok(label.ordinal()),
            },
            StratifyOn::CategoryLabel => match record.category_label {
                CategoryLabel::Unlabeled => fail("category_label=unlabeled"),
                label => Ok(label.ordinal()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub fractions: Fractions,
    pub seed: u64,
    pub stratify_on: StratifyOn,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    /// Non-fatal observations, e.g. strata too small to reach every part.
    pub warnings: Vec<String>,
}

impl SplitResult {
    pub fn parts(&self) -> [(&'static str, &Corpus); 3] {
        [("train", &self.train), ("dev", &self.dev), ("test", &self.test)]
    }
}

/// Apportions `n` items to three parts by largest remainder. Ties in the
/// fractional part go to the earlier part.
pub fn largest_remainder(n: usize, fractions: &Fractions) -> [usize; 3] {
    let n = n as u128;
    let d = fractions.denominator as u128;
    let mut sizes = [0usize; 3];
    let mut remainders = [(0u128, 0usize); 3];
    for (i, &num) in fractions.numerators.iter().enumerate() {
        let quota = n * num as u128;
        sizes[i] = (quota / d) as usize;
        remainders[i] = (quota % d, i);
    }
    let assigned: usize = sizes.iter().sum();
    let mut leftover = n as usize - assigned;
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in &remainders {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    sizes
}

pub fn stratified_split(corpus: &Corpus, spec: &SplitSpec) -> Result<SplitResult> {
    if corpus.is_empty() {
        return Err(Error::Empty("cannot split an empty corpus".into()));
    }
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, record) in corpus.iter().enumerate() {
        strata.entry(spec.stratify_on.stratum(record)?).or_default().push(i);
    }

    let mut parts: [Vec<usize>; 3] = Default::default();
    let mut warnings = Vec::new();
    for (&stratum, members) in &strata {
        if members.len() < 3 {
            let msg = format!(
                "stratum {} has only {} record(s); some parts receive none",
                stratum_name(spec.stratify_on, stratum),
                members.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stratum as u64);
        let mut order = members.clone();
        order.shuffle(&mut rng);

        let sizes = largest_remainder(order.len(), &spec.fractions);
        let mut rest = order.as_slice();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let (head, tail) = rest.split_at(size);
            part.extend_from_slice(head);
            rest = tail;
        }
    }

    let records = corpus.records();
    let [train, dev, test] = parts.map(|mut idx| {
        idx.sort_unstable();
        Corpus::new(
            idx.into_iter().map(|i| records[i].clone()).collect(),
            corpus.provenance.clone(),
        )
        .expect("subset of a valid corpus is valid")
    });
    Ok(SplitResult {
        train,
        dev,
        test,
        warnings,
    })
}

fn stratum_name(on: StratifyOn, ordinal: usize) -> &'static str {
    match on {
        StratifyOn::DeletionLabel => DeletionLabel::ALL[ordinal].as_str(),
        StratifyOn::CategoryLabel => CategoryLabel::ALL[ordinal].as_str(),
    }
}
