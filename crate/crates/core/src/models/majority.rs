use crate::error::{Error, Result};

/// Always predicts the most frequent training class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MajorityModel {
    pub majority_class: usize,
    pub class_counts: Vec<u64>,
}

impl MajorityModel {
    /// Ties go to the lowest class index.
    pub fn from_counts(class_counts: Vec<u64>) -> Result<Self> {
        if class_counts.iter().all(|&c| c == 0) {
            return Err(Error::Training("majority baseline needs at least one example".into()));
        }
        let mut majority_class = 0;
        for (i, &c) in class_counts.iter().enumerate() {
            if c > class_counts[majority_class] {
                majority_class = i;
            }
        }
        Ok(MajorityModel {
            majority_class,
            class_counts,
        })
    }

    pub fn scores(&self) -> Vec<f64> {
        (0..self.class_counts.len())
            .map(|i| if i == self.majority_class { 1.0 } else { 0.0 })
            .collect()
    }
}

pub fn train_majority(labels: &[usize], n_classes: usize) -> Result<MajorityModel> {
    let mut counts = vec![0u64; n_classes];
    for &y in labels {
        let slot = counts
            .get_mut(y)
            .ok_or_else(|| Error::Training(format!("class index {y} out of range for {n_classes} classes")))?;
        *slot += 1;
    }
    MajorityModel::from_counts(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deletion_setting_counts() {
        // train split: 14,012 deleted vs 13,988 not deleted
        let m = MajorityModel::from_counts(vec![14_012, 13_988]).unwrap();
        assert_eq!(m.majority_class, 0);
        assert_eq!(m.scores(), vec![1.0, 0.0]);
    }

    #[test]
    fn disinfo_setting_counts() {
        // disinfo first, then not_disinfo: 2,879 vs 12,521
        let m = MajorityModel::from_counts(vec![2_879, 12_521]).unwrap();
        assert_eq!(m.majority_class, 1);
    }

    #[test]
    fn tie_goes_low() {
        let m = train_majority(&[1, 0, 1, 0, 0, 1, 1, 0, 0, 1], 2).unwrap();
        assert_eq!(m.class_counts, vec![5, 5]);
        assert_eq!(m.majority_class, 0);
    }

    #[test]
    fn empty_is_error() {
        assert!(train_majority(&[], 2).is_err());
        assert!(train_majority(&[3], 2).is_err());
    }
}
