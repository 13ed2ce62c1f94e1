use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MtdError;

/// An evaluation set in the cross-scoring step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    Annotator(String),
    TestAll,
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetId::Annotator(a) => write!(f, "D[{a}]"),
            DatasetId::TestAll => f.write_str("D_test_all"),
        }
    }
}

/// Size-normalized score of annotator `annotator`'s model:
///
/// S_i = (Σ_{j≠i} |D_m|·Acc(M_i, D_j) + |D_test_all|·Acc(M_i, D_test_all))
///       / ((N−1)·|D_m| + |D_test_all|)
///
/// where |D_m| is the smallest submitted dataset. `sizes` must list every
/// submitted dataset (the annotator's own included) and may list
/// `TestAll`; `accuracies` must cover every other dataset and a non-empty
/// `TestAll`.
pub fn score_annotator(
    annotator: &str,
    accuracies: &BTreeMap<DatasetId, f64>,
    sizes: &BTreeMap<DatasetId, usize>,
) -> Result<f64, MtdError> {
    let own = DatasetId::Annotator(annotator.to_string());
    let submitted: Vec<(&DatasetId, usize)> =
        sizes.iter().filter(|(id, _)| matches!(id, DatasetId::Annotator(_))).map(|(id, &n)| (id, n)).collect();
    let d_m = submitted.iter().map(|&(_, n)| n).min().unwrap_or(0) as f64;
    let test_size = sizes.get(&DatasetId::TestAll).copied().unwrap_or(0) as f64;

    let lookup = |id: &DatasetId| accuracies.get(id).copied().ok_or_else(|| MtdError::MissingAccuracy(id.to_string()));
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for &(id, _) in &submitted {
        if *id == own {
            continue;
        }
        numerator += d_m * lookup(id)?;
        denominator += d_m;
    }
    if test_size > 0.0 {
        numerator += test_size * lookup(&DatasetId::TestAll)?;
        denominator += test_size;
    }
    if denominator == 0.0 {
        return Err(MtdError::ZeroDenominator);
    }
    Ok(numerator / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(s: &str) -> DatasetId {
        DatasetId::Annotator(s.into())
    }

    #[test]
    fn single_opponent_without_test_pool() {
        let sizes = BTreeMap::from([(ann("a"), 10), (ann("b"), 14)]);
        let acc = BTreeMap::from([(ann("b"), 0.3)]);
        assert_eq!(score_annotator("a", &acc, &sizes).unwrap(), 0.3);
    }

    #[test]
    fn lone_annotator_has_no_denominator() {
        let sizes = BTreeMap::from([(ann("a"), 10)]);
        assert!(matches!(score_annotator("a", &BTreeMap::new(), &sizes), Err(MtdError::ZeroDenominator)));
    }
}
