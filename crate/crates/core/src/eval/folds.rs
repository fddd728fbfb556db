//! Consecutive, unshuffled cross-validation folds.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};

pub const DEFAULT_FOLDS: usize = 5;

/// Contiguous validation blocks over rows in dataset order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_rows: usize,
    pub folds: Vec<Range<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Rows outside fold `i`, ascending.
    pub fn train_rows(&self, i: usize) -> Vec<usize> {
        let test = &self.folds[i];
        (0..test.start).chain(test.end..self.n_rows).collect()
    }

    pub fn test_rows(&self, i: usize) -> Vec<usize> {
        self.folds[i].clone().collect()
    }
}

/// Fold `i` covers rows `[floor(i*n/k), floor((i+1)*n/k))`.
pub fn make_folds(n_rows: usize, k: usize) -> Result<FoldPlan> {
    if k == 0 {
        return Err(HarError::InvalidParameter("fold count must be positive".into()));
    }
    if n_rows < k {
        return Err(HarError::TooFewSamples { needed: k, got: n_rows });
    }
    let bound = |i: usize| (i as u128 * n_rows as u128 / k as u128) as usize;
    Ok(FoldPlan {
        n_rows,
        folds: (0..k).map(|i| bound(i)..bound(i + 1)).collect(),
    })
}

/// Folds made of whole users: consecutive user blocks are split with the
/// same floor rule, so no user spans training and validation. Rows must
/// already be grouped by user.
pub fn make_user_folds(user_ids: &[String], k: usize) -> Result<FoldPlan> {
    let mut starts = Vec::new();
    for (i, u) in user_ids.iter().enumerate() {
        if i == 0 || user_ids[i - 1] != *u {
            starts.push(i);
        }
    }
    let mut seen = starts.iter().map(|&s| &user_ids[s]).collect::<Vec<_>>();
    seen.sort();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(HarError::InvalidParameter("rows are not grouped by user".into()));
    }
    let users = make_folds(starts.len(), k)?;
    starts.push(user_ids.len());
    Ok(FoldPlan {
        n_rows: user_ids.len(),
        folds: users.folds.iter().map(|r| starts[r.start]..starts[r.end]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_rows() {
        let plan = make_folds(100, 5).unwrap();
        assert_eq!(plan.folds, vec![0..20, 20..40, 40..60, 60..80, 80..100]);
        assert_eq!(plan.train_rows(1).len(), 80);
        assert!(!plan.train_rows(1).contains(&20));
    }

    #[test]
    fn remainder_spread() {
        let plan = make_folds(103, 5).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![20, 21, 20, 21, 21]);
    }

    #[test]
    fn too_few_rows() {
        assert!(make_folds(4, 5).is_err());
        assert!(make_folds(10, 0).is_err());
    }

    #[test]
    fn user_folds() {
        let ids: Vec<String> = ["a", "a", "b", "c", "c", "c", "d", "e", "e"].iter().map(|s| s.to_string()).collect();
        let plan = make_user_folds(&ids, 5).unwrap();
        assert_eq!(plan.folds, vec![0..2, 2..3, 3..6, 6..7, 7..9]);
        let bad: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
        assert!(make_user_folds(&bad, 2).is_err());
        assert!(make_user_folds(&ids[..2], 2).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition(n in 1usize..5000, k in 1usize..12) {
            prop_assume!(n >= k);
            let plan = make_folds(n, k).unwrap();
            prop_assert_eq!(plan.folds[0].start, 0);
            prop_assert_eq!(plan.folds[k - 1].end, n);
            for w in plan.folds.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
            }
            let min = plan.folds.iter().map(|r| r.len()).min().unwrap();
            let max = plan.folds.iter().map(|r| r.len()).max().unwrap();
            prop_assert!(max - min <= 1);
        }
    }
}
