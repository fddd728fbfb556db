//! Soft (probability averaging) and hard (majority) voting.

use ndarray::{Array2, ArrayView2};

use crate::error::{HarError, Result};

/// One model's class probabilities with the class codes of its columns.
#[derive(Clone, Copy, Debug)]
pub struct ClassProbs<'a> {
    pub classes: &'a [u8],
    pub probs: ArrayView2<'a, f64>,
}

/// Unweighted mean of the models' probability tables.
pub fn soft_vote_proba(tables: &[ClassProbs<'_>]) -> Result<Array2<f64>> {
    let first = tables
        .first()
        .ok_or_else(|| HarError::EmptyInput("no models to vote".into()))?;
    let mut acc = Array2::<f64>::zeros(first.probs.raw_dim());
    for t in tables {
        if t.classes != first.classes || t.probs.dim() != first.probs.dim() {
            return Err(HarError::ClassOrderMismatch);
        }
        acc += &t.probs;
    }
    acc /= tables.len() as f64;
    Ok(acc)
}

/// Argmax of the mean probabilities; ties go to the lowest class code.
pub fn soft_vote(tables: &[ClassProbs<'_>]) -> Result<Vec<u8>> {
    let mean = soft_vote_proba(tables)?;
    let classes = tables[0].classes;
    Ok(mean
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] || (v == row[best] && classes[j] < classes[best]) {
                    best = j;
                }
            }
            classes[best]
        })
        .collect())
}

/// Majority label per row. `priority` lists model indices from most to least
/// trusted; among tied labels the most trusted model's vote wins, then the
/// lowest class code.
pub fn hard_vote(predictions: &[Vec<u8>], priority: &[usize]) -> Result<Vec<u8>> {
    let n = predictions
        .first()
        .ok_or_else(|| HarError::EmptyInput("no models to vote".into()))?
        .len();
    if predictions.iter().any(|p| p.len() != n) {
        return Err(HarError::ShapeMismatch {
            expected: n,
            got: predictions.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
        });
    }
    let mut order: Vec<usize> = priority.iter().copied().filter(|&m| m < predictions.len()).collect();
    for m in 0..predictions.len() {
        if !order.contains(&m) {
            order.push(m);
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut counts = [0usize; 256];
            predictions.iter().for_each(|p| counts[p[i] as usize] += 1);
            let top = *counts.iter().max().unwrap_or(&0);
            let tied = |c: u8| counts[c as usize] == top;
            order
                .iter()
                .map(|&m| predictions[m][i])
                .find(|&c| tied(c))
                .or_else(|| (0..=255u8).find(|&c| tied(c)))
                .unwrap_or(0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn soft_vote_arithmetic() {
        let classes = [0u8, 1];
        let (a, b, c) = (array![[0.6, 0.4]], array![[0.2, 0.8]], array![[0.55, 0.45]]);
        let tables: Vec<ClassProbs> = [&a, &b, &c]
            .iter()
            .map(|p| ClassProbs {
                classes: &classes,
                probs: p.view(),
            })
            .collect();
        let mean = soft_vote_proba(&tables).unwrap();
        assert!((mean[[0, 0]] - 0.45).abs() < 1e-15 && (mean[[0, 1]] - 0.55).abs() < 1e-15);
        assert_eq!(soft_vote(&tables).unwrap(), vec![1]);
    }

    #[test]
    fn soft_vote_tie_and_identity() {
        let classes = [2u8, 5];
        let p = array![[0.5, 0.5], [0.3, 0.7]];
        let t = ClassProbs {
            classes: &classes,
            probs: p.view(),
        };
        assert_eq!(soft_vote(&[t, t, t]).unwrap(), vec![2, 5]);
        assert_eq!(soft_vote(&[t]).unwrap(), vec![2, 5]);
    }

    #[test]
    fn soft_vote_rejects_mismatch() {
        let p = array![[0.5, 0.5]];
        let a = ClassProbs {
            classes: &[0, 1],
            probs: p.view(),
        };
        let b = ClassProbs {
            classes: &[1, 0],
            probs: p.view(),
        };
        assert!(matches!(soft_vote(&[a, b]), Err(HarError::ClassOrderMismatch)));
        assert!(soft_vote(&[]).is_err());
    }

    #[test]
    fn soft_vote_is_permutation_invariant() {
        let classes = [0u8, 1, 2];
        let ps = [
            array![[0.2, 0.5, 0.3], [0.1, 0.1, 0.8]],
            array![[0.6, 0.2, 0.2], [0.3, 0.4, 0.3]],
            array![[0.1, 0.3, 0.6], [0.5, 0.3, 0.2]],
        ];
        let t: Vec<ClassProbs> = ps
            .iter()
            .map(|p| ClassProbs {
                classes: &classes,
                probs: p.view(),
            })
            .collect();
        let base = soft_vote(&t).unwrap();
        for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let q: Vec<ClassProbs> = perm.iter().map(|&i| t[i]).collect();
            assert_eq!(soft_vote(&q).unwrap(), base);
        }
    }

    #[test]
    fn hard_vote_rules() {
        let (a, b, c) = (0u8, 1u8, 2u8);
        assert_eq!(hard_vote(&[vec![a], vec![a], vec![b]], &[2, 0, 1]).unwrap(), vec![a]);
        // models: svm, gbt, mlp; gbt has the best training accuracy
        assert_eq!(hard_vote(&[vec![a], vec![b], vec![c]], &[1, 0, 2]).unwrap(), vec![b]);
        assert_eq!(hard_vote(&[vec![c, a]], &[0]).unwrap(), vec![c, a]);
        assert_eq!(hard_vote(&[vec![c], vec![a]], &[]).unwrap(), vec![c]);
        assert!(hard_vote(&[vec![a], vec![a, b]], &[0]).is_err());
    }
}
