//! Random-forest Gini importance ranking and top-k selection.

use std::io::Write;

use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};
use crate::rng::{rng_for, StageRng};

pub const DEFAULT_N_TREES: usize = 200;
pub const DEFAULT_TOP_K: usize = 195;

/// Column-major copy of the training matrix.
struct Columns {
    n: usize,
    data: Vec<f64>,
}

impl Columns {
    fn new(x: ArrayView2<f64>) -> Self {
        let n = x.nrows();
        let data = x.t().iter().copied().collect();
        Columns { n, data }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    fn p(&self) -> usize {
        self.data.len().checked_div(self.n).unwrap_or(0)
    }
}

/// Grow one CART tree to purity on the rows in `sample` (duplicates allowed)
/// and return the unnormalised weighted impurity decrease per feature.
fn grow_tree(
    cols: &Columns,
    y: &[usize],
    n_classes: usize,
    sample: Vec<usize>,
    mtry: usize,
    rng: &mut StageRng,
) -> Vec<f64> {
    let p = cols.p();
    let total = sample.len() as f64;
    let mut imp = vec![0.0; p];
    let mut feats: Vec<usize> = (0..p).collect();
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(sample.len());
    let mut counts = vec![0u64; n_classes];
    let mut left = vec![0u64; n_classes];
    let mut right = vec![0u64; n_classes];
    let mut stack = vec![sample];

    while let Some(idx) = stack.pop() {
        let m = idx.len();
        counts.fill(0);
        for &r in &idx {
            counts[y[r]] += 1;
        }
        if m < 2 || counts.iter().filter(|&&c| c > 0).count() < 2 {
            continue;
        }
        let sq_parent: u64 = counts.iter().map(|c| c * c).sum();

        let mut best: Option<(f64, usize, f64)> = None;
        let mut informative = 0;
        let mut drawn = 0;
        while drawn < p && informative < mtry {
            let j = rng.gen_range(drawn..p);
            feats.swap(drawn, j);
            let f = feats[drawn];
            drawn += 1;

            let col = cols.col(f);
            pairs.clear();
            pairs.extend(idx.iter().map(|&r| (col[r], y[r])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[m - 1].0 {
                continue;
            }
            informative += 1;

            left.fill(0);
            right.copy_from_slice(&counts);
            let (mut sql, mut sqr) = (0u64, sq_parent);
            for k in 0..m - 1 {
                let c = pairs[k].1;
                sql += 2 * left[c] + 1;
                left[c] += 1;
                sqr -= 2 * right[c] - 1;
                right[c] -= 1;
                let (v, next) = (pairs[k].0, pairs[k + 1].0);
                if v < next {
                    let nl = (k + 1) as f64;
                    let proxy = sql as f64 / nl + sqr as f64 / (m as f64 - nl);
                    if best.is_none_or(|b| proxy > b.0 || (proxy == b.0 && f < b.1)) {
                        let mut thr = v / 2.0 + next / 2.0;
                        if thr >= next || thr < v {
                            thr = v;
                        }
                        best = Some((proxy, f, thr));
                    }
                }
            }
        }

        let Some((proxy, f, thr)) = best else {
            continue;
        };
        imp[f] += ((proxy - sq_parent as f64 / m as f64) / total).max(0.0);
        let col = cols.col(f);
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&r| col[r] <= thr);
        stack.push(r);
        stack.push(l);
    }
    imp
}

fn normalise(v: &mut [f64]) -> bool {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
        true
    } else {
        false
    }
}

/// Mean impurity-decrease importance of a Gini random forest with bootstrap
/// sampling, `floor(sqrt(p))` candidate features per split and trees grown to
/// purity. Sums to 1; uniform when no tree could split.
pub fn forest_importance(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    n_trees: usize,
    seed: u64,
) -> Vec<f64> {
    let cols = Columns::new(x);
    let (n, p) = x.dim();
    let mtry = ((p as f64).sqrt() as usize).max(1);
    let per_tree: Vec<Vec<f64>> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, &[t as u64]);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut imp = grow_tree(&cols, y, n_classes, sample, mtry, &mut rng);
            normalise(&mut imp);
            imp
        })
        .collect();
    let mut total = vec![0.0; p];
    for imp in &per_tree {
        for (t, v) in total.iter_mut().zip(imp) {
            *t += v;
        }
    }
    if !normalise(&mut total) {
        total.fill(1.0 / p as f64);
    }
    total
}

/// Per-feature importances and the ids sorted by descending importance,
/// ties broken by manifest order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub feature_ids: Vec<String>,
    pub importances: Vec<f64>,
    pub ranked: Vec<String>,
    pub seed: u64,
}

impl ImportanceRanking {
    pub fn from_importances(feature_ids: Vec<String>, importances: Vec<f64>, seed: u64) -> Result<Self> {
        if feature_ids.len() != importances.len() {
            return Err(HarError::ShapeMismatch {
                expected: feature_ids.len(),
                got: importances.len(),
            });
        }
        if importances.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(HarError::InvalidParameter("importances must be finite and non-negative".into()));
        }
        let mut order: Vec<usize> = (0..importances.len()).collect();
        order.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]));
        let ranked = order.iter().map(|&i| feature_ids[i].clone()).collect();
        Ok(ImportanceRanking {
            feature_ids,
            importances,
            ranked,
            seed,
        })
    }

    /// Element-wise mean of several rankings over the same features.
    pub fn mean_of(rankings: &[ImportanceRanking]) -> Result<Self> {
        let first = rankings
            .first()
            .ok_or_else(|| HarError::EmptyInput("no rankings to average".into()))?;
        let mut acc = vec![0.0; first.importances.len()];
        for r in rankings {
            if r.feature_ids != first.feature_ids {
                return Err(HarError::InvalidParameter("rankings cover different features".into()));
            }
            for (a, v) in acc.iter_mut().zip(&r.importances) {
                *a += v / rankings.len() as f64;
            }
        }
        Self::from_importances(first.feature_ids.clone(), acc, first.seed)
    }

    pub fn importance_of(&self, id: &str) -> Option<f64> {
        self.feature_ids
            .iter()
            .position(|f| f == id)
            .map(|i| self.importances[i])
    }

    /// The `n` highest-ranked ids with their importances.
    pub fn top(&self, n: usize) -> Vec<(String, f64)> {
        self.ranked
            .iter()
            .take(n)
            .map(|id| (id.clone(), self.importance_of(id).unwrap_or(0.0)))
            .collect()
    }

    /// CSV `rank,feature_id,importance`, optionally truncated to `limit` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, limit: Option<usize>) -> std::io::Result<()> {
        writeln!(w, "rank,feature_id,importance")?;
        for (i, (id, v)) in self.top(limit.unwrap_or(self.ranked.len())).iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, id, v)?;
        }
        Ok(())
    }
}

/// Rank features by random-forest importance. `y` holds class indices.
pub fn rank_features(
    x: ArrayView2<f64>,
    y: &[usize],
    feature_ids: &[String],
    n_trees: usize,
    seed: u64,
) -> Result<ImportanceRanking> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(HarError::EmptyInput("ranking matrix".into()));
    }
    if y.len() != n {
        return Err(HarError::ShapeMismatch { expected: n, got: y.len() });
    }
    if feature_ids.len() != p {
        return Err(HarError::ShapeMismatch {
            expected: p,
            got: feature_ids.len(),
        });
    }
    if n_trees == 0 {
        return Err(HarError::InvalidParameter("n_trees must be at least 1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HarError::NonFinite("ranking matrix".into()));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; n_classes];
    y.iter().for_each(|&c| present[c] = true);
    let distinct = present.iter().filter(|&&b| b).count();
    if distinct < 2 {
        return Err(HarError::SingleClass(distinct));
    }
    let imp = forest_importance(x, y, n_classes, n_trees, seed);
    ImportanceRanking::from_importances(feature_ids.to_vec(), imp, seed)
}

/// Ordered subset of feature ids chosen from a ranking.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub ids: Vec<String>,
    pub k: usize,
}

/// First `k` ranked ids; `k` is clamped to `1..=len`.
pub fn select_top_k(ranking: &ImportanceRanking, k: usize) -> SelectionMask {
    let k = k.clamp(1, ranking.ranked.len().max(1));
    let ids: Vec<String> = ranking.ranked.iter().take(k).cloned().collect();
    SelectionMask { k: ids.len(), ids }
}
