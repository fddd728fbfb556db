//! Multiclass gradient-boosted regression trees on the softmax cross-entropy.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};
use crate::rng::rng_for;

use super::{check_training, check_width, softmax_rows};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtSpec {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features drawn as split candidates at every node.
    pub max_features: f64,
    pub learning_rate: f64,
    /// Upper bound on the number of value bins per feature in split search.
    pub max_bins: usize,
    pub seed: u64,
}

impl Default for GbtSpec {
    fn default() -> Self {
        GbtSpec {
            n_estimators: 500,
            max_depth: 3,
            min_samples_leaf: 4,
            max_features: 0.2,
            learning_rate: 0.1,
            max_bins: 256,
            seed: 0,
        }
    }
}

impl GbtSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(HarError::InvalidParameter(
                "max_depth and min_samples_leaf must be positive".into(),
            ));
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(HarError::InvalidParameter("max_features must lie in (0, 1]".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(HarError::InvalidParameter("learning_rate must be positive".into()));
        }
        if !(2..=65_536).contains(&self.max_bins) {
            return Err(HarError::InvalidParameter("max_bins must lie in 2..=65536".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree; node 0 is the root, `x <= threshold` goes left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_with(|f| row[f])
    }

    fn predict_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if value(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub n_features: usize,
    pub n_classes: usize,
    /// Initial raw score per class, the log of the class prior.
    pub init: Vec<f64>,
    /// `rounds[m][k]` is the tree for class `k` in round `m`; leaf values
    /// already include the learning rate.
    pub rounds: Vec<Vec<RegressionTree>>,
    /// Mean training cross-entropy before the first round and after each one.
    pub loss_history: Vec<f64>,
}

impl GbtModel {
    pub fn raw_scores(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_width(x, self.n_features)?;
        let mut f = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            for k in 0..self.n_classes {
                f[[i, k]] = self
                    .rounds
                    .iter()
                    .fold(self.init[k], |acc, r| acc + r[k].predict_row(&row));
            }
        }
        Ok(f)
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut f = self.raw_scores(x)?;
        softmax_rows(&mut f);
        Ok(f)
    }
}

/// Training columns discretised once per fit. Each feature's sorted values
/// are cut into at most `max_bins` consecutive bins of roughly equal
/// population; equal values always share a bin, and with few distinct values
/// every value gets its own bin, which makes the split search exact.
struct Binned {
    n: usize,
    cols: Vec<f64>,
    codes: Vec<u16>,
    /// Smallest and largest training value inside each bin.
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
}

impl Binned {
    fn new(x: ArrayView2<f64>, max_bins: usize) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let mut codes = vec![0u16; n * p];
        let mut lo = Vec::with_capacity(p);
        let mut hi = Vec::with_capacity(p);
        for (f, col) in x.columns().into_iter().enumerate() {
            let mut order: Vec<(f64, u32)> = col.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut groups = 0usize;
            for i in 0..n {
                if i == 0 || order[i].0 != order[i - 1].0 {
                    groups += 1;
                }
            }
            let (mut flo, mut fhi) = (Vec::new(), Vec::new());
            let mut group = 0usize;
            let mut raw_prev = usize::MAX;
            for i in 0..n {
                let v = order[i].0;
                if i > 0 && v != order[i - 1].0 {
                    group += 1;
                }
                let raw = if groups <= max_bins {
                    group
                } else if i > 0 && v == order[i - 1].0 {
                    raw_prev
                } else {
                    i * max_bins / n
                };
                if raw != raw_prev {
                    flo.push(v);
                    fhi.push(v);
                    raw_prev = raw;
                }
                *fhi.last_mut().expect("bin opened") = v;
                codes[f * n + order[i].1 as usize] = (flo.len() - 1) as u16;
            }
            lo.push(flo);
            hi.push(fhi);
        }
        Binned {
            n,
            cols: x.t().iter().copied().collect(),
            codes,
            lo,
            hi,
        }
    }

    fn n_features(&self) -> usize {
        self.lo.len()
    }

    fn value(&self, f: usize, row: usize) -> f64 {
        self.cols[f * self.n + row]
    }

    fn code(&self, f: usize, row: u32) -> usize {
        self.codes[f * self.n + row as usize] as usize
    }
}

struct NodeRows {
    node: usize,
    rows: Vec<u32>,
    sum: f64,
}

/// Best least-squares split of `rows` on feature `f`: the largest
/// `S_l²/n_l + S_r²/n_r`, ties going to the lower bin. Returns the proxy, the
/// last bin sent left and the threshold.
fn best_bin_split(
    data: &Binned,
    f: usize,
    rows: &[u32],
    target: &[f64],
    total: f64,
    min_leaf: usize,
    cnt: &mut Vec<usize>,
    sums: &mut Vec<f64>,
) -> Option<(f64, usize, f64)> {
    let nb = data.lo[f].len();
    cnt.clear();
    cnt.resize(nb, 0);
    sums.clear();
    sums.resize(nb, 0.0);
    for &r in rows {
        let b = data.code(f, r);
        cnt[b] += 1;
        sums[b] += target[r as usize];
    }
    let count = rows.len();
    let mut best: Option<(f64, usize, f64)> = None;
    let (mut nl, mut sl) = (0usize, 0.0);
    let mut prev: Option<usize> = None;
    for b in 0..nb {
        if cnt[b] == 0 {
            continue;
        }
        if let Some(bl) = prev {
            if nl >= min_leaf && count - nl >= min_leaf {
                let sr = total - sl;
                let proxy = sl * sl / nl as f64 + sr * sr / (count - nl) as f64;
                if best.is_none_or(|x| proxy > x.0) {
                    let (a, v) = (data.hi[f][bl], data.lo[f][b]);
                    let mut thr = a / 2.0 + v / 2.0;
                    if thr >= v || thr < a {
                        thr = a;
                    }
                    best = Some((proxy, bl, thr));
                }
            }
        }
        nl += cnt[b];
        sl += sums[b];
        prev = Some(b);
    }
    best
}

/// Fit one depth-limited least-squares tree to `target`. Every node draws
/// `m_features` candidate features without replacement; ties between
/// candidates go to the lower feature index.
fn fit_tree(
    data: &Binned,
    target: &[f64],
    spec: &GbtSpec,
    m_features: usize,
    rng: &mut crate::rng::StageRng,
) -> RegressionTree {
    let p = data.n_features();
    let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
    let mut level = vec![NodeRows {
        node: 0,
        rows: (0..target.len() as u32).collect(),
        sum: target.iter().sum(),
    }];
    let leaf = |s: &NodeRows| TreeNode::Leaf {
        value: spec.learning_rate * s.sum / s.rows.len() as f64,
    };
    let (mut cnt, mut sums) = (Vec::new(), Vec::new());

    for depth in 0..=spec.max_depth {
        if depth == spec.max_depth {
            for s in &level {
                nodes[s.node] = leaf(s);
            }
            break;
        }
        let mut next = Vec::new();
        for s in level {
            let count = s.rows.len();
            let mut best: Option<(f64, usize, usize, f64)> = None;
            if count >= 2 * spec.min_samples_leaf {
                let mut feats = sample(rng, p, m_features).into_vec();
                feats.sort_unstable();
                for f in feats {
                    let found =
                        best_bin_split(data, f, &s.rows, target, s.sum, spec.min_samples_leaf, &mut cnt, &mut sums);
                    if let Some((proxy, bl, thr)) = found {
                        if best.is_none_or(|b| proxy > b.0) {
                            best = Some((proxy, f, bl, thr));
                        }
                    }
                }
            }
            let parent = s.sum * s.sum / count as f64;
            match best {
                Some((proxy, f, bl, thr)) if proxy > parent => {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes[s.node] = TreeNode::Split {
                        feature: f,
                        threshold: thr,
                        left: l,
                        right: r,
                    };
                    let mut left = NodeRows { node: l, rows: Vec::new(), sum: 0.0 };
                    let mut right = NodeRows { node: r, rows: Vec::new(), sum: 0.0 };
                    for &row in &s.rows {
                        let side = if data.code(f, row) <= bl { &mut left } else { &mut right };
                        side.rows.push(row);
                        side.sum += target[row as usize];
                    }
                    next.push(left);
                    next.push(right);
                }
                _ => nodes[s.node] = leaf(&s),
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    RegressionTree { nodes }
}

fn mean_cross_entropy(f: &Array2<f64>, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, row) in f.rows().into_iter().enumerate() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[y[i]];
    }
    total / y.len() as f64
}

/// Train multiclass gradient boosting. `y` holds class indices in
/// `0..n_classes`, each of which must occur.
pub fn train_gbt(x: ArrayView2<f64>, y: &[usize], n_classes: usize, spec: &GbtSpec) -> Result<GbtModel> {
    spec.validate()?;
    check_training(x, y, n_classes)?;
    let (n, p) = x.dim();
    let m_features = ((spec.max_features * p as f64) as usize).max(1);

    let mut counts = vec![0usize; n_classes];
    y.iter().for_each(|&c| counts[c] += 1);
    let init: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();

    let pre = Binned::new(x, spec.max_bins);
    let mut f = Array2::from_shape_fn((n, n_classes), |(_, k)| init[k]);
    let mut loss_history = vec![mean_cross_entropy(&f, y)];
    let mut rounds = Vec::with_capacity(spec.n_estimators);

    for m in 0..spec.n_estimators {
        let mut prob = f.clone();
        softmax_rows(&mut prob);
        let trees: Vec<RegressionTree> = (0..n_classes)
            .into_par_iter()
            .map(|k| {
                let target: Vec<f64> = (0..n)
                    .map(|i| f64::from(u8::from(y[i] == k)) - prob[[i, k]])
                    .collect();
                let mut rng = rng_for(spec.seed, &[m as u64, k as u64]);
                fit_tree(&pre, &target, spec, m_features, &mut rng)
            })
            .collect();
        for i in 0..n {
            for (k, t) in trees.iter().enumerate() {
                f[[i, k]] += t.predict_with(|j| pre.value(j, i));
            }
        }
        loss_history.push(mean_cross_entropy(&f, y));
        rounds.push(trees);
    }

    Ok(GbtModel {
        n_features: p,
        n_classes,
        init,
        rounds,
        loss_history,
    })
}
