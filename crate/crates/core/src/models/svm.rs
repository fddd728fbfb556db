//! RBF support vector machine: SMO solver, one-vs-one multiclass, Platt
//! scaling and pairwise coupling for class probabilities.

use std::fmt;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HarError, Result};

use super::{check_training, check_width};

const TAU: f64 = 1e-12;
const MIN_PROB: f64 = 1e-7;

/// RBF width rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    /// `1 / (p · Var(X))` over all training entries.
    Scale,
    /// `1 / p`.
    Auto,
    Fixed(f64),
}

impl Gamma {
    pub fn resolve(self, x: ArrayView2<f64>) -> f64 {
        let p = x.ncols() as f64;
        match self {
            Gamma::Fixed(g) => g,
            Gamma::Auto => 1.0 / p,
            Gamma::Scale => {
                let n = x.len() as f64;
                let mean = x.sum() / n;
                let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    1.0 / (p * var)
                } else {
                    1.0
                }
            }
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Scale => f.write_str("scale"),
            Gamma::Auto => f.write_str("auto"),
            Gamma::Fixed(g) => write!(f, "{g}"),
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Fixed(g) => s.serialize_f64(*g),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(g) => Ok(Gamma::Fixed(g)),
            Raw::Name(s) => match s.as_str() {
                "scale" => Ok(Gamma::Scale),
                "auto" => Ok(Gamma::Auto),
                other => Err(serde::de::Error::custom(format!("unknown gamma '{other}'"))),
            },
        }
    }
}

/// How pairwise decision values become class probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMode {
    /// Sigmoid fitted per pair on training decision values, then pairwise
    /// coupling of the pair probabilities.
    PlattCoupling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSpec {
    pub c: f64,
    pub gamma: Gamma,
    pub probability: ProbabilityMode,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Kernel row cache per binary problem, in MiB.
    pub cache_mb: usize,
    pub max_iter: usize,
}

impl Default for SvmSpec {
    fn default() -> Self {
        SvmSpec {
            c: 1.6,
            gamma: Gamma::Scale,
            probability: ProbabilityMode::PlattCoupling,
            tol: 1e-3,
            cache_mb: 64,
            max_iter: 10_000_000,
        }
    }
}

impl SvmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(HarError::InvalidParameter("C must be positive".into()));
        }
        if let Gamma::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(HarError::InvalidParameter("gamma must be positive".into()));
            }
        }
        if !(self.tol > 0.0) {
            return Err(HarError::InvalidParameter("tol must be positive".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Row-major data with cached squared norms for RBF evaluation.
struct KernelData {
    p: usize,
    rows: Vec<f64>,
    norms: Vec<f64>,
    gamma: f64,
}

impl KernelData {
    fn new(x: ArrayView2<f64>, gamma: f64) -> Self {
        let p = x.ncols();
        let rows: Vec<f64> = x.iter().copied().collect();
        let norms = rows.chunks(p.max(1)).map(|r| dot(r, r)).collect();
        KernelData { p, rows, norms, gamma }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        let d = (self.norms[i] + self.norms[j] - 2.0 * dot(self.row(i), self.row(j))).max(0.0);
        (-self.gamma * d).exp()
    }
}

/// Least-recently-used cache of kernel rows.
struct RowCache {
    slots: Vec<Option<Vec<f64>>>,
    stamp: Vec<u64>,
    clock: u64,
    cached: usize,
    capacity: usize,
}

impl RowCache {
    fn new(n: usize, mb: usize) -> Self {
        let capacity = ((mb << 20) / (8 * n.max(1))).clamp(2, n.max(2));
        RowCache {
            slots: vec![None; n],
            stamp: vec![0; n],
            clock: 0,
            cached: 0,
            capacity,
        }
    }

    /// Ensure row `i` is present; `keep` is never evicted.
    fn fetch(&mut self, i: usize, keep: usize, kd: &KernelData) {
        self.clock += 1;
        self.stamp[i] = self.clock;
        if self.slots[i].is_some() {
            return;
        }
        if self.cached >= self.capacity {
            let victim = (0..self.slots.len())
                .filter(|&t| t != keep && self.slots[t].is_some())
                .min_by_key(|&t| self.stamp[t])
                .expect("cache holds at least one evictable row");
            self.slots[victim] = None;
            self.cached -= 1;
        }
        let n = self.slots.len();
        self.slots[i] = Some((0..n).map(|t| kd.k(i, t)).collect());
        self.cached += 1;
    }

    fn get(&self, i: usize) -> &[f64] {
        self.slots[i].as_deref().expect("row fetched")
    }
}

/// Solution of one binary C-SVC dual.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Decision values `Σ αⱼ yⱼ K(xⱼ, xᵢ) − ρ` on the training rows.
    pub decision: Vec<f64>,
}

/// Solve `min ½αᵀQα − eᵀα` subject to `yᵀα = 0`, `0 ≤ α ≤ C`, with
/// `Q_ij = y_i y_j exp(−γ‖x_i − x_j‖²)` and `y ∈ {−1, +1}`, by SMO with
/// second-order working-set selection.
pub fn solve_binary(x: ArrayView2<f64>, y: &[f64], c: f64, gamma: f64, spec: &SvmSpec) -> BinarySolution {
    let kd = KernelData::new(x, gamma);
    solve_kernel(&kd, y, c, spec)
}

fn solve_kernel(kd: &KernelData, y: &[f64], c: f64, spec: &SvmSpec) -> BinarySolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let qd: Vec<f64> = (0..n).map(|i| kd.k(i, i)).collect();
    let mut cache = RowCache::new(n, spec.cache_mb);
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < spec.max_iter {
        // First index: maximal violation.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if y[t] > 0.0 {
                if !upper(alpha[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i_sel = t;
                }
            } else if !lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                i_sel = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            cache.fetch(i_sel, i_sel, kd);
        }
        for t in 0..n {
            if y[t] > 0.0 {
                if !lower(alpha[t]) {
                    let grad_diff = gmax + grad[t];
                    if grad[t] >= gmax2 {
                        gmax2 = grad[t];
                    }
                    if grad_diff > 0.0 && i_sel != usize::MAX {
                        let qit = y[i_sel] * y[t] * cache.get(i_sel)[t];
                        let quad = qd[i_sel] + qd[t] - 2.0 * y[i_sel] * qit;
                        let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            j_sel = t;
                            obj_min = obj;
                        }
                    }
                }
            } else if !upper(alpha[t]) {
                let grad_diff = gmax - grad[t];
                if -grad[t] >= gmax2 {
                    gmax2 = -grad[t];
                }
                if grad_diff > 0.0 && i_sel != usize::MAX {
                    let qit = y[i_sel] * y[t] * cache.get(i_sel)[t];
                    let quad = qd[i_sel] + qd[t] + 2.0 * y[i_sel] * qit;
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        j_sel = t;
                        obj_min = obj;
                    }
                }
            }
        }
        if gmax + gmax2 < spec.tol || j_sel == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        cache.fetch(j, i, kd);
        cache.fetch(i, j, kd);
        let kij = cache.get(i)[j];
        let qij = y[i] * y[j] * kij;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = {
                let q = qd[i] + qd[j] + 2.0 * qij;
                if q > 0.0 {
                    q
                } else {
                    TAU
                }
            };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = {
                let q = qd[i] + qd[j] - 2.0 * qij;
                if q > 0.0 {
                    q
                } else {
                    TAU
                }
            };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (ki, kj) = (cache.get(i), cache.get(j));
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut nr_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nr_free += 1;
            sum_free += yg;
        }
    }
    let rho = if nr_free > 0 {
        sum_free / nr_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let decision = (0..n).map(|t| y[t] * (grad[t] + 1.0) - rho).collect();
    BinarySolution {
        alpha,
        rho,
        iterations,
        converged,
        decision,
    }
}

/// Fit `P(y = +1 | f) = 1 / (1 + exp(A f + B))` by regularised maximum
/// likelihood with a Newton method and backtracking line search.
pub fn sigmoid_train(dec: &[f64], positive: &[bool]) -> (f64, f64) {
    let prior1 = positive.iter().filter(|&&b| b).count() as f64;
    let prior0 = positive.len() as f64 - prior1;
    let (max_iter, min_step, sigma, eps) = (100, 1e-10, 1e-12, 1e-5);
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = positive.iter().map(|&b| if b { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(d, ti)| {
                let f = d * a + b;
                if f >= 0.0 {
                    ti * f + (-f).exp().ln_1p()
                } else {
                    (ti - 1.0) * f + f.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..max_iter {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (d, ti) in dec.iter().zip(&t) {
            let f = d * a + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += d * d * d2;
            h22 += d2;
            h21 += d * d2;
            let d1 = ti - p;
            g1 += d * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    (a, b)
}

pub fn sigmoid_predict(dec: f64, a: f64, b: f64) -> f64 {
    let f = dec * a + b;
    if f >= 0.0 {
        (-f).exp() / (1.0 + (-f).exp())
    } else {
        1.0 / (1.0 + f.exp())
    }
}

/// Combine pairwise probabilities `r[i][j] ≈ P(i | i or j)` into one class
/// distribution (Wu, Lin and Weng, second method).
pub fn couple_pairwise(r: &[Vec<f64>]) -> Vec<f64> {
    let k = r.len();
    let mut q = vec![vec![0.0; k]; k];
    for t in 0..k {
        for j in 0..k {
            if j != t {
                q[t][t] += r[j][t] * r[j][t];
                q[t][j] = -r[j][t] * r[t][j];
            }
        }
    }
    let mut p = vec![1.0 / k as f64; k];
    let mut qp = vec![0.0; k];
    let max_iter = 100.max(k);
    let eps = 0.005 / k as f64;
    for _ in 0..max_iter {
        let mut pqp = 0.0;
        for t in 0..k {
            qp[t] = (0..k).map(|j| q[t][j] * p[j]).sum();
            pqp += p[t] * qp[t];
        }
        let max_err = (0..k).map(|t| (qp[t] - pqp).abs()).fold(0.0, f64::max);
        if max_err < eps {
            break;
        }
        for t in 0..k {
            let diff = (-qp[t] + pqp) / q[t][t];
            p[t] += diff;
            pqp = (pqp + diff * (diff * q[t][t] + 2.0 * qp[t])) / (1.0 + diff) / (1.0 + diff);
            for j in 0..k {
                qp[j] = (qp[j] + diff * q[t][j]) / (1.0 + diff);
                p[j] /= 1.0 + diff;
            }
        }
    }
    p.iter_mut().for_each(|v| *v = v.max(0.0));
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Convergence record of one binary subproblem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostics {
    pub classes: (usize, usize),
    pub iterations: usize,
    pub converged: bool,
    pub n_support: usize,
    pub sum_alpha_y: f64,
    pub min_alpha: f64,
    pub max_alpha: f64,
}

/// Classifier for classes `a < b`; positive decision values favour `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub a: usize,
    pub b: usize,
    /// `(support vector index, αᵢ yᵢ)`.
    pub coef: Vec<(usize, f64)>,
    pub rho: f64,
    pub sigmoid_a: f64,
    pub sigmoid_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub gamma: f64,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    pub pairs: Vec<PairModel>,
    pub diagnostics: Vec<PairDiagnostics>,
}

impl SvmModel {
    /// Decision values per row, one column per pair in `pairs` order.
    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_width(x, self.n_features)?;
        let sv = Array2::from_shape_fn((self.support_vectors.len(), self.n_features), |(i, j)| {
            self.support_vectors[i][j]
        });
        let svd = KernelData::new(sv.view(), self.gamma);
        let rows: Vec<Vec<f64>> = x
            .rows()
            .into_iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|row| {
                let r = row.to_vec();
                let nr = dot(&r, &r);
                let k: Vec<f64> = (0..svd.norms.len())
                    .map(|s| {
                        let d = (nr + svd.norms[s] - 2.0 * dot(&r, svd.row(s))).max(0.0);
                        (-self.gamma * d).exp()
                    })
                    .collect();
                self.pairs
                    .iter()
                    .map(|pm| pm.coef.iter().map(|&(s, c)| c * k[s]).sum::<f64>() - pm.rho)
                    .collect()
            })
            .collect();
        let mut out = Array2::zeros((x.nrows(), self.pairs.len()));
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                out[[i, j]] = *v;
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let dec = self.decision_function(x)?;
        let k = self.n_classes;
        let mut out = Array2::zeros((x.nrows(), k));
        for (i, row) in dec.rows().into_iter().enumerate() {
            let mut r = vec![vec![0.0; k]; k];
            for (pm, d) in self.pairs.iter().zip(row.iter()) {
                let pa = sigmoid_predict(*d, pm.sigmoid_a, pm.sigmoid_b).clamp(MIN_PROB, 1.0 - MIN_PROB);
                r[pm.a][pm.b] = pa;
                r[pm.b][pm.a] = 1.0 - pa;
            }
            for (j, v) in couple_pairwise(&r).into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        Ok(out)
    }

    /// One-vs-one majority vote; ties go to the lowest class index.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let dec = self.decision_function(x)?;
        Ok(dec
            .rows()
            .into_iter()
            .map(|row| {
                let mut votes = vec![0usize; self.n_classes];
                for (pm, d) in self.pairs.iter().zip(row.iter()) {
                    votes[if *d > 0.0 { pm.a } else { pm.b }] += 1;
                }
                let best = *votes.iter().max().unwrap_or(&0);
                votes.iter().position(|&v| v == best).unwrap_or(0)
            })
            .collect())
    }
}

/// Train a one-vs-one RBF SVM. `y` holds class indices in `0..n_classes`.
pub fn train_svm(x: ArrayView2<f64>, y: &[usize], n_classes: usize, spec: &SvmSpec) -> Result<SvmModel> {
    spec.validate()?;
    check_training(x, y, n_classes)?;
    let gamma = spec.gamma.resolve(x);
    let p = x.ncols();
    let pairs: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
        .collect();

    let solved: Vec<(Vec<usize>, BinarySolution, (f64, f64))> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == a || y[i] == b).collect();
            let sub = Array2::from_shape_fn((rows.len(), p), |(i, j)| x[[rows[i], j]]);
            let yy: Vec<f64> = rows.iter().map(|&i| if y[i] == a { 1.0 } else { -1.0 }).collect();
            let sol = solve_binary(sub.view(), &yy, spec.c, gamma, spec);
            let positive: Vec<bool> = yy.iter().map(|&v| v > 0.0).collect();
            let sig = sigmoid_train(&sol.decision, &positive);
            (rows, sol, sig)
        })
        .collect();

    let mut sv_index = vec![usize::MAX; y.len()];
    let mut support_vectors = Vec::new();
    let mut models = Vec::with_capacity(pairs.len());
    let mut diagnostics = Vec::with_capacity(pairs.len());
    for (&(a, b), (rows, sol, (sa, sb))) in pairs.iter().zip(solved) {
        let mut coef = Vec::new();
        let mut sum_alpha_y = 0.0;
        for (local, &row) in rows.iter().enumerate() {
            let alpha = sol.alpha[local];
            let yl = if y[row] == a { 1.0 } else { -1.0 };
            sum_alpha_y += alpha * yl;
            if alpha > 0.0 {
                if sv_index[row] == usize::MAX {
                    sv_index[row] = support_vectors.len();
                    support_vectors.push(x.row(row).to_vec());
                }
                coef.push((sv_index[row], alpha * yl));
            }
        }
        diagnostics.push(PairDiagnostics {
            classes: (a, b),
            iterations: sol.iterations,
            converged: sol.converged,
            n_support: coef.len(),
            sum_alpha_y,
            min_alpha: sol.alpha.iter().copied().fold(f64::INFINITY, f64::min),
            max_alpha: sol.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
        models.push(PairModel {
            a,
            b,
            coef,
            rho: sol.rho,
            sigmoid_a: sa,
            sigmoid_b: sb,
        });
    }
    Ok(SvmModel {
        n_features: p,
        n_classes,
        gamma,
        c: spec.c,
        support_vectors,
        pairs: models,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testdata::blobs;
    use ndarray::array;

    fn xor() -> (Array2<f64>, Vec<usize>) {
        (array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]], vec![0, 0, 1, 1])
    }

    fn fixed(g: f64) -> SvmSpec {
        SvmSpec {
            gamma: Gamma::Fixed(g),
            ..SvmSpec::default()
        }
    }

    #[test]
    fn xor_is_separated() {
        let (x, y) = xor();
        let m = train_svm(x.view(), &y, 2, &fixed(1.0)).unwrap();
        assert_eq!(m.predict(x.view()).unwrap(), y);
        let d = &m.diagnostics[0];
        assert!(d.converged);
        assert!(d.min_alpha >= 0.0 && d.max_alpha <= 1.6);
        assert!(d.sum_alpha_y.abs() <= 1e-6);
    }

    /// Recompute the dual gradient from the full kernel matrix and check the
    /// maximal violating pair is within tolerance.
    fn kkt_gap(x: &Array2<f64>, y: &[f64], sol: &BinarySolution, c: f64, gamma: f64) -> f64 {
        let n = y.len();
        let k = |i: usize, j: usize| {
            let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
            (-gamma * d).exp()
        };
        let g: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * k(i, j) * sol.alpha[j]).sum::<f64>() - 1.0)
            .collect();
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * g[t];
            let in_up = (y[t] > 0.0 && sol.alpha[t] < c) || (y[t] < 0.0 && sol.alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && sol.alpha[t] > 0.0) || (y[t] < 0.0 && sol.alpha[t] < c);
            if in_up {
                up = up.max(v);
            }
            if in_low {
                low = low.min(v);
            }
        }
        up - low
    }

    #[test]
    fn binary_solution_satisfies_kkt() {
        let (x, yc) = blobs(40, 2, 3, 1.5, 8);
        let y: Vec<f64> = yc.iter().map(|&c| if c == 0 { 1.0 } else { -1.0 }).collect();
        let spec = SvmSpec::default();
        for &(c, gamma) in &[(1.6, 0.3), (0.1, 1.0), (100.0, 0.05)] {
            let sol = solve_binary(x.view(), &y, c, gamma, &spec);
            assert!(sol.converged);
            assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
            let s: f64 = sol.alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!(s.abs() <= 1e-6, "sum alpha y = {s}");
            assert!(kkt_gap(&x, &y, &sol, c, gamma) < spec.tol + 1e-9);
        }
    }

    #[test]
    fn tiny_cache_gives_identical_solution() {
        let (x, yc) = blobs(30, 2, 3, 1.0, 2);
        let y: Vec<f64> = yc.iter().map(|&c| if c == 0 { 1.0 } else { -1.0 }).collect();
        let big = solve_binary(x.view(), &y, 1.6, 0.5, &SvmSpec::default());
        let small = solve_binary(
            x.view(),
            &y,
            1.6,
            0.5,
            &SvmSpec {
                cache_mb: 0,
                ..SvmSpec::default()
            },
        );
        assert_eq!(big, small);
    }

    #[test]
    fn multiclass_pairs_satisfy_constraints() {
        let (x, y) = blobs(25, 4, 5, 2.0, 3);
        let m = train_svm(x.view(), &y, 4, &SvmSpec::default()).unwrap();
        assert_eq!(m.pairs.len(), 6);
        for d in &m.diagnostics {
            assert!(d.converged);
            assert!(d.min_alpha >= 0.0 && d.max_alpha <= m.c);
            assert!(d.sum_alpha_y.abs() <= 1e-6);
        }
        let p = m.predict_proba(x.view()).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn rescaling_inputs_and_gamma_keeps_predictions() {
        let (x, y) = blobs(20, 3, 4, 2.5, 5);
        let base = train_svm(x.view(), &y, 3, &fixed(0.2)).unwrap();
        for a in [0.1, 3.0, 17.0] {
            let xs = x.mapv(|v| v * a);
            let m = train_svm(xs.view(), &y, 3, &fixed(0.2 / (a * a))).unwrap();
            assert_eq!(m.predict(xs.view()).unwrap(), base.predict(x.view()).unwrap());
        }
    }

    #[test]
    fn gamma_scale_rule() {
        let x = array![[1.0, 2.0], [3.0, 6.0]];
        // entries 1,2,3,6: mean 3, variance 3.5
        assert!((Gamma::Scale.resolve(x.view()) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(Gamma::Scale.resolve(Array2::from_elem((3, 2), 4.0).view()), 1.0);
        assert_eq!(Gamma::Auto.resolve(x.view()), 0.5);
        for g in [Gamma::Scale, Gamma::Auto, Gamma::Fixed(0.25)] {
            let s = serde_json::to_string(&g).unwrap();
            assert_eq!(serde_json::from_str::<Gamma>(&s).unwrap(), g);
        }
        assert!(serde_json::from_str::<Gamma>("\"wide\"").is_err());
    }

    #[test]
    fn platt_fit_orients_sigmoid() {
        let dec = [-3.0, -2.0, -1.5, -0.2, 0.3, 1.0, 2.0, 2.5];
        let pos = [false, false, false, true, false, true, true, true];
        let (a, b) = sigmoid_train(&dec, &pos);
        assert!(a < 0.0);
        assert!(sigmoid_predict(2.0, a, b) > 0.5 && sigmoid_predict(-2.0, a, b) < 0.5);
        let p = sigmoid_predict(1e6, a, b);
        assert!(p.is_finite() && p <= 1.0);
    }

    #[test]
    fn coupling_recovers_consistent_pairwise_probabilities() {
        for truth in [vec![0.5, 0.3, 0.2], vec![0.1, 0.1, 0.7, 0.1], vec![0.9, 0.1]] {
            let k = truth.len();
            let r: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| if i == j { 0.0 } else { truth[i] / (truth[i] + truth[j]) }).collect())
                .collect();
            let p = couple_pairwise(&r);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in p.iter().zip(&truth) {
                assert!((a - b).abs() < 1e-3, "{p:?} vs {truth:?}");
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SvmSpec { c: 0.0, ..SvmSpec::default() }.validate().is_err());
        assert!(fixed(-1.0).validate().is_err());
        assert!(SvmSpec::default().validate().is_ok());
    }
}
