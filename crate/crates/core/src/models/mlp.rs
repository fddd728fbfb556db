//! One-hidden-layer perceptron: ReLU, inverted dropout, softmax output,
//! cross-entropy loss, mini-batch SGD.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};
use crate::rng::{rng_for, tag};

use super::{check_training, check_width, softmax_rows};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSpec {
    pub epochs: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    /// Weights start as Uniform(−init_range, init_range); biases start at 0.
    pub init_range: f64,
    pub seed: u64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            epochs: 500,
            hidden: 130,
            dropout: 0.6,
            learning_rate: 0.01,
            batch_size: 32,
            momentum: 0.0,
            init_range: 0.05,
            seed: 0,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(HarError::InvalidParameter("hidden and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(HarError::InvalidParameter("dropout must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(HarError::InvalidParameter("invalid learning rate or momentum".into()));
        }
        if !(self.init_range > 0.0) {
            return Err(HarError::InvalidParameter("init_range must be positive".into()));
        }
        Ok(())
    }
}

/// Network parameters: `z1 = x·w1 + b1`, `h = relu(z1)`, `z2 = h·w2 + b2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpParams {
    pub fn init(n_features: usize, hidden: usize, n_classes: usize, range: f64, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[tag("mlp-init")]);
        let mut draw = |r, c| Array2::from_shape_simple_fn((r, c), || rng.gen_range(-range..range));
        let w1 = draw(n_features, hidden);
        let w2 = draw(hidden, n_classes);
        MlpParams {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(n_classes),
        }
    }

    fn probabilities(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let h = (x.dot(&self.w1) + &self.b1).mapv_into(|v| v.max(0.0));
        let mut z = h.dot(&self.w2) + &self.b2;
        softmax_rows(&mut z);
        z
    }
}

/// Mean cross-entropy over the batch and its gradients. `mask`, when given,
/// multiplies the hidden activations (inverted dropout).
pub fn loss_and_gradients(
    params: &MlpParams,
    x: ArrayView2<f64>,
    y: &[usize],
    mask: Option<&Array2<f64>>,
) -> (f64, MlpParams) {
    let b = x.nrows() as f64;
    let z1 = x.dot(&params.w1) + &params.b1;
    let mut h = z1.mapv(|v| v.max(0.0));
    if let Some(m) = mask {
        h *= m;
    }
    let mut p = h.dot(&params.w2) + &params.b2;
    softmax_rows(&mut p);
    let loss = y
        .iter()
        .enumerate()
        .map(|(i, &c)| -p[[i, c]].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / b;

    let mut dz2 = p;
    for (i, &c) in y.iter().enumerate() {
        dz2[[i, c]] -= 1.0;
    }
    dz2 /= b;
    let dw2 = h.t().dot(&dz2);
    let db2 = dz2.sum_axis(Axis(0));
    let mut dh = dz2.dot(&params.w2.t());
    if let Some(m) = mask {
        dh *= m;
    }
    dh.zip_mut_with(&z1, |g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    let dw1 = x.t().dot(&dh);
    let db1 = dh.sum_axis(Axis(0));
    (
        loss,
        MlpParams {
            w1: dw1,
            b1: db1,
            w2: dw2,
            b2: db2,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub params: MlpParams,
    /// Mean mini-batch training loss per epoch (with dropout active).
    pub loss_history: Vec<f64>,
}

impl MlpModel {
    /// Class probabilities; dropout is not applied at inference.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_width(x, self.n_features)?;
        if x.nrows() == 0 {
            return Ok(Array2::zeros((0, self.n_classes)));
        }
        Ok(self.params.probabilities(x))
    }
}

/// Buffers for one mini-batch step, reused across batches.
struct Workspace {
    xb: Array2<f64>,
    z1: Array2<f64>,
    h: Array2<f64>,
    z2: Array2<f64>,
    dh: Array2<f64>,
    mask: Array2<f64>,
    bits: Vec<u32>,
    gw2: Array2<f64>,
    gb1: Array1<f64>,
    gb2: Array1<f64>,
}

impl Workspace {
    fn new(m: usize, p: usize, hidden: usize, k: usize) -> Self {
        Workspace {
            xb: Array2::zeros((m, p)),
            z1: Array2::zeros((m, hidden)),
            h: Array2::zeros((m, hidden)),
            z2: Array2::zeros((m, k)),
            dh: Array2::zeros((m, hidden)),
            mask: Array2::zeros((m, hidden)),
            bits: vec![0; m * hidden],
            gw2: Array2::zeros((hidden, k)),
            gb1: Array1::zeros(hidden),
            gb2: Array1::zeros(k),
        }
    }

    fn rows(&self) -> usize {
        self.xb.nrows()
    }
}

/// Forward and backward pass over the rows gathered in `ws.xb`, with
/// `ws.mask` applied when `dropout` is set. Leaves the output-layer
/// gradients in `gw2`/`gb2`, the hidden-layer delta in `dh` and its bias
/// gradient in `gb1`; the input-layer gradient is `xbᵀ·dh`. Returns the
/// summed (not averaged) loss.
fn backprop(params: &MlpParams, ws: &mut Workspace, y: &[usize], dropout: bool) -> f64 {
    let inv_m = 1.0 / y.len() as f64;
    for mut row in ws.z1.rows_mut() {
        row.assign(&params.b1);
    }
    general_mat_mul(1.0, &ws.xb, &params.w1, 1.0, &mut ws.z1);
    if dropout {
        Zip::from(&mut ws.h)
            .and(&ws.z1)
            .and(&ws.mask)
            .for_each(|h, &z, &k| *h = z.max(0.0) * k);
    } else {
        Zip::from(&mut ws.h).and(&ws.z1).for_each(|h, &z| *h = z.max(0.0));
    }
    let k = params.b2.len();
    let w2 = params.w2.as_slice().expect("standard layout");
    for (h, mut z) in ws.h.rows().into_iter().zip(ws.z2.rows_mut()) {
        z.assign(&params.b2);
        let z = z.as_slice_mut().expect("standard layout");
        for (&hj, wj) in h.iter().zip(w2.chunks_exact(k)) {
            if hj != 0.0 {
                z.iter_mut().zip(wj).for_each(|(zc, &w)| *zc += hj * w);
            }
        }
    }
    softmax_rows(&mut ws.z2);
    let mut loss = 0.0;
    for (i, &c) in y.iter().enumerate() {
        loss -= ws.z2[[i, c]].max(f64::MIN_POSITIVE).ln();
        ws.z2[[i, c]] -= 1.0;
    }
    ws.z2 *= inv_m;
    ws.gw2.fill(0.0);
    let gw2 = ws.gw2.as_slice_mut().expect("standard layout");
    for ((h, d), mut dh) in ws.h.rows().into_iter().zip(ws.z2.rows()).zip(ws.dh.rows_mut()) {
        let d = d.as_slice().expect("standard layout");
        for ((&hj, gj), (wj, dhj)) in h.iter().zip(gw2.chunks_exact_mut(k)).zip(w2.chunks_exact(k).zip(dh.iter_mut())) {
            gj.iter_mut().zip(d).for_each(|(g, &dc)| *g += hj * dc);
            *dhj = wj.iter().zip(d).map(|(&w, &dc)| w * dc).sum();
        }
    }
    ws.gb2 = ws.z2.sum_axis(Axis(0));
    if dropout {
        Zip::from(&mut ws.dh)
            .and(&ws.z1)
            .and(&ws.mask)
            .for_each(|g, &z, &k| *g = if z > 0.0 { *g * k } else { 0.0 });
    } else {
        Zip::from(&mut ws.dh).and(&ws.z1).for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
    }
    ws.gb1 = ws.dh.sum_axis(Axis(0));
    loss
}

/// Train the network. `y` holds class indices in `0..n_classes`.
pub fn train_mlp(x: ArrayView2<f64>, y: &[usize], n_classes: usize, spec: &MlpSpec) -> Result<MlpModel> {
    spec.validate()?;
    check_training(x, y, n_classes)?;
    let x = x.as_standard_layout();
    let (n, p) = x.dim();
    let hidden = spec.hidden;
    let mut params = MlpParams::init(p, hidden, n_classes, spec.init_range, spec.seed);
    let mut velocity = (spec.momentum > 0.0).then(|| MlpParams {
        w1: Array2::zeros(params.w1.raw_dim()),
        b1: Array1::zeros(hidden),
        w2: Array2::zeros(params.w2.raw_dim()),
        b2: Array1::zeros(n_classes),
    });
    let mut gw1 = Array2::zeros(params.w1.raw_dim());
    let keep = 1.0 - spec.dropout;
    let keep_below = (keep * 4_294_967_296.0).round() as u32;
    let dropout = spec.dropout > 0.0;
    let lr = spec.learning_rate;
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::with_capacity(spec.epochs);
    let mut ws = Workspace::new(spec.batch_size.min(n), p, hidden, n_classes);

    for epoch in 0..spec.epochs {
        let mut rng = rng_for(spec.seed, &[tag("mlp-epoch"), epoch as u64]);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(spec.batch_size) {
            if ws.rows() != batch.len() {
                ws = Workspace::new(batch.len(), p, hidden, n_classes);
            }
            for (r, &i) in batch.iter().enumerate() {
                ws.xb.row_mut(r).assign(&x.row(i));
            }
            if dropout {
                rng.fill(&mut ws.bits[..]);
                for (v, &b) in ws.mask.iter_mut().zip(&ws.bits) {
                    *v = if b < keep_below { 1.0 / keep } else { 0.0 };
                }
            }
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            total += backprop(&params, &mut ws, &yb, dropout);
            match velocity.as_mut() {
                None => {
                    general_mat_mul(-lr, &ws.xb.t(), &ws.dh, 1.0, &mut params.w1);
                    params.b1.scaled_add(-lr, &ws.gb1);
                    params.w2.scaled_add(-lr, &ws.gw2);
                    params.b2.scaled_add(-lr, &ws.gb2);
                }
                Some(v) => {
                    general_mat_mul(1.0, &ws.xb.t(), &ws.dh, 0.0, &mut gw1);
                    let mu = spec.momentum;
                    let step = |w: &mut Array2<f64>, v: &mut Array2<f64>, g: &Array2<f64>| {
                        Zip::from(&mut *v).and(g).for_each(|vi, &gi| *vi = mu * *vi - lr * gi);
                        *w += &*v;
                    };
                    step(&mut params.w1, &mut v.w1, &gw1);
                    step(&mut params.w2, &mut v.w2, &ws.gw2);
                    Zip::from(&mut v.b1).and(&ws.gb1).for_each(|vi, &gi| *vi = mu * *vi - lr * gi);
                    params.b1 += &v.b1;
                    Zip::from(&mut v.b2).and(&ws.gb2).for_each(|vi, &gi| *vi = mu * *vi - lr * gi);
                    params.b2 += &v.b2;
                }
            }
        }
        loss_history.push(total / n as f64);
    }

    Ok(MlpModel {
        n_features: p,
        n_classes,
        params,
        loss_history,
    })
}
