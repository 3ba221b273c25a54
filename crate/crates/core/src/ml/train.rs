//! Mini-batch SGD for linear regression, logistic regression and a
//! fully connected ReLU network, written once over [`Engine`].

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::offline::Plan;
use crate::params::Params;
use crate::rng;
use crate::share::PartyId;

use super::dataset::{DataMeta, LabelEncoding, OwnerPart};
use super::engine::{Engine, Planner};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Logistic,
    Bpnn,
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "logistic" => Ok(ModelKind::Logistic),
            "bpnn" => Ok(ModelKind::Bpnn),
            _ => Err(Error::Argument(format!("unknown model {s:?}, expected linear, logistic or bpnn"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::Bpnn => "bpnn",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Hidden layer widths, BPNN only.
    pub hidden: Vec<usize>,
    pub labels: LabelEncoding,
    /// P2 leaves before this iteration.
    pub drop_at: Option<usize>,
    /// Seeds the initial weights and the batch order. Both are public.
    pub seed: u64,
    /// Half-width of the uniform initial weights, per layer. The last entry
    /// repeats for deeper layers.
    pub init_scale: Vec<f64>,
    /// Explicit initial weights, row-major per layer. Overrides `init_scale`.
    pub initial: Option<Vec<Vec<f64>>>,
    /// Stops after this many iterations even if epochs remain.
    pub max_iterations: Option<usize>,
}

impl TrainConfig {
    pub fn new(kind: ModelKind) -> Self {
        let (lr, labels, init_scale) = match kind {
            ModelKind::Linear => (0.05, LabelEncoding::Binary { positive: 0 }, vec![0.01]),
            ModelKind::Logistic => (0.1, LabelEncoding::Binary { positive: 0 }, vec![0.01]),
            ModelKind::Bpnn => (0.3, LabelEncoding::OneHot { classes: 10 }, vec![0.05, 0.1, 0.1]),
        };
        TrainConfig {
            kind,
            batch: 128,
            lr,
            epochs: 1,
            hidden: vec![128, 128],
            labels,
            drop_at: None,
            seed: 1,
            init_scale,
            initial: None,
            max_iterations: None,
        }
    }

    /// Layer shapes `(inputs, outputs)` for `d` features.
    pub fn layer_shapes(&self, d: usize) -> Vec<(usize, usize)> {
        let out = self.labels.width();
        match self.kind {
            ModelKind::Linear | ModelKind::Logistic => vec![(d, out)],
            ModelKind::Bpnn => {
                let mut dims = vec![d];
                dims.extend_from_slice(&self.hidden);
                dims.push(out);
                dims.windows(2).map(|w| (w[0], w[1])).collect()
            }
        }
    }

    pub fn iterations_per_epoch(&self, n: usize) -> usize {
        if self.batch == 0 {
            0
        } else {
            n / self.batch
        }
    }

    pub fn total_iterations(&self, n: usize) -> usize {
        let t = self.epochs * self.iterations_per_epoch(n);
        self.max_iterations.map_or(t, |m| t.min(m))
    }

    /// Initial weights in the clear.
    pub fn initial_weights(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        let shapes = self.layer_shapes(d);
        if let Some(w) = &self.initial {
            if w.len() != shapes.len() || w.iter().zip(&shapes).any(|(w, s)| w.len() != s.0 * s.1) {
                return Err(Error::Shape("initial weights do not match the layer shapes".into()));
            }
            return Ok(w.clone());
        }
        let mut r = rng::stream(self.seed, 0, b"init", "weights");
        let mut out = Vec::with_capacity(shapes.len());
        for (l, &(a, b)) in shapes.iter().enumerate() {
            let s = *self.init_scale.get(l).or(self.init_scale.last()).unwrap_or(&0.0);
            out.push((0..a * b).map(|_| if s > 0.0 { r.gen_range(-s..s) } else { 0.0 }).collect());
        }
        Ok(out)
    }

    /// Sample order for one epoch.
    pub fn epoch_order(&self, n: usize, epoch: usize) -> Vec<usize> {
        let mut r = rng::stream(self.seed, 0, &(epoch as u64).to_le_bytes(), "batches");
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut r);
        idx
    }

    /// The batches actually trained on, in order.
    pub fn batches(&self, n: usize) -> Vec<Vec<usize>> {
        let per = self.iterations_per_epoch(n);
        let total = self.total_iterations(n);
        let mut out = Vec::with_capacity(total);
        'outer: for e in 0..self.epochs {
            let order = self.epoch_order(n, e);
            for b in 0..per {
                if out.len() == total {
                    break 'outer;
                }
                out.push(order[b * self.batch..(b + 1) * self.batch].to_vec());
            }
        }
        out
    }

    pub fn validate(&self, meta: &DataMeta) -> Result<()> {
        if self.batch == 0 || self.batch > meta.n {
            return Err(Error::Argument(format!("batch {} does not fit {} samples", self.batch, meta.n)));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Argument(format!("learning rate {}", self.lr)));
        }
        if meta.label_cols != self.labels.width() {
            return Err(Error::Shape("label width differs from the encoding".into()));
        }
        if self.kind == ModelKind::Bpnn && !matches!(self.labels, LabelEncoding::OneHot { .. }) {
            return Err(Error::Argument("the network needs one-hot labels".into()));
        }
        Ok(())
    }
}

/// What one participant ends a run with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    /// Revealed weights, at P0 only.
    pub weights: Option<Vec<Matrix>>,
    /// Iterations this participant took part in.
    pub iterations: usize,
    /// True when this participant left before the end.
    pub left_early: bool,
}

/// Shares every owner's rows and stacks them. Returns the stacked features,
/// labels, and the position of each sample in the stack.
pub fn share_dataset<E: Engine>(
    eng: &mut E,
    meta: &DataMeta,
    parts: &[Option<OwnerPart>; 3],
) -> Result<(E::V, E::V, Vec<usize>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut pos = vec![0; meta.n];
    let mut at = 0;
    for p in PartyId::ALL {
        let rows = meta.rows_of(p);
        if rows.is_empty() {
            continue;
        }
        let part = parts[p.index()].as_ref();
        xs.push(eng.input(p, part.map(|q| &q.x), (rows.len(), meta.d))?);
        ys.push(eng.input(p, part.map(|q| &q.y), (rows.len(), meta.label_cols))?);
        for r in rows {
            pos[r] = at;
            at += 1;
        }
    }
    let x = eng.vstack(&xs.iter().collect::<Vec<_>>())?;
    let y = eng.vstack(&ys.iter().collect::<Vec<_>>())?;
    Ok((x, y, pos))
}

/// `w - trunc(trunc(g) * lr)` where `g` is an untruncated gradient.
/// A zero step is public, so it is skipped rather than truncated.
fn descend<E: Engine>(eng: &mut E, w: &E::V, g: &E::V, lrc: u64) -> Result<E::V> {
    if lrc == 0 {
        return Ok(w.clone());
    }
    let g = eng.trunc(g)?;
    let step = eng.scale(&g, lrc);
    let step = eng.trunc(&step)?;
    eng.sub(w, &step)
}

/// One regression step. Returns the new weights.
pub fn regression_step<E: Engine>(
    eng: &mut E,
    kind: ModelKind,
    w: &E::V,
    xb: &E::V,
    yb: &E::V,
    lrc: u64,
) -> Result<E::V> {
    let z = eng.matmul(xb, w)?;
    let z = eng.trunc(&z)?;
    let p = match kind {
        ModelKind::Logistic => eng.sigmoid(&z)?,
        _ => z,
    };
    let err = eng.sub(&p, yb)?;
    let xt = eng.transpose(xb);
    let g = eng.matmul(&xt, &err)?;
    descend(eng, w, &g, lrc)
}

/// Forward and backward pass of the network. Returns the untruncated
/// weight gradients `A_{i-1}^T E_i`, one per layer.
pub fn network_gradients<E: Engine>(eng: &mut E, ws: &[E::V], xb: &E::V, yb: &E::V) -> Result<Vec<E::V>> {
    let layers = ws.len();
    let mut acts = vec![xb.clone()];
    let mut derivs = Vec::with_capacity(layers.saturating_sub(1));
    for (i, w) in ws.iter().enumerate() {
        let z = eng.matmul(&acts[i], w)?;
        let z = eng.trunc(&z)?;
        if i + 1 < layers {
            let (a, b) = eng.relu(&z)?;
            acts.push(a);
            derivs.push(b);
        } else {
            acts.push(z);
        }
    }
    let mut errs = vec![eng.sub(&acts[layers], yb)?];
    for i in (0..layers - 1).rev() {
        let wt = eng.transpose(&ws[i + 1]);
        let back = eng.matmul(&errs[0], &wt)?;
        let back = eng.trunc(&back)?;
        let e = eng.mul(&back, &derivs[i])?;
        errs.insert(0, e);
    }
    let mut grads = Vec::with_capacity(layers);
    for i in 0..layers {
        let at = eng.transpose(&acts[i]);
        grads.push(eng.matmul(&at, &errs[i])?);
    }
    Ok(grads)
}

pub fn network_step<E: Engine>(eng: &mut E, ws: &[E::V], xb: &E::V, yb: &E::V, lrc: u64) -> Result<Vec<E::V>> {
    let grads = network_gradients(eng, ws, xb, yb)?;
    ws.iter().zip(&grads).map(|(w, g)| descend(eng, w, g, lrc)).collect()
}

/// Public fixed-point constant `lr / batch`.
pub fn step_constant(params: &Params, cfg: &TrainConfig) -> Result<u64> {
    params.codec.encode(cfg.lr / cfg.batch as f64)
}

/// Trains on the shared dataset and reveals the model to P0.
///
/// `parts` holds whichever owners' rows this participant has; an engine
/// that plays a single party only reads its own entry.
pub fn train<E: Engine>(
    eng: &mut E,
    meta: &DataMeta,
    parts: &[Option<OwnerPart>; 3],
    cfg: &TrainConfig,
) -> Result<Outcome> {
    cfg.validate(meta)?;
    let params = eng.params().clone();
    let codec = params.codec;
    let lrc = step_constant(&params, cfg)?;

    let (x, y, pos) = share_dataset(eng, meta, parts)?;
    let shapes = cfg.layer_shapes(meta.d);
    let init = cfg.initial_weights(meta.d)?;
    let mut ws = Vec::with_capacity(shapes.len());
    for (w0, &(a, b)) in init.iter().zip(&shapes) {
        let enc = w0.iter().map(|v| codec.encode(*v)).collect::<Result<Vec<u64>>>()?;
        let m = Matrix::from_vec(a, b, enc)?;
        ws.push(eng.input(PartyId::P0, Some(&m), (a, b))?);
    }

    let batches = cfg.batches(meta.n);
    for (t, batch) in batches.iter().enumerate() {
        if !eng.begin_iteration(t, cfg.drop_at == Some(t))? {
            return Ok(Outcome { weights: None, iterations: t, left_early: true });
        }
        let rows: Vec<usize> = batch.iter().map(|i| pos[*i]).collect();
        let xb = eng.select_rows(&x, &rows);
        let yb = eng.select_rows(&y, &rows);
        ws = match cfg.kind {
            ModelKind::Linear | ModelKind::Logistic => {
                vec![regression_step(eng, cfg.kind, &ws[0], &xb, &yb, lrc)?]
            }
            ModelKind::Bpnn => network_step(eng, &ws, &xb, &yb, lrc)?,
        };
        if (t + 1) % 10 == 0 {
            log::debug!("iteration {} of {}", t + 1, batches.len());
        }
    }

    let mut revealed = Vec::with_capacity(ws.len());
    for w in &ws {
        revealed.push(eng.reveal(w)?);
    }
    let weights = revealed.into_iter().collect::<Option<Vec<Matrix>>>();
    Ok(Outcome { weights, iterations: batches.len(), left_early: false })
}

/// Material for a run of `cfg` on data shaped like `meta`, enough whether P2
/// stays to the end or leaves before any iteration, and so before any
/// iteration in between.
pub fn training_plan(params: &Params, meta: &DataMeta, cfg: &TrainConfig) -> Result<Plan> {
    let mut plans = Vec::with_capacity(2);
    for drop in [None, Some(0)] {
        let mut c = cfg.clone();
        c.drop_at = drop;
        let mut planner = Planner::new(params.clone());
        train(&mut planner, meta, &Default::default(), &c)?;
        plans.push(planner.into_plan());
    }
    Ok(plans[0].union(&plans[1]))
}
