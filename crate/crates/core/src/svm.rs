//! Linear SVM with hinge or squared-hinge loss, trained on the primal
//! objective by mini-batch gradient descent with momentum.
//!
//! ```text
//! L(w) = ½ wᵀw + C Σₙ max(1 − wᵀxₙtₙ, 0)^k      k = 1 (hinge_l1), 2 (hinge_l2)
//! ```
//!
//! The gradients with respect to an input activation `m` are exposed so a
//! feature extractor upstream can back-propagate through the classifier.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::seed::sub_seed;

const SVMM_MAGIC: &[u8; 6] = b"SVMM1\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Loss {
    HingeL1,
    #[default]
    HingeL2,
}

impl Loss {
    fn tag(self) -> u8 {
        match self {
            Loss::HingeL1 => 1,
            Loss::HingeL2 => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Loss::HingeL1),
            2 => Ok(Loss::HingeL2),
            other => Err(Error::Parse(format!("unknown loss tag {other}"))),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::HingeL1 => "hinge_l1",
            Loss::HingeL2 => "hinge_l2",
        })
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hinge_l1" | "l1" | "hinge" => Ok(Loss::HingeL1),
            "hinge_l2" | "l2" | "squared_hinge" => Ok(Loss::HingeL2),
            other => Err(Error::Config(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvmConfig {
    pub c_penalty: f64,
    pub loss: Loss,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_initial: f64,
    pub lr_decay_factor: f64,
    pub max_lr_decays: usize,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    /// Relative improvement below which an epoch counts as a plateau.
    pub plateau_rel_tol: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c_penalty: 0.01,
            loss: Loss::HingeL2,
            batch_size: 64,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr_initial: 1e-2,
            lr_decay_factor: 0.1,
            max_lr_decays: 2,
            patience_epochs: 5,
            max_epochs: 100,
            plateau_rel_tol: 1e-4,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("svm: {what}")));
        if !(self.c_penalty >= 0.0 && self.c_penalty.is_finite()) {
            return bad("c_penalty must be finite and >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be finite and >= 0");
        }
        if !(self.lr_initial > 0.0 && self.lr_initial.is_finite()) {
            return bad("lr_initial must be positive");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return bad("lr_decay_factor must lie in (0, 1)");
        }
        if self.patience_epochs == 0 || self.max_epochs == 0 {
            return bad("patience_epochs and max_epochs must be positive");
        }
        if !(self.plateau_rel_tol >= 0.0) {
            return bad("plateau_rel_tol must be >= 0");
        }
        Ok(())
    }
}

fn check_targets(t: &[f64]) -> Result<()> {
    match t.iter().find(|&&v| v != 1.0 && v != -1.0) {
        Some(v) => Err(Error::Label(format!("binary targets must be ±1, found {v}"))),
        None => Ok(()),
    }
}

fn check_batch(w: &DVector<f64>, data: &DMatrix<f64>, t: &[f64]) -> Result<()> {
    if data.nrows() != w.len() {
        return Err(Error::Dimension(format!(
            "weights have {} entries, data has {} features",
            w.len(),
            data.nrows()
        )));
    }
    if data.ncols() != t.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} targets",
            data.ncols(),
            t.len()
        )));
    }
    check_targets(t)
}

/// `½wᵀw + C Σ max(1 − wᵀxₙtₙ, 0)^k` over the columns of `data`.
pub fn objective(w: &DVector<f64>, data: &DMatrix<f64>, t: &[f64], cfg: &SvmConfig) -> Result<f64> {
    check_batch(w, data, t)?;
    let scores = data.tr_mul(w);
    let loss: f64 = scores
        .iter()
        .zip(t)
        .map(|(s, tn)| {
            let slack = (1.0 - s * tn).max(0.0);
            match cfg.loss {
                Loss::HingeL1 => slack,
                Loss::HingeL2 => slack * slack,
            }
        })
        .sum();
    Ok(0.5 * w.dot(w) + cfg.c_penalty * loss)
}

/// Gradient of one sample's loss term with respect to the input activation.
///
/// hinge_l1: `−C tₙ w · 𝟙{1 > wᵀmₙtₙ}`; hinge_l2: `−2C tₙ w · max(1 − wᵀmₙtₙ, 0)`.
pub fn grad_wrt_input(w: &DVector<f64>, m: &DVector<f64>, t: f64, cfg: &SvmConfig) -> DVector<f64> {
    let margin = w.dot(m) * t;
    let coeff = match cfg.loss {
        Loss::HingeL1 => {
            if 1.0 > margin {
                -cfg.c_penalty * t
            } else {
                0.0
            }
        }
        Loss::HingeL2 => -2.0 * cfg.c_penalty * t * (1.0 - margin).max(0.0),
    };
    w * coeff
}

/// Gradient of the batch objective plus the `½·weight_decay·‖w‖²` decay term.
pub fn grad_wrt_weights(
    w: &DVector<f64>,
    batch: &DMatrix<f64>,
    t: &[f64],
    cfg: &SvmConfig,
) -> Result<DVector<f64>> {
    check_batch(w, batch, t)?;
    Ok(scaled_weight_grad(w, batch, t, cfg, 1.0))
}

/// Weight gradient with the loss sum scaled by `scale` (`n / batch` turns a
/// mini-batch into an unbiased estimate of the full objective's gradient).
fn scaled_weight_grad(
    w: &DVector<f64>,
    batch: &DMatrix<f64>,
    t: &[f64],
    cfg: &SvmConfig,
    scale: f64,
) -> DVector<f64> {
    let scores = batch.tr_mul(w);
    let coeffs = DVector::from_iterator(
        t.len(),
        scores.iter().zip(t).map(|(s, &tn)| {
            let slack = 1.0 - s * tn;
            match cfg.loss {
                Loss::HingeL1 if slack > 0.0 => -cfg.c_penalty * tn,
                Loss::HingeL1 => 0.0,
                Loss::HingeL2 => -2.0 * cfg.c_penalty * tn * slack.max(0.0),
            }
        }),
    );
    w * (1.0 + cfg.weight_decay) + (batch * coeffs) * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub best_objective: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    /// `d + 1` weights, the last multiplying the constant bias feature.
    pub weights: DVector<f64>,
    /// Epoch 0 is the zero-weight starting point.
    pub history: Vec<EpochRecord>,
}

/// Appends a constant-1 feature row.
pub fn augment(data: &DMatrix<f64>) -> DMatrix<f64> {
    data.clone().insert_row(data.nrows(), 1.0)
}

/// Held-out data used to detect plateaus instead of the training objective.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub data: &'a DMatrix<f64>,
    pub targets: &'a [f64],
}

pub fn train_binary(features: &DMatrix<f64>, t: &[f64], cfg: &SvmConfig) -> Result<BinaryFit> {
    train_binary_monitored(features, t, None, cfg)
}

/// Trains one binary problem. The learning rate drops by `lr_decay_factor`
/// whenever the monitored quantity (validation error if given, training
/// objective otherwise) fails to improve by `plateau_rel_tol` for
/// `patience_epochs`; once `max_lr_decays` are spent the next plateau stops
/// training. The best weights seen are returned.
pub fn train_binary_monitored(
    features: &DMatrix<f64>,
    t: &[f64],
    validation: Option<Validation<'_>>,
    cfg: &SvmConfig,
) -> Result<BinaryFit> {
    cfg.validate()?;
    if features.ncols() != t.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} targets",
            features.ncols(),
            t.len()
        )));
    }
    check_targets(t)?;
    let n = t.len();
    if n < 2 || !t.contains(&1.0) || !t.contains(&-1.0) {
        return Err(Error::Degenerate(
            "binary training needs at least one sample of each class".into(),
        ));
    }
    let val_aug = match validation {
        Some(v) => {
            if v.data.nrows() != features.nrows() || v.data.ncols() != v.targets.len() {
                return Err(Error::Dimension("validation split does not match training data".into()));
            }
            check_targets(v.targets)?;
            Some((augment(v.data), v.targets))
        }
        None => None,
    };

    let x = augment(features);
    let d = x.nrows();
    let batch = cfg.batch_size.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut w = DVector::zeros(d);
    let mut velocity = DVector::zeros(d);
    let mut lr = cfg.lr_initial;

    let monitor = |w: &DVector<f64>, obj: f64| match &val_aug {
        Some((vx, vt)) => error_rate(w, vx, vt),
        None => obj,
    };
    let start = objective(&w, &x, t, cfg)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        objective: start,
        best_objective: start,
        lr,
    }];
    let mut best_obj = start;
    let mut best_monitor = monitor(&w, start);
    let mut best_w = w.clone();
    let mut plateau_ref = best_monitor;
    let mut stale = 0;
    let mut decays = 0;

    let mut xb = DMatrix::zeros(d, batch);
    let mut tb = vec![0.0; batch];
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            if xb.ncols() != chunk.len() {
                xb = DMatrix::zeros(d, chunk.len());
                tb.resize(chunk.len(), 0.0);
            }
            for (k, &idx) in chunk.iter().enumerate() {
                xb.set_column(k, &x.column(idx));
                tb[k] = t[idx];
            }
            let scale = n as f64 / chunk.len() as f64;
            let g = scaled_weight_grad(&w, &xb, &tb, cfg, scale);
            velocity *= cfg.momentum;
            velocity.axpy(-lr, &g, 1.0);
            w += &velocity;
        }

        let obj = objective(&w, &x, t, cfg)?;
        if !obj.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "svm training diverged at epoch {epoch} (lr {lr:e}, C {}); lower lr_initial or c_penalty",
                cfg.c_penalty
            )));
        }
        best_obj = best_obj.min(obj);
        history.push(EpochRecord {
            epoch,
            objective: obj,
            best_objective: best_obj,
            lr,
        });

        let current = monitor(&w, obj);
        if current < best_monitor {
            best_monitor = current;
            best_w.copy_from(&w);
        }
        if current < plateau_ref - cfg.plateau_rel_tol * plateau_ref.abs() {
            plateau_ref = current;
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= cfg.patience_epochs {
            if decays == cfg.max_lr_decays {
                break;
            }
            decays += 1;
            lr *= cfg.lr_decay_factor;
            stale = 0;
            plateau_ref = current.min(plateau_ref);
        }
    }

    Ok(BinaryFit {
        weights: best_w,
        history,
    })
}

fn error_rate(w: &DVector<f64>, x: &DMatrix<f64>, t: &[f64]) -> f64 {
    let scores = x.tr_mul(w);
    let wrong = scores
        .iter()
        .zip(t)
        .filter(|(s, &tn)| (if **s > 0.0 { 1.0 } else { -1.0 }) != tn)
        .count();
    wrong as f64 / t.len().max(1) as f64
}

/// One-vs-rest linear SVM over `classes` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// `classes × (d + 1)`; the last column is the bias.
    pub weights: DMatrix<f64>,
    pub loss: Loss,
    /// Per-class training history (empty for deserialized models).
    pub history: Vec<Vec<EpochRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// `classes × m` decision values.
    pub decision: DMatrix<f64>,
}

pub fn train_multiclass(
    data: &DMatrix<f64>,
    labels: &[usize],
    classes: usize,
    cfg: &SvmConfig,
) -> Result<SvmModel> {
    train_multiclass_monitored(data, labels, classes, None, cfg)
}

/// One binary problem per class (class `c` → +1, rest → −1); class `c`
/// trains with seed `sub_seed(cfg.seed, "ovr-{c}")`.
pub fn train_multiclass_monitored(
    data: &DMatrix<f64>,
    labels: &[usize],
    classes: usize,
    validation: Option<(&DMatrix<f64>, &[usize])>,
    cfg: &SvmConfig,
) -> Result<SvmModel> {
    if classes < 2 {
        return Err(Error::Degenerate(format!("need at least 2 classes, got {classes}")));
    }
    if data.ncols() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} labels",
            data.ncols(),
            labels.len()
        )));
    }
    let mut counts = vec![0usize; classes];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::Label(format!("label {l} >= class count {classes}")))? += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Degenerate(format!("class {empty} has no training samples")));
    }
    let one_vs_rest = |labels: &[usize], c: usize| -> Vec<f64> {
        labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect()
    };

    let mut weights = DMatrix::zeros(classes, data.nrows() + 1);
    let mut history = Vec::with_capacity(classes);
    for c in 0..classes {
        let t = one_vs_rest(labels, c);
        let vt = validation.map(|(_, vl)| one_vs_rest(vl, c));
        let val = validation.zip(vt.as_deref()).map(|((vd, _), targets)| Validation {
            data: vd,
            targets,
        });
        let sub = SvmConfig {
            seed: sub_seed(cfg.seed, &format!("ovr-{c}")),
            ..cfg.clone()
        };
        let fit = train_binary_monitored(data, &t, val, &sub)
            .map_err(|e| e.in_stage("svm", format!("class {c} vs rest")))?;
        weights.set_row(c, &fit.weights.transpose());
        history.push(fit.history);
    }
    Ok(SvmModel {
        weights,
        loss: cfg.loss,
        history,
    })
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl SvmModel {
    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }

    /// Input feature dimension (without the bias feature).
    pub fn dim(&self) -> usize {
        self.weights.ncols() - 1
    }

    pub fn decision_values(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {}",
                self.dim(),
                data.nrows()
            )));
        }
        Ok(&self.weights * augment(data))
    }

    pub fn predict(&self, data: &DMatrix<f64>) -> Result<Prediction> {
        let decision = self.decision_values(data)?;
        let labels = decision
            .column_iter()
            .map(|col| argmax_first(col.iter().copied()))
            .collect();
        Ok(Prediction { labels, decision })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_magic(SVMM_MAGIC);
        enc.u64(self.classes() as u64)
            .u8(self.loss.tag())
            .field(&codec::encode_matrix(&self.weights));
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, SVMM_MAGIC, "SVMM1")?;
        let classes = dec.usize()?;
        let loss = Loss::from_tag(dec.u8()?)?;
        let weights = codec::decode_matrix(dec.field()?)?;
        dec.finish()?;
        if weights.nrows() != classes || weights.ncols() < 1 {
            return Err(Error::Parse(format!(
                "SVMM1: weight matrix {}x{} for {classes} classes",
                weights.nrows(),
                weights.ncols()
            )));
        }
        Ok(SvmModel {
            weights,
            loss,
            history: Vec::new(),
        })
    }

    /// `class,epoch,objective,best_objective,lr` rows.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("class,epoch,objective,best_objective,lr\n");
        for (c, records) in self.history.iter().enumerate() {
            for r in records {
                out.push_str(&format!(
                    "{c},{},{:?},{:?},{:?}\n",
                    r.epoch, r.objective, r.best_objective, r.lr
                ));
            }
        }
        out
    }
}

pub fn predict(model: &SvmModel, data: &DMatrix<f64>) -> Result<Prediction> {
    model.predict(data)
}
