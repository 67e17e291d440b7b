//! Mini-batch SGD on mean cross-entropy, evaluation and prediction.
//!
//! Shuffling draws from `rng_for(seed, [epoch])`, so a run is reproducible
//! from its seed alone. The learning rate walks down the schedule whenever
//! `plateau_epochs` consecutive epochs each improve the mean loss by less
//! than `plateau_rel`.

use std::borrow::Cow;
use std::path::Path;

use escher_core::group::{WallpaperGroup, NUM_GROUPS};
use escher_core::image::PatternImage;
use escher_core::metrics::ConfusionMatrix;
use escher_core::rng::rng_for;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::layers::softmax;
use crate::model::EscherNet;
use crate::scalar::Scalar;

/// Pixel offset applied when feeding images to the network, so inputs are
/// centred on zero.
pub const INPUT_OFFSET: f32 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rates in the order they are used.
    pub lr_schedule: Vec<f64>,
    pub plateau_epochs: usize,
    pub plateau_rel: f64,
    pub seed: u64,
    /// Number of parallel gradient chunks per batch; 0 or 1 runs the
    /// single-threaded reference path.
    pub parallel_chunks: usize,
    /// Stop once an epoch's mean loss falls below this value.
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            lr_schedule: vec![0.01, 0.005, 0.001],
            plateau_epochs: 3,
            plateau_rel: 0.01,
            seed: 0,
            parallel_chunks: 0,
            target_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(NetError::Config("batch size must be at least 1".into()));
        }
        if self.lr_schedule.is_empty() || self.lr_schedule.iter().any(|&lr| !(lr > 0.0 && lr.is_finite())) {
            return Err(NetError::Config(format!("learning rates {:?}", self.lr_schedule)));
        }
        Ok(())
    }
}

/// Images stored back to back as network inputs, with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub side: usize,
    pub x: Vec<T>,
    pub labels: Vec<usize>,
}

/// Network input for one image: pixels shifted by [`INPUT_OFFSET`].
pub fn image_input<T: Scalar>(img: &PatternImage) -> Vec<T> {
    img.pixels().iter().map(|&v| T::of_f64((v - INPUT_OFFSET) as f64)).collect()
}

impl<T: Scalar> Dataset<T> {
    pub fn new(side: usize) -> Self {
        Self { side, x: Vec::new(), labels: Vec::new() }
    }

    pub fn push(&mut self, img: &PatternImage, label: usize) -> Result<()> {
        if img.width() != self.side || img.height() != self.side {
            return Err(NetError::Shape(format!(
                "{}x{} image in a {}x{} dataset",
                img.width(),
                img.height(),
                self.side,
                self.side
            )));
        }
        self.x.extend(image_input::<T>(img));
        self.labels.push(label);
        Ok(())
    }

    pub fn from_images<'a>(side: usize, items: impl IntoIterator<Item = (&'a PatternImage, usize)>) -> Result<Self> {
        let mut d = Self::new(side);
        for (img, label) in items {
            d.push(img, label)?;
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let px = self.side * self.side;
        &self.x[i * px..(i + 1) * px]
    }

    /// Gathers the listed samples into a batch.
    pub fn gather(&self, idx: &[usize]) -> (Vec<T>, Vec<usize>) {
        let mut x = Vec::with_capacity(idx.len() * self.side * self.side);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.sample(i));
            y.push(self.labels[i]);
        }
        (x, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub train_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Mean batch loss of every SGD step, in order.
    pub step_losses: Vec<f64>,
}

impl History {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "loss", "lr", "train_acc"])?;
        for r in &self.epochs {
            w.write_record([r.epoch.to_string(), format!("{:.6}", r.loss), format!("{}", r.lr), format!("{:.6}", r.train_acc)])?;
        }
        w.flush().map_err(|e| NetError::io(path, e))?;
        Ok(())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.loss)
    }
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Trains on a fixed dataset. See [`train_with`].
pub fn train<T: Scalar>(model: &mut EscherNet<T>, data: &Dataset<T>, cfg: &TrainConfig) -> Result<History> {
    train_with(model, cfg, |_| Ok(Cow::Borrowed(data)))
}

/// Trains with a dataset supplied per epoch, which lets callers redraw
/// augmentations every epoch. Aborts on non-finite loss or gradients.
pub fn train_with<'d, T, F>(model: &mut EscherNet<T>, cfg: &TrainConfig, mut data_for_epoch: F) -> Result<History>
where
    T: Scalar,
    F: FnMut(usize) -> Result<Cow<'d, Dataset<T>>>,
{
    cfg.validate()?;
    let classes = model.cfg.classes;
    let mut history = History::default();
    let mut lr_idx = 0;
    let mut stalled = 0;
    let mut prev_loss = f64::INFINITY;
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let data = data_for_epoch(epoch)?;
        if data.is_empty() {
            return Err(NetError::EmptyDataset);
        }
        if data.side != model.cfg.input {
            return Err(NetError::Shape(format!("dataset side {} for model input {}", data.side, model.cfg.input)));
        }
        if let Some(&bad) = data.labels.iter().find(|&&l| l >= classes) {
            return Err(NetError::Label(bad, classes));
        }
        let lr = cfg.lr_schedule[lr_idx];
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng_for(cfg.seed, &[epoch as u64]));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let (x, y) = data.gather(batch);
            let (loss, grads, logits) = if cfg.parallel_chunks > 1 {
                model.loss_and_grads_parallel(&x, &y, cfg.parallel_chunks)?
            } else {
                let (loss, g, fwd) = model.loss_and_grads(&x, &y)?;
                (loss, g, fwd.logits().to_vec())
            };
            if !loss.is_finite() {
                return Err(NetError::NonFinite { what: "loss".into(), epoch, step });
            }
            if !grads.all_finite() {
                return Err(NetError::NonFinite { what: "gradient".into(), epoch, step });
            }
            correct += logits.chunks(classes).zip(&y).filter(|(row, &l)| argmax(row) == l).count();
            model.sgd_step(&grads, T::of_f64(lr));
            if !model.all_finite() {
                return Err(NetError::NonFinite { what: "weights".into(), epoch, step });
            }
            loss_sum += loss * y.len() as f64;
            history.step_losses.push(loss);
            step += 1;
        }
        let loss = loss_sum / data.len() as f64;
        history.epochs.push(EpochRecord {
            epoch,
            loss,
            lr,
            train_acc: correct as f64 / data.len() as f64,
        });
        if cfg.target_loss.is_some_and(|t| loss < t) {
            break;
        }
        if prev_loss - loss < cfg.plateau_rel * prev_loss.abs() {
            stalled += 1;
        } else {
            stalled = 0;
        }
        prev_loss = loss;
        if stalled >= cfg.plateau_epochs && lr_idx + 1 < cfg.lr_schedule.len() {
            lr_idx += 1;
            stalled = 0;
        }
    }
    Ok(history)
}

/// Class index of every sample.
pub fn predict_labels<T: Scalar>(model: &EscherNet<T>, data: &Dataset<T>, batch: usize) -> Result<Vec<usize>> {
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let logits = model.logits(&data.x, data.len(), batch)?;
    Ok(logits.chunks(model.cfg.classes).map(argmax).collect())
}

/// Confusion matrix over groups; labels index [`WallpaperGroup::ALL`].
pub fn evaluate<T: Scalar>(model: &EscherNet<T>, data: &Dataset<T>, batch: usize) -> Result<ConfusionMatrix> {
    if model.cfg.classes != NUM_GROUPS {
        return Err(NetError::Config(format!("evaluation needs {NUM_GROUPS} classes, model has {}", model.cfg.classes)));
    }
    let pred = predict_labels(model, data, batch)?;
    let mut m = ConfusionMatrix::new();
    for (&t, &p) in data.labels.iter().zip(&pred) {
        m.add(WallpaperGroup::ALL[t], WallpaperGroup::ALL[p]);
    }
    Ok(m)
}

/// Most likely group and the softmax distribution for one image.
pub fn predict<T: Scalar>(model: &EscherNet<T>, img: &PatternImage) -> Result<(WallpaperGroup, Vec<f64>)> {
    if model.cfg.classes != NUM_GROUPS {
        return Err(NetError::Config(format!("prediction needs {NUM_GROUPS} classes")));
    }
    let x = image_input::<T>(img);
    let fwd = model.forward(&x, 1)?;
    let probs: Vec<f64> = softmax(fwd.logits(), NUM_GROUPS).into_iter().map(Scalar::as_f64).collect();
    Ok((WallpaperGroup::ALL[argmax(fwd.logits())], probs))
}

/// Pre-softmax outputs of the last layer, one row per sample.
pub fn embeddings<T: Scalar>(model: &EscherNet<T>, data: &Dataset<T>, batch: usize) -> Result<Vec<Vec<f64>>> {
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let logits = model.logits(&data.x, data.len(), batch)?;
    Ok(logits.chunks(model.cfg.classes).map(|r| r.iter().map(|v| v.as_f64()).collect()).collect())
}
