//! Multinomial logistic regression over thumbnail pixels, trained by seeded
//! mini-batch SGD. Pixels are divided by 255 before use.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::encode::Thumbnail;
use crate::error::{Error, Result};
use crate::layout::CELLS;
use crate::pngio::PixelGrid;
use crate::seeds;

const LINEAR_MAGIC: &str = "flowpix-linear v1";
pub const PIXEL_SCALE: f64 = 255.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.001,
            seed: 0,
            l2: 0.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParam("epochs and batch_size must be at least 1".into()));
        }
        // zero is accepted: it leaves the model at its initialization
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidParam("l2 must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Weights are stored pixel-major: `weights[p * K + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub class_names: Vec<String>,
}

/// A normalized input row and its class.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: usize,
}

impl Example {
    pub fn from_pixels(pixels: &PixelGrid, y: usize) -> Self {
        Example {
            x: normalize(pixels),
            y,
        }
    }
}

pub fn normalize(pixels: &PixelGrid) -> Vec<f64> {
    pixels.iter().map(|&p| p as f64 / PIXEL_SCALE).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    /// Full-data loss before the first update.
    pub initial_loss: f64,
    /// Full-data loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n_inputs: usize, class_names: Vec<String>) -> Self {
        let k = class_names.len();
        LinearModel {
            weights: vec![0.0; n_inputs * k],
            bias: vec![0.0; k],
            class_names,
        }
    }

    /// Symmetric uniform weights in ±1/√n_inputs, zero bias.
    pub fn initialized<R: Rng>(n_inputs: usize, class_names: Vec<String>, rng: &mut R) -> Self {
        let mut m = Self::zeros(n_inputs, class_names);
        let scale = 1.0 / (n_inputs as f64).sqrt();
        for w in &mut m.weights {
            *w = rng.gen_range(-scale..scale);
        }
        m
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.weights.len() / self.n_classes().max(1)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let k = self.n_classes();
        let mut z = self.bias.clone();
        for (p, &xp) in x.iter().enumerate() {
            if xp == 0.0 {
                continue;
            }
            let row = &self.weights[p * k..(p + 1) * k];
            for (zk, &w) in z.iter_mut().zip(row) {
                *zk += w * xp;
            }
        }
        z
    }

    pub fn predict_proba_x(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    pub fn predict_proba(&self, pixels: &PixelGrid) -> Vec<f64> {
        self.predict_proba_x(&normalize(pixels))
    }

    pub fn predict_class(&self, pixels: &PixelGrid) -> usize {
        argmax(&self.predict_proba(pixels))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn to_text(&self) -> String {
        let k = self.n_classes();
        let mut out = String::new();
        let _ = writeln!(out, "{LINEAR_MAGIC}");
        let _ = writeln!(out, "classes {}", self.class_names.join("|"));
        let _ = writeln!(out, "inputs {}", self.n_inputs());
        for p in 0..self.n_inputs() {
            let row: Vec<String> = self.weights[p * k..(p + 1) * k].iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let bias: Vec<String> = self.bias.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "bias {}", bias.join(" "));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Format(format!("linear model: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(LINEAR_MAGIC) {
            return Err(bad("missing `flowpix-linear v1` header".into()));
        }
        let class_names: Vec<String> = lines
            .next()
            .and_then(|l| l.strip_prefix("classes "))
            .ok_or_else(|| bad("missing classes".into()))?
            .split('|')
            .map(str::to_string)
            .collect();
        let k = class_names.len();
        let n_inputs: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("inputs "))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing inputs".into()))?;
        let parse_row = |line: &str| -> Result<Vec<f64>> {
            let row: Vec<f64> = line
                .split(' ')
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad value {v:?}"))))
                .collect::<Result<_>>()?;
            if row.len() != k {
                return Err(bad(format!("expected {k} values, found {}", row.len())));
            }
            Ok(row)
        };
        let mut weights = Vec::with_capacity(n_inputs * k);
        for _ in 0..n_inputs {
            weights.extend(parse_row(lines.next().ok_or_else(|| bad("truncated weights".into()))?)?);
        }
        let bias = parse_row(
            lines
                .next()
                .and_then(|l| l.strip_prefix("bias "))
                .ok_or_else(|| bad("missing bias".into()))?,
        )?;
        let model = LinearModel {
            weights,
            bias,
            class_names,
        };
        if !model.is_finite() {
            return Err(bad("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(Error::at_path(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&fs::read_to_string(path).map_err(Error::at_path(path))?)
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean softmax cross-entropy over `batch` plus `l2/2 · ‖W‖²`.
pub fn loss(model: &LinearModel, batch: &[&Example], l2: f64) -> f64 {
    let ce: f64 = batch
        .iter()
        .map(|e| {
            let z = model.logits(&e.x);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - z[e.y]
        })
        .sum::<f64>()
        / batch.len() as f64;
    ce + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`loss`] as (dW, db).
pub fn gradient(model: &LinearModel, batch: &[&Example], l2: f64) -> (Vec<f64>, Vec<f64>) {
    let k = model.n_classes();
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = vec![0.0; k];
    let inv = 1.0 / batch.len() as f64;
    for e in batch {
        let mut d = model.predict_proba_x(&e.x);
        d[e.y] -= 1.0;
        for (gbk, dk) in gb.iter_mut().zip(&d) {
            *gbk += dk * inv;
        }
        for (p, &xp) in e.x.iter().enumerate() {
            if xp == 0.0 {
                continue;
            }
            for (g, dk) in gw[p * k..(p + 1) * k].iter_mut().zip(&d) {
                *g += xp * dk * inv;
            }
        }
    }
    if l2 > 0.0 {
        for (g, w) in gw.iter_mut().zip(&model.weights) {
            *g += l2 * w;
        }
    }
    (gw, gb)
}

pub fn examples_from_thumbnails(thumbnails: &[Thumbnail]) -> Vec<Example> {
    thumbnails
        .iter()
        .map(|t| Example::from_pixels(&t.pixels, t.label))
        .collect()
}

pub fn train_pixel_model(
    thumbnails: &[Thumbnail],
    class_names: Vec<String>,
    config: &TrainConfig,
) -> Result<(LinearModel, TrainingHistory)> {
    train_examples(&examples_from_thumbnails(thumbnails), class_names, config)
}

/// Seeded-shuffle mini-batch SGD from a seeded initialization.
pub fn train_examples(
    examples: &[Example],
    class_names: Vec<String>,
    config: &TrainConfig,
) -> Result<(LinearModel, TrainingHistory)> {
    config.validate()?;
    let k = class_names.len();
    if let Some(e) = examples.iter().find(|e| e.y >= k || e.x.len() != CELLS) {
        return Err(Error::InvalidParam(format!(
            "example with label {} and {} inputs does not fit a {CELLS}x{k} model",
            e.y,
            e.x.len()
        )));
    }
    let mut present = vec![false; k];
    examples.iter().for_each(|e| present[e.y] = true);
    let n_present = present.iter().filter(|&&p| p).count();
    if n_present < 2 {
        return Err(Error::DegenerateTask(format!(
            "pixel training needs two classes, found {n_present}"
        )));
    }

    let mut init_rng = seeds::stream(config.seed, "pixel/init");
    let mut model = LinearModel::initialized(CELLS, class_names, &mut init_rng);
    let all: Vec<&Example> = examples.iter().collect();
    let initial_loss = loss(&model, &all, config.l2);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 0..config.epochs {
        let mut rng = seeds::indexed_stream(config.seed, "pixel/epoch", epoch as u64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let (gw, gb) = gradient(&model, &batch, config.l2);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= config.learning_rate * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&gb) {
                *b -= config.learning_rate * g;
            }
        }
        epoch_losses.push(loss(&model, &all, config.l2));
    }
    if !model.is_finite() {
        return Err(Error::DegenerateTask("training diverged".into()));
    }
    Ok((
        model,
        TrainingHistory {
            initial_loss,
            epoch_losses,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `|a − n| / max(|a|, |n|, 1e-6)` maximized over parameters.
    pub max_relative_error: f64,
    pub max_abs_error: f64,
}

pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compares [`gradient`] with central finite differences on every parameter.
pub fn grad_check(model: &LinearModel, batch: &[Example], epsilon: f64, l2: f64) -> Result<GradCheck> {
    if batch.is_empty() || !(epsilon > 0.0) {
        return Err(Error::InvalidParam("grad check needs a batch and epsilon > 0".into()));
    }
    let refs: Vec<&Example> = batch.iter().collect();
    let (gw, gb) = gradient(model, &refs, l2);
    let mut probe = model.clone();
    let mut worst = GradCheck {
        max_relative_error: 0.0,
        max_abs_error: 0.0,
    };
    let mut compare = |analytic: f64, numeric: f64| {
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst.max_abs_error = worst.max_abs_error.max(abs);
        worst.max_relative_error = worst.max_relative_error.max(rel);
    };
    for i in 0..model.weights.len() {
        let w = probe.weights[i];
        probe.weights[i] = w + epsilon;
        let up = loss(&probe, &refs, l2);
        probe.weights[i] = w - epsilon;
        let down = loss(&probe, &refs, l2);
        probe.weights[i] = w;
        compare(gw[i], (up - down) / (2.0 * epsilon));
    }
    for i in 0..model.bias.len() {
        let b = probe.bias[i];
        probe.bias[i] = b + epsilon;
        let up = loss(&probe, &refs, l2);
        probe.bias[i] = b - epsilon;
        let down = loss(&probe, &refs, l2);
        probe.bias[i] = b;
        compare(gb[i], (up - down) / (2.0 * epsilon));
    }
    Ok(worst)
}
