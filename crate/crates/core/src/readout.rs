//! Linear softmax readout trained by mini-batch SGD, stratified k-fold
//! cross-validation and the spatial-shuffle chance baseline.

use crate::rng;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReadoutError {
    #[error("training data holds a single class")]
    SingleClass,
    #[error("empty dataset")]
    Empty,
    #[error("non-finite feature at sample {sample}, feature {feature}")]
    NonFinite { sample: usize, feature: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("class {class} has {have} samples, need at least {k} for {k}-fold")]
    TooFewPerClass { class: u32, have: usize, k: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    Label { label: u32, n_classes: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTag {
    pub session: u32,
    pub replicate: u32,
    pub day: u32,
    pub stimulus_index: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    pub tags: Vec<SampleTag>,
    pub n_classes: usize,
}

impl LabeledDataset {
    pub fn new(x: Vec<Vec<f64>>, labels: Vec<u32>, n_classes: usize) -> Self {
        let tags = vec![SampleTag::default(); labels.len()];
        Self { x, labels, tags, n_classes }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            tags: idx.iter().map(|&i| self.tags[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Concatenate datasets with the same class count and dimension.
    pub fn concat(parts: &[&LabeledDataset]) -> Self {
        let mut out = Self { n_classes: parts.first().map_or(0, |p| p.n_classes), ..Default::default() };
        for p in parts {
            out.x.extend(p.x.iter().cloned());
            out.labels.extend_from_slice(&p.labels);
            out.tags.extend_from_slice(&p.tags);
        }
        out
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    pub fn check(&self) -> Result<(), ReadoutError> {
        if self.is_empty() {
            return Err(ReadoutError::Empty);
        }
        let d = self.dim();
        for (i, (row, &l)) in self.x.iter().zip(&self.labels).enumerate() {
            if row.len() != d {
                return Err(ReadoutError::Dimension { expected: d, got: row.len() });
            }
            if l as usize >= self.n_classes {
                return Err(ReadoutError::Label { label: l, n_classes: self.n_classes });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(ReadoutError::NonFinite { sample: i, feature: j });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    /// Epoch constant of the `lr0 / (1 + epoch / decay_epochs)` schedule.
    pub decay_epochs: f64,
    pub batch_size: usize,
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1000, lr0: 0.01, decay_epochs: 250.0, batch_size: 8, standardize: true }
    }
}

impl TrainConfig {
    pub fn lr(&self, epoch: usize) -> f64 {
        self.lr0 / (1.0 + epoch as f64 / self.decay_epochs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Per-feature mean and population deviation; constant features get
    /// deviation 1 so they map to zero.
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > 0.0 { s } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub config: TrainConfig,
    pub seed: u64,
    pub n_train: usize,
    pub final_loss: f64,
    /// Mean training cross-entropy after each epoch.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// `n_classes` rows of `dim` weights.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub standardizer: Option<Standardizer>,
    pub meta: TrainMeta,
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn log_softmax_at(scores: &[f64], k: usize) -> f64 {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    scores[k] - lse
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scores_of(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter().zip(b).map(|(row, bi)| dot(row, x) + bi).collect()
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy of the affine model on raw `x` with its gradient
/// with respect to `(weights, bias)`.
pub fn loss_and_grad(w: &[Vec<f64>], b: &[f64], x: &[Vec<f64>], y: &[u32]) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len() as f64;
    let mut gw = vec![vec![0.0; w.first().map_or(0, Vec::len)]; w.len()];
    let mut gb = vec![0.0; b.len()];
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let s = scores_of(w, b, xi);
        loss -= log_softmax_at(&s, yi as usize);
        let p = softmax(&s);
        for c in 0..w.len() {
            let g = (p[c] - if c == yi as usize { 1.0 } else { 0.0 }) / n;
            gb[c] += g;
            for (gwj, xj) in gw[c].iter_mut().zip(xi) {
                *gwj += g * xj;
            }
        }
    }
    (loss / n, gw, gb)
}

fn check_classes(ds: &LabeledDataset) -> Result<(), ReadoutError> {
    ds.check()?;
    if ds.n_classes < 2 || ds.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ReadoutError::SingleClass);
    }
    Ok(())
}

fn epoch_batches(n: usize, batch: usize, rng: &mut rng::Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

/// Reference SGD on explicit weights. Same trajectory as [`train_slp`] up to
/// floating-point summation order.
pub fn train_slp_primal(ds: &LabeledDataset, cfg: &TrainConfig, seed: u64) -> Result<ReadoutModel, ReadoutError> {
    check_classes(ds)?;
    let (standardizer, z) = prepare(ds, cfg);
    let (c, d) = (ds.n_classes, ds.dim());
    let mut w = vec![vec![0.0; d]; c];
    let mut b = vec![0.0; c];
    let mut rng = rng::stream(seed, "readout-batches", 0);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr(epoch);
        for batch in epoch_batches(z.len(), cfg.batch_size, &mut rng) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| z[i].clone()).collect();
            let by: Vec<u32> = batch.iter().map(|&i| ds.labels[i]).collect();
            let (_, gw, gb) = loss_and_grad(&w, &b, &bx, &by);
            for k in 0..c {
                b[k] -= lr * gb[k];
                for (wj, gj) in w[k].iter_mut().zip(&gw[k]) {
                    *wj -= lr * gj;
                }
            }
        }
        trace.push(loss_and_grad(&w, &b, &z, &ds.labels).0);
    }
    Ok(finish(w, b, standardizer, cfg, seed, ds.len(), trace))
}

fn prepare(ds: &LabeledDataset, cfg: &TrainConfig) -> (Option<Standardizer>, Vec<Vec<f64>>) {
    if cfg.standardize {
        let s = Standardizer::fit(&ds.x);
        let z = ds.x.iter().map(|r| s.apply(r)).collect();
        (Some(s), z)
    } else {
        (None, ds.x.clone())
    }
}

fn finish(
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    standardizer: Option<Standardizer>,
    cfg: &TrainConfig,
    seed: u64,
    n_train: usize,
    loss_trace: Vec<f64>,
) -> ReadoutModel {
    let final_loss = loss_trace.last().copied().unwrap_or(f64::NAN);
    ReadoutModel {
        weights,
        bias,
        standardizer,
        meta: TrainMeta { config: cfg.clone(), seed, n_train, final_loss, loss_trace },
    }
}

/// Train the softmax readout with mini-batch SGD from zero weights.
///
/// Starting from zero, every update adds multiples of training vectors to
/// the weight rows, so the weights stay `A * Z` for an `n_classes x n`
/// coefficient matrix `A`. Training runs on `A` and the Gram matrix
/// `Z Z^T`, which is much cheaper than the explicit form when the feature
/// dimension exceeds the sample count. The explicit form is used otherwise.
pub fn train_slp(ds: &LabeledDataset, cfg: &TrainConfig, seed: u64) -> Result<ReadoutModel, ReadoutError> {
    check_classes(ds)?;
    if ds.dim() <= ds.len() {
        return train_slp_primal(ds, cfg, seed);
    }
    let (standardizer, z) = prepare(ds, cfg);
    let (c, n) = (ds.n_classes, ds.len());
    let gram: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dot(&z[i], &z[j])).collect()).collect();
    let mut a = vec![vec![0.0; n]; c];
    let mut b = vec![0.0; c];
    // s[k][j] = (A K)[k][j], the bias-free score of sample j for class k.
    let mut s = vec![vec![0.0; n]; c];
    let mut rng = rng::stream(seed, "readout-batches", 0);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut col = vec![0.0; c];
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr(epoch);
        for batch in epoch_batches(n, cfg.batch_size, &mut rng) {
            let scale = lr / batch.len() as f64;
            let mut deltas = Vec::with_capacity(batch.len());
            let mut db = vec![0.0; c];
            for &i in &batch {
                for k in 0..c {
                    col[k] = s[k][i] + b[k];
                }
                let p = softmax(&col);
                let y = ds.labels[i] as usize;
                let g: Vec<f64> = (0..c).map(|k| -scale * (p[k] - if k == y { 1.0 } else { 0.0 })).collect();
                for k in 0..c {
                    db[k] += g[k];
                }
                deltas.push((i, g));
            }
            for (i, g) in deltas {
                let ki = &gram[i];
                for k in 0..c {
                    a[k][i] += g[k];
                    let gk = g[k];
                    for (sj, kij) in s[k].iter_mut().zip(ki) {
                        *sj += gk * kij;
                    }
                }
            }
            for k in 0..c {
                b[k] += db[k];
            }
        }
        let mut loss = 0.0;
        for j in 0..n {
            for k in 0..c {
                col[k] = s[k][j] + b[k];
            }
            loss -= log_softmax_at(&col, ds.labels[j] as usize);
        }
        trace.push(loss / n as f64);
    }
    let d = ds.dim();
    let weights = a
        .iter()
        .map(|ak| {
            let mut w = vec![0.0; d];
            for (aki, zi) in ak.iter().zip(&z) {
                if *aki != 0.0 {
                    for (wj, zij) in w.iter_mut().zip(zi) {
                        *wj += aki * zij;
                    }
                }
            }
            w
        })
        .collect();
    Ok(finish(weights, b, standardizer, cfg, seed, n, trace))
}

impl ReadoutModel {
    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, ReadoutError> {
        if x.len() != self.dim() {
            return Err(ReadoutError::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(match &self.standardizer {
            Some(s) => scores_of(&self.weights, &self.bias, &s.apply(x)),
            None => scores_of(&self.weights, &self.bias, x),
        })
    }

    pub fn write_json<W: Write>(&self, w: W) -> io::Result<()> {
        serde_json::to_writer(w, self).map_err(io::Error::from)
    }

    pub fn read_json<R: Read>(r: R) -> io::Result<Self> {
        serde_json::from_reader(r).map_err(io::Error::from)
    }
}

/// Predicted label and class scores; ties go to the lowest class index.
pub fn predict(m: &ReadoutModel, x: &[f64]) -> Result<(u32, Vec<f64>), ReadoutError> {
    let s = m.scores(x)?;
    Ok((argmax_first(&s) as u32, s))
}

/// Test-fold index of every sample. Within each class the samples are
/// shuffled and dealt round-robin, with each class starting where the
/// previous one stopped so fold sizes stay within one of each other.
pub fn stratified_folds(labels: &[u32], n_classes: usize, k: usize, seed: u64) -> Result<Vec<usize>, ReadoutError> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut fold = vec![0; labels.len()];
    let mut rng = rng::stream(seed, "cv-folds", 0);
    let mut start = 0;
    for (class, idx) in by_class.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(ReadoutError::TooFewPerClass { class: class as u32, have: idx.len(), k });
        }
        idx.shuffle(&mut rng);
        for (j, &i) in idx.iter().enumerate() {
            fold[i] = (start + j) % k;
        }
        start = (start + idx.len()) % k;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub n_samples: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub std: f64,
    /// `confusion[true][predicted]`, pooled over test folds.
    pub confusion: Vec<Vec<u32>>,
    pub per_class_accuracy: Vec<f64>,
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 { (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, s)
}

/// Confusion matrix and accuracy of a fixed model on a dataset.
pub fn evaluate(m: &ReadoutModel, ds: &LabeledDataset) -> Result<(f64, Vec<Vec<u32>>), ReadoutError> {
    let c = m.n_classes().max(ds.n_classes);
    let mut conf = vec![vec![0u32; c]; c];
    let mut correct = 0;
    for (x, &y) in ds.x.iter().zip(&ds.labels) {
        let (p, _) = predict(m, x)?;
        conf[y as usize][p as usize] += 1;
        correct += (p == y) as usize;
    }
    Ok((correct as f64 / ds.len().max(1) as f64, conf))
}

pub fn per_class_accuracy(conf: &[Vec<u32>]) -> Vec<f64> {
    conf.iter()
        .enumerate()
        .map(|(i, row)| {
            let t: u32 = row.iter().sum();
            if t == 0 {
                f64::NAN
            } else {
                row[i] as f64 / t as f64
            }
        })
        .collect()
}

/// Stratified k-fold cross-validation. Folds train independently (in
/// parallel) from per-fold seed substreams.
pub fn cross_validate(ds: &LabeledDataset, k: usize, cfg: &TrainConfig, seed: u64) -> Result<CvReport, ReadoutError> {
    check_classes(ds)?;
    let fold = stratified_folds(&ds.labels, ds.n_classes, k, seed)?;
    let results: Vec<Result<(f64, Vec<Vec<u32>>), ReadoutError>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..ds.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..ds.len()).filter(|&i| fold[i] == f).collect();
            let m = train_slp(&ds.subset(&train), cfg, rng::derive(seed, "cv-train", f as u64))?;
            evaluate(&m, &ds.subset(&test))
        })
        .collect();
    let c = ds.n_classes;
    let mut confusion = vec![vec![0u32; c]; c];
    let mut fold_accuracies = Vec::with_capacity(k);
    for r in results {
        let (acc, conf) = r?;
        fold_accuracies.push(acc);
        for (row, crow) in confusion.iter_mut().zip(conf) {
            for (a, b) in row.iter_mut().zip(crow) {
                *a += b;
            }
        }
    }
    let (mean, std) = mean_std(&fold_accuracies);
    let per_class_accuracy = per_class_accuracy(&confusion);
    Ok(CvReport { k, n_samples: ds.len(), fold_accuracies, mean, std, confusion, per_class_accuracy })
}

/// Independently permute each sample's entries. Labels and each sample's
/// multiset of values are unchanged.
pub fn shuffle_baseline(ds: &LabeledDataset, seed: u64) -> LabeledDataset {
    let mut out = ds.clone();
    for (i, row) in out.x.iter_mut().enumerate() {
        row.shuffle(&mut rng::stream(seed, "shuffle-baseline", i as u64));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n_per: usize, n_classes: usize, dim: usize) -> LabeledDataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..n_classes {
            for r in 0..n_per {
                let mut v = vec![0.0; dim];
                v[c] = 3.0 + (r % 3) as f64;
                v[(c + r) % dim] += 0.5;
                x.push(v);
                y.push(c as u32);
            }
        }
        LabeledDataset::new(x, y, n_classes)
    }

    #[test]
    fn softmax_normalizes() {
        for s in [vec![0.0, 0.0], vec![1000.0, -1000.0, 3.0], vec![-745.0, -744.0], vec![1e-3; 10]] {
            let p = softmax(&s);
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn zero_model_predicts_class_zero() {
        let m = finish(vec![vec![0.0; 3]; 4], vec![0.0; 4], None, &TrainConfig::default(), 0, 0, vec![]);
        assert_eq!(predict(&m, &[1.0, 2.0, 3.0]).unwrap().0, 0);
        assert!(matches!(predict(&m, &[1.0]), Err(ReadoutError::Dimension { .. })));
    }

    #[test]
    fn hand_built_and_scaled_models() {
        let mut w = vec![vec![0.0; 10]; 4];
        w[2][7] = 1.0;
        let m = finish(w.clone(), vec![0.1, 0.0, 0.0, 0.0], None, &TrainConfig::default(), 0, 0, vec![]);
        let mut e7 = vec![0.0; 10];
        e7[7] = 1.0;
        assert_eq!(predict(&m, &e7).unwrap().0, 2);
        let scaled: Vec<Vec<f64>> = w.iter().map(|r| r.iter().map(|v| v * 7.5).collect()).collect();
        let m2 = finish(scaled, vec![0.75, 0.0, 0.0, 0.0], None, &TrainConfig::default(), 0, 0, vec![]);
        for x in [e7.clone(), vec![0.0; 10], vec![0.05; 10]] {
            assert_eq!(predict(&m, &x).unwrap().0, predict(&m2, &x).unwrap().0);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x = vec![
            vec![0.3, -1.2, 2.0, 0.5],
            vec![1.1, 0.4, -0.7, 0.0],
            vec![-0.5, 0.9, 0.2, 1.5],
            vec![2.2, -0.3, 0.8, -1.1],
            vec![0.0, 1.7, -1.4, 0.6],
        ];
        let y = vec![0, 2, 1, 2, 0];
        let w: Vec<Vec<f64>> = (0..3).map(|c| (0..4).map(|j| 0.1 * (c as f64 + 1.0) * (j as f64 - 1.5)).collect()).collect();
        let b = vec![0.2, -0.1, 0.05];
        let (_, gw, gb) = loss_and_grad(&w, &b, &x, &y);
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for c in 0..3 {
            for j in 0..=4 {
                let (mut wp, mut bp, mut wm, mut bm) = (w.clone(), b.clone(), w.clone(), b.clone());
                let analytic = if j < 4 {
                    wp[c][j] += h;
                    wm[c][j] -= h;
                    gw[c][j]
                } else {
                    bp[c] += h;
                    bm[c] -= h;
                    gb[c]
                };
                let fd = (loss_and_grad(&wp, &bp, &x, &y).0 - loss_and_grad(&wm, &bm, &x, &y).0) / (2.0 * h);
                worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-8));
            }
        }
        assert!(worst <= 1e-5, "relative error {worst}");
    }

    #[test]
    fn separable_training_is_perfect() {
        let ds = separable(20, 2, 8);
        let m = train_slp(&ds, &TrainConfig::default(), 1).unwrap();
        assert_eq!(evaluate(&m, &ds).unwrap().0, 1.0);
        let tr = &m.meta.loss_trace;
        assert_eq!(tr.len(), 1000);
        assert!(tr.last().unwrap() < &tr[0]);
    }

    #[test]
    fn dual_matches_primal() {
        let ds = separable(6, 3, 40);
        let cfg = TrainConfig { epochs: 60, lr0: 0.05, ..Default::default() };
        let a = train_slp(&ds, &cfg, 9).unwrap();
        let b = train_slp_primal(&ds, &cfg, 9).unwrap();
        for (ra, rb) in a.weights.iter().zip(&b.weights) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
        for (x, y) in a.meta.loss_trace.iter().zip(&b.meta.loss_trace) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn training_errors() {
        let one = LabeledDataset::new(vec![vec![1.0]; 4], vec![1; 4], 2);
        assert_eq!(train_slp(&one, &TrainConfig::default(), 0).unwrap_err(), ReadoutError::SingleClass);
        let bad = LabeledDataset::new(vec![vec![1.0], vec![f64::NAN]], vec![0, 1], 2);
        assert!(matches!(train_slp(&bad, &TrainConfig::default(), 0), Err(ReadoutError::NonFinite { sample: 1, .. })));
    }

    #[test]
    fn folds_partition() {
        let labels: Vec<u32> = (0..200).map(|i| (i % 10) as u32).collect();
        let f = stratified_folds(&labels, 10, 5, 3).unwrap();
        let mut sizes = [0; 5];
        for &x in &f {
            sizes[x] += 1;
        }
        assert_eq!(sizes, [40; 5]);
        assert_eq!(f, stratified_folds(&labels, 10, 5, 3).unwrap());
        let few: Vec<u32> = vec![0, 0, 0, 0, 0, 1, 1, 1];
        assert!(matches!(stratified_folds(&few, 2, 5, 0), Err(ReadoutError::TooFewPerClass { class: 1, .. })));
    }

    #[test]
    fn shuffle_preserves_multisets() {
        let ds = LabeledDataset::new(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![7.0; 5]], vec![0, 1], 2);
        let s = shuffle_baseline(&ds, 5);
        assert_eq!(s.labels, ds.labels);
        assert_eq!(s.x[1], ds.x[1]);
        let mut a = s.x[0].clone();
        a.sort_by(f64::total_cmp);
        assert_eq!(a, ds.x[0]);
    }

    #[test]
    fn model_round_trip() {
        let ds = separable(5, 2, 4);
        let cfg = TrainConfig { epochs: 5, ..Default::default() };
        let m = train_slp(&ds, &cfg, 2).unwrap();
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        assert_eq!(ReadoutModel::read_json(&buf[..]).unwrap(), m);
    }
}
