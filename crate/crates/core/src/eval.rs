//! Repeated stratified K-fold cross-validation and classification metrics.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{train, TrainParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub shuffles: usize,
    pub k: usize,
    pub seed: u64,
    /// `assignments[s][i]` is the validation fold of sample `i` in shuffle `s`.
    pub assignments: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Train and validation indices of fold `fold` in shuffle `shuffle`.
    pub fn split(&self, shuffle: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        self.assignments[shuffle].iter().enumerate().fold(
            (Vec::new(), Vec::new()),
            |(mut train, mut valid), (i, &f)| {
                if f == fold {
                    valid.push(i)
                } else {
                    train.push(i)
                }
                (train, valid)
            },
        )
    }
}

/// Stratified fold assignment repeated over `shuffles` independent shuffles.
///
/// Within each class the samples are shuffled and dealt round-robin over the
/// folds, continuing from where the previous class stopped so that total fold
/// sizes stay balanced too.
pub fn make_folds(labels: &[u8], shuffles: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("k must be >= 2, got {k}")));
    }
    if shuffles == 0 {
        return Err(Error::InvalidParams("shuffles must be >= 1".into()));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 | 1 => by_class[l as usize].push(i),
            other => return Err(Error::InvalidParams(format!("label {other} is not 0 or 1"))),
        }
    }
    for (label, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::TooFewSamples { label: label as u8, count: members.len(), k });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignments = (0..shuffles)
        .map(|_| {
            let mut fold_of = vec![0usize; labels.len()];
            let mut offset = 0;
            for members in &by_class {
                let mut order = members.clone();
                order.shuffle(&mut rng);
                for (pos, &i) in order.iter().enumerate() {
                    fold_of[i] = (offset + pos) % k;
                }
                offset = (offset + order.len()) % k;
            }
            fold_of
        })
        .collect();
    Ok(FoldPlan { shuffles, k, seed, assignments })
}

/// ROC-AUC as the normalized Mann-Whitney statistic; tied positive/negative
/// pairs count one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let (mut negatives_below, mut concordant, mut tied) = (0u64, 0u64, 0u64);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u64;
        let negatives = (end - start) as u64 - positives;
        concordant += positives * negatives_below;
        tied += positives * negatives;
        negatives_below += negatives;
        start = end;
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(labels[0]));
    }
    Ok((2 * concordant + tied) as f64 / (2 * n_pos * n_neg) as f64)
}

fn check_pairs(preds: &[u8], labels: &[u8]) -> Result<()> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions vs {} labels", preds.len(), labels.len())));
    }
    Ok(())
}

pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    check_pairs(preds, labels)?;
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// F1 score with `positive` treated as the positive class; 0 when precision
/// and recall are both 0.
pub fn f1(preds: &[u8], labels: &[u8], positive: u8) -> Result<f64> {
    check_pairs(preds, labels)?;
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&p, &l) in preds.iter().zip(labels) {
        match (p == positive, l == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fnn;
    Ok(if tp == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub shuffle: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub f1_blur: f64,
    pub f1_sharp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std =
            if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_id: String,
    pub params: TrainParams,
    pub shuffles: usize,
    pub k: usize,
    pub seed: u64,
    /// Fraction of samples held out per run, `1 / k`.
    pub validation_fraction: f64,
    pub per_run: Vec<RunMetrics>,
    pub accuracy: Summary,
    pub auc: Summary,
    pub f1_blur: Summary,
    pub f1_sharp: Summary,
}

impl EvalReport {
    pub fn from_runs(config_id: &str, params: &TrainParams, plan: &FoldPlan, per_run: Vec<RunMetrics>) -> Self {
        let col = |f: fn(&RunMetrics) -> f64| Summary::of(&per_run.iter().map(f).collect::<Vec<_>>());
        Self {
            config_id: config_id.to_string(),
            params: *params,
            shuffles: plan.shuffles,
            k: plan.k,
            seed: plan.seed,
            validation_fraction: 1.0 / plan.k as f64,
            accuracy: col(|r| r.accuracy),
            auc: col(|r| r.auc),
            f1_blur: col(|r| r.f1_blur),
            f1_sharp: col(|r| r.f1_sharp),
            per_run,
        }
    }

    /// One-row table: accuracy in percent, the rest as fractions, each as
    /// `mean ± std`.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ =
            writeln!(s, "{:<32} {:>14} {:>16} {:>16} {:>16}", "features", "accuracy (%)", "auc", "f1 blur", "f1 sharp");
        let _ = writeln!(
            s,
            "{:<32} {:>14} {:>16} {:>16} {:>16}",
            self.config_id,
            format!("{:.1} ± {:.1}", 100.0 * self.accuracy.mean, 100.0 * self.accuracy.std),
            format!("{:.3} ± {:.3}", self.auc.mean, self.auc.std),
            format!("{:.3} ± {:.3}", self.f1_blur.mean, self.f1_blur.std),
            format!("{:.3} ± {:.3}", self.f1_sharp.mean, self.f1_sharp.std),
        );
        let _ = writeln!(
            s,
            "{} shuffles x {}-fold stratified CV ({} runs), {:.0}% held out per run, seed {}",
            self.shuffles,
            self.k,
            self.per_run.len(),
            100.0 * self.validation_fraction,
            self.seed
        );
        s
    }
}

/// Trains on every training split of `plan` and scores the held-out fold.
/// Runs execute in parallel; results are ordered by (shuffle, fold).
pub fn cross_validate(
    rows: &[Vec<f64>],
    labels: &[u8],
    config_id: &str,
    params: &TrainParams,
    plan: &FoldPlan,
) -> Result<EvalReport> {
    if rows.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} feature rows but {} labels", rows.len(), labels.len())));
    }
    if plan.assignments.iter().any(|a| a.len() != labels.len()) {
        return Err(Error::ShapeMismatch("fold plan does not match dataset size".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..plan.shuffles).flat_map(|s| (0..plan.k).map(move |f| (s, f))).collect();
    let per_run = jobs
        .par_iter()
        .map(|&(shuffle, fold)| {
            let (train_idx, valid_idx) = plan.split(shuffle, fold);
            let pick_rows = |idx: &[usize]| idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>();
            let pick_labels = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
            let model = train(&pick_rows(&train_idx), &pick_labels(&train_idx), params, config_id)?;
            let valid_labels = pick_labels(&valid_idx);
            let probs = model.predict_proba_batch(&pick_rows(&valid_idx))?;
            let preds: Vec<u8> = probs.iter().map(|&p| u8::from(p > 0.5)).collect();
            Ok(RunMetrics {
                shuffle,
                fold,
                accuracy: accuracy(&preds, &valid_labels)?,
                auc: roc_auc(&probs, &valid_labels)?,
                f1_blur: f1(&preds, &valid_labels, 1)?,
                f1_sharp: f1(&preds, &valid_labels, 0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_runs(config_id, params, plan, per_run))
}
