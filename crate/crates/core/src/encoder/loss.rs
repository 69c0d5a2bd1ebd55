//! Label-thresholded contrastive loss.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{exp, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Act,
    Acc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    /// Normalised steering in [-1, 1].
    pub steer: f64,
    /// Brake in [0, 1].
    pub brake: f64,
}

impl Labels {
    pub fn get(&self, space: Space) -> f64 {
        match space {
            Space::Act => self.steer,
            Space::Acc => self.brake,
        }
    }
}

/// How two labels are judged to match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// `|a - b| < sigma`.
    Threshold,
    /// Both positive or both zero.
    Concurrence,
}

impl LabelRule {
    pub fn matches(self, a: f64, b: f64, sigma: f64) -> bool {
        match self {
            LabelRule::Threshold => (a - b).abs() < sigma,
            LabelRule::Concurrence => (a > 0.0) == (b > 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Sum over negative keys only.
    NegativesOnly,
    /// Sum over every key.
    All,
}

/// Splits key indices into positives and negatives for one query label.
pub fn partition_pairs(query: f64, keys: &[f64], sigma: f64, rule: LabelRule) -> (Vec<usize>, Vec<usize>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, &k) in keys.iter().enumerate() {
        if rule.matches(query, k, sigma) {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    (pos, neg)
}

/// `-log(sum_pos exp(g.z/tau) / sum_den exp(g.z/tau))` and its gradient with
/// respect to `g`. Returns `None` when either set is empty.
pub fn contrastive_loss(
    g: &[f64],
    keys: &[&[f64]],
    pos: &[usize],
    neg: &[usize],
    tau: f64,
    denominator: Denominator,
) -> Option<(f64, Vec<f64>)> {
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let logits: Vec<f64> = keys.iter().map(|k| k.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / tau).collect();
    let pick = |idx: &[usize]| idx.iter().map(|&i| logits[i]).collect::<Vec<f64>>();
    let lp = pick(pos);
    let den_idx: Vec<usize> = match denominator {
        Denominator::NegativesOnly => neg.to_vec(),
        Denominator::All => (0..keys.len()).collect(),
    };
    let ld = pick(&den_idx);
    let lse_p = log_sum_exp(&lp);
    let lse_d = log_sum_exp(&ld);
    let loss = lse_d - lse_p;

    let mut grad = vec![0.0; g.len()];
    for (&i, &li) in den_idx.iter().zip(&ld) {
        let w = exp(li - lse_d) / tau;
        for (gr, k) in grad.iter_mut().zip(keys[i]) {
            *gr += w * k;
        }
    }
    for (&i, &li) in pos.iter().zip(&lp) {
        let w = exp(li - lse_p) / tau;
        for (gr, k) in grad.iter_mut().zip(keys[i]) {
            *gr -= w * k;
        }
    }
    Some((loss, grad))
}

pub fn total_loss(l_act: f64, l_acc: f64, lambda_act: f64, lambda_acc: f64) -> f64 {
    lambda_act * l_act + lambda_acc * l_acc
}
