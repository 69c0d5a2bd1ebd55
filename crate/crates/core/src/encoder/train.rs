//! Momentum-contrastive training loop.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dictionary::KeyDictionary;
use super::features::{ego_vector, EGO_DIM, INTENTS};
use super::loss::{contrastive_loss, partition_pairs, total_loss, LabelRule, Labels};
use super::network::{backward, forward, momentum_update, EncoderParams};
use super::{EncoderConfig, EncoderError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    /// Row-major N x C grid.
    pub features: Vec<f64>,
    pub intent: u8,
    pub speed: f64,
    pub steer: f64,
    pub brake: f64,
}

impl TrainingRecord {
    pub fn labels(&self) -> Labels {
        Labels { steer: self.steer, brake: self.brake }
    }

    pub fn ego(&self) -> [f64; EGO_DIM] {
        ego_vector(self.intent as usize, self.speed)
    }

    pub fn validate(&self, cfg: &EncoderConfig) -> Result<(), EncoderError> {
        let n = cfg.grid_n * cfg.grid_c;
        if self.features.len() != n {
            return Err(EncoderError::Shape { what: "feature grid", expected: n, actual: self.features.len() });
        }
        if self.intent as usize >= INTENTS {
            return Err(EncoderError::Config(alloc::format!("intent {} out of range 0..8", self.intent)));
        }
        if !(-1.0..=1.0).contains(&self.steer) || !(0.0..=1.0).contains(&self.brake) || !(self.speed >= 0.0) {
            return Err(EncoderError::Config("labels out of range".into()));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::NonFinite("features"));
        }
        Ok(())
    }
}

/// A query sample for [`objective`]: features, ego vector and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub features: Vec<f64>,
    pub ego: [f64; EGO_DIM],
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    pub l_act: f64,
    pub l_acc: f64,
    pub skipped_act: usize,
    pub skipped_acc: usize,
    pub grad: Vec<f64>,
}

/// Batch loss `lambda_act * mean(L_act) + lambda_acc * mean(L_acc)` of the
/// online weights against fixed keys, with its gradient. Skipped samples
/// contribute zero to both means.
pub fn objective(cfg: &EncoderConfig, weights: &[f64], queries: &[Query], keys: &[(Vec<f64>, Labels)]) -> Objective {
    let half = cfg.half_dim();
    let b = queries.len().max(1) as f64;
    let act_keys: Vec<&[f64]> = keys.iter().map(|(t, _)| &t[..half]).collect();
    let acc_keys: Vec<&[f64]> = keys.iter().map(|(t, _)| &t[half..]).collect();
    let steer: Vec<f64> = keys.iter().map(|(_, l)| l.steer).collect();
    let brake: Vec<f64> = keys.iter().map(|(_, l)| l.brake).collect();

    let mut out = Objective { loss: 0.0, l_act: 0.0, l_acc: 0.0, skipped_act: 0, skipped_acc: 0, grad: vec![0.0; weights.len()] };
    for q in queries {
        let cache = forward(cfg, weights, &q.features, &q.ego);
        let mut d_token = vec![0.0; cfg.token_dim];
        let (pa, na) = partition_pairs(q.labels.steer, &steer, cfg.sigma_act, LabelRule::Threshold);
        match contrastive_loss(&cache.token[..half], &act_keys, &pa, &na, cfg.temperature, cfg.denominator) {
            Some((l, g)) => {
                out.l_act += l / b;
                for (d, gi) in d_token[..half].iter_mut().zip(g) {
                    *d = cfg.lambda_act * gi / b;
                }
            }
            None => out.skipped_act += 1,
        }
        let (pc, nc) = partition_pairs(q.labels.brake, &brake, cfg.sigma_acc, cfg.brake_rule_train);
        match contrastive_loss(&cache.token[half..], &acc_keys, &pc, &nc, cfg.temperature, cfg.denominator) {
            Some((l, g)) => {
                out.l_acc += l / b;
                for (d, gi) in d_token[half..].iter_mut().zip(g) {
                    *d = cfg.lambda_acc * gi / b;
                }
            }
            None => out.skipped_acc += 1,
        }
        backward(cfg, weights, &q.features, &cache, &d_token, &mut out.grad);
    }
    out.loss = total_loss(out.l_act, out.l_acc, cfg.lambda_act, cfg.lambda_acc);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub loss: f64,
    pub l_act: f64,
    pub l_acc: f64,
    pub skipped_act: usize,
    pub skipped_acc: usize,
    pub batch: usize,
    pub keys: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean step loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub skipped_act: Vec<usize>,
    pub skipped_acc: Vec<usize>,
    pub steps: usize,
    pub warnings: Vec<String>,
}

pub struct Trainer {
    pub config: EncoderConfig,
    params: EncoderParams,
    dict: KeyDictionary,
    rng: ChaCha8Rng,
    steps: usize,
}

impl Trainer {
    pub fn new(config: EncoderConfig) -> Result<Self, EncoderError> {
        let params = EncoderParams::init(&config, config.seed)?;
        Self::from_params(params)
    }

    pub fn from_params(params: EncoderParams) -> Result<Self, EncoderError> {
        params.check()?;
        let config = params.config.clone();
        Ok(Self {
            dict: KeyDictionary::new(config.dict_capacity),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0xA5A5_5A5A_0F0F_F0F0),
            steps: 0,
            config,
            params,
        })
    }

    pub fn params(&self) -> &EncoderParams {
        &self.params
    }

    pub fn into_params(self) -> EncoderParams {
        self.params
    }

    pub fn dictionary(&self) -> &KeyDictionary {
        &self.dict
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn augment(&mut self, features: &[f64]) -> Vec<f64> {
        let c = self.config.grid_c;
        let jitter = Normal::new(0.0, self.config.jitter.max(0.0)).expect("non-negative std");
        let mut v: Vec<f64> = features.iter().map(|x| x + jitter.sample(&mut self.rng)).collect();
        for row in v.chunks_mut(c) {
            if self.rng.random::<f64>() < self.config.dropout {
                row.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        v
    }

    /// One optimisation step: queries from the online network on one
    /// augmented view, keys from the momentum network on another, SGD with
    /// weight decay, momentum update, then the keys enter the dictionary.
    pub fn step(&mut self, batch: &[&TrainingRecord]) -> Result<StepStats, EncoderError> {
        for r in batch {
            r.validate(&self.config)?;
        }
        let cfg = self.config.clone();
        let mut queries = Vec::with_capacity(batch.len());
        let mut batch_keys = Vec::with_capacity(batch.len());
        for r in batch {
            let v1 = self.augment(&r.features);
            let v2 = self.augment(&r.features);
            let ego = r.ego();
            let key = forward(&cfg, &self.params.momentum.data, &v2, &ego).token;
            batch_keys.push((key, r.labels()));
            queries.push(Query { features: v1, ego, labels: r.labels() });
        }
        let mut keys: Vec<(Vec<f64>, Labels)> = self.dict.iter().cloned().collect();
        keys.extend(batch_keys.iter().cloned());

        let obj = objective(&cfg, &self.params.online.data, &queries, &keys);
        for (w, g) in self.params.online.data.iter_mut().zip(&obj.grad) {
            *w -= cfg.learning_rate * (g + cfg.weight_decay * *w);
        }
        momentum_update(&mut self.params.momentum, &self.params.online, cfg.momentum)?;
        self.dict.push(batch_keys);
        self.steps += 1;
        Ok(StepStats {
            loss: obj.loss,
            l_act: obj.l_act,
            l_acc: obj.l_acc,
            skipped_act: obj.skipped_act,
            skipped_acc: obj.skipped_acc,
            batch: batch.len(),
            keys: keys.len(),
        })
    }

    /// Shuffled pass over `data`; returns the mean step loss and skip counts.
    pub fn epoch(&mut self, data: &[TrainingRecord]) -> Result<(f64, usize, usize), EncoderError> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut n = 0usize;
        let (mut sa, mut sc) = (0, 0);
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&TrainingRecord> = chunk.iter().map(|&i| &data[i]).collect();
            let s = self.step(&batch)?;
            total += s.loss;
            n += 1;
            sa += s.skipped_act;
            sc += s.skipped_acc;
        }
        Ok((if n > 0 { total / n as f64 } else { 0.0 }, sa, sc))
    }
}

/// Trains from a fresh seeded initialisation for `config.epochs` epochs.
pub fn train(config: &EncoderConfig, data: &[TrainingRecord]) -> Result<(EncoderParams, TrainReport), EncoderError> {
    let mut trainer = Trainer::new(config.clone())?;
    let mut report = TrainReport::default();
    if data.is_empty() {
        log::warn!("empty training set; parameters left at initialisation");
        report.warnings.push("empty dataset: no training performed".into());
        return Ok((trainer.into_params(), report));
    }
    for _ in 0..config.epochs {
        let (loss, sa, sc) = trainer.epoch(data)?;
        report.epoch_losses.push(loss);
        report.skipped_act.push(sa);
        report.skipped_acc.push(sc);
    }
    report.steps = trainer.steps();
    Ok((trainer.into_params(), report))
}
