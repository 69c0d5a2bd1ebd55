//! Encoder forward and backward passes over flat parameter storage.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::EGO_DIM;
use super::{EncoderConfig, EncoderError, Pooling};
use crate::math::{exp, sqrt};
use crate::token::SceneToken;

/// Offsets of each tensor inside the flat weight vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    h: usize,
    f: usize,
    c: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    att: Option<usize>,
    ws: usize,
    bs: usize,
    wf: usize,
    bf: usize,
    len: usize,
}

impl Layout {
    fn new(cfg: &EncoderConfig) -> Self {
        let (h, f, c) = (cfg.ego_hidden, cfg.token_dim, cfg.grid_c);
        let mut o = 0;
        let mut take = |n: usize| {
            let s = o;
            o += n;
            s
        };
        let w1 = take(h * EGO_DIM);
        let b1 = take(h);
        let w2 = take(f * h);
        let b2 = take(f);
        let att = (cfg.pooling == Pooling::Attention).then(|| take(c));
        let ws = take(f * c);
        let bs = take(f);
        let wf = take(f * 2 * f);
        let bf = take(f);
        Self { h, f, c, w1, b1, w2, b2, att, ws, bs, wf, bf, len: o }
    }
}

/// Weights of one encoder network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderWeights {
    pub data: Vec<f64>,
}

impl EncoderWeights {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Online network, its momentum copy and the configuration they follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub online: EncoderWeights,
    pub momentum: EncoderWeights,
}

impl EncoderParams {
    /// He-initialised weights with zero biases; the momentum copy starts
    /// equal to the online network.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self, EncoderError> {
        config.validate()?;
        let l = Layout::new(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; l.len];
        let mut fill = |off: usize, n: usize, fan_in: usize, rng: &mut ChaCha8Rng| {
            let d = Normal::new(0.0, sqrt(2.0 / fan_in as f64)).expect("positive std");
            for v in &mut data[off..off + n] {
                *v = d.sample(rng);
            }
        };
        fill(l.w1, l.h * EGO_DIM, EGO_DIM, &mut rng);
        fill(l.w2, l.f * l.h, l.h, &mut rng);
        if let Some(a) = l.att {
            fill(a, l.c, l.c, &mut rng);
        }
        fill(l.ws, l.f * l.c, l.c, &mut rng);
        fill(l.wf, l.f * 2 * l.f, 2 * l.f, &mut rng);
        let online = EncoderWeights { data };
        Ok(Self { config: config.clone(), momentum: online.clone(), online })
    }

    /// Named tensor shapes in storage order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let l = Layout::new(&self.config);
        let mut m = vec![
            ("ego.w1".into(), vec![l.h, EGO_DIM]),
            ("ego.b1".into(), vec![l.h]),
            ("ego.w2".into(), vec![l.f, l.h]),
            ("ego.b2".into(), vec![l.f]),
        ];
        if l.att.is_some() {
            m.push(("scene.attention".into(), vec![l.c]));
        }
        m.push(("scene.w".into(), vec![l.f, l.c]));
        m.push(("scene.b".into(), vec![l.f]));
        m.push(("fusion.w".into(), vec![l.f, 2 * l.f]));
        m.push(("fusion.b".into(), vec![l.f]));
        m
    }

    pub fn parameter_count(config: &EncoderConfig) -> usize {
        Layout::new(config).len
    }

    pub fn check(&self) -> Result<(), EncoderError> {
        self.config.validate()?;
        let n = Layout::new(&self.config).len;
        for (what, w) in [("online weights", &self.online), ("momentum weights", &self.momentum)] {
            if w.len() != n {
                return Err(EncoderError::Shape { what, expected: n, actual: w.len() });
            }
            if w.data.iter().any(|v| !v.is_finite()) {
                return Err(EncoderError::NonFinite(what));
            }
        }
        Ok(())
    }
}

/// Elementwise `m <- alpha * m + (1 - alpha) * online`.
pub fn momentum_update(momentum: &mut EncoderWeights, online: &EncoderWeights, alpha: f64) -> Result<(), EncoderError> {
    if momentum.len() != online.len() {
        return Err(EncoderError::Shape { what: "momentum weights", expected: online.len(), actual: momentum.len() });
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(EncoderError::Config("momentum must lie in [0, 1)".into()));
    }
    for (m, o) in momentum.data.iter_mut().zip(&online.data) {
        *m = alpha * *m + (1.0 - alpha) * *o;
    }
    Ok(())
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Cache {
    ego: Vec<f64>,
    pre1: Vec<f64>,
    hid: Vec<f64>,
    pooled: Vec<f64>,
    /// Attention weights over rows.
    att_w: Vec<f64>,
    fused_pre: Vec<f64>,
    fused: Vec<f64>,
    norms: [f64; 2],
    pub(crate) token: Vec<f64>,
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], b: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        out[r] = b[r] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

fn check_inputs(cfg: &EncoderConfig, features: &[f64], ego: &[f64]) -> Result<(), EncoderError> {
    let nc = cfg.grid_n * cfg.grid_c;
    if features.len() != nc {
        return Err(EncoderError::Shape { what: "feature grid", expected: nc, actual: features.len() });
    }
    if ego.len() != EGO_DIM {
        return Err(EncoderError::Shape { what: "ego state", expected: EGO_DIM, actual: ego.len() });
    }
    if features.iter().chain(ego).any(|v| !v.is_finite()) {
        return Err(EncoderError::NonFinite("encoder input"));
    }
    Ok(())
}

pub(crate) fn forward(cfg: &EncoderConfig, w: &[f64], features: &[f64], ego: &[f64]) -> Cache {
    let l = Layout::new(cfg);
    let (h, f, c, n) = (l.h, l.f, l.c, cfg.grid_n);

    let mut pre1 = vec![0.0; h];
    matvec(&w[l.w1..l.b1], h, EGO_DIM, ego, &w[l.b1..l.b1 + h], &mut pre1);
    let hid: Vec<f64> = pre1.iter().map(|v| v.max(0.0)).collect();
    let mut e = vec![0.0; f];
    matvec(&w[l.w2..l.b2], f, h, &hid, &w[l.b2..l.b2 + f], &mut e);

    let mut pooled = vec![0.0; c];
    let mut att_w = Vec::new();
    match l.att {
        None => {
            for ch in 0..c {
                pooled[ch] = (0..n).map(|r| features[r * c + ch]).fold(f64::NEG_INFINITY, f64::max);
            }
        }
        Some(a) => {
            let q = &w[a..a + c];
            let scores: Vec<f64> =
                (0..n).map(|r| features[r * c..(r + 1) * c].iter().zip(q).map(|(x, y)| x * y).sum()).collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = scores.iter().map(|s| exp(s - m)).collect();
            let tot: f64 = ex.iter().sum();
            att_w = ex.iter().map(|v| v / tot).collect();
            for r in 0..n {
                for ch in 0..c {
                    pooled[ch] += att_w[r] * features[r * c + ch];
                }
            }
        }
    }
    let mut sf = vec![0.0; f];
    matvec(&w[l.ws..l.bs], f, c, &pooled, &w[l.bs..l.bs + f], &mut sf);

    let mut fused_pre = e;
    fused_pre.extend_from_slice(&sf);
    let fused: Vec<f64> = fused_pre.iter().map(|v| v.max(0.0)).collect();
    let mut z = vec![0.0; f];
    matvec(&w[l.wf..l.bf], f, 2 * f, &fused, &w[l.bf..l.bf + f], &mut z);

    let half = f / 2;
    let mut token = z;
    let mut norms = [0.0; 2];
    for (k, part) in token.chunks_mut(half).enumerate() {
        let nrm = sqrt(part.iter().map(|v| v * v).sum::<f64>());
        norms[k] = nrm;
        if nrm > 0.0 {
            for v in part.iter_mut() {
                *v /= nrm;
            }
        }
    }
    Cache { ego: ego.to_vec(), pre1, hid, pooled, att_w, fused_pre, fused, norms, token }
}

/// Accumulates parameter gradients into `grad` given `d_token`, the loss
/// gradient with respect to the normalised token.
pub(crate) fn backward(cfg: &EncoderConfig, w: &[f64], features: &[f64], cache: &Cache, d_token: &[f64], grad: &mut [f64]) {
    let l = Layout::new(cfg);
    let (h, f, c, n) = (l.h, l.f, l.c, cfg.grid_n);
    let half = f / 2;

    let mut dz = vec![0.0; f];
    for k in 0..2 {
        let r = k * half..(k + 1) * half;
        let nrm = cache.norms[k];
        if nrm == 0.0 {
            continue;
        }
        let t = &cache.token[r.clone()];
        let g = &d_token[r.clone()];
        let tg: f64 = t.iter().zip(g).map(|(a, b)| a * b).sum();
        for (i, idx) in r.enumerate() {
            dz[idx] = (g[i] - t[i] * tg) / nrm;
        }
    }

    // fusion
    let mut dfused = vec![0.0; 2 * f];
    for r in 0..f {
        let g = dz[r];
        if g == 0.0 {
            continue;
        }
        grad[l.bf + r] += g;
        let row = l.wf + r * 2 * f;
        for k in 0..2 * f {
            grad[row + k] += g * cache.fused[k];
            dfused[k] += g * w[row + k];
        }
    }
    for k in 0..2 * f {
        if cache.fused_pre[k] <= 0.0 {
            dfused[k] = 0.0;
        }
    }
    let (de, dsf) = dfused.split_at(f);

    // scene projection
    let mut dpooled = vec![0.0; c];
    for r in 0..f {
        let g = dsf[r];
        if g == 0.0 {
            continue;
        }
        grad[l.bs + r] += g;
        let row = l.ws + r * c;
        for k in 0..c {
            grad[row + k] += g * cache.pooled[k];
            dpooled[k] += g * w[row + k];
        }
    }
    if let Some(a) = l.att {
        let dw: Vec<f64> =
            (0..n).map(|r| features[r * c..(r + 1) * c].iter().zip(&dpooled).map(|(x, y)| x * y).sum()).collect();
        let mean: f64 = cache.att_w.iter().zip(&dw).map(|(p, d)| p * d).sum();
        for r in 0..n {
            let ds = cache.att_w[r] * (dw[r] - mean);
            for k in 0..c {
                grad[a + k] += ds * features[r * c + k];
            }
        }
    }

    // ego MLP
    let mut dhid = vec![0.0; h];
    for r in 0..f {
        let g = de[r];
        if g == 0.0 {
            continue;
        }
        grad[l.b2 + r] += g;
        let row = l.w2 + r * h;
        for k in 0..h {
            grad[row + k] += g * cache.hid[k];
            dhid[k] += g * w[row + k];
        }
    }
    for r in 0..h {
        if cache.pre1[r] <= 0.0 {
            continue;
        }
        let g = dhid[r];
        grad[l.b1 + r] += g;
        let row = l.w1 + r * EGO_DIM;
        for k in 0..EGO_DIM {
            grad[row + k] += g * cache.ego[k];
        }
    }
}

/// Encodes one scene with the online network.
pub fn encode(params: &EncoderParams, features: &[f64], ego: &[f64]) -> Result<SceneToken, EncoderError> {
    check_inputs(&params.config, features, ego)?;
    let n = Layout::new(&params.config).len;
    if params.online.len() != n {
        return Err(EncoderError::Shape { what: "online weights", expected: n, actual: params.online.len() });
    }
    let cache = forward(&params.config, &params.online.data, features, ego);
    Ok(SceneToken(cache.token))
}

/// Encodes with an arbitrary weight vector (e.g. the momentum copy).
pub fn encode_with(cfg: &EncoderConfig, weights: &EncoderWeights, features: &[f64], ego: &[f64]) -> Result<SceneToken, EncoderError> {
    check_inputs(cfg, features, ego)?;
    Ok(SceneToken(forward(cfg, &weights.data, features, ego).token))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EncoderConfig {
        EncoderConfig { grid_n: 3, grid_c: 4, token_dim: 8, ego_hidden: 5, batch_size: 4, dict_capacity: 8, ..Default::default() }
    }

    #[test]
    fn halves_are_unit_norm() {
        let cfg = EncoderConfig::default();
        let p = EncoderParams::init(&cfg, 1).unwrap();
        let feats: Vec<f64> = (0..cfg.grid_n * cfg.grid_c).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let ego = super::super::ego_vector(2, 7.5);
        let t = encode(&p, &feats, &ego).unwrap();
        assert_eq!(t.dim(), 256);
        for half in [t.act(), t.acc()] {
            assert_eq!(half.len(), 128);
            let n = sqrt(half.iter().map(|v| v * v).sum::<f64>());
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(encode(&p, &feats, &ego).unwrap(), t);
    }

    #[test]
    fn shape_errors_name_dimensions() {
        let cfg = small();
        let p = EncoderParams::init(&cfg, 1).unwrap();
        let err = encode(&p, &[0.0; 5], &[0.0; 9]).unwrap_err();
        assert_eq!(err, EncoderError::Shape { what: "feature grid", expected: 12, actual: 5 });
    }

    #[test]
    fn momentum_cases() {
        let mut m = EncoderWeights { data: vec![1.0] };
        momentum_update(&mut m, &EncoderWeights { data: vec![0.0] }, 0.999).unwrap();
        assert_eq!(m.data[0], 0.999);
        let mut m = EncoderWeights { data: vec![3.0, -2.0] };
        let o = EncoderWeights { data: vec![0.5, 4.0] };
        momentum_update(&mut m, &o, 0.0).unwrap();
        assert_eq!(m, o);
        assert!(momentum_update(&mut m, &EncoderWeights { data: vec![1.0] }, 0.5).is_err());
    }

    #[test]
    fn attention_manifest_matches_storage() {
        let cfg = EncoderConfig { pooling: Pooling::Attention, ..small() };
        let p = EncoderParams::init(&cfg, 3).unwrap();
        let total: usize = p.manifest().iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        assert_eq!(total, p.online.len());
        p.check().unwrap();
    }
}
