//! Scene tokens and cosine retrieval.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::sqrt;

pub const TOKEN_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TokenError {
    #[error("token has dimension {actual}, expected {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("token has zero norm")]
    ZeroNorm,
    #[error("token contains non-finite values")]
    NonFinite,
}

/// Embedding of a scene: an ACT half followed by an ACC half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneToken(pub Vec<f64>);

impl SceneToken {
    pub fn new(values: Vec<f64>) -> Result<Self, TokenError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TokenError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn act(&self) -> &[f64] {
        &self.0[..self.0.len() / 2]
    }

    pub fn acc(&self) -> &[f64] {
        &self.0[self.0.len() / 2..]
    }

    pub fn norm(&self) -> f64 {
        sqrt(dot(&self.0, &self.0))
    }

    /// Bit patterns, for exact identity comparisons.
    pub fn bits(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }

    pub fn check_dim(&self, expected: usize) -> Result<(), TokenError> {
        if self.0.len() != expected {
            return Err(TokenError::Dimension { expected, actual: self.0.len() });
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(q: &SceneToken, t: &SceneToken) -> Result<f64, TokenError> {
    if q.dim() != t.dim() {
        return Err(TokenError::Dimension { expected: q.dim(), actual: t.dim() });
    }
    let nq = q.norm();
    let nt = t.norm();
    if nq == 0.0 || nt == 0.0 {
        return Err(TokenError::ZeroNorm);
    }
    Ok((dot(&q.0, &t.0) / (nq * nt)).clamp(-1.0, 1.0))
}

/// Ranking order: similarity descending, then index ascending.
pub fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Indices and similarities of the `k` entries most similar to `query`.
///
/// `norms[i]` must be the norm of `tokens[i]`; entries are visited once and
/// the top `k` are kept by partial selection, so the result equals a full
/// sort under [`rank_order`].
pub fn top_k<'a, I>(query: &SceneToken, tokens: I, k: usize) -> Result<Vec<(usize, f64)>, TokenError>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    if k == 0 {
        return Ok(Vec::new());
    }
    let nq = query.norm();
    if nq == 0.0 {
        return Err(TokenError::ZeroNorm);
    }
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for (i, (t, nt)) in tokens.into_iter().enumerate() {
        if t.len() != query.dim() {
            return Err(TokenError::Dimension { expected: query.dim(), actual: t.len() });
        }
        let sim = if nt == 0.0 { f64::NEG_INFINITY } else { (dot(&query.0, t) / (nq * nt)).clamp(-1.0, 1.0) };
        scored.push((i, sim));
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tok(v: &[f64]) -> SceneToken {
        SceneToken::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_cases() {
        let a = tok(&[1.0, 2.0, 3.0]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&tok(&[1.0, 0.0]), &tok(&[0.0, 3.0])).unwrap(), 0.0);
        let neg = tok(&[-1.0, -2.0, -3.0]);
        assert!((cosine(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine(&a, &tok(&[0.0, 0.0, 0.0])), Err(TokenError::ZeroNorm));
    }

    #[test]
    fn ties_prefer_earlier() {
        let q = tok(&[1.0, 0.0]);
        let toks = vec![vec![0.0, 1.0], vec![2.0, 0.0], vec![1.0, 0.0]];
        let r = top_k(&q, toks.iter().map(|t| (t.as_slice(), sqrt(dot(t, t)))), 2).unwrap();
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1, 2]);
    }
}
