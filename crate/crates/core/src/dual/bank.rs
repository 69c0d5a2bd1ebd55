//! Experience memory bank.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MetaAction;
use crate::perceiver::{LaneRelation, SceneDescription, Semantic};
use crate::sim::scenario::LightPhase;
use crate::token::{top_k, SceneToken, TokenError, TOKEN_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Reflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedAt {
    pub episode: u64,
    pub timestep: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub token: SceneToken,
    pub description: SceneDescription,
    pub reasoning: String,
    pub decision: MetaAction,
    pub provenance: Provenance,
    /// Set on reflection experiences produced by the fallback rule.
    #[serde(default)]
    pub fallback: bool,
    pub created_at: CreatedAt,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BankError {
    #[error("invalid token: {0}")]
    Token(#[from] TokenError),
    #[error("bank is full ({0} entries)")]
    Full(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReviseReport {
    pub duplicates: usize,
    pub rule_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BankStats {
    pub size: usize,
    pub decisions: BTreeMap<String, usize>,
    pub provenance: BTreeMap<String, usize>,
}

/// Append-only store of experiences with cosine retrieval.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MemoryBank {
    entries: Vec<Experience>,
    #[serde(skip)]
    norms: Vec<f64>,
    pub capacity: Option<usize>,
}

impl PartialEq for MemoryBank {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.capacity == other.capacity
    }
}

impl MemoryBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_limit(capacity: usize) -> Self {
        Self { capacity: Some(capacity), ..Self::default() }
    }

    pub fn from_entries(entries: Vec<Experience>) -> Result<Self, BankError> {
        let mut b = Self::new();
        for e in entries {
            b.insert(e)?;
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Experience] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.entries.get(i)
    }

    pub fn insert(&mut self, exp: Experience) -> Result<(), BankError> {
        exp.token.check_dim(TOKEN_DIM)?;
        let n = exp.token.norm();
        if !n.is_finite() {
            return Err(TokenError::NonFinite.into());
        }
        if n == 0.0 {
            return Err(TokenError::ZeroNorm.into());
        }
        if self.capacity.is_some_and(|c| self.entries.len() >= c) {
            return Err(BankError::Full(self.entries.len()));
        }
        self.sync_norms();
        self.entries.push(exp);
        self.norms.push(n);
        Ok(())
    }

    fn sync_norms(&mut self) {
        if self.norms.len() != self.entries.len() {
            self.norms = self.entries.iter().map(|e| e.token.norm()).collect();
        }
    }

    /// Top-`k` experiences by cosine similarity, most similar first; ties
    /// go to the earlier insertion.
    pub fn retrieve_topk(&self, query: &SceneToken, k: usize) -> Result<Vec<(usize, f64)>, TokenError> {
        if self.norms.len() == self.entries.len() {
            top_k(query, self.entries.iter().zip(&self.norms).map(|(e, n)| (e.token.as_slice(), *n)), k)
        } else {
            top_k(query, self.entries.iter().map(|e| (e.token.as_slice(), e.token.norm())), k)
        }
    }

    /// Removes duplicate (token, decision) pairs, keeping the newest, and
    /// experiences that break a hard traffic rule.
    pub fn revise(&mut self) -> ReviseReport {
        let mut seen: BTreeSet<(Vec<u64>, MetaAction)> = BTreeSet::new();
        let mut keep = alloc::vec![false; self.entries.len()];
        let mut report = ReviseReport::default();
        for (i, e) in self.entries.iter().enumerate().rev() {
            if !seen.insert((e.token.bits(), e.decision)) {
                report.duplicates += 1;
            } else if violates_hard_rule(e) {
                report.rule_violations += 1;
            } else {
                keep[i] = true;
            }
        }
        let mut it = keep.iter();
        self.entries.retain(|_| *it.next().unwrap_or(&false));
        self.norms.clear();
        self.sync_norms();
        report
    }

    /// Seeded subset of `size` entries in original order. Sizes beyond the
    /// bank are clamped.
    pub fn subsample(&self, size: usize, seed: u64) -> MemoryBank {
        if size < self.entries.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, self.entries.len(), size).into_vec();
            idx.sort_unstable();
            let entries: Vec<Experience> = idx.into_iter().map(|i| self.entries[i].clone()).collect();
            let mut b = MemoryBank { entries, norms: Vec::new(), capacity: self.capacity };
            b.sync_norms();
            b
        } else {
            if size > self.entries.len() {
                log::warn!("requested {size} experiences from a bank of {}; using all", self.entries.len());
            }
            let mut b = self.clone();
            b.sync_norms();
            b
        }
    }

    pub fn stats(&self) -> BankStats {
        let mut s = BankStats { size: self.entries.len(), ..Default::default() };
        for e in &self.entries {
            *s.decisions.entry(String::from(e.decision.as_str())).or_default() += 1;
            let p = match e.provenance {
                Provenance::Analytic => "analytic",
                Provenance::Reflection => "reflection",
            };
            *s.provenance.entry(String::from(p)).or_default() += 1;
        }
        s
    }

    /// Appends everything from `other`.
    pub fn extend(&mut self, other: &MemoryBank) -> Result<(), BankError> {
        for e in other.entries() {
            self.insert(e.clone())?;
        }
        Ok(())
    }

    /// Restores cached norms after deserialization.
    pub fn rebuild_index(&mut self) {
        self.norms.clear();
        self.sync_norms();
    }
}

/// Accelerating toward a red light or a pedestrian in the path.
pub fn violates_hard_rule(e: &Experience) -> bool {
    if e.decision != MetaAction::Ac {
        return false;
    }
    match e.description.nearest() {
        Some(o) => {
            (o.semantic == Semantic::TrafficLight && o.light_phase == Some(LightPhase::Red))
                || (o.semantic == Semantic::Pedestrian
                    && matches!(o.relation, LaneRelation::Same | LaneRelation::Crossing)
                    && o.is_ahead())
        }
        None => false,
    }
}
