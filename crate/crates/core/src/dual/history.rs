//! Bounded queue of recent decisions used for reflection.

use alloc::collections::VecDeque;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{MetaAction, NavigationHint};
use crate::perceiver::SceneDescription;
use crate::token::SceneToken;

pub const HISTORY_CAPACITY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub tick: u64,
    pub time: f64,
    pub token: SceneToken,
    pub description: SceneDescription,
    pub nav: NavigationHint,
    pub reasoning: String,
    pub decision: MetaAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryQueue {
    records: VecDeque<HistoryRecord>,
    capacity: usize,
}

impl Default for HistoryQueue {
    fn default() -> Self {
        Self::new(HISTORY_CAPACITY)
    }
}

impl HistoryQueue {
    pub fn new(capacity: usize) -> Self {
        Self { records: VecDeque::with_capacity(capacity), capacity: capacity.max(1) }
    }

    /// Appends a record, dropping the oldest when full.
    pub fn push(&mut self, record: HistoryRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &HistoryRecord> {
        self.records.iter()
    }

    pub fn get(&self, i: usize) -> Option<&HistoryRecord> {
        self.records.get(i)
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }
}
