//! Wall clock, call deadlines and a bank shared between threads.

use std::sync::mpsc;
use std::sync::{Arc, PoisonError, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use dualdrive_core::dual::{BackendError, BankError, DecisionRequest, Experience, MemoryBank, ReasonerBackend};
use dualdrive_core::harness::Clock;
use dualdrive_core::token::{SceneToken, TokenError};

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    start: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Runs each call of the inner backend on a worker thread and gives up
/// after `timeout`. A timed-out worker is left to finish on its own.
pub struct TimeoutBackend<B> {
    inner: Arc<B>,
    timeout: Duration,
    name: String,
}

impl<B: ReasonerBackend + Send + Sync + 'static> TimeoutBackend<B> {
    pub fn new(inner: B, timeout: Duration) -> Self {
        let name = format!("{} (timeout {} ms)", inner.name(), timeout.as_millis());
        Self { inner: Arc::new(inner), timeout, name }
    }
}

impl<B: ReasonerBackend + Send + Sync + 'static> ReasonerBackend for TimeoutBackend<B> {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &DecisionRequest) -> Result<String, BackendError> {
        let (tx, rx) = mpsc::channel();
        let inner = Arc::clone(&self.inner);
        let req = request.clone();
        thread::spawn(move || {
            let _ = tx.send(inner.complete(&req));
        });
        match rx.recv_timeout(self.timeout) {
            Ok(r) => r,
            Err(mpsc::RecvTimeoutError::Timeout) => Err(BackendError::Timeout(self.timeout.as_millis() as u64)),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(BackendError::Other("backend worker panicked".into())),
        }
    }
}

/// Memory bank behind a reader-writer lock. Episodes work on their own
/// snapshot and merge their inserts back in one exclusive step, so readers
/// never see a partial merge.
#[derive(Debug, Clone, Default)]
pub struct SharedBank {
    inner: Arc<RwLock<MemoryBank>>,
}

impl SharedBank {
    pub fn new(bank: MemoryBank) -> Self {
        Self { inner: Arc::new(RwLock::new(bank)) }
    }

    pub fn snapshot(&self) -> MemoryBank {
        self.inner.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap_or_else(PoisonError::into_inner).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn retrieve_topk(&self, query: &SceneToken, k: usize) -> Result<Vec<(usize, f64)>, TokenError> {
        self.inner.read().unwrap_or_else(PoisonError::into_inner).retrieve_topk(query, k)
    }

    /// Appends all of `delta` or nothing.
    pub fn merge(&self, delta: &[Experience]) -> Result<(), BankError> {
        let mut guard = self.inner.write().unwrap_or_else(PoisonError::into_inner);
        let mut next = guard.clone();
        for e in delta {
            next.insert(e.clone())?;
        }
        *guard = next;
        Ok(())
    }

    pub fn into_inner(self) -> MemoryBank {
        match Arc::try_unwrap(self.inner) {
            Ok(lock) => lock.into_inner().unwrap_or_else(PoisonError::into_inner),
            Err(shared) => shared.read().unwrap_or_else(PoisonError::into_inner).clone(),
        }
    }
}
