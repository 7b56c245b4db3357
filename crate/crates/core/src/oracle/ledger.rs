use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Query counter that refuses to exceed its budget.
///
/// Increments are lock-free compare-and-swap, so N concurrent callers
/// against budget B see exactly `min(N, B)` successful reservations.
#[derive(Debug)]
pub struct QueryLedger {
    count: AtomicU64,
    budget: Option<u64>,
}

impl QueryLedger {
    pub fn new(budget: u64) -> Self {
        Self {
            count: AtomicU64::new(0),
            budget: Some(budget),
        }
    }

    pub fn unlimited() -> Self {
        Self {
            count: AtomicU64::new(0),
            budget: None,
        }
    }

    pub fn with_budget(budget: Option<u64>) -> Self {
        Self {
            count: AtomicU64::new(0),
            budget,
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn remaining(&self) -> Option<u64> {
        self.budget.map(|b| b.saturating_sub(self.count()))
    }

    /// Claim one query slot.
    pub fn reserve(&self) -> Result<()> {
        let Some(budget) = self.budget else {
            self.count.fetch_add(1, Ordering::SeqCst);
            return Ok(());
        };
        self.count
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |c| (c < budget).then_some(c + 1))
            .map(|_| ())
            .map_err(|count| Error::Budget { count, budget })
    }

    /// Return a slot claimed by [`reserve`](Self::reserve) whose query never
    /// reached the oracle.
    pub fn release(&self) {
        let _ = self
            .count
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |c| c.checked_sub(1));
    }

    /// Fail early if fewer than `n` queries remain.
    pub fn ensure_available(&self, n: u64) -> Result<()> {
        match self.budget {
            Some(budget) if self.count() + n > budget => Err(Error::Budget {
                count: self.count(),
                budget,
            }),
            _ => Ok(()),
        }
    }
}
