//! Test-partition hygiene.
//!
//! Selection drivers accept a [`TrainPartition`] only. A partition built from a
//! split remembers the row ids of its test side, and every read made by a
//! driver goes through [`TrainPartition::audited`], which fails if any of the
//! rows it is about to hand out belongs to the sealed test set.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

static AUDITED_READS: AtomicU64 = AtomicU64::new(0);
static VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of audited reads performed by this process.
pub fn audited_reads() -> u64 {
    AUDITED_READS.load(Ordering::Relaxed)
}

/// Number of audited reads that touched a sealed test row.
pub fn violations() -> u64 {
    VIOLATIONS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone)]
pub struct TrainPartition {
    data: Dataset,
    sealed: Arc<BTreeSet<usize>>,
}

impl TrainPartition {
    /// Wraps data that has no held-out counterpart.
    pub fn unsplit(data: Dataset) -> Self {
        TrainPartition {
            data,
            sealed: Arc::new(BTreeSet::new()),
        }
    }

    /// Wraps the train side of a split, sealing the test side's rows.
    pub fn from_split(train: Dataset, test: &Dataset) -> Self {
        TrainPartition {
            data: train,
            sealed: Arc::new(test.row_ids().iter().copied().collect()),
        }
    }

    /// Hands out the training rows after checking none of them is sealed.
    pub fn audited(&self) -> Result<&Dataset> {
        AUDITED_READS.fetch_add(1, Ordering::Relaxed);
        let leaked: Vec<usize> = self
            .data
            .row_ids()
            .iter()
            .copied()
            .filter(|id| self.sealed.contains(id))
            .collect();
        if leaked.is_empty() {
            Ok(&self.data)
        } else {
            VIOLATIONS.fetch_add(1, Ordering::Relaxed);
            Err(Error::HygieneViolation(leaked))
        }
    }

    pub fn sealed_rows(&self) -> &BTreeSet<usize> {
        &self.sealed
    }

    /// Test-only door for building a partition that leaks, to prove the audit fires.
    #[doc(hidden)]
    pub fn with_sealed_rows(data: Dataset, sealed: BTreeSet<usize>) -> Self {
        TrainPartition {
            data,
            sealed: Arc::new(sealed),
        }
    }
}
