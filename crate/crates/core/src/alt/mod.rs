//! Reference schedulers sharing the [`Scheduler`](crate::Scheduler)
//! interface with HLS: flat DRR, hierarchical DRR over a static interleaved
//! visit list, and a simplified HTB.

mod drr;
mod hdrr;
mod htb;

use alloc::vec;
use alloc::vec::Vec;

pub use drr::{Drr, DrrParams};
pub use hdrr::{
    build_visit_list, visit_list_period, Hdrr, HdrrParams, VisitWalker, DEFAULT_MAX_CYCLE,
};
pub use htb::{Color, HtbLite, HtbParams, TokenBucket};

use crate::hierarchy::{ClassId, Hierarchy};
use crate::hls::DEFAULT_LMAX;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AltError {
    #[error("hierarchy has no leaf classes")]
    NoLeafClasses,
    #[error("expected {expected} per-class entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("maximum packet size of leaf {0} must be at least 1 byte")]
    InvalidLmax(ClassId),
    #[error("quantum of class {0} must be at least 1 byte")]
    InvalidQuantum(ClassId),
    #[error("visit list cycle of {period} slots exceeds the cap of {cap}")]
    CycleTooLarge { period: u128, cap: u64 },
    #[error("link capacity must be positive")]
    ZeroCapacity,
}

pub(crate) fn resolve_lmax(h: &Hierarchy, lmax: &[u32]) -> Result<Vec<u32>, AltError> {
    if h.leaves().is_empty() {
        return Err(AltError::NoLeafClasses);
    }
    let v = if lmax.is_empty() {
        vec![DEFAULT_LMAX; h.len()]
    } else if lmax.len() != h.len() {
        return Err(AltError::LengthMismatch {
            expected: h.len(),
            got: lmax.len(),
        });
    } else {
        lmax.to_vec()
    };
    for &l in h.leaves() {
        if v[l.index()] == 0 {
            return Err(AltError::InvalidLmax(l));
        }
    }
    Ok(v)
}
