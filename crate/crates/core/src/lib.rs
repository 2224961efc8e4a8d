//! Hierarchical link sharing: the HLS round-robin scheduler, reference
//! schedulers (DRR, HDRR, a simplified HTB), hierarchical max-min fair-share
//! oracles, fairness and transmission-gap bounds, and a discrete-event
//! single-link simulator.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line front end and presets live in the companion `linkshare-cli` crate.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod alt;
pub mod fairshare;
pub mod hierarchy;
pub mod hls;
pub mod metrics;
pub mod rational;
pub mod sched;
pub mod sim;

pub use hierarchy::{ClassId, ClassKind, Hierarchy, HierarchyError};
pub use rational::Rational;
pub use sched::{Mark, Nanos, Packet, RoundKind, Scheduler, SchedulerKind};
