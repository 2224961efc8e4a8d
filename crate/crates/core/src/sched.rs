//! The scheduler interface shared by HLS and the reference schedulers.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Sub};

use num_traits::float::FloatCore;

use crate::alt::{Drr, DrrParams, Hdrr, HdrrParams, HtbLite, HtbParams};
use crate::hierarchy::{ClassId, Hierarchy};
use crate::hls::{Hls, HlsError, PhaseMode};

/// Simulated time in integer nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Nanos(pub u64);

impl Nanos {
    pub const ZERO: Nanos = Nanos(0);
    pub const MAX: Nanos = Nanos(u64::MAX);

    pub fn from_secs_f64(s: f64) -> Nanos {
        Nanos(FloatCore::round(s * 1e9) as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }
}

impl Add for Nanos {
    type Output = Nanos;
    fn add(self, rhs: Nanos) -> Nanos {
        Nanos(self.0.saturating_add(rhs.0))
    }
}

impl Sub for Nanos {
    type Output = Nanos;
    fn sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 - rhs.0)
    }
}

impl fmt::Display for Nanos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub leaf: ClassId,
    pub size: u32,
    pub seq: u64,
    pub arrival: Nanos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RoundKind {
    Main,
    Surplus,
}

/// Scheduler-internal moments worth putting in a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mark {
    RoundStart {
        kind: RoundKind,
        round: u64,
    },
    VisitStart {
        leaf: ClassId,
        round: u64,
    },
    /// `backlogged` tells whether the leaf still holds packets (and stays
    /// eligible) when the scheduler turns away from it.
    VisitEnd {
        leaf: ClassId,
        round: u64,
        backlogged: bool,
    },
    /// A leaf enters or leaves the scheduler's notion of "backlogged". For HLS
    /// this is the active flag, set only at round starts.
    Backlog {
        leaf: ClassId,
        backlogged: bool,
    },
}

/// Conserved quantities exposed for periodic snapshots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateDigest {
    pub conserved: i64,
    pub q_star: i64,
    pub round: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnqueueError {
    #[error("class {0} is not a leaf of the hierarchy")]
    UnknownLeaf(ClassId),
    #[error("packet of {size} bytes exceeds the maximum {lmax} of class {leaf}")]
    OversizedPacket { leaf: ClassId, size: u32, lmax: u32 },
}

pub trait Scheduler {
    fn enqueue(&mut self, pkt: Packet, now: Nanos) -> Result<(), EnqueueError>;

    /// Next packet to put on the wire, or `None` if nothing is eligible.
    fn dequeue(&mut self, now: Nanos) -> Option<Packet>;

    /// Turns recording of [`Mark`]s on or off. Off by default.
    fn record_marks(&mut self, on: bool) {
        let _ = on;
    }

    /// Moves pending marks into `out`.
    fn drain_marks(&mut self, out: &mut Vec<Mark>) {
        let _ = out;
    }

    /// Earliest time at which a currently ineligible backlog may become
    /// eligible; only shapers need this.
    fn wakeup_hint(&self, now: Nanos) -> Option<Nanos> {
        let _ = now;
        None
    }

    fn snapshot(&self) -> Option<StateDigest> {
        None
    }

    fn name(&self) -> &'static str;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchedulerKind {
    Hls,
    Drr,
    Hdrr,
    Htb,
}

impl SchedulerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hls" => Some(SchedulerKind::Hls),
            "drr" => Some(SchedulerKind::Drr),
            "hdrr" => Some(SchedulerKind::Hdrr),
            "htb" => Some(SchedulerKind::Htb),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::Hls => "hls",
            SchedulerKind::Drr => "drr",
            SchedulerKind::Hdrr => "hdrr",
            SchedulerKind::Htb => "htb",
        }
    }
}

/// Scheduler selection plus every scheduler's tunables.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerConfig {
    pub kind: SchedulerKind,
    pub phase_mode: PhaseMode,
    pub drr: DrrParams,
    pub hdrr: HdrrParams,
    pub htb: HtbParams,
}

impl SchedulerConfig {
    pub fn new(kind: SchedulerKind) -> Self {
        SchedulerConfig {
            kind,
            phase_mode: PhaseMode::Interleaved,
            drr: DrrParams::default(),
            hdrr: HdrrParams::default(),
            htb: HtbParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Hls(#[from] HlsError),
    #[error(transparent)]
    Alt(#[from] crate::alt::AltError),
}

/// Builds the configured scheduler for a hierarchy. `lmax` is indexed by
/// class id; entries of non-leaf classes are ignored. `capacity_bps` is only
/// used by HTB.
pub fn build_scheduler(
    cfg: &SchedulerConfig,
    h: &Hierarchy,
    lmax: &[u32],
    capacity_bps: u64,
) -> Result<Box<dyn Scheduler + Send>, BuildError> {
    Ok(match cfg.kind {
        SchedulerKind::Hls => Box::new(Hls::new(h.clone(), lmax, cfg.phase_mode)?),
        SchedulerKind::Drr => Box::new(Drr::new(h, lmax, &cfg.drr)?),
        SchedulerKind::Hdrr => Box::new(Hdrr::new(h.clone(), lmax, &cfg.hdrr)?),
        SchedulerKind::Htb => Box::new(HtbLite::new(h.clone(), lmax, capacity_bps, &cfg.htb)?),
    })
}
