use alloc::vec::Vec;

use crate::hierarchy::ClassId;
use crate::sched::{Nanos, RoundKind, StateDigest};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Arrival {
        t: Nanos,
        leaf: ClassId,
        size: u32,
        seq: u64,
    },
    TxStart {
        t: Nanos,
        leaf: ClassId,
        size: u32,
        seq: u64,
    },
    TxEnd {
        t: Nanos,
        leaf: ClassId,
        size: u32,
        seq: u64,
    },
    VisitStart {
        t: Nanos,
        leaf: ClassId,
        round: u64,
    },
    VisitEnd {
        t: Nanos,
        leaf: ClassId,
        round: u64,
        backlogged: bool,
    },
    RoundStart {
        t: Nanos,
        kind: RoundKind,
        round: u64,
    },
    Snapshot {
        t: Nanos,
        digest: StateDigest,
    },
    /// The scheduler's view of a leaf turning backlogged or idle.
    BacklogChange {
        t: Nanos,
        class: ClassId,
        backlogged: bool,
    },
}

impl TraceEvent {
    pub fn time(&self) -> Nanos {
        match *self {
            TraceEvent::Arrival { t, .. }
            | TraceEvent::TxStart { t, .. }
            | TraceEvent::TxEnd { t, .. }
            | TraceEvent::VisitStart { t, .. }
            | TraceEvent::VisitEnd { t, .. }
            | TraceEvent::RoundStart { t, .. }
            | TraceEvent::Snapshot { t, .. }
            | TraceEvent::BacklogChange { t, .. } => t,
        }
    }
}

/// Consumer of simulation events.
pub trait TraceSink {
    fn record(&mut self, ev: &TraceEvent);

    /// Sinks that ignore visit, round and backlog events can return `false`
    /// to spare the scheduler from producing them.
    fn wants_marks(&self) -> bool {
        true
    }
}

impl<T: TraceSink + ?Sized> TraceSink for &mut T {
    fn record(&mut self, ev: &TraceEvent) {
        (**self).record(ev)
    }

    fn wants_marks(&self) -> bool {
        (**self).wants_marks()
    }
}

/// Every event in order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// `(leaf, size, seq)` of every transmission in order.
    pub fn transmissions(&self) -> Vec<(ClassId, u32, u64)> {
        self.events
            .iter()
            .filter_map(|e| match *e {
                TraceEvent::TxStart {
                    leaf, size, seq, ..
                } => Some((leaf, size, seq)),
                _ => None,
            })
            .collect()
    }

    /// Replays the events into another sink.
    pub fn replay(&self, sink: &mut dyn TraceSink) {
        for e in &self.events {
            sink.record(e);
        }
    }
}

impl TraceSink for Trace {
    fn record(&mut self, ev: &TraceEvent) {
        self.events.push(ev.clone());
    }
}

/// Forwards every event to two sinks.
pub struct Tee<A, B>(pub A, pub B);

impl<A: TraceSink, B: TraceSink> TraceSink for Tee<A, B> {
    fn record(&mut self, ev: &TraceEvent) {
        self.0.record(ev);
        self.1.record(ev);
    }

    fn wants_marks(&self) -> bool {
        self.0.wants_marks() || self.1.wants_marks()
    }
}
