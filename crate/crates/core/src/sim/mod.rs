//! Discrete-event simulation of one output link.
//!
//! Sources feed leaf FIFOs inside a [`Scheduler`]; whenever the link is idle
//! the scheduler picks the next packet, which occupies the link for
//! `size * 8 / C` seconds. Saturated and on/off sources are fed lazily: while
//! "on" their leaf always holds at least two packets, so the scheduler never
//! sees a leaf run dry by accident. Rate sources emit periodic arrivals with a
//! seeded random phase.
//!
//! Events that share a timestamp are processed in a fixed order: the end of
//! the current transmission, source on/off transitions, arrivals, snapshots,
//! and finally a dequeue if the link is idle.

mod random;
mod trace;

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub use random::ScenarioGen;
pub use trace::{Tee, Trace, TraceEvent, TraceSink};

use crate::hierarchy::{ClassId, Hierarchy};
use crate::hls::{Hls, PhaseMode, DEFAULT_LMAX};
use crate::sched::{
    build_scheduler, BuildError, Mark, Nanos, Packet, Scheduler, SchedulerConfig, SchedulerKind,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceMode {
    /// Always backlogged.
    Saturated,
    /// Backlogged during the listed `[start, end)` intervals.
    OnOff(Vec<(Nanos, Nanos)>),
    /// Periodic arrivals at this many bits per second.
    Rate(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketSize {
    Fixed(u32),
    /// Drawn uniformly from `min..=max` with the scenario's seeded generator.
    Uniform {
        min: u32,
        max: u32,
    },
}

impl PacketSize {
    pub fn min(self) -> u32 {
        match self {
            PacketSize::Fixed(s) => s,
            PacketSize::Uniform { min, .. } => min,
        }
    }

    pub fn max(self) -> u32 {
        match self {
            PacketSize::Fixed(s) => s,
            PacketSize::Uniform { max, .. } => max,
        }
    }

    fn mean(self) -> u32 {
        ((self.min() as u64 + self.max() as u64) / 2) as u32
    }

    fn draw(self, rng: &mut ChaCha8Rng) -> u32 {
        match self {
            PacketSize::Fixed(s) => s,
            PacketSize::Uniform { min, max } => {
                min + (rng.next_u64() % (max - min + 1) as u64) as u32
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Source {
    pub leaf: ClassId,
    pub size: PacketSize,
    pub mode: SourceMode,
}

impl Source {
    pub fn saturated(leaf: ClassId, packet_size: u32) -> Self {
        Source {
            leaf,
            size: PacketSize::Fixed(packet_size),
            mode: SourceMode::Saturated,
        }
    }

    pub fn on_off(leaf: ClassId, packet_size: u32, on: Vec<(Nanos, Nanos)>) -> Self {
        Source {
            leaf,
            size: PacketSize::Fixed(packet_size),
            mode: SourceMode::OnOff(on),
        }
    }

    pub fn rate(leaf: ClassId, packet_size: u32, bps: u64) -> Self {
        Source {
            leaf,
            size: PacketSize::Fixed(packet_size),
            mode: SourceMode::Rate(bps),
        }
    }

    /// Whether the source is backlogged at `t`; rate sources count as on.
    pub fn is_on(&self, t: Nanos) -> bool {
        match &self.mode {
            SourceMode::Saturated | SourceMode::Rate(_) => true,
            SourceMode::OnOff(iv) => iv.iter().any(|&(s, e)| s <= t && t < e),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub hierarchy: Hierarchy,
    pub capacity_bps: u64,
    /// Indexed by class id; empty means the default everywhere.
    pub lmax: Vec<u32>,
    pub sources: Vec<Source>,
    pub scheduler: SchedulerConfig,
    pub duration: Nanos,
    pub snapshot_period: Option<Nanos>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(hierarchy: Hierarchy, capacity_bps: u64, duration: Nanos) -> Self {
        Scenario {
            hierarchy,
            capacity_bps,
            lmax: Vec::new(),
            sources: Vec::new(),
            scheduler: SchedulerConfig::new(SchedulerKind::Hls),
            duration,
            snapshot_period: None,
            seed: 0,
        }
    }

    pub fn lmax_of(&self, leaf: ClassId) -> u32 {
        self.lmax.get(leaf.index()).copied().unwrap_or(DEFAULT_LMAX)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let h = &self.hierarchy;
        if self.capacity_bps == 0 {
            return Err(SimError::ZeroCapacity);
        }
        let mut seen = vec![false; h.len()];
        for src in &self.sources {
            let leaf = src.leaf;
            if !h.contains(leaf) || !h.is_leaf(leaf) {
                return Err(SimError::NotALeaf(leaf));
            }
            if core::mem::replace(&mut seen[leaf.index()], true) {
                return Err(SimError::DuplicateSource(leaf));
            }
            if src.size.min() == 0
                || src.size.min() > src.size.max()
                || src.size.max() > self.lmax_of(leaf)
            {
                return Err(SimError::PacketSize {
                    leaf,
                    size: src.size.max(),
                    lmax: self.lmax_of(leaf),
                });
            }
            match &src.mode {
                SourceMode::Saturated => {}
                SourceMode::Rate(r) => {
                    if *r == 0 {
                        return Err(SimError::InvalidSchedule {
                            leaf,
                            reason: "rate must be positive",
                        });
                    }
                }
                SourceMode::OnOff(iv) => {
                    let mut prev_end = Nanos::ZERO;
                    for (k, &(s, e)) in iv.iter().enumerate() {
                        if s >= e {
                            return Err(SimError::InvalidSchedule {
                                leaf,
                                reason: "on-interval must start before it ends",
                            });
                        }
                        if k > 0 && s < prev_end {
                            return Err(SimError::InvalidSchedule {
                                leaf,
                                reason: "on-intervals must be sorted and disjoint",
                            });
                        }
                        if e > self.duration {
                            return Err(SimError::InvalidSchedule {
                                leaf,
                                reason: "on-interval extends past the end of the run",
                            });
                        }
                        prev_end = e;
                    }
                }
            }
        }
        if self.snapshot_period == Some(Nanos::ZERO) {
            return Err(SimError::ZeroSnapshotPeriod);
        }
        Ok(())
    }

    /// Times at which some source switches on or off, sorted and deduplicated,
    /// including 0 and the end of the run.
    pub fn breakpoints(&self) -> Vec<Nanos> {
        let mut t = vec![Nanos::ZERO, self.duration];
        for src in &self.sources {
            if let SourceMode::OnOff(iv) = &src.mode {
                for &(s, e) in iv {
                    t.push(s);
                    t.push(e);
                }
            }
        }
        t.retain(|&x| x <= self.duration);
        t.sort();
        t.dedup();
        t
    }

    /// Lmax of every class id, with defaults filled in.
    pub fn full_lmax(&self) -> Vec<u32> {
        if self.lmax.is_empty() {
            vec![DEFAULT_LMAX; self.hierarchy.len()]
        } else {
            self.lmax.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid schedule for source of {leaf}: {reason}")]
    InvalidSchedule { leaf: ClassId, reason: &'static str },
    #[error("sources must attach to leaf classes, {0} is not one")]
    NotALeaf(ClassId),
    #[error("class {0} has more than one source")]
    DuplicateSource(ClassId),
    #[error("packets of up to {size} bytes do not fit the maximum {lmax} of {leaf}")]
    PacketSize { leaf: ClassId, size: u32, lmax: u32 },
    #[error("link capacity must be positive")]
    ZeroCapacity,
    #[error("snapshot period must be positive")]
    ZeroSnapshotPeriod,
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Totals of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub packets: u64,
    /// Bytes that started transmission, per class id (leaves only).
    pub bytes: Vec<u64>,
    pub end: Nanos,
}

/// Serialization time of `size` bytes on a link of `capacity_bps`.
pub fn serialization(size: u32, capacity_bps: u64) -> Nanos {
    let bits = size as u128 * 8 * 1_000_000_000;
    let c = capacity_bps as u128;
    Nanos((((bits + c / 2) / c) as u64).max(1))
}

pub fn run(sc: &Scenario) -> Result<Trace, SimError> {
    let mut trace = Trace::default();
    run_with(sc, &mut trace)?;
    Ok(trace)
}

pub fn run_with(sc: &Scenario, sink: &mut dyn TraceSink) -> Result<RunSummary, SimError> {
    sc.validate()?;
    let mut sched = build_scheduler(
        &sc.scheduler,
        &sc.hierarchy,
        &sc.full_lmax(),
        sc.capacity_bps,
    )?;
    Ok(drive(sc, sched.as_mut(), sink))
}

/// Runs the scenario with a caller-provided scheduler, which stays available
/// for inspection afterwards. The scenario's scheduler selection is ignored.
pub fn run_with_scheduler(
    sc: &Scenario,
    sched: &mut dyn Scheduler,
    sink: &mut dyn TraceSink,
) -> Result<RunSummary, SimError> {
    sc.validate()?;
    Ok(drive(sc, sched, sink))
}

/// Runs the scenario under HLS twice, replenishing lazily per visit and
/// up front per round.
pub fn run_pair(sc: &Scenario) -> Result<(Trace, Trace), SimError> {
    sc.validate()?;
    let mut out = [Trace::default(), Trace::default()];
    for (k, mode) in [PhaseMode::Interleaved, PhaseMode::PhaseSeparated]
        .into_iter()
        .enumerate()
    {
        let mut s =
            Hls::new(sc.hierarchy.clone(), &sc.full_lmax(), mode).map_err(BuildError::from)?;
        drive(sc, &mut s, &mut out[k]);
    }
    let [a, b] = out;
    Ok((a, b))
}

struct SourceState {
    on: bool,
    queued: u32,
    /// Next on/off boundary index into the interval list (two per interval).
    boundary: usize,
    next_arrival: Option<Nanos>,
    period: Nanos,
}

const FEED_DEPTH: u32 = 2;

struct Engine<'a> {
    rng: ChaCha8Rng,
    sink: &'a mut dyn TraceSink,
    marks: Vec<Mark>,
    deferred: Vec<Mark>,
    want_marks: bool,
    seq: u64,
    summary: RunSummary,
}

impl Engine<'_> {
    fn enqueue(&mut self, sched: &mut dyn Scheduler, leaf: ClassId, size: PacketSize, now: Nanos) {
        let size = size.draw(&mut self.rng);
        let pkt = Packet {
            leaf,
            size,
            seq: self.seq,
            arrival: now,
        };
        self.seq += 1;
        self.sink.record(&TraceEvent::Arrival {
            t: now,
            leaf,
            size,
            seq: pkt.seq,
        });
        sched
            .enqueue(pkt, now)
            .expect("sources are validated against the hierarchy");
        self.flush_marks(sched, now, None);
    }

    /// Emits scheduler marks. When `sent` names the leaf that just got a
    /// packet, its closing marks are held back until after the transmission.
    fn flush_marks(&mut self, sched: &mut dyn Scheduler, now: Nanos, sent: Option<ClassId>) {
        if !self.want_marks {
            return;
        }
        sched.drain_marks(&mut self.marks);
        for m in self.marks.drain(..) {
            let closing = match m {
                Mark::Backlog {
                    leaf,
                    backlogged: false,
                }
                | Mark::VisitEnd {
                    leaf,
                    backlogged: false,
                    ..
                } => Some(leaf) == sent,
                _ => false,
            };
            if closing {
                self.deferred.push(m);
            } else {
                self.sink.record(&TraceEvent::from_mark(m, now));
            }
        }
    }

    fn flush_deferred(&mut self, now: Nanos) {
        for m in self.deferred.drain(..) {
            self.sink.record(&TraceEvent::from_mark(m, now));
        }
    }
}

fn drive(sc: &Scenario, sched: &mut dyn Scheduler, sink: &mut dyn TraceSink) -> RunSummary {
    let h = &sc.hierarchy;
    let want_marks = sink.wants_marks();
    sched.record_marks(want_marks);
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut sources = sc.sources.clone();
    sources.sort_by_key(|s| s.leaf);
    let mut states: Vec<SourceState> = sources
        .iter()
        .map(|src| {
            let (on, next_arrival, period) = match &src.mode {
                SourceMode::Saturated => (true, None, Nanos::ZERO),
                SourceMode::OnOff(_) => (false, None, Nanos::ZERO),
                SourceMode::Rate(r) => {
                    let period = serialization(src.size.mean(), *r).max(Nanos(1));
                    let phase = Nanos(rng.next_u64() % period.0);
                    (true, Some(phase), period)
                }
            };
            SourceState {
                on,
                queued: 0,
                boundary: 0,
                next_arrival,
                period,
            }
        })
        .collect();

    let mut eng = Engine {
        rng,
        sink,
        marks: Vec::new(),
        deferred: Vec::new(),
        want_marks,
        seq: 0,
        summary: RunSummary {
            packets: 0,
            bytes: vec![0; h.len()],
            end: sc.duration,
        },
    };
    let mut now = Nanos::ZERO;
    let mut in_flight: Option<(Nanos, Packet)> = None;
    let mut next_snapshot = sc.snapshot_period.map(|_| Nanos::ZERO);
    let mut wakeup: Option<Nanos> = None;
    let mut backlog: u64 = 0;

    while now < sc.duration {
        if let Some((end, pkt)) = in_flight.take_if(|(end, _)| *end <= now) {
            eng.sink.record(&TraceEvent::TxEnd {
                t: end,
                leaf: pkt.leaf,
                size: pkt.size,
                seq: pkt.seq,
            });
        }

        for (k, src) in sources.iter().enumerate() {
            if let SourceMode::OnOff(iv) = &src.mode {
                let st = &mut states[k];
                while st.boundary < 2 * iv.len() {
                    let (s, e) = iv[st.boundary / 2];
                    let at = if st.boundary % 2 == 0 { s } else { e };
                    if at > now {
                        break;
                    }
                    st.on = st.boundary % 2 == 0;
                    st.boundary += 1;
                }
            }
        }

        for (k, src) in sources.iter().enumerate() {
            match src.mode {
                SourceMode::Rate(_) => {
                    while let Some(t) = states[k].next_arrival.filter(|&t| t <= now) {
                        eng.enqueue(sched, src.leaf, src.size, now);
                        backlog += 1;
                        states[k].next_arrival = Some(t + states[k].period);
                    }
                }
                _ => {
                    while states[k].on && states[k].queued < FEED_DEPTH {
                        eng.enqueue(sched, src.leaf, src.size, now);
                        states[k].queued += 1;
                        backlog += 1;
                    }
                }
            }
        }

        if let (Some(t), Some(p)) = (next_snapshot, sc.snapshot_period) {
            if t <= now {
                if let Some(d) = sched.snapshot() {
                    eng.sink.record(&TraceEvent::Snapshot { t: now, digest: d });
                }
                next_snapshot = Some(now + p);
            }
        }

        wakeup = wakeup.filter(|&w| w > now);
        if in_flight.is_none() && backlog > 0 {
            match sched.dequeue(now) {
                Some(pkt) => {
                    eng.flush_marks(sched, now, Some(pkt.leaf));
                    let end = now + serialization(pkt.size, sc.capacity_bps);
                    eng.sink.record(&TraceEvent::TxStart {
                        t: now,
                        leaf: pkt.leaf,
                        size: pkt.size,
                        seq: pkt.seq,
                    });
                    eng.flush_deferred(now);
                    backlog -= 1;
                    eng.summary.packets += 1;
                    eng.summary.bytes[pkt.leaf.index()] += pkt.size as u64;
                    if let Some(k) = sources.iter().position(|s| s.leaf == pkt.leaf) {
                        let st = &mut states[k];
                        if !matches!(sources[k].mode, SourceMode::Rate(_)) {
                            st.queued -= 1;
                            // top up at once so the leaf never looks empty
                            while st.on && st.queued < FEED_DEPTH {
                                eng.enqueue(sched, pkt.leaf, sources[k].size, now);
                                st.queued += 1;
                                backlog += 1;
                            }
                        }
                    }
                    in_flight = Some((end, pkt));
                }
                None => {
                    eng.flush_marks(sched, now, None);
                    wakeup = sched.wakeup_hint(now);
                }
            }
        }

        let mut next = sc.duration;
        if let Some((end, _)) = &in_flight {
            next = next.min(*end);
        }
        for (k, src) in sources.iter().enumerate() {
            let st = &states[k];
            if let SourceMode::OnOff(iv) = &src.mode {
                if st.boundary < 2 * iv.len() {
                    let (s, e) = iv[st.boundary / 2];
                    next = next.min(if st.boundary % 2 == 0 { s } else { e });
                }
            }
            if let Some(t) = st.next_arrival {
                next = next.min(t);
            }
        }
        if let Some(t) = next_snapshot {
            next = next.min(t);
        }
        if in_flight.is_none() {
            if let Some(w) = wakeup {
                next = next.min(w);
            }
        }
        debug_assert!(next > now, "simulation time must advance");
        now = next;
    }
    eng.summary
}

impl TraceEvent {
    fn from_mark(m: Mark, t: Nanos) -> TraceEvent {
        match m {
            Mark::RoundStart { kind, round } => TraceEvent::RoundStart { t, kind, round },
            Mark::VisitStart { leaf, round } => TraceEvent::VisitStart { t, leaf, round },
            Mark::VisitEnd {
                leaf,
                round,
                backlogged,
            } => TraceEvent::VisitEnd {
                t,
                leaf,
                round,
                backlogged,
            },
            Mark::Backlog { leaf, backlogged } => TraceEvent::BacklogChange {
                t,
                class: leaf,
                backlogged,
            },
        }
    }
}

/// A boxed scheduler for the scenario, for callers that want to drive it
/// themselves.
pub fn scheduler_for(sc: &Scenario) -> Result<Box<dyn Scheduler + Send>, SimError> {
    Ok(build_scheduler(
        &sc.scheduler,
        &sc.hierarchy,
        &sc.full_lmax(),
        sc.capacity_bps,
    )?)
}
