use alloc::vec;
use alloc::vec::Vec;

use crate::fairshare::{hmm_fair, Allocation, FairShareError, Request, RequestMap};
use crate::hierarchy::{ClassId, Hierarchy};
use crate::rational::{int, ratio, Rational};
use crate::sched::Nanos;
use crate::sim::{Scenario, SourceMode, Trace, TraceEvent, TraceSink};

/// Worst observed fairness deviation of one sibling pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairAlpha {
    pub i: ClassId,
    pub j: ClassId,
    /// `sup |D_i/w_i - D_j/w_j|` over all intervals in which both were
    /// backlogged, in bytes.
    pub alpha: Rational,
}

struct PairState {
    i: ClassId,
    j: ClassId,
    wi: i128,
    wj: i128,
    live: bool,
    // running D_i * w_j - D_j * w_i since the common backlog began
    x: i128,
    lo: i128,
    hi: i128,
    worst: i128,
}

impl PairState {
    fn close(&mut self) {
        if self.live {
            self.worst = self.worst.max(self.hi - self.lo);
            self.live = false;
        }
    }
}

/// Streams the fairness measure over sibling pairs.
///
/// A leaf is backlogged according to the scheduler's own marks; an internal
/// class is backlogged while any of its leaves is. Bytes count when their
/// transmission starts, which is when the scheduler charges them.
pub struct AlphaMeter<'h> {
    h: &'h Hierarchy,
    pairs: Vec<PairState>,
    /// Pair indices per class.
    by_class: Vec<Vec<usize>>,
    busy_leaves: Vec<u32>,
}

impl<'h> AlphaMeter<'h> {
    pub fn new(h: &'h Hierarchy) -> Self {
        let mut pairs = Vec::new();
        let mut by_class = vec![Vec::new(); h.len()];
        for &id in h.preorder() {
            let c = h.children_of(id);
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    by_class[c[a].index()].push(pairs.len());
                    by_class[c[b].index()].push(pairs.len());
                    pairs.push(PairState {
                        i: c[a],
                        j: c[b],
                        wi: h.weight(c[a]) as i128,
                        wj: h.weight(c[b]) as i128,
                        live: false,
                        x: 0,
                        lo: 0,
                        hi: 0,
                        worst: 0,
                    });
                }
            }
        }
        AlphaMeter {
            h,
            pairs,
            by_class,
            busy_leaves: vec![0; h.len()],
        }
    }

    fn backlogged(&self, id: ClassId) -> bool {
        self.busy_leaves[id.index()] > 0
    }

    fn set_backlog(&mut self, leaf: ClassId, on: bool) {
        let was = self.backlogged(leaf);
        if was == on {
            return;
        }
        let mut chain = vec![leaf];
        chain.extend(self.h.ancestors_of(leaf).filter(|&a| a != ClassId::ROOT));
        for &c in &chain {
            let before = self.backlogged(c);
            if on {
                self.busy_leaves[c.index()] += 1;
            } else {
                self.busy_leaves[c.index()] -= 1;
            }
            if before == self.backlogged(c) {
                continue;
            }
            for k in 0..self.by_class[c.index()].len() {
                let p = self.by_class[c.index()][k];
                let both = self.backlogged(self.pairs[p].i) && self.backlogged(self.pairs[p].j);
                let st = &mut self.pairs[p];
                if both && !st.live {
                    st.live = true;
                    st.x = 0;
                    st.lo = 0;
                    st.hi = 0;
                } else if !both {
                    st.close();
                }
            }
        }
    }

    fn sent(&mut self, leaf: ClassId, size: u32) {
        let mut cur = Some(leaf);
        while let Some(c) = cur {
            if c == ClassId::ROOT {
                break;
            }
            for &p in &self.by_class[c.index()] {
                let st = &mut self.pairs[p];
                if !st.live {
                    continue;
                }
                if st.i == c {
                    st.x += size as i128 * st.wj;
                } else {
                    st.x -= size as i128 * st.wi;
                }
                st.lo = st.lo.min(st.x);
                st.hi = st.hi.max(st.x);
            }
            cur = self.h.parent_of(c);
        }
    }

    pub fn finish(mut self) -> Vec<PairAlpha> {
        self.pairs
            .iter_mut()
            .map(|st| {
                st.close();
                PairAlpha {
                    i: st.i,
                    j: st.j,
                    alpha: ratio(st.worst, st.wi * st.wj),
                }
            })
            .collect()
    }
}

impl TraceSink for AlphaMeter<'_> {
    fn record(&mut self, ev: &TraceEvent) {
        match *ev {
            TraceEvent::BacklogChange {
                class, backlogged, ..
            } => self.set_backlog(class, backlogged),
            TraceEvent::TxStart { leaf, size, .. } => self.sent(leaf, size),
            _ => {}
        }
    }
}

pub fn empirical_alpha(trace: &Trace, h: &Hierarchy) -> Vec<PairAlpha> {
    let mut m = AlphaMeter::new(h);
    trace.replay(&mut m);
    m.finish()
}

/// Streams the longest wait of each leaf between leaving a visit still
/// backlogged and its next visit.
pub struct GapMeter {
    pending: Vec<Option<Nanos>>,
    worst: Vec<Nanos>,
}

impl GapMeter {
    pub fn new(classes: usize) -> Self {
        GapMeter {
            pending: vec![None; classes],
            worst: vec![Nanos::ZERO; classes],
        }
    }

    /// Worst gap per class id.
    pub fn finish(self) -> Vec<Nanos> {
        self.worst
    }
}

impl TraceSink for GapMeter {
    fn record(&mut self, ev: &TraceEvent) {
        match *ev {
            TraceEvent::VisitEnd {
                t,
                leaf,
                backlogged,
                ..
            } => self.pending[leaf.index()] = backlogged.then_some(t),
            TraceEvent::VisitStart { t, leaf, .. } => {
                if let Some(s) = self.pending[leaf.index()].take() {
                    let w = &mut self.worst[leaf.index()];
                    *w = (*w).max(t - s);
                }
            }
            TraceEvent::BacklogChange {
                class,
                backlogged: false,
                ..
            } => self.pending[class.index()] = None,
            _ => {}
        }
    }
}

pub fn empirical_gap(trace: &Trace, classes: usize) -> Vec<Nanos> {
    let mut m = GapMeter::new(classes);
    trace.replay(&mut m);
    m.finish()
}

/// Rates over jumping windows, per class and for the whole link.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSeries {
    pub window: Nanos,
    /// Start time of each window.
    pub starts: Vec<Nanos>,
    /// `rates[class id][window]` in bit/s; internal classes aggregate their
    /// leaves.
    pub rates: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

impl RateSeries {
    /// Mean rate of a class over the windows lying entirely inside
    /// `[from, to)`.
    pub fn mean(&self, id: ClassId, from: Nanos, to: Nanos) -> Option<f64> {
        let vals: Vec<f64> = self
            .starts
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= from && s + self.window <= to)
            .map(|(k, _)| self.rates[id.index()][k])
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Streams bytes into jumping windows, attributing each packet to the window
/// in which its transmission completes.
pub struct RateMeter<'h> {
    h: &'h Hierarchy,
    window: Nanos,
    bytes: Vec<Vec<u64>>,
}

impl<'h> RateMeter<'h> {
    pub fn new(h: &'h Hierarchy, window: Nanos) -> Self {
        assert!(window > Nanos::ZERO, "window must be positive");
        RateMeter {
            h,
            window,
            bytes: vec![Vec::new(); h.len()],
        }
    }

    /// Closes the series at `end`; a trailing partial window is dropped.
    pub fn finish(self, end: Nanos) -> RateSeries {
        let n = (end.0 / self.window.0) as usize;
        let secs = self.window.as_secs_f64();
        let mut rates = vec![vec![0.0; n]; self.h.len()];
        let mut raw = vec![vec![0u64; n]; self.h.len()];
        for &l in self.h.leaves() {
            for (k, &b) in self.bytes[l.index()].iter().enumerate().take(n) {
                raw[l.index()][k] += b;
                for a in self.h.ancestors_of(l) {
                    raw[a.index()][k] += b;
                }
            }
        }
        for id in self.h.ids() {
            for k in 0..n {
                rates[id.index()][k] = raw[id.index()][k] as f64 * 8.0 / secs;
            }
        }
        let total = rates[0].clone();
        RateSeries {
            window: self.window,
            starts: (0..n as u64).map(|k| Nanos(k * self.window.0)).collect(),
            rates,
            total,
        }
    }
}

impl TraceSink for RateMeter<'_> {
    fn record(&mut self, ev: &TraceEvent) {
        if let TraceEvent::TxEnd { t, leaf, size, .. } = *ev {
            let k = (t.0 / self.window.0) as usize;
            let v = &mut self.bytes[leaf.index()];
            if v.len() <= k {
                v.resize(k + 1, 0);
            }
            v[k] += size as u64;
        }
    }

    fn wants_marks(&self) -> bool {
        false
    }
}

pub fn windowed_rates(trace: &Trace, h: &Hierarchy, window: Nanos, end: Nanos) -> RateSeries {
    let mut m = RateMeter::new(h, window);
    trace.replay(&mut m);
    m.finish(end)
}

/// Streams periods in which the link sat idle while some leaf FIFO held a
/// packet.
#[derive(Default)]
pub struct WorkConservationMeter {
    busy: bool,
    queued: u64,
    since: Option<Nanos>,
    violations: Vec<(Nanos, Nanos)>,
}

impl WorkConservationMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn finish(self) -> Vec<(Nanos, Nanos)> {
        self.violations
    }
}

impl TraceSink for WorkConservationMeter {
    fn record(&mut self, ev: &TraceEvent) {
        let t = ev.time();
        if let Some(s) = self.since {
            if t > s {
                match self.violations.last_mut() {
                    Some(last) if last.1 == s => last.1 = t,
                    _ => self.violations.push((s, t)),
                }
                self.since = Some(t);
            }
        }
        match ev {
            TraceEvent::Arrival { .. } => self.queued += 1,
            TraceEvent::TxStart { .. } => {
                self.queued -= 1;
                self.busy = true;
            }
            TraceEvent::TxEnd { .. } => self.busy = false,
            _ => {}
        }
        self.since = (!self.busy && self.queued > 0).then_some(t);
    }

    fn wants_marks(&self) -> bool {
        false
    }
}

pub fn idle_while_backlogged(trace: &Trace) -> Vec<(Nanos, Nanos)> {
    let mut m = WorkConservationMeter::new();
    trace.replay(&mut m);
    m.finish()
}

/// The fluid allocation over a stretch of time with a fixed set of sources.
#[derive(Clone, Debug)]
pub struct Segment {
    pub start: Nanos,
    pub end: Nanos,
    pub allocation: Allocation,
}

/// Hierarchical max-min allocation for every stretch of the scenario during
/// which no source switches on or off. Backlogged sources request infinite
/// rate; rate sources request their rate.
pub fn ideal_timeline(sc: &Scenario) -> Result<Vec<Segment>, FairShareError> {
    let h = &sc.hierarchy;
    let cap = int(sc.capacity_bps);
    let bp = sc.breakpoints();
    let mut out = Vec::new();
    for w in bp.windows(2) {
        let (start, end) = (w[0], w[1]);
        let mut req = RequestMap::idle(h);
        for src in &sc.sources {
            let r = match src.mode {
                SourceMode::Rate(bps) => Request::Finite(int(bps)),
                _ if src.is_on(start) => Request::Infinite,
                _ => continue,
            };
            req.set(src.leaf, r);
        }
        out.push(Segment {
            start,
            end,
            allocation: hmm_fair(h, &req, &cap)?,
        });
    }
    Ok(out)
}
