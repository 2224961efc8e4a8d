//! HLS: a round-robin hierarchical link-sharing scheduler.
//!
//! Every class holds a byte balance. Each round visits the active leaves in
//! ascending id order. Before a leaf transmits, its quota `w_i * F_parent` is
//! moved from the parent's balance into its own, where the parent's fair
//! quota `F = floor(B / w_ac)` is computed once per round from the weights of
//! its active children. Replenishment is lazy and top-down: the first leaf
//! visited below an internal class triggers that class's own update.
//!
//! Transmitted bytes flow back into the root balance. A leaf that empties
//! during its visit returns its balance to its parent's residual; an internal
//! class whose children are all idle returns balance plus residual upward.
//! Residuals are folded into balances only at the next round, and while some
//! active internal class holds at least `w_ac` bytes in balance plus residual
//! the next round is a surplus round, in which the root hands out nothing new.
//!
//! The total `sum(B) + sum(R)` equals the round size `Q*`, which tracks the
//! active set: `Q* = sum(w over active non-root classes) + sum(Lmax over
//! active leaves)`. Activations (at round starts) add to the root residual,
//! idle transitions subtract from it, so the root may run negative.
//!
//! All quota arithmetic is integer bytes; weights are read as bytes.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::hierarchy::{ClassId, ClassKind, Hierarchy};
use crate::sched::{EnqueueError, Mark, Nanos, Packet, RoundKind, Scheduler, StateDigest};

pub const DEFAULT_LMAX: u32 = 1500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum PhaseMode {
    /// Replenish each leaf (and, lazily, its ancestors) when it is visited.
    #[default]
    Interleaved,
    /// Replenish every active class at the start of the round, then transmit.
    PhaseSeparated,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HlsError {
    #[error("hierarchy has no leaf classes")]
    NoLeafClasses,
    #[error("maximum packet size of leaf {0} must be at least 1 byte")]
    InvalidLmax(ClassId),
    #[error("expected {expected} Lmax entries, got {got}")]
    LmaxLength { expected: usize, got: usize },
}

/// A broken scheduler invariant, recorded when self-checking is enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Conservation {
        round: u64,
        total: i64,
        q_star: i64,
    },
    QStarDrift {
        round: u64,
        tracked: i64,
        recomputed: i64,
    },
    Negative {
        round: u64,
        class: ClassId,
        balance: i64,
        residual: i64,
    },
    LeafResidue {
        round: u64,
        leaf: ClassId,
        balance: i64,
        lmax: u32,
    },
    InternalRemainder {
        round: u64,
        class: ClassId,
        balance: i64,
        active_weight: u64,
    },
    MainRoundResidual {
        round: u64,
        class: ClassId,
        total: i64,
        active_weight: u64,
    },
    InactiveNonZero {
        round: u64,
        class: ClassId,
    },
    TooManyUpdates {
        round: u64,
        class: ClassId,
        updates: u32,
    },
    /// A child of the root holds more aggregate balance than it did right
    /// after the last main-round replenishment (phase-separated mode only).
    AggregateAbovePeak {
        round: u64,
        class: ClassId,
        aggregate: i64,
        peak: i64,
    },
}

#[derive(Clone, Debug, Default)]
struct ClassState {
    balance: i64,
    residual: i64,
    fair_quota: i64,
    active: bool,
    replenished: bool,
    active_weight: u64,
    round_start_weight: u64,
    updates: u32,
    granted: i64,
    sent: u64,
}

/// Public view of one class's counters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassSnapshot {
    pub balance: i64,
    pub residual: i64,
    pub fair_quota: i64,
    pub active: bool,
    /// Sum of all quotas `w_i * F_parent` this class has received.
    pub granted: i64,
    /// Bytes transmitted by this class or its leaf descendants.
    pub sent: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub total: i64,
    pub q_star: i64,
    pub round: u64,
    pub round_kind: RoundKind,
    pub classes: Vec<ClassSnapshot>,
}

#[derive(Clone, Debug)]
pub struct Hls {
    h: Hierarchy,
    lmax: Vec<u32>,
    st: Vec<ClassState>,
    queues: Vec<VecDeque<Packet>>,
    backlog: usize,
    q_star: i64,
    round_kind: RoundKind,
    round: u64,
    order: Vec<ClassId>,
    cursor: usize,
    visiting: Option<ClassId>,
    mode: PhaseMode,
    marks: Option<Vec<Mark>>,
    checks: Option<Vec<Violation>>,
    peaks: Vec<Option<i64>>,
}

const MAX_RECORDED_VIOLATIONS: usize = 64;

impl Hls {
    /// `lmax` is indexed by class id; non-leaf entries are ignored. An empty
    /// slice selects [`DEFAULT_LMAX`] everywhere.
    pub fn new(h: Hierarchy, lmax: &[u32], mode: PhaseMode) -> Result<Self, HlsError> {
        if h.leaves().is_empty() {
            return Err(HlsError::NoLeafClasses);
        }
        let lmax = if lmax.is_empty() {
            vec![DEFAULT_LMAX; h.len()]
        } else if lmax.len() != h.len() {
            return Err(HlsError::LmaxLength {
                expected: h.len(),
                got: lmax.len(),
            });
        } else {
            lmax.to_vec()
        };
        for &l in h.leaves() {
            if lmax[l.index()] == 0 {
                return Err(HlsError::InvalidLmax(l));
            }
        }
        let n = h.len();
        Ok(Hls {
            lmax,
            st: vec![ClassState::default(); n],
            queues: vec![VecDeque::new(); n],
            backlog: 0,
            q_star: 0,
            round_kind: RoundKind::Main,
            round: 0,
            order: Vec::new(),
            cursor: 0,
            visiting: None,
            mode,
            marks: None,
            checks: None,
            peaks: vec![None; n],
            h,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.h
    }

    pub fn phase_mode(&self) -> PhaseMode {
        self.mode
    }

    pub fn lmax(&self, leaf: ClassId) -> u32 {
        self.lmax[leaf.index()]
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn round_kind(&self) -> RoundKind {
        self.round_kind
    }

    pub fn q_star(&self) -> i64 {
        self.q_star
    }

    pub fn queue_len(&self, leaf: ClassId) -> usize {
        self.queues[leaf.index()].len()
    }

    pub fn is_active(&self, id: ClassId) -> bool {
        self.st[id.index()].active
    }

    /// Records invariant violations after every state change from now on.
    pub fn enable_self_check(&mut self) {
        self.checks = Some(Vec::new());
        self.check("enable");
    }

    pub fn violations(&self) -> &[Violation] {
        self.checks.as_deref().unwrap_or(&[])
    }

    pub fn class(&self, id: ClassId) -> ClassSnapshot {
        let s = &self.st[id.index()];
        ClassSnapshot {
            balance: s.balance,
            residual: s.residual,
            fair_quota: s.fair_quota,
            active: s.active,
            granted: s.granted,
            sent: s.sent,
        }
    }

    /// Sum of balances and residuals over `id` and all its descendants.
    pub fn aggregate_balance(&self, id: ClassId) -> i64 {
        let mut total = self.st[id.index()].balance + self.st[id.index()].residual;
        let mut stack: Vec<ClassId> = self.h.children_of(id).to_vec();
        while let Some(c) = stack.pop() {
            total += self.st[c.index()].balance + self.st[c.index()].residual;
            stack.extend_from_slice(self.h.children_of(c));
        }
        total
    }

    pub fn snapshot_full(&self) -> Snapshot {
        Snapshot {
            total: self.total(),
            q_star: self.q_star,
            round: self.round,
            round_kind: self.round_kind,
            classes: self.h.ids().map(|id| self.class(id)).collect(),
        }
    }

    fn total(&self) -> i64 {
        self.st.iter().map(|s| s.balance + s.residual).sum()
    }

    fn mark(&mut self, m: Mark) {
        if let Some(marks) = self.marks.as_mut() {
            marks.push(m);
        }
    }

    /// Runs one quota update for `id`, first updating any ancestors that have
    /// not been replenished this round.
    pub fn replenish(&mut self, id: ClassId) {
        if self.st[id.index()].replenished || !self.st[id.index()].active && id != ClassId::ROOT {
            return;
        }
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.h.parent_of(cur) {
            if self.st[p.index()].replenished {
                break;
            }
            chain.push(p);
            cur = p;
        }
        for &c in chain.iter().rev() {
            self.replenish_one(c);
        }
        self.check("replenish");
    }

    fn replenish_one(&mut self, id: ClassId) {
        let i = id.index();
        match self.h.parent_of(id) {
            None => {
                let s = &mut self.st[i];
                s.balance += s.residual;
                s.residual = 0;
                s.fair_quota = match self.round_kind {
                    RoundKind::Main if s.active_weight > 0 => {
                        s.balance.div_euclid(s.active_weight as i64).max(0)
                    }
                    _ => 0,
                };
                s.updates += 1;
            }
            Some(p) => {
                let quota = self.h.weight(id) as i64 * self.st[p.index()].fair_quota;
                {
                    let ps = &mut self.st[p.index()];
                    ps.balance -= quota;
                    ps.updates += 1;
                }
                let internal = self.h.kind(id) == ClassKind::Internal;
                let s = &mut self.st[i];
                s.balance += quota + s.residual;
                s.residual = 0;
                s.granted += quota;
                s.updates += 1;
                if internal {
                    s.fair_quota = s.balance / s.active_weight as i64;
                }
            }
        }
        self.st[i].replenished = true;
    }

    /// Idle transition of `leaf` and of every ancestor left without active
    /// children.
    fn go_idle(&mut self, leaf: ClassId) {
        let l = leaf.index();
        let parent = self.h.parent_of(leaf).expect("leaf has a parent");
        let returned = self.st[l].balance;
        self.st[parent.index()].residual += returned;
        self.st[l].balance = 0;
        self.st[l].active = false;
        let delta = self.h.weight(leaf) as i64 + self.lmax[l] as i64;
        self.st[0].residual -= delta;
        self.q_star -= delta;
        self.mark(Mark::Backlog {
            leaf,
            backlogged: false,
        });

        let mut child = leaf;
        let mut p = parent;
        loop {
            let w = self.h.weight(child);
            self.st[p.index()].active_weight -= w;
            if p == ClassId::ROOT || self.st[p.index()].active_weight > 0 {
                break;
            }
            let pp = self.h.parent_of(p).expect("internal class has a parent");
            let s = &mut self.st[p.index()];
            let returned = s.balance + s.residual;
            s.balance = 0;
            s.residual = 0;
            s.active = false;
            self.st[pp.index()].residual += returned;
            let w_p = self.h.weight(p) as i64;
            self.st[0].residual -= w_p;
            self.q_star -= w_p;
            child = p;
            p = pp;
        }
        self.check("idle");
    }

    fn end_of_round(&mut self) {
        if self.checks.is_some() {
            let mut found = Vec::new();
            for &leaf in &self.order {
                let s = &self.st[leaf.index()];
                if s.active && (s.balance < 0 || s.balance >= self.lmax[leaf.index()] as i64) {
                    let v = Violation::LeafResidue {
                        round: self.round,
                        leaf,
                        balance: s.balance,
                        lmax: self.lmax[leaf.index()],
                    };
                    found.push(v);
                }
            }
            for id in self.h.ids().skip(1) {
                let s = &self.st[id.index()];
                if s.active
                    && self.h.kind(id) == ClassKind::Internal
                    && (s.balance < 0 || s.balance as u64 >= s.round_start_weight)
                {
                    let v = Violation::InternalRemainder {
                        round: self.round,
                        class: id,
                        balance: s.balance,
                        active_weight: s.round_start_weight,
                    };
                    found.push(v);
                }
            }
            for v in found {
                self.violation(v);
            }
        }
        let surplus = self.h.ids().skip(1).any(|id| {
            let s = &self.st[id.index()];
            s.active && s.active_weight > 0 && s.balance + s.residual >= s.active_weight as i64
        });
        self.start_round(if surplus {
            RoundKind::Surplus
        } else {
            RoundKind::Main
        });
    }

    fn start_round(&mut self, kind: RoundKind) {
        self.round += 1;
        self.round_kind = kind;

        for li in 0..self.h.leaves().len() {
            let leaf = self.h.leaves()[li];
            if self.st[leaf.index()].active || self.queues[leaf.index()].is_empty() {
                continue;
            }
            let delta = self.h.weight(leaf) as i64 + self.lmax[leaf.index()] as i64;
            self.st[leaf.index()].active = true;
            self.st[0].residual += delta;
            self.q_star += delta;
            self.mark(Mark::Backlog {
                leaf,
                backlogged: true,
            });
            let mut cur = self.h.parent_of(leaf);
            while let Some(p) = cur {
                if p == ClassId::ROOT || self.st[p.index()].active {
                    break;
                }
                self.st[p.index()].active = true;
                let w = self.h.weight(p) as i64;
                self.st[0].residual += w;
                self.q_star += w;
                cur = self.h.parent_of(p);
            }
        }
        self.st[0].active = true;

        for s in self.st.iter_mut() {
            s.active_weight = 0;
            s.replenished = false;
            s.updates = 0;
        }
        for id in self.h.ids().skip(1) {
            if self.st[id.index()].active {
                let p = self.h.parent_of(id).unwrap();
                self.st[p.index()].active_weight += self.h.weight(id);
            }
        }
        for s in self.st.iter_mut() {
            s.round_start_weight = s.active_weight;
        }

        self.order.clear();
        for &leaf in self.h.leaves() {
            if self.st[leaf.index()].active {
                self.order.push(leaf);
            }
        }
        self.cursor = 0;
        self.visiting = None;
        self.mark(Mark::RoundStart {
            kind,
            round: self.round,
        });

        if self.checks.is_some() && kind == RoundKind::Main {
            let mut found = Vec::new();
            for id in self.h.ids().skip(1) {
                let s = &self.st[id.index()];
                if s.active
                    && self.h.kind(id) == ClassKind::Internal
                    && s.balance + s.residual >= s.active_weight as i64
                {
                    let v = Violation::MainRoundResidual {
                        round: self.round,
                        class: id,
                        total: s.balance + s.residual,
                        active_weight: s.active_weight,
                    };
                    found.push(v);
                }
            }
            for v in found {
                self.violation(v);
            }
        }
        self.check("round start");

        if self.mode == PhaseMode::PhaseSeparated {
            if kind == RoundKind::Main {
                self.peaks.fill(None);
            }
            for k in 0..self.order.len() {
                let leaf = self.order[k];
                self.replenish(leaf);
            }
            if self.checks.is_some() && kind == RoundKind::Main {
                for k in 0..self.h.children_of(ClassId::ROOT).len() {
                    let c = self.h.children_of(ClassId::ROOT)[k];
                    self.peaks[c.index()] = Some(self.aggregate_balance(c));
                }
            }
        }
    }

    fn violation(&mut self, v: Violation) {
        if let Some(c) = self.checks.as_mut() {
            if c.len() < MAX_RECORDED_VIOLATIONS {
                c.push(v);
            }
        }
    }

    fn check(&mut self, _what: &'static str) {
        if self.checks.is_none() {
            return;
        }
        let round = self.round;
        let mut found = Vec::new();
        let total = self.total();
        if total != self.q_star {
            found.push(Violation::Conservation {
                round,
                total,
                q_star: self.q_star,
            });
        }
        let mut recomputed = 0i64;
        for id in self.h.ids().skip(1) {
            let s = &self.st[id.index()];
            if s.active {
                recomputed += self.h.weight(id) as i64;
                if self.h.is_leaf(id) {
                    recomputed += self.lmax[id.index()] as i64;
                }
            }
        }
        if recomputed != self.q_star {
            found.push(Violation::QStarDrift {
                round,
                tracked: self.q_star,
                recomputed,
            });
        }
        for id in self.h.ids().skip(1) {
            let s = &self.st[id.index()];
            if s.balance < 0 || s.residual < 0 {
                found.push(Violation::Negative {
                    round,
                    class: id,
                    balance: s.balance,
                    residual: s.residual,
                });
            }
            if !s.active && (s.balance != 0 || s.residual != 0) {
                found.push(Violation::InactiveNonZero { round, class: id });
            }
            if let Some(peak) = self.peaks[id.index()] {
                let aggregate = self.aggregate_balance(id);
                if aggregate > peak {
                    found.push(Violation::AggregateAbovePeak {
                        round,
                        class: id,
                        aggregate,
                        peak,
                    });
                }
            }
            let limit = 1 + self.h.children_of(id).len() as u32;
            if s.updates > limit {
                found.push(Violation::TooManyUpdates {
                    round,
                    class: id,
                    updates: s.updates,
                });
            }
        }
        for v in found {
            self.violation(v);
        }
    }
}

impl Scheduler for Hls {
    fn enqueue(&mut self, pkt: Packet, _now: Nanos) -> Result<(), EnqueueError> {
        let leaf = pkt.leaf;
        if !self.h.contains(leaf) || !self.h.is_leaf(leaf) {
            return Err(EnqueueError::UnknownLeaf(leaf));
        }
        let lmax = self.lmax[leaf.index()];
        if pkt.size > lmax || pkt.size == 0 {
            return Err(EnqueueError::OversizedPacket {
                leaf,
                size: pkt.size,
                lmax,
            });
        }
        self.queues[leaf.index()].push_back(pkt);
        self.backlog += 1;
        self.check("enqueue");
        Ok(())
    }

    fn dequeue(&mut self, _now: Nanos) -> Option<Packet> {
        if self.backlog == 0 {
            return None;
        }
        let mut idle_rounds = 0u32;
        loop {
            if let Some(leaf) = self.visiting {
                let l = leaf.index();
                let head = self.queues[l].front().map(|p| p.size as i64);
                match head {
                    Some(size) if size <= self.st[l].balance => {
                        let pkt = self.queues[l].pop_front().unwrap();
                        self.backlog -= 1;
                        self.st[l].balance -= size;
                        self.st[0].balance += size;
                        self.st[l].sent += size as u64;
                        for a in self.h.ancestors_of(leaf) {
                            self.st[a.index()].sent += size as u64;
                        }
                        if self.queues[l].is_empty() {
                            self.visiting = None;
                            self.mark(Mark::VisitEnd {
                                leaf,
                                round: self.round,
                                backlogged: false,
                            });
                            self.go_idle(leaf);
                        } else {
                            self.check("transmit");
                        }
                        return Some(pkt);
                    }
                    _ => {
                        self.visiting = None;
                        self.mark(Mark::VisitEnd {
                            leaf,
                            round: self.round,
                            backlogged: true,
                        });
                    }
                }
            }
            if self.cursor < self.order.len() {
                let leaf = self.order[self.cursor];
                self.cursor += 1;
                self.visiting = Some(leaf);
                self.mark(Mark::VisitStart {
                    leaf,
                    round: self.round,
                });
                if self.mode == PhaseMode::Interleaved {
                    self.replenish(leaf);
                }
                continue;
            }
            idle_rounds += 1;
            // a main round always moves at least one packet, so two quiet
            // rounds in a row can only be a surplus round followed by a main one
            assert!(
                idle_rounds <= 1 + self.h.len() as u32 * 64,
                "HLS made no progress for {idle_rounds} rounds"
            );
            self.end_of_round();
            if self.order.is_empty() {
                return None;
            }
        }
    }

    fn record_marks(&mut self, on: bool) {
        self.marks = if on { Some(Vec::new()) } else { None };
    }

    fn drain_marks(&mut self, out: &mut Vec<Mark>) {
        if let Some(m) = self.marks.as_mut() {
            out.append(m);
        }
    }

    fn snapshot(&self) -> Option<StateDigest> {
        Some(StateDigest {
            conserved: self.total(),
            q_star: self.q_star,
            round: self.round,
        })
    }

    fn name(&self) -> &'static str {
        "hls"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::HierarchyBuilder;

    fn fig1() -> Hierarchy {
        let mut b = HierarchyBuilder::new(1000);
        let a = b.add(ClassId::ROOT, "A", 300);
        let bb = b.add(ClassId::ROOT, "B", 300);
        b.add(ClassId::ROOT, "C", 400);
        b.add(a, "A1", 100);
        b.add(a, "A2", 200);
        b.add(bb, "B1", 100);
        b.add(bb, "B2", 200);
        b.build().unwrap()
    }

    fn pkt(leaf: ClassId, size: u32, seq: u64) -> Packet {
        Packet {
            leaf,
            size,
            seq,
            arrival: Nanos::ZERO,
        }
    }

    fn hls(h: Hierarchy, mode: PhaseMode) -> Hls {
        let mut s = Hls::new(h, &[], mode).unwrap();
        s.enable_self_check();
        s
    }

    #[test]
    fn empty_system() {
        let h = fig1();
        let s = hls(h, PhaseMode::Interleaved);
        assert_eq!(s.q_star(), 0);
        let snap = s.snapshot_full();
        assert_eq!(snap.classes.len(), 8);
        assert_eq!(snap.total, 0);
        assert!(snap
            .classes
            .iter()
            .all(|c| c.balance == 0 && c.residual == 0));
    }

    #[test]
    fn lone_root_is_rejected() {
        let h = Hierarchy::build(&[crate::hierarchy::NodeSpec::new(0, None, 1)]).unwrap();
        assert_eq!(
            Hls::new(h, &[], PhaseMode::Interleaved).unwrap_err(),
            HlsError::NoLeafClasses
        );
    }

    #[test]
    fn first_activation_sets_round_size() {
        let h = fig1();
        let c = h.find("C").unwrap();
        let mut s = hls(h, PhaseMode::Interleaved);
        s.enqueue(pkt(c, 1000, 0), Nanos::ZERO).unwrap();
        s.enqueue(pkt(c, 1000, 1), Nanos::ZERO).unwrap();
        assert_eq!(s.q_star(), 0);
        let p = s.dequeue(Nanos::ZERO).unwrap();
        assert_eq!(p.seq, 0);
        assert_eq!(s.q_star(), 400 + 1500);
        assert_eq!(s.snapshot().unwrap().conserved, 1900);
        assert!(s.violations().is_empty(), "{:?}", s.violations());
    }

    #[test]
    fn all_leaves_backlogged_round_size_and_quotas() {
        let h = fig1();
        let leaves = h.leaves().to_vec();
        let a = h.find("A").unwrap();
        let mut s = hls(h, PhaseMode::PhaseSeparated);
        let mut seq = 0;
        for &l in &leaves {
            for _ in 0..3 {
                s.enqueue(pkt(l, 1000, seq), Nanos::ZERO).unwrap();
                seq += 1;
            }
        }
        // drive exactly the first round start: the first dequeue runs the
        // replenishment phase before transmitting
        s.dequeue(Nanos::ZERO).unwrap();
        assert_eq!(s.q_star(), 1600 + 5 * 1500);
        assert_eq!(s.q_star(), 9100);
        assert_eq!(s.class(ClassId::ROOT).fair_quota, 9);
        assert_eq!(s.class(a).granted, 2700);
        // A's own fair quota from its 2700 bytes over children weights 300
        assert_eq!(s.class(a).fair_quota, 9);
        assert!(s.violations().is_empty(), "{:?}", s.violations());
    }

    #[test]
    fn surplus_round_hands_out_no_root_quota() {
        let h = fig1();
        let (a1, a2) = (h.find("A1").unwrap(), h.find("A2").unwrap());
        let mut s = hls(h, PhaseMode::Interleaved);
        // A1 has a single small packet and goes idle with leftover balance,
        // A2 stays backlogged: the leftover flows to A's residual
        s.enqueue(pkt(a1, 100, 0), Nanos::ZERO).unwrap();
        for i in 0..50 {
            s.enqueue(pkt(a2, 1500, 1 + i), Nanos::ZERO).unwrap();
        }
        s.record_marks(true);
        let mut kinds = Vec::new();
        for _ in 0..20 {
            s.dequeue(Nanos::ZERO).unwrap();
            let mut m = Vec::new();
            s.drain_marks(&mut m);
            for mk in m {
                if let Mark::RoundStart { kind, .. } = mk {
                    kinds.push((kind, s.class(ClassId::ROOT).fair_quota));
                }
            }
        }
        assert!(
            kinds.iter().any(|(k, _)| *k == RoundKind::Surplus),
            "{kinds:?}"
        );
        assert!(s.violations().is_empty(), "{:?}", s.violations());
    }

    #[test]
    fn mid_round_arrival_waits_for_next_round() {
        let h = fig1();
        let (a1, c) = (h.find("A1").unwrap(), h.find("C").unwrap());
        let mut s = hls(h, PhaseMode::Interleaved);
        for i in 0..10 {
            s.enqueue(pkt(c, 1000, i), Nanos::ZERO).unwrap();
        }
        s.dequeue(Nanos::ZERO).unwrap();
        s.enqueue(pkt(a1, 1000, 100), Nanos::ZERO).unwrap();
        assert_eq!(s.queue_len(a1), 1);
        assert!(!s.is_active(a1));
        let r = s.round();
        while s.round() == r {
            let p = s.dequeue(Nanos::ZERO).unwrap();
            if s.round() == r {
                assert_eq!(p.leaf, c);
            }
        }
        assert!(s.is_active(a1));
        assert!(s.violations().is_empty(), "{:?}", s.violations());
    }

    #[test]
    fn idle_leaf_returns_balance_and_round_size() {
        let h = fig1();
        let c = h.find("C").unwrap();
        let a = h.find("A").unwrap();
        let a1 = h.find("A1").unwrap();
        let mut s = hls(h, PhaseMode::Interleaved);
        s.enqueue(pkt(c, 500, 0), Nanos::ZERO).unwrap();
        for i in 0..5 {
            s.enqueue(pkt(a1, 1500, 1 + i), Nanos::ZERO).unwrap();
        }
        // C has the lower id, so it goes first and empties at once
        assert_eq!(s.dequeue(Nanos::ZERO).unwrap().leaf, c);
        assert!(!s.is_active(c));
        assert_eq!(s.q_star(), 3800 - 1900);
        assert_eq!(s.class(c).balance, 0);
        // active root children weigh 700, so C got 400 * floor(3800 / 700)
        // = 2000, sent 500 and handed 1500 back before the round size shrank
        assert_eq!(s.class(ClassId::ROOT).residual, 1500 - 1900);
        assert!(s.is_active(a));
        assert!(s.violations().is_empty(), "{:?}", s.violations());
    }

    #[test]
    fn fifo_order_is_kept() {
        let h = fig1();
        let c = h.find("C").unwrap();
        let mut s = hls(h, PhaseMode::Interleaved);
        s.enqueue(pkt(c, 700, 1), Nanos::ZERO).unwrap();
        s.enqueue(pkt(c, 900, 2), Nanos::ZERO).unwrap();
        assert_eq!(s.dequeue(Nanos::ZERO).unwrap().seq, 1);
        assert_eq!(s.dequeue(Nanos::ZERO).unwrap().seq, 2);
        assert_eq!(s.dequeue(Nanos::ZERO), None);
        assert!(s.violations().is_empty(), "{:?}", s.violations());
    }

    #[test]
    fn enqueue_errors() {
        let h = fig1();
        let a = h.find("A").unwrap();
        let c = h.find("C").unwrap();
        let mut s = hls(h, PhaseMode::Interleaved);
        assert_eq!(
            s.enqueue(pkt(a, 100, 0), Nanos::ZERO),
            Err(EnqueueError::UnknownLeaf(a))
        );
        assert_eq!(
            s.enqueue(pkt(ClassId(42), 100, 0), Nanos::ZERO),
            Err(EnqueueError::UnknownLeaf(ClassId(42)))
        );
        assert_eq!(
            s.enqueue(pkt(c, 1501, 0), Nanos::ZERO),
            Err(EnqueueError::OversizedPacket {
                leaf: c,
                size: 1501,
                lmax: 1500
            })
        );
    }

    #[test]
    fn lone_backlogged_class_gets_every_slot() {
        let h = fig1();
        let c = h.find("C").unwrap();
        let mut s = hls(h, PhaseMode::Interleaved);
        for i in 0..1000 {
            s.enqueue(pkt(c, 1000, i), Nanos::ZERO).unwrap();
        }
        for i in 0..1000 {
            assert_eq!(s.dequeue(Nanos::ZERO).unwrap().seq, i);
        }
        assert_eq!(s.dequeue(Nanos::ZERO), None);
        assert!(s.violations().is_empty(), "{:?}", s.violations());
    }
}
