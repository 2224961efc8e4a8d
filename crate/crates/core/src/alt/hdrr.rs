use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_integer::Integer;

use super::{resolve_lmax, AltError};
use crate::hierarchy::{ClassId, Hierarchy};
use crate::sched::{EnqueueError, Mark, Nanos, Packet, Scheduler};

pub const DEFAULT_MAX_CYCLE: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HdrrParams {
    /// Bytes added to a leaf's deficit on every visit.
    pub quantum: u32,
}

impl Default for HdrrParams {
    fn default() -> Self {
        HdrrParams { quantum: 1500 }
    }
}

/// Length of the repeating visit cycle, or `None` if it does not fit in
/// `u128`.
pub fn visit_list_period(h: &Hierarchy) -> Option<u128> {
    let mut period = vec![0u128; h.len()];
    for &id in h.preorder().iter().rev() {
        let children = h.children_of(id);
        if children.is_empty() {
            period[id.index()] = 1;
            continue;
        }
        let mut frames: u128 = 1;
        let mut slots: u128 = 0;
        for &c in children {
            let p = period[c.index()];
            let w = h.weight(c) as u128;
            let need = p / p.gcd(&w);
            frames = frames.checked_mul(need / frames.gcd(&need))?;
            slots = slots.checked_add(w)?;
        }
        period[id.index()] = frames.checked_mul(slots)?;
    }
    Some(period[0])
}

/// One period of smooth weighted round robin over the given weights; each
/// entry is a child index. Ties go to the smaller index.
fn smooth_frame(weights: &[u64]) -> Vec<usize> {
    let total: i128 = weights.iter().map(|&w| w as i128).sum();
    let mut current = vec![0i128; weights.len()];
    let mut out = Vec::with_capacity(total as usize);
    for _ in 0..total {
        let mut best = 0;
        for (k, &w) in weights.iter().enumerate() {
            current[k] += w as i128;
            if current[k] > current[best] {
                best = k;
            }
        }
        current[best] -= total;
        out.push(best);
    }
    out
}

/// Produces the visit sequence of [`build_visit_list`] one leaf at a time,
/// without materializing the cycle.
#[derive(Clone, Debug)]
pub struct VisitWalker {
    // smooth round robin state per class, aligned with its children
    current: Vec<Vec<i128>>,
    total: Vec<i128>,
}

impl VisitWalker {
    pub fn new(h: &Hierarchy) -> Self {
        VisitWalker {
            current: h.ids().map(|id| vec![0; h.children_of(id).len()]).collect(),
            total: h.ids().map(|id| h.child_weight_sum(id) as i128).collect(),
        }
    }

    pub fn next(&mut self, h: &Hierarchy) -> ClassId {
        let mut node = ClassId::ROOT;
        loop {
            let children = h.children_of(node);
            if children.is_empty() {
                return node;
            }
            let cur = &mut self.current[node.index()];
            let mut best = 0;
            for (k, &c) in children.iter().enumerate() {
                cur[k] += h.weight(c) as i128;
                if cur[k] > cur[best] {
                    best = k;
                }
            }
            cur[best] -= self.total[node.index()];
            node = children[best];
        }
    }
}

/// Flattens the hierarchy into a cyclic list of leaf visits. Every internal
/// class spreads its children over `sum w_c` slots per frame, child `c`
/// holding `w_c` of them; each slot of a child is filled with that child's
/// next entry, recursively.
pub fn build_visit_list(h: &Hierarchy, max_cycle: u64) -> Result<Vec<ClassId>, AltError> {
    let period = visit_list_period(h).unwrap_or(u128::MAX);
    if period > max_cycle as u128 {
        return Err(AltError::CycleTooLarge {
            period,
            cap: max_cycle,
        });
    }
    Ok(expand(h, ClassId::ROOT))
}

fn expand(h: &Hierarchy, id: ClassId) -> Vec<ClassId> {
    let children = h.children_of(id);
    if children.is_empty() {
        return vec![id];
    }
    let subs: Vec<Vec<ClassId>> = children.iter().map(|&c| expand(h, c)).collect();
    let weights: Vec<u64> = children.iter().map(|&c| h.weight(c)).collect();
    let frame = smooth_frame(&weights);
    let mut frames = 1usize;
    for (k, sub) in subs.iter().enumerate() {
        let p = sub.len();
        let need = p / p.gcd(&(weights[k] as usize));
        frames = frames.lcm(&need);
    }
    let mut pos = vec![0usize; subs.len()];
    let mut out = Vec::with_capacity(frames * frame.len());
    for _ in 0..frames {
        for &k in &frame {
            out.push(subs[k][pos[k]]);
            pos[k] = (pos[k] + 1) % subs[k].len();
        }
    }
    out
}

/// Hierarchical DRR: plain DRR with a fixed quantum, run over a static
/// visit list that interleaves the leaves according to their weights.
#[derive(Clone, Debug)]
pub struct Hdrr {
    h: Hierarchy,
    walker: VisitWalker,
    current: ClassId,
    in_visit: bool,
    quantum: u64,
    lmax: Vec<u32>,
    deficit: Vec<u64>,
    queues: Vec<VecDeque<Packet>>,
    backlog: usize,
    visits: u64,
    marks: Option<Vec<Mark>>,
}

impl Hdrr {
    pub fn new(h: Hierarchy, lmax: &[u32], params: &HdrrParams) -> Result<Self, AltError> {
        let mut lmax = resolve_lmax(&h, lmax)?;
        if params.quantum == 0 {
            return Err(AltError::InvalidQuantum(ClassId::ROOT));
        }
        for id in h.ids() {
            if !h.is_leaf(id) {
                lmax[id.index()] = 0;
            }
        }
        let mut walker = VisitWalker::new(&h);
        let current = walker.next(&h);
        let n = h.len();
        Ok(Hdrr {
            h,
            walker,
            current,
            in_visit: false,
            quantum: params.quantum as u64,
            deficit: vec![0; n],
            queues: vec![VecDeque::new(); n],
            lmax,
            backlog: 0,
            visits: 0,
            marks: None,
        })
    }

    pub fn deficit(&self, leaf: ClassId) -> u64 {
        self.deficit[leaf.index()]
    }

    fn mark(&mut self, m: Mark) {
        if let Some(v) = self.marks.as_mut() {
            v.push(m);
        }
    }

    fn advance(&mut self) {
        self.in_visit = false;
        self.current = self.walker.next(&self.h);
    }
}

impl Scheduler for Hdrr {
    fn enqueue(&mut self, pkt: Packet, _now: Nanos) -> Result<(), EnqueueError> {
        let leaf = pkt.leaf;
        let lmax = *self.lmax.get(leaf.index()).unwrap_or(&0);
        if lmax == 0 {
            return Err(EnqueueError::UnknownLeaf(leaf));
        }
        if pkt.size == 0 || pkt.size > lmax {
            return Err(EnqueueError::OversizedPacket {
                leaf,
                size: pkt.size,
                lmax,
            });
        }
        let q = &mut self.queues[leaf.index()];
        q.push_back(pkt);
        self.backlog += 1;
        if q.len() == 1 {
            self.mark(Mark::Backlog {
                leaf,
                backlogged: true,
            });
        }
        Ok(())
    }

    fn dequeue(&mut self, _now: Nanos) -> Option<Packet> {
        if self.backlog == 0 {
            return None;
        }
        loop {
            let leaf = self.current;
            let l = leaf.index();
            if !self.in_visit {
                if self.queues[l].is_empty() {
                    self.advance();
                    continue;
                }
                self.in_visit = true;
                self.visits += 1;
                self.deficit[l] += self.quantum;
                self.mark(Mark::VisitStart {
                    leaf,
                    round: self.visits,
                });
            }
            let head = self.queues[l]
                .front()
                .expect("visited leaf is backlogged")
                .size as u64;
            if head <= self.deficit[l] {
                self.deficit[l] -= head;
                let pkt = self.queues[l].pop_front().unwrap();
                self.backlog -= 1;
                if self.queues[l].is_empty() {
                    self.deficit[l] = 0;
                    self.mark(Mark::VisitEnd {
                        leaf,
                        round: self.visits,
                        backlogged: false,
                    });
                    self.mark(Mark::Backlog {
                        leaf,
                        backlogged: false,
                    });
                    self.advance();
                }
                return Some(pkt);
            }
            self.mark(Mark::VisitEnd {
                leaf,
                round: self.visits,
                backlogged: true,
            });
            self.advance();
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

    fn name(&self) -> &'static str {
        "hdrr"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{HierarchyBuilder, Superadditivity};

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

    fn beta(h: &Hierarchy, leaf: ClassId) -> u128 {
        h.ancestors_of(leaf)
            .map(|a| h.child_weight_sum(a) as u128)
            .product()
    }

    fn max_cyclic_gap(list: &[ClassId], leaf: ClassId) -> usize {
        let pos: Vec<usize> = (0..list.len()).filter(|&k| list[k] == leaf).collect();
        let mut gap = pos[0] + list.len() - pos[pos.len() - 1];
        for w in pos.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        gap
    }

    #[test]
    fn two_equal_leaves() {
        let mut b = HierarchyBuilder::new(2);
        b.add(ClassId::ROOT, "a", 1);
        b.add(ClassId::ROOT, "b", 1);
        let h = b.build().unwrap();
        assert_eq!(
            build_visit_list(&h, DEFAULT_MAX_CYCLE).unwrap(),
            vec![ClassId(1), ClassId(2)]
        );
    }

    #[test]
    fn three_seven_split_is_spread() {
        let mut b = HierarchyBuilder::new(10);
        let x = b.add(ClassId::ROOT, "X", 3);
        b.add(ClassId::ROOT, "Y", 7);
        let h = b.build().unwrap();
        let list = build_visit_list(&h, DEFAULT_MAX_CYCLE).unwrap();
        assert_eq!(list.len(), 10);
        assert_eq!(list.iter().filter(|&&c| c == x).count(), 3);
        assert!(max_cyclic_gap(&list, x) <= 4);
    }

    #[test]
    fn fig1_visit_gaps_within_beta() {
        let h = fig1();
        let a1 = h.find("A1").unwrap();
        assert_eq!(beta(&h, a1), 300_000);
        let list = build_visit_list(&h, DEFAULT_MAX_CYCLE).unwrap();
        assert_eq!(list.len() as u128, visit_list_period(&h).unwrap());
        for &l in h.leaves() {
            assert!(max_cyclic_gap(&list, l) as u128 <= beta(&h, l));
        }
        // slot counts follow the guarantees
        assert_eq!(list.iter().filter(|&&c| c == a1).count() * 10, list.len());
    }

    #[test]
    fn walker_matches_materialized_list() {
        let h = fig1();
        let list = build_visit_list(&h, DEFAULT_MAX_CYCLE).unwrap();
        let mut w = VisitWalker::new(&h);
        for k in 0..2 * list.len() {
            assert_eq!(w.next(&h), list[k % list.len()]);
        }
    }

    #[test]
    fn deep_tree_hits_cycle_cap() {
        let mut b = HierarchyBuilder::new(10);
        let mut frontier = vec![ClassId::ROOT];
        for depth in 0..8 {
            let mut next = Vec::new();
            for p in frontier {
                next.push(b.add(p, &alloc::format!("l{depth}a"), 3));
                next.push(b.add(p, &alloc::format!("l{depth}b"), 7));
            }
            frontier = next;
        }
        let h = b.build_with(Superadditivity::Relaxed).unwrap();
        assert!(matches!(
            build_visit_list(&h, DEFAULT_MAX_CYCLE),
            Err(AltError::CycleTooLarge { .. })
        ));
    }

    #[test]
    fn deficit_bookkeeping_per_visit_count() {
        let h = fig1();
        let leaves = h.leaves().to_vec();
        let mut s = Hdrr::new(h, &[], &HdrrParams::default()).unwrap();
        s.record_marks(true);
        let mut seq = 0;
        for &l in &leaves {
            for _ in 0..4000 {
                let size = 200 + (seq * 7919 % 1301) as u32;
                s.enqueue(
                    Packet {
                        leaf: l,
                        size,
                        seq,
                        arrival: Nanos::ZERO,
                    },
                    Nanos::ZERO,
                )
                .unwrap();
                seq += 1;
            }
        }
        let n = 1 + leaves.iter().map(|l| l.index()).max().unwrap();
        let mut visits = vec![0i64; n];
        let mut sent = vec![0i64; n];
        let mut marks = Vec::new();
        for _ in 0..6000 {
            let p = s.dequeue(Nanos::ZERO).unwrap();
            s.drain_marks(&mut marks);
            for m in marks.drain(..) {
                if let Mark::VisitStart { leaf, .. } = m {
                    visits[leaf.index()] += 1;
                }
            }
            sent[p.leaf.index()] += p.size as i64;
            for &l in &leaves {
                let k = visits[l.index()];
                assert!(sent[l.index()] <= k * 1500);
                if !(s.in_visit && s.current == l) {
                    assert!(sent[l.index()] >= k * 1500 - 1500);
                }
            }
        }
    }
}
