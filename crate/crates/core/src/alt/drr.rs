use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::ToPrimitive;

use super::{resolve_lmax, AltError};
use crate::hierarchy::{weights_to_guarantees, ClassId, Hierarchy};
use crate::rational::{int, Rational};
use crate::sched::{EnqueueError, Mark, Nanos, Packet, Scheduler};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DrrParams {
    /// Per-class quantum in bytes, indexed by class id. When absent each leaf
    /// gets `Lmax_i * g_i / min g`, with `g` the weight-derived guarantee.
    pub quanta: Option<Vec<u64>>,
}

/// Deficit round robin over the leaves of a hierarchy; internal classes only
/// shape the default quanta.
#[derive(Clone, Debug)]
pub struct Drr {
    quantum: Vec<u64>,
    lmax: Vec<u32>,
    deficit: Vec<u64>,
    queues: Vec<VecDeque<Packet>>,
    active: VecDeque<ClassId>,
    in_visit: bool,
    round: u64,
    marks: Option<Vec<Mark>>,
}

pub(crate) fn default_quanta(h: &Hierarchy, lmax: &[u32]) -> Vec<u64> {
    let g = weights_to_guarantees(h, &int(1));
    let min = h
        .leaves()
        .iter()
        .map(|l| g.get(*l).clone())
        .min()
        .expect("at least one leaf");
    let mut q = vec![0u64; h.len()];
    for &l in h.leaves() {
        let v: Rational = int(lmax[l.index()]) * g.get(l) / &min;
        q[l.index()] = v.round().to_integer().to_u64().unwrap_or(u64::MAX).max(1);
    }
    q
}

impl Drr {
    pub fn new(h: &Hierarchy, lmax: &[u32], params: &DrrParams) -> Result<Self, AltError> {
        let lmax = resolve_lmax(h, lmax)?;
        let quantum = match &params.quanta {
            Some(q) => {
                if q.len() != h.len() {
                    return Err(AltError::LengthMismatch {
                        expected: h.len(),
                        got: q.len(),
                    });
                }
                q.clone()
            }
            None => default_quanta(h, &lmax),
        };
        for &l in h.leaves() {
            if quantum[l.index()] == 0 {
                return Err(AltError::InvalidQuantum(l));
            }
        }
        // a zero Lmax marks classes that cannot take packets
        let mut lmax = lmax;
        for id in h.ids() {
            if !h.is_leaf(id) {
                lmax[id.index()] = 0;
            }
        }
        Ok(Drr {
            deficit: vec![0; h.len()],
            quantum,
            lmax,
            queues: vec![VecDeque::new(); h.len()],
            active: VecDeque::new(),
            in_visit: false,
            round: 0,
            marks: None,
        })
    }

    pub fn quantum(&self, leaf: ClassId) -> u64 {
        self.quantum[leaf.index()]
    }

    pub fn deficit(&self, leaf: ClassId) -> u64 {
        self.deficit[leaf.index()]
    }

    fn mark(&mut self, m: Mark) {
        if let Some(v) = self.marks.as_mut() {
            v.push(m);
        }
    }
}

impl Scheduler for Drr {
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
        if q.len() == 1 {
            self.active.push_back(leaf);
            self.mark(Mark::Backlog {
                leaf,
                backlogged: true,
            });
        }
        Ok(())
    }

    fn dequeue(&mut self, _now: Nanos) -> Option<Packet> {
        loop {
            let leaf = *self.active.front()?;
            let l = leaf.index();
            if !self.in_visit {
                self.in_visit = true;
                self.deficit[l] += self.quantum[l];
                self.round += 1;
                self.mark(Mark::VisitStart {
                    leaf,
                    round: self.round,
                });
            }
            let head = self.queues[l]
                .front()
                .expect("active leaf is backlogged")
                .size as u64;
            if head <= self.deficit[l] {
                self.deficit[l] -= head;
                let pkt = self.queues[l].pop_front().unwrap();
                if self.queues[l].is_empty() {
                    self.deficit[l] = 0;
                    self.active.pop_front();
                    self.in_visit = false;
                    self.mark(Mark::VisitEnd {
                        leaf,
                        round: self.round,
                        backlogged: false,
                    });
                    self.mark(Mark::Backlog {
                        leaf,
                        backlogged: false,
                    });
                }
                return Some(pkt);
            }
            self.in_visit = false;
            self.active.rotate_left(1);
            self.mark(Mark::VisitEnd {
                leaf,
                round: self.round,
                backlogged: true,
            });
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
        "drr"
    }
}
