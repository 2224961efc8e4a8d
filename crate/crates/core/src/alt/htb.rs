use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::ToPrimitive;

use super::{resolve_lmax, AltError};
use crate::hierarchy::{weights_to_guarantees, ClassId, Hierarchy};
use crate::rational::int;
use crate::sched::{EnqueueError, Mark, Nanos, Packet, Scheduler};

/// One byte expressed in bucket units (bit-nanoseconds per second), so that
/// a rate in bit/s times elapsed nanoseconds needs no division.
const BYTE: i128 = 8 * 1_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenBucket {
    rate_bps: u64,
    capacity: i128,
    tokens: i128,
    last: Nanos,
}

impl TokenBucket {
    /// A full bucket holding `capacity_bytes`.
    pub fn new(rate_bps: u64, capacity_bytes: u64) -> Self {
        let capacity = capacity_bytes as i128 * BYTE;
        TokenBucket {
            rate_bps,
            capacity,
            tokens: capacity,
            last: Nanos::ZERO,
        }
    }

    pub fn rate_bps(&self) -> u64 {
        self.rate_bps
    }

    pub fn refill(&mut self, now: Nanos) {
        if now > self.last {
            let gained = self.rate_bps as i128 * (now.0 - self.last.0) as i128;
            self.tokens = (self.tokens + gained).min(self.capacity);
            self.last = now;
        }
    }

    pub fn consume(&mut self, bytes: u32) {
        self.tokens -= bytes as i128 * BYTE;
    }

    pub fn has_tokens(&self) -> bool {
        self.tokens > 0
    }

    pub fn tokens_bytes(&self) -> f64 {
        self.tokens as f64 / BYTE as f64
    }

    /// Earliest time the bucket holds tokens again, assuming no consumption.
    pub fn positive_at(&self) -> Option<Nanos> {
        if self.tokens > 0 {
            return Some(self.last);
        }
        if self.rate_bps == 0 {
            return None;
        }
        let need = (1 - self.tokens) as u128;
        let dt = need.div_ceil(self.rate_bps as u128);
        Some(Nanos(
            self.last.0.saturating_add(dt.min(u64::MAX as u128) as u64),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    Green,
    Yellow,
    Red,
}

impl Color {
    pub fn of(assured: &TokenBucket, ceiling: &TokenBucket) -> Color {
        if !ceiling.has_tokens() {
            Color::Red
        } else if assured.has_tokens() {
            Color::Green
        } else {
            Color::Yellow
        }
    }
}

/// The class a leaf draws tokens from: the leaf itself when green, else the
/// first green ancestor reached before any red one. The root counts as
/// green. `colors` is indexed by class id.
pub fn lender(h: &Hierarchy, colors: &[Color], leaf: ClassId) -> Option<ClassId> {
    let mut cur = leaf;
    loop {
        if cur == ClassId::ROOT {
            return Some(cur);
        }
        match colors[cur.index()] {
            Color::Green => return Some(cur),
            Color::Red => return None,
            Color::Yellow => cur = h.parent_of(cur)?,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HtbParams {
    /// Assured rates in bit/s indexed by class id; defaults to the guarantees
    /// implied by the weights and the link capacity.
    pub assured_bps: Option<Vec<u64>>,
    /// Ceiling rates in bit/s indexed by class id; defaults to the link
    /// capacity for every class.
    pub ceiling_bps: Option<Vec<u64>>,
    /// Buckets hold `max(Lmax, rate * burst)` bytes.
    pub burst: Nanos,
}

impl Default for HtbParams {
    fn default() -> Self {
        HtbParams {
            assured_bps: None,
            ceiling_bps: None,
            burst: Nanos(10_000_000),
        }
    }
}

/// A simplified HTB: per-class assured and ceiling token buckets, colors
/// derived from their fill levels, borrowing through green ancestors, and a
/// DRR per level of which only the lowest eligible one is served.
#[derive(Clone, Debug)]
pub struct HtbLite {
    h: Hierarchy,
    lmax: Vec<u32>,
    assured: Vec<TokenBucket>,
    ceiling: Vec<TokenBucket>,
    level: Vec<u32>,
    queues: Vec<VecDeque<Packet>>,
    backlog: usize,
    quantum: Vec<u64>,
    cursor: Vec<usize>,
    fresh: Vec<bool>,
    deficit: Vec<Vec<u64>>,
    colors: Vec<Color>,
    marks: Option<Vec<Mark>>,
}

impl HtbLite {
    pub fn new(
        h: Hierarchy,
        lmax: &[u32],
        capacity_bps: u64,
        params: &HtbParams,
    ) -> Result<Self, AltError> {
        if capacity_bps == 0 {
            return Err(AltError::ZeroCapacity);
        }
        let mut lmax = resolve_lmax(&h, lmax)?;
        for id in h.ids() {
            if !h.is_leaf(id) {
                lmax[id.index()] = 0;
            }
        }
        let n = h.len();
        let assured = match &params.assured_bps {
            Some(a) if a.len() != n => {
                return Err(AltError::LengthMismatch {
                    expected: n,
                    got: a.len(),
                })
            }
            Some(a) => a.clone(),
            None => {
                let g = weights_to_guarantees(&h, &int(capacity_bps));
                h.ids()
                    .map(|id| g.get(id).round().to_integer().to_u64().unwrap_or(u64::MAX))
                    .collect()
            }
        };
        let ceiling = match &params.ceiling_bps {
            Some(c) if c.len() != n => {
                return Err(AltError::LengthMismatch {
                    expected: n,
                    got: c.len(),
                })
            }
            Some(c) => c.iter().zip(&assured).map(|(&c, &a)| c.max(a)).collect(),
            None => assured
                .iter()
                .map(|&a| a.max(capacity_bps))
                .collect::<Vec<_>>(),
        };
        let max_lmax = *lmax.iter().max().unwrap() as u64;
        let bucket = |rate: u64| {
            let burst = (rate as u128 * params.burst.0 as u128 / 8_000_000_000) as u64;
            TokenBucket::new(rate, burst.max(max_lmax))
        };
        let min_ar = h
            .leaves()
            .iter()
            .map(|l| assured[l.index()].max(1))
            .min()
            .unwrap();
        let mut quantum = vec![0u64; n];
        for &l in h.leaves() {
            let q = lmax[l.index()] as u128 * assured[l.index()].max(1) as u128 / min_ar as u128;
            quantum[l.index()] = (q as u64).max(lmax[l.index()] as u64);
        }
        let level: Vec<u32> = h.ids().map(|id| h.level(id)).collect();
        let levels = level[0] as usize + 1;
        Ok(HtbLite {
            assured: assured.iter().map(|&a| bucket(a)).collect(),
            ceiling: ceiling.iter().map(|&c| bucket(c)).collect(),
            lmax,
            level,
            queues: vec![VecDeque::new(); n],
            backlog: 0,
            quantum,
            cursor: vec![0; levels],
            fresh: vec![false; levels],
            deficit: vec![vec![0; h.leaves().len()]; levels],
            colors: vec![Color::Green; n],
            marks: None,
            h,
        })
    }

    pub fn color(&self, id: ClassId) -> Color {
        self.colors[id.index()]
    }

    pub fn assured_rate(&self, id: ClassId) -> u64 {
        self.assured[id.index()].rate_bps()
    }

    fn refresh(&mut self, now: Nanos) {
        for id in self.h.ids() {
            let i = id.index();
            self.assured[i].refill(now);
            self.ceiling[i].refill(now);
            self.colors[i] = if id == ClassId::ROOT {
                Color::Green
            } else {
                Color::of(&self.assured[i], &self.ceiling[i])
            };
        }
    }

    /// Level of the DRR group each leaf is eligible in, by leaf position.
    fn eligibility(&self) -> Vec<Option<u32>> {
        self.h
            .leaves()
            .iter()
            .map(|&l| {
                if self.queues[l.index()].is_empty() {
                    None
                } else {
                    lender(&self.h, &self.colors, l).map(|g| self.level[g.index()])
                }
            })
            .collect()
    }

    fn charge(&mut self, leaf: ClassId, size: u32) {
        let mut cur = Some(leaf);
        while let Some(c) = cur {
            if c == ClassId::ROOT {
                break;
            }
            let i = c.index();
            self.ceiling[i].consume(size);
            if self.colors[i] == Color::Green {
                self.assured[i].consume(size);
            }
            cur = self.h.parent_of(c);
        }
    }
}

impl Scheduler for HtbLite {
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
            if let Some(m) = self.marks.as_mut() {
                m.push(Mark::Backlog {
                    leaf,
                    backlogged: true,
                });
            }
        }
        Ok(())
    }

    fn dequeue(&mut self, now: Nanos) -> Option<Packet> {
        if self.backlog == 0 {
            return None;
        }
        self.refresh(now);
        let elig = self.eligibility();
        let level = elig.iter().flatten().copied().min()?;
        let lv = level as usize;
        let n = elig.len();
        // quanta are at least one Lmax, so two passes always find a sender
        for _ in 0..=2 * n {
            let k = self.cursor[lv];
            if elig[k] == Some(level) {
                let leaf = self.h.leaves()[k];
                if !self.fresh[lv] {
                    self.fresh[lv] = true;
                    self.deficit[lv][k] += self.quantum[leaf.index()];
                }
                let head = self.queues[leaf.index()].front().unwrap().size;
                if head as u64 <= self.deficit[lv][k] {
                    self.deficit[lv][k] -= head as u64;
                    let pkt = self.queues[leaf.index()].pop_front().unwrap();
                    self.backlog -= 1;
                    self.charge(leaf, head);
                    if self.queues[leaf.index()].is_empty() {
                        for d in self.deficit.iter_mut() {
                            d[k] = 0;
                        }
                        self.fresh[lv] = false;
                        self.cursor[lv] = (k + 1) % n;
                        if let Some(m) = self.marks.as_mut() {
                            m.push(Mark::Backlog {
                                leaf,
                                backlogged: false,
                            });
                        }
                    }
                    return Some(pkt);
                }
            }
            self.fresh[lv] = false;
            self.cursor[lv] = (k + 1) % n;
        }
        unreachable!("an eligible leaf always accumulates enough deficit")
    }

    fn wakeup_hint(&self, now: Nanos) -> Option<Nanos> {
        if self.backlog == 0 {
            return None;
        }
        self.h
            .ids()
            .skip(1)
            .flat_map(|id| {
                let i = id.index();
                [self.assured[i].positive_at(), self.ceiling[i].positive_at()]
            })
            .flatten()
            .filter(|&t| t > now)
            .min()
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
        "htb"
    }
}
