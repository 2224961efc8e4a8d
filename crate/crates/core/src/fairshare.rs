//! Weighted max-min fair shares, flat and hierarchical, in exact arithmetic.
//!
//! The flat solver is the classic water-filling fixed point: starting from a
//! zero fair share, classes whose request fits under `w_i * f` are marked
//! satisfied and `f` is recomputed from the remaining capacity until it stops
//! moving. The hierarchical allocation runs the flat solver once per sibling
//! group, top-down, with the parent's allocation as the budget.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_traits::{Signed, Zero};

use crate::hierarchy::{ClassId, Hierarchy};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FairShareError {
    #[error("no classes to allocate to")]
    EmptyClassSet,
    #[error("request and weight lists differ in length ({requests} vs {weights})")]
    LengthMismatch { requests: usize, weights: usize },
    #[error("weight at position {0} is not positive")]
    NonPositiveWeight(usize),
    #[error("request at position {0} is negative")]
    NegativeRequest(usize),
    #[error("capacity is negative")]
    NegativeCapacity,
}

/// A rate request; `Infinite` is a permanently backlogged source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    Finite(Rational),
    Infinite,
}

impl Request {
    pub fn finite(v: impl Into<num_bigint::BigInt>) -> Self {
        Request::Finite(rational::int(v))
    }

    pub fn zero() -> Self {
        Request::Finite(Rational::zero())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Request::Infinite)
    }

    fn fits_under(&self, bound: &Rational) -> bool {
        match self {
            Request::Finite(r) => r <= bound,
            Request::Infinite => false,
        }
    }

    fn min_with(&self, cap: &Rational) -> Rational {
        match self {
            Request::Finite(r) if r < cap => r.clone(),
            _ => cap.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Request::Finite(r) => rational::to_f64(r),
            Request::Infinite => f64::INFINITY,
        }
    }
}

impl core::ops::Add for &Request {
    type Output = Request;
    fn add(self, rhs: &Request) -> Request {
        match (self, rhs) {
            (Request::Finite(a), Request::Finite(b)) => Request::Finite(a + b),
            _ => Request::Infinite,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FairShare {
    Finite(Rational),
    /// Every request fits: nobody is constrained.
    Infinite,
}

impl FairShare {
    pub fn to_f64(&self) -> f64 {
        match self {
            FairShare::Finite(f) => rational::to_f64(f),
            FairShare::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatAllocation {
    pub fair_share: FairShare,
    pub allocations: Vec<Rational>,
    /// `satisfied[i]` iff class `i` receives its full request.
    pub satisfied: Vec<bool>,
    /// Number of times the fair share was raised before the fixed point.
    pub iterations: usize,
}

pub fn max_min_fair(
    requests: &[Request],
    weights: &[Rational],
    capacity: &Rational,
) -> Result<FlatAllocation, FairShareError> {
    if requests.len() != weights.len() {
        return Err(FairShareError::LengthMismatch {
            requests: requests.len(),
            weights: weights.len(),
        });
    }
    if requests.is_empty() {
        return Err(FairShareError::EmptyClassSet);
    }
    if capacity.is_negative() {
        return Err(FairShareError::NegativeCapacity);
    }
    for (i, w) in weights.iter().enumerate() {
        if !w.is_positive() {
            return Err(FairShareError::NonPositiveWeight(i));
        }
    }
    for (i, r) in requests.iter().enumerate() {
        if let Request::Finite(v) = r {
            if v.is_negative() {
                return Err(FairShareError::NegativeRequest(i));
            }
        }
    }

    let total = requests.iter().fold(Request::zero(), |acc, r| &acc + r);
    if total.fits_under(capacity) {
        return Ok(FlatAllocation {
            fair_share: FairShare::Infinite,
            allocations: requests
                .iter()
                .map(|r| match r {
                    Request::Finite(v) => v.clone(),
                    Request::Infinite => unreachable!(),
                })
                .collect(),
            satisfied: vec![true; requests.len()],
            iterations: 0,
        });
    }

    let mut share = Rational::zero();
    let mut iterations = 0;
    loop {
        let mut used = Rational::zero();
        let mut open_weight = Rational::zero();
        for (r, w) in requests.iter().zip(weights) {
            match r {
                Request::Finite(v) if *v <= w * &share => used += v,
                _ => open_weight += w,
            }
        }
        // total demand exceeds capacity, so some class is always unsatisfied
        debug_assert!(open_weight.is_positive());
        let next = (capacity - used) / open_weight;
        match next.cmp(&share) {
            Ordering::Equal => break,
            Ordering::Greater => {
                share = next;
                iterations += 1;
            }
            Ordering::Less => unreachable!("fair share decreased during water filling"),
        }
    }

    let allocations: Vec<Rational> = requests
        .iter()
        .zip(weights)
        .map(|(r, w)| r.min_with(&(w * &share)))
        .collect();
    let satisfied = requests
        .iter()
        .zip(&allocations)
        .map(|(r, a)| matches!(r, Request::Finite(v) if v == a))
        .collect();
    Ok(FlatAllocation {
        fair_share: FairShare::Finite(share),
        allocations,
        satisfied,
        iterations,
    })
}

/// Leaf requests, indexed by class id. Non-leaf entries are ignored and
/// recomputed by aggregation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RequestMap {
    requests: Vec<Request>,
}

impl RequestMap {
    /// All leaves idle.
    pub fn idle(h: &Hierarchy) -> Self {
        RequestMap {
            requests: vec![Request::zero(); h.len()],
        }
    }

    /// All leaves permanently backlogged.
    pub fn saturated(h: &Hierarchy) -> Self {
        let mut m = Self::idle(h);
        for &l in h.leaves() {
            m.set(l, Request::Infinite);
        }
        m
    }

    pub fn set(&mut self, leaf: ClassId, r: Request) -> &mut Self {
        self.requests[leaf.index()] = r;
        self
    }

    pub fn get(&self, id: ClassId) -> &Request {
        &self.requests[id.index()]
    }

    /// Request of every class, internal ones as the sum over their children.
    pub fn aggregate(&self, h: &Hierarchy) -> Vec<Request> {
        let mut agg = self.requests.clone();
        for &c in h.preorder().iter().rev() {
            let kids = h.children_of(c);
            if !kids.is_empty() {
                agg[c.index()] = kids
                    .iter()
                    .fold(Request::zero(), |acc, k| &acc + &agg[k.index()]);
            }
        }
        agg
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    /// Aggregated requests for every class.
    pub requests: Vec<Request>,
    pub rates: Vec<Rational>,
    /// Fair share of every class with children; `None` for leaves.
    pub fair_shares: Vec<Option<FairShare>>,
    /// Whether each class receives its full request.
    pub satisfied: Vec<bool>,
}

impl Allocation {
    pub fn rate(&self, id: ClassId) -> &Rational {
        &self.rates[id.index()]
    }

    pub fn fair_share(&self, id: ClassId) -> Option<&FairShare> {
        self.fair_shares[id.index()].as_ref()
    }
}

/// Hierarchical max-min fair allocation of `capacity` among the leaves.
pub fn hmm_fair(
    h: &Hierarchy,
    leaf_requests: &RequestMap,
    capacity: &Rational,
) -> Result<Allocation, FairShareError> {
    if h.leaves().is_empty() {
        return Err(FairShareError::EmptyClassSet);
    }
    if capacity.is_negative() {
        return Err(FairShareError::NegativeCapacity);
    }
    let requests = leaf_requests.aggregate(h);
    let mut rates = vec![Rational::zero(); h.len()];
    let mut fair_shares = vec![None; h.len()];
    rates[0] = requests[0].min_with(capacity);

    for &c in h.preorder() {
        let kids = h.children_of(c);
        if kids.is_empty() {
            continue;
        }
        let reqs: Vec<Request> = kids.iter().map(|k| requests[k.index()].clone()).collect();
        let ws: Vec<Rational> = kids.iter().map(|k| rational::int(h.weight(*k))).collect();
        let flat = max_min_fair(&reqs, &ws, &rates[c.index()])?;
        for (k, a) in kids.iter().zip(flat.allocations) {
            rates[k.index()] = a;
        }
        fair_shares[c.index()] = Some(flat.fair_share);
    }

    let satisfied = requests
        .iter()
        .zip(&rates)
        .map(|(r, a)| matches!(r, Request::Finite(v) if v == a))
        .collect();
    Ok(Allocation {
        requests,
        rates,
        fair_shares,
        satisfied,
    })
}
