mod common;

use linkshare::fairshare::{hmm_fair, max_min_fair, FairShare, Request, RequestMap};
use linkshare::hierarchy::Superadditivity;
use linkshare::rational::{int, to_f64};
use linkshare::sim::ScenarioGen;
use linkshare::{Hierarchy, Rational};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn deep_gen() -> ScenarioGen {
    ScenarioGen {
        max_levels: 5,
        max_leaves: 20,
        ..ScenarioGen::default()
    }
}

fn random_requests(h: &Hierarchy, rng: &mut ChaCha8Rng) -> RequestMap {
    let mut m = RequestMap::idle(h);
    for &l in h.leaves() {
        let r = match rng.random_range(0..10) {
            0..=2 => Request::Infinite,
            3 => Request::zero(),
            _ => Request::finite(rng.random_range(1..5000u32)),
        };
        m.set(l, r);
    }
    m
}

fn case(seed: u64) -> (Hierarchy, RequestMap, Rational) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = deep_gen().hierarchy(&mut rng);
    let req = random_requests(&h, &mut rng);
    let cap = int(rng.random_range(100..50_000u32));
    (h, req, cap)
}

#[test]
fn matches_progressive_filling_on_random_trees() {
    for seed in 0..300 {
        let (h, req, cap) = case(seed);
        let a = hmm_fair(&h, &req, &cap).unwrap();
        let reqs: Vec<f64> = h.ids().map(|id| req.get(id).to_f64()).collect();
        let want = common::oracle::progressive_fill(&h, &reqs, to_f64(&cap));
        for &l in h.leaves() {
            let got = to_f64(a.rate(l));
            let w = want[l.index()];
            assert!(
                (got - w).abs() <= 1e-6 * w.abs().max(1.0),
                "seed {seed} leaf {l}: {got} vs {w}"
            );
        }
    }
}

#[test]
fn allocation_never_exceeds_request_and_aggregates() {
    for seed in 0..200 {
        let (h, req, cap) = case(seed);
        let a = hmm_fair(&h, &req, &cap).unwrap();
        let agg = req.aggregate(&h);
        for id in h.ids() {
            assert!(a.rate(id) >= &int(0));
            if let Request::Finite(r) = &agg[id.index()] {
                assert!(a.rate(id) <= r);
            }
            let kids = h.children_of(id);
            if !kids.is_empty() {
                let sum: Rational = kids.iter().map(|k| a.rate(*k).clone()).sum();
                assert_eq!(&sum, a.rate(id));
            }
        }
        let total: Rational = h.leaves().iter().map(|l| a.rate(*l).clone()).sum();
        let want = match &agg[0] {
            Request::Finite(r) if r < &cap => r.clone(),
            _ => cap.clone(),
        };
        assert_eq!(total, want, "seed {seed}");
    }
}

#[test]
fn unsatisfied_siblings_hold_the_top_weighted_share() {
    for seed in 0..200 {
        let (h, req, cap) = case(seed);
        let a = hmm_fair(&h, &req, &cap).unwrap();
        for id in h.ids() {
            let kids = h.children_of(id);
            for &i in kids {
                if a.satisfied[i.index()] {
                    continue;
                }
                for &j in kids {
                    let li = a.rate(i) / int(h.weight(i));
                    let lj = a.rate(j) / int(h.weight(j));
                    assert!(li >= lj, "seed {seed}: {i} below {j}");
                }
            }
        }
    }
}

#[test]
fn raising_an_unmet_request_changes_nothing() {
    for seed in 0..150 {
        let (h, req, cap) = case(seed);
        let a = hmm_fair(&h, &req, &cap).unwrap();
        for &l in h.leaves() {
            if a.satisfied[l.index()] {
                continue;
            }
            let mut more = req.clone();
            let bigger = match req.get(l) {
                Request::Finite(r) => Request::Finite(r * int(3) + int(7)),
                Request::Infinite => continue,
            };
            more.set(l, bigger);
            let b = hmm_fair(&h, &more, &cap).unwrap();
            assert_eq!(a.rate(l), b.rate(l), "seed {seed} leaf {l}");
        }
    }
}

#[test]
fn scaling_one_sibling_group_keeps_allocations() {
    for seed in 0..150 {
        let (h, req, cap) = case(seed);
        let a = hmm_fair(&h, &req, &cap).unwrap();
        let internal: Vec<_> = h.ids().filter(|id| !h.is_leaf(*id)).collect();
        let group = internal[seed as usize % internal.len()];
        let mut w = h.weights().to_vec();
        for &k in h.children_of(group) {
            w[k.index()] *= 3;
        }
        let scaled = h.with_weights(&w, Superadditivity::Relaxed).unwrap();
        let b = hmm_fair(&scaled, &req, &cap).unwrap();
        assert_eq!(a.rates, b.rates, "seed {seed}");
    }
}

#[test]
fn flat_result_is_order_independent_and_terminates_quickly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(1..12);
        let reqs: Vec<Request> = (0..n)
            .map(|_| {
                if rng.random_bool(0.3) {
                    Request::Infinite
                } else {
                    Request::finite(rng.random_range(0..400u32))
                }
            })
            .collect();
        let ws: Vec<Rational> = (0..n).map(|_| int(rng.random_range(1..50u32))).collect();
        let cap = int(rng.random_range(1..2000u32));
        let a = max_min_fair(&reqs, &ws, &cap).unwrap();
        assert!(a.iterations <= n);

        let rev_r: Vec<Request> = reqs.iter().rev().cloned().collect();
        let rev_w: Vec<Rational> = ws.iter().rev().cloned().collect();
        let b = max_min_fair(&rev_r, &rev_w, &cap).unwrap();
        let back: Vec<Rational> = b.allocations.into_iter().rev().collect();
        assert_eq!(a.allocations, back);
        assert_eq!(a.fair_share, b.fair_share);
    }
}

proptest! {
    #[test]
    fn equal_weights_saturated_split_evenly(n in 1usize..10, cap in 1u32..100_000) {
        let reqs = vec![Request::Infinite; n];
        let ws = vec![int(1); n];
        let a = max_min_fair(&reqs, &ws, &int(cap)).unwrap();
        for x in &a.allocations {
            prop_assert_eq!(x * int(n as u64), int(cap));
        }
        prop_assert_eq!(a.fair_share, FairShare::Finite(Rational::new(cap.into(), n.into())));
    }

    #[test]
    fn undersubscribed_groups_get_their_requests(rs in proptest::collection::vec(0u32..100, 1..8)) {
        let reqs: Vec<Request> = rs.iter().map(|&r| Request::finite(r)).collect();
        let ws = vec![int(1); rs.len()];
        let total: u32 = rs.iter().sum();
        let a = max_min_fair(&reqs, &ws, &int(total)).unwrap();
        prop_assert_eq!(a.fair_share, FairShare::Infinite);
        for (x, &r) in a.allocations.iter().zip(&rs) {
            prop_assert_eq!(x, &int(r));
        }
    }
}
