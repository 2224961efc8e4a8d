//! Brute-force hierarchical max-min allocation in `f64`: inside every sibling
//! group the common level a/w is raised until the parent's budget is used up,
//! located by bisection instead of the fixed-point iteration.

use linkshare::{ClassId, Hierarchy};

/// `requests` is indexed by class id, `f64::INFINITY` for a saturated leaf.
pub fn progressive_fill(h: &Hierarchy, requests: &[f64], capacity: f64) -> Vec<f64> {
    let mut demand = requests.to_vec();
    for &c in h.preorder().iter().rev() {
        let kids = h.children_of(c);
        if !kids.is_empty() {
            demand[c.index()] = kids.iter().map(|k| demand[k.index()]).sum();
        }
    }
    let mut alloc = vec![0.0; h.len()];
    alloc[0] = demand[0].min(capacity);
    fill(h, ClassId::ROOT, &demand, &mut alloc);
    alloc
}

fn fill(h: &Hierarchy, node: ClassId, demand: &[f64], alloc: &mut [f64]) {
    let kids = h.children_of(node);
    if kids.is_empty() {
        return;
    }
    let budget = alloc[node.index()];
    let take = |level: f64| -> f64 {
        kids.iter()
            .map(|k| demand[k.index()].min(h.weight(*k) as f64 * level))
            .sum()
    };
    let level = if kids.iter().map(|k| demand[k.index()]).sum::<f64>() <= budget {
        f64::INFINITY
    } else {
        let min_w = kids.iter().map(|k| h.weight(*k)).min().unwrap() as f64;
        let (mut lo, mut hi) = (0.0, budget / min_w);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if take(mid) < budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    for &k in kids {
        alloc[k.index()] = demand[k.index()].min(h.weight(k) as f64 * level);
        fill(h, k, demand, alloc);
    }
}
