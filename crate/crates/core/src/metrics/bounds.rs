use alloc::vec;
use alloc::vec::Vec;

use crate::alt::AltError;
use crate::hierarchy::{ClassId, Hierarchy};
use crate::hls::DEFAULT_LMAX;
use crate::rational::{int, ratio, to_f64, Rational};

/// Bound on `|D_i/w_i - D_j/w_j|` for one pair of distinct siblings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairBound {
    pub i: ClassId,
    pub j: ClassId,
    pub alpha: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FairnessBound {
    pub pairs: Vec<PairBound>,
    /// Largest pair bound; zero when no class has a sibling.
    pub alpha: Rational,
    /// Cap on a class's aggregate balance at the start of a main round,
    /// indexed by class id (HLS only).
    pub main_round_cap: Vec<Rational>,
    /// Cap on a class's aggregate balance at any time, indexed by class id
    /// (HLS only).
    pub all_time_cap: Vec<Rational>,
    /// The child of the root each class descends from, indexed by class id.
    pub root_child: Vec<Option<ClassId>>,
}

impl FairnessBound {
    pub fn pair(&self, i: ClassId, j: ClassId) -> Option<&Rational> {
        self.pairs
            .iter()
            .find(|p| (p.i, p.j) == (i, j) || (p.i, p.j) == (j, i))
            .map(|p| &p.alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapBound {
    /// The gap in seconds, exact.
    pub gamma: Rational,
    /// Sum of all non-root weights, read as bytes.
    pub weight_sum: u128,
    pub lmax_sum: u128,
    pub capacity_bps: u64,
    /// Visit-frequency bound per class id (HDRR only; zero for non-leaves).
    pub beta: Vec<u128>,
}

impl GapBound {
    pub fn seconds(&self) -> f64 {
        to_f64(&self.gamma)
    }

    pub fn millis(&self) -> f64 {
        self.seconds() * 1e3
    }
}

fn lmax_at(lmax: &[u32], id: ClassId) -> u32 {
    lmax.get(id.index()).copied().unwrap_or(DEFAULT_LMAX)
}

fn root_children(h: &Hierarchy) -> Vec<Option<ClassId>> {
    let mut rc = vec![None; h.len()];
    for &id in h.preorder() {
        if let Some(p) = h.parent_of(id) {
            rc[id.index()] = if p == ClassId::ROOT {
                Some(id)
            } else {
                rc[p.index()]
            };
        }
    }
    rc
}

fn sibling_pairs(h: &Hierarchy) -> Vec<(ClassId, ClassId)> {
    let mut out = Vec::new();
    for &id in h.preorder() {
        let c = h.children_of(id);
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                out.push((c[a], c[b]));
            }
        }
    }
    out
}

/// Worst-case fairness of HLS. `lmax` is indexed by class id (missing
/// entries default to 1500). Weights count as bytes.
pub fn alpha_bound_hls(h: &Hierarchy, lmax: &[u32]) -> FairnessBound {
    let n = h.len();
    // main-round cap: Lmax - 1 for leaves, the weights plus leaf Lmax of the
    // whole subtree for internal classes
    let mut cap = vec![int(0); n];
    let mut subtree = vec![0u128; n];
    for &id in h.preorder().iter().rev() {
        if id == ClassId::ROOT {
            continue;
        }
        if h.is_leaf(id) {
            cap[id.index()] = int(lmax_at(lmax, id) as i64 - 1);
            subtree[id.index()] = lmax_at(lmax, id) as u128;
        } else {
            let mut s = 0u128;
            for &c in h.children_of(id) {
                s += h.weight(c) as u128 + subtree[c.index()];
            }
            subtree[id.index()] = s;
            cap[id.index()] = int(s);
        }
    }
    let rc = root_children(h);
    let worst = h
        .children_of(ClassId::ROOT)
        .iter()
        .map(|&j| (int(h.weight(j)) + &cap[j.index()]) / int(h.weight(j)))
        .max()
        .unwrap_or_else(|| int(0));
    let mut all_time = vec![int(0); n];
    for id in h.ids().skip(1) {
        let r = rc[id.index()].expect("non-root class has a root child");
        all_time[id.index()] = &cap[r.index()] + int(h.weight(r)) * &worst;
    }
    let pairs: Vec<PairBound> = sibling_pairs(h)
        .into_iter()
        .map(|(i, j)| PairBound {
            i,
            j,
            alpha: &all_time[i.index()] / int(h.weight(i))
                + &all_time[j.index()] / int(h.weight(j)),
        })
        .collect();
    let alpha = pairs
        .iter()
        .map(|p| p.alpha.clone())
        .max()
        .unwrap_or_else(|| int(0));
    FairnessBound {
        pairs,
        alpha,
        main_round_cap: cap,
        all_time_cap: all_time,
        root_child: rc,
    }
}

/// Worst-case fairness of HDRR with quantum `q` and maximum packet size
/// `lmax` across all leaves.
pub fn alpha_bound_hdrr(h: &Hierarchy, lmax: u32, q: u32) -> FairnessBound {
    let pairs: Vec<PairBound> = sibling_pairs(h)
        .into_iter()
        .map(|(i, j)| PairBound {
            i,
            j,
            alpha: ratio(lmax, h.weight(i)) + ratio(lmax, h.weight(j)) + int(q),
        })
        .collect();
    let alpha = pairs
        .iter()
        .map(|p| p.alpha.clone())
        .max()
        .unwrap_or_else(|| int(0));
    FairnessBound {
        pairs,
        alpha,
        main_round_cap: Vec::new(),
        all_time_cap: Vec::new(),
        root_child: root_children(h),
    }
}

/// Largest possible round size: every class and leaf active.
pub fn q_star_max(h: &Hierarchy, lmax: &[u32]) -> u128 {
    let w: u128 = h.ids().skip(1).map(|id| h.weight(id) as u128).sum();
    let l: u128 = h.leaves().iter().map(|&id| lmax_at(lmax, id) as u128).sum();
    w + l
}

fn hls_gap(h: &Hierarchy, lmax: &[u32], capacity_bps: u64, factor: u32) -> GapBound {
    let weight_sum: u128 = h.ids().skip(1).map(|id| h.weight(id) as u128).sum();
    let lmax_sum: u128 = h.leaves().iter().map(|&id| lmax_at(lmax, id) as u128).sum();
    GapBound {
        gamma: ratio(factor as u128 * 8 * (weight_sum + lmax_sum), capacity_bps),
        weight_sum,
        lmax_sum,
        capacity_bps,
        beta: Vec::new(),
    }
}

/// Longest time a backlogged HLS leaf waits between visits: two maximal
/// rounds at link speed.
pub fn gap_bound_hls(h: &Hierarchy, lmax: &[u32], capacity_bps: u64) -> GapBound {
    hls_gap(h, lmax, capacity_bps, 2)
}

/// One maximal round at link speed, the convention behind published
/// per-depth tables of the HLS gap.
pub fn gap_bound_hls_table(h: &Hierarchy, lmax: &[u32], capacity_bps: u64) -> GapBound {
    hls_gap(h, lmax, capacity_bps, 1)
}

/// Visit-frequency bound of every leaf: the product over its ancestors of
/// their children's weight sums. `None` on `u128` overflow.
pub fn beta(h: &Hierarchy) -> Option<Vec<u128>> {
    let mut out = vec![0u128; h.len()];
    for &l in h.leaves() {
        let mut b: u128 = 1;
        for a in h.ancestors_of(l) {
            b = b.checked_mul(h.child_weight_sum(a) as u128)?;
        }
        out[l.index()] = b;
    }
    Some(out)
}

/// Longest time a backlogged HDRR leaf waits between visits. Fails when some
/// leaf's visit-frequency bound exceeds `beta_cap`.
pub fn gap_bound_hdrr(
    h: &Hierarchy,
    lmax: &[u32],
    capacity_bps: u64,
    q: u32,
    beta_cap: u128,
) -> Result<GapBound, AltError> {
    let too_large = |period| AltError::CycleTooLarge {
        period,
        cap: beta_cap.min(u64::MAX as u128) as u64,
    };
    let beta = beta(h).ok_or(too_large(u128::MAX))?;
    let worst = beta.iter().copied().max().unwrap_or(1);
    if worst > beta_cap {
        return Err(too_large(worst));
    }
    let lmax_sum: u128 = h.leaves().iter().map(|&id| lmax_at(lmax, id) as u128).sum();
    let weight_sum: u128 = h.ids().skip(1).map(|id| h.weight(id) as u128).sum();
    let bytes = Rational::from(num_bigint::BigInt::from(worst.max(1) - 1)) * int(q) + int(lmax_sum);
    Ok(GapBound {
        gamma: bytes * int(8) / int(capacity_bps),
        weight_sum,
        lmax_sum,
        capacity_bps,
        beta,
    })
}
