//! Text and CSV renderings of bounds, allocations and hierarchy checks.

use std::fmt::Write as _;

use linkshare::fairshare::{hmm_fair, FairShare, Request, RequestMap};
use linkshare::hierarchy::weights_to_guarantees;
use linkshare::metrics::{
    alpha_bound_hdrr, alpha_bound_hls, gap_bound_hdrr, gap_bound_hls, gap_bound_hls_table,
    q_star_max,
};
use linkshare::rational::{int, to_f64};
use linkshare::sim::{Scenario, SourceMode};
use linkshare::{ClassId, Nanos, Rational};

/// Every analytic bound of a scenario. HDRR uses the largest leaf Lmax and
/// the configured quantum.
#[derive(Clone, Debug)]
pub struct Bounds {
    pub alpha_hls: Rational,
    pub alpha_hdrr: Rational,
    pub gap_hls_s: Rational,
    pub gap_hls_table_s: Rational,
    /// `None` when the visit-frequency bound overflows.
    pub gap_hdrr_s: Option<Rational>,
    pub q_star_max: u128,
    /// `(i, j, hls, hdrr)` for every sibling pair.
    pub pairs: Vec<(ClassId, ClassId, Rational, Rational)>,
}

pub fn bounds(sc: &Scenario) -> Bounds {
    let h = &sc.hierarchy;
    let lmax = sc.full_lmax();
    let l = h
        .leaves()
        .iter()
        .map(|l| lmax[l.index()])
        .max()
        .unwrap_or(0);
    let q = sc.scheduler.hdrr.quantum;
    let hls = alpha_bound_hls(h, &lmax);
    let hdrr = alpha_bound_hdrr(h, l, q);
    let pairs = hls
        .pairs
        .iter()
        .map(|p| {
            let d = hdrr.pair(p.i, p.j).cloned().unwrap_or_default();
            (p.i, p.j, p.alpha.clone(), d)
        })
        .collect();
    Bounds {
        alpha_hls: hls.alpha,
        alpha_hdrr: hdrr.alpha,
        gap_hls_s: gap_bound_hls(h, &lmax, sc.capacity_bps).gamma,
        gap_hls_table_s: gap_bound_hls_table(h, &lmax, sc.capacity_bps).gamma,
        gap_hdrr_s: gap_bound_hdrr(h, &lmax, sc.capacity_bps, q, u128::MAX)
            .ok()
            .map(|g| g.gamma),
        q_star_max: q_star_max(h, &lmax),
        pairs,
    }
}

fn exact(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl Bounds {
    fn scalars(&self) -> Vec<(&'static str, String, String)> {
        let ms = |r: &Rational| format!("{:.6}", to_f64(r) * 1e3);
        let mut v = vec![
            (
                "alpha_hls_bytes",
                format!("{:.4}", to_f64(&self.alpha_hls)),
                exact(&self.alpha_hls),
            ),
            (
                "alpha_hdrr_bytes",
                format!("{:.4}", to_f64(&self.alpha_hdrr)),
                exact(&self.alpha_hdrr),
            ),
            ("gap_hls_ms", ms(&self.gap_hls_s), exact(&self.gap_hls_s)),
            (
                "gap_hls_table_ms",
                ms(&self.gap_hls_table_s),
                exact(&self.gap_hls_table_s),
            ),
        ];
        match &self.gap_hdrr_s {
            Some(g) => v.push(("gap_hdrr_ms", ms(g), exact(g))),
            None => v.push(("gap_hdrr_ms", "overflow".into(), String::new())),
        }
        v.push((
            "q_star_max_bytes",
            self.q_star_max.to_string(),
            self.q_star_max.to_string(),
        ));
        v
    }

    pub fn render(&self, sc: &Scenario) -> String {
        let h = &sc.hierarchy;
        let mut s = String::new();
        for (name, value, ex) in self.scalars() {
            if ex.is_empty() || ex == value {
                let _ = writeln!(s, "{name:<18} {value}");
            } else {
                let _ = writeln!(s, "{name:<18} {value}  ({ex})");
            }
        }
        if !self.pairs.is_empty() {
            let _ = writeln!(
                s,
                "\n{:<10} {:<10} {:>14} {:>14}",
                "class_i", "class_j", "alpha_hls", "alpha_hdrr"
            );
            for (i, j, a, b) in &self.pairs {
                let _ = writeln!(
                    s,
                    "{:<10} {:<10} {:>14.4} {:>14.4}",
                    h.name(*i),
                    h.name(*j),
                    to_f64(a),
                    to_f64(b)
                );
            }
        }
        s
    }

    /// `metric,class_i,class_j,value,exact`, pair rows after the scalars.
    pub fn csv(&self, sc: &Scenario) -> String {
        let h = &sc.hierarchy;
        let mut s = String::from("metric,class_i,class_j,value,exact\n");
        for (name, value, ex) in self.scalars() {
            let _ = writeln!(s, "{name},,,{value},{ex}");
        }
        for (i, j, a, b) in &self.pairs {
            for (name, r) in [("pair_alpha_hls", a), ("pair_alpha_hdrr", b)] {
                let _ = writeln!(
                    s,
                    "{name},{},{},{:.4},{}",
                    h.name(*i),
                    h.name(*j),
                    to_f64(r),
                    exact(r)
                );
            }
        }
        s
    }
}

/// Fluid allocation with the sources active at `at`:
/// `class_id,request,weight,allocation,fair_share_of_parent`, rates in bit/s.
pub fn alloc_csv(sc: &Scenario, at: Nanos) -> String {
    let h = &sc.hierarchy;
    let mut req = RequestMap::idle(h);
    for src in &sc.sources {
        match src.mode {
            SourceMode::Rate(bps) => {
                req.set(src.leaf, Request::finite(bps));
            }
            _ if src.is_on(at) => {
                req.set(src.leaf, Request::Infinite);
            }
            _ => {}
        }
    }
    let a = hmm_fair(h, &req, &int(sc.capacity_bps)).expect("valid hierarchy");
    let num = |r: &Rational| {
        let v = to_f64(r);
        if r.is_integer() {
            format!("{v:.0}")
        } else {
            format!("{v:.3}")
        }
    };
    let share = |f: Option<&FairShare>| match f {
        Some(FairShare::Finite(r)) => num(r),
        Some(FairShare::Infinite) => "inf".into(),
        None => String::new(),
    };
    let mut s = String::from("class_id,request,weight,allocation,fair_share_of_parent\n");
    for id in h.ids() {
        let request = match &a.requests[id.index()] {
            Request::Infinite => "inf".to_string(),
            Request::Finite(r) => num(r),
        };
        let parent = h.parent_of(id).and_then(|p| a.fair_share(p));
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            h.name(id),
            request,
            h.weight(id),
            num(a.rate(id)),
            share(parent)
        );
    }
    s
}

/// Weights and implied guarantees of every class.
pub fn describe(sc: &Scenario) -> String {
    let h = &sc.hierarchy;
    let g = weights_to_guarantees(h, &int(sc.capacity_bps));
    let mut s = format!(
        "valid: {} classes, {} leaves, superadditive\n{:<12} {:<12} {:>10} {:>16}\n",
        h.len(),
        h.leaves().len(),
        "class",
        "parent",
        "weight",
        "guarantee_bps"
    );
    for &id in h.preorder() {
        let parent = h.parent_of(id).map_or("-", |p| h.name(p));
        let indent = "  ".repeat(h.depth(id) as usize);
        let _ = writeln!(
            s,
            "{:<12} {:<12} {:>10} {:>16.0}",
            format!("{indent}{}", h.name(id)),
            parent,
            h.weight(id),
            to_f64(g.get(id))
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::preset;

    #[test]
    fn fig1_bounds_render_exactly() {
        let sc = preset("fig1").unwrap().scenario().unwrap();
        let b = bounds(&sc);
        let csv = b.csv(&sc);
        assert!(csv.contains("alpha_hls_bytes,,,103.5000,207/2"), "{csv}");
        assert!(csv.contains("alpha_hdrr_bytes,,,1522.5000,3045/2"));
        assert!(csv.contains("q_star_max_bytes,,,9100,9100"));
        assert!(b.render(&sc).contains("class_i"));
    }

    #[test]
    fn fig1_allocation_with_everything_on() {
        let sc = preset("fig1").unwrap().scenario().unwrap();
        let csv = alloc_csv(&sc, Nanos::ZERO);
        assert!(csv.contains("\nA1,inf,100,100000000,"), "{csv}");
        assert!(csv.contains("\nC,inf,400,400000000,"));
    }

    #[test]
    fn describe_lists_guarantees() {
        let sc = preset("fig1").unwrap().scenario().unwrap();
        let d = describe(&sc);
        assert!(d.starts_with("valid: 8 classes, 5 leaves"));
        assert!(d.contains("200000000"));
    }
}
