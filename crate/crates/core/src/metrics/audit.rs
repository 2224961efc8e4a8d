use alloc::vec::Vec;

use super::{
    alpha_bound_hdrr, alpha_bound_hls, gap_bound_hdrr, gap_bound_hls, AlphaMeter, GapMeter,
    PairAlpha, WorkConservationMeter,
};
use crate::alt::Hdrr;
use crate::hierarchy::ClassId;
use crate::hls::{Hls, Violation};
use crate::rational::{ratio, Rational};
use crate::sched::{BuildError, Nanos, SchedulerKind};
use crate::sim::{run_with_scheduler, scheduler_for, Scenario, SimError, Tee};

/// Measured fairness and gaps of one run next to the analytic bounds.
#[derive(Clone, Debug)]
pub struct Audit {
    pub packets: u64,
    /// Broken scheduler invariants (HLS only).
    pub violations: Vec<Violation>,
    /// Measured pair deviation and its bound, if the scheduler has one.
    pub alpha: Vec<(PairAlpha, Option<Rational>)>,
    /// Worst measured gap per leaf.
    pub gaps: Vec<(ClassId, Nanos)>,
    /// Gap bound in seconds, if the scheduler has one.
    pub gap_bound: Option<Rational>,
    pub idle_with_backlog: Vec<(Nanos, Nanos)>,
}

impl Audit {
    pub fn alpha_excess(&self) -> impl Iterator<Item = &(PairAlpha, Option<Rational>)> {
        self.alpha
            .iter()
            .filter(|(m, b)| b.as_ref().is_some_and(|b| &m.alpha > b))
    }

    pub fn gap_excess(&self) -> impl Iterator<Item = &(ClassId, Nanos)> {
        let bound = self.gap_bound.clone();
        self.gaps.iter().filter(move |(_, g)| {
            bound
                .as_ref()
                .is_some_and(|b| ratio(g.0, 1_000_000_000u64) > *b)
        })
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
            && self.alpha_excess().next().is_none()
            && self.gap_excess().next().is_none()
            && self.idle_with_backlog.is_empty()
    }
}

/// Runs the scenario with its configured scheduler and compares the run with
/// the bounds. HLS runs with its invariant self-check enabled.
pub fn audit(sc: &Scenario) -> Result<Audit, SimError> {
    let h = &sc.hierarchy;
    let lmax = sc.full_lmax();
    let mut meters = Tee(
        AlphaMeter::new(h),
        Tee(GapMeter::new(h.len()), WorkConservationMeter::new()),
    );
    let (summary, violations, alpha_bound, gap_bound) = match sc.scheduler.kind {
        SchedulerKind::Hls => {
            let mut s =
                Hls::new(h.clone(), &lmax, sc.scheduler.phase_mode).map_err(BuildError::from)?;
            s.enable_self_check();
            let summary = run_with_scheduler(sc, &mut s, &mut meters)?;
            let b = alpha_bound_hls(h, &lmax);
            let g = gap_bound_hls(h, &lmax, sc.capacity_bps);
            (summary, s.violations().to_vec(), Some(b), Some(g.gamma))
        }
        SchedulerKind::Hdrr => {
            let mut s =
                Hdrr::new(h.clone(), &lmax, &sc.scheduler.hdrr).map_err(BuildError::from)?;
            let summary = run_with_scheduler(sc, &mut s, &mut meters)?;
            let l = h
                .leaves()
                .iter()
                .map(|l| lmax[l.index()])
                .max()
                .unwrap_or(0);
            let q = sc.scheduler.hdrr.quantum;
            let b = alpha_bound_hdrr(h, l, q);
            let g = gap_bound_hdrr(h, &lmax, sc.capacity_bps, q, u128::MAX)
                .ok()
                .map(|g| g.gamma);
            (summary, Vec::new(), Some(b), g)
        }
        _ => {
            let mut s = scheduler_for(sc)?;
            let summary = run_with_scheduler(sc, s.as_mut(), &mut meters)?;
            (summary, Vec::new(), None, None)
        }
    };
    let Tee(alpha, Tee(gaps, work)) = meters;
    let alpha = alpha
        .finish()
        .into_iter()
        .map(|m| {
            let b = alpha_bound.as_ref().and_then(|b| b.pair(m.i, m.j).cloned());
            (m, b)
        })
        .collect();
    let gaps = gaps.finish();
    Ok(Audit {
        packets: summary.packets,
        violations,
        alpha,
        gaps: h.leaves().iter().map(|&l| (l, gaps[l.index()])).collect(),
        gap_bound,
        idle_with_backlog: work.finish(),
    })
}
