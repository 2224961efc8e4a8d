//! Analytic fairness and gap bounds, and the matching measurements taken
//! from simulation traces.

mod audit;
mod bounds;
mod empirical;

pub use audit::{audit, Audit};
pub use bounds::{
    alpha_bound_hdrr, alpha_bound_hls, beta, gap_bound_hdrr, gap_bound_hls, gap_bound_hls_table,
    q_star_max, FairnessBound, GapBound, PairBound,
};
pub use empirical::{
    empirical_alpha, empirical_gap, ideal_timeline, idle_while_backlogged, windowed_rates,
    AlphaMeter, GapMeter, PairAlpha, RateMeter, RateSeries, Segment, WorkConservationMeter,
};
