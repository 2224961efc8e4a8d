//! Built-in scenarios and the checks printed alongside them.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use linkshare::hierarchy::{HierarchyBuilder, Superadditivity};
use linkshare::metrics::{
    beta, gap_bound_hdrr, gap_bound_hls, gap_bound_hls_table, ideal_timeline, RateSeries,
};
use linkshare::rational::to_f64;
use linkshare::sim::Scenario;
use linkshare::{ClassId, Hierarchy, Nanos};

use crate::config::{Config, ConfigError, Overrides};
use crate::output::{rates_csv, simulate, RunError};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.toml")),
    ("exp1", include_str!("../presets/exp1.toml")),
    ("exp2-L", include_str!("../presets/exp2-L.toml")),
    ("exp2-M", include_str!("../presets/exp2-M.toml")),
    ("exp2-H", include_str!("../presets/exp2-H.toml")),
    ("exp3", include_str!("../presets/exp3.toml")),
];

/// Every name `experiment` accepts.
pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).chain(["table3"]).collect()
}

pub fn preset(name: &str) -> Option<Config> {
    let (_, text) = PRESETS.iter().find(|p| p.0.eq_ignore_ascii_case(name))?;
    Some(Config::parse(text).expect("embedded preset parses"))
}

/// One measured quantity next to what it should be.
#[derive(Clone, Debug)]
pub struct Check {
    pub what: String,
    pub measured: f64,
    pub expected: f64,
    pub ok: bool,
}

impl Check {
    fn relative(what: String, measured: f64, expected: f64, tol: f64) -> Check {
        let ok = if expected == 0.0 {
            measured.abs() <= tol
        } else {
            ((measured - expected) / expected).abs() <= tol
        };
        Check {
            what,
            measured,
            expected,
            ok,
        }
    }
}

pub struct Report {
    pub name: String,
    pub scenario: Scenario,
    pub rates: RateSeries,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn csv(&self) -> String {
        rates_csv(&self.rates, &self.scenario.hierarchy)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} under {} ({} s, {} checks)",
            self.name,
            self.scenario.scheduler.kind.as_str(),
            self.scenario.duration.as_secs_f64(),
            self.checks.len()
        );
        let width = self.checks.iter().map(|c| c.what.len()).max().unwrap_or(0);
        for c in &self.checks {
            let err = if c.expected != 0.0 {
                format!("{:+.2}%", 100.0 * (c.measured - c.expected) / c.expected)
            } else {
                String::new()
            };
            let _ = writeln!(
                s,
                "  {:<width$}  {:>10.3}  expected {:>10.3}  {:>8}  {}",
                c.what,
                c.measured,
                c.expected,
                err,
                if c.ok { "ok" } else { "off" }
            );
        }
        s
    }
}

/// Mean rate of every leaf over each stretch with a fixed set of sources,
/// skipping the first window of the stretch, against the fluid allocation.
/// Rates in Mbps; `tol` is relative, or in Mbps where the ideal is zero.
pub fn segment_checks(sc: &Scenario, rates: &RateSeries, tol: f64) -> Vec<Check> {
    let h = &sc.hierarchy;
    let mut out = Vec::new();
    for seg in ideal_timeline(sc).expect("valid scenario") {
        let from = seg.start + rates.window;
        for &l in h.leaves() {
            let Some(m) = rates.mean(l, from, seg.end) else {
                continue;
            };
            let want = to_f64(seg.allocation.rate(l)) / 1e6;
            let label = format!("[{}, {}) {}", secs(seg.start), secs(seg.end), h.name(l));
            let abs_tol = if want == 0.0 {
                tol * sc.capacity_bps as f64 / 1e6
            } else {
                tol
            };
            out.push(Check::relative(label, m / 1e6, want, abs_tol));
        }
    }
    out
}

fn secs(t: Nanos) -> String {
    let s = format!("{:.3}", t.as_secs_f64());
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Runs a scenario preset (not `table3`) with overrides applied.
pub fn run_preset(name: &str, o: &Overrides) -> Result<Report, ExperimentError> {
    let mut cfg = preset(name).ok_or_else(|| ExperimentError::Unknown(name.into()))?;
    cfg.apply(o);
    let sc = cfg.scenario()?;
    let (rates, _) = simulate(&sc, cfg.window(), None)?;
    let mut checks = segment_checks(&sc, &rates, 0.02);
    let h = &sc.hierarchy;
    let id = |n: &str| h.find(n).expect("preset class");
    let lname = name.to_ascii_lowercase();
    if lname.starts_with("exp2") {
        let (from, to) = (
            Nanos::from_secs_f64(10.0) + rates.window,
            Nanos::from_secs_f64(20.0),
        );
        if let (Some(a), Some(b)) = (
            rates.mean(id("A1"), from, to),
            rates.mean(id("B2"), from, to),
        ) {
            checks.push(Check::relative(
                "A1:B2 while C pauses".into(),
                a / b,
                1.0,
                0.02,
            ));
        }
    }
    if lname == "exp3" {
        let parts = [("A", 4.0), ("B1", 5.0), ("C1", 5.0)];
        for seg in ideal_timeline(&sc).expect("valid scenario") {
            if to_f64(seg.allocation.rate(ClassId::ROOT)) == 0.0 {
                continue;
            }
            let from = seg.start + rates.window;
            let means: Vec<f64> = parts
                .iter()
                .filter_map(|(n, _)| rates.mean(id(n), from, seg.end))
                .collect();
            if means.len() < parts.len() {
                continue;
            }
            let total: f64 = means.iter().sum();
            for ((n, share), m) in parts.iter().zip(&means) {
                let label = format!("[{}, {}) {} share", secs(seg.start), secs(seg.end), n);
                checks.push(Check::relative(label, 14.0 * m / total, *share, 0.02));
            }
        }
    }
    Ok(Report {
        name: name.into(),
        scenario: sc,
        rates,
        checks,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("unknown experiment {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Full binary tree of the given depth: root 10, and at every level a left
/// child of weight 3 and a right child of weight 7.
pub fn binary_tree(levels: u32) -> Hierarchy {
    let mut b = HierarchyBuilder::new(10);
    let mut frontier = vec![(ClassId::ROOT, String::new())];
    for _ in 1..levels {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (p, path) in frontier {
            for (side, w) in [('l', 3), ('r', 7)] {
                let name = format!("{path}{side}");
                next.push((b.add(p, &name, w), name));
            }
        }
        frontier = next;
    }
    b.build_with(Superadditivity::Relaxed).expect("binary tree")
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub levels: u32,
    pub leaves: usize,
    pub beta_max: u128,
    /// Without the factor two of the full bound.
    pub hls_table_ms: f64,
    pub hls_ms: f64,
    pub hdrr_ms: f64,
}

/// Gap bounds of binary trees at 1 Gbps with 1500-byte packets and quantum,
/// one worker per depth.
pub fn table3(levels: RangeInclusive<u32>) -> Vec<GapRow> {
    const CAP: u64 = 1_000_000_000;
    let levels: Vec<u32> = levels.collect();
    std::thread::scope(|s| {
        let workers: Vec<_> = levels
            .iter()
            .map(|&l| {
                s.spawn(move || {
                    let h = binary_tree(l);
                    GapRow {
                        levels: l,
                        leaves: h.leaves().len(),
                        beta_max: beta(&h).and_then(|b| b.into_iter().max()).unwrap_or(0),
                        hls_table_ms: gap_bound_hls_table(&h, &[], CAP).millis(),
                        hls_ms: gap_bound_hls(&h, &[], CAP).millis(),
                        hdrr_ms: gap_bound_hdrr(&h, &[], CAP, 1500, u128::MAX)
                            .map_or(f64::NAN, |g| g.millis()),
                    }
                })
            })
            .collect();
        workers
            .into_iter()
            .map(|w| w.join().expect("worker"))
            .collect()
    })
}

pub fn render_table3(rows: &[GapRow]) -> String {
    let mut s = String::from(
        "levels  leaves          beta_max   hls_ms(table)     hls_ms         hdrr_ms\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6}  {:>6}  {:>16}  {:>14.3}  {:>9.3}  {:>14.3}",
            r.levels, r.leaves, r.beta_max, r.hls_table_ms, r.hls_ms, r.hdrr_ms
        );
    }
    s
}
