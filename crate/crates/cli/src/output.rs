//! Rate CSV, rate-vs-time SVG charts and NDJSON traces.

use std::fmt::Write as _;
use std::io::{self, Write};

use linkshare::metrics::{RateMeter, RateSeries};
use linkshare::sim::{run_with, RunSummary, Scenario, SimError, Tee, TraceEvent, TraceSink};
use linkshare::{ClassId, Hierarchy, Nanos, RoundKind};
use serde::Serialize;

pub const CSV_HEADER: &str = "time_s,class,rate_bps";

/// Rates of every non-root class, one row per window and class, windows keyed
/// by their start time.
pub fn rates_csv(rates: &RateSeries, h: &Hierarchy) -> String {
    let mut out = String::with_capacity(rates.starts.len() * h.len() * 24);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (k, start) in rates.starts.iter().enumerate() {
        for id in h.ids().skip(1) {
            let r = rates.rates[id.index()][k].round() as u64;
            let _ = writeln!(out, "{:.3},{},{}", start.as_secs_f64(), h.name(id), r);
        }
    }
    out
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];

/// Line chart of windowed rates in Mbps: one solid series per leaf and a
/// dashed gray series per internal class.
pub fn rates_svg(rates: &RateSeries, h: &Hierarchy, capacity_bps: u64, title: &str) -> String {
    let (w, ht) = (960.0, 480.0);
    let (left, right, top, bottom) = (64.0, 150.0, 36.0, 48.0);
    let pw = w - left - right;
    let ph = ht - top - bottom;
    let end = rates
        .starts
        .last()
        .map_or(1.0, |s| (*s + rates.window).as_secs_f64())
        .max(1e-9);
    let ymax = capacity_bps as f64 / 1e6;
    let x = |t: f64| left + pw * t / end;
    let y = |mbps: f64| top + ph * (1.0 - (mbps / ymax).clamp(0.0, 1.05));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{ht}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );

    for k in 0..=5 {
        let v = ymax * k as f64 / 5.0;
        let yy = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#e0e0e0"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.0}</text>"##,
            left + pw,
            left - 6.0,
            yy + 4.0
        );
    }
    let step = nice_step(end / 8.0);
    let mut t = 0.0;
    while t <= end + 1e-9 {
        let xx = x(t);
        let _ = writeln!(
            s,
            r##"<line x1="{xx:.1}" y1="{:.1}" x2="{xx:.1}" y2="{:.1}" stroke="#999"/><text x="{xx:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0,
            trim(t)
        );
        t += step;
    }
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (s)</text>"#,
        left + pw / 2.0,
        ht - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">rate (Mbps)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    let internal = h.ids().skip(1).filter(|&id| !h.is_leaf(id));
    let series = internal.chain(h.leaves().iter().copied());
    let mut color = 0;
    for (legend, id) in series.enumerate() {
        let pts: Vec<String> = rates
            .starts
            .iter()
            .enumerate()
            .map(|(k, st)| {
                let mid = st.as_secs_f64() + rates.window.as_secs_f64() / 2.0;
                format!("{:.1},{:.1}", x(mid), y(rates.rates[id.index()][k] / 1e6))
            })
            .collect();
        let style = if h.is_leaf(id) {
            let c = PALETTE[color % PALETTE.len()];
            color += 1;
            format!(r#"stroke="{c}" stroke-width="1.6""#)
        } else {
            r##"stroke="#888" stroke-width="1.2" stroke-dasharray="6 4""##.to_string()
        };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" {style} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 8.0 + 18.0 * legend as f64;
        let lx = left + pw + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" {style}/><text x="{}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(h.name(id))
        );
    }
    s.push_str("</svg>\n");
    s
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.max(1e-9).log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|&v| v >= raw)
        .unwrap_or(10.0 * mag)
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[derive(Serialize)]
struct Record<'a> {
    event: &'static str,
    time_ns: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seq: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    round: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backlogged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conserved: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_star: Option<i64>,
}

impl Record<'_> {
    fn new(event: &'static str, t: Nanos) -> Self {
        Record {
            event,
            time_ns: t.0,
            class: None,
            size: None,
            seq: None,
            round: None,
            kind: None,
            backlogged: None,
            conserved: None,
            q_star: None,
        }
    }
}

/// Writes one JSON object per event.
pub struct NdjsonSink<'h, W: Write> {
    out: W,
    h: &'h Hierarchy,
    error: Option<io::Error>,
}

impl<'h, W: Write> NdjsonSink<'h, W> {
    pub fn new(out: W, h: &'h Hierarchy) -> Self {
        NdjsonSink {
            out,
            h,
            error: None,
        }
    }

    pub fn finish(mut self) -> io::Result<()> {
        match self.error.take() {
            Some(e) => Err(e),
            None => self.out.flush(),
        }
    }
}

impl<W: Write> TraceSink for NdjsonSink<'_, W> {
    fn record(&mut self, ev: &TraceEvent) {
        if self.error.is_some() {
            return;
        }
        let name = |id: ClassId| Some(self.h.name(id));
        let r = match *ev {
            TraceEvent::Arrival { t, leaf, size, seq } => Record {
                class: name(leaf),
                size: Some(size),
                seq: Some(seq),
                ..Record::new("arrival", t)
            },
            TraceEvent::TxStart { t, leaf, size, seq } => Record {
                class: name(leaf),
                size: Some(size),
                seq: Some(seq),
                ..Record::new("tx_start", t)
            },
            TraceEvent::TxEnd { t, leaf, size, seq } => Record {
                class: name(leaf),
                size: Some(size),
                seq: Some(seq),
                ..Record::new("tx_end", t)
            },
            TraceEvent::VisitStart { t, leaf, round } => Record {
                class: name(leaf),
                round: Some(round),
                ..Record::new("visit_start", t)
            },
            TraceEvent::VisitEnd {
                t,
                leaf,
                round,
                backlogged,
            } => Record {
                class: name(leaf),
                round: Some(round),
                backlogged: Some(backlogged),
                ..Record::new("visit_end", t)
            },
            TraceEvent::RoundStart { t, kind, round } => Record {
                round: Some(round),
                kind: Some(match kind {
                    RoundKind::Main => "main",
                    RoundKind::Surplus => "surplus",
                }),
                ..Record::new("round_start", t)
            },
            TraceEvent::Snapshot { t, digest } => Record {
                round: Some(digest.round),
                conserved: Some(digest.conserved),
                q_star: Some(digest.q_star),
                ..Record::new("snapshot", t)
            },
            TraceEvent::BacklogChange {
                t,
                class,
                backlogged,
            } => Record {
                class: name(class),
                backlogged: Some(backlogged),
                ..Record::new("backlog", t)
            },
        };
        let res = serde_json::to_writer(&mut self.out, &r)
            .map_err(io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"));
        if let Err(e) = res {
            self.error = Some(e);
        }
    }
}

struct Quiet<S>(S);

impl<S: TraceSink> TraceSink for Quiet<S> {
    fn record(&mut self, ev: &TraceEvent) {
        self.0.record(ev)
    }

    fn wants_marks(&self) -> bool {
        false
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Runs a scenario, measuring windowed rates and optionally streaming every
/// event to `trace`.
pub fn simulate(
    sc: &Scenario,
    window: Nanos,
    trace: Option<&mut dyn Write>,
) -> Result<(RateSeries, RunSummary), RunError> {
    let h = &sc.hierarchy;
    let mut meter = RateMeter::new(h, window);
    let summary = match trace {
        Some(w) => {
            let mut sink = NdjsonSink::new(w, h);
            let summary = run_with(sc, &mut Tee(&mut meter, &mut sink))?;
            sink.finish()?;
            summary
        }
        None => run_with(sc, &mut Quiet(&mut meter))?,
    };
    Ok((meter.finish(sc.duration), summary))
}
