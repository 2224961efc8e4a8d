//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! version = 1
//! capacity_bps = 1_000_000_000
//! duration_s = 25.0
//! seed = 0
//! root_weight = 1000          # optional, defaults to the sum of its children
//!
//! [scheduler]
//! kind = "hls"                # hls | drr | hdrr | htb
//! phase_mode = "interleaved"  # or "phase_separated" (HLS only)
//!
//! [[class]]
//! id = "A"
//! weight = 300                # or guarantee_bps, uniformly across the file
//!
//! [[class]]
//! id = "A1"
//! parent = "A"                # omitted means the root
//! weight = 100
//!
//! [[source]]
//! class = "A1"
//! packet_size = 1000
//! off = [[4.0, 7.0]]          # or on = [...], period_on_s/period_off_s, rate_bps
//!
//! [output]
//! csv = "rates.csv"
//! window_s = 0.2
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use linkshare::hierarchy::{guarantees_to_weights, GuaranteeMap, NodeSpec, Superadditivity};
use linkshare::hls::PhaseMode;
use linkshare::rational::int;
use linkshare::sim::{PacketSize, Scenario, SimError, Source, SourceMode};
use linkshare::{ClassId, Hierarchy, HierarchyError, Nanos, SchedulerKind};
use serde::Deserialize;

pub const VERSION: u32 = 1;
pub const ROOT: &str = "root";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub capacity_bps: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub root_weight: Option<u64>,
    #[serde(default)]
    pub scheduler: SchedulerSection,
    #[serde(default, rename = "class")]
    pub classes: Vec<ClassSpec>,
    #[serde(default, rename = "source")]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub id: String,
    pub parent: Option<String>,
    pub weight: Option<u64>,
    pub guarantee_bps: Option<u64>,
    /// Largest packet the class may send, in bytes.
    pub lmax: Option<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub class: String,
    #[serde(default = "default_packet_size")]
    pub packet_size: u32,
    /// Draw sizes uniformly from `packet_size..=packet_size_max`.
    pub packet_size_max: Option<u32>,
    pub rate_bps: Option<u64>,
    pub on: Option<Vec<[f64; 2]>>,
    pub off: Option<Vec<[f64; 2]>>,
    pub period_on_s: Option<f64>,
    pub period_off_s: Option<f64>,
}

fn default_packet_size() -> u32 {
    1000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerSection {
    pub kind: String,
    pub phase_mode: String,
    /// HDRR quantum in bytes.
    pub quantum: u32,
    /// HTB bucket depth in milliseconds of the class rate.
    pub htb_burst_ms: f64,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        SchedulerSection {
            kind: "hls".into(),
            phase_mode: "interleaved".into(),
            quantum: 1500,
            htb_burst_ms: 10.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub window_s: f64,
    pub snapshot_period_s: Option<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            csv: None,
            svg: None,
            trace: None,
            window_s: 0.2,
            snapshot_period_s: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error(transparent)]
    Parse(#[from] toml::de::Error),
    #[error("unsupported config version {0}, expected {VERSION}")]
    Version(u32),
    #[error("class {0}: weights and guarantees cannot be mixed; use one of them for every class")]
    MixedSpecification(String),
    #[error("class {0} needs a weight or a guarantee")]
    MissingShare(String),
    #[error("class {0} is defined twice")]
    DuplicateClass(String),
    #[error("class {class} names unknown parent {parent}")]
    UnknownParent { class: String, parent: String },
    #[error("source refers to unknown class {0}")]
    UnknownClass(String),
    #[error("source of {class}: {reason}")]
    Source { class: String, reason: String },
    #[error("unknown scheduler {0:?}, expected hls, drr, hdrr or htb")]
    UnknownScheduler(String),
    #[error("unknown phase mode {0:?}, expected interleaved or phase_separated")]
    UnknownPhaseMode(String),
    #[error("{what} must be a positive number of seconds")]
    BadTime { what: &'static str },
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("{err}")]
    Hierarchy { class: String, err: HierarchyError },
    #[error(transparent)]
    Scenario(#[from] SimError),
}

/// Command-line replacements for fields of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scheduler: Option<String>,
    pub duration_s: Option<f64>,
    pub window_s: Option<f64>,
    pub seed: Option<u64>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub snapshot_period_s: Option<f64>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        if cfg.version != VERSION {
            return Err(ConfigError::Version(cfg.version));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|err| ConfigError::Io {
            path: path.to_path_buf(),
            err,
        })?;
        Config::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = &o.scheduler {
            self.scheduler.kind = s.clone();
        }
        if let Some(d) = o.duration_s {
            self.duration_s = d;
        }
        if let Some(w) = o.window_s {
            self.output.window_s = w;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.csv.is_some() {
            self.output.csv = o.csv.clone();
        }
        if o.svg.is_some() {
            self.output.svg = o.svg.clone();
        }
        if o.trace.is_some() {
            self.output.trace = o.trace.clone();
        }
        if o.snapshot_period_s.is_some() {
            self.output.snapshot_period_s = o.snapshot_period_s;
        }
    }

    /// Builds the class tree. Guarantees are divided by the greatest common
    /// divisor of all guarantees and the capacity before they become weights.
    pub fn hierarchy(&self) -> Result<Hierarchy, ConfigError> {
        if self.capacity_bps == 0 {
            return Err(ConfigError::ZeroCapacity);
        }
        let mut ids: HashMap<&str, u32> = HashMap::from([(ROOT, 0)]);
        for (k, c) in self.classes.iter().enumerate() {
            if ids.insert(c.id.as_str(), k as u32 + 1).is_some() {
                return Err(ConfigError::DuplicateClass(c.id.clone()));
            }
        }
        let by_guarantee = self
            .classes
            .first()
            .is_some_and(|c| c.guarantee_bps.is_some());
        let mut shares = Vec::with_capacity(self.classes.len());
        for c in &self.classes {
            let share = match (c.weight, c.guarantee_bps) {
                (Some(_), Some(_)) => return Err(ConfigError::MixedSpecification(c.id.clone())),
                (None, None) => return Err(ConfigError::MissingShare(c.id.clone())),
                (Some(w), None) if !by_guarantee => w,
                (None, Some(g)) if by_guarantee => g,
                _ => return Err(ConfigError::MixedSpecification(c.id.clone())),
            };
            shares.push(share);
        }
        if by_guarantee && self.root_weight.is_some() {
            return Err(ConfigError::MixedSpecification(ROOT.into()));
        }

        let mut specs = vec![NodeSpec::new(0, None, 1).named(ROOT)];
        let mut top = 0u64;
        for (c, &share) in self.classes.iter().zip(&shares) {
            let parent = c.parent.as_deref().unwrap_or(ROOT);
            let &p = ids.get(parent).ok_or_else(|| ConfigError::UnknownParent {
                class: c.id.clone(),
                parent: parent.into(),
            })?;
            if p == 0 {
                top = top.saturating_add(share);
            }
            specs.push(NodeSpec::new(ids[c.id.as_str()], Some(p), share).named(c.id.clone()));
        }
        let names: Vec<String> = specs
            .iter()
            .map(|s| s.name.clone().unwrap_or_default())
            .collect();
        let name_of = |id: ClassId| names.get(id.index()).cloned().unwrap_or_default();
        let wrap = |e: HierarchyError| {
            let id = match &e {
                HierarchyError::SuperadditivityViolated { class, .. } => *class,
                HierarchyError::NonPositiveWeight(c) | HierarchyError::CycleDetected(c) => *c,
                HierarchyError::NonIntegerGuarantee(c) => *c,
                _ => ClassId::ROOT,
            };
            ConfigError::Hierarchy {
                class: name_of(id),
                err: e,
            }
        };

        if !by_guarantee {
            specs[0].weight = self.root_weight.unwrap_or(top.max(1));
            return Hierarchy::build(&specs).map_err(wrap);
        }

        let g = shares.iter().fold(self.capacity_bps, |a, &b| gcd(a, b));
        specs[0].weight = self.capacity_bps / g;
        for s in specs.iter_mut().skip(1) {
            s.weight /= g;
        }
        let template = Hierarchy::build_with(&specs, Superadditivity::Relaxed).map_err(wrap)?;
        let map = GuaranteeMap {
            capacity: int(self.capacity_bps / g),
            guarantees: template.weights().iter().map(|&w| int(w)).collect(),
        };
        guarantees_to_weights(&template, &map).map_err(wrap)
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let h = self.hierarchy()?;
        let duration = seconds(self.duration_s, "duration_s", true)?;
        let mut sc = Scenario::new(h.clone(), self.capacity_bps, duration);
        sc.seed = self.seed;
        sc.scheduler.kind = SchedulerKind::parse(&self.scheduler.kind)
            .ok_or_else(|| ConfigError::UnknownScheduler(self.scheduler.kind.clone()))?;
        sc.scheduler.phase_mode = match self.scheduler.phase_mode.as_str() {
            "interleaved" => PhaseMode::Interleaved,
            "phase_separated" => PhaseMode::PhaseSeparated,
            other => return Err(ConfigError::UnknownPhaseMode(other.into())),
        };
        sc.scheduler.hdrr.quantum = self.scheduler.quantum;
        sc.scheduler.htb.burst = seconds(self.scheduler.htb_burst_ms / 1e3, "htb_burst_ms", false)?;
        if let Some(p) = self.output.snapshot_period_s {
            sc.snapshot_period = Some(seconds(p, "snapshot_period_s", false)?);
        }
        seconds(self.output.window_s, "window_s", false)?;

        if self.classes.iter().any(|c| c.lmax.is_some()) {
            let mut lmax = sc.full_lmax();
            for c in &self.classes {
                if let Some(l) = c.lmax {
                    lmax[h.find(&c.id).unwrap().index()] = l;
                }
            }
            sc.lmax = lmax;
        }

        for s in &self.sources {
            let leaf = h.find(&s.class).filter(|&id| id != ClassId::ROOT);
            let leaf = leaf.ok_or_else(|| ConfigError::UnknownClass(s.class.clone()))?;
            sc.sources.push(s.to_source(leaf, duration)?);
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn window(&self) -> Nanos {
        Nanos::from_secs_f64(self.output.window_s)
    }
}

impl SourceSpec {
    fn to_source(&self, leaf: ClassId, duration: Nanos) -> Result<Source, ConfigError> {
        let bad = |reason: &str| ConfigError::Source {
            class: self.class.clone(),
            reason: reason.into(),
        };
        let size = match self.packet_size_max {
            None => PacketSize::Fixed(self.packet_size),
            Some(max) if max >= self.packet_size => PacketSize::Uniform {
                min: self.packet_size,
                max,
            },
            Some(_) => return Err(bad("packet_size_max is below packet_size")),
        };
        let styles = [
            self.rate_bps.is_some(),
            self.on.is_some(),
            self.off.is_some(),
            self.period_on_s.is_some() || self.period_off_s.is_some(),
        ];
        if styles.iter().filter(|&&s| s).count() > 1 {
            return Err(bad(
                "use only one of rate_bps, on, off and period_on_s/period_off_s",
            ));
        }
        let ns = |v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(Nanos::from_secs_f64(v))
            } else {
                Err(bad("times must be non-negative seconds"))
            }
        };
        let intervals = |list: &[[f64; 2]]| -> Result<Vec<(Nanos, Nanos)>, ConfigError> {
            list.iter().map(|[a, b]| Ok((ns(*a)?, ns(*b)?))).collect()
        };
        let mode = if let Some(r) = self.rate_bps {
            SourceMode::Rate(r)
        } else if let Some(on) = &self.on {
            SourceMode::OnOff(intervals(on)?)
        } else if let Some(off) = &self.off {
            let mut on = Vec::new();
            let mut t = Nanos::ZERO;
            for (s, e) in intervals(off)? {
                if s < t || e < s {
                    return Err(bad("off-intervals must be sorted and disjoint"));
                }
                if s > t {
                    on.push((t, s.min(duration)));
                }
                t = e;
            }
            if t < duration {
                on.push((t, duration));
            }
            on.retain(|(s, e)| s < e);
            SourceMode::OnOff(on)
        } else if self.period_on_s.is_some() || self.period_off_s.is_some() {
            let (Some(a), Some(b)) = (self.period_on_s, self.period_off_s) else {
                return Err(bad("period_on_s and period_off_s go together"));
            };
            let (a, b) = (ns(a)?, ns(b)?);
            if a == Nanos::ZERO {
                return Err(bad("period_on_s must be positive"));
            }
            let mut on = Vec::new();
            let mut t = Nanos::ZERO;
            while t < duration {
                on.push((t, (t + a).min(duration)));
                t = t + a + b;
            }
            SourceMode::OnOff(on)
        } else {
            SourceMode::Saturated
        };
        Ok(Source { leaf, size, mode })
    }
}

fn seconds(v: f64, what: &'static str, allow_zero: bool) -> Result<Nanos, ConfigError> {
    if !v.is_finite() || v < 0.0 || (!allow_zero && v == 0.0) {
        return Err(ConfigError::BadTime { what });
    }
    Ok(Nanos::from_secs_f64(v))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
