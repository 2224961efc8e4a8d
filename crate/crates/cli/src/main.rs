use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use linkshare::Nanos;
use linkshare_cli::config::{Config, Overrides};
use linkshare_cli::experiment::{self, render_table3, run_preset, table3};
use linkshare_cli::output::{rates_csv, rates_svg, simulate};
use linkshare_cli::report::{alloc_csv, bounds, describe};
use log::info;

/// Hierarchical link-sharing simulator.
#[derive(Parser)]
#[command(name = "hls", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario file or preset and write rates.
    Run {
        /// Path to a TOML scenario, or a preset name.
        config: String,
        #[command(flatten)]
        o: Flags,
    },
    /// Print fairness and gap bounds.
    Bounds {
        config: String,
        /// Also write the bounds as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check the class hierarchy.
    Validate { config: String },
    /// Print the fluid max-min allocation at one instant as CSV.
    Alloc {
        config: String,
        /// Time in seconds at which sources are sampled.
        #[arg(long, default_value_t = 0.0)]
        at: f64,
    },
    /// Run a built-in experiment and compare it with the fluid allocation.
    /// `list` prints the names.
    Experiment {
        name: String,
        #[command(flatten)]
        o: Flags,
    },
}

#[derive(Args)]
struct Flags {
    /// hls, drr, hdrr or htb.
    #[arg(long)]
    scheduler: Option<String>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Rate window in seconds.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rate CSV (time_s,class,rate_bps).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Rate-vs-time chart.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Newline-delimited JSON event trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Seconds between scheduler state snapshots in the trace.
    #[arg(long)]
    snapshot_period: Option<f64>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides {
            scheduler: f.scheduler,
            duration_s: f.duration,
            window_s: f.window,
            seed: f.seed,
            csv: f.csv,
            svg: f.svg,
            trace: f.trace,
            snapshot_period_s: f.snapshot_period,
        }
    }
}

fn load(spec: &str) -> Result<Config> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(cfg) = experiment::preset(spec) {
            return Ok(cfg);
        }
    }
    Ok(Config::load(path)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(spec: &str, o: Overrides) -> Result<()> {
    let mut cfg = load(spec)?;
    cfg.apply(&o);
    let sc = cfg.scenario()?;
    info!(
        "{} on {} classes for {} s",
        sc.scheduler.kind.as_str(),
        sc.hierarchy.len(),
        sc.duration.as_secs_f64()
    );
    let started = Instant::now();
    let mut trace = match &cfg.output.trace {
        Some(p) => Some(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => None,
    };
    let (rates, summary) = simulate(
        &sc,
        cfg.window(),
        trace.as_mut().map(|w| w as &mut dyn Write),
    )?;
    info!("{} packets in {:.2?}", summary.packets, started.elapsed());

    let csv = rates_csv(&rates, &sc.hierarchy);
    match &cfg.output.csv {
        Some(p) => write(p, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = &cfg.output.svg {
        let title = format!("{spec} ({})", sc.scheduler.kind.as_str());
        write(
            p,
            &rates_svg(&rates, &sc.hierarchy, sc.capacity_bps, &title),
        )?;
    }
    if cfg.output.csv.is_some() {
        let h = &sc.hierarchy;
        let total: u64 = summary.bytes.iter().sum();
        println!("{} packets, {} bytes", summary.packets, total);
        for &l in h.leaves() {
            let b = summary.bytes[l.index()];
            let share = if total > 0 {
                100.0 * b as f64 / total as f64
            } else {
                0.0
            };
            println!("  {:<10} {:>14} bytes  {:>6.2}%", h.name(l), b, share);
        }
    }
    Ok(())
}

fn run_experiment(name: &str, o: Overrides) -> Result<()> {
    if name == "list" {
        for n in experiment::names() {
            println!("{n}");
        }
        return Ok(());
    }
    if name.eq_ignore_ascii_case("table3") {
        print!("{}", render_table3(&table3(4..=11)));
        return Ok(());
    }
    let (csv, svg) = (o.csv.clone(), o.svg.clone());
    let r = run_preset(name, &o)?;
    print!("{}", r.render());
    if let Some(p) = csv {
        write(&p, &r.csv())?;
    }
    if let Some(p) = svg {
        let title = format!("{name} ({})", r.scenario.scheduler.kind.as_str());
        write(
            &p,
            &rates_svg(
                &r.rates,
                &r.scenario.hierarchy,
                r.scenario.capacity_bps,
                &title,
            ),
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HLS_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run { config, o } => run(&config, o.into()),
        Cmd::Experiment { name, o } => run_experiment(&name, o.into()),
        Cmd::Bounds { config, csv } => (|| {
            let sc = load(&config)?.scenario()?;
            let b = bounds(&sc);
            print!("{}", b.render(&sc));
            if let Some(p) = csv {
                write(&p, &b.csv(&sc))?;
            }
            Ok(())
        })(),
        Cmd::Validate { config } => load(&config)
            .and_then(|c| Ok(c.scenario()?))
            .map(|sc| print!("{}", describe(&sc))),
        Cmd::Alloc { config, at } => (|| {
            if !(at.is_finite() && at >= 0.0) {
                bail!("--at must be a non-negative number of seconds");
            }
            let sc = load(&config)?.scenario()?;
            print!("{}", alloc_csv(&sc, Nanos::from_secs_f64(at)));
            Ok(())
        })(),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
