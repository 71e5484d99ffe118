//! `pseudoaka run`: execute one scenario, or a campaign of consecutive
//! seeds, and persist the artifacts.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use pseudoaka_core::sim::{self, Scenario, SimError};

use crate::verbosity;

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Override the seed declared in the scenario file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the event trace (JSON lines) here.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Write the run report here (one JSON line + '#'-prefixed summary).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Export the HN allocation log here (input for `billing`).
    #[arg(long)]
    pub hn_log_out: Option<PathBuf>,
    /// Run this many consecutive seeds (base, base+1, …) in parallel.
    /// Output paths get a `-<seed>` suffix when more than one.
    #[arg(long, default_value_t = 1)]
    pub jobs: u32,
}

/// `-<seed>` before the extension, only in campaign mode.
fn seeded_path(path: &Path, seed: u64, multi: bool) -> PathBuf {
    if !multi {
        return path.to_path_buf();
    }
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{seed}"),
    };
    path.with_file_name(name)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// One seed's execution: runs, writes artifacts, returns the exit code.
fn run_seed(scenario: &Scenario, seed: u64, args: &RunArgs, multi: bool) -> i32 {
    let outcome = match sim::run(scenario, seed) {
        Ok(o) => o,
        Err(SimError::Scenario(e)) => {
            eprintln!("pseudoaka run: {e}");
            return 2;
        }
        Err(SimError::Invariant {
            event_index,
            code,
            detail,
            trace_text,
        }) => {
            eprintln!(
                "pseudoaka run: seed {seed}: invariant violation at event {event_index} [{code}]: {detail}"
            );
            if let Some(p) = &args.trace_out {
                // The prefix that produced the violation is the evidence;
                // persist it even though the run is incomplete.
                let _ = write_file(&seeded_path(p, seed, multi), &trace_text);
            }
            return 1;
        }
    };

    if let Some(p) = &args.trace_out {
        if write_file(&seeded_path(p, seed, multi), &outcome.trace_text).is_err() {
            return 2;
        }
    }
    if let Some(p) = &args.hn_log_out {
        let line = match serde_json::to_string(&outcome.hn_log) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("pseudoaka run: serializing allocation log: {e}");
                return 2;
            }
        };
        if write_file(&seeded_path(p, seed, multi), &format!("{line}\n")).is_err() {
            return 2;
        }
    }
    if let Some(p) = &args.report_out {
        let mut text = String::new();
        match serde_json::to_string(&outcome.report) {
            Ok(s) => text.push_str(&s),
            Err(e) => {
                eprintln!("pseudoaka run: serializing report: {e}");
                return 2;
            }
        }
        text.push('\n');
        for line in outcome.report.human_summary().lines() {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        if write_file(&seeded_path(p, seed, multi), &text).is_err() {
            return 2;
        }
    }

    let v = verbosity();
    if v >= 1 {
        let mut out = std::io::stdout().lock();
        let _ = write!(out, "{}", outcome.report.human_summary());
        if v >= 2 {
            for (kind, n) in &outcome.report.failures_by_kind {
                let _ = writeln!(out, "  failed [{kind}]: {n}");
            }
            for d in &outcome.report.drill {
                let _ = writeln!(
                    out,
                    "  drill {}: {} LTE ({} accepted), {} 5G, recovered: {}",
                    d.ue, d.lte_attempts, d.lte_accepted, d.fiveg_to_recover, d.recovered
                );
            }
            for a in &outcome.report.adversaries {
                let _ = writeln!(
                    out,
                    "  adversary {} ({}): {} lte ids from {} victims, {} sucis ({} distinct), lu {}/{} rotated, forges {}/{} accepted",
                    a.id,
                    a.kind,
                    a.lte_observations,
                    a.lte_victims,
                    a.suci_observations,
                    a.suci_distinct,
                    a.lu_rotated,
                    a.lu_sent,
                    a.forges_accepted,
                    a.forges_sent,
                );
            }
        }
    }
    0
}

pub fn cmd_run(args: &RunArgs) -> i32 {
    let scenario = match Scenario::load(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("pseudoaka run: {}: {e}", args.scenario.display());
            return 2;
        }
    };
    if let Err(e) = scenario.validate() {
        eprintln!("pseudoaka run: {}: {e}", args.scenario.display());
        return 2;
    }
    if args.jobs == 0 {
        eprintln!("pseudoaka run: --jobs must be at least 1");
        return 2;
    }

    let base = args.seed.unwrap_or(scenario.scenario.seed);
    if args.jobs == 1 {
        return run_seed(&scenario, base, args, false);
    }

    // Campaign: independent seeds, one thread each; worst exit code wins.
    let codes: Vec<i32> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..u64::from(args.jobs))
            .map(|i| {
                let scenario = &scenario;
                scope.spawn(move || run_seed(scenario, base + i, args, true))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    codes.into_iter().max().unwrap_or(0)
}
