//! `pseudoaka billing`: offline CDR resolution.
//!
//! Takes the trace and the allocation-log export from the same run. Service
//! records name the identity the serving network billed — usually a
//! pseudonym, possibly one that has since been released and re-issued to
//! somebody else. Resolution walks the allocation log's holder intervals
//! (with the release-grace correction for stale sessions) and produces
//! per-subscriber totals.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use pseudoaka_core::sim::{parse_jsonl, HnLogExport, TraceRecord};
use pseudoaka_core::{AllocationLog, CdrRecord, Imsi, SimTime};
use serde::{Deserialize, Serialize};

use crate::verbosity;

#[derive(Debug, Args)]
pub struct BillingArgs {
    /// Trace file written by `run --trace-out`.
    pub trace: PathBuf,
    /// Allocation-log export written by `run --hn-log-out`.
    pub hn_log: PathBuf,
    /// Write the billing report here (one JSON line + '#' summary).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnresolvedCdr {
    pub sn: String,
    pub t: SimTime,
    pub identity: String,
    pub units: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BillingReport {
    pub run_id: String,
    pub records: u64,
    pub resolved: u64,
    /// Total billed units per subscriber (true identity).
    pub totals: BTreeMap<String, u64>,
    pub unresolved: Vec<UnresolvedCdr>,
}

impl BillingReport {
    pub fn human_summary(&self) -> String {
        let mut s = format!(
            "billing for run {}: {} records, {} resolved\n",
            self.run_id, self.records, self.resolved
        );
        for (imsi, units) in &self.totals {
            s.push_str(&format!("  {imsi}: {units} units\n"));
        }
        for u in &self.unresolved {
            s.push_str(&format!(
                "  UNRESOLVED {} at {} t={}: {} units ({})\n",
                u.identity, u.sn, u.t, u.units, u.reason
            ));
        }
        s
    }
}

/// Resolves every service record in `trace` against `export`. Fails only on
/// structural problems (mismatched run ids, malformed records); CDRs that
/// no holder interval explains come back flagged, not fatal.
pub fn resolve_trace(
    trace: &[TraceRecord],
    export: &HnLogExport,
) -> anyhow::Result<BillingReport> {
    let run_id = trace
        .iter()
        .find_map(|r| match r {
            TraceRecord::RunHeader { run_id, .. } => Some(run_id.clone()),
            _ => None,
        })
        .ok_or_else(|| anyhow::anyhow!("trace has no run header"))?;
    if run_id != export.run_id {
        anyhow::bail!(
            "run id mismatch: trace is {run_id}, allocation log is {}",
            export.run_id
        );
    }

    let log = AllocationLog::from_entries(export.entries.clone());
    let mut report = BillingReport {
        run_id,
        records: 0,
        resolved: 0,
        totals: BTreeMap::new(),
        unresolved: Vec::new(),
    };
    for record in trace {
        let TraceRecord::Service {
            t,
            sn,
            units,
            cdr_identity,
            ..
        } = record
        else {
            continue;
        };
        report.records += 1;
        let identity = Imsi::parse(cdr_identity)
            .map_err(|e| anyhow::anyhow!("service record at t={t}: bad identity: {e}"))?;
        let cdr = CdrRecord {
            sn_id: sn.clone(),
            identity,
            service_units: *units,
            t_event: *t,
        };
        match log.resolve_cdr(&cdr, &export.true_msins, export.guti_grace) {
            Ok(imsi) => {
                report.resolved += 1;
                *report.totals.entry(imsi.to_string()).or_insert(0) += u64::from(*units);
            }
            Err(e) => report.unresolved.push(UnresolvedCdr {
                sn: sn.clone(),
                t: *t,
                identity: cdr_identity.clone(),
                units: *units,
                reason: e.to_string(),
            }),
        }
    }
    Ok(report)
}

pub fn cmd_billing(args: &BillingArgs) -> i32 {
    let trace_text = match std::fs::read_to_string(&args.trace) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("pseudoaka billing: {}: {e}", args.trace.display());
            return 2;
        }
    };
    let trace = match parse_jsonl(&trace_text) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("pseudoaka billing: {}: {e}", args.trace.display());
            return 2;
        }
    };
    let log_text = match std::fs::read_to_string(&args.hn_log) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("pseudoaka billing: {}: {e}", args.hn_log.display());
            return 2;
        }
    };
    let export: HnLogExport = match serde_json::from_str(log_text.trim()) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("pseudoaka billing: {}: {e}", args.hn_log.display());
            return 2;
        }
    };

    let report = match resolve_trace(&trace, &export) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("pseudoaka billing: {e}");
            return 2;
        }
    };

    if let Some(p) = &args.report_out {
        let mut text = match serde_json::to_string(&report) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("pseudoaka billing: serializing report: {e}");
                return 2;
            }
        };
        text.push('\n');
        for line in report.human_summary().lines() {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        if let Err(e) = std::fs::write(p, text) {
            eprintln!("pseudoaka billing: writing {}: {e}", p.display());
            return 2;
        }
    }
    if verbosity() >= 1 {
        print!("{}", report.human_summary());
    }
    0
}
