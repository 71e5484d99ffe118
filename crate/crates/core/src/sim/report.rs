//! Per-run metrics, assembled from the same counters the trace records.
//!
//! Everything here is re-derivable from the trace; the report exists so CI
//! and humans don't have to re-aggregate ten thousand JSON lines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::SimTime;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub scenario: String,
    pub seed: u64,
    pub events: u64,
    pub checks_run: u64,
    pub violations: u32,

    pub attaches_ok: u64,
    pub attaches_failed: u64,
    pub failures_by_kind: BTreeMap<String, u64>,
    pub rotations: u64,
    pub ecf_resets: u64,
    pub suci_attaches: u64,
    pub guti_reattaches: u64,
    pub lu_count: u64,
    pub pages: u64,
    pub sweeps: u64,
    pub swept_entries: u64,

    pub cdr_count: u64,
    pub service_units: u64,

    /// (t, in-use) samples over the run.
    pub pool_samples: Vec<(SimTime, u64)>,
    pub pool_space: u64,
    pub pool_final_in_use: u64,
    /// Rejection-sampling totals: mean tries = tries / allocations.
    pub alloc_tries: u64,
    pub allocations: u64,

    /// Symmetric-crypto operations the pseudonym mechanism added on top of
    /// plain AKA, summed over all attaches.
    pub overhead_extra_ciphers: u64,
    pub overhead_extra_macs: u64,

    pub adversaries: Vec<AdversarySummary>,
    pub drill: Vec<DrillOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversarySummary {
    pub id: String,
    pub kind: String,
    pub lte_observations: u64,
    pub lte_victims: u64,
    pub suci_observations: u64,
    pub suci_distinct: u64,
    pub lu_sent: u64,
    pub lu_rotated: u64,
    pub forges_sent: u64,
    pub forges_accepted: u64,
}

/// What one drilled UE went through: the post-corruption LTE attaches (which
/// must not accept a pseudonym) and the 5G attaches it took to resynchronize.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrillOutcome {
    pub ue: String,
    pub lte_attempts: u32,
    pub lte_accepted: u32,
    pub fiveg_to_recover: u32,
    pub recovered: bool,
}

impl RunReport {
    pub fn mean_alloc_tries(&self) -> f64 {
        if self.allocations == 0 {
            0.0
        } else {
            self.alloc_tries as f64 / self.allocations as f64
        }
    }

    pub fn human_summary(&self) -> String {
        let mut s = String::new();
        let attaches = self.attaches_ok + self.attaches_failed;
        let per_aka = |total: u64| {
            if attaches == 0 {
                0.0
            } else {
                total as f64 / attaches as f64
            }
        };
        s.push_str(&format!(
            "run {} (scenario {}, seed {})\n",
            self.run_id, self.scenario, self.seed
        ));
        s.push_str(&format!(
            "  events: {}   checks: {}   violations: {}\n",
            self.events, self.checks_run, self.violations
        ));
        s.push_str(&format!(
            "  attaches: {} ok / {} failed   rotations: {}   ecf resets: {}\n",
            self.attaches_ok, self.attaches_failed, self.rotations, self.ecf_resets
        ));
        for (kind, n) in &self.failures_by_kind {
            s.push_str(&format!("    failed {kind}: {n}\n"));
        }
        s.push_str(&format!(
            "  suci attaches: {}   guti re-attaches: {}   location updates: {}\n",
            self.suci_attaches, self.guti_reattaches, self.lu_count
        ));
        s.push_str(&format!(
            "  pages: {}   sweeps: {} ({} entries)   cdrs: {} ({} units)\n",
            self.pages, self.sweeps, self.swept_entries, self.cdr_count, self.service_units
        ));
        s.push_str(&format!(
            "  pool: {} / {} in use at end, mean allocation tries {:.3}\n",
            self.pool_final_in_use,
            self.pool_space,
            self.mean_alloc_tries()
        ));
        s.push_str(&format!(
            "  overhead per attach: {:.2} extra cipher ops, {:.2} extra mac ops\n",
            per_aka(self.overhead_extra_ciphers),
            per_aka(self.overhead_extra_macs)
        ));
        for a in &self.adversaries {
            s.push_str(&format!(
                "  adversary {} ({}): lte obs {}, victims {}, sucis {} ({} distinct), \
                 lus {} ({} rotated), forges {} ({} accepted)\n",
                a.id,
                a.kind,
                a.lte_observations,
                a.lte_victims,
                a.suci_observations,
                a.suci_distinct,
                a.lu_sent,
                a.lu_rotated,
                a.forges_sent,
                a.forges_accepted
            ));
        }
        for d in &self.drill {
            s.push_str(&format!(
                "  drill {}: {} lte attempts ({} accepted), {} 5g aka to recover, recovered: {}\n",
                d.ue, d.lte_attempts, d.lte_accepted, d.fiveg_to_recover, d.recovered
            ));
        }
        s
    }
}
