//! Deterministic discrete-event simulator for the pseudonym protocol.
//!
//! A scenario file describes a home network, its subscribers, a set of LTE
//! and 5G serving networks, and either a randomized workload or an explicit
//! script, plus optional adversaries, fault injections, and a recovery
//! drill. [`engine::run`] executes it as a pure function of the scenario and
//! a seed, producing a line-delimited trace, a run report, and the HN's
//! allocation log for offline billing.
//!
//! Invariants (pseudonym synchronization, global uniqueness, state bounds,
//! and a clean air interface) are checked after every event; the first
//! violation aborts the run and carries the trace prefix that produced it.

pub mod adversary;
pub mod checker;
pub mod drill;
pub mod engine;
pub mod report;
pub mod scenario;
pub mod trace;

pub use adversary::{assess_linkability, AdversaryState, CatcherWindowStats, LinkabilityReport};
pub use checker::{check_world, Violation};
pub use drill::{run_resync_drill, DrillReport};
pub use engine::{build_world, run, HnLogExport, RunOutcome, SimError, World};
pub use report::{AdversarySummary, DrillOutcome, RunReport};
pub use scenario::{Scenario, ScenarioError};
pub use trace::{parse_jsonl, to_jsonl, TraceRecord};
