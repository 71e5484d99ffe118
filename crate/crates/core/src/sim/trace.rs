//! Line-delimited trace records.
//!
//! One JSON object per line, `kind` first, field order fixed by the struct
//! declarations below — a run's trace is byte-stable for a given (scenario,
//! seed) and diffs cleanly across code changes. Downstream consumers (the
//! billing command, the linkability report) parse these records rather than
//! poking at engine state.

use serde::{Deserialize, Serialize};

use crate::codec::Imsi;
use crate::sn::{AirIdentity, AttachFailure, AttachReport};
use crate::types::SimTime;
use crate::ue::UpdateOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    RunHeader {
        t: SimTime,
        seq: u64,
        run_id: String,
        scenario: String,
        seed: u64,
        subscribers: u32,
        serving_networks: u32,
    },
    Attach {
        t: SimTime,
        seq: u64,
        actor: String,
        sn: String,
        flavor: String,
        identity: String,
        outcome: String,
        guti: Option<u32>,
        lu: bool,
        rotated: bool,
        ecf: bool,
        update: Option<String>,
        av_from_cache: bool,
        cache_purged: bool,
        allocated: Option<u64>,
        pruned: u32,
        extra_ciphers: u32,
        extra_macs: u32,
    },
    Service {
        t: SimTime,
        seq: u64,
        actor: String,
        sn: String,
        guti: u32,
        units: u32,
        cdr_identity: String,
    },
    Page {
        t: SimTime,
        seq: u64,
        sn: String,
        target: String,
        message: String,
    },
    Sweep {
        t: SimTime,
        seq: u64,
        actor: String,
        removed: u32,
    },
    Fault {
        t: SimTime,
        seq: u64,
        target: String,
        fault: String,
        d2: u32,
    },
    Adversary {
        t: SimTime,
        seq: u64,
        id: String,
        adversary: String,
        action: String,
        target: Option<String>,
        observed: Option<String>,
        effect: Option<String>,
    },
    Pool {
        t: SimTime,
        seq: u64,
        in_use: u64,
        space: u64,
    },
    Violation {
        t: SimTime,
        seq: u64,
        event_index: u64,
        code: String,
        detail: String,
    },
    RunFooter {
        t: SimTime,
        seq: u64,
        events: u64,
        attaches_ok: u64,
        attaches_failed: u64,
        violations: u32,
    },
}

pub fn to_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace records always serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TraceRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub fn render_air_identity(id: &AirIdentity) -> String {
    match id {
        AirIdentity::Pseudonym(q) => format!("pseudonym:{}", q.as_str()),
        AirIdentity::Suci(bytes) => format!("suci:{}", hex::encode(bytes)),
        AirIdentity::Guti(g) => format!("guti:{g}"),
    }
}

pub fn render_update(u: &UpdateOutcome) -> &'static str {
    match u {
        UpdateOutcome::Shifted { .. } => "shifted",
        UpdateOutcome::Reset { .. } => "reset",
        UpdateOutcome::Noop => "noop",
        UpdateOutcome::PayloadCorrupt(_) => "corrupt",
    }
}

pub fn render_outcome(r: &Result<u32, AttachFailure>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(AttachFailure::HnRejected(_)) => "hn_rejected".into(),
        Err(AttachFailure::ChallengeRejected(reason)) => {
            format!("challenge_rejected:{reason:?}").to_lowercase()
        }
        Err(AttachFailure::ResponseMismatch) => "response_mismatch".into(),
        Err(AttachFailure::SecureChannelMismatch) => "secure_channel_mismatch".into(),
    }
}

/// The attach record for a completed flow, CDR-free fields only.
pub fn attach_record(t: SimTime, seq: u64, rep: &AttachReport) -> TraceRecord {
    TraceRecord::Attach {
        t,
        seq,
        actor: rep.ue.to_string(),
        sn: rep.sn_id.clone(),
        flavor: match rep.flavor {
            crate::aka::AkaFlavor::Lte => "lte".into(),
            crate::aka::AkaFlavor::FiveG => "5g".into(),
        },
        identity: render_air_identity(&rep.identity_used),
        outcome: render_outcome(&rep.outcome),
        guti: rep.outcome.as_ref().ok().copied(),
        lu: rep.lu_sent,
        rotated: rep.hn_rotated,
        ecf: rep.ecf,
        update: rep.ue_update.as_ref().map(|u| render_update(u).to_string()),
        av_from_cache: rep.av_from_cache,
        cache_purged: rep.cache_purged,
        allocated: rep.hn_allocated.map(|e| e.value.raw()),
        pruned: rep.hn_pruned.len() as u32,
        extra_ciphers: rep.extra_ciphers,
        extra_macs: rep.extra_macs,
    }
}

/// True when a trace identity string is the given subscriber identity in
/// cleartext (an air-interface leak if the subscriber is real).
pub fn identity_matches(rendered: &str, imsi: &Imsi) -> bool {
    rendered == format!("pseudonym:{}", imsi.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trips_and_is_stable() {
        let records = vec![
            TraceRecord::RunHeader {
                t: 0,
                seq: 0,
                run_id: "r-1".into(),
                scenario: "s".into(),
                seed: 7,
                subscribers: 2,
                serving_networks: 1,
            },
            TraceRecord::Sweep {
                t: 5,
                seq: 1,
                actor: "ue-0".into(),
                removed: 2,
            },
        ];
        let text = to_jsonl(&records);
        assert_eq!(text, to_jsonl(&records));
        assert_eq!(parse_jsonl(&text).unwrap(), records);
        let first = text.lines().next().unwrap();
        assert!(first.starts_with(r#"{"kind":"run_header","t":0,"seq":0,"#));
    }
}
