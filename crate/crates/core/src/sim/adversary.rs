//! Adversary models and the linkability assessment over a finished trace.
//!
//! All five adversaries operate on the initially unprotected radio link (or,
//! for the malicious serving network, the core-network LU interface). None
//! of them hold a subscriber key, a pseudonym-derivation key, or the home
//! network's private key — they see and inject only what the air carries.
//!
//! The assessment is report-only: it partitions what each adversary saw and
//! computes the exposure numbers; the acceptance suite applies thresholds.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::codec::Imsi;
use crate::types::SimTime;

use super::scenario::{AdversaryCfg, AdversaryKindCfg};
use super::trace::TraceRecord;

#[derive(Debug, Clone)]
pub struct AdversaryState {
    pub id: String,
    pub kind: AdversaryKindCfg,
    pub target: Option<u32>,
    /// Identities pulled from inquiry responses, per victim, in beat order.
    pub lte_harvest: BTreeMap<String, Vec<(SimTime, Imsi)>>,
    /// Concealed identities pulled from 5G inquiry responses.
    pub suci_harvest: Vec<Vec<u8>>,
    pub lu_sent: u64,
    pub lu_rotated: u64,
    pub forges_sent: u64,
    /// Forged challenges a UE accepted. Any value but zero is a broken run.
    pub forges_accepted: u64,
    pub round_robin: u32,
}

impl AdversaryState {
    pub fn from_cfg(cfg: &AdversaryCfg) -> Self {
        AdversaryState {
            id: cfg.id.clone(),
            kind: cfg.kind,
            target: cfg.target,
            lte_harvest: BTreeMap::new(),
            suci_harvest: Vec::new(),
            lu_sent: 0,
            lu_rotated: 0,
            forges_sent: 0,
            forges_accepted: 0,
            round_robin: 0,
        }
    }

    /// The radio cell id this adversary impersonates. Distinct from every
    /// legitimate SN id so exposure ledgers and GUTI contexts never mix.
    pub fn cell_id(&self) -> String {
        format!("catcher:{}", self.id)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            AdversaryKindCfg::PassiveEavesdrop => "passive_eavesdrop",
            AdversaryKindCfg::ActiveLteCatcher => "active_lte_catcher",
            AdversaryKindCfg::Active5gCatcher => "active_5g_catcher",
            AdversaryKindCfg::MaliciousLuSn => "malicious_lu_sn",
            AdversaryKindCfg::RandForger => "rand_forger",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatcherWindowStats {
    /// Worst case over every (victim, rotation window): distinct identities
    /// harvested from one UE between two of its legitimate rotations.
    pub max_distinct_per_window: usize,
    /// Windows where the harvest repeated an identity from the previous
    /// window — consecutive harvests should be disjoint once rotation ran.
    pub overlapping_consecutive_windows: usize,
    pub victims: usize,
    pub total_observations: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkabilityReport {
    /// Per active-LTE-catcher id.
    pub catchers: BTreeMap<String, CatcherWindowStats>,
    /// True if any adversary observed a true IMSI in cleartext.
    pub saw_true_identity: bool,
    /// Per 5G-catcher id: (total SUCIs harvested, distinct ciphertexts).
    pub suci_counts: BTreeMap<String, (usize, usize)>,
    /// Cleartext pseudonym observations whose value reappeared after a
    /// different value was seen for the same UE (paging an old identity
    /// does this; rotation itself never does).
    pub passive_reappearances: u64,
    /// Cleartext identity observations on the air, total.
    pub passive_observations: u64,
    /// GUTI sightings on the air — measured for context, not graded.
    pub guti_exposures: u64,
    pub malicious_lu_sent: u64,
    pub forged_challenges_sent: u64,
    pub forged_challenges_accepted: u64,
}

/// Evaluates a finished trace. `true_imsis` lets the report check harvests
/// against the real identities without those ever appearing in the trace.
pub fn assess_linkability(trace: &[TraceRecord], true_imsis: &BTreeSet<String>) -> LinkabilityReport {
    // Rotation windows: per UE, the index of its current window, advanced
    // every time an attach delivers the UE a new pseudonym (shift or reset).
    // That is the moment the pair of identities it will answer with changes;
    // the HN chain flag is the wrong marker here, since a stale location
    // update can leave the chain unrotated while the UE still moved on.
    let mut window: BTreeMap<String, u32> = BTreeMap::new();
    // Per (catcher, victim): harvested identity strings per window index.
    let mut harvests: BTreeMap<(String, String), BTreeMap<u32, BTreeSet<String>>> = BTreeMap::new();
    let mut catcher_totals: BTreeMap<String, u64> = BTreeMap::new();
    let mut sucis: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut saw_true_identity = false;
    let mut passive_seq: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut passive_observations = 0u64;
    let mut guti_exposures = 0u64;
    let mut malicious_lu_sent = 0u64;
    let mut forged_sent = 0u64;
    let mut forged_accepted = 0u64;

    fn note_cleartext(
        true_imsis: &BTreeSet<String>,
        ue: &str,
        identity: &str,
        passive_seq: &mut BTreeMap<String, Vec<String>>,
        saw: &mut bool,
    ) {
        if let Some(p) = identity.strip_prefix("pseudonym:") {
            if true_imsis.contains(p) {
                *saw = true;
            }
            passive_seq
                .entry(ue.to_string())
                .or_default()
                .push(p.to_string());
        }
    }

    for record in trace {
        match record {
            TraceRecord::Attach {
                actor,
                identity,
                update,
                ..
            } => {
                passive_observations += 1;
                if identity.starts_with("guti:") {
                    guti_exposures += 1;
                }
                note_cleartext(
                    true_imsis,
                    actor,
                    identity,
                    &mut passive_seq,
                    &mut saw_true_identity,
                );
                if matches!(update.as_deref(), Some("shifted") | Some("reset")) {
                    *window.entry(actor.clone()).or_insert(0) += 1;
                }
            }
            TraceRecord::Page { target, message, .. } => {
                passive_observations += 1;
                if message.starts_with("guti:") {
                    guti_exposures += 1;
                }
                note_cleartext(
                    true_imsis,
                    target,
                    message,
                    &mut passive_seq,
                    &mut saw_true_identity,
                );
            }
            TraceRecord::Adversary {
                id,
                adversary,
                action,
                target,
                observed,
                effect,
                ..
            } => match adversary.as_str() {
                "active_lte_catcher" => {
                    if let (Some(victim), Some(obs)) = (target, observed) {
                        let w = window.get(victim).copied().unwrap_or(0);
                        let ident = obs.strip_prefix("pseudonym:").unwrap_or(obs);
                        if true_imsis.contains(ident) {
                            saw_true_identity = true;
                        }
                        harvests
                            .entry((id.clone(), victim.clone()))
                            .or_default()
                            .entry(w)
                            .or_default()
                            .insert(ident.to_string());
                        *catcher_totals.entry(id.clone()).or_insert(0) += 1;
                    }
                }
                "active_5g_catcher" => {
                    if let Some(obs) = observed {
                        sucis.entry(id.clone()).or_default().push(obs.clone());
                    }
                }
                "malicious_lu_sn" => {
                    if action == "spurious_lu" {
                        malicious_lu_sent += 1;
                    }
                }
                "rand_forger" => {
                    forged_sent += 1;
                    if effect.as_deref() == Some("accepted") {
                        forged_accepted += 1;
                    }
                }
                _ => {}
            },
            _ => {}
        }
    }

    let mut catchers: BTreeMap<String, CatcherWindowStats> = BTreeMap::new();
    for ((catcher, _victim), windows) in &harvests {
        let stats = catchers.entry(catcher.clone()).or_insert(CatcherWindowStats {
            max_distinct_per_window: 0,
            overlapping_consecutive_windows: 0,
            victims: 0,
            total_observations: 0,
        });
        stats.victims += 1;
        let mut prev: Option<&BTreeSet<String>> = None;
        for harvest in windows.values() {
            stats.max_distinct_per_window = stats.max_distinct_per_window.max(harvest.len());
            if let Some(prev) = prev {
                if !prev.is_disjoint(harvest) {
                    stats.overlapping_consecutive_windows += 1;
                }
            }
            prev = Some(harvest);
        }
    }
    for (catcher, total) in catcher_totals {
        if let Some(s) = catchers.get_mut(&catcher) {
            s.total_observations = total;
        }
    }

    let suci_counts = sucis
        .into_iter()
        .map(|(id, list)| {
            let distinct = list.iter().collect::<BTreeSet<_>>().len();
            (id, (list.len(), distinct))
        })
        .collect();

    // A value "reappears" when the cleartext sequence for one UE leaves it
    // and later returns to it.
    let mut passive_reappearances = 0u64;
    for seq in passive_seq.values() {
        let mut seen_and_left: BTreeSet<&String> = BTreeSet::new();
        let mut current: Option<&String> = None;
        for ident in seq {
            if current != Some(ident) {
                if let Some(prev) = current {
                    seen_and_left.insert(prev);
                }
                if seen_and_left.contains(ident) {
                    passive_reappearances += 1;
                }
                current = Some(ident);
            }
        }
    }

    LinkabilityReport {
        catchers,
        saw_true_identity,
        suci_counts,
        passive_reappearances,
        passive_observations,
        guti_exposures,
        malicious_lu_sent,
        forged_challenges_sent: forged_sent,
        forged_challenges_accepted: forged_accepted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `advanced`: the attach delivered a new pseudonym, moving the UE's
    /// answer pair forward (and, in the common case, rotating the HN chain).
    fn attach(actor: &str, identity: &str, advanced: bool) -> TraceRecord {
        TraceRecord::Attach {
            t: 0,
            seq: 0,
            actor: actor.into(),
            sn: "lte-1".into(),
            flavor: "lte".into(),
            identity: identity.into(),
            outcome: "ok".into(),
            guti: Some(1),
            lu: true,
            rotated: advanced,
            ecf: false,
            update: Some(if advanced { "shifted" } else { "noop" }.into()),
            av_from_cache: false,
            cache_purged: false,
            allocated: None,
            pruned: 0,
            extra_ciphers: 0,
            extra_macs: 0,
        }
    }

    fn catch(id: &str, victim: &str, observed: &str) -> TraceRecord {
        TraceRecord::Adversary {
            t: 0,
            seq: 0,
            id: id.into(),
            adversary: "active_lte_catcher".into(),
            action: "identity_inquiry".into(),
            target: Some(victim.into()),
            observed: Some(observed.into()),
            effect: None,
        }
    }

    #[test]
    fn harvest_windows_split_at_rotations() {
        let trace = vec![
            catch("c", "ue-0", "pseudonym:244990000000001"),
            catch("c", "ue-0", "pseudonym:244990000000002"),
            catch("c", "ue-0", "pseudonym:244990000000001"),
            attach("ue-0", "pseudonym:244990000000002", true),
            catch("c", "ue-0", "pseudonym:244990000000003"),
        ];
        let report = assess_linkability(&trace, &BTreeSet::new());
        let stats = &report.catchers["c"];
        assert_eq!(stats.max_distinct_per_window, 2);
        assert_eq!(stats.overlapping_consecutive_windows, 0);
        assert!(!report.saw_true_identity);
    }

    #[test]
    fn repeated_identity_across_rotation_counts_as_overlap() {
        let trace = vec![
            catch("c", "ue-0", "pseudonym:244990000000001"),
            attach("ue-0", "pseudonym:244990000000009", true),
            catch("c", "ue-0", "pseudonym:244990000000001"),
        ];
        let report = assess_linkability(&trace, &BTreeSet::new());
        assert_eq!(report.catchers["c"].overlapping_consecutive_windows, 1);
    }

    #[test]
    fn suci_distinctness_and_true_identity_detection() {
        let trace = vec![
            TraceRecord::Adversary {
                t: 0,
                seq: 0,
                id: "g".into(),
                adversary: "active_5g_catcher".into(),
                action: "identity_inquiry".into(),
                target: Some("ue-0".into()),
                observed: Some("suci:aabb".into()),
                effect: None,
            },
            TraceRecord::Adversary {
                t: 1,
                seq: 1,
                id: "g".into(),
                adversary: "active_5g_catcher".into(),
                action: "identity_inquiry".into(),
                target: Some("ue-0".into()),
                observed: Some("suci:aabb".into()),
                effect: None,
            },
            catch("c", "ue-1", "pseudonym:244991234567890"),
        ];
        let mut truth = BTreeSet::new();
        truth.insert("244991234567890".to_string());
        let report = assess_linkability(&trace, &truth);
        assert_eq!(report.suci_counts["g"], (2, 1));
        assert!(report.saw_true_identity);
    }

    #[test]
    fn passive_reappearance_is_counted_once_per_return() {
        let trace = vec![
            attach("ue-0", "pseudonym:244990000000001", false),
            attach("ue-0", "pseudonym:244990000000002", true),
            attach("ue-0", "pseudonym:244990000000001", false),
        ];
        let report = assess_linkability(&trace, &BTreeSet::new());
        assert_eq!(report.passive_reappearances, 1);
        assert_eq!(report.passive_observations, 3);
    }
}
