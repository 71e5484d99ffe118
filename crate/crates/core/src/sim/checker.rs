//! Invariant checks run against the whole world after every event.
//!
//! The load-bearing one is synchronization: every UE slot pair must be held
//! by the home network as the identical (value, counter) pair, so the next
//! identity the UE presents always resolves. The others pin global
//! uniqueness, structural bounds, and air-interface hygiene. The first
//! failed check aborts the run with the event prefix that produced it.

use std::collections::BTreeMap;

use crate::aka::AkaFlavor;
use crate::sn::{AirIdentity, AirMessage};

use super::engine::World;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: &'static str,
    pub detail: String,
}

impl Violation {
    fn new(code: &'static str, detail: String) -> Self {
        Violation { code, detail }
    }
}

/// Runs every invariant against the current world plus the air messages of
/// the event just executed. Returns the first violation found.
pub fn check_world(world: &World, event_air: &[(String, AkaFlavor, Vec<AirMessage>)]) -> Option<Violation> {
    check_sync(world)
        .or_else(|| check_global_uniqueness(world))
        .or_else(|| check_bounds(world))
        .or_else(|| check_air(world, event_air))
}

/// Both UE slots — and everything in P_UE — must be live at the HN as the
/// same (value, counter) pairs. One carve-out: immediately after an
/// error-correction reset the UE deliberately holds ((p, d−1), (p, d)); the
/// lower twin is synthetic and only the newer slot must be live.
/// UEs under an injected fault are skipped until they resynchronize.
pub fn check_sync(world: &World) -> Option<Violation> {
    for (ue_id, ue) in &world.ues {
        if world.corrupted.contains(ue_id) {
            continue;
        }
        let imsi = world.ue_imsi[ue_id];
        let sub = world
            .hn
            .subscriber(&imsi)
            .expect("every simulated UE has a subscriber record");
        let reset_pair = ue.slot1.value == ue.slot2.value && ue.slot1.d + 1 == ue.slot2.d;
        if !sub.holds_pair(&ue.slot2) {
            return Some(Violation::new(
                "sync",
                format!("{ue_id}: slot2 {:?} not held by HN", ue.slot2),
            ));
        }
        if !sub.holds_pair(&ue.slot1) && !reset_pair {
            return Some(Violation::new(
                "sync",
                format!("{ue_id}: slot1 {:?} not held by HN", ue.slot1),
            ));
        }
        // Retired pseudonyms are compared by value only: a reset leaves the
        // UE with a (p, d-1) twin whose counter the HN never issued, and a
        // later shift parks that twin in P_UE. The value stays resolvable
        // because δmin (which covers P_UE) gates the HN's pruning.
        for entry in ue.p_ue_entries() {
            if !sub.holds_value(&entry.value) {
                return Some(Violation::new(
                    "sync",
                    format!("{ue_id}: P_UE value {entry:?} not resolvable at HN"),
                ));
            }
        }
        if ue.slot1.d >= ue.slot2.d {
            return Some(Violation::new(
                "slot_order",
                format!("{ue_id}: slot counters not increasing: {:?} {:?}", ue.slot1, ue.slot2),
            ));
        }
    }
    None
}

/// Every live pseudonym value belongs to exactly one subscriber and is
/// marked in-use by the pool.
fn check_global_uniqueness(world: &World) -> Option<Violation> {
    let mut owner: BTreeMap<u64, crate::codec::Imsi> = BTreeMap::new();
    for sub in world.hn.subscribers() {
        for entry in sub.live_entries() {
            let v = entry.value.raw();
            if let Some(prev) = owner.insert(v, sub.imsi) {
                return Some(Violation::new(
                    "uniqueness",
                    format!("pseudonym value {v} live for both {prev} and {}", sub.imsi),
                ));
            }
            if !world.hn.pool.contains(v) {
                return Some(Violation::new(
                    "uniqueness",
                    format!("live pseudonym value {v} not marked in the pool"),
                ));
            }
        }
    }
    None
}

fn check_bounds(world: &World) -> Option<Violation> {
    for (ue_id, ue) in &world.ues {
        let held = ue.p_ue_entries().len();
        if held > ue.policy.max_size {
            return Some(Violation::new(
                "p_ue_bound",
                format!("{ue_id}: |P_UE| = {held} exceeds {}", ue.policy.max_size),
            ));
        }
    }
    for sub in world.hn.subscribers() {
        if sub.p_hn.len() > world.cap_c {
            return Some(Violation::new(
                "p_hn_cap",
                format!("{}: |P_HN| = {} exceeds cap {}", sub.imsi, sub.p_hn.len(), world.cap_c),
            ));
        }
    }
    None
}

/// Air-interface hygiene for the event just executed: no true IMSI in any
/// cleartext identity or page, no subscriber MSIN inside an encrypted SUCI's
/// bytes, and no 5G page that carries a long-term identity.
fn check_air(
    world: &World,
    event_air: &[(String, AkaFlavor, Vec<AirMessage>)],
) -> Option<Violation> {
    let true_imsis: Vec<_> = world.ue_imsi.values().copied().collect();
    let msin_bcds: Vec<[u8; 5]> = true_imsis.iter().map(|i| i.msin().to_bcd()).collect();
    for (sn_id, flavor, messages) in event_air {
        for msg in messages {
            let identity = match msg {
                AirMessage::Identity(id) => Some(id),
                AirMessage::Page(id) => Some(id),
                _ => None,
            };
            let Some(identity) = identity else { continue };
            match identity {
                AirIdentity::Pseudonym(q) => {
                    if true_imsis.contains(q) {
                        return Some(Violation::new(
                            "msin_leak",
                            format!("true IMSI {q} in cleartext on {sn_id}"),
                        ));
                    }
                    if *flavor == AkaFlavor::FiveG && matches!(msg, AirMessage::Page(_)) {
                        return Some(Violation::new(
                            "5g_page_identity",
                            format!("5G SN {sn_id} paged by long-term identity"),
                        ));
                    }
                }
                AirIdentity::Suci(bytes) => {
                    for bcd in &msin_bcds {
                        if bytes.windows(bcd.len()).any(|w| w == *bcd) {
                            return Some(Violation::new(
                                "msin_leak",
                                format!("subscriber MSIN bytes visible inside a SUCI on {sn_id}"),
                            ));
                        }
                    }
                }
                AirIdentity::Guti(_) => {}
            }
        }
    }
    None
}
