//! UE/USIM side: identity responses, the pseudonym update rule, SUCI
//! generation, and the retirement policy for old pseudonyms.
//!
//! The UE holds exactly two active pseudonym slots (p1,d1), (p2,d2) with
//! d1 < d2, plus P_UE — older pseudonyms kept only because some serving
//! network may still page the UE by them. Identity responses toward LTE
//! networks use only the slots; toward 5G networks the UE sends a SUCI which
//! additionally reports its counter window (delta_min, delta_max) so the HN
//! can prune and detect corruption.
//!
//! A pseudonym delivered inside an accepted RAND is adopted only when its
//! counter d exceeds d2 (everything else is an old delivery and a no-op),
//! except when the error-correction flag is set: then the whole pseudonym
//! state collapses to ((p, d-1), (p, d)).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aka::{verify_challenge, AkaFlavor, AkaResponse, ChallengeOutcome, RejectReason, SqnState};
use crate::codec::{
    decode_rand_payload, encode_suci, render_pseudonym, Imsi, PseudonymEntry, PseudonymValue,
    RandPayload, Suci, SuciPlaintext, SuciScheme,
};
use crate::crypto::{CryptoSuite, HnPublicKey, MasterKey, PseudonymKey};
use crate::types::{SimTime, DAY};

/// Retirement policy for P_UE.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UePolicy {
    /// A pseudonym whose security contexts are all idle for longer than this
    /// (and all at other SNs) is removed.
    pub max_age: SimTime,
    /// Hard bound on |P_UE|; the oldest counter is evicted beyond it.
    pub max_size: usize,
    /// Re-attach with a slot pseudonym before an old one must be dropped, so
    /// the serving network's context stops pinning it.
    pub reregister_before_drop: bool,
}

impl Default for UePolicy {
    fn default() -> Self {
        Self {
            max_age: DAY,
            max_size: 10,
            reregister_before_drop: false,
        }
    }
}

/// Security context a serving network shares with this UE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GutiContext {
    pub guti: u32,
    /// Pseudonym value the SN knows the UE by; None when the SN learned the
    /// identity from a SUCI.
    pub pseudonym: Option<u64>,
    pub anchor: [u8; 32],
    pub last_used: SimTime,
}

/// What the UE answers to an identity inquiry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdentityResponse {
    /// Rendered pseudonym in IMSI format (LTE); never the true IMSI.
    Pseudonym(Imsi),
    /// Encrypted (or null-scheme) SUCI wire bytes (5G).
    Suci(Vec<u8>),
}

/// Effect of one delivered RAND payload on the pseudonym state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateOutcome {
    /// d > d2: slots shifted, old p1 moved to P_UE.
    Shifted { evicted: Option<PseudonymEntry> },
    /// ECF set: P_UE cleared, slots reset to ((p, d-1), (p, d)).
    Reset { cleared: usize },
    /// Old delivery (d <= d2): no change.
    Noop,
    /// Payload failed a sanity check; state unchanged.
    PayloadCorrupt(&'static str),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UeError {
    #[error("pseudonym payload corrupt: {0}")]
    CorruptPayload(&'static str),
}

/// Reply to an accepted authentication challenge.
#[derive(Debug, Clone)]
pub struct ChallengeReply {
    pub response: AkaResponse,
    pub anchor: [u8; 32],
    pub update: UpdateOutcome,
}

pub struct UsimState {
    pub imsi: Imsi,
    k: MasterKey,
    kappa: PseudonymKey,
    /// HN public key (with its identifier); absent means Release-15 fallback
    /// to the null SUCI scheme.
    pk: Option<(u8, HnPublicKey)>,
    suite: Arc<dyn CryptoSuite>,
    pub slot1: PseudonymEntry,
    pub slot2: PseudonymEntry,
    /// Older pseudonyms by counter; every d here is < d1.
    p_ue: BTreeMap<u32, PseudonymValue>,
    pub sqn: SqnState,
    pub guti_contexts: BTreeMap<String, GutiContext>,
    /// Pseudonym values shown to an SN that has not yet completed an AKA.
    exposure: BTreeMap<String, BTreeSet<u64>>,
    pub current_sn: Option<String>,
    pub policy: UePolicy,
    pub li_key_binding: bool,
}

impl UsimState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        imsi: Imsi,
        k: MasterKey,
        kappa: PseudonymKey,
        pk: Option<(u8, HnPublicKey)>,
        p1: PseudonymEntry,
        p2: PseudonymEntry,
        policy: UePolicy,
        li_key_binding: bool,
        suite: Arc<dyn CryptoSuite>,
    ) -> Self {
        assert!(p1.d < p2.d, "birth pseudonyms must have increasing counters");
        Self {
            imsi,
            k,
            kappa,
            pk,
            suite,
            slot1: p1,
            slot2: p2,
            p_ue: BTreeMap::new(),
            sqn: SqnState::default(),
            guti_contexts: BTreeMap::new(),
            exposure: BTreeMap::new(),
            current_sn: None,
            policy,
            li_key_binding,
        }
    }

    pub fn p_ue_entries(&self) -> Vec<PseudonymEntry> {
        self.p_ue
            .iter()
            .map(|(&d, &v)| PseudonymEntry::new(v, d))
            .collect()
    }

    pub fn holds_value(&self, value: u64) -> bool {
        self.slot1.value.raw() == value
            || self.slot2.value.raw() == value
            || self.p_ue.values().any(|v| v.raw() == value)
    }

    /// (delta_min, delta_max): smallest counter across slots and P_UE, and d2.
    pub fn delta_bounds(&self) -> (u32, u32) {
        let min = self
            .p_ue
            .keys()
            .next()
            .copied()
            .unwrap_or(self.slot1.d)
            .min(self.slot1.d)
            .min(self.slot2.d);
        (min, self.slot2.d)
    }

    fn rendered(&self, entry: PseudonymEntry) -> Imsi {
        render_pseudonym(entry.value, &self.imsi.hn_id())
            .expect("held pseudonyms passed the render check on acceptance")
    }

    /// Answer an LTE identity inquiry. The UE cannot tell a genuine SN from a
    /// catcher, so the answer is the same either way: the freshest slot, or
    /// the older one once the fresh value has already been shown to this SN
    /// without a completed AKA. The true IMSI is never emitted.
    pub fn respond_identity_lte(&mut self, sn_id: &str) -> IdentityResponse {
        let exposed = self.exposure.entry(sn_id.to_string()).or_default();
        let pick = if exposed.contains(&self.slot2.value.raw()) {
            self.slot1
        } else {
            self.slot2
        };
        exposed.insert(pick.value.raw());
        IdentityResponse::Pseudonym(self.rendered(pick))
    }

    /// Answer a 5G identity request with a fresh SUCI carrying the counter
    /// window. Without a provisioned HN key this degrades to the null scheme
    /// (cleartext MSIN), as an unprovisioned Release-15 UE would.
    pub fn respond_identity_5g(&mut self, rng: &mut dyn RngCore) -> IdentityResponse {
        let (delta_min, delta_max) = self.delta_bounds();
        let hnid = self.imsi.hn_id();
        let suci = match &self.pk {
            Some((hnpki, pk)) => {
                let msin = self.imsi.msin();
                let tag = self
                    .suite
                    .mac64(&self.k, &SuciPlaintext::tag_input(msin, delta_min, delta_max));
                let pt = SuciPlaintext {
                    msin,
                    delta_min,
                    delta_max,
                    tag,
                };
                let payload = self.suite.pke_encrypt(
                    pk,
                    &pt.encode().expect("window counters fit their lanes"),
                    (*hnpki, SuciScheme::Hybrid.code()),
                    rng,
                );
                Suci {
                    hnid,
                    hnpki: *hnpki,
                    scheme: SuciScheme::Hybrid,
                    payload,
                }
            }
            None => Suci {
                hnid,
                hnpki: 0,
                scheme: SuciScheme::Null,
                payload: self.imsi.msin().to_bcd().to_vec(),
            },
        };
        IdentityResponse::Suci(encode_suci(&suci))
    }

    fn discard_contexts_for(&mut self, value: u64) {
        self.guti_contexts.retain(|_, c| c.pseudonym != Some(value));
    }

    fn evict_oldest(&mut self) -> Option<PseudonymEntry> {
        let (&d, &value) = self.p_ue.iter().next()?;
        self.p_ue.remove(&d);
        self.discard_contexts_for(value.raw());
        Some(PseudonymEntry::new(value, d))
    }

    /// Apply a delivered pseudonym payload. The caller guarantees the payload
    /// came out of an AUTN-verified RAND; a flag in a failed AKA is ignored
    /// upstream so a forger cannot trigger the reset branch.
    pub fn update_pseudonyms(&mut self, payload: &RandPayload) -> Result<UpdateOutcome, UeError> {
        if payload.ecf > 1 {
            return Err(UeError::CorruptPayload("error flag out of range"));
        }
        if !payload.p.renderable() {
            return Err(UeError::CorruptPayload("pseudonym outside MSIN space"));
        }
        if payload.ecf == 1 {
            if payload.d == 0 {
                return Err(UeError::CorruptPayload("reset counter underflow"));
            }
            let cleared = self.p_ue.len();
            for value in self.p_ue.values().copied().collect::<Vec<_>>() {
                self.discard_contexts_for(value.raw());
            }
            self.p_ue.clear();
            let old = [self.slot1.value.raw(), self.slot2.value.raw()];
            self.slot1 = PseudonymEntry::new(payload.p, payload.d - 1);
            self.slot2 = PseudonymEntry::new(payload.p, payload.d);
            for value in old {
                if value != payload.p.raw() {
                    self.discard_contexts_for(value);
                }
            }
            return Ok(UpdateOutcome::Reset { cleared });
        }
        if payload.d > self.slot2.d {
            self.p_ue.insert(self.slot1.d, self.slot1.value);
            self.slot1 = self.slot2;
            self.slot2 = PseudonymEntry::new(payload.p, payload.d);
            let evicted = if self.p_ue.len() > self.policy.max_size {
                self.evict_oldest()
            } else {
                None
            };
            return Ok(UpdateOutcome::Shifted { evicted });
        }
        Ok(UpdateOutcome::Noop)
    }

    /// Run one authentication challenge: verify AUTN/SQN, and only on
    /// acceptance decrypt the RAND payload and update pseudonym state. The
    /// session anchor binds the MSIN iff both sides run the LI key feature.
    pub fn handle_challenge(
        &mut self,
        rand: &[u8; 16],
        autn: &[u8; 16],
        flavor: AkaFlavor,
        sn_id: &str,
        sn_li_patched: bool,
    ) -> Result<ChallengeReply, RejectReason> {
        let outcome = verify_challenge(
            self.suite.as_ref(),
            &self.k,
            self.sqn.last_accepted,
            rand,
            autn,
            flavor,
            sn_id,
        );
        match outcome {
            ChallengeOutcome::Rejected(reason) => Err(reason),
            ChallengeOutcome::Accepted {
                response,
                material,
                sqn,
            } => {
                self.sqn.last_accepted = sqn;
                let block = self.suite.decrypt_rand(&self.kappa, *rand);
                let payload = decode_rand_payload(&block);
                let update = match self.update_pseudonyms(&payload) {
                    Ok(outcome) => outcome,
                    Err(UeError::CorruptPayload(why)) => UpdateOutcome::PayloadCorrupt(why),
                };
                let binding =
                    (sn_li_patched && self.li_key_binding).then(|| self.imsi.msin());
                let anchor = self.suite.derive_anchor_key(
                    &material,
                    flavor.anchor_flavor(),
                    sn_id,
                    binding,
                );
                Ok(ChallengeReply {
                    response,
                    anchor,
                    update,
                })
            }
        }
    }

    /// Record a completed attach: store the security context under this SN,
    /// clear the exposure ledger (the SN proved itself genuine), and make it
    /// the current SN.
    pub fn note_attach_success(
        &mut self,
        sn_id: &str,
        guti: u32,
        pseudonym_used: Option<u64>,
        anchor: [u8; 32],
        now: SimTime,
    ) {
        self.guti_contexts.insert(
            sn_id.to_string(),
            GutiContext {
                guti,
                pseudonym: pseudonym_used,
                anchor,
                last_used: now,
            },
        );
        self.exposure.remove(sn_id);
        self.current_sn = Some(sn_id.to_string());
    }

    /// Refresh a context's idle clock (service traffic, paging response).
    pub fn touch_context(&mut self, sn_id: &str, now: SimTime) {
        if let Some(ctx) = self.guti_contexts.get_mut(sn_id) {
            ctx.last_used = now;
        }
    }

    pub fn guti_for(&self, sn_id: &str) -> Option<u32> {
        self.guti_contexts.get(sn_id).map(|c| c.guti)
    }

    /// Fault injection: overwrite the newer slot's counter in place, the way
    /// a corrupted USIM write would. Drills use it to force the counter past
    /// everything the HN will ever deliver over LTE.
    pub fn corrupt_slot2_counter(&mut self, d: u32) {
        self.slot2.d = d;
    }

    /// Retire P_UE entries. An entry goes when no security context references
    /// it any more, or when every referencing context has been idle beyond
    /// max_age at some other SN than the current one; entries known to the
    /// current SN are kept regardless of age. Removing a pseudonym discards
    /// its GUTIs and contexts with it. Finally the size bound evicts oldest
    /// counters. Slots are never touched.
    pub fn apply_removal_policy(&mut self, now: SimTime) -> Vec<PseudonymEntry> {
        let mut removed = Vec::new();
        let candidates: Vec<(u32, PseudonymValue)> =
            self.p_ue.iter().map(|(&d, &v)| (d, v)).collect();
        for (d, value) in candidates {
            let refs: Vec<(&String, &GutiContext)> = self
                .guti_contexts
                .iter()
                .filter(|(_, c)| c.pseudonym == Some(value.raw()))
                .collect();
            let removable = refs.iter().all(|(sn, c)| {
                self.current_sn.as_deref() != Some(sn.as_str())
                    && c.last_used.saturating_add(self.policy.max_age) < now
            });
            if removable {
                self.p_ue.remove(&d);
                self.discard_contexts_for(value.raw());
                removed.push(PseudonymEntry::new(value, d));
            }
        }
        while self.p_ue.len() > self.policy.max_size {
            if let Some(entry) = self.evict_oldest() {
                removed.push(entry);
            }
        }
        removed
    }

    /// True when the context at sn_id pins an old P_UE pseudonym — the cue to
    /// re-attach there with a slot pseudonym so the old one becomes droppable.
    pub fn needs_reregistration(&self, sn_id: &str) -> bool {
        self.guti_contexts
            .get(sn_id)
            .and_then(|c| c.pseudonym)
            .is_some_and(|v| {
                v != self.slot1.value.raw()
                    && v != self.slot2.value.raw()
                    && self.p_ue.values().any(|pv| pv.raw() == v)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_rand_payload;
    use crate::crypto::ReferenceSuite;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn entry(value: u64, d: u32) -> PseudonymEntry {
        PseudonymEntry::new(PseudonymValue::new(value).unwrap(), d)
    }

    fn test_ue() -> UsimState {
        let imsi = Imsi::parse("244999123456789").unwrap();
        UsimState::new(
            imsi,
            MasterKey([1; 16]),
            PseudonymKey([2; 16]),
            None,
            entry(11, 1),
            entry(22, 2),
            UePolicy::default(),
            false,
            Arc::new(ReferenceSuite),
        )
    }

    fn pseudonym_value(r: &IdentityResponse) -> u64 {
        match r {
            IdentityResponse::Pseudonym(imsi) => imsi.msin().value(),
            other => panic!("expected pseudonym, got {other:?}"),
        }
    }

    #[test]
    fn lte_identity_prefers_fresh_slot_then_falls_back_once() {
        let mut ue = test_ue();
        // Fresh SN sees p2; a repeat inquiry without completed AKA sees p1;
        // further repeats stay within {p1, p2}.
        assert_eq!(pseudonym_value(&ue.respond_identity_lte("catcher")), 22);
        assert_eq!(pseudonym_value(&ue.respond_identity_lte("catcher")), 11);
        assert_eq!(pseudonym_value(&ue.respond_identity_lte("catcher")), 11);
        // A different SN is a separate exposure ledger.
        assert_eq!(pseudonym_value(&ue.respond_identity_lte("real-sn")), 22);
        // Completed AKA clears the ledger.
        ue.note_attach_success("catcher", 7, Some(22), [0; 32], 10);
        assert_eq!(pseudonym_value(&ue.respond_identity_lte("catcher")), 22);
        // The true MSIN never appears.
        for sn in ["catcher", "real-sn", "x"] {
            let v = pseudonym_value(&ue.respond_identity_lte(sn));
            assert_ne!(v, ue.imsi.msin().value());
        }
    }

    #[test]
    fn shift_moves_old_slot1_to_p_ue() {
        let mut ue = test_ue();
        let outcome = ue
            .update_pseudonyms(&RandPayload {
                p: PseudonymValue::new(33).unwrap(),
                d: 3,
                ecf: 0,
                salt: 0,
            })
            .unwrap();
        assert_eq!(outcome, UpdateOutcome::Shifted { evicted: None });
        assert_eq!(ue.slot1, entry(22, 2));
        assert_eq!(ue.slot2, entry(33, 3));
        assert_eq!(ue.p_ue_entries(), vec![entry(11, 1)]);
        assert_eq!(ue.delta_bounds(), (1, 3));
    }

    #[test]
    fn old_delivery_is_a_noop() {
        let mut ue = test_ue();
        for d in [0, 1, 2] {
            let outcome = ue
                .update_pseudonyms(&RandPayload {
                    p: PseudonymValue::new(99).unwrap(),
                    d,
                    ecf: 0,
                    salt: 7,
                })
                .unwrap();
            assert_eq!(outcome, UpdateOutcome::Noop);
        }
        assert_eq!(ue.slot1, entry(11, 1));
        assert_eq!(ue.slot2, entry(22, 2));
        assert!(ue.p_ue_entries().is_empty());
    }

    #[test]
    fn ecf_reset_collapses_state() {
        let mut ue = test_ue();
        // Corrupt d2 upward, accumulate some P_UE, then reset.
        ue.slot2.d = 1_000_000;
        ue.p_ue.insert(0, PseudonymValue::new(5).unwrap());
        ue.guti_contexts.insert(
            "sn-a".into(),
            GutiContext {
                guti: 1,
                pseudonym: Some(5),
                anchor: [0; 32],
                last_used: 0,
            },
        );
        let outcome = ue
            .update_pseudonyms(&RandPayload {
                p: PseudonymValue::new(44).unwrap(),
                d: 9,
                ecf: 1,
                salt: 0,
            })
            .unwrap();
        assert_eq!(outcome, UpdateOutcome::Reset { cleared: 1 });
        assert_eq!(ue.slot1, entry(44, 8));
        assert_eq!(ue.slot2, entry(44, 9));
        assert!(ue.p_ue_entries().is_empty());
        // Contexts of vanished pseudonyms go with them.
        assert!(ue.guti_contexts.is_empty());
    }

    #[test]
    fn corrupt_payloads_leave_state_unchanged() {
        let mut ue = test_ue();
        let before = (ue.slot1, ue.slot2, ue.p_ue_entries());
        let cases = [
            // ECF reset with d = 0 would underflow.
            RandPayload {
                p: PseudonymValue::new(1).unwrap(),
                d: 0,
                ecf: 1,
                salt: 0,
            },
            // Flag outside {0, 1}.
            RandPayload {
                p: PseudonymValue::new(1).unwrap(),
                d: 3,
                ecf: 2,
                salt: 0,
            },
            // Value that cannot render as a 10-digit MSIN.
            RandPayload {
                p: PseudonymValue::new(10_000_000_000).unwrap(),
                d: 3,
                ecf: 0,
                salt: 0,
            },
        ];
        for payload in cases {
            assert!(ue.update_pseudonyms(&payload).is_err());
            assert_eq!((ue.slot1, ue.slot2, ue.p_ue_entries()), before);
        }
    }

    #[test]
    fn shift_evicts_oldest_beyond_max_size() {
        let mut ue = test_ue();
        ue.policy.max_size = 2;
        for d in 3..=5 {
            ue.update_pseudonyms(&RandPayload {
                p: PseudonymValue::new(100 + u64::from(d)).unwrap(),
                d,
                ecf: 0,
                salt: 0,
            })
            .unwrap();
        }
        // Slots are d=4,5; P_UE kept at the two freshest old counters.
        assert_eq!(ue.p_ue_entries().iter().map(|e| e.d).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn delta_bounds_track_global_minimum() {
        let mut ue = test_ue();
        assert_eq!(ue.delta_bounds(), (1, 2));
        ue.slot1 = entry(40, 4);
        ue.slot2 = entry(50, 5);
        ue.p_ue.insert(1, PseudonymValue::new(60).unwrap());
        assert_eq!(ue.delta_bounds(), (1, 5));
    }

    #[test]
    fn suci_carries_window_and_is_fresh_per_call() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let suite = ReferenceSuite;
        let (_sk, pk) = suite.generate_keypair(&mut rng);
        let mut ue = test_ue();
        ue.pk = Some((1, pk));
        let a = ue.respond_identity_5g(&mut rng);
        let b = ue.respond_identity_5g(&mut rng);
        let (IdentityResponse::Suci(a), IdentityResponse::Suci(b)) = (&a, &b) else {
            panic!("expected SUCIs");
        };
        assert_ne!(a, b, "same state must still yield distinct ciphertexts");
        let suci = crate::codec::decode_suci(a).unwrap();
        assert_eq!(suci.scheme, SuciScheme::Hybrid);
        assert_eq!(suci.hnid, ue.imsi.hn_id());
        // The MSIN appears nowhere in the ciphertext bytes.
        let bcd = ue.imsi.msin().to_bcd();
        assert!(!a.windows(bcd.len()).any(|w| w == bcd));
    }

    #[test]
    fn suci_without_key_falls_back_to_null_scheme() {
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        let mut ue = test_ue();
        let IdentityResponse::Suci(bytes) = ue.respond_identity_5g(&mut rng) else {
            panic!("expected SUCI");
        };
        let suci = crate::codec::decode_suci(&bytes).unwrap();
        assert_eq!(suci.scheme, SuciScheme::Null);
        assert_eq!(suci.payload, ue.imsi.msin().to_bcd().to_vec());
    }

    #[test]
    fn removal_policy_age_current_sn_and_context_rules() {
        let mut ue = test_ue();
        ue.p_ue.insert(0, PseudonymValue::new(5).unwrap()); // contextless
        for d in 3..=6 {
            ue.update_pseudonyms(&RandPayload {
                p: PseudonymValue::new(100 + u64::from(d)).unwrap(),
                d,
                ecf: 0,
                salt: 0,
            })
            .unwrap();
        }
        // P_UE now holds d = 0 (contextless), 1, 2, 3, 4.
        let val = |d: u32| ue.p_ue.get(&d).unwrap().raw();
        let ctx = |p, last_used| GutiContext {
            guti: 0,
            pseudonym: Some(p),
            anchor: [0; 32],
            last_used,
        };
        ue.guti_contexts.insert("sn-a".into(), ctx(val(1), 0)); // stale, other SN
        ue.guti_contexts.insert("sn-b".into(), ctx(val(2), 95_000)); // fresh
        ue.guti_contexts.insert("sn-c".into(), ctx(val(3), 0)); // stale but current
        ue.current_sn = Some("sn-c".into());

        let removed = ue.apply_removal_policy(100_000);
        let removed_ds: Vec<u32> = removed.iter().map(|e| e.d).collect();
        // d=0 contextless and d=1 stale-elsewhere go; d=2 fresh, d=3 current
        // SN, d=4 contextless? no — d=4 was just shifted out and has no
        // context, so it goes too.
        assert_eq!(removed_ds, vec![0, 1, 4]);
        assert!(!ue.guti_contexts.contains_key("sn-a"));
        assert!(ue.guti_contexts.contains_key("sn-b"));
        assert!(ue.guti_contexts.contains_key("sn-c"));
        // Slots are never candidates.
        assert_eq!(ue.slot1.d, 5);
        assert_eq!(ue.slot2.d, 6);
    }

    #[test]
    fn reregistration_cue_fires_only_for_pinned_old_entries() {
        let mut ue = test_ue();
        ue.update_pseudonyms(&RandPayload {
            p: PseudonymValue::new(33).unwrap(),
            d: 3,
            ecf: 0,
            salt: 0,
        })
        .unwrap();
        let old = ue.p_ue_entries()[0].value.raw();
        ue.note_attach_success("sn-a", 9, Some(old), [0; 32], 50);
        assert!(ue.needs_reregistration("sn-a"));
        // Fresh attach under the current slot replaces the context.
        ue.note_attach_success("sn-a", 10, Some(ue.slot2.value.raw()), [0; 32], 60);
        assert!(!ue.needs_reregistration("sn-a"));
        // Now the old entry is contextless and a sweep drops it.
        let removed = ue.apply_removal_policy(61);
        assert!(removed.iter().any(|e| e.value.raw() == old));
        // 5G contexts (no pseudonym) never pin anything.
        ue.note_attach_success("nr-1", 11, None, [0; 32], 70);
        assert!(!ue.needs_reregistration("nr-1"));
    }

    /// End-to-end challenge handling against hand-built vectors.
    #[test]
    fn challenge_accept_updates_and_forgery_is_inert() {
        let suite = ReferenceSuite;
        let mut ue = test_ue();
        let k = MasterKey([1; 16]);
        let kappa = PseudonymKey([2; 16]);

        // Genuine RAND carrying (p=777, d=3).
        let payload = RandPayload {
            p: PseudonymValue::new(777).unwrap(),
            d: 3,
            ecf: 0,
            salt: 0xabcdef,
        };
        let rand = suite.encrypt_rand(&kappa, encode_rand_payload(&payload).unwrap());
        let out = suite.aka_functions(&k, &rand, 1, crate::aka::AMF_DEFAULT);
        let autn = crate::aka::assemble_autn(1, &out.ak, crate::aka::AMF_DEFAULT, &out.mac_a);

        let reply = ue
            .handle_challenge(&rand, &autn, AkaFlavor::Lte, "lte-1", false)
            .unwrap();
        assert_eq!(reply.update, UpdateOutcome::Shifted { evicted: None });
        assert_eq!(reply.response, AkaResponse::Res(out.xres));
        assert_eq!(ue.slot2, entry(777, 3));
        assert_eq!(ue.sqn.last_accepted, 1);

        // Replay of the same SQN is rejected and changes nothing.
        let before = (ue.slot1, ue.slot2, ue.p_ue_entries());
        assert_eq!(
            ue.handle_challenge(&rand, &autn, AkaFlavor::Lte, "lte-1", false)
                .unwrap_err(),
            RejectReason::SqnReplay
        );
        assert_eq!((ue.slot1, ue.slot2, ue.p_ue_entries()), before);

        // Forged RANDs (no knowledge of K) never reach the update rule.
        let mut rng = ChaCha20Rng::seed_from_u64(33);
        for _ in 0..50 {
            let mut forged = [0u8; 16];
            let mut forged_autn = [0u8; 16];
            rng.fill_bytes(&mut forged);
            rng.fill_bytes(&mut forged_autn);
            assert_eq!(
                ue.handle_challenge(&forged, &forged_autn, AkaFlavor::Lte, "evil", false)
                    .unwrap_err(),
                RejectReason::MacFailure
            );
        }
        assert_eq!((ue.slot1, ue.slot2, ue.p_ue_entries()), before);
    }
}
