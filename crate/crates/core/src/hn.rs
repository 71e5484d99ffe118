//! Home-network state machine.
//!
//! Per subscriber the HN keeps a chain of three pseudonym slots — current
//! (p_c), next (p_n), future (p_f) — plus the overflow set P_HN of older
//! pseudonyms the UE may still rely on, a strictly increasing allocation
//! counter CTR, and the SQN counter for AKA vectors. Pseudonyms live in a
//! pool of 10^S values; every allocation is logged for billing and released
//! values return to the pool only through SUCI-driven pruning.
//!
//! State transitions:
//! * LTE AV request: ensure a future pseudonym exists (allocate unless the
//!   P_HN cap is reached, in which case the same p_n is embedded), embed it
//!   in the encrypted RAND payload.
//! * Location update for q: if q is p_n or p_f and a future slot exists,
//!   shift the chain (p_c into P_HN); otherwise state is unchanged.
//! * SUCI AV request: decrypt, verify the tag T, embed as in LTE but with
//!   ECF=1 when the reported delta_max exceeds the embedded counter, then
//!   prune every P_HN entry with d < delta_min.
//! * 5G confirmation: on RES* match, rotate iff the run was SUCI-initiated
//!   and the embedded pseudonym is still p_f.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aka::{assemble_autn, AkaFlavor, AuthVector, ResponseCheck};
use crate::codec::{
    decode_suci, encode_rand_payload, HnId, Imsi, Msin, PseudonymEntry, PseudonymValue,
    RandPayload, Suci, SuciPlaintext, SuciScheme, D_MAX, SALT_MAX, SUCI_PLAINTEXT_LEN,
};
use crate::crypto::{ct_eq, CryptoSuite, HnPublicKey, HnSecretKey, MasterKey, PseudonymKey};
use crate::types::SimTime;

/// Home-network configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HnConfig {
    pub id: HnId,
    /// S: pseudonyms are drawn uniformly from [0, 10^S).
    pub pool_digits: u32,
    /// Per-subscriber bound on |P_HN|.
    pub cap_c: usize,
    /// Lawful-interception feature: bind session keys to the MSIN for
    /// LI-flagged serving networks.
    pub li_key_binding: bool,
    /// CDR resolution grace window after a pseudonym's release; defaults to
    /// the GUTI lifetime.
    pub guti_grace: SimTime,
    pub amf: u16,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HnError {
    #[error("unknown subscriber identity {0}")]
    UnknownSubscriber(Imsi),
    #[error("identity {0} does not belong to this home network")]
    WrongHomeNetwork(Imsi),
    #[error("pseudonym pool exhausted")]
    PoolExhausted,
    #[error("pinned pseudonym {0} is already allocated")]
    PinUnavailable(u64),
    #[error("allocation counter exhausted for {0}")]
    CounterOverflow(Imsi),
    #[error("no key pair installed for hnpki {0}")]
    UnknownHnpki(u8),
    #[error("SUCI rejected: {0}")]
    SuciRejected(SuciReject),
    #[error("batch size {0} outside 1..=8")]
    BadBatchSize(usize),
}

/// Why an incoming SUCI produced no AV. None of these mutate state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuciReject {
    Malformed(String),
    DecryptionFailure,
    /// Plaintext tag T does not verify under the claimed subscriber's K.
    TagMismatch,
    UnknownMsin,
}

impl std::fmt::Display for SuciReject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SuciReject::Malformed(m) => write!(f, "malformed ({m})"),
            SuciReject::DecryptionFailure => f.write_str("decryption failure"),
            SuciReject::TagMismatch => f.write_str("tag mismatch"),
            SuciReject::UnknownMsin => f.write_str("unknown msin"),
        }
    }
}

/// One subscriber's HN-side state.
#[derive(Debug, Clone)]
pub struct SubscriberRecord {
    pub imsi: Imsi,
    pub k: MasterKey,
    pub kappa: PseudonymKey,
    pub slot_c: PseudonymEntry,
    pub slot_n: PseudonymEntry,
    pub slot_f: Option<PseudonymEntry>,
    /// Older pseudonyms the UE may still hold; every entry has d < slot_c.d.
    pub p_hn: BTreeSet<PseudonymEntry>,
    /// Next allocation counter value (the d the next pseudonym will get).
    pub ctr: u32,
    /// Last issued SQN.
    pub sqn: u64,
}

impl SubscriberRecord {
    /// Slot-chain entries plus P_HN: every (value, d) pair the HN currently
    /// associates with this subscriber.
    pub fn live_entries(&self) -> Vec<PseudonymEntry> {
        let mut out = vec![self.slot_c, self.slot_n];
        out.extend(self.slot_f);
        out.extend(self.p_hn.iter().copied());
        out
    }

    pub fn holds_pair(&self, entry: &PseudonymEntry) -> bool {
        self.slot_c == *entry
            || self.slot_n == *entry
            || self.slot_f.as_ref() == Some(entry)
            || self.p_hn.contains(entry)
    }

    /// Value-level membership, ignoring counters. After an error-correction
    /// reset the UE holds a synthetic (p, d-1) twin whose counter the HN
    /// never issued; the value itself must still resolve here.
    pub fn holds_value(&self, value: &PseudonymValue) -> bool {
        self.live_entries().iter().any(|e| e.value == *value)
    }
}

/// Uniform rejection-sampling allocator over [0, 10^S).
#[derive(Debug, Clone)]
pub struct PseudonymPool {
    space: u64,
    allocated: HashSet<u64>,
    /// Total draws across all allocations; mean tries = tries_total /
    /// allocations ≈ 1 / (1 - occupancy).
    pub tries_total: u64,
    pub allocations: u64,
}

impl PseudonymPool {
    pub fn new(pool_digits: u32) -> Self {
        assert!(
            (1..=10).contains(&pool_digits),
            "pool digits must be in 1..=10 so every value renders as an MSIN"
        );
        Self {
            space: 10u64.pow(pool_digits),
            allocated: HashSet::new(),
            tries_total: 0,
            allocations: 0,
        }
    }

    pub fn space(&self) -> u64 {
        self.space
    }

    pub fn allocated_count(&self) -> usize {
        self.allocated.len()
    }

    pub fn occupancy(&self) -> f64 {
        self.allocated.len() as f64 / self.space as f64
    }

    pub fn contains(&self, value: u64) -> bool {
        self.allocated.contains(&value)
    }

    /// Marks a specific value as taken (subscriber MSINs, pinned provisioning
    /// pseudonyms, scenario-reserved filler). Values outside the pool space
    /// are ignored: they can never collide with an allocation.
    pub fn reserve(&mut self, value: u64) -> Result<(), HnError> {
        if value >= self.space {
            return Ok(());
        }
        if !self.allocated.insert(value) {
            return Err(HnError::PinUnavailable(value));
        }
        Ok(())
    }

    /// Draws uniformly until an unallocated value comes up. Returns the value
    /// and the number of tries the rejection loop took.
    pub fn allocate(&mut self, rng: &mut dyn RngCore) -> Result<(u64, u32), HnError> {
        if self.allocated.len() as u64 >= self.space {
            return Err(HnError::PoolExhausted);
        }
        let mut tries = 0u32;
        loop {
            tries += 1;
            let candidate = rng.gen_range(0..self.space);
            if self.allocated.insert(candidate) {
                self.tries_total += u64::from(tries);
                self.allocations += 1;
                return Ok((candidate, tries));
            }
        }
    }

    pub fn release(&mut self, value: u64) {
        self.allocated.remove(&value);
    }
}

/// One allocation-log row. Entries are append-only for the lifetime of a run;
/// release only timestamps them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationLogEntry {
    pub pseudonym: u64,
    pub imsi: Imsi,
    pub t_alloc: SimTime,
    /// First successful AKA where the subscriber used this pseudonym as its
    /// identity (not when it was merely delivered).
    pub t_first_aka: Option<SimTime>,
    pub t_released: Option<SimTime>,
    /// Serving networks the subscriber attached with under this pseudonym.
    pub sns_used: Vec<String>,
}

/// Charging record a serving network emits for consumed service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdrRecord {
    pub sn_id: String,
    pub identity: Imsi,
    pub service_units: u32,
    pub t_event: SimTime,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BillingError {
    #[error("unresolvable CDR for {identity} at {sn_id} t={t_event}: {reason}")]
    Unresolvable {
        identity: Imsi,
        sn_id: String,
        t_event: SimTime,
        reason: String,
    },
}

/// Append-only allocation history with holder-interval CDR resolution.
#[derive(Debug, Clone, Default)]
pub struct AllocationLog {
    pub entries: Vec<AllocationLogEntry>,
    by_value: BTreeMap<u64, Vec<usize>>,
}

impl AllocationLog {
    pub fn from_entries(entries: Vec<AllocationLogEntry>) -> Self {
        let mut log = AllocationLog::default();
        for entry in entries {
            log.push(entry);
        }
        log
    }

    fn push(&mut self, entry: AllocationLogEntry) {
        self.by_value
            .entry(entry.pseudonym)
            .or_default()
            .push(self.entries.len());
        self.entries.push(entry);
    }

    fn record_alloc(&mut self, pseudonym: u64, imsi: Imsi, t_alloc: SimTime) {
        self.push(AllocationLogEntry {
            pseudonym,
            imsi,
            t_alloc,
            t_first_aka: None,
            t_released: None,
            sns_used: Vec::new(),
        });
    }

    fn live_entry_mut(&mut self, pseudonym: u64) -> Option<&mut AllocationLogEntry> {
        let idx = self
            .by_value
            .get(&pseudonym)?
            .iter()
            .rev()
            .copied()
            .find(|&i| self.entries[i].t_released.is_none())?;
        Some(&mut self.entries[idx])
    }

    fn note_use(&mut self, pseudonym: u64, sn_id: &str, now: SimTime) {
        if let Some(entry) = self.live_entry_mut(pseudonym) {
            entry.t_first_aka.get_or_insert(now);
            if !entry.sns_used.iter().any(|s| s == sn_id) {
                entry.sns_used.push(sn_id.to_string());
            }
        }
    }

    fn note_release(&mut self, pseudonym: u64, now: SimTime) {
        if let Some(entry) = self.live_entry_mut(pseudonym) {
            entry.t_released = Some(now);
        }
    }

    /// Maps a CDR to the subscriber that incurred it.
    ///
    /// Raw-IMSI CDRs resolve to themselves. Pseudonym CDRs resolve by holder
    /// interval [t_alloc, t_released), with one correction: a GUTI obtained
    /// under a pseudonym outlives the pseudonym's release, so a CDR whose SN
    /// appears in a *previous* holder's sns_used and whose time falls inside
    /// [t_first_aka, t_released + grace) belongs to that previous holder —
    /// unless the current holder has itself attached at that SN.
    pub fn resolve_cdr(
        &self,
        cdr: &CdrRecord,
        true_msins: &BTreeMap<u64, Imsi>,
        grace: SimTime,
    ) -> Result<Imsi, BillingError> {
        let value = cdr.identity.msin().value();
        if let Some(imsi) = true_msins.get(&value) {
            return Ok(*imsi);
        }
        let unresolvable = |reason: &str| BillingError::Unresolvable {
            identity: cdr.identity,
            sn_id: cdr.sn_id.clone(),
            t_event: cdr.t_event,
            reason: reason.to_string(),
        };
        let indices = self
            .by_value
            .get(&value)
            .ok_or_else(|| unresolvable("pseudonym never allocated"))?;
        let entries: Vec<&AllocationLogEntry> =
            indices.iter().map(|&i| &self.entries[i]).collect();

        let covers_live = |e: &AllocationLogEntry| {
            cdr.t_event >= e.t_alloc && e.t_released.map_or(true, |t| cdr.t_event < t)
        };
        let used_sn = |e: &AllocationLogEntry| e.sns_used.iter().any(|s| s == &cdr.sn_id);

        // Holder that both covers the instant and attached at the CDR's SN.
        if let Some(e) = entries.iter().find(|e| covers_live(e) && used_sn(e)) {
            return Ok(e.imsi);
        }
        // Stale-GUTI correction: latest previous holder whose security
        // context at this SN was still within grace.
        if let Some(e) = entries
            .iter()
            .filter(|e| {
                used_sn(e)
                    && e.t_first_aka.is_some_and(|t| cdr.t_event >= t)
                    && e.t_released
                        .is_some_and(|t| cdr.t_event < t.saturating_add(grace))
            })
            .max_by_key(|e| e.t_released)
        {
            return Ok(e.imsi);
        }
        // Plain interval ownership.
        if let Some(e) = entries.iter().find(|e| covers_live(e)) {
            return Ok(e.imsi);
        }
        Err(unresolvable("no holder interval covers the event"))
    }
}

/// Everything the HN returns for one 5G AV request.
#[derive(Debug, Clone)]
pub struct FiveGAvBundle {
    pub av: AuthVector,
    pub pending: PendingFiveG,
    /// P_HN entries released by this request's pruning step.
    pub pruned: Vec<PseudonymEntry>,
    /// Newly allocated future pseudonym, if the request triggered one.
    pub allocated: Option<PseudonymEntry>,
    pub ecf: bool,
}

/// HN-side record of an unconfirmed 5G AKA run.
#[derive(Debug, Clone)]
pub struct PendingFiveG {
    pub imsi: Imsi,
    pub xres_star: [u8; 16],
    pub embedded: PseudonymEntry,
    /// True iff the run was identified by a verified SUCI (rotation on
    /// success applies only then).
    pub suci_initiated: bool,
    pub sn_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confirm5gOutcome {
    pub accepted: bool,
    pub rotated: bool,
}

/// Result of an LTE AV request.
#[derive(Debug, Clone)]
pub struct LteAvBundle {
    pub avs: Vec<AuthVector>,
    pub embedded: PseudonymEntry,
    /// Newly allocated future pseudonym, if any.
    pub allocated: Option<PseudonymEntry>,
    /// True when the request was served at the P_HN cap (embedded == p_n).
    pub at_cap: bool,
}

pub struct HomeNetwork {
    pub config: HnConfig,
    suite: Arc<dyn CryptoSuite>,
    subs: BTreeMap<Imsi, SubscriberRecord>,
    /// Live pseudonym value -> owning subscriber.
    by_pseudonym: BTreeMap<u64, Imsi>,
    /// True MSIN value -> subscriber.
    by_msin: BTreeMap<u64, Imsi>,
    pub pool: PseudonymPool,
    pub log: AllocationLog,
    key_pairs: BTreeMap<u8, (HnSecretKey, HnPublicKey)>,
}

impl HomeNetwork {
    pub fn new(config: HnConfig, suite: Arc<dyn CryptoSuite>) -> Self {
        let pool = PseudonymPool::new(config.pool_digits);
        Self {
            config,
            suite,
            subs: BTreeMap::new(),
            by_pseudonym: BTreeMap::new(),
            by_msin: BTreeMap::new(),
            pool,
            log: AllocationLog::default(),
            key_pairs: BTreeMap::new(),
        }
    }

    pub fn install_keypair(&mut self, hnpki: u8, sk: HnSecretKey, pk: HnPublicKey) {
        self.key_pairs.insert(hnpki, (sk, pk));
    }

    pub fn public_key(&self, hnpki: u8) -> Option<&HnPublicKey> {
        self.key_pairs.get(&hnpki).map(|(_, pk)| pk)
    }

    pub fn suite(&self) -> &Arc<dyn CryptoSuite> {
        &self.suite
    }

    pub fn subscriber(&self, imsi: &Imsi) -> Option<&SubscriberRecord> {
        self.subs.get(imsi)
    }

    pub fn subscribers(&self) -> impl Iterator<Item = &SubscriberRecord> {
        self.subs.values()
    }

    pub fn true_msins(&self) -> &BTreeMap<u64, Imsi> {
        &self.by_msin
    }

    /// Test-only backdoor for the synchronization checker's sanity case:
    /// deletes a pair from P_HN without releasing it anywhere else.
    pub fn backdoor_delete_from_phn(&mut self, imsi: &Imsi, entry: &PseudonymEntry) -> bool {
        self.subs
            .get_mut(imsi)
            .map(|sub| sub.p_hn.remove(entry))
            .unwrap_or(false)
    }

    /// Registers a subscriber: reserves its MSIN in the pool, allocates (or
    /// pins) the two birth pseudonyms with counters 1 and 2, and opens their
    /// log entries.
    pub fn provision_subscriber(
        &mut self,
        msin: Msin,
        k: MasterKey,
        kappa: Option<PseudonymKey>,
        pinned: Option<(u64, u64)>,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Result<Imsi, HnError> {
        let imsi = Imsi::from_parts(&self.config.id, msin);
        self.pool.reserve(msin.value())?;
        let (v1, v2) = match pinned {
            Some((a, b)) => {
                self.pool.reserve(a)?;
                self.pool.reserve(b)?;
                (a, b)
            }
            None => (self.pool.allocate(rng)?.0, self.pool.allocate(rng)?.0),
        };
        let p1 = PseudonymEntry::new(PseudonymValue::new(v1).expect("pool values fit"), 1);
        let p2 = PseudonymEntry::new(PseudonymValue::new(v2).expect("pool values fit"), 2);
        let kappa = kappa.unwrap_or_else(|| self.suite.derive_pseudonym_key(&k));
        let record = SubscriberRecord {
            imsi,
            k,
            kappa,
            slot_c: p1,
            slot_n: p2,
            slot_f: None,
            p_hn: BTreeSet::new(),
            ctr: 3,
            sqn: 0,
        };
        self.by_msin.insert(msin.value(), imsi);
        self.by_pseudonym.insert(v1, imsi);
        self.by_pseudonym.insert(v2, imsi);
        self.log.record_alloc(v1, imsi, now);
        self.log.record_alloc(v2, imsi, now);
        self.subs.insert(imsi, record);
        Ok(imsi)
    }

    /// Maps an IMSI-shaped identity (true IMSI or rendered pseudonym) to the
    /// canonical subscriber IMSI.
    pub fn lookup_identity(&self, q: &Imsi) -> Result<Imsi, HnError> {
        if q.hn_id() != self.config.id {
            return Err(HnError::WrongHomeNetwork(*q));
        }
        let value = q.msin().value();
        self.by_msin
            .get(&value)
            .or_else(|| self.by_pseudonym.get(&value))
            .copied()
            .ok_or(HnError::UnknownSubscriber(*q))
    }

    /// Algorithm step shared by both flavors: pick the pseudonym to embed.
    /// Allocates a future pseudonym when the slot is empty and |P_HN| is
    /// under the cap; at the cap the HN keeps embedding p_n and never
    /// allocates.
    fn choose_embedded(
        &mut self,
        imsi: &Imsi,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Result<(PseudonymEntry, Option<PseudonymEntry>, bool), HnError> {
        let cap = self.config.cap_c;
        let sub = self.subs.get_mut(imsi).expect("caller resolved imsi");
        if let Some(f) = sub.slot_f {
            return Ok((f, None, false));
        }
        if sub.p_hn.len() >= cap {
            return Ok((sub.slot_n, None, true));
        }
        if sub.ctr > D_MAX {
            return Err(HnError::CounterOverflow(*imsi));
        }
        let (value, _tries) = self.pool.allocate(rng)?;
        let sub = self.subs.get_mut(imsi).expect("still present");
        let entry = PseudonymEntry::new(PseudonymValue::new(value).expect("pool values fit"), sub.ctr);
        sub.ctr += 1;
        sub.slot_f = Some(entry);
        self.by_pseudonym.insert(value, *imsi);
        self.log.record_alloc(value, *imsi, now);
        Ok((entry, Some(entry), false))
    }

    fn encrypted_rand(
        &mut self,
        imsi: &Imsi,
        embedded: PseudonymEntry,
        ecf: bool,
        rng: &mut dyn RngCore,
    ) -> [u8; 16] {
        let salt: u128 = rng.gen::<u128>() & SALT_MAX;
        let payload = RandPayload {
            p: embedded.value,
            d: embedded.d,
            ecf: ecf as u8,
            salt,
        };
        let block = encode_rand_payload(&payload).expect("fields are width-checked");
        let kappa = self.subs[imsi].kappa;
        self.suite.encrypt_rand(&kappa, block)
    }

    /// Builds one vector for the subscriber, advancing its SQN.
    fn build_av(
        &mut self,
        imsi: &Imsi,
        rand: [u8; 16],
        flavor: AkaFlavor,
        sn_id: &str,
        li_patched: bool,
    ) -> (AuthVector, Option<[u8; 16]>) {
        let amf = self.config.amf;
        let li_binding = li_patched && self.config.li_key_binding;
        let sub = self.subs.get_mut(imsi).expect("caller resolved imsi");
        sub.sqn = (sub.sqn + 1) & crate::aka::SQN_MASK;
        let sqn = sub.sqn;
        let k = sub.k;
        let msin = sub.imsi.msin();
        let out = self.suite.aka_functions(&k, &rand, sqn, amf);
        let autn = assemble_autn(sqn, &out.ak, amf, &out.mac_a);
        let msin_binding = li_binding.then_some(msin);
        let anchor =
            self.suite
                .derive_anchor_key(&out.material, flavor.anchor_flavor(), sn_id, msin_binding);
        match flavor {
            AkaFlavor::Lte => (
                AuthVector {
                    flavor,
                    rand,
                    autn,
                    check: ResponseCheck::Xres(out.xres),
                    anchor,
                    msin: li_patched.then_some(msin),
                },
                None,
            ),
            AkaFlavor::FiveG => {
                let xres_star = self.suite.res_star(&out.material, sn_id, &rand, &out.xres);
                let hxres_star = self.suite.hres_star(&rand, &xres_star);
                (
                    AuthVector {
                        flavor,
                        rand,
                        autn,
                        check: ResponseCheck::HxresStar(hxres_star),
                        anchor,
                        msin: li_patched.then_some(msin),
                    },
                    Some(xres_star),
                )
            }
        }
    }

    /// LTE AV request, optionally batched. Every vector in the batch embeds
    /// the same pseudonym under a fresh salt and SQN.
    pub fn handle_av_request_lte(
        &mut self,
        q: &Imsi,
        sn_id: &str,
        li_patched: bool,
        count: usize,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Result<LteAvBundle, HnError> {
        if !(1..=8).contains(&count) {
            return Err(HnError::BadBatchSize(count));
        }
        let imsi = self.lookup_identity(q)?;
        let (embedded, allocated, at_cap) = self.choose_embedded(&imsi, now, rng)?;
        let mut avs = Vec::with_capacity(count);
        for _ in 0..count {
            let rand = self.encrypted_rand(&imsi, embedded, false, rng);
            let (av, _) = self.build_av(&imsi, rand, AkaFlavor::Lte, sn_id, li_patched);
            avs.push(av);
        }
        Ok(LteAvBundle {
            avs,
            embedded,
            allocated,
            at_cap,
        })
    }

    /// Location update for identity q after a completed LTE AKA at sn_id.
    /// Rotates the slot chain iff q is p_n or p_f and a future slot exists;
    /// always records pseudonym usage in the allocation log.
    pub fn handle_lu(&mut self, q: &Imsi, sn_id: &str, now: SimTime) -> Result<bool, HnError> {
        let imsi = self.lookup_identity(q)?;
        let value = q.msin().value();
        let is_pseudonym = self.by_pseudonym.get(&value) == Some(&imsi);
        if is_pseudonym {
            self.log.note_use(value, sn_id, now);
        }
        let sub = self.subs.get_mut(&imsi).expect("resolved");
        let q_matches = is_pseudonym
            && (sub.slot_n.value.raw() == value
                || sub.slot_f.map_or(false, |f| f.value.raw() == value));
        if !q_matches || sub.slot_f.is_none() {
            return Ok(false);
        }
        let old_c = sub.slot_c;
        sub.p_hn.insert(old_c);
        sub.slot_c = sub.slot_n;
        sub.slot_n = sub.slot_f.take().expect("checked above");
        Ok(true)
    }

    /// 5G AV request identified by SUCI. Decrypts and verifies the counter
    /// window, chooses the embedded pseudonym (allocating as in LTE), sets
    /// ECF=1 when delta_max exceeds the embedded counter, then prunes P_HN
    /// entries below delta_min. Rejections mutate nothing.
    pub fn handle_suci_av_request(
        &mut self,
        suci_bytes: &[u8],
        sn_id: &str,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Result<FiveGAvBundle, HnError> {
        let reject = |r: SuciReject| HnError::SuciRejected(r);
        let suci: Suci = decode_suci(suci_bytes)
            .map_err(|e| reject(SuciReject::Malformed(e.to_string())))?;
        if suci.hnid != self.config.id {
            return Err(reject(SuciReject::Malformed(format!(
                "hnid {} is not this network",
                suci.hnid
            ))));
        }
        match suci.scheme {
            SuciScheme::Null => {
                // No counter window and no tag: treat like an IMSI-identified
                // request (no pruning, no ECF, no rotation on success).
                let bcd: [u8; 5] = suci.payload[..5].try_into().unwrap();
                let msin = Msin::from_bcd(&bcd)
                    .map_err(|e| reject(SuciReject::Malformed(e.to_string())))?;
                let imsi = *self
                    .by_msin
                    .get(&msin.value())
                    .ok_or(reject(SuciReject::UnknownMsin))?;
                self.five_g_av(&imsi, sn_id, false, None, now, rng)
            }
            SuciScheme::Hybrid => {
                let (sk, _) = self
                    .key_pairs
                    .get(&suci.hnpki)
                    .ok_or(HnError::UnknownHnpki(suci.hnpki))?
                    .clone();
                let context = (suci.hnpki, suci.scheme.code());
                let pt_bytes = self
                    .suite
                    .pke_decrypt(&sk, &suci.payload, context)
                    .map_err(|_| reject(SuciReject::DecryptionFailure))?;
                let pt_bytes: [u8; SUCI_PLAINTEXT_LEN] = pt_bytes
                    .try_into()
                    .map_err(|_| reject(SuciReject::Malformed("bad plaintext length".into())))?;
                let pt = SuciPlaintext::decode(&pt_bytes)
                    .map_err(|e| reject(SuciReject::Malformed(e.to_string())))?;
                let imsi = *self
                    .by_msin
                    .get(&pt.msin.value())
                    .ok_or(reject(SuciReject::UnknownMsin))?;
                let k = self.subs[&imsi].k;
                let expected = self.suite.mac64(
                    &k,
                    &SuciPlaintext::tag_input(pt.msin, pt.delta_min, pt.delta_max),
                );
                if !ct_eq(&expected.to_be_bytes(), &pt.tag.to_be_bytes()) {
                    return Err(reject(SuciReject::TagMismatch));
                }
                self.five_g_av(&imsi, sn_id, true, Some(pt), now, rng)
            }
        }
    }

    /// 5G AV request identified by a stored MSIN (GUTI or paging re-auth).
    pub fn handle_av_request_5g_imsi(
        &mut self,
        q: &Imsi,
        sn_id: &str,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Result<FiveGAvBundle, HnError> {
        let imsi = self.lookup_identity(q)?;
        self.five_g_av(&imsi, sn_id, false, None, now, rng)
    }

    fn five_g_av(
        &mut self,
        imsi: &Imsi,
        sn_id: &str,
        suci_initiated: bool,
        window: Option<SuciPlaintext>,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> Result<FiveGAvBundle, HnError> {
        let (embedded, allocated, _at_cap) = self.choose_embedded(imsi, now, rng)?;
        let ecf = window.is_some_and(|w| w.delta_max > embedded.d);
        let rand = self.encrypted_rand(imsi, embedded, ecf, rng);
        // 5G serving networks are Release-15 native: identity disclosure to
        // the SN is part of the flavor, so the AV always carries the MSIN.
        let (av, xres_star) = self.build_av(imsi, rand, AkaFlavor::FiveG, sn_id, true);
        let pruned = match window {
            Some(w) => self.prune_phn(imsi, w.delta_min, now),
            None => Vec::new(),
        };
        Ok(FiveGAvBundle {
            av,
            pending: PendingFiveG {
                imsi: *imsi,
                xres_star: xres_star.expect("5G build returns XRES*"),
                embedded,
                suci_initiated,
                sn_id: sn_id.to_string(),
            },
            pruned,
            allocated,
            ecf,
        })
    }

    /// Removes every P_HN entry with d strictly below delta_min, releasing
    /// the values back to the pool. The slot chain is never touched.
    pub fn prune_phn(
        &mut self,
        imsi: &Imsi,
        delta_min: u32,
        now: SimTime,
    ) -> Vec<PseudonymEntry> {
        let sub = self.subs.get_mut(imsi).expect("caller resolved imsi");
        let doomed: Vec<PseudonymEntry> = sub
            .p_hn
            .iter()
            .filter(|e| e.d < delta_min)
            .copied()
            .collect();
        for entry in &doomed {
            sub.p_hn.remove(entry);
        }
        for entry in &doomed {
            let value = entry.value.raw();
            self.by_pseudonym.remove(&value);
            self.pool.release(value);
            self.log.note_release(value, now);
        }
        doomed
    }

    /// Step 15/16 of a 5G run: check the forwarded RES*, and on success
    /// rotate iff the run was SUCI-initiated and the embedded pseudonym is
    /// still the future slot.
    pub fn confirm_5g(
        &mut self,
        pending: &PendingFiveG,
        res_star: &[u8; 16],
    ) -> Result<Confirm5gOutcome, HnError> {
        let sub = self
            .subs
            .get_mut(&pending.imsi)
            .ok_or(HnError::UnknownSubscriber(pending.imsi))?;
        if !ct_eq(&pending.xres_star, res_star) {
            return Ok(Confirm5gOutcome {
                accepted: false,
                rotated: false,
            });
        }
        let rotate = pending.suci_initiated && sub.slot_f == Some(pending.embedded);
        if rotate {
            let old_c = sub.slot_c;
            sub.p_hn.insert(old_c);
            sub.slot_c = sub.slot_n;
            sub.slot_n = sub.slot_f.take().expect("checked above");
        }
        Ok(Confirm5gOutcome {
            accepted: true,
            rotated: rotate,
        })
    }

    pub fn resolve_cdr(&self, cdr: &CdrRecord) -> Result<Imsi, BillingError> {
        self.log
            .resolve_cdr(cdr, &self.by_msin, self.config.guti_grace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ReferenceSuite;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn test_config() -> HnConfig {
        HnConfig {
            id: HnId::new("244", "99").unwrap(),
            pool_digits: 3,
            cap_c: 4,
            li_key_binding: false,
            guti_grace: 3600,
            amf: crate::aka::AMF_DEFAULT,
        }
    }

    fn hn_with_one_sub(rng: &mut ChaCha20Rng) -> (HomeNetwork, Imsi) {
        let mut hn = HomeNetwork::new(test_config(), Arc::new(ReferenceSuite));
        let imsi = hn
            .provision_subscriber(
                Msin::new(9_000_000_001).unwrap(),
                MasterKey([1; 16]),
                None,
                None,
                0,
                rng,
            )
            .unwrap();
        (hn, imsi)
    }

    fn entry(hn: &HomeNetwork, imsi: &Imsi, which: &str) -> PseudonymEntry {
        let sub = hn.subscriber(imsi).unwrap();
        match which {
            "c" => sub.slot_c,
            "n" => sub.slot_n,
            "f" => sub.slot_f.unwrap(),
            other => panic!("unknown slot {other}"),
        }
    }

    fn rendered(hn: &HomeNetwork, e: PseudonymEntry) -> Imsi {
        crate::codec::render_pseudonym(e.value, &hn.config.id).unwrap()
    }

    #[test]
    fn provisioning_opens_log_entries_and_reserves_values() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (hn, imsi) = hn_with_one_sub(&mut rng);
        let sub = hn.subscriber(&imsi).unwrap();
        assert_eq!(sub.slot_c.d, 1);
        assert_eq!(sub.slot_n.d, 2);
        assert_eq!(sub.slot_f, None);
        assert_eq!(sub.ctr, 3);
        assert_eq!(hn.log.entries.len(), 2);
        assert!(hn.pool.contains(sub.slot_c.value.raw()));
        assert!(hn.pool.contains(sub.slot_n.value.raw()));
        // 10-digit MSIN is outside a 10^3 pool: not reserved, never collides.
        assert_eq!(hn.pool.allocated_count(), 2);
    }

    #[test]
    fn lte_request_allocates_future_once_and_batch_shares_it() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        let q = rendered(&hn, entry(&hn, &imsi, "n"));
        let bundle = hn
            .handle_av_request_lte(&q, "lte-1", false, 3, 10, &mut rng)
            .unwrap();
        assert_eq!(bundle.avs.len(), 3);
        assert!(bundle.allocated.is_some());
        assert_eq!(bundle.embedded.d, 3);
        assert_eq!(entry(&hn, &imsi, "f"), bundle.embedded);
        // Same embedded pair in every AV, distinct RANDs via salt.
        assert_ne!(bundle.avs[0].rand, bundle.avs[1].rand);
        let sub = hn.subscriber(&imsi).unwrap();
        let kappa = sub.kappa;
        for av in &bundle.avs {
            let payload =
                crate::codec::decode_rand_payload(&ReferenceSuite.decrypt_rand(&kappa, av.rand));
            assert_eq!(payload.p, bundle.embedded.value);
            assert_eq!(payload.d, bundle.embedded.d);
            assert_eq!(payload.ecf, 0);
        }
        // Second request reuses the existing future pseudonym.
        let again = hn
            .handle_av_request_lte(&q, "lte-1", false, 1, 11, &mut rng)
            .unwrap();
        assert_eq!(again.embedded, bundle.embedded);
        assert!(again.allocated.is_none());
    }

    #[test]
    fn lu_rotation_guards() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        let p_c = entry(&hn, &imsi, "c");
        let p_n = entry(&hn, &imsi, "n");

        // No future slot yet: q = p_n does not rotate.
        assert!(!hn.handle_lu(&rendered(&hn, p_n), "lte-1", 5).unwrap());

        let q = rendered(&hn, p_n);
        hn.handle_av_request_lte(&q, "lte-1", false, 1, 10, &mut rng)
            .unwrap();
        let p_f = entry(&hn, &imsi, "f");

        // q = p_c never rotates, but usage is logged.
        assert!(!hn.handle_lu(&rendered(&hn, p_c), "lte-1", 11).unwrap());
        assert_eq!(entry(&hn, &imsi, "c"), p_c);

        // q = p_n with a future slot rotates the chain.
        assert!(hn.handle_lu(&rendered(&hn, p_n), "lte-1", 12).unwrap());
        let sub = hn.subscriber(&imsi).unwrap();
        assert_eq!(sub.slot_c, p_n);
        assert_eq!(sub.slot_n, p_f);
        assert_eq!(sub.slot_f, None);
        assert!(sub.p_hn.contains(&p_c));

        // Usage was logged from the first completed AKA (t=5), even though
        // that LU could not rotate yet.
        let log_entry = hn
            .log
            .entries
            .iter()
            .find(|e| e.pseudonym == p_n.value.raw())
            .unwrap();
        assert_eq!(log_entry.t_first_aka, Some(5));
        assert_eq!(log_entry.sns_used, vec!["lte-1".to_string()]);
    }

    #[test]
    fn lu_for_future_pseudonym_rotates() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        let q = rendered(&hn, entry(&hn, &imsi, "n"));
        hn.handle_av_request_lte(&q, "lte-1", false, 1, 10, &mut rng)
            .unwrap();
        let p_f = entry(&hn, &imsi, "f");
        assert!(hn.handle_lu(&rendered(&hn, p_f), "lte-2", 20).unwrap());
        assert_eq!(entry(&hn, &imsi, "n"), p_f);
    }

    #[test]
    fn cap_blocks_allocation_and_embeds_p_n() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        // Drive rotations until P_HN reaches the cap (4).
        for t in 0..4u64 {
            let q = rendered(&hn, entry(&hn, &imsi, "n"));
            hn.handle_av_request_lte(&q, "lte-1", false, 1, t, &mut rng)
                .unwrap();
            hn.handle_lu(&rendered(&hn, entry(&hn, &imsi, "n")), "lte-1", t)
                .unwrap();
        }
        let sub = hn.subscriber(&imsi).unwrap();
        assert_eq!(sub.p_hn.len(), 4);
        assert_eq!(sub.slot_f, None);

        let p_n = entry(&hn, &imsi, "n");
        let q = rendered(&hn, p_n);
        let bundle = hn
            .handle_av_request_lte(&q, "lte-1", false, 1, 99, &mut rng)
            .unwrap();
        assert!(bundle.at_cap);
        assert_eq!(bundle.embedded, p_n);
        assert!(bundle.allocated.is_none());
        assert_eq!(hn.subscriber(&imsi).unwrap().slot_f, None);

        // LU at the cap: q = p_n but no future slot, so no rotation, and
        // P_HN never exceeds the cap.
        assert!(!hn.handle_lu(&q, "lte-1", 100).unwrap());
        assert_eq!(hn.subscriber(&imsi).unwrap().p_hn.len(), 4);
    }

    #[test]
    fn unknown_identity_yields_error_not_dummy_av() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let (mut hn, _) = hn_with_one_sub(&mut rng);
        let stranger = Imsi::parse("244990000000042").unwrap();
        assert_eq!(
            hn.handle_av_request_lte(&stranger, "lte-1", false, 1, 0, &mut rng)
                .unwrap_err(),
            HnError::UnknownSubscriber(stranger)
        );
        let foreign = Imsi::parse("310150000000042").unwrap();
        assert_eq!(
            hn.handle_av_request_lte(&foreign, "lte-1", false, 1, 0, &mut rng)
                .unwrap_err(),
            HnError::WrongHomeNetwork(foreign)
        );
    }

    #[test]
    fn pool_exhaustion_is_an_error() {
        let mut pool = PseudonymPool::new(1);
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        for _ in 0..10 {
            pool.allocate(&mut rng).unwrap();
        }
        assert_eq!(pool.allocate(&mut rng).unwrap_err(), HnError::PoolExhausted);
        pool.release(3);
        assert_eq!(pool.allocate(&mut rng).unwrap().0, 3);
    }

    #[test]
    fn prune_is_strict_and_spares_slots() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        for t in 0..3u64 {
            let q = rendered(&hn, entry(&hn, &imsi, "n"));
            hn.handle_av_request_lte(&q, "lte-1", false, 1, t, &mut rng)
                .unwrap();
            hn.handle_lu(&rendered(&hn, entry(&hn, &imsi, "n")), "lte-1", t)
                .unwrap();
        }
        let sub = hn.subscriber(&imsi).unwrap();
        let phn: Vec<PseudonymEntry> = sub.p_hn.iter().copied().collect();
        assert_eq!(phn.len(), 3); // d = 1, 2, 3
        let d_c = sub.slot_c.d;
        assert!(phn.iter().all(|e| e.d < d_c));

        // delta_min equal to an entry's d keeps that entry (strict <).
        let pruned = hn.prune_phn(&imsi, 2, 50);
        assert_eq!(pruned.len(), 1);
        assert_eq!(pruned[0].d, 1);
        let sub = hn.subscriber(&imsi).unwrap();
        assert!(sub.p_hn.iter().any(|e| e.d == 2));
        // Released value is reusable and its log entry is closed, not erased.
        assert!(!hn.pool.contains(pruned[0].value.raw()));
        let log_entry = hn
            .log
            .entries
            .iter()
            .find(|e| e.pseudonym == pruned[0].value.raw())
            .unwrap();
        assert_eq!(log_entry.t_released, Some(50));

        // delta_min above every d (including slots' in P_HN terms) empties
        // P_HN but never touches the chain.
        let before = (sub.slot_c, sub.slot_n, sub.slot_f);
        let _ = hn.prune_phn(&imsi, u32::MAX, 60);
        let sub = hn.subscriber(&imsi).unwrap();
        assert!(sub.p_hn.is_empty());
        assert_eq!((sub.slot_c, sub.slot_n, sub.slot_f), before);
    }

    #[test]
    fn cdr_resolution_prefers_graced_previous_holder_at_its_sn() {
        let mut log = AllocationLog::default();
        let ue1 = Imsi::parse("244990000000001").unwrap();
        let ue2 = Imsi::parse("244990000000002").unwrap();
        log.record_alloc(5, ue1, 0);
        log.note_use(5, "sn-a", 10);
        log.note_release(5, 100);
        log.record_alloc(5, ue2, 120);
        log.note_use(5, "sn-b", 130);

        let msins = BTreeMap::new();
        let cdr = |sn: &str, t| CdrRecord {
            sn_id: sn.to_string(),
            identity: Imsi::parse("244990000000005").unwrap(),
            service_units: 1,
            t_event: t,
        };
        // Stale GUTI at sn-a within grace: previous holder pays.
        assert_eq!(log.resolve_cdr(&cdr("sn-a", 150), &msins, 3600).unwrap(), ue1);
        // Same instant at sn-b: current holder attached there.
        assert_eq!(log.resolve_cdr(&cdr("sn-b", 150), &msins, 3600).unwrap(), ue2);
        // While UE1 held it live.
        assert_eq!(log.resolve_cdr(&cdr("sn-a", 50), &msins, 3600).unwrap(), ue1);
        // Unknown SN falls back to interval ownership.
        assert_eq!(log.resolve_cdr(&cdr("sn-c", 130), &msins, 3600).unwrap(), ue2);
        // Beyond the grace window the live holder absorbs the event, even at
        // an SN it never visited (interval ownership is the final fallback).
        assert_eq!(
            log.resolve_cdr(&cdr("sn-a", 100 + 3600), &msins, 3600).unwrap(),
            ue2
        );
        // Gap between holders, unknown SN: unresolvable.
        assert!(log.resolve_cdr(&cdr("sn-c", 110), &msins, 3600).is_err());
    }

    /// Builds a well-formed hybrid SUCI for the test subscriber (K = [1;16]).
    fn forge_suci(
        hn: &HomeNetwork,
        imsi: &Imsi,
        delta_min: u32,
        delta_max: u32,
        tamper_tag: bool,
        rng: &mut ChaCha20Rng,
    ) -> Vec<u8> {
        let suite = ReferenceSuite;
        let msin = imsi.msin();
        let k = MasterKey([1; 16]);
        let mut tag = suite.mac64(&k, &SuciPlaintext::tag_input(msin, delta_min, delta_max));
        if tamper_tag {
            tag ^= 1;
        }
        let pt = SuciPlaintext {
            msin,
            delta_min,
            delta_max,
            tag,
        };
        let payload = suite.pke_encrypt(
            hn.public_key(1).unwrap(),
            &pt.encode().unwrap(),
            (1, SuciScheme::Hybrid.code()),
            rng,
        );
        crate::codec::encode_suci(&Suci {
            hnid: hn.config.id,
            hnpki: 1,
            scheme: SuciScheme::Hybrid,
            payload,
        })
    }

    fn install_test_keypair(hn: &mut HomeNetwork, rng: &mut ChaCha20Rng) {
        let (sk, pk) = ReferenceSuite.generate_keypair(rng);
        hn.install_keypair(1, sk, pk);
    }

    #[test]
    fn suci_request_prunes_sets_ecf_and_confirm_rotates() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        install_test_keypair(&mut hn, &mut rng);
        // Age the subscriber: rotate twice so P_HN = {d=1, d=2}, chain d = 3,4.
        for t in 0..2u64 {
            let q = rendered(&hn, entry(&hn, &imsi, "n"));
            hn.handle_av_request_lte(&q, "lte-1", false, 1, t, &mut rng)
                .unwrap();
            hn.handle_lu(&q, "lte-1", t).unwrap();
        }
        let sub = hn.subscriber(&imsi).unwrap();
        assert_eq!((sub.slot_c.d, sub.slot_n.d), (3, 4));
        assert_eq!(sub.p_hn.len(), 2);

        // UE reports window [3, 4]: prune d<3, allocate d=5, ECF=0.
        let suci = forge_suci(&hn, &imsi, 3, 4, false, &mut rng);
        let bundle = hn
            .handle_suci_av_request(&suci, "nr-1", 100, &mut rng)
            .unwrap();
        assert!(!bundle.ecf);
        assert_eq!(bundle.pending.embedded.d, 5);
        assert_eq!(bundle.pruned.len(), 2);
        assert!(bundle.pending.suci_initiated);
        assert!(hn.subscriber(&imsi).unwrap().p_hn.is_empty());

        // Successful confirmation rotates because embedded == p_f.
        let xres = bundle.pending.xres_star;
        let outcome = hn.confirm_5g(&bundle.pending, &xres).unwrap();
        assert!(outcome.accepted && outcome.rotated);
        let sub = hn.subscriber(&imsi).unwrap();
        assert_eq!((sub.slot_c.d, sub.slot_n.d), (4, 5));
        assert_eq!(sub.slot_f, None);
        // Old p_c (d=3) moved into P_HN.
        assert!(sub.p_hn.iter().any(|e| e.d == 3));

        // Wrong RES* is rejected with no rotation.
        let mut bad = xres;
        bad[0] ^= 1;
        let outcome = hn.confirm_5g(&bundle.pending, &bad).unwrap();
        assert!(!outcome.accepted && !outcome.rotated);
    }

    #[test]
    fn suci_ecf_flags_window_beyond_embedded_counter() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        install_test_keypair(&mut hn, &mut rng);
        // Fresh subscriber: chain d = 1,2 and the request allocates d = 3.
        // A corrupted UE-side d2 reports delta_max far above it.
        let suci = forge_suci(&hn, &imsi, 1, 1002, false, &mut rng);
        let bundle = hn
            .handle_suci_av_request(&suci, "nr-1", 5, &mut rng)
            .unwrap();
        assert_eq!(bundle.pending.embedded.d, 3);
        assert!(bundle.ecf);
        let kappa = hn.subscriber(&imsi).unwrap().kappa;
        let payload =
            crate::codec::decode_rand_payload(&ReferenceSuite.decrypt_rand(&kappa, bundle.av.rand));
        assert_eq!(payload.ecf, 1);
    }

    #[test]
    fn suci_tag_mismatch_rejects_without_state_change() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        install_test_keypair(&mut hn, &mut rng);
        let before_sub = hn.subscriber(&imsi).unwrap().clone();
        let before_log = hn.log.entries.clone();

        let suci = forge_suci(&hn, &imsi, 1, 2, true, &mut rng);
        let err = hn
            .handle_suci_av_request(&suci, "nr-1", 5, &mut rng)
            .unwrap_err();
        assert_eq!(err, HnError::SuciRejected(SuciReject::TagMismatch));

        // Corrupted ciphertext fails the outer MAC, not the tag.
        let mut mangled = forge_suci(&hn, &imsi, 1, 2, false, &mut rng);
        let last = mangled.len() - 1;
        mangled[last] ^= 0x40;
        let err = hn
            .handle_suci_av_request(&mangled, "nr-1", 6, &mut rng)
            .unwrap_err();
        assert_eq!(err, HnError::SuciRejected(SuciReject::DecryptionFailure));

        let sub = hn.subscriber(&imsi).unwrap();
        assert_eq!(sub.slot_f, before_sub.slot_f);
        assert_eq!(sub.sqn, before_sub.sqn);
        assert_eq!(sub.ctr, before_sub.ctr);
        assert_eq!(hn.log.entries, before_log);
    }

    #[test]
    fn guti_reauth_av_does_not_rotate_on_confirm() {
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let (mut hn, imsi) = hn_with_one_sub(&mut rng);
        let bundle = hn
            .handle_av_request_5g_imsi(&imsi, "nr-1", 50, &mut rng)
            .unwrap();
        assert!(!bundle.pending.suci_initiated);
        assert!(bundle.pruned.is_empty());
        let before = hn.subscriber(&imsi).unwrap().clone();
        let outcome = hn.confirm_5g(&bundle.pending, &bundle.pending.xres_star.clone()).unwrap();
        assert!(outcome.accepted && !outcome.rotated);
        let sub = hn.subscriber(&imsi).unwrap();
        assert_eq!(sub.slot_c, before.slot_c);
        assert_eq!(sub.slot_n, before.slot_n);
        assert_eq!(sub.slot_f, before.slot_f);
    }

    #[test]
    fn cdr_with_true_imsi_resolves_to_itself() {
        let log = AllocationLog::default();
        let imsi = Imsi::parse("244999000000001").unwrap();
        let mut msins = BTreeMap::new();
        msins.insert(imsi.msin().value(), imsi);
        let cdr = CdrRecord {
            sn_id: "sn-a".into(),
            identity: imsi,
            service_units: 2,
            t_event: 9,
        };
        assert_eq!(log.resolve_cdr(&cdr, &msins, 10).unwrap(), imsi);
    }
}
