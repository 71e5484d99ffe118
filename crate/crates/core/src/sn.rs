//! Serving-network actors and the end-to-end attach flows.
//!
//! An LTE SN learns identities in cleartext (inquiry, GUTI lookup, or
//! paging), fetches batches of authentication vectors from the HN, checks
//! RES = XRES itself, and sends a location update on the first attach of an
//! identity — which is what drives pseudonym rotation in the HN, with no LTE
//! software change required. A 5G SN relays SUCIs, checks HRES* against
//! HXRES*, and forwards RES* to the HN for final confirmation.
//!
//! Flow functions couple one SN, one UE, and the HN synchronously and return
//! an [`AttachReport`]: the outcome, every radio-leg message an eavesdropper
//! would see, and the HN-side effects (allocation, pruning, rotation) for
//! trace and invariant checking.

use std::collections::{BTreeMap, VecDeque};

use rand::RngCore;

use crate::aka::{
    sn_check_response_5g, sn_check_response_lte, AkaFlavor, AkaResponse, AuthVector, RejectReason,
};
use crate::codec::{Imsi, PseudonymEntry};
use crate::crypto::ct_eq;
use crate::hn::{CdrRecord, HomeNetwork};
use crate::types::{SimTime, UeId};
use crate::ue::{IdentityResponse, UpdateOutcome, UsimState};

/// How an attach was initiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachVia {
    /// First contact: identity inquiry (LTE) or fresh SUCI (5G).
    Inquiry,
    /// Re-attach under a previously issued GUTI. Unknown GUTIs degrade to
    /// the inquiry path rather than failing.
    Guti(u32),
    /// Re-authentication after the UE answered an LTE page that carried a
    /// cleartext pseudonym.
    PagedPseudonym(Imsi),
}

/// Identity material as it appears on the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AirIdentity {
    Pseudonym(Imsi),
    Suci(Vec<u8>),
    Guti(u32),
}

/// One observable message on the radio leg, in flow order. The response
/// value and the assigned GUTI are elided: the former never carries identity
/// material, the latter travels inside the freshly keyed secure channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AirMessage {
    IdentityInquiry,
    Identity(AirIdentity),
    Challenge { rand: [u8; 16], autn: [u8; 16] },
    ResponseOk,
    ResponseReject { reason: RejectReason },
    GutiAssigned,
    Page(AirIdentity),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttachFailure {
    /// HN produced no vector (unknown identity, foreign network, SUCI reject).
    HnRejected(String),
    /// UE refused the challenge (forged RAND, stale SQN).
    ChallengeRejected(RejectReason),
    /// RES/HRES*/RES* comparison failed.
    ResponseMismatch,
    /// AKA succeeded but the two sides derived different session keys
    /// (one-sided lawful-interception key binding).
    SecureChannelMismatch,
}

impl std::fmt::Display for AttachFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttachFailure::HnRejected(m) => write!(f, "hn-rejected: {m}"),
            AttachFailure::ChallengeRejected(r) => write!(f, "challenge-rejected: {r}"),
            AttachFailure::ResponseMismatch => f.write_str("response-mismatch"),
            AttachFailure::SecureChannelMismatch => f.write_str("secure-channel-mismatch"),
        }
    }
}

/// Everything one attach attempt did, for traces and invariant checks.
#[derive(Debug, Clone)]
pub struct AttachReport {
    pub sn_id: String,
    pub flavor: AkaFlavor,
    pub ue: UeId,
    /// Ok(assigned GUTI) or the failure step.
    pub outcome: Result<u32, AttachFailure>,
    pub identity_used: AirIdentity,
    pub air: Vec<AirMessage>,
    pub ue_update: Option<UpdateOutcome>,
    pub lu_sent: bool,
    /// HN slot chain rotated (by this LU or this 5G confirmation).
    pub hn_rotated: bool,
    pub av_from_cache: bool,
    /// A stale cached vector was detected and the cache dropped.
    pub cache_purged: bool,
    pub hn_allocated: Option<PseudonymEntry>,
    pub hn_pruned: Vec<PseudonymEntry>,
    pub ecf: bool,
    /// Symmetric operations the pseudonym scheme added on top of plain AKA:
    /// payload block ciphers and counter-window MACs.
    pub extra_ciphers: u32,
    pub extra_macs: u32,
}

impl AttachReport {
    fn start(sn_id: &str, flavor: AkaFlavor, ue: UeId) -> Self {
        AttachReport {
            sn_id: sn_id.to_string(),
            flavor,
            ue,
            outcome: Err(AttachFailure::HnRejected("flow did not run".into())),
            identity_used: AirIdentity::Guti(0),
            air: Vec::new(),
            ue_update: None,
            lu_sent: false,
            hn_rotated: false,
            av_from_cache: false,
            cache_purged: false,
            hn_allocated: None,
            hn_pruned: Vec::new(),
            ecf: false,
            extra_ciphers: 0,
            extra_macs: 0,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.outcome.is_ok()
    }
}

/// Security context a serving network keeps per issued GUTI.
#[derive(Debug, Clone)]
pub struct GutiRecord {
    /// Identity presented at attach: a pseudonym (LTE) or the HN-disclosed
    /// MSIN rendered as an IMSI (5G).
    pub identity: Imsi,
    /// Identity CDRs carry: the true IMSI when this SN is LI-patched,
    /// otherwise the attach pseudonym.
    pub billed_identity: Imsi,
    pub anchor: [u8; 32],
    /// Scheduler routing only; a real SN reaches the UE through the radio
    /// bearer this context keys.
    pub ue: UeId,
}

pub struct SnState {
    pub sn_id: String,
    pub flavor: AkaFlavor,
    pub li_patched: bool,
    /// Vectors requested per HN round trip (1 = no batching).
    pub batch_size: usize,
    pub guti_table: BTreeMap<u32, GutiRecord>,
    av_cache: BTreeMap<Imsi, VecDeque<AuthVector>>,
    pub cdr_log: Vec<CdrRecord>,
    next_guti: u32,
}

impl SnState {
    pub fn new_lte(sn_id: &str, li_patched: bool, batch_size: usize) -> Self {
        assert!((1..=8).contains(&batch_size), "batch size must be 1..=8");
        Self {
            sn_id: sn_id.to_string(),
            flavor: AkaFlavor::Lte,
            li_patched,
            batch_size,
            guti_table: BTreeMap::new(),
            av_cache: BTreeMap::new(),
            cdr_log: Vec::new(),
            next_guti: 0,
        }
    }

    /// 5G serving networks are Release-15 native: the LI identity request is
    /// part of the flavor, so they are always patched and never batch.
    pub fn new_5g(sn_id: &str) -> Self {
        Self {
            sn_id: sn_id.to_string(),
            flavor: AkaFlavor::FiveG,
            li_patched: true,
            batch_size: 1,
            guti_table: BTreeMap::new(),
            av_cache: BTreeMap::new(),
            cdr_log: Vec::new(),
            next_guti: 0,
        }
    }

    pub fn cached_avs(&self, identity: &Imsi) -> usize {
        self.av_cache.get(identity).map_or(0, VecDeque::len)
    }

    /// Issues a fresh GUTI after a successful AKA, replacing any context this
    /// SN previously held for the same UE.
    fn issue_guti(&mut self, record: GutiRecord) -> u32 {
        let ue = record.ue;
        self.guti_table.retain(|_, r| r.ue != ue);
        self.next_guti += 1;
        self.guti_table.insert(self.next_guti, record);
        self.next_guti
    }

    /// Emits a CDR for service consumed under a GUTI. The billed identity is
    /// whatever the attach pinned: the true IMSI on a patched SN, otherwise
    /// the pseudonym — even long after the HN released it (the stale-GUTI
    /// billing case).
    pub fn record_service(&mut self, guti: u32, units: u32, now: SimTime) -> Option<CdrRecord> {
        let record = self.guti_table.get(&guti)?;
        let cdr = CdrRecord {
            sn_id: self.sn_id.clone(),
            identity: record.billed_identity,
            service_units: units,
            t_event: now,
        };
        self.cdr_log.push(cdr.clone());
        Some(cdr)
    }

    /// Pages the UE behind a GUTI. LTE may page by the attach identity in
    /// cleartext (`by_identity`); 5G paging never carries a long-term
    /// identity, so the flag is ignored there. Returns the on-air message,
    /// the routing target, and how the follow-up attach identifies itself.
    pub fn page(&self, guti: u32, by_identity: bool) -> Option<(AirMessage, UeId, AttachVia)> {
        let record = self.guti_table.get(&guti)?;
        if by_identity && self.flavor == AkaFlavor::Lte {
            Some((
                AirMessage::Page(AirIdentity::Pseudonym(record.identity)),
                record.ue,
                AttachVia::PagedPseudonym(record.identity),
            ))
        } else {
            Some((
                AirMessage::Page(AirIdentity::Guti(guti)),
                record.ue,
                AttachVia::Guti(guti),
            ))
        }
    }
}

/// Full LTE attach: identity, AV (cache or HN batch), challenge, RES check,
/// location update on the identity's first attach here, secure channel, GUTI.
pub fn lte_attach_flow(
    sn: &mut SnState,
    hn: &mut HomeNetwork,
    ue: &mut UsimState,
    ue_id: UeId,
    via: AttachVia,
    now: SimTime,
    rng: &mut dyn RngCore,
) -> AttachReport {
    debug_assert_eq!(sn.flavor, AkaFlavor::Lte);
    let mut rep = AttachReport::start(&sn.sn_id, AkaFlavor::Lte, ue_id);

    let identity: Imsi = match via {
        AttachVia::Guti(g) if sn.guti_table.contains_key(&g) => {
            rep.air.push(AirMessage::Identity(AirIdentity::Guti(g)));
            rep.identity_used = AirIdentity::Guti(g);
            sn.guti_table[&g].identity
        }
        AttachVia::PagedPseudonym(q) => {
            rep.air.push(AirMessage::Identity(AirIdentity::Pseudonym(q)));
            rep.identity_used = AirIdentity::Pseudonym(q);
            q
        }
        _ => {
            rep.air.push(AirMessage::IdentityInquiry);
            let IdentityResponse::Pseudonym(q) = ue.respond_identity_lte(&sn.sn_id) else {
                unreachable!("LTE identity responses are always pseudonyms")
            };
            rep.air.push(AirMessage::Identity(AirIdentity::Pseudonym(q)));
            rep.identity_used = AirIdentity::Pseudonym(q);
            q
        }
    };

    if sn.cached_avs(&identity) == 0 {
        match hn.handle_av_request_lte(
            &identity,
            &sn.sn_id,
            sn.li_patched,
            sn.batch_size,
            now,
            rng,
        ) {
            Ok(bundle) => {
                // One payload encryption per vector in the batch.
                rep.extra_ciphers += bundle.avs.len() as u32;
                rep.hn_allocated = bundle.allocated;
                sn.av_cache.entry(identity).or_default().extend(bundle.avs);
            }
            Err(e) => {
                rep.outcome = Err(AttachFailure::HnRejected(e.to_string()));
                return rep;
            }
        }
    } else {
        rep.av_from_cache = true;
    }
    let av = sn
        .av_cache
        .get_mut(&identity)
        .and_then(VecDeque::pop_front)
        .expect("cache was just filled");

    rep.air.push(AirMessage::Challenge {
        rand: av.rand,
        autn: av.autn,
    });
    let reply = match ue.handle_challenge(&av.rand, &av.autn, AkaFlavor::Lte, &sn.sn_id, sn.li_patched)
    {
        Ok(reply) => reply,
        Err(reason) => {
            rep.air.push(AirMessage::ResponseReject { reason });
            if reason == RejectReason::SqnReplay {
                // Stale batch: drop it so the next attach refetches.
                sn.av_cache.remove(&identity);
                rep.cache_purged = true;
            }
            rep.outcome = Err(AttachFailure::ChallengeRejected(reason));
            return rep;
        }
    };
    rep.extra_ciphers += 1; // UE-side payload decryption
    rep.ue_update = Some(reply.update.clone());
    rep.air.push(AirMessage::ResponseOk);

    let AkaResponse::Res(res) = reply.response else {
        unreachable!("LTE challenge acceptance yields RES")
    };
    if !sn_check_response_lte(&av, &res) {
        rep.outcome = Err(AttachFailure::ResponseMismatch);
        return rep;
    }

    // First attach of this identity here: location update toward the HN.
    let first_attach = !sn.guti_table.values().any(|r| r.identity == identity);
    if first_attach {
        rep.lu_sent = true;
        rep.hn_rotated = hn
            .handle_lu(&identity, &sn.sn_id, now)
            .expect("identity resolved during the AV request");
    }

    // Secure-channel establishment: both sides must have derived the same
    // anchor. A one-sided LI key binding fails here — after the LU.
    if !ct_eq(&av.anchor, &reply.anchor) {
        rep.outcome = Err(AttachFailure::SecureChannelMismatch);
        return rep;
    }

    let billed_identity = match (sn.li_patched, av.msin) {
        (true, Some(msin)) => Imsi::from_parts(&identity.hn_id(), msin),
        _ => identity,
    };
    let guti = sn.issue_guti(GutiRecord {
        identity,
        billed_identity,
        anchor: reply.anchor,
        ue: ue_id,
    });
    rep.air.push(AirMessage::GutiAssigned);
    ue.note_attach_success(&sn.sn_id, guti, Some(identity.msin().value()), reply.anchor, now);
    rep.outcome = Ok(guti);
    rep
}

/// Full 5G attach: SUCI (or stored identity for GUTI re-auth), AV, challenge,
/// HRES* check, RES* forwarding with HN confirmation (which rotates on
/// SUCI-initiated success), secure channel, GUTI.
pub fn fiveg_attach_flow(
    sn: &mut SnState,
    hn: &mut HomeNetwork,
    ue: &mut UsimState,
    ue_id: UeId,
    via: AttachVia,
    now: SimTime,
    rng: &mut dyn RngCore,
) -> AttachReport {
    debug_assert_eq!(sn.flavor, AkaFlavor::FiveG);
    let mut rep = AttachReport::start(&sn.sn_id, AkaFlavor::FiveG, ue_id);

    enum Request {
        Suci(Vec<u8>),
        Stored(Imsi),
    }
    let request = match via {
        AttachVia::Guti(g) if sn.guti_table.contains_key(&g) => {
            rep.air.push(AirMessage::Identity(AirIdentity::Guti(g)));
            rep.identity_used = AirIdentity::Guti(g);
            Request::Stored(sn.guti_table[&g].identity)
        }
        _ => {
            let IdentityResponse::Suci(bytes) = ue.respond_identity_5g(rng) else {
                unreachable!("5G identity responses are always SUCIs")
            };
            rep.air
                .push(AirMessage::Identity(AirIdentity::Suci(bytes.clone())));
            rep.identity_used = AirIdentity::Suci(bytes.clone());
            // Window tag generation on the UE side.
            rep.extra_macs += 1;
            Request::Suci(bytes)
        }
    };

    let bundle = match request {
        Request::Suci(bytes) => {
            // Tag verification on the HN side.
            rep.extra_macs += 1;
            hn.handle_suci_av_request(&bytes, &sn.sn_id, now, rng)
        }
        Request::Stored(imsi) => hn.handle_av_request_5g_imsi(&imsi, &sn.sn_id, now, rng),
    };
    let bundle = match bundle {
        Ok(b) => b,
        Err(e) => {
            rep.outcome = Err(AttachFailure::HnRejected(e.to_string()));
            return rep;
        }
    };
    rep.extra_ciphers += 1; // HN payload encryption
    rep.hn_allocated = bundle.allocated;
    rep.hn_pruned = bundle.pruned.clone();
    rep.ecf = bundle.ecf;

    rep.air.push(AirMessage::Challenge {
        rand: bundle.av.rand,
        autn: bundle.av.autn,
    });
    let reply = match ue.handle_challenge(
        &bundle.av.rand,
        &bundle.av.autn,
        AkaFlavor::FiveG,
        &sn.sn_id,
        true,
    ) {
        Ok(reply) => reply,
        Err(reason) => {
            rep.air.push(AirMessage::ResponseReject { reason });
            rep.outcome = Err(AttachFailure::ChallengeRejected(reason));
            return rep;
        }
    };
    rep.extra_ciphers += 1; // UE-side payload decryption
    rep.ue_update = Some(reply.update.clone());
    rep.air.push(AirMessage::ResponseOk);

    let AkaResponse::ResStar(res_star) = reply.response else {
        unreachable!("5G challenge acceptance yields RES*")
    };
    let suite = hn.suite().clone();
    if !sn_check_response_5g(suite.as_ref(), &bundle.av, &res_star) {
        rep.outcome = Err(AttachFailure::ResponseMismatch);
        return rep;
    }
    let confirm = hn
        .confirm_5g(&bundle.pending, &res_star)
        .expect("pending subscriber exists");
    if !confirm.accepted {
        rep.outcome = Err(AttachFailure::ResponseMismatch);
        return rep;
    }
    rep.hn_rotated = confirm.rotated;

    if !ct_eq(&bundle.av.anchor, &reply.anchor) {
        rep.outcome = Err(AttachFailure::SecureChannelMismatch);
        return rep;
    }

    let msin = bundle.av.msin.expect("5G vectors always disclose the MSIN");
    let disclosed = Imsi::from_parts(&hn.config.id, msin);
    let guti = sn.issue_guti(GutiRecord {
        identity: disclosed,
        billed_identity: disclosed,
        anchor: reply.anchor,
        ue: ue_id,
    });
    rep.air.push(AirMessage::GutiAssigned);
    ue.note_attach_success(&sn.sn_id, guti, None, reply.anchor, now);
    rep.outcome = Ok(guti);
    rep
}
