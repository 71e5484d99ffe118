//! Pseudonym-based subscriber identity privacy for mixed LTE/5G networks.
//!
//! The permanent subscriber identity (IMSI) must sometimes cross the air
//! interface in cleartext toward LTE networks, which is what IMSI catchers
//! harvest — including from 5G-capable phones downgraded onto LTE by a fake
//! base station. This crate implements a defense that needs no change to
//! LTE serving networks: the home network hands each subscriber a rolling
//! supply of IMSI-shaped pseudonyms, delivered inside the encrypted payload
//! of the standard 128-bit AKA challenge (RAND) and rotated on ordinary
//! location updates. 5G attaches carry a counter window inside the SUCI so
//! the home network can garbage-collect old pseudonyms and repair a
//! corrupted handset with a single flagged challenge.
//!
//! Layout:
//! * [`codec`] — bit-exact wire formats (RAND payload, SUCI, identities).
//! * [`crypto`] — the key/MAC/AKA-function suite behind a trait.
//! * [`aka`] — challenge assembly and verification for both flavors.
//! * [`hn`] — home network: slot chain, pool, allocation log, billing.
//! * [`ue`] — handset state machine and retirement policy.
//! * [`sn`] — LTE and 5G serving networks: attach flows, GUTIs, paging, CDRs.
//! * [`sim`] — deterministic discrete-event simulator, invariant checkers,
//!   adversaries, trace and report formats.

pub mod aka;
pub mod codec;
pub mod crypto;
pub mod hn;
pub mod sim;
pub mod sn;
pub mod types;
pub mod ue;

pub use aka::{AkaFlavor, AkaResponse, AuthVector, RejectReason, ResponseCheck, SqnState};
pub use codec::{
    render_pseudonym, CodecError, HnId, Imsi, Msin, PseudonymEntry, PseudonymValue, RandPayload,
    Suci, SuciPlaintext, SuciScheme,
};
pub use crypto::{
    AnchorFlavor, CryptoError, CryptoSuite, HnPublicKey, HnSecretKey, MasterKey, PseudonymKey,
    ReferenceSuite,
};
pub use hn::{
    AllocationLog, AllocationLogEntry, BillingError, CdrRecord, HnConfig, HnError, HomeNetwork,
    PseudonymPool,
};
pub use sn::{
    fiveg_attach_flow, lte_attach_flow, AirIdentity, AirMessage, AttachFailure, AttachReport,
    AttachVia, GutiRecord, SnState,
};
pub use types::{SimTime, UeId, DAY};
pub use ue::{IdentityResponse, UePolicy, UsimState};
