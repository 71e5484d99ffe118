//! Challenge/response core shared by both radio generations.
//!
//! An authentication vector binds a RAND (which here always carries an
//! encrypted pseudonym payload) to AUTN = (SQN ⊕ AK) ‖ AMF ‖ MAC_A
//! (48 + 16 + 64 = 128 bits), a response check, and a 256-bit anchor key.
//! LTE vectors check XRES directly; 5G vectors give the serving network only
//! HXRES* while the home network keeps XRES* for the final confirmation.

use serde::{Deserialize, Serialize};

use crate::codec::Msin;
use crate::crypto::{ct_eq, AkaFunctionOutput, AnchorFlavor, CryptoSuite, MasterKey};

/// Fixed authentication-management field; AMF semantics are out of scope.
pub const AMF_DEFAULT: u16 = 0x8000;

/// Mask for the 48-bit sequence-number lane.
pub const SQN_MASK: u64 = (1 << 48) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AkaFlavor {
    Lte,
    FiveG,
}

impl AkaFlavor {
    pub fn anchor_flavor(self) -> AnchorFlavor {
        match self {
            AkaFlavor::Lte => AnchorFlavor::KAsme,
            AkaFlavor::FiveG => AnchorFlavor::KSeaf,
        }
    }
}

impl std::fmt::Display for AkaFlavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AkaFlavor::Lte => "lte",
            AkaFlavor::FiveG => "5g",
        })
    }
}

/// What the serving network can check about a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseCheck {
    /// LTE: the SN holds XRES itself.
    Xres([u8; 8]),
    /// 5G: the SN holds only HXRES* = H(RAND ‖ RES*).
    HxresStar([u8; 16]),
}

/// Vector the HN issues to a serving network for one AKA run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthVector {
    pub flavor: AkaFlavor,
    pub rand: [u8; 16],
    pub autn: [u8; 16],
    pub check: ResponseCheck,
    /// K_ASME (LTE) or K_SEAF (5G).
    pub anchor: [u8; 32],
    /// Present iff the AV request carried the LI-patched flag.
    pub msin: Option<Msin>,
}

/// Response the UE returns on acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AkaResponse {
    Res([u8; 8]),
    ResStar([u8; 16]),
}

/// Monotone SQN acceptance state (48-bit lane).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SqnState {
    pub last_accepted: u64,
}

/// Why the UE refused a challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// MAC_A did not verify under K: forged or corrupted challenge.
    MacFailure,
    /// MAC_A verified but the SQN was not fresh: replayed or stale vector.
    SqnReplay,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RejectReason::MacFailure => "mac-failure",
            RejectReason::SqnReplay => "sqn-replay",
        })
    }
}

/// Outcome of the UE-side challenge verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChallengeOutcome {
    Accepted {
        /// RES (LTE) or RES* (5G).
        response: AkaResponse,
        /// CK‖IK material for anchor-key derivation.
        material: [u8; 32],
        /// The SQN this acceptance advances to.
        sqn: u64,
    },
    Rejected(RejectReason),
}

/// AUTN = (SQN ⊕ AK) ‖ AMF ‖ MAC_A.
pub fn assemble_autn(sqn: u64, ak: &[u8; 6], amf: u16, mac_a: &[u8; 8]) -> [u8; 16] {
    let sqn_bytes = &sqn.to_be_bytes()[2..];
    let mut autn = [0u8; 16];
    for i in 0..6 {
        autn[i] = sqn_bytes[i] ^ ak[i];
    }
    autn[6..8].copy_from_slice(&amf.to_be_bytes());
    autn[8..].copy_from_slice(mac_a);
    autn
}

/// Splits AUTN into (SQN ⊕ AK, AMF, MAC_A).
pub fn split_autn(autn: &[u8; 16]) -> ([u8; 6], u16, [u8; 8]) {
    (
        autn[..6].try_into().unwrap(),
        u16::from_be_bytes(autn[6..8].try_into().unwrap()),
        autn[8..].try_into().unwrap(),
    )
}

/// UE-side challenge verification: recover SQN through AK, check MAC_A, then
/// freshness. Pure; the caller commits `sqn` to its state only on acceptance.
pub fn verify_challenge(
    suite: &dyn CryptoSuite,
    k: &MasterKey,
    last_accepted_sqn: u64,
    rand: &[u8; 16],
    autn: &[u8; 16],
    flavor: AkaFlavor,
    serving_network: &str,
) -> ChallengeOutcome {
    let (sqn_xor_ak, amf, mac_a) = split_autn(autn);
    // AK depends only on (K, RAND), so it can be recomputed before the MAC
    // check; MAC_A then authenticates the recovered SQN.
    let probe = suite.aka_functions(k, rand, 0, amf);
    let mut sqn_bytes = [0u8; 8];
    for i in 0..6 {
        sqn_bytes[2 + i] = sqn_xor_ak[i] ^ probe.ak[i];
    }
    let sqn = u64::from_be_bytes(sqn_bytes);

    let out: AkaFunctionOutput = suite.aka_functions(k, rand, sqn, amf);
    if !ct_eq(&out.mac_a, &mac_a) {
        return ChallengeOutcome::Rejected(RejectReason::MacFailure);
    }
    if sqn <= last_accepted_sqn {
        return ChallengeOutcome::Rejected(RejectReason::SqnReplay);
    }
    let response = match flavor {
        AkaFlavor::Lte => AkaResponse::Res(out.xres),
        AkaFlavor::FiveG => {
            AkaResponse::ResStar(suite.res_star(&out.material, serving_network, rand, &out.xres))
        }
    };
    ChallengeOutcome::Accepted {
        response,
        material: out.material,
        sqn,
    }
}

/// LTE serving-network response check (constant-time).
pub fn sn_check_response_lte(av: &AuthVector, res: &[u8; 8]) -> bool {
    match av.check {
        ResponseCheck::Xres(xres) => ct_eq(&xres, res),
        ResponseCheck::HxresStar(_) => false,
    }
}

/// 5G serving-network response check: HRES* = H(RAND ‖ RES*) against HXRES*.
pub fn sn_check_response_5g(suite: &dyn CryptoSuite, av: &AuthVector, res_star: &[u8; 16]) -> bool {
    match av.check {
        ResponseCheck::HxresStar(hxres) => ct_eq(&suite.hres_star(&av.rand, res_star), &hxres),
        ResponseCheck::Xres(_) => false,
    }
}
