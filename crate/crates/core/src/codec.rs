//! Bit-exact wire formats for the identity-carrying messages.
//!
//! RAND payload (128 bits, MSB-first):
//!
//! ```text
//! | p : 34 | d : 24 | ecf : 2 | salt : 68 |
//! ```
//!
//! `p` is a raw pseudonym value, `d` its per-subscriber allocation counter,
//! `ecf` the error-correction flag, and `salt` fresh randomness that makes
//! every encrypted RAND unique. The block is always encrypted with the
//! pseudonym key before it travels as an AKA RAND, so this layout is only
//! visible to the two ends that hold that key.
//!
//! SUCI plaintext (152 bits = 19 bytes):
//!
//! ```text
//! | msin : 40 (10 BCD digits) | delta_min : 24 | delta_max : 24 | T : 64 |
//! ```
//!
//! SUCI wire layout: `hnid` (6 BCD nibbles, 0xF-padded 2-digit MNC), one
//! `hnpki` byte, one `supipsi` byte, then the scheme output (cleartext BCD
//! MSIN for the null scheme, KEM share + ciphertext + MAC for the hybrid
//! profile).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the pseudonym lane in the RAND payload.
pub const P_BITS: u32 = 34;
/// Width of the allocation-counter lane.
pub const D_BITS: u32 = 24;
/// Width of the error-correction-flag lane.
pub const ECF_BITS: u32 = 2;
/// Width of the salt lane. 34 + 24 + 2 + 68 = 128.
pub const SALT_BITS: u32 = 68;

/// Largest raw pseudonym value the payload can carry (2^34 - 1).
pub const P_MAX: u64 = (1 << P_BITS) - 1;
/// Largest allocation counter (2^24 - 1).
pub const D_MAX: u32 = (1 << D_BITS) - 1;
/// Largest error-correction flag value. The protocol only emits 0 and 1;
/// 2 and 3 are reserved.
pub const ECF_MAX: u8 = (1 << ECF_BITS) - 1;
/// Largest salt (2^68 - 1).
pub const SALT_MAX: u128 = (1 << SALT_BITS) - 1;

/// Raw values below this render as 10 decimal digits; `P_MAX` exceeds it, so
/// renderability is a separate check from field width.
pub const RENDER_LIMIT: u64 = 10_000_000_000;

/// Number of decimal digits in an MSIN (fixed for this artifact).
pub const MSIN_DIGITS: usize = 10;
/// Total IMSI length: 3 (MCC) + 2 (MNC) + 10 (MSIN).
pub const IMSI_DIGITS: usize = 15;

/// Encoded SUCI plaintext length in bytes: 5 (BCD MSIN) + 3 + 3 + 8.
pub const SUCI_PLAINTEXT_LEN: usize = 19;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    /// A field value does not fit its fixed-width lane.
    #[error("{field} value {value} exceeds its {bits}-bit lane")]
    WidthViolation {
        field: &'static str,
        value: u128,
        bits: u32,
    },
    /// Raw pseudonym value in [10^10, 2^34): representable in the payload but
    /// not as 10 decimal digits.
    #[error("pseudonym value {0} is not renderable as {MSIN_DIGITS} decimal digits")]
    UnrenderablePseudonym(u64),
    /// IMSI string is not `IMSI_DIGITS` decimal digits with a known shape.
    #[error("malformed IMSI: {0}")]
    MalformedImsi(String),
    /// Home-network identifier digits are out of shape.
    #[error("malformed home network id: {0}")]
    MalformedHnId(String),
    /// SUCI bytes cannot be parsed.
    #[error("malformed SUCI: {0}")]
    MalformedSuci(String),
    /// `supipsi` names a protection scheme this build does not implement.
    #[error("unsupported SUCI protection scheme {0}")]
    UnsupportedScheme(u8),
}

/// Raw pseudonym value, always < 2^34.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct PseudonymValue(u64);

impl PseudonymValue {
    pub fn new(raw: u64) -> Result<Self, CodecError> {
        if raw > P_MAX {
            return Err(CodecError::WidthViolation {
                field: "p",
                value: u128::from(raw),
                bits: P_BITS,
            });
        }
        Ok(Self(raw))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// True iff the value fits in 10 decimal digits.
    pub fn renderable(self) -> bool {
        self.0 < RENDER_LIMIT
    }
}

impl std::fmt::Display for PseudonymValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A pseudonym together with the per-subscriber counter it was allocated
/// under. Synchronization state is always compared on the full pair.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct PseudonymEntry {
    pub value: PseudonymValue,
    pub d: u32,
}

impl PseudonymEntry {
    pub fn new(value: PseudonymValue, d: u32) -> Self {
        Self { value, d }
    }
}

/// Decrypted contents of a RAND block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandPayload {
    pub p: PseudonymValue,
    pub d: u32,
    pub ecf: u8,
    pub salt: u128,
}

/// Packs the payload into its 128-bit block. Fails if any field exceeds its
/// lane; `PseudonymValue` is width-checked at construction, the rest here.
pub fn encode_rand_payload(payload: &RandPayload) -> Result<[u8; 16], CodecError> {
    if payload.d > D_MAX {
        return Err(CodecError::WidthViolation {
            field: "d",
            value: u128::from(payload.d),
            bits: D_BITS,
        });
    }
    if payload.ecf > ECF_MAX {
        return Err(CodecError::WidthViolation {
            field: "ecf",
            value: u128::from(payload.ecf),
            bits: ECF_BITS,
        });
    }
    if payload.salt > SALT_MAX {
        return Err(CodecError::WidthViolation {
            field: "salt",
            value: payload.salt,
            bits: SALT_BITS,
        });
    }
    let block = (u128::from(payload.p.raw()) << (D_BITS + ECF_BITS + SALT_BITS))
        | (u128::from(payload.d) << (ECF_BITS + SALT_BITS))
        | (u128::from(payload.ecf) << SALT_BITS)
        | payload.salt;
    Ok(block.to_be_bytes())
}

/// Unpacks a 128-bit block. Total: every block decodes to in-range fields.
pub fn decode_rand_payload(block: &[u8; 16]) -> RandPayload {
    let bits = u128::from_be_bytes(*block);
    RandPayload {
        p: PseudonymValue((bits >> (D_BITS + ECF_BITS + SALT_BITS)) as u64),
        d: ((bits >> (ECF_BITS + SALT_BITS)) as u32) & D_MAX,
        ecf: ((bits >> SALT_BITS) as u8) & ECF_MAX,
        salt: bits & SALT_MAX,
    }
}

/// Home-network identity: 3-digit MCC plus 2-digit MNC. (Variable-length MNC
/// routing is out of scope; the wire format still reserves the 0xF-padded
/// third nibble.)
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HnId {
    mcc: [u8; 3],
    mnc: [u8; 2],
}

impl HnId {
    pub fn new(mcc: &str, mnc: &str) -> Result<Self, CodecError> {
        let bad = |s: &str| CodecError::MalformedHnId(s.to_string());
        if mcc.len() != 3 || !mcc.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad(&format!("MCC {mcc:?} must be 3 decimal digits")));
        }
        if mnc.len() != 2 || !mnc.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad(&format!(
                "MNC {mnc:?} must be 2 decimal digits (3-digit MNC out of scope)"
            )));
        }
        let mut id = HnId {
            mcc: [0; 3],
            mnc: [0; 2],
        };
        id.mcc.copy_from_slice(mcc.as_bytes());
        id.mnc.copy_from_slice(mnc.as_bytes());
        Ok(id)
    }

    pub fn mcc(&self) -> &str {
        std::str::from_utf8(&self.mcc).unwrap()
    }

    pub fn mnc(&self) -> &str {
        std::str::from_utf8(&self.mnc).unwrap()
    }

    /// 6 BCD nibbles: MCC digits, MNC digits, 0xF filler.
    pub fn encode(&self) -> [u8; 3] {
        let d = |b: u8| b - b'0';
        [
            (d(self.mcc[0]) << 4) | d(self.mcc[1]),
            (d(self.mcc[2]) << 4) | d(self.mnc[0]),
            (d(self.mnc[1]) << 4) | 0x0f,
        ]
    }

    pub fn decode(bytes: &[u8; 3]) -> Result<Self, CodecError> {
        let nibbles = [
            bytes[0] >> 4,
            bytes[0] & 0x0f,
            bytes[1] >> 4,
            bytes[1] & 0x0f,
            bytes[2] >> 4,
            bytes[2] & 0x0f,
        ];
        if nibbles[..5].iter().any(|&n| n > 9) || nibbles[5] != 0x0f {
            return Err(CodecError::MalformedHnId(format!(
                "bad BCD hnid {}",
                hex::encode(bytes)
            )));
        }
        let digit = |n: u8| n + b'0';
        Ok(HnId {
            mcc: [digit(nibbles[0]), digit(nibbles[1]), digit(nibbles[2])],
            mnc: [digit(nibbles[3]), digit(nibbles[4])],
        })
    }
}

impl std::fmt::Display for HnId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.mcc(), self.mnc())
    }
}

impl TryFrom<String> for HnId {
    type Error = CodecError;
    fn try_from(s: String) -> Result<Self, CodecError> {
        let (mcc, mnc) = s
            .split_once('-')
            .ok_or_else(|| CodecError::MalformedHnId(s.clone()))?;
        HnId::new(mcc, mnc)
    }
}

impl From<HnId> for String {
    fn from(id: HnId) -> String {
        id.to_string()
    }
}

/// 10-digit MSIN as a number < 10^10.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Msin(u64);

impl Msin {
    pub fn new(value: u64) -> Result<Self, CodecError> {
        if value >= RENDER_LIMIT {
            return Err(CodecError::MalformedImsi(format!(
                "MSIN {value} needs more than {MSIN_DIGITS} digits"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn digits(self) -> String {
        format!("{:010}", self.0)
    }

    /// 5 bytes, two BCD digits per byte, first digit in the high nibble.
    pub fn to_bcd(self) -> [u8; 5] {
        let s = self.digits();
        let d = s.as_bytes();
        let mut out = [0u8; 5];
        for i in 0..5 {
            out[i] = ((d[2 * i] - b'0') << 4) | (d[2 * i + 1] - b'0');
        }
        out
    }

    pub fn from_bcd(bytes: &[u8; 5]) -> Result<Self, CodecError> {
        let mut value: u64 = 0;
        for &b in bytes {
            let (hi, lo) = (b >> 4, b & 0x0f);
            if hi > 9 || lo > 9 {
                return Err(CodecError::MalformedImsi(format!(
                    "bad BCD MSIN {}",
                    hex::encode(bytes)
                )));
            }
            value = value * 100 + u64::from(hi) * 10 + u64::from(lo);
        }
        Ok(Self(value))
    }
}

impl std::fmt::Display for Msin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.digits())
    }
}

/// 15-decimal-digit subscriber-facing identity: MCC ‖ MNC ‖ MSIN. True IMSIs
/// and rendered pseudonyms share this shape; nothing in the string says which
/// one it is.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Imsi {
    digits: [u8; IMSI_DIGITS],
}

impl Imsi {
    pub fn parse(s: &str) -> Result<Self, CodecError> {
        if s.len() != IMSI_DIGITS || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(CodecError::MalformedImsi(format!(
                "{s:?} is not {IMSI_DIGITS} decimal digits"
            )));
        }
        let mut digits = [0u8; IMSI_DIGITS];
        digits.copy_from_slice(s.as_bytes());
        Ok(Self { digits })
    }

    pub fn from_parts(hn: &HnId, msin: Msin) -> Self {
        let s = format!("{}{}{}", hn.mcc(), hn.mnc(), msin.digits());
        Self::parse(&s).expect("3 + 2 + 10 digits")
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.digits).unwrap()
    }

    pub fn hn_id(&self) -> HnId {
        HnId::new(&self.as_str()[..3], &self.as_str()[3..5]).expect("validated digits")
    }

    pub fn msin(&self) -> Msin {
        Msin(self.as_str()[5..].parse().expect("validated digits"))
    }
}

impl std::fmt::Debug for Imsi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Imsi({})", self.as_str())
    }
}

impl std::fmt::Display for Imsi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl TryFrom<String> for Imsi {
    type Error = CodecError;
    fn try_from(s: String) -> Result<Self, CodecError> {
        Imsi::parse(&s)
    }
}

impl From<Imsi> for String {
    fn from(imsi: Imsi) -> String {
        imsi.as_str().to_string()
    }
}

/// Renders a raw pseudonym as an IMSI-shaped identity under the given home
/// network. Values in [10^10, 2^34) fit the payload lane but not 10 decimal
/// digits; allocation never hands them out, so hitting one here means the
/// payload was corrupted or forged.
pub fn render_pseudonym(p: PseudonymValue, hn: &HnId) -> Result<Imsi, CodecError> {
    if !p.renderable() {
        return Err(CodecError::UnrenderablePseudonym(p.raw()));
    }
    Ok(Imsi::from_parts(hn, Msin(p.raw())))
}

/// SUCI protection scheme selector carried in the `supipsi` byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuciScheme {
    /// No concealment: the scheme output is the cleartext BCD MSIN. Emitted
    /// only when the UE has no home-network public key.
    Null,
    /// KEM share ‖ encrypted 19-byte plaintext ‖ 8-byte outer MAC.
    Hybrid,
}

impl SuciScheme {
    pub fn code(self) -> u8 {
        match self {
            SuciScheme::Null => 0,
            SuciScheme::Hybrid => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, CodecError> {
        match code {
            0 => Ok(SuciScheme::Null),
            1 => Ok(SuciScheme::Hybrid),
            other => Err(CodecError::UnsupportedScheme(other)),
        }
    }
}

/// What the hybrid SUCI ciphertext protects: the subscriber's MSIN, the
/// counter window [delta_min, delta_max] driving HN-side pruning and the
/// error-correction decision, and the 64-bit integrity tag T over all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuciPlaintext {
    pub msin: Msin,
    pub delta_min: u32,
    pub delta_max: u32,
    pub tag: u64,
}

impl SuciPlaintext {
    pub fn encode(&self) -> Result<[u8; SUCI_PLAINTEXT_LEN], CodecError> {
        for (field, value) in [("delta_min", self.delta_min), ("delta_max", self.delta_max)] {
            if value > D_MAX {
                return Err(CodecError::WidthViolation {
                    field,
                    value: u128::from(value),
                    bits: D_BITS,
                });
            }
        }
        let mut out = [0u8; SUCI_PLAINTEXT_LEN];
        out[..5].copy_from_slice(&self.msin.to_bcd());
        out[5..8].copy_from_slice(&self.delta_min.to_be_bytes()[1..]);
        out[8..11].copy_from_slice(&self.delta_max.to_be_bytes()[1..]);
        out[11..].copy_from_slice(&self.tag.to_be_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8; SUCI_PLAINTEXT_LEN]) -> Result<Self, CodecError> {
        let mut bcd = [0u8; 5];
        bcd.copy_from_slice(&bytes[..5]);
        let be24 = |b: &[u8]| u32::from(b[0]) << 16 | u32::from(b[1]) << 8 | u32::from(b[2]);
        Ok(SuciPlaintext {
            msin: Msin::from_bcd(&bcd)?,
            delta_min: be24(&bytes[5..8]),
            delta_max: be24(&bytes[8..11]),
            tag: u64::from_be_bytes(bytes[11..].try_into().unwrap()),
        })
    }

    /// Byte string the integrity tag is computed over: BCD MSIN ‖ delta_min ‖
    /// delta_max (the tag lane itself excluded).
    pub fn tag_input(msin: Msin, delta_min: u32, delta_max: u32) -> [u8; 11] {
        let mut out = [0u8; 11];
        out[..5].copy_from_slice(&msin.to_bcd());
        out[5..8].copy_from_slice(&delta_min.to_be_bytes()[1..]);
        out[8..11].copy_from_slice(&delta_max.to_be_bytes()[1..]);
        out
    }
}

/// Concealed subscriber identity as it travels over the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suci {
    pub hnid: HnId,
    pub hnpki: u8,
    pub scheme: SuciScheme,
    /// Scheme output: cleartext BCD MSIN (null) or the hybrid ciphertext.
    pub payload: Vec<u8>,
}

pub fn encode_suci(suci: &Suci) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + suci.payload.len());
    out.extend_from_slice(&suci.hnid.encode());
    out.push(suci.hnpki);
    out.push(suci.scheme.code());
    out.extend_from_slice(&suci.payload);
    out
}

pub fn decode_suci(bytes: &[u8]) -> Result<Suci, CodecError> {
    if bytes.len() < 5 {
        return Err(CodecError::MalformedSuci(format!(
            "{} bytes is shorter than the 5-byte header",
            bytes.len()
        )));
    }
    let hnid = HnId::decode(bytes[..3].try_into().unwrap())?;
    let hnpki = bytes[3];
    let scheme = SuciScheme::from_code(bytes[4])?;
    let payload = bytes[5..].to_vec();
    if scheme == SuciScheme::Null && payload.len() != 5 {
        return Err(CodecError::MalformedSuci(format!(
            "null-scheme payload must be 5 BCD bytes, got {}",
            payload.len()
        )));
    }
    Ok(Suci {
        hnid,
        hnpki,
        scheme,
        payload,
    })
}
