//! Pluggable cryptographic suite.
//!
//! Every primitive the protocol needs sits behind [`CryptoSuite`] so a
//! deployment can swap in a conforming profile. [`ReferenceSuite`] is the
//! build's default: AES-128 as the 128-bit keyed permutation for RAND
//! payloads, HMAC-SHA-256 as PRF/MAC/KDF, and X25519 + KDF-derived stream
//! encryption + outer MAC as the hybrid SUCI scheme. The suite is internally
//! consistent rather than standards-conformant; both ends of every exchange
//! use the same suite instance.
//!
//! All randomness is drawn from caller-provided RNGs so simulation runs stay
//! reproducible.

use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;
use hmac::{Hmac, Mac};
use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::codec::Msin;

type HmacSha256 = Hmac<Sha256>;

/// Long-term subscriber key K, shared between USIM and HN.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MasterKey(pub [u8; 16]);

/// Pseudonym key kappa, derived from K; encrypts/decrypts RAND payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PseudonymKey(pub [u8; 16]);

/// Home-network public key for SUCI concealment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HnPublicKey(pub [u8; 32]);

/// Home-network secret key.
#[derive(Clone)]
pub struct HnSecretKey(pub [u8; 32]);

impl std::fmt::Debug for HnSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("HnSecretKey(..)")
    }
}

/// Length of the hybrid scheme's KEM share (an X25519 public key).
pub const KEM_SHARE_LEN: usize = 32;
/// Length of the hybrid scheme's outer MAC.
pub const OUTER_MAC_LEN: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    /// Ciphertext too short or otherwise unparseable.
    #[error("malformed ciphertext: {0}")]
    Malformed(String),
    /// Outer MAC check failed; wrong key or tampered bytes.
    #[error("decryption failure")]
    DecryptionFailure,
}

/// Outputs of one AKA function-family evaluation over (K, RAND).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AkaFunctionOutput {
    /// Network authentication code over (RAND, SQN, AMF).
    pub mac_a: [u8; 8],
    /// Expected challenge response.
    pub xres: [u8; 8],
    /// CK ‖ IK session-key material.
    pub material: [u8; 32],
    /// Anonymity key concealing SQN inside AUTN.
    pub ak: [u8; 6],
}

/// Which anchor key a session derivation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorFlavor {
    /// LTE K_ASME.
    KAsme,
    /// 5G K_SEAF.
    KSeaf,
}

/// The primitive set the protocol engine calls. Object-safe so actors can
/// share one `Arc<dyn CryptoSuite>`.
pub trait CryptoSuite: Send + Sync {
    /// kappa = KDF(K, "pseudonym-key"); the UE and HN derive it independently.
    fn derive_pseudonym_key(&self, k: &MasterKey) -> PseudonymKey;

    /// Keyed permutation over the 128-bit payload block.
    fn encrypt_rand(&self, kappa: &PseudonymKey, block: [u8; 16]) -> [u8; 16];

    /// Inverse permutation.
    fn decrypt_rand(&self, kappa: &PseudonymKey, rand: [u8; 16]) -> [u8; 16];

    /// 64-bit MAC under K; integrity tag T for SUCI counter windows.
    fn mac64(&self, k: &MasterKey, message: &[u8]) -> u64;

    /// One evaluation of the AKA function family (domain-separated PRF
    /// instances standing in for f1/f2/f3/f4/f5).
    fn aka_functions(&self, k: &MasterKey, rand: &[u8; 16], sqn: u64, amf: u16)
        -> AkaFunctionOutput;

    /// Anchor-key derivation (K_ASME / K_SEAF) from CK‖IK material, bound to
    /// the serving network and, when lawful-interception key binding is on,
    /// to the subscriber's MSIN. UE and network sides agree iff they feed the
    /// same `msin_binding`.
    fn derive_anchor_key(
        &self,
        material: &[u8; 32],
        flavor: AnchorFlavor,
        serving_network: &str,
        msin_binding: Option<Msin>,
    ) -> [u8; 32];

    /// RES* extends RES with a serving-network binding. Only parties holding
    /// CK‖IK material (UE and HN) can compute it.
    fn res_star(&self, material: &[u8; 32], serving_network: &str, rand: &[u8; 16], res: &[u8; 8])
        -> [u8; 16];

    /// HRES* = H(RAND ‖ RES*), the hash the serving network checks.
    fn hres_star(&self, rand: &[u8; 16], res_star: &[u8; 16]) -> [u8; 16];

    /// Fresh home-network key pair for the SUCI scheme.
    fn generate_keypair(&self, rng: &mut dyn RngCore) -> (HnSecretKey, HnPublicKey);

    /// Hybrid public-key encryption: KEM share ‖ encrypted plaintext ‖ outer
    /// MAC. `context` is the (hnpki, supipsi) pair routing this SUCI, mixed
    /// into the key schedule for domain separation.
    fn pke_encrypt(
        &self,
        pk: &HnPublicKey,
        plaintext: &[u8],
        context: (u8, u8),
        rng: &mut dyn RngCore,
    ) -> Vec<u8>;

    /// Inverse of `pke_encrypt`; any parse or MAC failure is
    /// `DecryptionFailure`-class and leaves no plaintext.
    fn pke_decrypt(
        &self,
        sk: &HnSecretKey,
        ciphertext: &[u8],
        context: (u8, u8),
    ) -> Result<Vec<u8>, CryptoError>;
}

/// Constant-time byte equality; used for every response/tag check.
pub fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Default suite; see module docs for the primitive choices.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReferenceSuite;

impl ReferenceSuite {
    /// Counter-mode KDF over HMAC-SHA-256: out_i = HMAC(key, label ‖ info ‖ i).
    fn kdf(key: &[u8], label: &str, info: &[u8], out: &mut [u8]) {
        let mut counter: u32 = 1;
        for chunk in out.chunks_mut(32) {
            let mut mac = <HmacSha256 as Mac>::new_from_slice(key).expect("any key length");
            mac.update(label.as_bytes());
            mac.update(&[0x00]);
            mac.update(info);
            mac.update(&counter.to_be_bytes());
            let block = mac.finalize().into_bytes();
            chunk.copy_from_slice(&block[..chunk.len()]);
            counter += 1;
        }
    }

    fn prf(k: &MasterKey, tag: &str, parts: &[&[u8]]) -> [u8; 32] {
        let mut mac = <HmacSha256 as Mac>::new_from_slice(&k.0).expect("any key length");
        mac.update(tag.as_bytes());
        mac.update(&[0x00]);
        for part in parts {
            mac.update(part);
        }
        mac.finalize().into_bytes().into()
    }

    fn hybrid_keys(shared: &[u8; 32], kem_share: &[u8; 32], context: (u8, u8), pt_len: usize) -> Vec<u8> {
        let mut info = Vec::with_capacity(34);
        info.extend_from_slice(kem_share);
        info.push(context.0);
        info.push(context.1);
        let mut out = vec![0u8; pt_len + 32];
        Self::kdf(shared, "suci-hybrid", &info, &mut out);
        out
    }
}

impl CryptoSuite for ReferenceSuite {
    fn derive_pseudonym_key(&self, k: &MasterKey) -> PseudonymKey {
        let mut out = [0u8; 16];
        Self::kdf(&k.0, "pseudonym-key", &[], &mut out);
        PseudonymKey(out)
    }

    fn encrypt_rand(&self, kappa: &PseudonymKey, block: [u8; 16]) -> [u8; 16] {
        let cipher = Aes128::new(&kappa.0.into());
        let mut b = block.into();
        cipher.encrypt_block(&mut b);
        b.into()
    }

    fn decrypt_rand(&self, kappa: &PseudonymKey, rand: [u8; 16]) -> [u8; 16] {
        let cipher = Aes128::new(&kappa.0.into());
        let mut b = rand.into();
        cipher.decrypt_block(&mut b);
        b.into()
    }

    fn mac64(&self, k: &MasterKey, message: &[u8]) -> u64 {
        let full = Self::prf(k, "mac64", &[message]);
        u64::from_be_bytes(full[..8].try_into().unwrap())
    }

    fn aka_functions(
        &self,
        k: &MasterKey,
        rand: &[u8; 16],
        sqn: u64,
        amf: u16,
    ) -> AkaFunctionOutput {
        let sqn_bytes = &sqn.to_be_bytes()[2..]; // 48-bit lane
        let amf_bytes = amf.to_be_bytes();
        let f1 = Self::prf(k, "f1", &[rand, sqn_bytes, &amf_bytes]);
        let f2 = Self::prf(k, "f2", &[rand]);
        let f3 = Self::prf(k, "f3", &[rand]);
        let f4 = Self::prf(k, "f4", &[rand]);
        let f5 = Self::prf(k, "f5", &[rand]);
        let mut material = [0u8; 32];
        material[..16].copy_from_slice(&f3[..16]); // CK
        material[16..].copy_from_slice(&f4[..16]); // IK
        AkaFunctionOutput {
            mac_a: f1[..8].try_into().unwrap(),
            xres: f2[..8].try_into().unwrap(),
            material,
            ak: f5[..6].try_into().unwrap(),
        }
    }

    fn derive_anchor_key(
        &self,
        material: &[u8; 32],
        flavor: AnchorFlavor,
        serving_network: &str,
        msin_binding: Option<Msin>,
    ) -> [u8; 32] {
        let label = match flavor {
            AnchorFlavor::KAsme => "k-asme",
            AnchorFlavor::KSeaf => "k-seaf",
        };
        let mut info = Vec::with_capacity(serving_network.len() + 6);
        info.extend_from_slice(serving_network.as_bytes());
        if let Some(msin) = msin_binding {
            info.push(0x01);
            info.extend_from_slice(&msin.to_bcd());
        } else {
            info.push(0x00);
        }
        let mut out = [0u8; 32];
        Self::kdf(material, label, &info, &mut out);
        out
    }

    fn res_star(
        &self,
        material: &[u8; 32],
        serving_network: &str,
        rand: &[u8; 16],
        res: &[u8; 8],
    ) -> [u8; 16] {
        let mut info = Vec::with_capacity(serving_network.len() + 24);
        info.extend_from_slice(serving_network.as_bytes());
        info.extend_from_slice(rand);
        info.extend_from_slice(res);
        let mut binding = [0u8; 8];
        Self::kdf(material, "res-star", &info, &mut binding);
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(res);
        out[8..].copy_from_slice(&binding);
        out
    }

    fn hres_star(&self, rand: &[u8; 16], res_star: &[u8; 16]) -> [u8; 16] {
        let mut h = Sha256::new();
        h.update(rand);
        h.update(res_star);
        h.finalize()[..16].try_into().unwrap()
    }

    fn generate_keypair(&self, rng: &mut dyn RngCore) -> (HnSecretKey, HnPublicKey) {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let sk = StaticSecret::from(seed);
        let pk = PublicKey::from(&sk);
        (HnSecretKey(sk.to_bytes()), HnPublicKey(pk.to_bytes()))
    }

    fn pke_encrypt(
        &self,
        pk: &HnPublicKey,
        plaintext: &[u8],
        context: (u8, u8),
        rng: &mut dyn RngCore,
    ) -> Vec<u8> {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let eph = StaticSecret::from(seed);
        let kem_share = PublicKey::from(&eph).to_bytes();
        let shared = eph.diffie_hellman(&PublicKey::from(pk.0)).to_bytes();

        let keys = Self::hybrid_keys(&shared, &kem_share, context, plaintext.len());
        let (pad, mac_key) = keys.split_at(plaintext.len());

        let mut out = Vec::with_capacity(KEM_SHARE_LEN + plaintext.len() + OUTER_MAC_LEN);
        out.extend_from_slice(&kem_share);
        out.extend(plaintext.iter().zip(pad).map(|(p, k)| p ^ k));

        let mut mac = <HmacSha256 as Mac>::new_from_slice(mac_key).expect("any key length");
        mac.update(&out);
        let tag = mac.finalize().into_bytes();
        out.extend_from_slice(&tag[..OUTER_MAC_LEN]);
        out
    }

    fn pke_decrypt(
        &self,
        sk: &HnSecretKey,
        ciphertext: &[u8],
        context: (u8, u8),
    ) -> Result<Vec<u8>, CryptoError> {
        if ciphertext.len() < KEM_SHARE_LEN + OUTER_MAC_LEN {
            return Err(CryptoError::Malformed(format!(
                "{} bytes is shorter than KEM share + MAC",
                ciphertext.len()
            )));
        }
        let (head, tag) = ciphertext.split_at(ciphertext.len() - OUTER_MAC_LEN);
        let (kem_share, body) = head.split_at(KEM_SHARE_LEN);
        let kem_share: [u8; 32] = kem_share.try_into().unwrap();

        let secret = StaticSecret::from(sk.0);
        let shared = secret.diffie_hellman(&PublicKey::from(kem_share)).to_bytes();
        let keys = Self::hybrid_keys(&shared, &kem_share, context, body.len());
        let (pad, mac_key) = keys.split_at(body.len());

        let mut mac = <HmacSha256 as Mac>::new_from_slice(mac_key).expect("any key length");
        mac.update(head);
        let expected = mac.finalize().into_bytes();
        if !ct_eq(&expected[..OUTER_MAC_LEN], tag) {
            return Err(CryptoError::DecryptionFailure);
        }
        Ok(body.iter().zip(pad).map(|(c, k)| c ^ k).collect())
    }
}
