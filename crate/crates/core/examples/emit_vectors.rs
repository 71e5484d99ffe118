//! Emits reference-suite test vectors as hex, one file per primitive, into
//! the directory given as the first argument (default `docs/test-vectors`).
//!
//! All inputs are fixed byte patterns (or a fixed-seed RNG where the
//! primitive is randomized), so the files are reproducible:
//!
//! ```text
//! cargo run -p pseudoaka-core --example emit_vectors -- docs/test-vectors
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use pseudoaka_core::codec::{encode_rand_payload, encode_suci, render_pseudonym};
use pseudoaka_core::{
    AnchorFlavor, CryptoSuite, HnId, MasterKey, Msin, PseudonymValue, RandPayload,
    ReferenceSuite, Suci, SuciPlaintext, SuciScheme,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn pattern<const N: usize>(start: u8) -> [u8; N] {
    let mut out = [0u8; N];
    for (i, b) in out.iter_mut().enumerate() {
        *b = start.wrapping_add(i as u8);
    }
    out
}

fn main() {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "docs/test-vectors".into())
        .into();
    std::fs::create_dir_all(&dir).expect("create output directory");
    let suite = ReferenceSuite;
    let mut files: Vec<(&str, String)> = Vec::new();

    // Symmetric-side keys: K is a fixed pattern, kappa derived from it.
    let k = MasterKey(pattern::<16>(0x00));
    let kappa = suite.derive_pseudonym_key(&k);
    files.push((
        "derive_pseudonym_key.txt",
        format!(
            "# kappa = KDF(K, pseudonym-key)\nK      = {}\nkappa  = {}\n",
            hex::encode(k.0),
            hex::encode(kappa.0),
        ),
    ));

    // Keyed permutation over one 128-bit block, and its inverse.
    let payload = RandPayload {
        p: PseudonymValue::new(1_234_567_890).unwrap(),
        d: 4711,
        ecf: 0,
        salt: 0x0123_4567_89ab_cdef_0,
    };
    let block = encode_rand_payload(&payload).unwrap();
    let rand = suite.encrypt_rand(&kappa, block);
    assert_eq!(suite.decrypt_rand(&kappa, rand), block);
    files.push((
        "encrypt_rand.txt",
        format!(
            "# RAND = E_kappa(payload block); decrypt_rand inverts it\n\
             # payload fields: p = 1234567890, d = 4711, ecf = 0, salt = 0x0123456789abcdef0\n\
             kappa  = {}\nblock  = {}\nRAND   = {}\n",
            hex::encode(kappa.0),
            hex::encode(block),
            hex::encode(rand),
        ),
    ));

    // 64-bit MAC over the 11-byte SUCI tag input.
    let msin = Msin::new(9_876_543_210).unwrap();
    let tag_input = SuciPlaintext::tag_input(msin, 17, 42);
    let tag = suite.mac64(&k, &tag_input);
    let plain = SuciPlaintext {
        msin,
        delta_min: 17,
        delta_max: 42,
        tag,
    };
    files.push((
        "mac64.txt",
        format!(
            "# T = mac64(K, msin-BCD || delta_min || delta_max)\n\
             # msin = 9876543210, delta_min = 17, delta_max = 42\n\
             K      = {}\nmsg    = {}\nT      = {:016x}\n",
            hex::encode(k.0),
            hex::encode(tag_input),
            tag,
        ),
    ));

    // One AKA function-family evaluation.
    let aka_rand = pattern::<16>(0xa0);
    let out = suite.aka_functions(&k, &aka_rand, 0x0000_0000_0102, 0x8000);
    files.push((
        "aka_functions.txt",
        format!(
            "# f1..f5 over (K, RAND, SQN, AMF)\n\
             K      = {}\nRAND   = {}\nSQN    = 000000000102\nAMF    = 8000\n\
             MAC_A  = {}\nXRES   = {}\nCK||IK = {}\nAK     = {}\n",
            hex::encode(k.0),
            hex::encode(aka_rand),
            hex::encode(out.mac_a),
            hex::encode(out.xres),
            hex::encode(out.material),
            hex::encode(out.ak),
        ),
    ));

    // Anchor keys, with and without the lawful-interception MSIN binding.
    let plain_lte = suite.derive_anchor_key(&out.material, AnchorFlavor::KAsme, "lte-1", None);
    let bound_lte =
        suite.derive_anchor_key(&out.material, AnchorFlavor::KAsme, "lte-1", Some(msin));
    let plain_5g = suite.derive_anchor_key(&out.material, AnchorFlavor::KSeaf, "nr-1", None);
    files.push((
        "derive_anchor_key.txt",
        format!(
            "# anchor = KDF(CK||IK, flavor || serving network || optional MSIN binding)\n\
             CK||IK          = {}\n\
             K_ASME lte-1            = {}\n\
             K_ASME lte-1, msin 9876543210 = {}\n\
             K_SEAF nr-1             = {}\n",
            hex::encode(out.material),
            hex::encode(plain_lte),
            hex::encode(bound_lte),
            hex::encode(plain_5g),
        ),
    ));

    // RES* and HRES*.
    let res_star = suite.res_star(&out.material, "nr-1", &aka_rand, &out.xres);
    let hres_star = suite.hres_star(&aka_rand, &res_star);
    files.push((
        "res_star.txt",
        format!(
            "# RES* binds RES to the serving network; HRES* = H(RAND || RES*)\n\
             CK||IK = {}\nSN     = nr-1\nRAND   = {}\nRES    = {}\n\
             RES*   = {}\nHRES*  = {}\n",
            hex::encode(out.material),
            hex::encode(aka_rand),
            hex::encode(out.xres),
            hex::encode(res_star),
            hex::encode(hres_star),
        ),
    ));

    // Hybrid PKE: randomized, so the vector fixes the RNG seed.
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let (sk, pk) = suite.generate_keypair(&mut rng);
    let pt = plain.encode().expect("in-range window");
    let ct = suite.pke_encrypt(&pk, &pt, (1, SuciScheme::Hybrid.code()), &mut rng);
    let back = suite
        .pke_decrypt(&sk, &ct, (1, SuciScheme::Hybrid.code()))
        .expect("round trip");
    assert_eq!(back, pt);
    files.push((
        "pke.txt",
        format!(
            "# Hybrid PKE round trip. Randomized primitive: keypair and\n\
             # ciphertext are reproducible with ChaCha20 rng seed 0.\n\
             # context (hnpki, supipsi) = (1, {})\n\
             sk     = {}\npk     = {}\npt     = {}\nct     = {}\n",
            SuciScheme::Hybrid.code(),
            hex::encode(sk.0),
            hex::encode(pk.0),
            hex::encode(&pt),
            hex::encode(&ct),
        ),
    ));

    for (name, contents) in &files {
        let path = dir.join(name);
        std::fs::write(&path, contents).expect("write vector file");
        println!("wrote {}", path.display());
    }

    // Worked wire-format examples, for the byte-layout documentation.
    let mut doc = String::new();
    let hnid = HnId::new("262", "42").unwrap();
    writeln!(doc, "--- wire-format worked examples ---").unwrap();
    writeln!(
        doc,
        "rand payload: p=1234567890 d=4711 ecf=0 salt=0x0123456789abcdef0"
    )
    .unwrap();
    writeln!(doc, "  block = {}", hex::encode(block)).unwrap();
    writeln!(
        doc,
        "  rendered pseudonym for p: {}",
        render_pseudonym(payload.p, &hnid).unwrap()
    )
    .unwrap();
    let suci = Suci {
        hnid,
        hnpki: 1,
        scheme: SuciScheme::Hybrid,
        payload: ct.clone(),
    };
    let wire = encode_suci(&suci);
    writeln!(doc, "suci: hnid 262/42, hnpki=1, scheme=hybrid").unwrap();
    writeln!(doc, "  hnid bytes   = {}", hex::encode(hnid.encode())).unwrap();
    writeln!(doc, "  wire         = {}", hex::encode(&wire)).unwrap();
    let null = Suci {
        hnid,
        hnpki: 0,
        scheme: SuciScheme::Null,
        payload: msin.to_bcd().to_vec(),
    };
    writeln!(doc, "null suci    = {}", hex::encode(encode_suci(&null))).unwrap();
    print!("{doc}");
}
