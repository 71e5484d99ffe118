//! Steady-state throughput of the protocol engine: codec, cryptosuite,
//! vector generation, complete attach flows, pool allocation, and whole
//! simulated runs.

use std::hint::black_box;
use std::sync::Arc;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use pseudoaka_core::aka::AMF_DEFAULT;
use pseudoaka_core::codec::{decode_rand_payload, encode_rand_payload};
use pseudoaka_core::sim::{self, Scenario};
use pseudoaka_core::{
    fiveg_attach_flow, lte_attach_flow, AttachVia, CryptoSuite, HnConfig, HnId, HomeNetwork,
    Imsi, MasterKey, Msin, PseudonymKey, PseudonymPool, PseudonymValue, RandPayload,
    ReferenceSuite, SnState, UeId, UePolicy, UsimState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Rig {
    hn: HomeNetwork,
    ue: UsimState,
    imsi: Imsi,
    rng: ChaCha20Rng,
}

fn rig() -> Rig {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let suite: Arc<dyn CryptoSuite> = Arc::new(ReferenceSuite);
    let mut hn = HomeNetwork::new(
        HnConfig {
            id: HnId::new("262", "42").unwrap(),
            pool_digits: 4,
            cap_c: 10,
            li_key_binding: false,
            guti_grace: 3600,
            amf: AMF_DEFAULT,
        },
        suite.clone(),
    );
    let (sk, pk) = suite.generate_keypair(&mut rng);
    hn.install_keypair(1, sk, pk.clone());
    let k = MasterKey(rng.gen());
    let imsi = hn
        .provision_subscriber(Msin::new(900_000_001).unwrap(), k, None, None, 0, &mut rng)
        .unwrap();
    let sub = hn.subscriber(&imsi).unwrap();
    let ue = UsimState::new(
        imsi,
        k,
        sub.kappa,
        Some((1, pk)),
        sub.slot_c,
        sub.slot_n,
        UePolicy::default(),
        false,
        suite,
    );
    Rig { hn, ue, imsi, rng }
}

fn bench_codec(c: &mut Criterion) {
    let payload = RandPayload {
        p: PseudonymValue::new(123_456_789).unwrap(),
        d: 4711,
        ecf: 0,
        salt: 0x5a17_5a17_5a17,
    };
    let block = encode_rand_payload(&payload).unwrap();
    c.bench_function("codec/encode_rand_payload", |b| {
        b.iter(|| encode_rand_payload(black_box(&payload)).unwrap())
    });
    c.bench_function("codec/decode_rand_payload", |b| {
        b.iter(|| decode_rand_payload(black_box(&block)))
    });
}

fn bench_crypto(c: &mut Criterion) {
    let suite = ReferenceSuite;
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let kappa = PseudonymKey(rng.gen());
    let k = MasterKey(rng.gen());
    let block: [u8; 16] = rng.gen();
    c.bench_function("crypto/encrypt_rand", |b| {
        b.iter(|| suite.encrypt_rand(black_box(&kappa), black_box(block)))
    });
    let msg: [u8; 11] = rng.gen();
    c.bench_function("crypto/mac64", |b| {
        b.iter(|| suite.mac64(black_box(&k), black_box(&msg)))
    });
}

fn bench_vector_generation(c: &mut Criterion) {
    let mut r = rig();
    let mut t = 0u64;
    c.bench_function("hn/lte_av_batch_of_4", |b| {
        b.iter(|| {
            t += 1;
            r.hn
                .handle_av_request_lte(&r.imsi, "lte-1", false, 4, t, &mut r.rng)
                .unwrap()
        })
    });
    let mut r = rig();
    let mut t = 0u64;
    c.bench_function("hn/suci_av_request", |b| {
        b.iter(|| {
            t += 1;
            let pseudoaka_core::IdentityResponse::Suci(bytes) =
                r.ue.respond_identity_5g(&mut r.rng)
            else {
                unreachable!()
            };
            r.hn
                .handle_suci_av_request(&bytes, "nr-1", t, &mut r.rng)
                .unwrap()
        })
    });
}

fn bench_attach_flows(c: &mut Criterion) {
    let mut r = rig();
    let mut sn = SnState::new_lte("lte-1", false, 1);
    let mut t = 0u64;
    c.bench_function("flow/lte_attach", |b| {
        b.iter(|| {
            t += 1;
            let rep = lte_attach_flow(
                &mut sn,
                &mut r.hn,
                &mut r.ue,
                UeId(0),
                AttachVia::Inquiry,
                t,
                &mut r.rng,
            );
            assert!(rep.outcome.is_ok());
            rep
        })
    });
    let mut r = rig();
    let mut sn = SnState::new_5g("nr-1");
    let mut t = 0u64;
    c.bench_function("flow/fiveg_attach", |b| {
        b.iter(|| {
            t += 1;
            let rep = fiveg_attach_flow(
                &mut sn,
                &mut r.hn,
                &mut r.ue,
                UeId(0),
                AttachVia::Inquiry,
                t,
                &mut r.rng,
            );
            assert!(rep.outcome.is_ok());
            rep
        })
    });
}

fn bench_pool(c: &mut Criterion) {
    // Allocation cost at 50% occupancy: the operating point the pool is
    // sized for (two expected tries).
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut pool = PseudonymPool::new(4);
    let space = pool.space();
    while (pool.allocated_count() as u64) < space / 2 {
        pool.allocate(&mut rng).unwrap();
    }
    c.bench_function("pool/allocate_release_at_half", |b| {
        b.iter(|| {
            let (v, _) = pool.allocate(&mut rng).unwrap();
            pool.release(v);
            v
        })
    });
}

fn bench_simulation(c: &mut Criterion) {
    let scenario = Scenario::parse(
        r#"
[scenario]
name = "bench-mixed"
seed = 1
duration = 86400

[home_network]
mcc = "262"
mnc = "42"
pool_digits = 3
cap_c = 10

[[serving_networks]]
id = "lte-1"
flavor = "lte"
batch_size = 2

[[serving_networks]]
id = "nr-1"
flavor = "5g"

[subscribers]
count = 20

[workload]
events = 500
"#,
    )
    .unwrap();
    let mut group = c.benchmark_group("sim");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    group.bench_function("mixed_500_events", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            sim::run(black_box(&scenario), seed).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_codec,
    bench_crypto,
    bench_vector_generation,
    bench_attach_flows,
    bench_pool,
    bench_simulation
);
criterion_main!(benches);
