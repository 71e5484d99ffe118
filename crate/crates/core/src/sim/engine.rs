//! The deterministic discrete-event engine.
//!
//! A run is a pure function of (scenario, seed): one ChaCha stream drives
//! subscriber keys, workload draws, and every protocol nonce, and all world
//! state lives in ordered maps, so two runs with the same inputs produce
//! byte-identical traces. Events execute synchronously — an attach is one
//! event covering the whole radio + core exchange — and the full invariant
//! suite runs after every event; the first violation aborts the run with the
//! trace prefix that led to it.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aka::{AkaFlavor, AMF_DEFAULT};
use crate::codec::{HnId, Imsi, Msin};
use crate::crypto::MasterKey;
use crate::hn::{AllocationLogEntry, HnConfig, HomeNetwork};
use crate::sn::{
    fiveg_attach_flow, lte_attach_flow, AirIdentity, AirMessage, AttachReport, AttachVia, SnState,
};
use crate::types::{SimTime, UeId};
use crate::ue::{IdentityResponse, UePolicy, UpdateOutcome, UsimState};

use super::adversary::AdversaryState;
use super::checker::{self, Violation};
use super::report::{AdversarySummary, DrillOutcome, RunReport};
use super::scenario::{
    AdversaryKindCfg, FaultCfg, FlavorCfg, Scenario, ScenarioError, ScriptAction, ViaCfg,
};
use super::trace::{self, TraceRecord};

pub struct World {
    pub hn: HomeNetwork,
    pub sns: BTreeMap<String, SnState>,
    pub ues: BTreeMap<UeId, UsimState>,
    pub ue_imsi: BTreeMap<UeId, Imsi>,
    pub cap_c: usize,
    /// UEs under an injected fault; sync checks skip them until they repair.
    pub corrupted: BTreeSet<UeId>,
}

impl World {
    pub fn subscriber_count(&self) -> u32 {
        self.ues.len() as u32
    }

    /// True when this UE's pseudonym state is fully held by the HN again.
    pub fn ue_synced(&self, ue_id: UeId) -> bool {
        let ue = &self.ues[&ue_id];
        let sub = self
            .hn
            .subscriber(&self.ue_imsi[&ue_id])
            .expect("every simulated UE has a subscriber record");
        let reset_pair = ue.slot1.value == ue.slot2.value && ue.slot1.d + 1 == ue.slot2.d;
        sub.holds_pair(&ue.slot2)
            && (sub.holds_pair(&ue.slot1) || reset_pair)
            && ue.slot1.d < ue.slot2.d
            && ue.p_ue_entries().iter().all(|e| sub.holds_value(&e.value))
    }
}

/// The allocation log and resolution parameters, exported beside the trace
/// so billing can run offline against the exact state of this run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HnLogExport {
    pub run_id: String,
    pub guti_grace: SimTime,
    pub true_msins: BTreeMap<u64, Imsi>,
    pub entries: Vec<AllocationLogEntry>,
}

pub struct RunOutcome {
    pub trace: Vec<TraceRecord>,
    /// The exact line-delimited bytes `--trace-out` writes.
    pub trace_text: String,
    pub report: RunReport,
    pub hn_log: HnLogExport,
    pub world: World,
    pub adversaries: Vec<AdversaryState>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invariant violation at event {event_index} [{code}]: {detail}")]
    Invariant {
        event_index: u64,
        code: String,
        detail: String,
        /// Trace prefix up to and including the violating event.
        trace_text: String,
    },
}

/// Provisions the HN, its pool, every subscriber, and the serving networks.
pub fn build_world(scenario: &Scenario, rng: &mut ChaCha20Rng) -> Result<World, SimError> {
    let cfg = &scenario.home_network;
    let hn_id = HnId::new(&cfg.mcc, &cfg.mnc)
        .map_err(|e| ScenarioError::Invalid(format!("home network id: {e}")))?;
    let suite: std::sync::Arc<dyn crate::crypto::CryptoSuite> =
        std::sync::Arc::new(crate::crypto::ReferenceSuite);
    let mut hn = HomeNetwork::new(
        HnConfig {
            id: hn_id,
            pool_digits: cfg.pool_digits,
            cap_c: cfg.cap_c,
            li_key_binding: cfg.li_key_binding,
            guti_grace: cfg.guti_grace,
            amf: AMF_DEFAULT,
        },
        suite.clone(),
    );
    let (sk, pk) = suite.generate_keypair(rng);
    hn.install_keypair(1, sk, pk.clone());
    for &v in &cfg.pool_reserved {
        hn.pool
            .reserve(v)
            .map_err(|e| ScenarioError::Invalid(format!("pool_reserved {v}: {e}")))?;
    }

    let policy = UePolicy {
        max_age: scenario.policies.max_age,
        max_size: scenario.policies.max_size,
        reregister_before_drop: scenario.policies.reregister_before_drop,
    };

    let mut ues = BTreeMap::new();
    let mut ue_imsi = BTreeMap::new();
    let provision = |hn: &mut HomeNetwork,
                         rng: &mut ChaCha20Rng,
                         idx: u32,
                         msin: u64,
                         pinned: Option<(u64, u64)>|
     -> Result<(UeId, UsimState), ScenarioError> {
        let msin = Msin::new(msin)
            .map_err(|e| ScenarioError::Invalid(format!("subscriber {idx}: {e}")))?;
        let k = MasterKey(rng.gen());
        let imsi = hn
            .provision_subscriber(msin, k, None, pinned, 0, rng)
            .map_err(|e| ScenarioError::Invalid(format!("subscriber {idx}: {e}")))?;
        let sub = hn.subscriber(&imsi).expect("just provisioned");
        let ue = UsimState::new(
            imsi,
            k,
            sub.kappa,
            Some((1, pk.clone())),
            sub.slot_c,
            sub.slot_n,
            policy,
            cfg.li_key_binding,
            hn.suite().clone(),
        );
        Ok((UeId(idx), ue))
    };

    let mut idx = 0u32;
    for e in &scenario.subscribers.explicit {
        let pinned = e.pinned.map(|[a, b]| (a, b));
        let (id, ue) = provision(&mut hn, rng, idx, e.msin, pinned)?;
        ue_imsi.insert(id, ue.imsi);
        ues.insert(id, ue);
        idx += 1;
    }
    for i in 0..scenario.subscribers.count {
        let (id, ue) = provision(&mut hn, rng, idx, 9_100_000_000 + u64::from(i), None)?;
        ue_imsi.insert(id, ue.imsi);
        ues.insert(id, ue);
        idx += 1;
    }

    let mut sns = BTreeMap::new();
    for sn_cfg in &scenario.serving_networks {
        let sn = match sn_cfg.flavor {
            FlavorCfg::Lte => SnState::new_lte(&sn_cfg.id, sn_cfg.li_patched, sn_cfg.batch_size),
            FlavorCfg::FiveG => SnState::new_5g(&sn_cfg.id),
        };
        sns.insert(sn_cfg.id.clone(), sn);
    }

    Ok(World {
        hn,
        sns,
        ues,
        ue_imsi,
        cap_c: cfg.cap_c,
        corrupted: BTreeSet::new(),
    })
}

#[derive(Debug, Clone)]
enum Planned {
    Script(ScriptAction),
    Fault(FaultCfg),
    AdversaryBeat(usize),
    DrillStep { ue: u32, step: DrillStep },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DrillStep {
    Fault,
    LteAttach,
    FivegAttach,
}

#[derive(Default)]
struct Stats {
    attaches_ok: u64,
    attaches_failed: u64,
    failures_by_kind: BTreeMap<String, u64>,
    rotations: u64,
    ecf_resets: u64,
    suci_attaches: u64,
    guti_reattaches: u64,
    lu_count: u64,
    pages: u64,
    sweeps: u64,
    swept_entries: u64,
    cdr_count: u64,
    service_units: u64,
    extra_ciphers: u64,
    extra_macs: u64,
    checks_run: u64,
    pool_samples: Vec<(SimTime, u64)>,
}

struct Engine<'s> {
    scenario: &'s Scenario,
    run_id: String,
    rng: ChaCha20Rng,
    world: World,
    advs: Vec<AdversaryState>,
    trace: Vec<TraceRecord>,
    /// Radio messages of the event being executed, for the air checks.
    air: Vec<(String, AkaFlavor, Vec<AirMessage>)>,
    stats: Stats,
    drills: BTreeMap<UeId, DrillOutcome>,
    event_index: u64,
}

pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutcome, SimError> {
    scenario.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let world = build_world(scenario, &mut rng)?;
    let run_id = format!("{}-{seed:016x}", scenario.scenario.name);
    let advs = scenario
        .adversaries
        .iter()
        .map(AdversaryState::from_cfg)
        .collect();

    let mut engine = Engine {
        scenario,
        run_id: run_id.clone(),
        rng,
        world,
        advs,
        trace: Vec::new(),
        air: Vec::new(),
        stats: Stats::default(),
        drills: BTreeMap::new(),
        event_index: 0,
    };
    engine.push(TraceRecord::RunHeader {
        t: 0,
        seq: 0,
        run_id,
        scenario: scenario.scenario.name.clone(),
        seed,
        subscribers: scenario.total_subscribers(),
        serving_networks: scenario.serving_networks.len() as u32,
    });
    engine.run_loop()?;
    Ok(engine.finish())
}

impl<'s> Engine<'s> {
    fn push(&mut self, record: TraceRecord) {
        self.trace.push(record);
    }

    fn seq(&self) -> u64 {
        self.trace.len() as u64
    }

    /// Expands script, faults, adversary beats, and the drill into one
    /// time-ordered list. Insertion order breaks ties, so the file's own
    /// ordering is the tiebreak.
    fn static_events(&self) -> Vec<(SimTime, u64, Planned)> {
        let mut events: Vec<(SimTime, u64, Planned)> = Vec::new();
        let mut order = 0u64;
        let mut push = |events: &mut Vec<(SimTime, u64, Planned)>, t: SimTime, p: Planned| {
            events.push((t, order, p));
            order += 1;
        };
        for e in &self.scenario.script {
            push(&mut events, e.t, Planned::Script(e.action.clone()));
        }
        for f in &self.scenario.faults {
            push(&mut events, f.t, Planned::Fault(f.clone()));
        }
        for (i, a) in self.scenario.adversaries.iter().enumerate() {
            if a.kind == AdversaryKindCfg::PassiveEavesdrop {
                // Passive observation is the trace itself; no beats to run.
                continue;
            }
            let mut t = a.t_start;
            while t < a.t_end {
                push(&mut events, t, Planned::AdversaryBeat(i));
                t += a.period;
            }
        }
        if let Some(d) = &self.scenario.drill {
            for ue in 0..d.targets {
                let base = d.t_start + SimTime::from(ue) * d.spacing * 8;
                push(
                    &mut events,
                    base,
                    Planned::DrillStep {
                        ue,
                        step: DrillStep::Fault,
                    },
                );
                for k in 0..d.lte_attempts {
                    push(
                        &mut events,
                        base + d.spacing * SimTime::from(k + 1),
                        Planned::DrillStep {
                            ue,
                            step: DrillStep::LteAttach,
                        },
                    );
                }
                push(
                    &mut events,
                    base + d.spacing * SimTime::from(d.lte_attempts + 1),
                    Planned::DrillStep {
                        ue,
                        step: DrillStep::FivegAttach,
                    },
                );
            }
        }
        events.sort_by_key(|(t, order, _)| (*t, *order));
        events
    }

    fn run_loop(&mut self) -> Result<(), SimError> {
        let statics = self.static_events();
        let mut statics = statics.into_iter().peekable();
        let workload_events = self
            .scenario
            .workload
            .as_ref()
            .map(|w| w.events)
            .unwrap_or(0);
        let duration = self.scenario.scenario.duration;
        let total_estimate = workload_events + self.scenario.script.len() as u64 + 1;
        let sample_every = (total_estimate / 50).max(1);

        self.sample_pool(0);
        for k in 0..workload_events {
            let t_slot = duration * k / workload_events.max(1);
            while let Some((t, _, _)) = statics.peek() {
                if *t <= t_slot {
                    let (t, _, planned) = statics.next().unwrap();
                    self.execute_planned(t, planned)?;
                } else {
                    break;
                }
            }
            self.execute_workload(t_slot)?;
            if self.event_index % sample_every == 0 {
                self.sample_pool(t_slot);
            }
        }
        let mut last_t = 0;
        while let Some((t, _, planned)) = statics.next() {
            last_t = t;
            self.execute_planned(t, planned)?;
            if self.event_index % sample_every == 0 {
                self.sample_pool(t);
            }
        }
        self.sample_pool(if workload_events > 0 { duration } else { last_t });

        let seq = self.seq();
        self.push(TraceRecord::RunFooter {
            t: if workload_events > 0 { duration } else { last_t },
            seq,
            events: self.event_index,
            attaches_ok: self.stats.attaches_ok,
            attaches_failed: self.stats.attaches_failed,
            violations: 0,
        });
        Ok(())
    }

    fn sample_pool(&mut self, t: SimTime) {
        let in_use = self.world.hn.pool.allocated_count() as u64;
        let space = self.world.hn.pool.space();
        self.stats.pool_samples.push((t, in_use));
        let seq = self.seq();
        self.push(TraceRecord::Pool {
            t,
            seq,
            in_use,
            space,
        });
    }

    /// Runs the full checker suite after an event; a violation is traced and
    /// turned into the terminal error. Repaired UEs leave the corrupted set.
    fn after_event(&mut self, t: SimTime) -> Result<(), SimError> {
        self.event_index += 1;
        self.stats.checks_run += 1;
        let violation = checker::check_world(&self.world, &self.air);
        self.air.clear();
        if let Some(Violation { code, detail }) = violation {
            let seq = self.seq();
            self.push(TraceRecord::Violation {
                t,
                seq,
                event_index: self.event_index,
                code: code.to_string(),
                detail: detail.clone(),
            });
            return Err(SimError::Invariant {
                event_index: self.event_index,
                code: code.to_string(),
                detail,
                trace_text: trace::to_jsonl(&self.trace),
            });
        }
        let repaired: Vec<UeId> = self
            .world
            .corrupted
            .iter()
            .copied()
            .filter(|&u| self.world.ue_synced(u))
            .collect();
        for u in repaired {
            self.world.corrupted.remove(&u);
            if let Some(d) = self.drills.get_mut(&u) {
                d.recovered = true;
            }
        }
        Ok(())
    }

    fn execute_planned(&mut self, t: SimTime, planned: Planned) -> Result<(), SimError> {
        match planned {
            Planned::Script(action) => self.execute_script(t, action)?,
            Planned::Fault(f) => {
                let d2 = self.apply_corruption(UeId(f.target), f.offset_from_df, f.absolute);
                let seq = self.seq();
                self.push(TraceRecord::Fault {
                    t,
                    seq,
                    target: UeId(f.target).to_string(),
                    fault: "corrupt_d2".into(),
                    d2,
                });
            }
            Planned::AdversaryBeat(i) => self.adversary_beat(t, i),
            Planned::DrillStep { ue, step } => self.drill_step(t, ue, step),
        }
        self.after_event(t)
    }

    fn apply_corruption(&mut self, ue_id: UeId, offset: Option<u32>, absolute: Option<u32>) -> u32 {
        let imsi = self.world.ue_imsi[&ue_id];
        let sub = self.world.hn.subscriber(&imsi).expect("known UE");
        let d_f = sub.slot_f.map(|f| f.d).unwrap_or(sub.slot_n.d);
        let d2 = absolute.unwrap_or_else(|| d_f + offset.unwrap_or(1000));
        self.world
            .ues
            .get_mut(&ue_id)
            .expect("known UE")
            .corrupt_slot2_counter(d2);
        self.world.corrupted.insert(ue_id);
        d2
    }

    fn drill_step(&mut self, t: SimTime, ue: u32, step: DrillStep) {
        let drill = self.scenario.drill.as_ref().expect("drill step needs cfg");
        let (lte_sn, fiveg_sn, offset) =
            (drill.lte_sn.clone(), drill.fiveg_sn.clone(), drill.offset_from_df);
        let ue_id = UeId(ue);
        match step {
            DrillStep::Fault => {
                let d2 = self.apply_corruption(ue_id, Some(offset), None);
                self.drills.insert(
                    ue_id,
                    DrillOutcome {
                        ue: ue_id.to_string(),
                        lte_attempts: 0,
                        lte_accepted: 0,
                        fiveg_to_recover: 0,
                        recovered: false,
                    },
                );
                let seq = self.seq();
                self.push(TraceRecord::Fault {
                    t,
                    seq,
                    target: ue_id.to_string(),
                    fault: "corrupt_d2".into(),
                    d2,
                });
            }
            DrillStep::LteAttach => {
                let rep = self.attach(t, &lte_sn, ue_id, AttachVia::Inquiry);
                let accepted = matches!(
                    rep.ue_update,
                    Some(UpdateOutcome::Shifted { .. }) | Some(UpdateOutcome::Reset { .. })
                );
                if let Some(d) = self.drills.get_mut(&ue_id) {
                    d.lte_attempts += 1;
                    if accepted {
                        d.lte_accepted += 1;
                    }
                }
            }
            DrillStep::FivegAttach => {
                // A fresh SUCI, never the GUTI: the counter window is the
                // whole point of the recovery attach.
                let _ = self.attach(t, &fiveg_sn, ue_id, AttachVia::Inquiry);
                if let Some(d) = self.drills.get_mut(&ue_id) {
                    d.fiveg_to_recover += 1;
                }
            }
        }
    }

    fn execute_script(&mut self, t: SimTime, action: ScriptAction) -> Result<(), SimError> {
        match action {
            ScriptAction::Attach { ue, sn, via } => {
                let ue_id = UeId(ue);
                let via = match via {
                    ViaCfg::Inquiry => AttachVia::Inquiry,
                    ViaCfg::Guti => self.world.ues[&ue_id]
                        .guti_for(&sn)
                        .map(AttachVia::Guti)
                        .unwrap_or(AttachVia::Inquiry),
                };
                self.attach(t, &sn, ue_id, via);
            }
            ScriptAction::Service { ue, sn, units } => {
                self.service(t, UeId(ue), &sn, units);
            }
            ScriptAction::Sweep { ue } => {
                self.sweep(t, UeId(ue));
            }
            ScriptAction::Page { sn, ue, by_identity } => {
                self.page(t, &sn, UeId(ue), by_identity);
            }
        }
        Ok(())
    }

    fn execute_workload(&mut self, t: SimTime) -> Result<(), SimError> {
        let w = self.scenario.workload.as_ref().expect("workload mode");
        let (aw, sw, pw, ww) = (
            w.attach_weight,
            w.service_weight,
            w.page_weight,
            w.sweep_weight,
        );
        let (switch_prob, guti_prob, page_ident_prob) =
            (w.switch_prob, w.guti_reattach_prob, w.page_by_identity_prob);
        let roll = self.rng.gen_range(0..aw + sw + pw + ww);
        let n = self.world.subscriber_count();
        if roll < aw {
            let ue_id = UeId(self.rng.gen_range(0..n));
            let sn_ids: Vec<String> = self.world.sns.keys().cloned().collect();
            let current = self.world.ues[&ue_id].current_sn.clone();
            let sn = match current {
                Some(c) if !self.rng.gen_bool(switch_prob) => c,
                _ => sn_ids[self.rng.gen_range(0..sn_ids.len())].clone(),
            };
            let via = match self.world.ues[&ue_id].guti_for(&sn) {
                Some(g) if self.rng.gen_bool(guti_prob) => AttachVia::Guti(g),
                _ => AttachVia::Inquiry,
            };
            self.attach(t, &sn, ue_id, via);
        } else if roll < aw + sw {
            // Honest consumption: the UE uses service where it is attached.
            let candidates: Vec<(UeId, String)> = self
                .world
                .ues
                .iter()
                .filter_map(|(id, ue)| {
                    let sn = ue.current_sn.clone()?;
                    let has_session = self.world.sns[&sn]
                        .guti_table
                        .values()
                        .any(|r| r.ue == *id);
                    has_session.then_some((*id, sn))
                })
                .collect();
            if !candidates.is_empty() {
                let (ue_id, sn) = candidates[self.rng.gen_range(0..candidates.len())].clone();
                let units = self.rng.gen_range(1..=10);
                self.service(t, ue_id, &sn, units);
            }
        } else if roll < aw + sw + pw {
            let candidates: Vec<String> = self
                .world
                .sns
                .iter()
                .filter(|(_, sn)| !sn.guti_table.is_empty())
                .map(|(id, _)| id.clone())
                .collect();
            if !candidates.is_empty() {
                let sn_id = candidates[self.rng.gen_range(0..candidates.len())].clone();
                let gutis: Vec<u32> = self.world.sns[&sn_id].guti_table.keys().copied().collect();
                let guti = gutis[self.rng.gen_range(0..gutis.len())];
                let by_identity = self.world.sns[&sn_id].flavor == AkaFlavor::Lte
                    && self.rng.gen_bool(page_ident_prob);
                self.page_by_guti(t, &sn_id, guti, by_identity);
            }
        } else {
            let ue_id = UeId(self.rng.gen_range(0..n));
            self.sweep(t, ue_id);
        }
        self.after_event(t)
    }

    /// One full attach: runs the flavor's flow, collects its air messages
    /// for the checker, and folds the report into the stats and the trace.
    fn attach(&mut self, t: SimTime, sn_id: &str, ue_id: UeId, via: AttachVia) -> AttachReport {
        let world = &mut self.world;
        let sn = world.sns.get_mut(sn_id).expect("validated SN id");
        let ue = world.ues.get_mut(&ue_id).expect("validated UE id");
        let rep = match sn.flavor {
            AkaFlavor::Lte => {
                lte_attach_flow(sn, &mut world.hn, ue, ue_id, via, t, &mut self.rng)
            }
            AkaFlavor::FiveG => {
                fiveg_attach_flow(sn, &mut world.hn, ue, ue_id, via, t, &mut self.rng)
            }
        };
        self.air
            .push((sn_id.to_string(), rep.flavor, rep.air.clone()));
        match &rep.outcome {
            Ok(_) => self.stats.attaches_ok += 1,
            Err(_) => {
                self.stats.attaches_failed += 1;
                *self
                    .stats
                    .failures_by_kind
                    .entry(trace::render_outcome(&rep.outcome))
                    .or_insert(0) += 1;
            }
        }
        if rep.hn_rotated {
            self.stats.rotations += 1;
        }
        if matches!(rep.ue_update, Some(UpdateOutcome::Reset { .. })) {
            self.stats.ecf_resets += 1;
        }
        match rep.identity_used {
            AirIdentity::Suci(_) => self.stats.suci_attaches += 1,
            AirIdentity::Guti(_) => self.stats.guti_reattaches += 1,
            AirIdentity::Pseudonym(_) => {}
        }
        if rep.lu_sent {
            self.stats.lu_count += 1;
        }
        self.stats.extra_ciphers += u64::from(rep.extra_ciphers);
        self.stats.extra_macs += u64::from(rep.extra_macs);
        let record = trace::attach_record(t, self.seq(), &rep);
        self.push(record);
        rep
    }

    fn service(&mut self, t: SimTime, ue_id: UeId, sn_id: &str, units: u32) {
        let sn = self.world.sns.get_mut(sn_id).expect("validated SN id");
        // The SN bills its own session record; the UE may have moved on.
        let Some(guti) = sn
            .guti_table
            .iter()
            .find(|(_, r)| r.ue == ue_id)
            .map(|(g, _)| *g)
        else {
            return;
        };
        let cdr = sn
            .record_service(guti, units, t)
            .expect("guti just looked up");
        self.world
            .ues
            .get_mut(&ue_id)
            .expect("validated UE id")
            .touch_context(sn_id, t);
        self.stats.cdr_count += 1;
        self.stats.service_units += u64::from(units);
        let seq = self.seq();
        self.push(TraceRecord::Service {
            t,
            seq,
            actor: ue_id.to_string(),
            sn: sn_id.to_string(),
            guti,
            units,
            cdr_identity: cdr.identity.as_str().to_string(),
        });
    }

    fn sweep(&mut self, t: SimTime, ue_id: UeId) {
        let removed = self
            .world
            .ues
            .get_mut(&ue_id)
            .expect("validated UE id")
            .apply_removal_policy(t);
        self.stats.sweeps += 1;
        self.stats.swept_entries += removed.len() as u64;
        let seq = self.seq();
        self.push(TraceRecord::Sweep {
            t,
            seq,
            actor: ue_id.to_string(),
            removed: removed.len() as u32,
        });
    }

    fn page(&mut self, t: SimTime, sn_id: &str, ue_id: UeId, by_identity: bool) {
        let Some(guti) = self.world.sns[sn_id]
            .guti_table
            .iter()
            .find(|(_, r)| r.ue == ue_id)
            .map(|(g, _)| *g)
        else {
            return;
        };
        self.page_by_guti(t, sn_id, guti, by_identity);
    }

    fn page_by_guti(&mut self, t: SimTime, sn_id: &str, guti: u32, by_identity: bool) {
        let sn = &self.world.sns[sn_id];
        let flavor = sn.flavor;
        let Some((msg, ue_id, via)) = sn.page(guti, by_identity) else {
            return;
        };
        let AirMessage::Page(inner) = &msg else {
            unreachable!("page always yields a page message")
        };
        let rendered = trace::render_air_identity(inner);
        self.air.push((sn_id.to_string(), flavor, vec![msg.clone()]));
        self.stats.pages += 1;
        let seq = self.seq();
        self.push(TraceRecord::Page {
            t,
            seq,
            sn: sn_id.to_string(),
            target: ue_id.to_string(),
            message: rendered,
        });
        // The paged UE re-authenticates in the same event.
        self.attach(t, sn_id, ue_id, via);
    }

    fn adversary_beat(&mut self, t: SimTime, idx: usize) {
        let n = self.world.subscriber_count();
        let (kind, cell, victim) = {
            let adv = &mut self.advs[idx];
            let victim = adv.target.unwrap_or_else(|| {
                let v = adv.round_robin % n;
                adv.round_robin += 1;
                v
            });
            (adv.kind, adv.cell_id(), UeId(victim))
        };
        let kind_name = self.advs[idx].kind_name().to_string();
        let id = self.advs[idx].id.clone();
        let record = |this: &mut Self, action: &str, observed: Option<String>, effect: Option<String>| {
            let seq = this.seq();
            this.push(TraceRecord::Adversary {
                t,
                seq,
                id: id.clone(),
                adversary: kind_name.clone(),
                action: action.to_string(),
                target: Some(victim.to_string()),
                observed,
                effect,
            });
        };
        match kind {
            AdversaryKindCfg::PassiveEavesdrop => {}
            AdversaryKindCfg::ActiveLteCatcher => {
                let ue = self.world.ues.get_mut(&victim).expect("victim exists");
                let IdentityResponse::Pseudonym(q) = ue.respond_identity_lte(&cell) else {
                    unreachable!("LTE inquiry yields a pseudonym")
                };
                self.advs[idx]
                    .lte_harvest
                    .entry(victim.to_string())
                    .or_default()
                    .push((t, q));
                self.air.push((
                    cell,
                    AkaFlavor::Lte,
                    vec![AirMessage::Identity(AirIdentity::Pseudonym(q))],
                ));
                record(
                    self,
                    "identity_inquiry",
                    Some(format!("pseudonym:{}", q.as_str())),
                    None,
                );
            }
            AdversaryKindCfg::Active5gCatcher => {
                let ue = self.world.ues.get_mut(&victim).expect("victim exists");
                let IdentityResponse::Suci(bytes) = ue.respond_identity_5g(&mut self.rng) else {
                    unreachable!("5G inquiry yields a SUCI")
                };
                let rendered = format!("suci:{}", hex::encode(&bytes));
                self.advs[idx].suci_harvest.push(bytes.clone());
                self.air.push((
                    cell,
                    AkaFlavor::FiveG,
                    vec![AirMessage::Identity(AirIdentity::Suci(bytes))],
                ));
                record(self, "identity_inquiry", Some(rendered), None);
            }
            AdversaryKindCfg::MaliciousLuSn => {
                // Fake SN with a core-network foothold: harvests an identity
                // on the air, then files a location update it never earned.
                let ue = self.world.ues.get_mut(&victim).expect("victim exists");
                let IdentityResponse::Pseudonym(q) = ue.respond_identity_lte(&cell) else {
                    unreachable!("LTE inquiry yields a pseudonym")
                };
                self.air.push((
                    cell.clone(),
                    AkaFlavor::Lte,
                    vec![AirMessage::Identity(AirIdentity::Pseudonym(q))],
                ));
                let rotated = self
                    .world
                    .hn
                    .handle_lu(&q, &cell, t)
                    .unwrap_or(false);
                let adv = &mut self.advs[idx];
                adv.lu_sent += 1;
                if rotated {
                    adv.lu_rotated += 1;
                }
                record(
                    self,
                    "spurious_lu",
                    Some(format!("pseudonym:{}", q.as_str())),
                    Some(if rotated { "rotated" } else { "no_rotation" }.into()),
                );
            }
            AdversaryKindCfg::RandForger => {
                let rand: [u8; 16] = self.rng.gen();
                let autn: [u8; 16] = self.rng.gen();
                let ue = self.world.ues.get_mut(&victim).expect("victim exists");
                let result = ue.handle_challenge(&rand, &autn, AkaFlavor::Lte, &cell, false);
                let adv = &mut self.advs[idx];
                adv.forges_sent += 1;
                let accepted = result.is_ok();
                if accepted {
                    adv.forges_accepted += 1;
                }
                self.air.push((
                    cell,
                    AkaFlavor::Lte,
                    vec![AirMessage::Challenge { rand, autn }],
                ));
                record(
                    self,
                    "forged_challenge",
                    None,
                    Some(if accepted { "accepted" } else { "rejected" }.into()),
                );
            }
        }
    }

    fn finish(mut self) -> RunOutcome {
        let trace_text = trace::to_jsonl(&self.trace);
        let adversaries: Vec<AdversarySummary> = self
            .advs
            .iter()
            .map(|a| AdversarySummary {
                id: a.id.clone(),
                kind: a.kind_name().to_string(),
                lte_observations: a
                    .lte_harvest
                    .values()
                    .map(|v| v.len() as u64)
                    .sum(),
                lte_victims: a.lte_harvest.len() as u64,
                suci_observations: a.suci_harvest.len() as u64,
                suci_distinct: a
                    .suci_harvest
                    .iter()
                    .collect::<BTreeSet<_>>()
                    .len() as u64,
                lu_sent: a.lu_sent,
                lu_rotated: a.lu_rotated,
                forges_sent: a.forges_sent,
                forges_accepted: a.forges_accepted,
            })
            .collect();
        let report = RunReport {
            run_id: self.run_id.clone(),
            scenario: self.scenario.scenario.name.clone(),
            seed: self.scenario.scenario.seed,
            events: self.event_index,
            checks_run: self.stats.checks_run,
            violations: 0,
            attaches_ok: self.stats.attaches_ok,
            attaches_failed: self.stats.attaches_failed,
            failures_by_kind: std::mem::take(&mut self.stats.failures_by_kind),
            rotations: self.stats.rotations,
            ecf_resets: self.stats.ecf_resets,
            suci_attaches: self.stats.suci_attaches,
            guti_reattaches: self.stats.guti_reattaches,
            lu_count: self.stats.lu_count,
            pages: self.stats.pages,
            sweeps: self.stats.sweeps,
            swept_entries: self.stats.swept_entries,
            cdr_count: self.stats.cdr_count,
            service_units: self.stats.service_units,
            pool_samples: std::mem::take(&mut self.stats.pool_samples),
            pool_space: self.world.hn.pool.space(),
            pool_final_in_use: self.world.hn.pool.allocated_count() as u64,
            alloc_tries: self.world.hn.pool.tries_total,
            allocations: self.world.hn.pool.allocations,
            overhead_extra_ciphers: self.stats.extra_ciphers,
            overhead_extra_macs: self.stats.extra_macs,
            adversaries,
            drill: self.drills.into_values().collect(),
        };
        let hn_log = HnLogExport {
            run_id: self.run_id,
            guti_grace: self.world.hn.config.guti_grace,
            true_msins: self
                .world
                .hn
                .subscribers()
                .map(|s| (s.imsi.msin().value(), s.imsi))
                .collect(),
            entries: self.world.hn.log.entries.clone(),
        };
        RunOutcome {
            trace: self.trace,
            trace_text,
            report,
            hn_log,
            world: self.world,
            adversaries: self.advs,
        }
    }
}
