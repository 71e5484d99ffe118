//! Desynchronization recovery drill.
//!
//! Corrupts a UE's upper counter far past anything the HN will ever embed,
//! then measures the recovery path: LTE attaches keep succeeding but can
//! never move the counter window (every delivered counter compares low), and
//! the first concealed-identity 5G attach carries the inflated bound to the
//! HN, which raises the emergency flag and resets the UE in one exchange.

use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::sn::{fiveg_attach_flow, lte_attach_flow, AttachVia};
use crate::types::{SimTime, UeId};
use crate::ue::UpdateOutcome;

use super::engine::World;

#[derive(Debug, Clone, Serialize)]
pub struct DrillReport {
    pub lte_attempts: u32,
    /// LTE attaches whose delivered pseudonym was accepted into the slots.
    /// A desynchronized UE must hold this at zero.
    pub lte_accepted: u32,
    pub ecf_seen: bool,
    /// 5G AKAs executed until the UE was back in sync.
    pub fiveg_akas_to_recovery: u32,
    pub recovered: bool,
}

/// Corrupts `ue_id`'s upper counter to `d_f + offset_from_df`, runs
/// `lte_attempts` LTE attaches (which must not repair it), then 5G attaches
/// until the UE is synchronized again, bounded at three.
pub fn run_resync_drill(
    world: &mut World,
    ue_id: UeId,
    offset_from_df: u32,
    lte_sn: &str,
    fiveg_sn: &str,
    lte_attempts: u32,
    start: SimTime,
    rng: &mut ChaCha20Rng,
) -> DrillReport {
    let imsi = world.ue_imsi[&ue_id];
    let sub = world.hn.subscriber(&imsi).expect("drill target exists");
    let d_f = sub.slot_f.map(|f| f.d).unwrap_or(sub.slot_n.d);
    world
        .ues
        .get_mut(&ue_id)
        .expect("drill target exists")
        .corrupt_slot2_counter(d_f + offset_from_df);

    let mut report = DrillReport {
        lte_attempts: 0,
        lte_accepted: 0,
        ecf_seen: false,
        fiveg_akas_to_recovery: 0,
        recovered: false,
    };
    let mut t = start;

    for _ in 0..lte_attempts {
        let sn = world.sns.get_mut(lte_sn).expect("drill LTE SN exists");
        let ue = world.ues.get_mut(&ue_id).expect("drill target exists");
        let rep = lte_attach_flow(sn, &mut world.hn, ue, ue_id, AttachVia::Inquiry, t, rng);
        report.lte_attempts += 1;
        if matches!(
            rep.ue_update,
            Some(UpdateOutcome::Shifted { .. }) | Some(UpdateOutcome::Reset { .. })
        ) {
            report.lte_accepted += 1;
        }
        report.ecf_seen |= rep.ecf;
        t += 10;
    }

    for _ in 0..3 {
        let sn = world.sns.get_mut(fiveg_sn).expect("drill 5G SN exists");
        let ue = world.ues.get_mut(&ue_id).expect("drill target exists");
        let rep = fiveg_attach_flow(sn, &mut world.hn, ue, ue_id, AttachVia::Inquiry, t, rng);
        report.fiveg_akas_to_recovery += 1;
        report.ecf_seen |= rep.ecf;
        t += 10;
        if world.ue_synced(ue_id) {
            report.recovered = true;
            break;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::super::engine::build_world;
    use super::super::scenario::Scenario;
    use super::*;

    const DRILL_WORLD: &str = r#"
        [scenario]
        name = "drill_world"
        seed = 3
        duration = 10000

        [home_network]
        mcc = "244"
        mnc = "99"
        pool_digits = 3
        cap_c = 6

        [[serving_networks]]
        id = "lte-1"
        flavor = "lte"

        [[serving_networks]]
        id = "nr-1"
        flavor = "5g"

        [subscribers]
        count = 4

        [workload]
        events = 1
    "#;

    #[test]
    fn lte_cannot_repair_but_one_suci_attach_does() {
        let scenario = Scenario::parse(DRILL_WORLD).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut world = build_world(&scenario, &mut rng).unwrap();

        let rep = run_resync_drill(&mut world, UeId(0), 1000, "lte-1", "nr-1", 3, 100, &mut rng);
        assert_eq!(rep.lte_attempts, 3);
        assert_eq!(rep.lte_accepted, 0, "LTE must never move a stuck window");
        assert!(rep.ecf_seen, "recovery must go through the emergency flag");
        assert_eq!(rep.fiveg_akas_to_recovery, 1, "one concealed attach heals");
        assert!(rep.recovered);
        assert!(world.ue_synced(UeId(0)));
    }

    #[test]
    fn recovered_ue_behaves_normally_afterwards() {
        let scenario = Scenario::parse(DRILL_WORLD).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let mut world = build_world(&scenario, &mut rng).unwrap();
        let rep = run_resync_drill(&mut world, UeId(1), 1000, "lte-1", "nr-1", 3, 100, &mut rng);
        assert!(rep.recovered);

        // A plain LTE attach afterwards shifts the window as usual.
        let sn = world.sns.get_mut("lte-1").unwrap();
        let ue = world.ues.get_mut(&UeId(1)).unwrap();
        let after = lte_attach_flow(
            sn,
            &mut world.hn,
            ue,
            UeId(1),
            AttachVia::Inquiry,
            500,
            &mut rng,
        );
        assert!(after.outcome.is_ok());
        assert!(matches!(
            after.ue_update,
            Some(UpdateOutcome::Shifted { .. })
        ));
        assert!(world.ue_synced(UeId(1)));
    }
}
