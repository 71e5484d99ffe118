//! Scenario files: the declarative description of a simulation run.
//!
//! A scenario names the home network, its serving networks and subscribers,
//! and where the events come from — a randomized workload, an explicit
//! script, a resynchronization drill, or any mix. Everything that influences
//! the run lives in the file; together with a seed it pins the trace down to
//! the byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{SimTime, DAY};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario: ScenarioMeta,
    pub home_network: HomeNetworkCfg,
    #[serde(default)]
    pub policies: PoliciesCfg,
    pub serving_networks: Vec<ServingNetworkCfg>,
    pub subscribers: SubscribersCfg,
    #[serde(default)]
    pub workload: Option<WorkloadCfg>,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
    #[serde(default)]
    pub adversaries: Vec<AdversaryCfg>,
    #[serde(default)]
    pub faults: Vec<FaultCfg>,
    #[serde(default)]
    pub drill: Option<DrillCfg>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub name: String,
    /// Default seed; `--seed` overrides it.
    pub seed: u64,
    /// Simulated horizon in seconds. Workload events spread across it.
    pub duration: SimTime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeNetworkCfg {
    pub mcc: String,
    pub mnc: String,
    /// Pseudonym pool digits S; the pool holds 10^S values.
    pub pool_digits: u32,
    pub cap_c: usize,
    #[serde(default)]
    pub li_key_binding: bool,
    #[serde(default = "default_grace")]
    pub guti_grace: SimTime,
    /// Values marked in-use before provisioning, to tighten small pools.
    #[serde(default)]
    pub pool_reserved: Vec<u64>,
}

fn default_grace() -> SimTime {
    3600
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoliciesCfg {
    #[serde(default = "default_max_age")]
    pub max_age: SimTime,
    #[serde(default = "default_max_size")]
    pub max_size: usize,
    #[serde(default)]
    pub reregister_before_drop: bool,
}

fn default_max_age() -> SimTime {
    DAY
}
fn default_max_size() -> usize {
    10
}

impl Default for PoliciesCfg {
    fn default() -> Self {
        PoliciesCfg {
            max_age: DAY,
            max_size: 10,
            reregister_before_drop: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlavorCfg {
    Lte,
    #[serde(rename = "5g")]
    FiveG,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServingNetworkCfg {
    pub id: String,
    pub flavor: FlavorCfg,
    /// LTE only; 5G serving networks are always patched.
    #[serde(default)]
    pub li_patched: bool,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn default_batch() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscribersCfg {
    /// Auto-provisioned subscribers, numbered after the explicit ones.
    #[serde(default)]
    pub count: u32,
    #[serde(default)]
    pub explicit: Vec<ExplicitSubscriber>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSubscriber {
    pub msin: u64,
    /// Initial pseudonym values (counters 1 and 2) instead of random ones.
    #[serde(default)]
    pub pinned: Option<[u64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadCfg {
    pub events: u64,
    #[serde(default = "w_attach")]
    pub attach_weight: u32,
    #[serde(default = "w_service")]
    pub service_weight: u32,
    #[serde(default = "w_page")]
    pub page_weight: u32,
    #[serde(default = "w_sweep")]
    pub sweep_weight: u32,
    /// Probability an attach leaves the UE's current serving network.
    #[serde(default = "half")]
    pub switch_prob: f64,
    /// Probability a re-attach presents the GUTI instead of being inquired.
    #[serde(default = "half")]
    pub guti_reattach_prob: f64,
    /// Probability an LTE page carries the attach identity in cleartext.
    #[serde(default)]
    pub page_by_identity_prob: f64,
}

fn w_attach() -> u32 {
    60
}
fn w_service() -> u32 {
    20
}
fn w_page() -> u32 {
    10
}
fn w_sweep() -> u32 {
    10
}
fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub t: SimTime,
    #[serde(flatten)]
    pub action: ScriptAction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScriptAction {
    Attach {
        ue: u32,
        sn: String,
        #[serde(default)]
        via: ViaCfg,
    },
    /// Bill `units` of service against the UE's GUTI at `sn` — the SN side
    /// does this whether or not the UE has since moved on.
    Service { ue: u32, sn: String, units: u32 },
    Sweep { ue: u32 },
    Page {
        sn: String,
        ue: u32,
        #[serde(default)]
        by_identity: bool,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViaCfg {
    #[default]
    Inquiry,
    /// Present the GUTI this SN last issued to the UE (falls back to an
    /// inquiry if there is none).
    Guti,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryCfg {
    pub id: String,
    pub kind: AdversaryKindCfg,
    pub t_start: SimTime,
    pub t_end: SimTime,
    pub period: SimTime,
    /// Fixed victim; absent means round-robin over all UEs.
    #[serde(default)]
    pub target: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKindCfg {
    PassiveEavesdrop,
    ActiveLteCatcher,
    #[serde(rename = "active_5g_catcher")]
    Active5gCatcher,
    MaliciousLuSn,
    RandForger,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultCfg {
    pub t: SimTime,
    pub target: u32,
    pub kind: FaultKindCfg,
    /// d2 ← d_f + offset (d_n when no future slot exists).
    #[serde(default)]
    pub offset_from_df: Option<u32>,
    /// d2 ← absolute value.
    #[serde(default)]
    pub absolute: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKindCfg {
    CorruptD2,
}

/// Auto-expanded resynchronization drill: corrupt each target, attempt
/// `lte_attempts` LTE attaches (which must leave the slots stale), then one
/// SUCI-initiated 5G attach (which must repair them).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrillCfg {
    /// Number of UEs drilled, starting at index 0.
    pub targets: u32,
    pub t_start: SimTime,
    /// Gap between consecutive steps of one UE's drill; UE i starts at
    /// t_start + i * spacing * 8.
    pub spacing: SimTime,
    #[serde(default = "default_offset")]
    pub offset_from_df: u32,
    #[serde(default = "default_attempts")]
    pub lte_attempts: u32,
    pub lte_sn: String,
    #[serde(rename = "5g_sn")]
    pub fiveg_sn: String,
}

fn default_offset() -> u32 {
    1000
}
fn default_attempts() -> u32 {
    3
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn total_subscribers(&self) -> u32 {
        self.subscribers.explicit.len() as u32 + self.subscribers.count
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |m: String| Err(ScenarioError::Invalid(m));
        if self.scenario.duration == 0 {
            return fail("duration must be > 0".into());
        }
        if self.serving_networks.is_empty() {
            return fail("at least one serving network is required".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for sn in &self.serving_networks {
            if sn.id.is_empty() || !ids.insert(&sn.id) {
                return fail(format!("serving network id {:?} empty or duplicated", sn.id));
            }
            if !(1..=8).contains(&sn.batch_size) {
                return fail(format!("{}: batch_size must be 1..=8", sn.id));
            }
        }
        let n = self.total_subscribers();
        if n == 0 {
            return fail("at least one subscriber is required".into());
        }
        if !(1..=10).contains(&self.home_network.pool_digits) {
            return fail("pool_digits must be 1..=10".into());
        }
        let sn_exists = |id: &str| self.serving_networks.iter().any(|s| s.id == id);
        let check_ue = |ue: u32, what: &str| {
            if ue >= n {
                fail(format!("{what} references unknown subscriber {ue}"))
            } else {
                Ok(())
            }
        };
        for (i, e) in self.script.iter().enumerate() {
            let (ue, sn) = match &e.action {
                ScriptAction::Attach { ue, sn, .. } => (*ue, Some(sn)),
                ScriptAction::Service { ue, sn, .. } => (*ue, Some(sn)),
                ScriptAction::Sweep { ue } => (*ue, None),
                ScriptAction::Page { sn, ue, .. } => (*ue, Some(sn)),
            };
            check_ue(ue, &format!("script[{i}]"))?;
            if let Some(sn) = sn {
                if !sn_exists(sn) {
                    return fail(format!("script[{i}] references unknown SN {sn:?}"));
                }
            }
        }
        for f in &self.faults {
            check_ue(f.target, "fault")?;
            if f.offset_from_df.is_some() == f.absolute.is_some() {
                return fail("fault needs exactly one of offset_from_df / absolute".into());
            }
        }
        for a in &self.adversaries {
            if a.t_end <= a.t_start || a.period == 0 {
                return fail(format!("adversary {:?}: empty window or zero period", a.id));
            }
            if let Some(t) = a.target {
                check_ue(t, &format!("adversary {:?}", a.id))?;
            }
        }
        if let Some(d) = &self.drill {
            if d.targets == 0 || d.targets > n {
                return fail("drill targets out of range".into());
            }
            if d.lte_attempts == 0 {
                return fail("drill needs at least one LTE attempt".into());
            }
            for (id, flavor) in [(&d.lte_sn, FlavorCfg::Lte), (&d.fiveg_sn, FlavorCfg::FiveG)] {
                match self.serving_networks.iter().find(|s| &s.id == id) {
                    None => return fail(format!("drill references unknown SN {id:?}")),
                    Some(s) if s.flavor != flavor => {
                        return fail(format!("drill SN {id:?} has the wrong flavor"))
                    }
                    _ => {}
                }
            }
        }
        if self.workload.as_ref().is_none_or(|w| w.events == 0)
            && self.script.is_empty()
            && self.drill.is_none()
        {
            return fail("scenario schedules no events (workload, script, or drill)".into());
        }
        if let Some(w) = &self.workload {
            if w.attach_weight + w.service_weight + w.page_weight + w.sweep_weight == 0 {
                return fail("workload weights sum to zero".into());
            }
            for (p, name) in [
                (w.switch_prob, "switch_prob"),
                (w.guti_reattach_prob, "guti_reattach_prob"),
                (w.page_by_identity_prob, "page_by_identity_prob"),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return fail(format!("{name} must be within [0, 1]"));
                }
            }
        }
        let mut msins = std::collections::BTreeSet::new();
        let mut pins = std::collections::BTreeSet::new();
        for (i, e) in self.subscribers.explicit.iter().enumerate() {
            if !msins.insert(e.msin) {
                return fail(format!("subscriber[{i}]: duplicate msin"));
            }
            if let Some([p1, p2]) = e.pinned {
                if p1 == p2 || !pins.insert(p1) || !pins.insert(p2) {
                    return fail(format!("subscriber[{i}]: pinned values collide"));
                }
            }
        }
        Ok(())
    }
}
