//! Shared scalar types.

use serde::{Deserialize, Serialize};

/// Simulated time in seconds from scenario start.
pub type SimTime = u64;

/// One simulated day — the default retirement age for idle pseudonyms.
pub const DAY: SimTime = 86_400;

/// Dense identifier for a simulated UE.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct UeId(pub u32);

impl std::fmt::Display for UeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ue-{}", self.0)
    }
}
