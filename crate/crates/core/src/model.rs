//! Domain types and the ascending/descending transfer classification.
//!
//! A [`TripChain`] holds only the recorded in-vehicle legs of a journey.
//! Walking is implicit: every chain starts with a walk→first-mode transfer
//! and ends with a last-mode→walk transfer. Transfers between consecutive
//! legs collapse any intermediate walk into a single mode→mode transfer.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One-based mode identifier, contiguous within a [`ModeRegistry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeId(pub u32);

impl ModeId {
    /// Zero-based matrix index of this mode.
    #[inline]
    pub fn index(self) -> usize {
        (self.0 as usize).wrapping_sub(1)
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        ModeId(index as u32 + 1)
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub id: ModeId,
    pub name: String,
    #[serde(rename = "walking")]
    pub is_walking: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("mode id {0} appears more than once")]
    DuplicateId(ModeId),
    #[error("mode ids must be exactly 1..={expected_max}; found {found:?}")]
    NonContiguousIds { expected_max: u32, found: Vec<u32> },
    #[error("no mode is marked as walking")]
    NoWalkingMode,
    #[error("more than one walking mode: {0:?}")]
    MultipleWalkingModes(Vec<ModeId>),
    #[error("a registry needs at least two modes, got {0}")]
    TooFewModes(usize),
}

impl RegistryError {
    pub fn kind(&self) -> &'static str {
        match self {
            RegistryError::DuplicateId(_) => "DuplicateId",
            RegistryError::NonContiguousIds { .. } => "NonContiguousIds",
            RegistryError::NoWalkingMode => "NoWalkingMode",
            RegistryError::MultipleWalkingModes(_) => "MultipleWalkingModes",
            RegistryError::TooFewModes(_) => "TooFewModes",
        }
    }
}

/// The ordered mode set `1..=M` with exactly one walking mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeRegistry {
    modes: Vec<Mode>,
    walking: ModeId,
}

impl ModeRegistry {
    /// Validates and sorts `modes` by id.
    pub fn new(mut modes: Vec<Mode>) -> Result<Self, RegistryError> {
        modes.sort_by_key(|m| m.id);
        for pair in modes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(RegistryError::DuplicateId(pair[0].id));
            }
        }
        if modes.len() < 2 {
            return Err(RegistryError::TooFewModes(modes.len()));
        }
        if modes.iter().enumerate().any(|(i, m)| m.id.0 as usize != i + 1) {
            return Err(RegistryError::NonContiguousIds {
                expected_max: modes.len() as u32,
                found: modes.iter().map(|m| m.id.0).collect(),
            });
        }
        let walking: Vec<ModeId> = modes.iter().filter(|m| m.is_walking).map(|m| m.id).collect();
        let walking = match walking.as_slice() {
            [] => return Err(RegistryError::NoWalkingMode),
            [only] => *only,
            _ => return Err(RegistryError::MultipleWalkingModes(walking)),
        };
        Ok(ModeRegistry { modes, walking })
    }

    /// Number of modes, `M`.
    #[inline]
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    /// Always false; a valid registry has at least two modes.
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    #[inline]
    pub fn walking(&self) -> ModeId {
        self.walking
    }

    #[inline]
    pub fn contains(&self, id: ModeId) -> bool {
        id.0 >= 1 && id.0 as usize <= self.modes.len()
    }

    pub fn get(&self, id: ModeId) -> Option<&Mode> {
        if self.contains(id) {
            Some(&self.modes[id.index()])
        } else {
            None
        }
    }

    pub fn name(&self, id: ModeId) -> &str {
        self.get(id).map_or("?", |m| m.name.as_str())
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn ids(&self) -> impl Iterator<Item = ModeId> + '_ {
        self.modes.iter().map(|m| m.id)
    }
}

impl Serialize for ModeRegistry {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.modes.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ModeRegistry {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let modes = Vec::<Mode>::deserialize(deserializer)?;
        ModeRegistry::new(modes).map_err(serde::de::Error::custom)
    }
}

/// One recorded in-vehicle segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub mode: ModeId,
    pub board_stop: String,
    pub alight_stop: String,
    /// Seconds since service start.
    pub board_time: i64,
    pub alight_time: i64,
    /// Meters.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("chain has no legs")]
    EmptyChain,
    #[error("leg {leg} uses the walking mode; walking is implicit at chain boundaries")]
    WalkingLeg { leg: usize },
    #[error("leg {leg} starts or ends before the preceding event")]
    NonMonotoneTime { leg: usize },
    #[error("leg {leg} has a non-positive or non-finite distance")]
    NonPositiveDistance { leg: usize },
    #[error("leg {leg} uses unknown mode {mode}")]
    UnknownMode { leg: usize, mode: ModeId },
}

impl ChainError {
    pub fn kind(&self) -> &'static str {
        match self {
            ChainError::EmptyChain => "EmptyChain",
            ChainError::WalkingLeg { .. } => "WalkingLeg",
            ChainError::NonMonotoneTime { .. } => "NonMonotoneTime",
            ChainError::NonPositiveDistance { .. } => "NonPositiveDistance",
            ChainError::UnknownMode { .. } => "UnknownMode",
        }
    }
}

/// A validated passenger journey. Construct with [`validate_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct TripChain {
    chain_id: String,
    legs: Vec<Leg>,
    total_distance: f64,
}

impl TripChain {
    pub fn chain_id(&self) -> &str {
        &self.chain_id
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    /// `L^n`, the summed recorded leg distance.
    pub fn total_distance(&self) -> f64 {
        self.total_distance
    }

    pub fn into_legs(self) -> Vec<Leg> {
        self.legs
    }

    pub fn first_board_stop(&self) -> &str {
        &self.legs[0].board_stop
    }

    pub fn last_alight_stop(&self) -> &str {
        &self.legs[self.legs.len() - 1].alight_stop
    }
}

/// Checks every chain invariant and computes the total distance.
pub fn validate_chain(
    chain_id: impl Into<String>,
    legs: Vec<Leg>,
    registry: &ModeRegistry,
) -> Result<TripChain, ChainError> {
    if legs.is_empty() {
        return Err(ChainError::EmptyChain);
    }
    let mut previous_alight = i64::MIN;
    for (k, leg) in legs.iter().enumerate() {
        let leg_no = k + 1;
        if !registry.contains(leg.mode) {
            return Err(ChainError::UnknownMode { leg: leg_no, mode: leg.mode });
        }
        if leg.mode == registry.walking() {
            return Err(ChainError::WalkingLeg { leg: leg_no });
        }
        if leg.board_time < previous_alight || leg.alight_time < leg.board_time {
            return Err(ChainError::NonMonotoneTime { leg: leg_no });
        }
        // `!(d > 0)` also rejects NaN.
        if leg.distance.is_nan() || leg.distance <= 0.0 || leg.distance.is_infinite() {
            return Err(ChainError::NonPositiveDistance { leg: leg_no });
        }
        previous_alight = leg.alight_time;
    }
    let total_distance = legs.iter().map(|l| l.distance).sum();
    Ok(TripChain { chain_id: chain_id.into(), legs, total_distance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub from_mode: ModeId,
    pub to_mode: ModeId,
    /// Cumulative recorded distance at the transfer point, in meters.
    pub position: f64,
    pub phase: Phase,
}

/// Calls `visit` once per transfer of `chain`, in chain order, without
/// allocating. See [`classify_transfers`] for the rule.
///
/// The phase test compares the distance travelled before the transfer
/// (summed from the first leg) against the distance remaining after it
/// (summed from the last leg): `Ascending` iff before < after. This is
/// `position < L/2` in exact arithmetic, and because both sides are summed
/// outward from their own chain end, reversing a chain swaps the two
/// operands bit for bit.
pub fn for_each_transfer(chain: &TripChain, walking: ModeId, mut visit: impl FnMut(Transfer)) {
    let legs = &chain.legs;
    let total = chain.total_distance;
    visit(Transfer { from_mode: walking, to_mode: legs[0].mode, position: 0.0, phase: Phase::Ascending });

    let internal = legs.len() - 1;
    if internal > 0 {
        // after[k] = distance of legs k+1.. (zero-based), summed from the end.
        let mut after = [0.0f64; 16];
        let mut after_heap;
        let after: &mut [f64] = if internal <= after.len() {
            &mut after[..internal]
        } else {
            after_heap = vec![0.0; internal];
            &mut after_heap
        };
        let mut acc = 0.0;
        for k in (0..internal).rev() {
            acc += legs[k + 1].distance;
            after[k] = acc;
        }
        let mut before = 0.0;
        for k in 0..internal {
            before += legs[k].distance;
            let phase = if before < after[k] { Phase::Ascending } else { Phase::Descending };
            visit(Transfer { from_mode: legs[k].mode, to_mode: legs[k + 1].mode, position: before, phase });
        }
    }

    visit(Transfer { from_mode: legs[internal].mode, to_mode: walking, position: total, phase: Phase::Descending });
}

/// Splits a chain into phase-labelled transfers: walk→first at 0
/// (ascending), one transfer per consecutive leg pair, and last→walk at
/// `L` (descending). Returns `legs + 1` transfers.
pub fn classify_transfers(chain: &TripChain, registry: &ModeRegistry) -> Vec<Transfer> {
    let mut out = Vec::with_capacity(chain.legs.len() + 1);
    for_each_transfer(chain, registry.walking(), |t| out.push(t));
    out
}

/// The six-mode set of the Seoul metropolitan case study.
pub fn seoul_registry() -> ModeRegistry {
    let names = ["walking", "community bus", "urban bus", "intercity bus", "light rail", "metro"];
    let modes = names
        .iter()
        .enumerate()
        .map(|(i, name)| Mode { id: ModeId::from_index(i), name: (*name).to_string(), is_walking: i == 0 })
        .collect();
    ModeRegistry::new(modes).expect("static registry is valid")
}
