//! Per origin/destination zone pair hierarchy analysis.
//!
//! A chain belongs to the pair (zone of its first boarding stop, zone of its
//! last alighting stop). Each pair gets its own [`PhaseCounts`] and the
//! ordinary single-zone pipeline runs on each.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{analyze, HierarchyConfig, HierarchyError, HierarchyResult, PhaseCounts};
use crate::model::{ModeRegistry, TripChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub u32);

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Directed origin→destination zone pair, written `p->q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZonePair {
    pub origin: ZoneId,
    pub destination: ZoneId,
}

impl ZonePair {
    pub fn new(origin: u32, destination: u32) -> Self {
        ZonePair { origin: ZoneId(origin), destination: ZoneId(destination) }
    }

    pub fn is_intrazonal(&self) -> bool {
        self.origin == self.destination
    }
}

impl fmt::Display for ZonePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.origin, self.destination)
    }
}

impl FromStr for ZonePair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (p, q) = s.split_once("->").ok_or_else(|| format!("zone pair `{s}` is not of the form p->q"))?;
        let parse = |x: &str| x.trim().parse::<u32>().map_err(|_| format!("zone pair `{s}`: `{x}` is not a zone id"));
        Ok(ZonePair::new(parse(p)?, parse(q)?))
    }
}

impl Serialize for ZonePair {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ZonePair {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum UnknownStopPolicy {
    #[default]
    Skip,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZonalError {
    #[error("chain `{chain_id}`: stop `{stop}` is not in the zone map")]
    UnknownStop { chain_id: String, stop: String },
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZonePartition {
    zones: BTreeSet<ZoneId>,
    stop_to_zone: HashMap<String, ZoneId>,
    pub unknown_policy: UnknownStopPolicy,
}

impl ZonePartition {
    /// The zone set is every zone the map mentions.
    pub fn new(stop_to_zone: HashMap<String, ZoneId>, unknown_policy: UnknownStopPolicy) -> Self {
        let zones = stop_to_zone.values().copied().collect();
        ZonePartition { zones, stop_to_zone, unknown_policy }
    }

    /// Adds zones that may have no stops of their own.
    pub fn with_zones(mut self, zones: impl IntoIterator<Item = ZoneId>) -> Self {
        self.zones.extend(zones);
        self
    }

    pub fn zones(&self) -> &BTreeSet<ZoneId> {
        &self.zones
    }

    pub fn zone_of(&self, stop: &str) -> Option<ZoneId> {
        self.stop_to_zone.get(stop).copied()
    }

    /// All ordered pairs of zones, intrazonal included.
    pub fn pairs(&self) -> impl Iterator<Item = ZonePair> + '_ {
        self.zones.iter().flat_map(move |&p| self.zones.iter().map(move |&q| ZonePair { origin: p, destination: q }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneAssignment {
    Pair(ZonePair),
    Skipped,
}

/// Origin zone from the first boarding stop, destination from the last
/// alighting stop.
pub fn assign_zone_pair(chain: &TripChain, partition: &ZonePartition) -> Result<ZoneAssignment, ZonalError> {
    let lookup = |stop: &str| match partition.zone_of(stop) {
        Some(zone) => Ok(Some(zone)),
        None => match partition.unknown_policy {
            UnknownStopPolicy::Skip => Ok(None),
            UnknownStopPolicy::Error => {
                Err(ZonalError::UnknownStop { chain_id: chain.chain_id().to_string(), stop: stop.to_string() })
            }
        },
    };
    let origin = lookup(chain.first_board_stop())?;
    let destination = lookup(chain.last_alight_stop())?;
    Ok(match (origin, destination) {
        (Some(origin), Some(destination)) => ZoneAssignment::Pair(ZonePair { origin, destination }),
        _ => ZoneAssignment::Skipped,
    })
}

/// Routes chains to per-pair counts. Accumulators built over disjoint chain
/// sets can be merged.
#[derive(Debug, Clone)]
pub struct ZonalAccumulator {
    modes: usize,
    counts: BTreeMap<ZonePair, PhaseCounts>,
    skipped_unknown: u64,
}

impl ZonalAccumulator {
    pub fn new(registry: &ModeRegistry) -> Self {
        ZonalAccumulator { modes: registry.len(), counts: BTreeMap::new(), skipped_unknown: 0 }
    }

    pub fn add(
        &mut self,
        chain: &TripChain,
        partition: &ZonePartition,
        registry: &ModeRegistry,
    ) -> Result<(), ZonalError> {
        match assign_zone_pair(chain, partition)? {
            ZoneAssignment::Pair(pair) => {
                let modes = self.modes;
                self.counts.entry(pair).or_insert_with(|| PhaseCounts::new(modes)).add_chain(chain, registry)?;
            }
            ZoneAssignment::Skipped => self.skipped_unknown += 1,
        }
        Ok(())
    }

    pub fn merge_from(&mut self, other: &ZonalAccumulator) -> Result<(), ZonalError> {
        if self.modes != other.modes {
            return Err(HierarchyError::DimensionMismatch { left: self.modes, right: other.modes }.into());
        }
        for (pair, counts) in &other.counts {
            self.counts.entry(*pair).or_insert_with(|| PhaseCounts::new(other.modes)).merge_from(counts)?;
        }
        self.skipped_unknown += other.skipped_unknown;
        Ok(())
    }

    pub fn skipped_unknown(&self) -> u64 {
        self.skipped_unknown
    }

    /// Runs the hierarchy pipeline for every pair of the partition.
    pub fn finish(
        self,
        partition: &ZonePartition,
        registry: &ModeRegistry,
        config: &HierarchyConfig,
    ) -> Result<ZonalResults, ZonalError> {
        let mut counts = self.counts;
        let mut pairs = BTreeMap::new();
        for pair in partition.pairs() {
            let c = counts.remove(&pair).unwrap_or_else(|| PhaseCounts::new(self.modes));
            let chain_count = c.chains_counted();
            pairs.insert(pair, ZonePairResult { chain_count, result: analyze(c, registry, config)? });
        }
        Ok(ZonalResults { pairs, skipped_unknown: self.skipped_unknown })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePairResult {
    /// `N^pq`
    pub chain_count: u64,
    pub result: HierarchyResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalResults {
    pub pairs: BTreeMap<ZonePair, ZonePairResult>,
    pub skipped_unknown: u64,
}

impl ZonalResults {
    pub fn get(&self, pair: ZonePair) -> Option<&ZonePairResult> {
        self.pairs.get(&pair)
    }

    pub fn chains_assigned(&self) -> u64 {
        self.pairs.values().map(|r| r.chain_count).sum()
    }
}

pub fn zonal_analyze<'a>(
    chains: impl IntoIterator<Item = &'a TripChain>,
    partition: &ZonePartition,
    registry: &ModeRegistry,
    config: &HierarchyConfig,
) -> Result<ZonalResults, ZonalError> {
    let mut acc = ZonalAccumulator::new(registry);
    for chain in chains {
        acc.add(chain, partition, registry)?;
    }
    acc.finish(partition, registry, config)
}
