#![allow(dead_code)]

use proptest::collection::vec;
use proptest::prelude::*;
use transit_hierarchy::model::{validate_chain, Leg, Mode, ModeId, ModeRegistry, TripChain};

/// Walking is id 1; modes 2..=m are transit.
pub fn registry(m: u32) -> ModeRegistry {
    let modes = (1..=m)
        .map(|id| Mode {
            id: ModeId(id),
            name: if id == 1 { "walk".into() } else { format!("mode{id}") },
            is_walking: id == 1,
        })
        .collect();
    ModeRegistry::new(modes).unwrap()
}

/// (mode, distance, board stop, alight stop)
pub type RawLeg = (u32, u32, u8, u8);

pub fn build_chain(id: impl Into<String>, raw: &[RawLeg], registry: &ModeRegistry) -> TripChain {
    let legs = raw
        .iter()
        .enumerate()
        .map(|(k, &(mode, distance, b, a))| Leg {
            mode: ModeId(mode),
            board_stop: format!("s{b}"),
            alight_stop: format!("s{a}"),
            board_time: 100 * k as i64,
            alight_time: 100 * k as i64 + 50,
            distance: f64::from(distance),
        })
        .collect();
    validate_chain(id, legs, registry).unwrap()
}

pub fn build_corpus(raw: &[Vec<RawLeg>], registry: &ModeRegistry) -> Vec<TripChain> {
    raw.iter().enumerate().map(|(n, legs)| build_chain(format!("c{n}"), legs, registry)).collect()
}

pub fn raw_chain(m: u32) -> impl Strategy<Value = Vec<RawLeg>> {
    vec((2..=m, 1u32..=20_000, 0u8..6, 0u8..6), 1..=4)
}

/// Mode count and raw chains.
pub type Corpus = (u32, Vec<Vec<RawLeg>>);

/// Mode count in 2..=4 plus up to `max_chains` chains over those modes.
pub fn corpus(max_chains: usize) -> impl Strategy<Value = Corpus> {
    (2u32..=4).prop_flat_map(move |m| (Just(m), vec(raw_chain(m), 0..=max_chains)))
}
pub mod invariants;
