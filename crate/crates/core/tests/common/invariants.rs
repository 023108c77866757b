//! Pipeline invariants as standalone checks, shared by the property tests
//! and the acceptance suite.

use std::collections::HashMap;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use transit_hierarchy::hierarchy::{
    analyze, count_chains, count_chains_par, HierarchyConfig, PhaseCounts, UndefinedPairs,
};
use transit_hierarchy::ingest::{read_chains, ChainWriter};
use transit_hierarchy::model::{validate_chain, Leg, ModeId, TripChain};
use transit_hierarchy::synth::oracle_analyze;
use transit_hierarchy::zonal::{
    assign_zone_pair, zonal_analyze, UnknownStopPolicy, ZoneAssignment, ZoneId, ZonePartition,
};

use super::{build_corpus, corpus, registry, Corpus, RawLeg};

/// Every invariant with its name, for runners that iterate over all of them.
pub const NAMES: [&str; 11] = [
    "rates_are_complementary",
    "distances_are_antisymmetric",
    "scores_lie_in_unit_interval",
    "counts_are_scale_invariant",
    "relabeling_permutes_results",
    "reversal_swaps_phases",
    "sharding_is_deterministic",
    "zonal_pairs_match_direct_analysis",
    "walking_sits_at_the_bottom",
    "pipeline_matches_oracle",
    "ingest_round_trips",
];

pub fn config_strategy() -> impl Strategy<Value = HierarchyConfig> {
    (any::<bool>(), any::<bool>()).prop_map(|(literal, zero)| HierarchyConfig {
        ascending_sign: if literal {
            transit_hierarchy::hierarchy::SignConvention::Literal
        } else {
            transit_hierarchy::hierarchy::SignConvention::Flipped
        },
        undefined_pairs: if zero { UndefinedPairs::Zero } else { UndefinedPairs::Exclude },
    })
}

fn with_legs(chain: &TripChain, legs: Vec<Leg>) -> TripChain {
    validate_chain(chain.chain_id(), legs, &registry(8)).unwrap()
}

fn has_midpoint_tie(raw: &[RawLeg]) -> bool {
    let total: u64 = raw.iter().map(|l| u64::from(l.1)).sum();
    let mut before = 0u64;
    raw[..raw.len() - 1].iter().any(|l| {
        before += u64::from(l.1);
        2 * before == total
    })
}

pub fn rates_are_complementary_input() -> impl Strategy<Value = (Corpus,)> {
    (corpus(30),)
}

pub fn rates_are_complementary(((m, raw),): (Corpus,)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let result = analyze(count_chains(&build_corpus(&raw, &reg), &reg).unwrap(), &reg, &Default::default()).unwrap();
    let m = m as usize;
    for rates in [&result.ascending_rates, &result.descending_rates] {
        for i in 0..m {
            for j in 0..m {
                match (rates.at(i, j), rates.at(j, i)) {
                    (Some(x), Some(y)) => prop_assert!((x + y - 1.0).abs() < 1e-12),
                    (None, None) => {}
                    other => prop_assert!(false, "one-sided definition {other:?}"),
                }
            }
        }
    }
    Ok(())
}

pub fn distances_are_antisymmetric_input() -> impl Strategy<Value = (Corpus, HierarchyConfig)> {
    (corpus(30), config_strategy())
}

pub fn distances_are_antisymmetric(((m, raw), config): (Corpus, HierarchyConfig)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let result = analyze(count_chains(&build_corpus(&raw, &reg), &reg).unwrap(), &reg, &config).unwrap();
    let m = m as usize;
    for dist in [&result.ascending_distances.matrix, &result.descending_distances.matrix] {
        for i in 0..m {
            for j in 0..m {
                match (dist.at(i, j), dist.at(j, i)) {
                    (Some(x), Some(y)) => {
                        prop_assert_eq!(x, -y);
                        prop_assert!((-1.0..=1.0).contains(&x));
                    }
                    (None, None) => {}
                    other => prop_assert!(false, "one-sided definition {other:?}"),
                }
            }
        }
    }
    Ok(())
}

pub fn scores_lie_in_unit_interval_input() -> impl Strategy<Value = (Corpus, HierarchyConfig)> {
    (corpus(30), config_strategy())
}

pub fn scores_lie_in_unit_interval(((m, raw), config): (Corpus, HierarchyConfig)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let result = analyze(count_chains(&build_corpus(&raw, &reg), &reg).unwrap(), &reg, &config).unwrap();
    for s in &result.scores {
        for v in [s.ascending_score, s.descending_score, s.overall] {
            prop_assert!((0.0..=1.0).contains(&v), "{s:?}");
        }
    }
    Ok(())
}

pub fn counts_are_scale_invariant_input() -> impl Strategy<Value = (Corpus, f64)> {
    (corpus(30), prop::sample::select(vec![0.25, 0.5, 2.0, 3.0, 1000.0]))
}

pub fn counts_are_scale_invariant(((m, raw), c): (Corpus, f64)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let chains = build_corpus(&raw, &reg);
    let scaled: Vec<TripChain> = chains
        .iter()
        .map(|ch| with_legs(ch, ch.legs().iter().map(|l| Leg { distance: l.distance * c, ..l.clone() }).collect()))
        .collect();
    prop_assert_eq!(count_chains(&chains, &reg).unwrap(), count_chains(&scaled, &reg).unwrap());
    Ok(())
}

pub fn relabeling_permutes_results_input() -> impl Strategy<Value = (Corpus, u64)> {
    (corpus(30), any::<u64>())
}

pub fn relabeling_permutes_results(((m, raw), seed): (Corpus, u64)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    // Permute transit ids 2..=m; walking stays 1.
    let mut perm: Vec<u32> = (2..=m).collect();
    let mut s = seed;
    for k in (1..perm.len()).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        perm.swap(k, (s >> 33) as usize % (k + 1));
    }
    let map = |id: u32| if id == 1 { 1 } else { perm[(id - 2) as usize] };
    let relabeled: Vec<Vec<RawLeg>> =
        raw.iter().map(|c| c.iter().map(|&(mo, d, b, a)| (map(mo), d, b, a)).collect()).collect();

    let a = analyze(count_chains(&build_corpus(&raw, &reg), &reg).unwrap(), &reg, &Default::default()).unwrap();
    let b = analyze(count_chains(&build_corpus(&relabeled, &reg), &reg).unwrap(), &reg, &Default::default()).unwrap();
    for i in 1..=m {
        for j in 1..=m {
            let (pi, pj) = (ModeId(map(i)), ModeId(map(j)));
            prop_assert_eq!(a.counts.ascending(ModeId(i), ModeId(j)), b.counts.ascending(pi, pj));
            prop_assert_eq!(a.counts.descending(ModeId(i), ModeId(j)), b.counts.descending(pi, pj));
        }
        let (x, y) = (a.score(ModeId(i)), b.score(ModeId(map(i))));
        prop_assert!((x.overall - y.overall).abs() < 1e-12);
        prop_assert!((x.ascending_score - y.ascending_score).abs() < 1e-12);
        prop_assert!((x.descending_score - y.descending_score).abs() < 1e-12);
    }
    Ok(())
}

pub fn reversal_swaps_phases_input() -> impl Strategy<Value = (Corpus,)> {
    (corpus(30),)
}

pub fn reversal_swaps_phases(((m, raw),): (Corpus,)) -> Result<(), TestCaseError> {
    let raw: Vec<Vec<RawLeg>> = raw.into_iter().filter(|c| !has_midpoint_tie(c)).collect();
    let reg = registry(m);
    let reversed: Vec<Vec<RawLeg>> =
        raw.iter().map(|c| c.iter().rev().map(|&(mo, d, b, a)| (mo, d, a, b)).collect()).collect();
    let fwd = analyze(count_chains(&build_corpus(&raw, &reg), &reg).unwrap(), &reg, &Default::default()).unwrap();
    let rev = analyze(count_chains(&build_corpus(&reversed, &reg), &reg).unwrap(), &reg, &Default::default()).unwrap();
    for i in 1..=m {
        for j in 1..=m {
            prop_assert_eq!(fwd.counts.ascending(ModeId(i), ModeId(j)), rev.counts.descending(ModeId(j), ModeId(i)));
        }
        let (x, y) = (fwd.score(ModeId(i)), rev.score(ModeId(i)));
        prop_assert_eq!(x.ascending_score, y.descending_score);
        prop_assert_eq!(x.descending_score, y.ascending_score);
        prop_assert_eq!(x.overall, y.overall);
    }
    Ok(())
}

pub fn sharding_is_deterministic_input() -> impl Strategy<Value = (Corpus,)> {
    (corpus(40),)
}

pub fn sharding_is_deterministic(((m, raw),): (Corpus,)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let chains = build_corpus(&raw, &reg);
    let whole = count_chains(&chains, &reg).unwrap();
    for shards in [1usize, 4, 16] {
        let size = chains.len().div_ceil(shards).max(1);
        let mut merged = PhaseCounts::new(reg.len());
        for part in chains.chunks(size) {
            merged.merge_from(&count_chains(part, &reg).unwrap()).unwrap();
        }
        // Round-robin assignment too, merged in reverse.
        let mut strided: Vec<PhaseCounts> = (0..shards).map(|_| PhaseCounts::new(reg.len())).collect();
        for (n, chain) in chains.iter().enumerate() {
            strided[n % shards].add_chain(chain, &reg).unwrap();
        }
        let mut rr = PhaseCounts::new(reg.len());
        for part in strided.iter().rev() {
            rr.merge_from(part).unwrap();
        }
        prop_assert_eq!(&merged, &whole);
        prop_assert_eq!(&rr, &whole);
        let a = analyze(merged, &reg, &Default::default()).unwrap();
        let b = analyze(whole.clone(), &reg, &Default::default()).unwrap();
        prop_assert_eq!(a, b);
    }
    prop_assert_eq!(count_chains_par(&chains, &reg).unwrap(), whole);
    Ok(())
}

pub fn zonal_pairs_match_direct_analysis_input() -> impl Strategy<Value = (Corpus, Vec<Option<u32>>)> {
    (corpus(40), prop::collection::vec(prop::option::weighted(0.85, 1u32..=3), 6))
}

pub fn zonal_pairs_match_direct_analysis(((m, raw), zones): (Corpus, Vec<Option<u32>>)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let chains = build_corpus(&raw, &reg);
    let map: HashMap<String, ZoneId> =
        zones.iter().enumerate().filter_map(|(s, z)| z.map(|z| (format!("s{s}"), ZoneId(z)))).collect();
    let partition = ZonePartition::new(map, UnknownStopPolicy::Skip).with_zones((1..=3).map(ZoneId));
    let config = HierarchyConfig::default();
    let results = zonal_analyze(&chains, &partition, &reg, &config).unwrap();
    prop_assert_eq!(results.pairs.len(), 9);
    let mut skipped = 0;
    for chain in &chains {
        if assign_zone_pair(chain, &partition).unwrap() == ZoneAssignment::Skipped {
            skipped += 1;
        }
    }
    prop_assert_eq!(results.skipped_unknown, skipped);
    prop_assert_eq!(results.chains_assigned() + skipped, chains.len() as u64);
    for (pair, r) in &results.pairs {
        let members: Vec<&TripChain> =
            chains.iter().filter(|c| assign_zone_pair(c, &partition).unwrap() == ZoneAssignment::Pair(*pair)).collect();
        prop_assert_eq!(r.chain_count, members.len() as u64);
        let direct = analyze(count_chains(members, &reg).unwrap(), &reg, &config).unwrap();
        prop_assert_eq!(&r.result, &direct);
    }
    Ok(())
}

pub fn walking_sits_at_the_bottom_input() -> impl Strategy<Value = (Corpus,)> {
    (corpus(30),)
}

pub fn walking_sits_at_the_bottom(((m, raw),): (Corpus,)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let result = analyze(count_chains(&build_corpus(&raw, &reg), &reg).unwrap(), &reg, &Default::default()).unwrap();
    let walk = result.score(reg.walking());
    if raw.is_empty() {
        prop_assert!(!walk.is_observed());
    } else {
        prop_assert_eq!(walk.overall, 0.0);
        for s in result.scores.iter().filter(|s| s.is_observed()) {
            prop_assert!(walk.overall <= s.overall);
        }
    }
    Ok(())
}

pub fn pipeline_matches_oracle_input() -> impl Strategy<Value = (Corpus, HierarchyConfig)> {
    (corpus(100), config_strategy())
}

pub fn pipeline_matches_oracle(((m, raw), config): (Corpus, HierarchyConfig)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let chains = build_corpus(&raw, &reg);
    let streamed = analyze(count_chains(&chains, &reg).unwrap(), &reg, &config).unwrap();
    let oracle = oracle_analyze(&chains, &reg, &config).unwrap();
    prop_assert_eq!(&streamed.counts, &oracle.counts);
    for (x, y) in streamed.scores.iter().zip(&oracle.scores) {
        prop_assert!((x.overall - y.overall).abs() < 1e-12);
        prop_assert!((x.ascending_score - y.ascending_score).abs() < 1e-12);
        prop_assert!((x.descending_score - y.descending_score).abs() < 1e-12);
    }
    Ok(())
}

pub fn ingest_round_trips_input() -> impl Strategy<Value = (Corpus, Vec<String>, Vec<f64>)> {
    (corpus(20), prop::collection::vec("[a-z ,\"é]{0,6}", 6), prop::collection::vec(0.0f64..1.0, 4))
}

pub fn ingest_round_trips(((m, raw), stops, fractional): (Corpus, Vec<String>, Vec<f64>)) -> Result<(), TestCaseError> {
    let reg = registry(m);
    let chains: Vec<TripChain> = build_corpus(&raw, &reg)
        .into_iter()
        .map(|c| {
            let legs = c
                .legs()
                .iter()
                .enumerate()
                .map(|(k, l)| Leg {
                    board_stop: stops[(k * 2) % 6].clone(),
                    alight_stop: stops[(k * 2 + 1) % 6].clone(),
                    distance: l.distance + fractional[k],
                    ..l.clone()
                })
                .collect();
            validate_chain(c.chain_id(), legs, &reg).unwrap()
        })
        .collect();
    let mut w = ChainWriter::new(Vec::new()).unwrap();
    for c in &chains {
        w.write_chain(c).unwrap();
    }
    let bytes = w.finish().unwrap();
    let (back, report) = read_chains(bytes.as_slice(), &reg).unwrap();
    prop_assert_eq!(report.chains_accepted, chains.len() as u64);
    prop_assert_eq!(report.chains_rejected, 0);
    prop_assert_eq!(back, chains);
    Ok(())
}
