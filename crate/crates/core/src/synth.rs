//! Synthetic corpora with a planted mode hierarchy, and a brute-force oracle.
//!
//! Every chain follows a low→high→low template: a peak leg near the middle,
//! strictly rising planted levels before it and strictly falling levels after
//! it. Each adjacency independently has its direction flipped with
//! probability `noise`; the levels are then drawn uniformly among all
//! sequences matching the resulting up/down pattern. Higher levels get longer
//! legs on average. Chain `i` depends only on `(seed, i)`.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{
    HierarchyConfig, HierarchyDistanceMatrix, HierarchyError, HierarchyResult, ModeScore, PairMatrix, PhaseCounts,
    RankEntry, Ranking, SignConvention, UndefinedPairs,
};
use crate::model::{validate_chain, Leg, ModeId, ModeRegistry, Phase, TripChain};
use crate::zonal::ZoneId;

/// Leg counts 1..=4 drawn with these weights unless overridden.
pub const DEFAULT_LENGTH_WEIGHTS: [f64; 4] = [0.3, 0.35, 0.25, 0.1];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid synth spec: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSetup {
    pub zones: u32,
    pub stops_per_zone: u32,
    /// Probability that a chain ends in a different zone than it starts.
    pub interzonal_fraction: f64,
    /// Modes that only ever appear in interzonal chains.
    #[serde(default)]
    pub interzonal_only: Vec<ModeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub registry: ModeRegistry,
    /// Non-walking modes from lowest to highest. Modes left out never occur.
    pub planted_order: Vec<ModeId>,
    /// Weights for chains of 1, 2, 3 and 4 legs.
    pub chain_length_weights: [f64; 4],
    /// Per-adjacency probability of reversing the planted direction, `[0, 0.5)`.
    pub noise: f64,
    /// Meters.
    pub mean_leg_distance: f64,
    pub zone_setup: Option<ZoneSetup>,
    pub seed: u64,
}

impl SynthSpec {
    /// Six Seoul modes; community bus < urban bus < light rail < metro <
    /// intercity bus above walking.
    pub fn seoul(seed: u64) -> Self {
        SynthSpec {
            registry: crate::model::seoul_registry(),
            planted_order: [2, 3, 5, 6, 4].into_iter().map(ModeId).collect(),
            chain_length_weights: DEFAULT_LENGTH_WEIGHTS,
            noise: 0.1,
            mean_leg_distance: 4000.0,
            zone_setup: None,
            seed,
        }
    }

    fn max_leg_count(&self) -> usize {
        self.chain_length_weights.iter().rposition(|&w| w > 0.0).map_or(0, |i| i + 1)
    }

    pub fn validate(&self) -> Result<(), InvalidSpec> {
        let bad = |msg: String| Err(InvalidSpec(msg));
        let w = &self.chain_length_weights;
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("chain length weights {w:?} must be non-negative and sum to 1"));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return bad(format!("noise {} must lie in [0, 0.5)", self.noise));
        }
        if !(self.mean_leg_distance > 0.0 && self.mean_leg_distance.is_finite()) {
            return bad(format!("mean leg distance {} must be positive", self.mean_leg_distance));
        }
        if self.planted_order.is_empty() {
            return bad("planted order is empty".into());
        }
        for (k, mode) in self.planted_order.iter().enumerate() {
            if !self.registry.contains(*mode) || *mode == self.registry.walking() {
                return bad(format!("planted order entry {mode} is not a non-walking mode"));
            }
            if self.planted_order[..k].contains(mode) {
                return bad(format!("planted order repeats mode {mode}"));
            }
        }
        let longest = self.max_leg_count();
        let mut intrazonal_levels = self.planted_order.len();
        if let Some(z) = &self.zone_setup {
            if z.zones == 0 || z.stops_per_zone == 0 {
                return bad("zone setup needs at least one zone and one stop per zone".into());
            }
            if !(0.0..=1.0).contains(&z.interzonal_fraction) {
                return bad(format!("interzonal fraction {} must lie in [0, 1]", z.interzonal_fraction));
            }
            if z.interzonal_fraction > 0.0 && z.zones < 2 {
                return bad("interzonal chains need at least two zones".into());
            }
            if let Some(m) = z.interzonal_only.iter().find(|m| !self.planted_order.contains(m)) {
                return bad(format!("interzonal-only mode {m} is not in the planted order"));
            }
            intrazonal_levels -= z.interzonal_only.len();
        }
        // A strictly monotone run of k legs needs k distinct levels.
        let levels = intrazonal_levels.min(self.planted_order.len());
        if levels < longest {
            return bad(format!("{levels} available modes cannot form strictly ordered chains of {longest} legs"));
        }
        Ok(())
    }
}

fn chain_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Uniformly samples levels in `0..levels` with `rises[t]` deciding whether
/// step `t` goes strictly up or strictly down.
fn sample_levels(rng: &mut ChaCha8Rng, rises: &[bool], levels: usize) -> Vec<usize> {
    let len = rises.len() + 1;
    // ways[t][v]: valid prefixes of length t+1 ending at level v.
    let mut ways = vec![vec![1u64; levels]; len];
    for t in 1..len {
        for v in 0..levels {
            ways[t][v] = if rises[t - 1] { ways[t - 1][..v].iter().sum() } else { ways[t - 1][v + 1..].iter().sum() };
        }
    }
    let mut out = vec![0; len];
    let weights: Vec<f64> = ways[len - 1].iter().map(|&w| w as f64).collect();
    out[len - 1] = pick_weighted(rng, &weights);
    for t in (0..len - 1).rev() {
        let next = out[t + 1];
        let weights: Vec<f64> = (0..levels)
            .map(|u| {
                let fits = if rises[t] { u < next } else { u > next };
                if fits {
                    ways[t][u] as f64
                } else {
                    0.0
                }
            })
            .collect();
        out[t] = pick_weighted(rng, &weights);
    }
    out
}

/// Chain number `index` of the corpus described by `spec`.
pub fn chain_at(spec: &SynthSpec, index: u64) -> TripChain {
    let mut rng = chain_rng(spec.seed, index);

    let (origin, destination, interzonal) = match &spec.zone_setup {
        Some(z) => {
            let origin = rng.gen_range(0..z.zones);
            let interzonal = z.zones > 1 && rng.gen_bool(z.interzonal_fraction);
            let destination = if interzonal { (origin + rng.gen_range(1..z.zones)) % z.zones } else { origin };
            (origin + 1, destination + 1, interzonal)
        }
        None => (0, 0, false),
    };
    let available: Vec<ModeId> = match &spec.zone_setup {
        Some(z) if !interzonal => {
            spec.planted_order.iter().copied().filter(|m| !z.interzonal_only.contains(m)).collect()
        }
        _ => spec.planted_order.clone(),
    };
    let levels = available.len();

    let legs = 1 + pick_weighted(&mut rng, &spec.chain_length_weights);
    // Peak at the middle leg; for even counts either middle leg equally.
    let peak = if legs % 2 == 1 { legs / 2 } else { legs / 2 - rng.gen_range(0..2usize) };
    let rises: Vec<bool> = (0..legs - 1)
        .map(|t| {
            let planted = t < peak;
            planted != (spec.noise > 0.0 && rng.gen_bool(spec.noise))
        })
        .collect();
    let chosen = sample_levels(&mut rng, &rises, levels);

    let stop = |zone: u32, rng: &mut ChaCha8Rng| match &spec.zone_setup {
        Some(z) => format!("z{zone}-{}", rng.gen_range(0..z.stops_per_zone)),
        None => format!("s{}", rng.gen_range(0..1000u32)),
    };
    let mut time: i64 = rng.gen_range(5 * 3600..22 * 3600);
    let mut board = stop(origin, &mut rng);
    let mut out = Vec::with_capacity(legs);
    for (k, &level) in chosen.iter().enumerate() {
        let scale = if levels > 1 { 0.5 + level as f64 / (levels - 1) as f64 } else { 1.0 };
        let distance = (spec.mean_leg_distance * scale * rng.gen_range(0.5..1.5)).round().max(1.0);
        let alight = if k + 1 == legs {
            stop(destination, &mut rng)
        } else {
            stop(if 2 * (k + 1) < legs { origin } else { destination }, &mut rng)
        };
        let duration = (distance / 6.0).ceil() as i64;
        out.push(Leg {
            mode: available[level],
            board_stop: std::mem::replace(&mut board, alight.clone()),
            alight_stop: alight,
            board_time: time,
            alight_time: time + duration,
            distance,
        });
        time += duration + rng.gen_range(60..600);
    }
    validate_chain(format!("c{index}"), out, &spec.registry).expect("generated chains are valid")
}

/// Lazily generates chains `0..n`.
pub fn generate(spec: &SynthSpec, n: u64) -> Result<impl Iterator<Item = TripChain> + '_, InvalidSpec> {
    spec.validate()?;
    Ok((0..n).map(move |i| chain_at(spec, i)))
}

/// Stop → zone for every stop a zoned spec can emit.
pub fn zone_map(spec: &SynthSpec) -> BTreeMap<String, ZoneId> {
    let mut map = BTreeMap::new();
    if let Some(z) = &spec.zone_setup {
        for zone in 1..=z.zones {
            for s in 0..z.stops_per_zone {
                map.insert(format!("z{zone}-{s}"), ZoneId(zone));
            }
        }
    }
    map
}

/// Expected ranking, highest first: the planted order reversed, then walking.
pub fn planted_ranking(spec: &SynthSpec) -> Vec<ModeId> {
    let mut order: Vec<ModeId> = spec.planted_order.iter().rev().copied().collect();
    order.push(spec.registry.walking());
    order
}

/// Fraction of planted mode pairs that `ranking` orders correctly. Modes
/// missing from the ranking count as wrong for every pair they are in.
pub fn recovery_accuracy(ranking: &Ranking, planted: &[ModeId]) -> f64 {
    let position: HashMap<ModeId, usize> = ranking.order().into_iter().enumerate().map(|(k, m)| (m, k)).collect();
    let mut correct = 0usize;
    let mut total = 0usize;
    for (a, hi) in planted.iter().enumerate() {
        for lo in &planted[a + 1..] {
            total += 1;
            if let (Some(p), Some(q)) = (position.get(hi), position.get(lo)) {
                correct += usize::from(p < q);
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    }
}

/// Recomputes every hierarchy quantity by direct enumeration over an
/// in-memory corpus, sharing no computation with the streaming pipeline.
/// Intended for small corpora used as ground truth.
pub fn oracle_analyze(
    chains: &[TripChain],
    registry: &ModeRegistry,
    config: &HierarchyConfig,
) -> Result<HierarchyResult, HierarchyError> {
    let m = registry.len();
    let walk = registry.walking().0;

    // Every transfer of every chain, tallied by (phase, from, to).
    let mut tally: HashMap<(Phase, u32, u32), u64> = HashMap::new();
    for chain in chains {
        let legs = chain.legs();
        let total: f64 = legs.iter().map(|l| l.distance).sum();
        let mut sequence = vec![walk];
        sequence.extend(legs.iter().map(|l| l.mode.0));
        sequence.push(walk);
        for t in 0..sequence.len() - 1 {
            let position: f64 = legs[..t].iter().map(|l| l.distance).sum();
            let phase = if position < total / 2.0 { Phase::Ascending } else { Phase::Descending };
            let (from, to) = (sequence[t], sequence[t + 1]);
            if from == 0 || to == 0 || from as usize > m || to as usize > m {
                return Err(HierarchyError::ModeOutOfRange { mode: ModeId(from.max(to)), modes: m });
            }
            *tally.entry((phase, from, to)).or_default() += 1;
        }
    }
    let count =
        |phase: Phase, i: usize, j: usize| tally.get(&(phase, i as u32 + 1, j as u32 + 1)).copied().unwrap_or(0);

    let mut asc_counts = Vec::new();
    let mut desc_counts = Vec::new();
    let mut rates = [Vec::new(), Vec::new()];
    for i in 0..m {
        for j in 0..m {
            asc_counts.push(count(Phase::Ascending, i, j));
            desc_counts.push(count(Phase::Descending, i, j));
            for (slot, phase) in [Phase::Ascending, Phase::Descending].into_iter().enumerate() {
                let (x, y) = (count(phase, i, j), count(phase, j, i));
                rates[slot].push(if x + y == 0 { None } else { Some(x as f64 / (x + y) as f64) });
            }
        }
    }
    let rate = |slot: usize, i: usize, j: usize| rates[slot][i * m + j];

    let mut distances = [Vec::new(), Vec::new()];
    for i in 0..m {
        for j in 0..m {
            for (slot, out) in distances.iter_mut().enumerate() {
                let value = match (rate(slot, i, j), rate(slot, j, i)) {
                    (Some(ij), Some(ji)) => {
                        let literal = ij - ji;
                        let flip = slot == 0 && config.ascending_sign == SignConvention::Flipped;
                        Some(if flip { ji - ij } else { literal })
                    }
                    _ => None,
                };
                out.push(value);
            }
        }
    }

    let mut scores = Vec::new();
    for i in 0..m {
        let mut phase_score = [0.0; 2];
        let mut defined = [0usize; 2];
        for slot in 0..2 {
            let row: Vec<f64> = (0..m).filter(|&j| j != i).filter_map(|j| distances[slot][i * m + j]).collect();
            defined[slot] = row.len();
            let mean = match config.undefined_pairs {
                UndefinedPairs::Zero => row.iter().sum::<f64>() / (m - 1) as f64,
                UndefinedPairs::Exclude if row.is_empty() => 0.0,
                UndefinedPairs::Exclude => row.iter().sum::<f64>() / row.len() as f64,
            };
            phase_score[slot] = (mean + 1.0) / 2.0;
        }
        scores.push(ModeScore {
            mode: ModeId(i as u32 + 1),
            ascending_score: phase_score[0],
            descending_score: phase_score[1],
            overall: (phase_score[0] + phase_score[1]) / 2.0,
            defined_pairs_asc: defined[0],
            defined_pairs_desc: defined[1],
        });
    }

    let mut ranked: Vec<RankEntry> = Vec::new();
    let mut unobserved = Vec::new();
    for s in &scores {
        if s.defined_pairs_asc == 0 && s.defined_pairs_desc == 0 {
            unobserved.push(s.mode);
        } else {
            let tied = scores.iter().any(|o| {
                o.mode != s.mode && (o.defined_pairs_asc > 0 || o.defined_pairs_desc > 0) && o.overall == s.overall
            });
            ranked.push(RankEntry { mode: s.mode, name: registry.name(s.mode).to_string(), overall: s.overall, tied });
        }
    }
    ranked.sort_by(|a, b| b.overall.partial_cmp(&a.overall).expect("scores are finite").then(a.mode.cmp(&b.mode)));

    let [asc_rates, desc_rates] = rates;
    let [asc_dist, desc_dist] = distances;
    Ok(HierarchyResult {
        counts: PhaseCounts::from_matrices(m, asc_counts, desc_counts, chains.len() as u64)?,
        ascending_rates: PairMatrix::from_entries(m, asc_rates)?,
        descending_rates: PairMatrix::from_entries(m, desc_rates)?,
        ascending_distances: HierarchyDistanceMatrix {
            phase: Phase::Ascending,
            matrix: PairMatrix::from_entries(m, asc_dist)?,
        },
        descending_distances: HierarchyDistanceMatrix {
            phase: Phase::Descending,
            matrix: PairMatrix::from_entries(m, desc_dist)?,
        },
        scores,
        ranking: Ranking { ranked, unobserved },
    })
}
