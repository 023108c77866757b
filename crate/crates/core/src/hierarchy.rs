//! Transfer counts, rate and distance matrices, per-mode scores, ranking.
//!
//! The pipeline is
//!
//! ```text
//! PhaseCounts ─transfer_rates→ (A, D) ─hierarchy_distances→ (A*, D*)
//!             ─phase_scores→ A_i*, D_i* ─overall_hierarchy→ H_i ─rank_modes→ Ranking
//! ```
//!
//! Counts are exact integers; everything after them is `f64`. A rate or
//! distance is `None` when the pair never exchanged a transfer in that phase.

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{for_each_transfer, ModeId, ModeRegistry, Phase, Transfer, TripChain};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HierarchyError {
    #[error("mode {mode} is outside the {modes}-mode matrix")]
    ModeOutOfRange { mode: ModeId, modes: usize },
    #[error("dimension mismatch: {left} modes vs {right} modes")]
    DimensionMismatch { left: usize, right: usize },
}

/// Sign of the ascending hierarchy distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    /// `A*_ij = A_ji - A_ij`: receiving ascending transfers marks the higher mode.
    #[default]
    Flipped,
    /// `A*_ij = A_ij - A_ji`, the formula as written.
    Literal,
}

/// How pairs with no transfers in a phase enter the per-mode average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum UndefinedPairs {
    /// Average over defined pairs only; a mode with none scores 0.5.
    #[default]
    Exclude,
    /// Count undefined pairs as zero distance and divide by `M - 1`.
    Zero,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub ascending_sign: SignConvention,
    pub undefined_pairs: UndefinedPairs,
}

/// The `a_ij` and `d_ij` transfer count matrices, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounts {
    modes: usize,
    ascending: Vec<u64>,
    descending: Vec<u64>,
    chains_counted: u64,
}

impl PhaseCounts {
    pub fn new(modes: usize) -> Self {
        PhaseCounts { modes, ascending: vec![0; modes * modes], descending: vec![0; modes * modes], chains_counted: 0 }
    }

    /// Rebuilds counts from row-major matrices, e.g. a deserialized report.
    pub fn from_matrices(
        modes: usize,
        ascending: Vec<u64>,
        descending: Vec<u64>,
        chains_counted: u64,
    ) -> Result<Self, HierarchyError> {
        for len in [ascending.len(), descending.len()] {
            if len != modes * modes {
                return Err(HierarchyError::DimensionMismatch { left: modes * modes, right: len });
            }
        }
        Ok(PhaseCounts { modes, ascending, descending, chains_counted })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn chains_counted(&self) -> u64 {
        self.chains_counted
    }

    /// `a_ij`.
    pub fn ascending(&self, from: ModeId, to: ModeId) -> u64 {
        self.ascending[from.index() * self.modes + to.index()]
    }

    /// `d_ij`.
    pub fn descending(&self, from: ModeId, to: ModeId) -> u64 {
        self.descending[from.index() * self.modes + to.index()]
    }

    pub fn phase(&self, phase: Phase) -> &[u64] {
        match phase {
            Phase::Ascending => &self.ascending,
            Phase::Descending => &self.descending,
        }
    }

    pub fn total_transfers(&self) -> u64 {
        self.ascending.iter().chain(&self.descending).sum()
    }

    #[inline]
    fn slot(&self, t: &Transfer) -> Result<usize, HierarchyError> {
        let m = self.modes;
        for mode in [t.from_mode, t.to_mode] {
            if mode.0 == 0 || mode.0 as usize > m {
                return Err(HierarchyError::ModeOutOfRange { mode, modes: m });
            }
        }
        Ok(t.from_mode.index() * m + t.to_mode.index())
    }

    /// Adds one transfer without touching `chains_counted`.
    #[inline]
    pub fn record(&mut self, t: &Transfer) -> Result<(), HierarchyError> {
        let slot = self.slot(t)?;
        match t.phase {
            Phase::Ascending => self.ascending[slot] += 1,
            Phase::Descending => self.descending[slot] += 1,
        }
        Ok(())
    }

    /// Adds the transfers of one chain and counts the chain. On error the
    /// counts are left unchanged.
    pub fn record_chain(&mut self, transfers: &[Transfer]) -> Result<(), HierarchyError> {
        for t in transfers {
            self.slot(t)?;
        }
        for t in transfers {
            self.record(t)?;
        }
        self.chains_counted += 1;
        Ok(())
    }

    /// Classifies `chain` and adds its transfers.
    pub fn add_chain(&mut self, chain: &TripChain, registry: &ModeRegistry) -> Result<(), HierarchyError> {
        if registry.len() != self.modes {
            return Err(HierarchyError::DimensionMismatch { left: self.modes, right: registry.len() });
        }
        // Validated chains only carry registry modes, so `record` cannot fail.
        for leg in chain.legs() {
            if !registry.contains(leg.mode) {
                return Err(HierarchyError::ModeOutOfRange { mode: leg.mode, modes: self.modes });
            }
        }
        let m = self.modes;
        let (asc, desc) = (&mut self.ascending, &mut self.descending);
        for_each_transfer(chain, registry.walking(), |t| {
            let slot = t.from_mode.index() * m + t.to_mode.index();
            match t.phase {
                Phase::Ascending => asc[slot] += 1,
                Phase::Descending => desc[slot] += 1,
            }
        });
        self.chains_counted += 1;
        Ok(())
    }

    /// Elementwise in-place sum.
    pub fn merge_from(&mut self, other: &PhaseCounts) -> Result<(), HierarchyError> {
        if self.modes != other.modes {
            return Err(HierarchyError::DimensionMismatch { left: self.modes, right: other.modes });
        }
        for (a, b) in self.ascending.iter_mut().zip(&other.ascending) {
            *a += b;
        }
        for (a, b) in self.descending.iter_mut().zip(&other.descending) {
            *a += b;
        }
        self.chains_counted += other.chains_counted;
        Ok(())
    }
}

/// Sums per-chain transfer lists (`a_ij = Σ_n a_ij^n`).
pub fn accumulate<I, T>(modes: usize, chains: I) -> Result<PhaseCounts, HierarchyError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[Transfer]>,
{
    let mut counts = PhaseCounts::new(modes);
    for transfers in chains {
        counts.record_chain(transfers.as_ref())?;
    }
    Ok(counts)
}

pub fn merge(left: &PhaseCounts, right: &PhaseCounts) -> Result<PhaseCounts, HierarchyError> {
    let mut out = left.clone();
    out.merge_from(right)?;
    Ok(out)
}

/// Classifies and counts `chains` on the current rayon pool. Integer sums make
/// the result independent of how the work is split.
pub fn count_chains_par(chains: &[TripChain], registry: &ModeRegistry) -> Result<PhaseCounts, HierarchyError> {
    let m = registry.len();
    chains
        .par_iter()
        .try_fold(
            || PhaseCounts::new(m),
            |mut acc, chain| {
                acc.add_chain(chain, registry)?;
                Ok(acc)
            },
        )
        .try_reduce(|| PhaseCounts::new(m), |a, b| merge(&a, &b))
}

pub fn count_chains<'a>(
    chains: impl IntoIterator<Item = &'a TripChain>,
    registry: &ModeRegistry,
) -> Result<PhaseCounts, HierarchyError> {
    let mut counts = PhaseCounts::new(registry.len());
    for chain in chains {
        counts.add_chain(chain, registry)?;
    }
    Ok(counts)
}

/// Square matrix of optional entries, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    modes: usize,
    entries: Vec<Option<f64>>,
}

impl PairMatrix {
    fn from_fn(modes: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut entries = Vec::with_capacity(modes * modes);
        for i in 0..modes {
            for j in 0..modes {
                entries.push(f(i, j));
            }
        }
        PairMatrix { modes, entries }
    }

    /// Row-major entries; `entries.len()` must be `modes * modes`.
    pub fn from_entries(modes: usize, entries: Vec<Option<f64>>) -> Result<Self, HierarchyError> {
        if entries.len() != modes * modes {
            return Err(HierarchyError::DimensionMismatch { left: modes * modes, right: entries.len() });
        }
        Ok(PairMatrix { modes, entries })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn get(&self, i: ModeId, j: ModeId) -> Option<f64> {
        self.at(i.index(), j.index())
    }

    /// Zero-based access.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i * self.modes + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<f64>]> {
        self.entries.chunks(self.modes.max(1))
    }
}

/// Transfer rate matrix `A` or `D`; entries lie in `[0, 1]`.
pub type RateMatrix = PairMatrix;

/// Hierarchy distance matrix `A*` or `D*`; antisymmetric, entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyDistanceMatrix {
    pub phase: Phase,
    pub matrix: PairMatrix,
}

fn rate_matrix(modes: usize, counts: &[u64]) -> RateMatrix {
    PairMatrix::from_fn(modes, |i, j| {
        let forward = counts[i * modes + j];
        let backward = counts[j * modes + i];
        let total = forward + backward;
        (total > 0).then(|| forward as f64 / total as f64)
    })
}

/// `A_ij = a_ij / (a_ij + a_ji)` and likewise for `D`; `None` on 0/0.
pub fn transfer_rates(counts: &PhaseCounts) -> (RateMatrix, RateMatrix) {
    (rate_matrix(counts.modes, &counts.ascending), rate_matrix(counts.modes, &counts.descending))
}

fn distance_matrix(rates: &RateMatrix, flip: bool) -> PairMatrix {
    PairMatrix::from_fn(rates.modes, |i, j| {
        let (forward, backward) = (rates.at(i, j)?, rates.at(j, i)?);
        Some(if flip { backward - forward } else { forward - backward })
    })
}

/// `D*_ij = D_ij - D_ji`; `A*` per the configured sign convention.
pub fn hierarchy_distances(
    ascending: &RateMatrix,
    descending: &RateMatrix,
    config: &HierarchyConfig,
) -> (HierarchyDistanceMatrix, HierarchyDistanceMatrix) {
    let flip = config.ascending_sign == SignConvention::Flipped;
    (
        HierarchyDistanceMatrix { phase: Phase::Ascending, matrix: distance_matrix(ascending, flip) },
        HierarchyDistanceMatrix { phase: Phase::Descending, matrix: distance_matrix(descending, false) },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScores {
    pub phase: Phase,
    /// Rescaled to `[0, 1]`, indexed by zero-based mode index.
    pub scores: Vec<f64>,
    /// Off-diagonal pairs with a defined distance, per mode.
    pub defined_pairs: Vec<usize>,
}

/// Averages each mode's row of the distance matrix over the other modes and
/// maps the result from `[-1, 1]` to `[0, 1]`.
pub fn phase_scores(distances: &HierarchyDistanceMatrix, config: &HierarchyConfig) -> PhaseScores {
    let matrix = &distances.matrix;
    let m = matrix.modes;
    let mut scores = Vec::with_capacity(m);
    let mut defined_pairs = Vec::with_capacity(m);
    for i in 0..m {
        let mut sum = 0.0;
        let mut defined = 0usize;
        for j in (0..m).filter(|&j| j != i) {
            if let Some(value) = matrix.at(i, j) {
                sum += value;
                defined += 1;
            }
        }
        let mean = match config.undefined_pairs {
            UndefinedPairs::Exclude if defined == 0 => 0.0,
            UndefinedPairs::Exclude => sum / defined as f64,
            UndefinedPairs::Zero => sum / (m - 1) as f64,
        };
        scores.push(0.5 * mean + 0.5);
        defined_pairs.push(defined);
    }
    PhaseScores { phase: distances.phase, scores, defined_pairs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeScore {
    pub mode: ModeId,
    /// `A_i*`
    pub ascending_score: f64,
    /// `D_i*`
    pub descending_score: f64,
    /// `H_i`
    pub overall: f64,
    pub defined_pairs_asc: usize,
    pub defined_pairs_desc: usize,
}

impl ModeScore {
    pub fn is_observed(&self) -> bool {
        self.defined_pairs_asc > 0 || self.defined_pairs_desc > 0
    }
}

pub type ModeScores = Vec<ModeScore>;

/// `H_i = (A_i* + D_i*) / 2`.
pub fn overall_hierarchy(ascending: &PhaseScores, descending: &PhaseScores) -> Result<ModeScores, HierarchyError> {
    if ascending.scores.len() != descending.scores.len() {
        return Err(HierarchyError::DimensionMismatch { left: ascending.scores.len(), right: descending.scores.len() });
    }
    Ok((0..ascending.scores.len())
        .map(|i| {
            let (a, d) = (ascending.scores[i], descending.scores[i]);
            ModeScore {
                mode: ModeId::from_index(i),
                ascending_score: a,
                descending_score: d,
                overall: (a + d) / 2.0,
                defined_pairs_asc: ascending.defined_pairs[i],
                defined_pairs_desc: descending.defined_pairs[i],
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub mode: ModeId,
    pub name: String,
    pub overall: f64,
    /// Shares its `H` exactly with another ranked mode.
    pub tied: bool,
}

/// Observed modes from highest to lowest `H`, plus modes with no evidence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ranked: Vec<RankEntry>,
    pub unobserved: Vec<ModeId>,
}

impl Ranking {
    /// Ranked mode ids, highest first.
    pub fn order(&self) -> Vec<ModeId> {
        self.ranked.iter().map(|e| e.mode).collect()
    }
}

/// Sorts observed modes by `H` descending; equal scores are flagged and
/// ordered by ascending id.
pub fn rank_modes(scores: &[ModeScore], registry: &ModeRegistry) -> Ranking {
    let mut ranked: Vec<RankEntry> = scores
        .iter()
        .filter(|s| s.is_observed())
        .map(|s| RankEntry { mode: s.mode, name: registry.name(s.mode).to_string(), overall: s.overall, tied: false })
        .collect();
    ranked.sort_by(|a, b| b.overall.total_cmp(&a.overall).then(a.mode.cmp(&b.mode)));
    for k in 1..ranked.len() {
        if ranked[k].overall == ranked[k - 1].overall {
            ranked[k].tied = true;
            ranked[k - 1].tied = true;
        }
    }
    let unobserved = scores.iter().filter(|s| !s.is_observed()).map(|s| s.mode).collect();
    Ranking { ranked, unobserved }
}

/// Everything derived from one set of phase counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyResult {
    pub counts: PhaseCounts,
    pub ascending_rates: RateMatrix,
    pub descending_rates: RateMatrix,
    pub ascending_distances: HierarchyDistanceMatrix,
    pub descending_distances: HierarchyDistanceMatrix,
    pub scores: ModeScores,
    pub ranking: Ranking,
}

impl HierarchyResult {
    pub fn score(&self, mode: ModeId) -> &ModeScore {
        &self.scores[mode.index()]
    }

    pub fn overall(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.overall).collect()
    }
}

/// Runs rates → distances → scores → ranking on `counts`.
pub fn analyze(
    counts: PhaseCounts,
    registry: &ModeRegistry,
    config: &HierarchyConfig,
) -> Result<HierarchyResult, HierarchyError> {
    if counts.modes != registry.len() {
        return Err(HierarchyError::DimensionMismatch { left: counts.modes, right: registry.len() });
    }
    let (ascending_rates, descending_rates) = transfer_rates(&counts);
    let (ascending_distances, descending_distances) = hierarchy_distances(&ascending_rates, &descending_rates, config);
    let asc = phase_scores(&ascending_distances, config);
    let desc = phase_scores(&descending_distances, config);
    let scores = overall_hierarchy(&asc, &desc)?;
    let ranking = rank_modes(&scores, registry);
    Ok(HierarchyResult {
        counts,
        ascending_rates,
        descending_rates,
        ascending_distances,
        descending_distances,
        scores,
        ranking,
    })
}
