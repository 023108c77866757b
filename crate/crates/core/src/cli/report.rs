//! JSON result documents.
//!
//! Matrices are dense row-major arrays of arrays indexed by `mode_id - 1`;
//! `null` marks a pair with no transfers in that phase. Every document carries
//! a [`Manifest`]; its `created_unix` field is the only non-deterministic
//! value and is ignored when comparing documents.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hierarchy::{HierarchyResult, PairMatrix, SignConvention, UndefinedPairs};
use crate::ingest::IngestReport;
use crate::model::{ModeId, ModeRegistry};
use crate::zonal::UnknownStopPolicy;

/// Published JSON Schema for every document kind.
pub const DOCUMENT_SCHEMA: &str = include_str!("../../schema/result.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub ascending_sign: SignConvention,
    pub undefined_pairs: UndefinedPairs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknown_stops: Option<UnknownStopPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_chains: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool: String,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; excluded from determinism checks.
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(command: &str, inputs: Vec<InputDigest>, config: RunConfig) -> Self {
        Manifest {
            command: command.to_string(),
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            config,
            seed: None,
            created_unix: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }
}

/// Reader adapter that hashes everything read through it.
pub struct DigestReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> DigestReader<R> {
    pub fn new(inner: R) -> Self {
        DigestReader { inner, hasher: Sha256::new() }
    }

    /// Hex digest of the bytes read so far.
    pub fn hex_digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}

impl<R: Read> Read for DigestReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub mode_id: ModeId,
    pub mode_name: String,
    pub ascending_score: f64,
    pub descending_score: f64,
    pub overall: f64,
    pub defined_pairs_asc: usize,
    pub defined_pairs_desc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub rank: usize,
    pub mode_id: ModeId,
    pub mode_name: String,
    pub overall: f64,
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRef {
    pub mode_id: ModeId,
    pub mode_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingDoc {
    pub ranked: Vec<RankedRow>,
    pub unobserved: Vec<ModeRef>,
}

/// One hierarchy analysis: counts `a`, `d`; rates `A`, `D`; distances `A*`,
/// `D*`; per-mode scores and the ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBody {
    pub chains_counted: u64,
    pub ascending_counts: Vec<Vec<u64>>,
    pub descending_counts: Vec<Vec<u64>>,
    pub ascending_rates: Vec<Vec<Option<f64>>>,
    pub descending_rates: Vec<Vec<Option<f64>>>,
    pub ascending_distances: Vec<Vec<Option<f64>>>,
    pub descending_distances: Vec<Vec<Option<f64>>>,
    pub scores: Vec<ScoreRow>,
    pub ranking: RankingDoc,
}

fn dense(matrix: &PairMatrix) -> Vec<Vec<Option<f64>>> {
    matrix.rows().map(<[Option<f64>]>::to_vec).collect()
}

fn dense_counts(counts: &[u64], m: usize) -> Vec<Vec<u64>> {
    counts.chunks(m.max(1)).map(<[u64]>::to_vec).collect()
}

impl ResultBody {
    pub fn new(result: &HierarchyResult, registry: &ModeRegistry) -> Self {
        use crate::model::Phase;
        let m = result.counts.modes();
        let name = |id: ModeId| registry.name(id).to_string();
        ResultBody {
            chains_counted: result.counts.chains_counted(),
            ascending_counts: dense_counts(result.counts.phase(Phase::Ascending), m),
            descending_counts: dense_counts(result.counts.phase(Phase::Descending), m),
            ascending_rates: dense(&result.ascending_rates),
            descending_rates: dense(&result.descending_rates),
            ascending_distances: dense(&result.ascending_distances.matrix),
            descending_distances: dense(&result.descending_distances.matrix),
            scores: result
                .scores
                .iter()
                .map(|s| ScoreRow {
                    mode_id: s.mode,
                    mode_name: name(s.mode),
                    ascending_score: s.ascending_score,
                    descending_score: s.descending_score,
                    overall: s.overall,
                    defined_pairs_asc: s.defined_pairs_asc,
                    defined_pairs_desc: s.defined_pairs_desc,
                })
                .collect(),
            ranking: RankingDoc {
                ranked: result
                    .ranking
                    .ranked
                    .iter()
                    .enumerate()
                    .map(|(k, e)| RankedRow {
                        rank: k + 1,
                        mode_id: e.mode,
                        mode_name: e.name.clone(),
                        overall: e.overall,
                        tied: e.tied,
                    })
                    .collect(),
                unobserved: result
                    .ranking
                    .unobserved
                    .iter()
                    .map(|&id| ModeRef { mode_id: id, mode_name: name(id) })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeDocument {
    pub manifest: Manifest,
    pub modes: ModeRegistry,
    pub ingest: IngestReport,
    pub result: ResultBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDoc {
    pub chain_count: u64,
    /// `chain_count` is below the run's `min_chains`.
    pub low_support: bool,
    pub result: ResultBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalDocument {
    pub manifest: Manifest,
    pub modes: ModeRegistry,
    pub ingest: IngestReport,
    pub zones: Vec<u32>,
    pub min_chains: u64,
    pub skipped_unknown: u64,
    pub chains_assigned: u64,
    /// All accepted chains regardless of zone.
    pub global: ResultBody,
    /// Keyed `"p->q"`.
    pub pairs: BTreeMap<String, PairDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateDocument {
    pub manifest: Manifest,
    pub ingest: IngestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Document {
    Analyze(AnalyzeDocument),
    Zonal(ZonalDocument),
    Validate(ValidateDocument),
}

impl Document {
    pub fn manifest(&self) -> &Manifest {
        match self {
            Document::Analyze(d) => &d.manifest,
            Document::Zonal(d) => &d.manifest,
            Document::Validate(d) => &d.manifest,
        }
    }

    pub fn manifest_mut(&mut self) -> &mut Manifest {
        match self {
            Document::Analyze(d) => &mut d.manifest,
            Document::Zonal(d) => &mut d.manifest,
            Document::Validate(d) => &mut d.manifest,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialize");
        s.push('\n');
        s
    }
}
