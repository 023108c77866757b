//! Readers and writers for the chains CSV, the modes JSON, and the zone map.
//!
//! Chains file, one row per leg, rows of a chain contiguous:
//!
//! ```text
//! chain_id,leg_index,mode_id,board_stop_id,alight_stop_id,board_time,alight_time,distance_m
//! ```
//!
//! [`ChainStream`] is single pass. It buffers the rows of one chain, yields
//! the chain once the next chain id (or end of input) is seen, and tallies
//! every rejected chain in an [`IngestReport`] instead of failing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::{BuildHasherDefault, Hash, Hasher};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_chain, ChainError, Leg, Mode, ModeId, ModeRegistry, RegistryError, TripChain};
use crate::zonal::ZoneId;

pub const CHAINS_HEADER: [&str; 8] =
    ["chain_id", "leg_index", "mode_id", "board_stop_id", "alight_stop_id", "board_time", "alight_time", "distance_m"];

pub const ZONES_HEADER: [&str; 2] = ["stop_id", "zone_id"];

/// Errors that stop a whole input. Per-chain problems are [`Rejection`]s.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("modes file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("modes file: {0}")]
    Registry(#[from] RegistryError),
    #[error("line {line}: stop `{stop}` mapped to zone {first} and zone {second}")]
    ConflictingZone { line: u64, stop: String, first: ZoneId, second: ZoneId },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
}

/// Why a chain was dropped from the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rejection {
    MalformedRow,
    NonContiguousChain,
    GapInLegIndex,
    EmptyChain,
    WalkingLeg,
    NonMonotoneTime,
    NonPositiveDistance,
    UnknownMode,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::MalformedRow => "MalformedRow",
            Rejection::NonContiguousChain => "NonContiguousChain",
            Rejection::GapInLegIndex => "GapInLegIndex",
            Rejection::EmptyChain => "EmptyChain",
            Rejection::WalkingLeg => "WalkingLeg",
            Rejection::NonMonotoneTime => "NonMonotoneTime",
            Rejection::NonPositiveDistance => "NonPositiveDistance",
            Rejection::UnknownMode => "UnknownMode",
        }
    }
}

impl From<&ChainError> for Rejection {
    fn from(err: &ChainError) -> Self {
        match err {
            ChainError::EmptyChain => Rejection::EmptyChain,
            ChainError::WalkingLeg { .. } => Rejection::WalkingLeg,
            ChainError::NonMonotoneTime { .. } => Rejection::NonMonotoneTime,
            ChainError::NonPositiveDistance { .. } => Rejection::NonPositiveDistance,
            ChainError::UnknownMode { .. } => Rejection::UnknownMode,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub chains_accepted: u64,
    pub chains_rejected: u64,
    pub rejection_reasons: BTreeMap<String, u64>,
}

impl IngestReport {
    pub fn chains_encountered(&self) -> u64 {
        self.chains_accepted + self.chains_rejected
    }

    pub fn rejected_for(&self, reason: Rejection) -> u64 {
        self.rejection_reasons.get(reason.as_str()).copied().unwrap_or(0)
    }

    fn reject(&mut self, reason: Rejection) {
        self.chains_rejected += 1;
        *self.rejection_reasons.entry(reason.as_str().to_string()).or_default() += 1;
    }

    /// Reports from separately ingested files add up.
    pub fn merge(&mut self, other: &IngestReport) {
        self.chains_accepted += other.chains_accepted;
        self.chains_rejected += other.chains_rejected;
        for (k, v) in &other.rejection_reasons {
            *self.rejection_reasons.entry(k.clone()).or_default() += v;
        }
    }
}

/// Chain ids are remembered as 64-bit fingerprints; this hasher passes them
/// through unchanged.
#[derive(Default)]
struct Fingerprint(u64);

impl Hasher for Fingerprint {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, _: &[u8]) {
        unreachable!("only u64 keys are hashed")
    }
    fn write_u64(&mut self, n: u64) {
        self.0 = n;
    }
}

fn fingerprint(id: &[u8]) -> u64 {
    // SipHash with fixed zero keys, so fingerprints are stable across runs.
    #[allow(deprecated)]
    let mut h = std::hash::SipHasher::new();
    id.hash(&mut h);
    h.finish()
}

struct Pending {
    id: Vec<u8>,
    legs: Vec<Leg>,
    next_index: u64,
    error: Option<Rejection>,
}

/// Streaming trip-chain parser. Yields accepted chains in file order; `Err`
/// items are fatal (I/O, broken CSV framing, wrong header) and end the stream.
pub struct ChainStream<'r, R: Read> {
    reader: csv::Reader<R>,
    registry: &'r ModeRegistry,
    record: csv::ByteRecord,
    pending: Option<Pending>,
    seen: HashSet<u64, BuildHasherDefault<Fingerprint>>,
    report: IngestReport,
    header_checked: bool,
    done: bool,
}

/// Starts parsing a chains CSV. Nothing is read until the first `next`.
pub fn parse_chains<R: Read>(input: R, registry: &ModeRegistry) -> ChainStream<'_, R> {
    let reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    ChainStream {
        reader,
        registry,
        record: csv::ByteRecord::new(),
        pending: None,
        seen: HashSet::default(),
        report: IngestReport::default(),
        header_checked: false,
        done: false,
    }
}

fn parse_field<T: std::str::FromStr>(field: &[u8]) -> Option<T> {
    std::str::from_utf8(field).ok()?.parse().ok()
}

struct Row {
    leg_index: u64,
    leg: Leg,
}

fn parse_row(record: &csv::ByteRecord) -> Option<Row> {
    if record.len() != CHAINS_HEADER.len() {
        return None;
    }
    let text = |i: usize| std::str::from_utf8(&record[i]).ok().map(str::to_owned);
    Some(Row {
        leg_index: parse_field(&record[1])?,
        leg: Leg {
            mode: ModeId(parse_field(&record[2])?),
            board_stop: text(3)?,
            alight_stop: text(4)?,
            board_time: parse_field(&record[5])?,
            alight_time: parse_field(&record[6])?,
            distance: parse_field(&record[7])?,
        },
    })
}

impl<'r, R: Read> ChainStream<'r, R> {
    /// Counts so far; final once the stream has returned `None`.
    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn into_report(self) -> IngestReport {
        self.report
    }

    /// Report plus the underlying reader, e.g. to read a digest once done.
    pub fn into_parts(self) -> (IngestReport, R) {
        (self.report, self.reader.into_inner())
    }

    fn check_header(&mut self) -> Result<bool, IngestError> {
        if !self.reader.read_byte_record(&mut self.record)? {
            return Ok(false);
        }
        let found: Vec<String> = self.record.iter().map(|f| String::from_utf8_lossy(f).into_owned()).collect();
        // Tolerate a UTF-8 byte order mark on the first column.
        let first = found.first().map(|f| f.trim_start_matches('\u{feff}'));
        if first != Some(CHAINS_HEADER[0]) || found[1..] != CHAINS_HEADER[1..] {
            return Err(IngestError::BadHeader { expected: CHAINS_HEADER.join(","), found: found.join(",") });
        }
        Ok(true)
    }

    /// Closes the pending chain. Returns it if accepted.
    fn finish_pending(&mut self) -> Option<TripChain> {
        let pending = self.pending.take()?;
        if let Some(reason) = pending.error {
            self.report.reject(reason);
            return None;
        }
        let id = String::from_utf8(pending.id).expect("checked when the chain was opened");
        match validate_chain(id, pending.legs, self.registry) {
            Ok(chain) => {
                self.report.chains_accepted += 1;
                Some(chain)
            }
            Err(err) => {
                self.report.reject(Rejection::from(&err));
                None
            }
        }
    }

    fn open_chain(&mut self) {
        let id = self.record.get(0).unwrap_or_default().to_vec();
        let mut error = None;
        if std::str::from_utf8(&id).is_err() {
            error = Some(Rejection::MalformedRow);
        }
        if !self.seen.insert(fingerprint(&id)) {
            error = Some(Rejection::NonContiguousChain);
        }
        self.pending = Some(Pending { id, legs: Vec::with_capacity(4), next_index: 1, error });
    }

    fn push_row(&mut self) {
        let pending = self.pending.as_mut().expect("a chain is open");
        if pending.error.is_some() {
            return;
        }
        match parse_row(&self.record) {
            None => pending.error = Some(Rejection::MalformedRow),
            Some(row) if row.leg_index != pending.next_index => pending.error = Some(Rejection::GapInLegIndex),
            Some(row) => {
                pending.legs.push(row.leg);
                pending.next_index += 1;
            }
        }
    }

    fn advance(&mut self) -> Result<Option<TripChain>, IngestError> {
        if !self.header_checked {
            self.header_checked = true;
            if !self.check_header()? {
                return Ok(None);
            }
        }
        loop {
            if !self.reader.read_byte_record(&mut self.record)? {
                return Ok(self.finish_pending());
            }
            let same = self.pending.as_ref().is_some_and(|p| p.id.as_slice() == self.record.get(0).unwrap_or_default());
            if same {
                self.push_row();
                continue;
            }
            let finished = self.finish_pending();
            self.open_chain();
            self.push_row();
            if finished.is_some() {
                return Ok(finished);
            }
        }
    }
}

impl<R: Read> Iterator for ChainStream<'_, R> {
    type Item = Result<TripChain, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.advance().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Reads a whole chains file into memory.
pub fn read_chains<R: Read>(input: R, registry: &ModeRegistry) -> Result<(Vec<TripChain>, IngestReport), IngestError> {
    let mut stream = parse_chains(input, registry);
    let chains = stream.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((chains, stream.into_report()))
}

/// Writes chains in the format [`parse_chains`] reads.
pub struct ChainWriter<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> ChainWriter<W> {
    pub fn new(output: W) -> Result<Self, IngestError> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(output);
        writer.write_record(CHAINS_HEADER)?;
        Ok(ChainWriter { writer })
    }

    pub fn write_legs(&mut self, chain_id: &str, legs: &[Leg]) -> Result<(), IngestError> {
        use std::fmt::Write as _;
        let mut num = String::new();
        for (k, leg) in legs.iter().enumerate() {
            self.writer.write_field(chain_id)?;
            for value in [(k + 1) as i64, leg.mode.0 as i64] {
                num.clear();
                let _ = write!(num, "{value}");
                self.writer.write_field(&num)?;
            }
            self.writer.write_field(&leg.board_stop)?;
            self.writer.write_field(&leg.alight_stop)?;
            for value in [leg.board_time, leg.alight_time] {
                num.clear();
                let _ = write!(num, "{value}");
                self.writer.write_field(&num)?;
            }
            num.clear();
            let _ = write!(num, "{}", leg.distance);
            self.writer.write_field(&num)?;
            self.writer.write_record(None::<&[u8]>)?;
        }
        Ok(())
    }

    pub fn write_chain(&mut self, chain: &TripChain) -> Result<(), IngestError> {
        self.write_legs(chain.chain_id(), chain.legs())
    }

    pub fn finish(mut self) -> Result<W, IngestError> {
        self.writer.flush()?;
        self.writer.into_inner().map_err(|e| IngestError::Io(e.into_error()))
    }
}

/// Parses the modes JSON: `[{"id": 1, "name": "walking", "walking": true}, ...]`.
pub fn parse_mode_registry<R: Read>(input: R) -> Result<ModeRegistry, IngestError> {
    let modes: Vec<Mode> = serde_json::from_reader(input)?;
    Ok(ModeRegistry::new(modes)?)
}

pub fn write_mode_registry<W: Write>(registry: &ModeRegistry, output: W) -> Result<(), IngestError> {
    serde_json::to_writer_pretty(output, registry.modes())?;
    Ok(())
}

/// Parses `stop_id,zone_id` rows. Repeating a stop with the same zone is
/// allowed; with a different zone it is an error.
pub fn parse_zone_map<R: Read>(input: R) -> Result<HashMap<String, ZoneId>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut map = HashMap::new();
    let mut record = csv::StringRecord::new();
    if !reader.read_record(&mut record)? {
        return Ok(map);
    }
    let found: Vec<&str> = record.iter().collect();
    if found.first().map(|f| f.trim_start_matches('\u{feff}')) != Some(ZONES_HEADER[0])
        || found[1..] != ZONES_HEADER[1..]
    {
        return Err(IngestError::BadHeader { expected: ZONES_HEADER.join(","), found: found.join(",") });
    }
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected 2 columns, got {}", record.len()),
            });
        }
        let zone: ZoneId = record[1].parse().map(ZoneId).map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("zone id `{}` is not an integer", &record[1]),
        })?;
        let stop = &record[0];
        match map.get(stop) {
            Some(&first) if first != zone => {
                return Err(IngestError::ConflictingZone { line, stop: stop.to_string(), first, second: zone });
            }
            Some(_) => {}
            None => {
                map.insert(stop.to_string(), zone);
            }
        }
    }
    Ok(map)
}

pub fn write_zone_map<W: Write>(map: &BTreeMap<String, ZoneId>, output: W) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(ZONES_HEADER)?;
    for (stop, zone) in map {
        writer.write_record([stop.as_str(), &zone.0.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
