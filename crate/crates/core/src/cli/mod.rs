//! Command-line front end: `analyze`, `zonal`, `synth`, `plot-data`, `validate`.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 internal invariant
//! violation.

pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hierarchy::{analyze, HierarchyConfig, HierarchyError, PhaseCounts, SignConvention, UndefinedPairs};
use crate::ingest::{
    parse_chains, parse_mode_registry, parse_zone_map, write_mode_registry, write_zone_map, ChainWriter, IngestError,
    IngestReport,
};
use crate::model::{ModeId, ModeRegistry, TripChain};
use crate::synth::{chain_at, zone_map, SynthSpec, ZoneSetup, DEFAULT_LENGTH_WEIGHTS};
use crate::zonal::{UnknownStopPolicy, ZonalAccumulator, ZonalError, ZonePartition};
use report::{
    sha256_hex, AnalyzeDocument, DigestReader, Document, InputDigest, Manifest, PairDoc, ResultBody, RunConfig,
    ValidateDocument, ZonalDocument,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn input(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

impl From<HierarchyError> for CliError {
    fn from(err: HierarchyError) -> Self {
        CliError::Internal(err.to_string())
    }
}

impl From<ZonalError> for CliError {
    fn from(err: ZonalError) -> Self {
        match err {
            ZonalError::UnknownStop { .. } => CliError::Input(err.to_string()),
            ZonalError::Hierarchy(e) => e.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "transit-hierarchy", version, about = "Multimodal transit hierarchy from trip-chain data")]
pub struct Cli {
    /// Worker threads for accumulation (default: 1).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hierarchy scores and ranking for a whole corpus.
    Analyze(AnalyzeArgs),
    /// Hierarchy per origin→destination zone pair.
    Zonal(ZonalArgs),
    /// Generate a synthetic corpus with a planted hierarchy.
    Synth(SynthArgs),
    /// Scatter data (and optional SVG) from a result document.
    PlotData(PlotArgs),
    /// Parse and validate chains only; emit the ingest report.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Chains CSV, or `-` for stdin.
    #[arg(long)]
    pub chains: PathBuf,
    /// Modes JSON.
    #[arg(long)]
    pub modes: PathBuf,
    /// Output document; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct ConfigArgs {
    #[arg(long, value_enum, default_value_t = SignConvention::Flipped)]
    pub ascending_sign: SignConvention,
    #[arg(long, value_enum, default_value_t = UndefinedPairs::Exclude)]
    pub undefined_pairs: UndefinedPairs,
}

impl ConfigArgs {
    pub fn hierarchy(&self) -> HierarchyConfig {
        HierarchyConfig { ascending_sign: self.ascending_sign, undefined_pairs: self.undefined_pairs }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ZonalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Zone map CSV (`stop_id,zone_id`).
    #[arg(long)]
    pub zones: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = UnknownStopPolicy::Skip)]
    pub unknown_stops: UnknownStopPolicy,
    /// Pairs with fewer chains are flagged low-support.
    #[arg(long, default_value_t = 1000)]
    pub min_chains: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output chains CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of chains.
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Modes JSON; the six-mode Seoul set when omitted.
    #[arg(long)]
    pub modes: Option<PathBuf>,
    /// Planted order, lowest first, e.g. `2,3,5,6,4`. Defaults to the Seoul
    /// order, or to every non-walking mode by id with `--modes`.
    #[arg(long, value_delimiter = ',')]
    pub planted: Option<Vec<u32>>,
    /// Probability weights for 1..4 legs.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Mean leg distance in meters.
    #[arg(long, default_value_t = 4000.0)]
    pub mean_distance: f64,
    /// Number of zones; omit for an unzoned corpus.
    #[arg(long)]
    pub zones: Option<u32>,
    #[arg(long, default_value_t = 50)]
    pub stops_per_zone: u32,
    #[arg(long, default_value_t = 0.3)]
    pub interzonal_fraction: f64,
    /// Modes used only by interzonal chains.
    #[arg(long, value_delimiter = ',')]
    pub interzonal_only: Vec<u32>,
    /// Resolved spec echo; `<out>.spec.json` when omitted.
    #[arg(long)]
    pub spec_out: Option<PathBuf>,
    /// Modes JSON for the corpus; `<out>.modes.json` when omitted.
    #[arg(long)]
    pub modes_out: Option<PathBuf>,
    /// Zone map for zoned corpora; `<out>.zones.csv` when omitted.
    #[arg(long)]
    pub zones_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Result document from `analyze` or `zonal`.
    #[arg(long)]
    pub result: PathBuf,
    /// Figure data CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Zone pair `p->q` of a zonal document.
    #[arg(long)]
    pub pair: Option<String>,
    /// Also write an SVG scatter here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    match &cli.command {
        Command::Analyze(args) => {
            let doc = cmd_analyze(args, cli.threads)?;
            emit(&Document::Analyze(doc), args.input.out.as_deref())
        }
        Command::Zonal(args) => {
            let doc = cmd_zonal(args, cli.threads)?;
            emit(&Document::Zonal(doc), args.input.out.as_deref())
        }
        Command::Validate(args) => {
            let doc = cmd_validate(args)?;
            emit(&Document::Validate(doc), args.input.out.as_deref())
        }
        Command::Synth(args) => cmd_synth(args),
        Command::PlotData(args) => cmd_plot_data(args),
    }
}

fn emit(doc: &Document, out: Option<&Path>) -> Result<(), CliError> {
    let json = doc.to_json();
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| CliError::input(path, e)),
        None => io::stdout().lock().write_all(json.as_bytes()).map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::input(path, e))
}

fn load_registry(path: &Path) -> Result<(ModeRegistry, InputDigest), CliError> {
    let bytes = read_file(path)?;
    let registry = parse_mode_registry(bytes.as_slice()).map_err(|e| CliError::input(path, e))?;
    let digest = InputDigest { role: "modes".into(), path: path.display().to_string(), sha256: sha256_hex(&bytes) };
    Ok((registry, digest))
}

fn open_chains(path: &Path) -> Result<DigestReader<Box<dyn Read>>, CliError> {
    let reader: Box<dyn Read> = if path.as_os_str() == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(File::open(path).map_err(|e| CliError::input(path, e))?)
    };
    Ok(DigestReader::new(Box::new(BufReader::with_capacity(1 << 20, reader))))
}

const BATCH: usize = 1 << 14;

/// Streams every accepted chain into per-worker accumulators and merges them.
/// With one thread no batching happens.
fn drive<R, S>(
    input: R,
    registry: &ModeRegistry,
    path: &Path,
    threads: usize,
    init: impl Fn() -> S + Sync,
    add: impl Fn(&mut S, &TripChain) -> Result<(), CliError> + Sync,
    merge: impl Fn(&mut S, S) -> Result<(), CliError> + Sync,
) -> Result<(S, IngestReport, R), CliError>
where
    R: Read,
    S: Send,
{
    let mut stream = parse_chains(input, registry);
    let mut state = init();
    if threads <= 1 {
        for chain in stream.by_ref() {
            add(&mut state, &chain.map_err(|e| CliError::input(path, e))?)?;
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let mut batch = Vec::with_capacity(BATCH);
        loop {
            batch.clear();
            for chain in stream.by_ref().take(BATCH) {
                batch.push(chain.map_err(|e| CliError::input(path, e))?);
            }
            if batch.is_empty() {
                break;
            }
            let part = pool.install(|| {
                batch
                    .par_iter()
                    .try_fold(&init, |mut acc, chain| add(&mut acc, chain).map(|()| acc))
                    .try_reduce(&init, |mut a, b| merge(&mut a, b).map(|()| a))
            })?;
            merge(&mut state, part)?;
        }
    }
    let (report, inner) = stream.into_parts();
    Ok((state, report, inner))
}

fn chains_digest<R: Read>(path: &Path, reader: &DigestReader<R>) -> InputDigest {
    InputDigest { role: "chains".into(), path: path.display().to_string(), sha256: reader.hex_digest() }
}

pub fn cmd_analyze(args: &AnalyzeArgs, threads: usize) -> Result<AnalyzeDocument, CliError> {
    let (registry, modes_digest) = load_registry(&args.input.modes)?;
    let config = args.config.hierarchy();
    let path = &args.input.chains;
    let m = registry.len();
    let (counts, ingest, reader) = drive(
        open_chains(path)?,
        &registry,
        path,
        threads,
        || PhaseCounts::new(m),
        |acc, chain| Ok(acc.add_chain(chain, &registry)?),
        |acc, other| Ok(acc.merge_from(&other)?),
    )?;
    let result = analyze(counts, &registry, &config)?;
    let manifest = Manifest::new(
        "analyze",
        vec![chains_digest(path, &reader), modes_digest],
        RunConfig {
            ascending_sign: config.ascending_sign,
            undefined_pairs: config.undefined_pairs,
            ..Default::default()
        },
    );
    Ok(AnalyzeDocument { manifest, result: ResultBody::new(&result, &registry), modes: registry, ingest })
}

pub fn cmd_zonal(args: &ZonalArgs, threads: usize) -> Result<ZonalDocument, CliError> {
    let (registry, modes_digest) = load_registry(&args.input.modes)?;
    let zone_bytes = read_file(&args.zones)?;
    let stop_map = parse_zone_map(zone_bytes.as_slice()).map_err(|e| CliError::input(&args.zones, e))?;
    let partition = ZonePartition::new(stop_map, args.unknown_stops);
    let config = args.config.hierarchy();
    let path = &args.input.chains;
    let m = registry.len();

    let ((global, zonal), ingest, reader) = drive(
        open_chains(path)?,
        &registry,
        path,
        threads,
        || (PhaseCounts::new(m), ZonalAccumulator::new(&registry)),
        |(global, zonal), chain| {
            global.add_chain(chain, &registry)?;
            zonal.add(chain, &partition, &registry)?;
            Ok(())
        },
        |(global, zonal), (g, z)| {
            global.merge_from(&g)?;
            zonal.merge_from(&z)?;
            Ok(())
        },
    )?;

    let results = zonal.finish(&partition, &registry, &config)?;
    let global = analyze(global, &registry, &config)?;
    let chains_assigned = results.chains_assigned();
    if chains_assigned + results.skipped_unknown != ingest.chains_accepted {
        return Err(CliError::Internal(format!(
            "zone assignment lost chains: {chains_assigned} assigned + {} skipped != {} accepted",
            results.skipped_unknown, ingest.chains_accepted
        )));
    }
    let pairs = results
        .pairs
        .iter()
        .map(|(pair, r)| {
            let doc = PairDoc {
                chain_count: r.chain_count,
                low_support: r.chain_count < args.min_chains,
                result: ResultBody::new(&r.result, &registry),
            };
            (pair.to_string(), doc)
        })
        .collect();
    let manifest = Manifest::new(
        "zonal",
        vec![
            chains_digest(path, &reader),
            modes_digest,
            InputDigest {
                role: "zones".into(),
                path: args.zones.display().to_string(),
                sha256: sha256_hex(&zone_bytes),
            },
        ],
        RunConfig {
            ascending_sign: config.ascending_sign,
            undefined_pairs: config.undefined_pairs,
            unknown_stops: Some(args.unknown_stops),
            min_chains: Some(args.min_chains),
        },
    );
    Ok(ZonalDocument {
        manifest,
        zones: partition.zones().iter().map(|z| z.0).collect(),
        min_chains: args.min_chains,
        skipped_unknown: results.skipped_unknown,
        chains_assigned,
        global: ResultBody::new(&global, &registry),
        pairs,
        modes: registry,
        ingest,
    })
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<ValidateDocument, CliError> {
    let (registry, modes_digest) = load_registry(&args.input.modes)?;
    let path = &args.input.chains;
    let ((), ingest, reader) = drive(open_chains(path)?, &registry, path, 1, || (), |_, _| Ok(()), |_, _| Ok(()))?;
    let manifest = Manifest::new("validate", vec![chains_digest(path, &reader), modes_digest], RunConfig::default());
    Ok(ValidateDocument { manifest, ingest })
}

/// `synth` writes its spec echo in this shape.
#[derive(Debug, Serialize)]
pub struct SynthEcho<'a> {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub n: u64,
    pub spec: &'a SynthSpec,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn resolve_synth_spec(args: &SynthArgs) -> Result<SynthSpec, CliError> {
    let registry = match &args.modes {
        Some(path) => load_registry(path)?.0,
        None => crate::model::seoul_registry(),
    };
    let planted_order: Vec<ModeId> = match (&args.planted, &args.modes) {
        (Some(ids), _) => ids.iter().copied().map(ModeId).collect(),
        (None, None) => SynthSpec::seoul(0).planted_order,
        (None, Some(_)) => registry.ids().filter(|&id| id != registry.walking()).collect(),
    };
    let chain_length_weights = match &args.weights {
        Some(w) => [w[0], w[1], w[2], w[3]],
        None => DEFAULT_LENGTH_WEIGHTS,
    };
    let zone_setup = args.zones.map(|zones| ZoneSetup {
        zones,
        stops_per_zone: args.stops_per_zone,
        interzonal_fraction: args.interzonal_fraction,
        interzonal_only: args.interzonal_only.iter().copied().map(ModeId).collect(),
    });
    if zone_setup.is_none() && !args.interzonal_only.is_empty() {
        return Err(CliError::Usage("--interzonal-only needs --zones".into()));
    }
    let spec = SynthSpec {
        registry,
        planted_order,
        chain_length_weights,
        noise: args.noise,
        mean_leg_distance: args.mean_distance,
        zone_setup,
        seed: args.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = resolve_synth_spec(args)?;
    let out = &args.out;
    let file = File::create(out).map_err(|e| CliError::input(out, e))?;
    let mut writer = ChainWriter::new(BufWriter::with_capacity(1 << 20, file)).map_err(|e| CliError::input(out, e))?;
    for index in 0..args.n {
        writer.write_chain(&chain_at(&spec, index)).map_err(|e| CliError::input(out, e))?;
    }
    writer.finish().and_then(|mut w| w.flush().map_err(IngestError::from)).map_err(|e| CliError::input(out, e))?;

    let spec_out = args.spec_out.clone().unwrap_or_else(|| sibling(out, ".spec.json"));
    let echo =
        SynthEcho { tool: env!("CARGO_PKG_NAME"), tool_version: env!("CARGO_PKG_VERSION"), n: args.n, spec: &spec };
    let mut json = serde_json::to_string_pretty(&echo).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    std::fs::write(&spec_out, json).map_err(|e| CliError::input(&spec_out, e))?;

    let modes_out = args.modes_out.clone().unwrap_or_else(|| sibling(out, ".modes.json"));
    let mut modes = Vec::new();
    write_mode_registry(&spec.registry, &mut modes).map_err(|e| CliError::Internal(e.to_string()))?;
    modes.push(b'\n');
    std::fs::write(&modes_out, modes).map_err(|e| CliError::input(&modes_out, e))?;

    if spec.zone_setup.is_some() {
        let zones_out = args.zones_out.clone().unwrap_or_else(|| sibling(out, ".zones.csv"));
        let mut zones = Vec::new();
        write_zone_map(&zone_map(&spec), &mut zones).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(&zones_out, zones).map_err(|e| CliError::input(&zones_out, e))?;
    }
    Ok(())
}

pub fn cmd_plot_data(args: &PlotArgs) -> Result<(), CliError> {
    let bytes = read_file(&args.result)?;
    let doc: Document = serde_json::from_slice(&bytes).map_err(|e| CliError::input(&args.result, e))?;
    let (body, title) = match (&doc, &args.pair) {
        (Document::Analyze(d), None) => (&d.result, "all chains".to_string()),
        (Document::Analyze(_), Some(_)) => {
            return Err(CliError::Usage("--pair applies to zonal documents only".into()));
        }
        (Document::Zonal(d), Some(pair)) => {
            let key = pair.parse::<crate::zonal::ZonePair>().map_err(CliError::Usage)?.to_string();
            let entry = d
                .pairs
                .get(&key)
                .ok_or_else(|| CliError::Input(format!("{}: no zone pair {key}", args.result.display())))?;
            (&entry.result, format!("zone pair {key}"))
        }
        (Document::Zonal(_), None) => {
            return Err(CliError::Usage("zonal documents need --pair p->q".into()));
        }
        (Document::Validate(_), _) => {
            return Err(CliError::input(&args.result, "validate documents carry no scores"));
        }
    };
    let (points, unobserved) = plot::figure_points(body);
    std::fs::write(&args.out, plot::figure_csv(&points)).map_err(|e| CliError::input(&args.out, e))?;
    if !unobserved.is_empty() {
        let note = sibling(&args.out, ".unobserved.txt");
        std::fs::write(&note, plot::unobserved_note(&unobserved)).map_err(|e| CliError::input(&note, e))?;
    }
    if let Some(svg) = &args.svg {
        std::fs::write(svg, plot::scatter_svg(&points, &title)).map_err(|e| CliError::input(svg, e))?;
    }
    Ok(())
}
