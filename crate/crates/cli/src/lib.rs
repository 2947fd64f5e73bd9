//! The `fqi` command-line tool.
//!
//! Every subcommand reads and writes the text formats of `fqi-core` and
//! records a JSON run manifest next to its output.

mod manifest;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use fqi_core::bench::{
    dataset_from_text, dataset_to_text, gen_synthetic, sweep, BenchmarkTable, PriorMode,
    SweepGrid, SweepParams, TrainParams,
};
use fqi_core::channel::{transmit, BscChannel};
use fqi_core::codebook::{
    assign_indices, train_codebook, CodebookArtifact, FragmentSet, KMeansParams, Priors,
};
use fqi_core::codec::{payload_to_text, payloads_from_text, reconstruction_metrics, FqiCodec};
use fqi_core::control::{
    run_lockstep, AppCommand, DuctError, InProcessDuct, IntegrationLevel, NegotiationOutcome,
    NegotiationState, TableStore,
};
use fqi_core::format::fmt_float;
use fqi_core::sla::{
    best_per_cost, compression_factor, fqi_symbol_cost, grid_ber, scenario_report, select_config,
    ScenarioReport, Ssla,
};
use fqi_core::{LabeledDataset, Seed};

pub use manifest::{manifest_path, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Domain(#[from] fqi_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("stdout: {0}")]
    Stdout(#[from] io::Error),
    #[error("control transport: {0}")]
    Transport(#[from] DuctError),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("negotiation ended in {state}: {reason}")]
    Negotiation { state: NegotiationState, reason: String },
}

impl CliError {
    /// Usage errors are reported by clap with code 2 before any command
    /// runs; everything here is a domain or environment failure.
    pub fn exit_code(&self) -> i32 {
        1
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "fqi", version, about = "Fragment-quantize-index embedding transport over a BSC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Where to write the run manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled Gaussian-mixture dataset.
    GenData(GenDataArgs),
    /// Train a codebook and channel-aware index assignment.
    TrainCodebook(TrainCodebookArgs),
    /// Encode every embedding of a dataset into payload blocks.
    Encode(EncodeArgs),
    /// Pass payload blocks through a binary symmetric channel.
    Transmit(TransmitArgs),
    /// Decode payload blocks back into embeddings.
    Decode(DecodeArgs),
    /// Build a benchmark table over a (d, b, ber) grid.
    Sweep(SweepArgs),
    /// Pick the cheapest configuration satisfying an SSLA.
    Select(SelectArgs),
    /// Compare text, float and FQI transmission costs.
    Compare(CompareArgs),
    /// Run the control-plane negotiation and print its trace.
    Negotiate(NegotiateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorsArg {
    Empirical,
    Uniform,
}

impl From<PriorsArg> for PriorMode {
    fn from(p: PriorsArg) -> Self {
        match p {
            PriorsArg::Empirical => PriorMode::Empirical,
            PriorsArg::Uniform => PriorMode::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Kv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Inproc,
    Socket,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 8)]
    pub classes: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0.3)]
    pub spread: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainCodebookArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub b: u32,
    #[arg(long)]
    pub seed: u64,
    /// Bit error probability the index assignment is optimized for; 0
    /// keeps the natural order.
    #[arg(long, default_value_t = 0.0)]
    pub ber: f64,
    #[arg(long, value_enum, default_value_t = PriorsArg::Empirical)]
    pub priors: PriorsArg,
    #[arg(long, default_value_t = fqi_core::codebook::DEFAULT_EFFORT)]
    pub effort: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TransmitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Bit error probability in [0, 0.5].
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DecodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Dataset the payloads were encoded from; supplies labels and the
    /// reference for reconstruction metrics.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Benchmark id; defaults to the dataset file stem.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = SweepGrid::default_ber())]
    pub ber: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads; 0 uses one per core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, value_enum, default_value_t = PriorsArg::Empirical)]
    pub priors: PriorsArg,
    #[arg(long, default_value_t = fqi_core::codebook::DEFAULT_EFFORT)]
    pub effort: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SweepArgs {
    pub fn params(&self) -> SweepParams {
        SweepParams {
            train_fraction: self.train_fraction,
            classifier: TrainParams {
                epochs: self.epochs,
                lr: self.lr,
                l2: self.l2,
            },
            kmeans: KMeansParams {
                max_iters: self.max_iters,
                tol: self.tol,
            },
            assign_effort: self.effort,
            priors: self.priors.into(),
        }
    }

    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            d: self.d.clone(),
            b: self.b.clone(),
            ber: self.ber.clone(),
        }
    }

    pub fn benchmark_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| default_id(&self.dataset))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SlaArgs {
    /// Fraction of the benchmark's nominal accuracy to guarantee.
    #[arg(long, conflicts_with = "ssla", required_unless_present = "ssla")]
    pub floor: Option<f64>,
    /// FQI-SSLA file instead of `--floor`.
    #[arg(long)]
    pub ssla: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub bench: PathBuf,
    #[command(flatten)]
    pub sla: SlaArgs,
    #[arg(long)]
    pub ber: f64,
    #[arg(long)]
    pub dim: usize,
    /// Also list the most accurate configuration at every symbol cost.
    #[arg(long)]
    pub per_cost: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub dim: usize,
    /// Mean UTF-8 bits per text message.
    #[arg(long)]
    pub text_bits: f64,
    #[arg(long)]
    pub bench: PathBuf,
    #[command(flatten)]
    pub sla: SlaArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct NegotiateArgs {
    /// Benchmark tables the network offers; repeatable.
    #[arg(long, required = true)]
    pub bench: Vec<PathBuf>,
    /// Benchmark the application requires; defaults to the first table.
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub floor: f64,
    /// BER the application reports before proposing.
    #[arg(long)]
    pub ber: f64,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(0..=4))]
    pub level: u8,
    #[arg(long, value_enum, default_value_t = Transport::Inproc)]
    pub transport: Transport,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_id(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    let id: String = stem
        .chars()
        .map(|c| if c.is_whitespace() || matches!(c, '=' | ',' | ':') { '_' } else { c })
        .collect();
    if id.is_empty() {
        "dataset".into()
    } else {
        id
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    Ok(dataset_from_text(&read(path)?)?)
}

pub fn read_table(path: &Path) -> Result<BenchmarkTable> {
    Ok(BenchmarkTable::parse(&read(path)?)?)
}

fn read_ssla(sla: &SlaArgs, table: &BenchmarkTable) -> Result<Ssla> {
    match (&sla.ssla, sla.floor) {
        (Some(path), _) => Ok(Ssla::parse(&read(path)?)?),
        (None, Some(ratio)) => Ok(Ssla::new(table.dataset_id(), ratio)?),
        (None, None) => unreachable!("clap requires --floor or --ssla"),
    }
}

/// Output of one command: the artifact text plus the manifest describing
/// how it was produced.
struct Run {
    manifest: RunManifest,
    out: Option<PathBuf>,
}

impl Run {
    fn new<P: Serialize>(command: &'static str, args: &P, seed: Option<u64>, out: Option<&Path>) -> Self {
        Run {
            manifest: RunManifest::new(command, args, seed),
            out: out.map(Path::to_path_buf),
        }
    }

    fn input(&mut self, p: &Path) {
        self.manifest.inputs.push(p.to_path_buf());
    }

    /// Writes the artifact to `--out` or stdout, then the manifest.
    fn finish(mut self, text: &str, explicit: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
        match &self.out {
            Some(path) => {
                write(path, text)?;
                self.manifest.outputs.push(path.clone());
            }
            None => stdout.write_all(text.as_bytes())?,
        }
        let mpath = manifest_path(explicit, self.out.as_deref(), self.manifest.command);
        write(&mpath, &self.manifest.to_json())
    }
}

/// Runs the parsed command. Artifacts without `--out` go to `stdout`;
/// summaries go to stderr.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let explicit = cli.manifest.as_deref();
    match &cli.command {
        Command::GenData(a) => {
            let run = Run::new("gen-data", a, Some(a.seed), a.out.as_deref());
            let ds = gen_synthetic(a.classes, a.dim, a.per_class, a.spread, Seed(a.seed))?;
            run.finish(&dataset_to_text(&ds), explicit, stdout)
        }
        Command::TrainCodebook(a) => {
            let mut run = Run::new("train-codebook", a, Some(a.seed), a.out.as_deref());
            run.input(&a.dataset);
            let text = train_codebook_text(a)?;
            run.finish(&text, explicit, stdout)
        }
        Command::Encode(a) => {
            let mut run = Run::new("encode", a, None, a.out.as_deref());
            run.input(&a.dataset);
            run.input(&a.codebook);
            let ds = read_dataset(&a.dataset)?;
            let artifact = CodebookArtifact::parse(&read(&a.codebook)?)?;
            let codec = FqiCodec::from_artifact(ds.dim(), &artifact)?;
            let mut text = String::new();
            for e in ds.embeddings() {
                text.push_str(&payload_to_text(&codec.encode(e)?));
            }
            run.finish(&text, explicit, stdout)
        }
        Command::Transmit(a) => {
            let mut run = Run::new("transmit", a, Some(a.seed), a.out.as_deref());
            run.input(&a.input);
            let channel = BscChannel::new(a.p)?;
            let payloads = payloads_from_text(&read(&a.input)?)?;
            let mut text = String::new();
            let mut flipped = 0;
            for (i, bits) in payloads.iter().enumerate() {
                let rx = transmit(bits, &channel, Seed(a.seed).child(i as u64));
                flipped += rx.hamming(bits)?;
                text.push_str(&payload_to_text(&rx));
            }
            let total: usize = payloads.iter().map(|p| p.len()).sum();
            eprintln!("payloads={} bits={total} flipped={flipped}", payloads.len());
            run.finish(&text, explicit, stdout)
        }
        Command::Decode(a) => {
            let mut run = Run::new("decode", a, None, a.out.as_deref());
            run.input(&a.input);
            run.input(&a.codebook);
            run.input(&a.reference);
            let reference = read_dataset(&a.reference)?;
            let artifact = CodebookArtifact::parse(&read(&a.codebook)?)?;
            let codec = FqiCodec::from_artifact(reference.dim(), &artifact)?;
            let payloads = payloads_from_text(&read(&a.input)?)?;
            if payloads.len() != reference.len() {
                return Err(fqi_core::Error::LengthMismatch {
                    expected: reference.len(),
                    actual: payloads.len(),
                }
                .into());
            }
            let decoded = payloads
                .iter()
                .map(|p| codec.decode(p))
                .collect::<fqi_core::Result<Vec<_>>>()?;
            let (mut l2, mut cos) = (0.0, 0.0);
            for (orig, rx) in reference.embeddings().iter().zip(&decoded) {
                let m = reconstruction_metrics(orig, rx)?;
                l2 += m.l2_error;
                cos += m.cosine_similarity;
            }
            let n = decoded.len().max(1) as f64;
            eprintln!(
                "count={} mean_l2_error={} mean_cosine_similarity={}",
                decoded.len(),
                fmt_float(l2 / n),
                fmt_float(cos / n)
            );
            let out = LabeledDataset::new(
                reference.dim(),
                reference.num_classes(),
                decoded,
                reference.labels().to_vec(),
            )?;
            run.finish(&dataset_to_text(&out), explicit, stdout)
        }
        Command::Sweep(a) => {
            let mut run = Run::new("sweep", a, Some(a.seed), a.out.as_deref());
            run.input(&a.dataset);
            let text = sweep_text(a)?;
            run.finish(&text, explicit, stdout)
        }
        Command::Select(a) => {
            let mut run = Run::new("select", a, None, a.out.as_deref());
            run.input(&a.bench);
            if let Some(p) = &a.sla.ssla {
                run.input(p);
            }
            let table = read_table(&a.bench)?;
            let ssla = read_ssla(&a.sla, &table)?;
            let mut text = select_text(&table, &ssla, a.ber, a.dim)?;
            if a.per_cost {
                text.push_str("symbol_cost,d,b,accuracy\n");
                for (cfg, acc) in best_per_cost(&table, a.ber, a.dim)? {
                    text.push_str(&format!(
                        "{},{},{},{}\n",
                        fmt_float(fqi_symbol_cost(&cfg)),
                        cfg.fragment_dim(),
                        cfg.bits(),
                        fmt_float(acc)
                    ));
                }
            }
            run.finish(&text, explicit, stdout)
        }
        Command::Compare(a) => {
            let mut run = Run::new("compare", a, None, a.out.as_deref());
            run.input(&a.bench);
            if let Some(p) = &a.sla.ssla {
                run.input(p);
            }
            let table = read_table(&a.bench)?;
            let ssla = read_ssla(&a.sla, &table)?;
            let report = scenario_report(a.p, a.dim, a.text_bits, &table, &ssla)?;
            let text = match a.format {
                ReportFormat::Csv => format!("{}\n{}\n", ScenarioReport::csv_header(), report.csv_row()),
                ReportFormat::Kv => report.to_key_values(),
            };
            run.finish(&text, explicit, stdout)
        }
        Command::Negotiate(a) => {
            let mut run = Run::new("negotiate", a, None, a.out.as_deref());
            let mut store = TableStore::new(a.dim);
            let mut first = None;
            for p in &a.bench {
                run.input(p);
                let t = read_table(p)?;
                first.get_or_insert_with(|| t.dataset_id().to_string());
                store.insert(t);
            }
            let id = a.benchmark.clone().or(first).unwrap_or_default();
            let outcome = negotiate(&store, &id, a)?;
            let text = negotiation_text(&outcome);
            run.finish(&text, explicit, stdout)?;
            match outcome.application.state() {
                NegotiationState::Active => Ok(()),
                state => Err(CliError::Negotiation {
                    state,
                    reason: outcome.application.failure().unwrap_or("no agreement").to_string(),
                }),
            }
        }
    }
}

/// Trains on every fragment of the dataset; the codebook and assignment
/// use children 0 and 1 of the seed.
pub fn train_codebook_text(a: &TrainCodebookArgs) -> Result<String> {
    let ds = read_dataset(&a.dataset)?;
    fqi_core::validate_config(ds.dim(), a.d, a.b)?;
    let seed = Seed(a.seed);
    let fragments = FragmentSet::from_embeddings(ds.embeddings(), a.d)?;
    let params = KMeansParams {
        max_iters: a.max_iters,
        tol: a.tol,
    };
    let trained = train_codebook(&fragments, a.b, seed.child(0), params)?;
    let priors = match a.priors {
        PriorsArg::Empirical => trained.priors.clone(),
        PriorsArg::Uniform => Priors::uniform(trained.codebook.len()),
    };
    let assignment = assign_indices(&trained.codebook, a.ber, &priors, seed.child(1), a.effort)?;
    Ok(CodebookArtifact::new(trained.codebook, assignment, priors)?.to_text())
}

pub fn sweep_text(a: &SweepArgs) -> Result<String> {
    let ds = read_dataset(&a.dataset)?;
    let id = a.benchmark_id();
    let (grid, params) = (a.grid(), a.params());
    let table = if a.threads == 1 {
        sweep(&ds, &id, &grid, a.runs, Seed(a.seed), &params, false)?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(a.threads)
            .build()?
            .install(|| sweep(&ds, &id, &grid, a.runs, Seed(a.seed), &params, true))?
    };
    Ok(table.to_text())
}

pub fn select_text(table: &BenchmarkTable, ssla: &Ssla, ber: f64, dim: usize) -> Result<String> {
    let cfg = select_config(table, ssla, ber, dim)?;
    let at = grid_ber(table, ber)?;
    let acc = table
        .cell(cfg.fragment_dim(), cfg.bits(), at)
        .map(|c| c.mean_accuracy)
        .unwrap_or(f64::NAN);
    Ok(format!(
        "benchmark={}\nfloor={}\ngrid_ber={}\nd={}\nb={}\naccuracy={}\nsymbol_cost={}\ncompression_factor={}\n",
        table.dataset_id(),
        fmt_float(ssla.resolved_floor(table)?),
        fmt_float(at),
        cfg.fragment_dim(),
        cfg.bits(),
        fmt_float(acc),
        fmt_float(fqi_symbol_cost(&cfg)),
        fmt_float(compression_factor(&cfg)),
    ))
}

pub fn negotiate(store: &TableStore, benchmark_id: &str, a: &NegotiateArgs) -> Result<NegotiationOutcome> {
    let level = IntegrationLevel::new(a.level).expect("clap bounds the level");
    let script = vec![
        AppCommand::Connect { level },
        AppCommand::ReportBer { ber: a.ber },
        AppCommand::Require {
            benchmark_id: benchmark_id.to_string(),
            floor_ratio: a.floor,
        },
    ];
    Ok(match a.transport {
        Transport::Inproc => run_lockstep(&script, store, &mut InProcessDuct::new())?,
        #[cfg(unix)]
        Transport::Socket => {
            let mut duct = fqi_core::control::SocketDuct::new().map_err(DuctError::from)?;
            run_lockstep(&script, store, &mut duct)?
        }
        #[cfg(not(unix))]
        Transport::Socket => {
            return Err(CliError::Transport(DuctError::Io(io::Error::new(
                io::ErrorKind::Unsupported,
                "socket transport needs Unix domain sockets",
            ))))
        }
    })
}

pub fn negotiation_text(outcome: &NegotiationOutcome) -> String {
    let mut text = outcome.render();
    text.push_str(&format!(
        "application={} network={} messages={}",
        outcome.application.state(),
        outcome.network.state(),
        outcome.message_count()
    ));
    if let Some((d, b)) = outcome.application.config() {
        text.push_str(&format!(" d={d} b={b}"));
    }
    text.push('\n');
    text
}
