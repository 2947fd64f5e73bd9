use rayon::prelude::*;

use super::classifier::{evaluate, train_classifier, ClassifierModel, TrainParams};
use super::dataset::split;
use crate::channel::{transmit, BscChannel};
use crate::codebook::{assign_indices, train_codebook, FragmentSet, KMeansParams, Priors, DEFAULT_EFFORT};
use crate::codec::FqiCodec;
use crate::error::{parse_err, Error, Result};
use crate::format::{fmt_float, header_fields};
use crate::types::{FqiConfig, LabeledDataset, Seed};

/// Domain tag separating split/classifier seeds from codec seeds.
const SPLIT_STREAM: u64 = u64::MAX;

/// Which centroid weights drive the index assignment objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorMode {
    #[default]
    Empirical,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepParams {
    pub train_fraction: f64,
    pub classifier: TrainParams,
    pub kmeans: KMeansParams,
    pub assign_effort: usize,
    pub priors: PriorMode,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            train_fraction: 0.75,
            classifier: TrainParams::default(),
            kmeans: KMeansParams::default(),
            assign_effort: DEFAULT_EFFORT,
            priors: PriorMode::Empirical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCell {
    pub d: usize,
    pub b: u32,
    pub ber: f64,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// One run's split and the classifier fit on its clean training half.
struct RunContext {
    train: LabeledDataset,
    test: LabeledDataset,
    model: ClassifierModel,
    clean_accuracy: f64,
}

impl RunContext {
    fn prepare(ds: &LabeledDataset, run: usize, seed: Seed, params: &SweepParams) -> Result<Self> {
        let (train, test) = split(ds, params.train_fraction, seed.derive(&[SPLIT_STREAM, run as u64]))?;
        let model = train_classifier(&train, &params.classifier)?;
        let clean_accuracy = evaluate(&model, &test)?;
        Ok(RunContext {
            train,
            test,
            model,
            clean_accuracy,
        })
    }
}

fn prepare_runs(
    ds: &LabeledDataset,
    runs: usize,
    seed: Seed,
    params: &SweepParams,
    parallel: bool,
) -> Result<Vec<RunContext>> {
    if parallel {
        (0..runs).into_par_iter().map(|r| RunContext::prepare(ds, r, seed, params)).collect()
    } else {
        (0..runs).map(|r| RunContext::prepare(ds, r, seed, params)).collect()
    }
}

fn check_cell_args(ds: &LabeledDataset, d: usize, b: u32, ber: f64) -> Result<(FqiConfig, BscChannel)> {
    let config = FqiConfig::new(ds.dim(), d, b)?;
    // A p_e = 0.5 channel carries no information; nothing to benchmark.
    if ber >= 0.5 {
        return Err(Error::OutOfRange(ber));
    }
    Ok((config, BscChannel::new(ber)?))
}

/// Accuracy of one run at one grid point: fit a codec on the run's training
/// fragments, push every test embedding through encode, BSC, decode, and
/// score the clean-trained classifier on what comes out.
fn cell_accuracy(
    ctx: &RunContext,
    config: FqiConfig,
    channel: &BscChannel,
    run: usize,
    seed: Seed,
    params: &SweepParams,
) -> Result<f64> {
    let (d, b) = (config.fragment_dim(), config.bits());
    let codebook_seed = seed.derive(&[d as u64, b as u64, run as u64]);
    let link_seed = seed.derive(&[d as u64, b as u64, channel.error_probability().to_bits(), run as u64]);

    let fragments = FragmentSet::from_embeddings(ctx.train.embeddings(), d)?;
    let trained = train_codebook(&fragments, b, codebook_seed, params.kmeans)?;
    let priors = match params.priors {
        PriorMode::Empirical => trained.priors.clone(),
        PriorMode::Uniform => Priors::uniform(trained.codebook.len()),
    };
    let assignment = assign_indices(
        &trained.codebook,
        channel.error_probability(),
        &priors,
        link_seed.child(0),
        params.assign_effort,
    )?;
    let codec = FqiCodec::new(config, trained.codebook, assignment)?;

    let channel_seed = link_seed.child(1);
    let mut i = 0u64;
    let received = ctx.test.map_embeddings(|e| {
        let noisy = transmit(&codec.encode(e)?, channel, channel_seed.child(i));
        i += 1;
        codec.decode(&noisy)
    })?;
    evaluate(&ctx.model, &received)
}

fn aggregate(d: usize, b: u32, ber: f64, accuracies: &[f64]) -> BenchmarkCell {
    let runs = accuracies.len();
    let mean = accuracies.iter().sum::<f64>() / runs as f64;
    let std = if runs > 1 {
        (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt()
    } else {
        0.0
    };
    BenchmarkCell {
        d,
        b,
        ber,
        runs,
        mean_accuracy: mean,
        std_accuracy: std,
    }
}

fn run_cell_with(
    contexts: &[RunContext],
    config: FqiConfig,
    channel: &BscChannel,
    seed: Seed,
    params: &SweepParams,
) -> Result<BenchmarkCell> {
    let accuracies = contexts
        .iter()
        .enumerate()
        .map(|(r, ctx)| cell_accuracy(ctx, config, channel, r, seed, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(
        config.fragment_dim(),
        config.bits(),
        channel.error_probability(),
        &accuracies,
    ))
}

/// Mean and sample standard deviation of accuracy over `runs` independent
/// runs at one `(d, b, ber)` point.
///
/// Produces the same cell as the matching entry of [`sweep`] with the same
/// seed.
pub fn run_cell(
    ds: &LabeledDataset,
    d: usize,
    b: u32,
    ber: f64,
    runs: usize,
    seed: Seed,
    params: &SweepParams,
) -> Result<BenchmarkCell> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let (config, channel) = check_cell_args(ds, d, b, ber)?;
    let contexts = prepare_runs(ds, runs, seed, params, false)?;
    run_cell_with(&contexts, config, &channel, seed, params)
}

/// Grid axes of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub d: Vec<usize>,
    pub b: Vec<u32>,
    pub ber: Vec<f64>,
}

impl SweepGrid {
    /// BER axis used when none is given: log-spaced from 1e-4 to 0.25.
    pub fn default_ber() -> Vec<f64> {
        vec![1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.15, 0.2, 0.25]
    }

    fn points(&self) -> Vec<(usize, u32, f64)> {
        let mut out = Vec::with_capacity(self.d.len() * self.b.len() * self.ber.len());
        for &d in &self.d {
            for &b in &self.b {
                for &ber in &self.ber {
                    out.push((d, b, ber));
                }
            }
        }
        out
    }
}

/// Evaluates every grid point. `parallel` spreads cells over the current
/// rayon pool; the table is identical either way.
pub fn sweep(
    ds: &LabeledDataset,
    dataset_id: &str,
    grid: &SweepGrid,
    runs: usize,
    seed: Seed,
    params: &SweepParams,
    parallel: bool,
) -> Result<BenchmarkTable> {
    if grid.d.is_empty() || grid.b.is_empty() || grid.ber.is_empty() {
        return Err(Error::InvalidParameter("sweep grid axes must be non-empty".into()));
    }
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    check_id(dataset_id)?;
    let points = grid.points();
    let checked = points
        .iter()
        .map(|&(d, b, ber)| check_cell_args(ds, d, b, ber))
        .collect::<Result<Vec<_>>>()?;

    let contexts = prepare_runs(ds, runs, seed, params, parallel)?;
    let nominal_accuracy = contexts.iter().map(|c| c.clean_accuracy).sum::<f64>() / runs as f64;

    let one = |(config, channel): &(FqiConfig, BscChannel)| {
        run_cell_with(&contexts, *config, channel, seed, params)
    };
    let cells = if parallel {
        checked.par_iter().map(one).collect::<Result<Vec<_>>>()?
    } else {
        checked.iter().map(one).collect::<Result<Vec<_>>>()?
    };
    BenchmarkTable::new(dataset_id.to_string(), nominal_accuracy, runs, cells, Some(seed))
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == '=' || c == ',' || c == ':') {
        return Err(Error::InvalidParameter(format!(
            "benchmark id {id:?} must be non-empty without whitespace, '=', ',' or ':'"
        )));
    }
    Ok(())
}

/// Accuracy per `(d, b, ber)` grid point plus the clean reference accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    dataset_id: String,
    nominal_accuracy: f64,
    runs: usize,
    cells: Vec<BenchmarkCell>,
    seed: Option<Seed>,
}

impl BenchmarkTable {
    /// Requires exactly one cell per point of the `d x b x ber` product.
    pub fn new(
        dataset_id: String,
        nominal_accuracy: f64,
        runs: usize,
        cells: Vec<BenchmarkCell>,
        seed: Option<Seed>,
    ) -> Result<Self> {
        check_id(&dataset_id)?;
        if cells.is_empty() {
            return Err(Error::Empty);
        }
        if !(0.0..=1.0).contains(&nominal_accuracy) {
            return Err(Error::InvalidParameter(format!(
                "nominal accuracy {nominal_accuracy} outside [0, 1]"
            )));
        }
        for c in &cells {
            if !(0.0..=1.0).contains(&c.mean_accuracy) || c.std_accuracy.is_nan() || c.std_accuracy < 0.0 || c.runs == 0 {
                return Err(Error::InvalidParameter(format!(
                    "bad cell ({}, {}, {})",
                    c.d, c.b, c.ber
                )));
            }
        }
        let table = BenchmarkTable {
            dataset_id,
            nominal_accuracy,
            runs,
            cells,
            seed,
        };
        let expected = table.d_values().len() * table.b_values().len() * table.ber_values().len();
        let mut keys: Vec<_> = table.cells.iter().map(|c| (c.d, c.b, c.ber.to_bits())).collect();
        keys.sort_unstable();
        keys.dedup();
        if keys.len() != table.cells.len() || keys.len() != expected {
            return Err(Error::InvalidParameter(
                "benchmark cells must cover the grid exactly once".into(),
            ));
        }
        Ok(table)
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn nominal_accuracy(&self) -> f64 {
        self.nominal_accuracy
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn cells(&self) -> &[BenchmarkCell] {
        &self.cells
    }

    /// Master seed, when known (not carried by the text format).
    pub fn seed(&self) -> Option<Seed> {
        self.seed
    }

    pub fn d_values(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.cells.iter().map(|c| c.d).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn b_values(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.cells.iter().map(|c| c.b).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn ber_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.cells.iter().map(|c| c.ber).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn cell(&self, d: usize, b: u32, ber: f64) -> Option<&BenchmarkCell> {
        self.cells.iter().find(|c| c.d == d && c.b == b && c.ber == ber)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "FQI-BENCH v1 dataset={} nominal={} runs={}\n",
            self.dataset_id,
            fmt_float(self.nominal_accuracy),
            self.runs
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                c.d,
                c.b,
                fmt_float(c.ber),
                fmt_float(c.mean_accuracy),
                fmt_float(c.std_accuracy)
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty benchmark file"))?;
        let fields = header_fields(header, "FQI-BENCH", &["dataset", "nominal", "runs"], n)?;
        let id = fields[0].to_string();
        let nominal: f64 = fields[1].parse().map_err(|_| parse_err(n, "bad nominal"))?;
        let runs: usize = fields[2].parse().map_err(|_| parse_err(n, "bad runs"))?;
        let mut cells = Vec::new();
        for (n, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 5 {
                return Err(parse_err(n, "expected `<d> <b> <ber> <mean> <std>`"));
            }
            let bad = |what: &str| parse_err(n, format!("bad {what}"));
            let float = |s: &str, what: &str| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(what)),
            };
            cells.push(BenchmarkCell {
                d: t[0].parse().map_err(|_| bad("d"))?,
                b: t[1].parse().map_err(|_| bad("b"))?,
                ber: float(t[2], "ber")?,
                runs,
                mean_accuracy: float(t[3], "mean")?,
                std_accuracy: float(t[4], "std")?,
            });
        }
        BenchmarkTable::new(id, nominal, runs, cells, None).map_err(|e| parse_err(1, e.to_string()))
    }
}
