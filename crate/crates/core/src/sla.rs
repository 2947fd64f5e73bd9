//! Semantic SLAs: accuracy floors on a reference benchmark, configuration
//! selection against a benchmark table, and the text/float/FQI resource
//! comparison.

use std::fmt::Write as _;

use crate::bench::BenchmarkTable;
use crate::channel::errorfree_symbol_cost;
use crate::error::{parse_err, Error, Result};
use crate::format::{fmt_float, header_fields};
use crate::types::{validate_config, FqiConfig};

/// Bits per coordinate of an IEEE-754 single-precision embedding.
pub const FLOAT_BITS: u32 = 32;

/// An accuracy floor expressed as a fraction of a benchmark's nominal
/// accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct Ssla {
    benchmark_id: String,
    floor_ratio: f64,
}

impl Ssla {
    pub fn new(benchmark_id: impl Into<String>, floor_ratio: f64) -> Result<Self> {
        let benchmark_id = benchmark_id.into();
        if !(floor_ratio > 0.0 && floor_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "floor ratio must be in (0, 1], got {floor_ratio}"
            )));
        }
        if benchmark_id.is_empty() || benchmark_id.contains(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!("bad benchmark id {benchmark_id:?}")));
        }
        Ok(Ssla {
            benchmark_id,
            floor_ratio,
        })
    }

    pub fn benchmark_id(&self) -> &str {
        &self.benchmark_id
    }

    pub fn floor_ratio(&self) -> f64 {
        self.floor_ratio
    }

    /// `floor_ratio * nominal`, always recomputed from the bound table.
    pub fn resolved_floor(&self, table: &BenchmarkTable) -> Result<f64> {
        if table.dataset_id() != self.benchmark_id {
            return Err(Error::UnknownBenchmark(self.benchmark_id.clone()));
        }
        Ok(self.floor_ratio * table.nominal_accuracy())
    }

    pub fn to_line(&self) -> String {
        format!(
            "FQI-SSLA v1 benchmark={} floor_ratio={}\n",
            self.benchmark_id,
            fmt_float(self.floor_ratio)
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let line = lines.next().ok_or_else(|| parse_err(1, "empty SSLA record"))?;
        let f = header_fields(line, "FQI-SSLA", &["benchmark", "floor_ratio"], 1)?;
        let ratio: f64 = f[1].parse().map_err(|_| parse_err(1, "bad floor_ratio"))?;
        if lines.next().is_some() {
            return Err(parse_err(2, "trailing content after SSLA record"));
        }
        Ssla::new(f[0], ratio).map_err(|e| parse_err(1, e.to_string()))
    }
}

/// Channel symbols per message for raw FQI bits: `(N/d) * b`.
pub fn fqi_symbol_cost(cfg: &FqiConfig) -> f64 {
    cfg.code_length() as f64
}

/// Size ratio against 32-bit floats: `32 d / b`.
pub fn compression_factor(cfg: &FqiConfig) -> f64 {
    (FLOAT_BITS as usize * cfg.fragment_dim()) as f64 / cfg.bits() as f64
}

/// Smallest grid BER at or above `observed`; never rounds optimistically.
pub fn grid_ber(table: &BenchmarkTable, observed: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&observed) {
        return Err(Error::OutOfRange(observed));
    }
    let grid = table.ber_values();
    let max = *grid.last().ok_or(Error::Empty)?;
    grid.into_iter()
        .find(|&b| b >= observed)
        .ok_or(Error::BerOutOfRange { observed, max })
}

/// A grid `(d, b)` meeting the floor at the rounded BER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub d: usize,
    pub b: u32,
    pub mean_accuracy: f64,
}

/// Every `(d, b)` whose accuracy at the pessimistically rounded BER meets
/// the resolved floor, ordered by `(d, b)`.
pub fn feasible_candidates(
    table: &BenchmarkTable,
    ssla: &Ssla,
    observed_ber: f64,
) -> Result<Vec<Candidate>> {
    let floor = ssla.resolved_floor(table)?;
    let ber = grid_ber(table, observed_ber)?;
    let mut out: Vec<Candidate> = table
        .cells()
        .iter()
        .filter(|c| c.ber == ber && c.mean_accuracy >= floor)
        .map(|c| Candidate {
            d: c.d,
            b: c.b,
            mean_accuracy: c.mean_accuracy,
        })
        .collect();
    out.sort_by_key(|c| (c.d, c.b));
    Ok(out)
}

pub fn feasible_configs(
    table: &BenchmarkTable,
    ssla: &Ssla,
    observed_ber: f64,
) -> Result<Vec<(usize, u32)>> {
    Ok(feasible_candidates(table, ssla, observed_ber)?
        .into_iter()
        .map(|c| (c.d, c.b))
        .collect())
}

/// For each symbol cost reachable at the rounded BER, the most accurate
/// configuration, cheapest first. Ties follow [`select_config`].
pub fn best_per_cost(
    table: &BenchmarkTable,
    observed_ber: f64,
    embedding_dim: usize,
) -> Result<Vec<(FqiConfig, f64)>> {
    let ber = grid_ber(table, observed_ber)?;
    let mut rows: Vec<(FqiConfig, f64)> = table
        .cells()
        .iter()
        .filter(|c| c.ber == ber)
        .filter_map(|c| Some((validate_config(embedding_dim, c.d, c.b).ok()?, c.mean_accuracy)))
        .collect();
    rows.sort_by(|(x, ax), (y, ay)| {
        fqi_symbol_cost(x)
            .total_cmp(&fqi_symbol_cost(y))
            .then(ay.total_cmp(ax))
            .then((x.bits(), x.fragment_dim()).cmp(&(y.bits(), y.fragment_dim())))
    });
    rows.dedup_by(|later, kept| fqi_symbol_cost(&later.0) == fqi_symbol_cost(&kept.0));
    Ok(rows)
}

/// Cheapest feasible configuration for `N`-dimensional embeddings.
///
/// Ties on symbol cost go to higher accuracy, then smaller `b`, then
/// smaller `d`.
pub fn select_config(
    table: &BenchmarkTable,
    ssla: &Ssla,
    observed_ber: f64,
    embedding_dim: usize,
) -> Result<FqiConfig> {
    let mut best: Option<(FqiConfig, f64)> = None;
    for c in feasible_candidates(table, ssla, observed_ber)? {
        let Ok(cfg) = validate_config(embedding_dim, c.d, c.b) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((inc, acc)) => {
                let (cost, inc_cost) = (fqi_symbol_cost(&cfg), fqi_symbol_cost(inc));
                cost < inc_cost
                    || (cost == inc_cost
                        && (c.mean_accuracy > *acc
                            || (c.mean_accuracy == *acc
                                && (c.b, c.d) < (inc.bits(), inc.fragment_dim()))))
            }
        };
        if better {
            best = Some((cfg, c.mean_accuracy));
        }
    }
    best.map(|(cfg, _)| cfg).ok_or(Error::NoFeasibleConfig)
}

/// Channel symbols per message under the three transmission scenarios:
/// UTF-8 text and raw floats over an ideal capacity-achieving code, and raw
/// FQI bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub p_e: f64,
    pub text_bits_per_msg: f64,
    pub embedding_dim: usize,
    pub float_bits: u32,
    pub chosen_config: FqiConfig,
    pub s1_symbols: f64,
    pub s2_symbols: f64,
    pub s3_symbols: f64,
    pub compression_factor_vs_float: f64,
    pub overhead_vs_text: f64,
}

/// Column order of [`ScenarioReport::csv_row`].
pub const REPORT_COLUMNS: [&str; 12] = [
    "p_e",
    "text_bits_per_msg",
    "embedding_dim",
    "float_bits",
    "d",
    "b",
    "s1_symbols",
    "s2_symbols",
    "s3_symbols",
    "compression_factor_vs_float",
    "overhead_vs_text",
    "reduction_vs_float",
];

impl ScenarioReport {
    pub fn for_config(p_e: f64, text_bits: f64, cfg: FqiConfig) -> Result<Self> {
        let n = cfg.embedding_dim();
        let float_payload = (FLOAT_BITS as usize * n) as f64;
        let s1 = errorfree_symbol_cost(text_bits, p_e)?;
        let s2 = errorfree_symbol_cost(float_payload, p_e)?;
        let s3 = fqi_symbol_cost(&cfg);
        Ok(ScenarioReport {
            p_e,
            text_bits_per_msg: text_bits,
            embedding_dim: n,
            float_bits: FLOAT_BITS,
            chosen_config: cfg,
            s1_symbols: s1,
            s2_symbols: s2,
            s3_symbols: s3,
            compression_factor_vs_float: float_payload / s3,
            overhead_vs_text: s3 / s1,
        })
    }

    /// Float-scenario symbols over FQI symbols.
    pub fn reduction_vs_float(&self) -> f64 {
        self.s2_symbols / self.s3_symbols
    }

    fn values(&self) -> [String; 12] {
        [
            fmt_float(self.p_e),
            fmt_float(self.text_bits_per_msg),
            self.embedding_dim.to_string(),
            self.float_bits.to_string(),
            self.chosen_config.fragment_dim().to_string(),
            self.chosen_config.bits().to_string(),
            fmt_float(self.s1_symbols),
            fmt_float(self.s2_symbols),
            fmt_float(self.s3_symbols),
            fmt_float(self.compression_factor_vs_float),
            fmt_float(self.overhead_vs_text),
            fmt_float(self.reduction_vs_float()),
        ]
    }

    pub fn csv_header() -> String {
        REPORT_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().join(",")
    }

    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in REPORT_COLUMNS.iter().zip(self.values()) {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

/// Selects a configuration at `p_e` and compares the three scenarios.
pub fn scenario_report(
    p_e: f64,
    embedding_dim: usize,
    text_bits: f64,
    table: &BenchmarkTable,
    ssla: &Ssla,
) -> Result<ScenarioReport> {
    let cfg = select_config(table, ssla, p_e, embedding_dim)?;
    ScenarioReport::for_config(p_e, text_bits, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::BenchmarkCell;

    fn cell(d: usize, b: u32, ber: f64, acc: f64) -> BenchmarkCell {
        BenchmarkCell {
            d,
            b,
            ber,
            runs: 10,
            mean_accuracy: acc,
            std_accuracy: 0.01,
        }
    }

    fn toy() -> BenchmarkTable {
        // full 2x2 grid at a single BER; (1,2) sits below every floor used here
        BenchmarkTable::new(
            "toy".into(),
            1.0,
            10,
            vec![
                cell(1, 1, 0.1, 0.90),
                cell(2, 1, 0.1, 0.80),
                cell(2, 2, 0.1, 0.95),
                cell(1, 2, 0.1, 0.10),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn symbol_cost_examples() {
        assert_eq!(fqi_symbol_cost(&validate_config(4096, 2, 1).unwrap()), 2048.0);
        assert_eq!(fqi_symbol_cost(&validate_config(4096, 1, 10).unwrap()), 40960.0);
        assert_eq!(fqi_symbol_cost(&validate_config(64, 64, 1).unwrap()), 1.0);
    }

    #[test]
    fn compression_examples() {
        assert_eq!(compression_factor(&validate_config(4096, 2, 1).unwrap()), 64.0);
        assert_eq!(compression_factor(&validate_config(4096, 8, 1).unwrap()), 256.0);
        assert_eq!(compression_factor(&validate_config(4096, 1, 16).unwrap()), 2.0);
    }

    #[test]
    fn best_per_cost_rows() {
        let rows: Vec<_> = best_per_cost(&toy(), 0.05, 4)
            .unwrap()
            .into_iter()
            .map(|(c, a)| (fqi_symbol_cost(&c), c.fragment_dim(), c.bits(), a))
            .collect();
        assert_eq!(rows, vec![(2.0, 2, 1, 0.80), (4.0, 2, 2, 0.95), (8.0, 1, 2, 0.10)]);
    }

    #[test]
    fn toy_feasibility_and_selection() {
        let t = toy();
        let ssla = Ssla::new("toy", 0.85).unwrap();
        assert_eq!(feasible_configs(&t, &ssla, 0.1).unwrap(), vec![(1, 1), (2, 2)]);
        // both cost N; (2,2) has the higher accuracy
        let cfg = select_config(&t, &ssla, 0.1, 8).unwrap();
        assert_eq!((cfg.fragment_dim(), cfg.bits()), (2, 2));
        // (2,2) not admissible for odd N, leaving (1,1)
        let cfg = select_config(&t, &ssla, 0.1, 7).unwrap();
        assert_eq!((cfg.fragment_dim(), cfg.bits()), (1, 1));
    }

    #[test]
    fn floors_at_the_extremes() {
        let t = toy();
        let strict = Ssla::new("toy", 1.0).unwrap();
        assert!(feasible_configs(&t, &strict, 0.1).unwrap().is_empty());
        assert_eq!(select_config(&t, &strict, 0.1, 8), Err(Error::NoFeasibleConfig));
        let lax = Ssla::new("toy", 1e-9).unwrap();
        assert_eq!(feasible_configs(&t, &lax, 0.1).unwrap().len(), 4);
    }

    #[test]
    fn ber_rounds_up() {
        let t = BenchmarkTable::new(
            "g".into(),
            1.0,
            1,
            vec![cell(1, 1, 0.01, 0.99), cell(1, 1, 0.1, 0.5)],
            None,
        )
        .unwrap();
        assert_eq!(grid_ber(&t, 0.0).unwrap(), 0.01);
        assert_eq!(grid_ber(&t, 0.01).unwrap(), 0.01);
        assert_eq!(grid_ber(&t, 0.02).unwrap(), 0.1);
        assert_eq!(
            grid_ber(&t, 0.2),
            Err(Error::BerOutOfRange {
                observed: 0.2,
                max: 0.1
            })
        );
        let ssla = Ssla::new("g", 0.9).unwrap();
        assert_eq!(feasible_configs(&t, &ssla, 0.005).unwrap(), vec![(1, 1)]);
        assert!(feasible_configs(&t, &ssla, 0.05).unwrap().is_empty());
    }

    #[test]
    fn ssla_checks() {
        assert!(Ssla::new("x", 0.0).is_err());
        assert!(Ssla::new("x", 1.01).is_err());
        assert!(Ssla::new("a b", 0.5).is_err());
        let other = Ssla::new("other", 0.5).unwrap();
        assert_eq!(
            feasible_configs(&toy(), &other, 0.1),
            Err(Error::UnknownBenchmark("other".into()))
        );
    }

    #[test]
    fn ssla_record_round_trip() {
        let s = Ssla::new("banking77", 0.95).unwrap();
        assert_eq!(s.to_line(), "FQI-SSLA v1 benchmark=banking77 floor_ratio=0.95\n");
        assert_eq!(Ssla::parse(&s.to_line()).unwrap(), s);
        assert!(Ssla::parse("FQI-SSLA v2 benchmark=x floor_ratio=0.5").is_err());
        assert!(Ssla::parse("FQI-SSLA v1 benchmark=x floor_ratio=1.5").is_err());
    }

    #[test]
    fn report_headline_constants() {
        let r = ScenarioReport::for_config(0.15, 375.1, validate_config(4096, 2, 1).unwrap()).unwrap();
        assert!((r.s1_symbols - 961.401_201_954_874).abs() < 1e-9);
        assert!((r.s2_symbols - 335_944.490_382_909_2).abs() < 1e-6);
        assert_eq!(r.s3_symbols, 2048.0);
        assert!((r.reduction_vs_float() - 164.035_395_694_779_9).abs() < 1e-9);
        assert!((r.overhead_vs_text - 2.130_224_089_418_32).abs() < 1e-12);
        assert_eq!(r.compression_factor_vs_float, 64.0);

        let r0 = ScenarioReport::for_config(0.0, 375.1, validate_config(4096, 2, 1).unwrap()).unwrap();
        assert_eq!(r0.reduction_vs_float(), 64.0);
        assert_eq!(
            ScenarioReport::for_config(0.5, 375.1, validate_config(4096, 2, 1).unwrap()),
            Err(Error::ZeroCapacity)
        );
    }

    #[test]
    fn report_rendering() {
        let r = ScenarioReport::for_config(0.0, 100.0, validate_config(8, 2, 1).unwrap()).unwrap();
        assert_eq!(
            ScenarioReport::csv_header(),
            "p_e,text_bits_per_msg,embedding_dim,float_bits,d,b,s1_symbols,s2_symbols,\
             s3_symbols,compression_factor_vs_float,overhead_vs_text,reduction_vs_float"
        );
        assert_eq!(r.csv_row(), "0,100,8,32,2,1,100,256,4,64,0.04,64");
        assert!(r.to_key_values().contains("\noverhead_vs_text=0.04\n"));
    }
}
