use std::collections::BTreeMap;
use std::path::Path;

use cloudreg::eval::{min_scans_from_outcomes, Regime};
use cloudreg::Stage;

use crate::{BenchError, Result};

pub const RAW_COLUMNS: [&str; 12] = [
    "realization",
    "regime",
    "scan_count",
    "seed",
    "e_t_m",
    "e_r_deg",
    "success",
    "t_feature_ms",
    "t_descr_ms",
    "t_match_ms",
    "t_estim_ms",
    "t_icp_ms",
];

pub const AGGREGATE_COLUMNS: [&str; 6] = ["realization", "regime", "scan_count", "runs", "successes", "success_rate"];

/// One registration of the benchmark grid. `errors` is `None` when the run
/// failed before producing a transform.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub realization: String,
    pub regime: Regime,
    pub scan_count: usize,
    pub seed: u64,
    /// `(e_t` in meters, `e_r` in degrees`)`.
    pub errors: Option<(f64, f64)>,
    pub success: bool,
    /// Milliseconds per stage; present only when timings are recorded.
    pub timings: Option<BTreeMap<Stage, f64>>,
    /// Failure message of a run without a transform.
    pub failure: Option<String>,
}

impl RunRow {
    fn key(&self) -> (&str, Regime, usize, u64) {
        (&self.realization, self.regime, self.scan_count, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub realization: String,
    pub regime: Regime,
    pub scan_count: usize,
    pub runs: usize,
    pub successes: usize,
}

impl AggregateRow {
    pub fn success_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.successes as f64 / self.runs as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TimingStats {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Per (realization, regime): minimal reliable scan count and stage timings.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub realization: String,
    pub regime: Regime,
    pub min_scans: Option<usize>,
    pub timings: Option<BTreeMap<Stage, TimingStats>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    /// Sorted by (realization, regime, scan count, seed).
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<AggregateRow>,
    pub summaries: Vec<Summary>,
    pub reliability: f64,
}

impl BenchmarkReport {
    pub fn from_rows(mut rows: Vec<RunRow>, reliability: f64) -> Self {
        rows.sort_by(|a, b| a.key().cmp(&b.key()));
        let aggregates = aggregate(&rows);
        let summaries = summarize(&rows, &aggregates, reliability);
        Self { rows, aggregates, summaries, reliability }
    }

    pub fn summary(&self, realization: &str, regime: Regime) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.realization == realization && s.regime == regime)
    }

    /// Writes `raw.csv`, `aggregate.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::Io { path: dir.into(), source: e })?;
        write_atomic(&dir.join("raw.csv"), &raw_csv(&self.rows)?)?;
        write_atomic(&dir.join("aggregate.csv"), &aggregate_csv(&self.aggregates)?)?;
        let mut json = serde_json::to_string_pretty(&summary_json(&self.summaries, self.reliability))?;
        json.push('\n');
        write_atomic(&dir.join("summary.json"), json.as_bytes())
    }
}

/// Success counts per (realization, regime, scan count), in row order.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(&str, Regime, usize), (usize, usize)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((&r.realization, r.regime, r.scan_count)).or_default();
        g.0 += 1;
        g.1 += r.success as usize;
    }
    groups
        .into_iter()
        .map(|((realization, regime, scan_count), (runs, successes))| AggregateRow {
            realization: realization.into(),
            regime,
            scan_count,
            runs,
            successes,
        })
        .collect()
}

fn summarize(rows: &[RunRow], aggregates: &[AggregateRow], reliability: f64) -> Vec<Summary> {
    let mut outcomes: BTreeMap<(&str, Regime), BTreeMap<usize, Vec<bool>>> = BTreeMap::new();
    let mut timings: BTreeMap<(&str, Regime), BTreeMap<Stage, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let key = (r.realization.as_str(), r.regime);
        outcomes.entry(key).or_default().entry(r.scan_count).or_default().push(r.success);
        let stages = timings.entry(key).or_default();
        for (stage, ms) in r.timings.iter().flatten() {
            stages.entry(*stage).or_default().push(*ms);
        }
    }
    debug_assert_eq!(aggregates.iter().map(|a| a.runs).sum::<usize>(), rows.len());
    outcomes
        .into_iter()
        .map(|(key, by_count)| {
            let stats: BTreeMap<Stage, TimingStats> =
                timings.remove(&key).unwrap_or_default().into_iter().map(|(s, v)| (s, stats(&v))).collect();
            Summary {
                realization: key.0.into(),
                regime: key.1,
                min_scans: min_scans_from_outcomes(&by_count, reliability),
                timings: (!stats.is_empty()).then_some(stats),
            }
        })
        .collect()
}

fn stats(values: &[f64]) -> TimingStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    TimingStats { mean, std: var.sqrt(), runs: values.len() }
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn raw_csv(rows: &[RunRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RAW_COLUMNS)?;
    for r in rows {
        let (e_t, e_r) = r.errors.map_or((String::new(), String::new()), |(t, d)| (num(t), num(d)));
        let mut record = vec![
            r.realization.clone(),
            r.regime.name().to_string(),
            r.scan_count.to_string(),
            r.seed.to_string(),
            e_t,
            e_r,
            r.success.to_string(),
        ];
        for stage in Stage::ALL {
            record.push(r.timings.as_ref().and_then(|t| t.get(&stage)).map_or(String::new(), |v| num(*v)));
        }
        w.write_record(&record)?;
    }
    w.into_inner().map_err(|e| BenchError::Csv(e.into_error().into()))
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_COLUMNS)?;
    for a in rows {
        w.write_record([
            a.realization.clone(),
            a.regime.name().to_string(),
            a.scan_count.to_string(),
            a.runs.to_string(),
            a.successes.to_string(),
            num(a.success_rate()),
        ])?;
    }
    w.into_inner().map_err(|e| BenchError::Csv(e.into_error().into()))
}

fn summary_json(summaries: &[Summary], reliability: f64) -> serde_json::Value {
    let entries: Vec<serde_json::Value> = summaries
        .iter()
        .map(|s| {
            let timings = s.timings.as_ref().map(|t| {
                t.iter().map(|(stage, st)| (stage.label().to_string(), serde_json::to_value(st).expect("plain struct"))).collect::<serde_json::Map<_, _>>()
            });
            serde_json::json!({
                "realization": s.realization,
                "regime": s.regime.name(),
                "min_scans": s.min_scans.map_or(serde_json::json!("N/A"), |k| serde_json::json!(k)),
                "timings_ms": timings,
            })
        })
        .collect();
    serde_json::json!({ "reliability": reliability, "entries": entries })
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let io = |e| BenchError::Io { path: path.into(), source: e };
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
