//! Report tables and plot data.
//!
//! `runs.csv` has one row per run followed, for every series, by one
//! `aggregate` row holding the mean over the series' runs. Spread columns
//! (`*_sample_std`) use the n − 1 denominator and are empty on run rows.
//! Absent values are empty cells, never zero.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::aggregate::{Aggregate, BoxStats, Metric};
use super::errors::{estimation_errors, Approach};
use super::grouped::{grouped_comparison, GroupDimension, GroupedComparison};
use super::measures::Source;
use super::AnalysisError;
use crate::model::RunRecord;
use crate::static_energy::co2_equivalents;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub format: ReportFormat,
    pub group: Option<GroupDimension>,
}

/// One line of `runs.csv`. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub row_type: String,
    pub run_id: String,
    pub series_id: String,
    pub run_index: Option<u32>,
    pub label: String,
    pub domain: String,
    pub work_unit: String,
    pub work_unit_scale: u64,
    pub status: String,
    pub started_at: String,
    pub n: usize,
    pub duration_s: Option<f64>,
    pub work_units: Option<u64>,
    pub static_ws: Option<f64>,
    pub dynamic_ws: Option<f64>,
    pub ground_truth_ws: Option<f64>,
    pub truth_uncertainty_ws: Option<f64>,
    pub static_abs_err_ws: Option<f64>,
    pub static_rel_err: Option<f64>,
    pub dynamic_abs_err_ws: Option<f64>,
    pub dynamic_rel_err: Option<f64>,
    pub static_w: Option<f64>,
    pub dynamic_w: Option<f64>,
    pub ground_truth_w: Option<f64>,
    pub static_per_unit_ws: Option<f64>,
    pub dynamic_per_unit_ws: Option<f64>,
    pub ground_truth_per_unit_ws: Option<f64>,
    pub dynamic_coverage: Option<f64>,
    pub co2_kg: Option<f64>,
    /// `measured` when based on ground truth, `estimated` when based on the
    /// dynamic estimate.
    pub co2_basis: String,
    pub static_ws_sample_std: Option<f64>,
    pub dynamic_ws_sample_std: Option<f64>,
    pub ground_truth_ws_sample_std: Option<f64>,
    pub static_rel_err_sample_std: Option<f64>,
    pub dynamic_rel_err_sample_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub label: String,
    pub run_id: String,
    pub static_w: Option<f64>,
    pub dynamic_w: Option<f64>,
    pub ground_truth_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub label: String,
    pub run_id: String,
    pub static_ws: Option<f64>,
    pub dynamic_ws: Option<f64>,
    pub ground_truth_ws: Option<f64>,
    pub ground_truth_per_unit_ws: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub label: String,
    pub run_id: String,
    pub approach: Approach,
    pub absolute_ws: f64,
    pub relative: f64,
    pub magnitude_ws: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRow {
    pub group: String,
    pub metric: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<RunRow>,
    pub power: Vec<PowerRow>,
    pub energy: Vec<EnergyRow>,
    pub errors: Vec<ErrorRow>,
    pub boxplot: Vec<BoxRow>,
    pub grouped: Option<GroupedComparison>,
}

/// Metrics summarized in `boxplot.csv`.
pub const BOX_METRICS: [Metric; 4] = [
    Metric::AveragePower(Source::GroundTruth),
    Metric::PerUnit(Source::GroundTruth),
    Metric::RelativeError(Approach::Static),
    Metric::RelativeError(Approach::Dynamic),
];

fn carbon(record: &RunRecord) -> (Option<f64>, &'static str) {
    let eff = record.environment.co2_efficiency_kg_per_kwh;
    let e = &record.energies;
    match (e.ground_truth_ws, e.dynamic_ws) {
        (Some(t), _) => (co2_equivalents(t, eff).ok().map(|c| c.kg_co2_equiv), "measured"),
        (None, Some(d)) => (co2_equivalents(d, eff).ok().map(|c| c.kg_co2_equiv), "estimated"),
        (None, None) => (None, ""),
    }
}

fn run_row(r: &RunRecord) -> RunRow {
    let v = |m: Metric| m.value(r);
    let (co2_kg, basis) = carbon(r);
    RunRow {
        row_type: "run".into(),
        run_id: r.run_id.clone(),
        series_id: r.series_id.clone().unwrap_or_default(),
        run_index: Some(r.run_index),
        label: r.config.label(),
        domain: r.config.domain_tag.clone(),
        work_unit: r.config.work_unit.to_string(),
        work_unit_scale: r.config.work_unit_scale,
        status: if r.status.is_completed() { "completed" } else { "failed" }.into(),
        started_at: r.started_at.to_string(),
        n: 1,
        duration_s: Some(r.duration_s),
        work_units: Some(r.work_units_completed),
        static_ws: v(Metric::Energy(Source::Static)),
        dynamic_ws: v(Metric::Energy(Source::Dynamic)),
        ground_truth_ws: v(Metric::Energy(Source::GroundTruth)),
        truth_uncertainty_ws: r.energies.truth_uncertainty_ws,
        static_abs_err_ws: v(Metric::AbsoluteError(Approach::Static)),
        static_rel_err: v(Metric::RelativeError(Approach::Static)),
        dynamic_abs_err_ws: v(Metric::AbsoluteError(Approach::Dynamic)),
        dynamic_rel_err: v(Metric::RelativeError(Approach::Dynamic)),
        static_w: v(Metric::AveragePower(Source::Static)),
        dynamic_w: v(Metric::AveragePower(Source::Dynamic)),
        ground_truth_w: v(Metric::AveragePower(Source::GroundTruth)),
        static_per_unit_ws: v(Metric::PerUnit(Source::Static)),
        dynamic_per_unit_ws: v(Metric::PerUnit(Source::Dynamic)),
        ground_truth_per_unit_ws: v(Metric::PerUnit(Source::GroundTruth)),
        dynamic_coverage: r.dynamic_coverage,
        co2_kg,
        co2_basis: basis.into(),
        static_ws_sample_std: None,
        dynamic_ws_sample_std: None,
        ground_truth_ws_sample_std: None,
        static_rel_err_sample_std: None,
        dynamic_rel_err_sample_std: None,
    }
}

fn aggregate_row(series_id: &str, runs: &[&RunRecord]) -> RunRow {
    let agg = |m: Metric| Aggregate::of(&runs.iter().filter_map(|r| m.value(r)).collect::<Vec<_>>());
    let mean = |m: Metric| agg(m).map(|a| a.mean);
    let std = |m: Metric| agg(m).map(|a| a.sample_std);
    let carbon: Vec<(Option<f64>, &str)> = runs.iter().map(|r| carbon(r)).collect();
    let co2 = Aggregate::of(&carbon.iter().filter_map(|c| c.0).collect::<Vec<_>>()).map(|a| a.mean);
    let basis = if carbon.iter().any(|c| c.1 == "estimated") {
        "estimated"
    } else if co2.is_some() {
        "measured"
    } else {
        ""
    };
    let first = runs[0];
    let all_ok = runs.iter().all(|r| r.status.is_completed());
    let uncertainty = Aggregate::of(&runs.iter().filter_map(|r| r.energies.truth_uncertainty_ws).collect::<Vec<_>>());
    let coverage = Aggregate::of(&runs.iter().filter_map(|r| r.dynamic_coverage).collect::<Vec<_>>());
    RunRow {
        row_type: "aggregate".into(),
        run_id: String::new(),
        series_id: series_id.to_string(),
        run_index: None,
        label: first.config.label(),
        domain: first.config.domain_tag.clone(),
        work_unit: first.config.work_unit.to_string(),
        work_unit_scale: first.config.work_unit_scale,
        status: if all_ok { "completed" } else { "partial" }.into(),
        started_at: first.started_at.to_string(),
        n: runs.len(),
        duration_s: mean(Metric::Duration),
        work_units: None,
        static_ws: mean(Metric::Energy(Source::Static)),
        dynamic_ws: mean(Metric::Energy(Source::Dynamic)),
        ground_truth_ws: mean(Metric::Energy(Source::GroundTruth)),
        truth_uncertainty_ws: uncertainty.map(|a| a.mean),
        static_abs_err_ws: mean(Metric::AbsoluteError(Approach::Static)),
        static_rel_err: mean(Metric::RelativeError(Approach::Static)),
        dynamic_abs_err_ws: mean(Metric::AbsoluteError(Approach::Dynamic)),
        dynamic_rel_err: mean(Metric::RelativeError(Approach::Dynamic)),
        static_w: mean(Metric::AveragePower(Source::Static)),
        dynamic_w: mean(Metric::AveragePower(Source::Dynamic)),
        ground_truth_w: mean(Metric::AveragePower(Source::GroundTruth)),
        static_per_unit_ws: mean(Metric::PerUnit(Source::Static)),
        dynamic_per_unit_ws: mean(Metric::PerUnit(Source::Dynamic)),
        ground_truth_per_unit_ws: mean(Metric::PerUnit(Source::GroundTruth)),
        dynamic_coverage: coverage.map(|a| a.mean),
        co2_kg: co2,
        co2_basis: basis.into(),
        static_ws_sample_std: std(Metric::Energy(Source::Static)),
        dynamic_ws_sample_std: std(Metric::Energy(Source::Dynamic)),
        ground_truth_ws_sample_std: std(Metric::Energy(Source::GroundTruth)),
        static_rel_err_sample_std: std(Metric::RelativeError(Approach::Static)),
        dynamic_rel_err_sample_std: std(Metric::RelativeError(Approach::Dynamic)),
    }
}

/// Builds every table in memory.
pub fn build_report(records: &[RunRecord], opts: &ReportOptions) -> Result<Report, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (a.started_at, &a.run_id).cmp(&(b.started_at, &b.run_id)));

    // series in order of first appearance; unlabelled runs form their own
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in &sorted {
        let key = r.series_id.clone().unwrap_or_else(|| r.run_id.clone());
        if !series.contains_key(&key) {
            order.push(key.clone());
        }
        series.entry(key).or_default().push(r);
    }
    let mut runs = Vec::with_capacity(sorted.len() + order.len());
    for key in &order {
        let members = &series[key];
        runs.extend(members.iter().map(|r| run_row(r)));
        runs.push(aggregate_row(key, members));
    }

    let power = sorted
        .iter()
        .map(|r| PowerRow {
            label: r.config.label(),
            run_id: r.run_id.clone(),
            static_w: Metric::AveragePower(Source::Static).value(r),
            dynamic_w: Metric::AveragePower(Source::Dynamic).value(r),
            ground_truth_w: Metric::AveragePower(Source::GroundTruth).value(r),
        })
        .collect();
    let energy = sorted
        .iter()
        .map(|r| EnergyRow {
            label: r.config.label(),
            run_id: r.run_id.clone(),
            static_ws: Some(r.energies.static_ws),
            dynamic_ws: r.energies.dynamic_ws,
            ground_truth_ws: r.energies.ground_truth_ws,
            ground_truth_per_unit_ws: Metric::PerUnit(Source::GroundTruth).value(r),
        })
        .collect();
    let mut errors = Vec::new();
    for r in &sorted {
        if let Ok(e) = estimation_errors(&r.energies) {
            for f in std::iter::once(e.static_).chain(e.dynamic) {
                errors.push(ErrorRow {
                    label: r.config.label(),
                    run_id: r.run_id.clone(),
                    approach: f.approach,
                    absolute_ws: f.absolute_ws,
                    relative: f.relative,
                    magnitude_ws: f.magnitude_ws,
                });
            }
        }
    }

    let mut box_groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in &sorted {
        let key = match &opts.group {
            Some(d) => match d.key_of(r) {
                Some(k) => k,
                None => continue,
            },
            None => r.config.label(),
        };
        box_groups.entry(key).or_default().push(r);
    }
    let mut boxplot = Vec::new();
    for (group, members) in &box_groups {
        for m in BOX_METRICS {
            let values: Vec<f64> = members.iter().filter_map(|r| m.value(r)).collect();
            if let Some(b) = BoxStats::of(&values) {
                boxplot.push(BoxRow {
                    group: group.clone(),
                    metric: m.to_string(),
                    n: b.n,
                    min: b.min,
                    q1: b.q1,
                    median: b.median,
                    q3: b.q3,
                    max: b.max,
                });
            }
        }
    }

    let grouped = opts.group.as_ref().map(|d| grouped_comparison(records, d));
    Ok(Report {
        runs,
        power,
        energy,
        errors,
        boxplot,
        grouped,
    })
}

#[derive(Serialize)]
struct GroupRow<'a> {
    group: &'a str,
    metric: &'a str,
    n: usize,
    mean: f64,
    sample_std: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), AnalysisError> {
    let io = |e: csv::Error| AnalysisError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(io)?;
    // explicit header so empty tables still carry their columns
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| AnalysisError::Io(format!("{}: {e}", path.display())))
}

/// Column names of `runs.csv`, in order.
pub const RUN_COLUMNS: [&str; 35] = [
    "row_type",
    "run_id",
    "series_id",
    "run_index",
    "label",
    "domain",
    "work_unit",
    "work_unit_scale",
    "status",
    "started_at",
    "n",
    "duration_s",
    "work_units",
    "static_ws",
    "dynamic_ws",
    "ground_truth_ws",
    "truth_uncertainty_ws",
    "static_abs_err_ws",
    "static_rel_err",
    "dynamic_abs_err_ws",
    "dynamic_rel_err",
    "static_w",
    "dynamic_w",
    "ground_truth_w",
    "static_per_unit_ws",
    "dynamic_per_unit_ws",
    "ground_truth_per_unit_ws",
    "dynamic_coverage",
    "co2_kg",
    "co2_basis",
    "static_ws_sample_std",
    "dynamic_ws_sample_std",
    "ground_truth_ws_sample_std",
    "static_rel_err_sample_std",
    "dynamic_rel_err_sample_std",
];

/// Writes the report into `out_dir` and returns the files written.
pub fn emit_report(records: &[RunRecord], opts: &ReportOptions, out_dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
    let report = build_report(records, opts)?;
    fs::create_dir_all(out_dir).map_err(|e| AnalysisError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut written = Vec::new();
    match opts.format {
        ReportFormat::Json => {
            let path = out_dir.join("report.json");
            let text = serde_json::to_string_pretty(&report).map_err(|e| AnalysisError::Io(e.to_string()))?;
            fs::write(&path, text).map_err(|e| AnalysisError::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let mut put = |name: &str, f: &dyn Fn(&Path) -> Result<(), AnalysisError>| {
                let path = out_dir.join(name);
                f(&path)?;
                written.push(path);
                Ok::<_, AnalysisError>(())
            };
            put("runs.csv", &|p| write_csv(p, &report.runs, &RUN_COLUMNS))?;
            put("power.csv", &|p| {
                write_csv(p, &report.power, &["label", "run_id", "static_w", "dynamic_w", "ground_truth_w"])
            })?;
            put("energy.csv", &|p| {
                write_csv(
                    p,
                    &report.energy,
                    &["label", "run_id", "static_ws", "dynamic_ws", "ground_truth_ws", "ground_truth_per_unit_ws"],
                )
            })?;
            put("errors.csv", &|p| {
                write_csv(p, &report.errors, &["label", "run_id", "approach", "absolute_ws", "relative", "magnitude_ws"])
            })?;
            put("boxplot.csv", &|p| {
                write_csv(p, &report.boxplot, &["group", "metric", "n", "min", "q1", "median", "q3", "max"])
            })?;
            if let Some(g) = &report.grouped {
                let rows: Vec<GroupRow> = g
                    .groups
                    .iter()
                    .flat_map(|s| {
                        s.metrics.iter().map(|(m, a)| GroupRow {
                            group: &s.key,
                            metric: m,
                            n: a.n,
                            mean: a.mean,
                            sample_std: a.sample_std,
                        })
                    })
                    .collect();
                put("grouped.csv", &|p| write_csv(p, &rows, &["group", "metric", "n", "mean", "sample_std"]))?;
                put("ratios.csv", &|p| write_csv(p, &g.ratios, &["metric", "numerator", "denominator", "ratio"]))?;
                let excluded: Vec<[&str; 1]> = g.excluded.iter().map(|r| [r.as_str()]).collect();
                put("excluded.csv", &|p| write_csv(p, &excluded, &["run_id"]))?;
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::test_support::record;

    fn series(n: usize) -> Vec<RunRecord> {
        (0..n)
            .map(|i| {
                let mut r = record(36_000.0, Some(27_000.0 + i as f64), Some(30_000.0 + 100.0 * i as f64), 120.0);
                r.run_id = format!("r{i}");
                r.run_index = i as u32;
                r.series_id = Some("s1".into());
                r.started_at = r.started_at.offset_secs(200.0 * i as f64);
                r.ended_at = r.started_at.offset_secs(120.0);
                r
            })
            .collect()
    }

    #[test]
    fn three_runs_plus_aggregate() {
        let rep = build_report(&series(3), &ReportOptions::default()).unwrap();
        assert_eq!(rep.runs.len(), 4);
        let agg = &rep.runs[3];
        assert_eq!(agg.row_type, "aggregate");
        assert_eq!(agg.n, 3);
        assert!((agg.ground_truth_ws.unwrap() - 30_100.0).abs() < 1e-9);
        assert!((agg.ground_truth_ws_sample_std.unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(agg.static_w, Some(300.0));
    }

    #[test]
    fn missing_truth_leaves_cells_empty() {
        let r = record(36_000.0, Some(30_000.0), None, 120.0);
        let rep = build_report(&[r], &ReportOptions::default()).unwrap();
        let row = &rep.runs[0];
        assert_eq!(row.static_rel_err, None);
        assert_eq!(row.co2_basis, "estimated");
        assert!(rep.errors.is_empty());

        let dir = tempfile::tempdir().unwrap();
        emit_report(&[record(36_000.0, Some(30_000.0), None, 120.0)], &ReportOptions::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().unwrap().clone();
        let idx = headers.iter().position(|h| h == "static_rel_err").unwrap();
        let first = rdr.records().next().unwrap().unwrap();
        assert_eq!(&first[idx], "");
    }

    #[test]
    fn csv_and_json_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ReportOptions {
            format: ReportFormat::Csv,
            group: Some(GroupDimension::ProcessorKind),
        };
        let files = emit_report(&series(3), &opts, dir.path()).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        for f in ["runs.csv", "power.csv", "energy.csv", "errors.csv", "boxplot.csv", "grouped.csv", "ratios.csv"] {
            assert!(names.contains(&f.to_string()), "{f} missing from {names:?}");
        }
        let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
        assert_eq!(runs.lines().count(), 5);
        assert!(runs.lines().next().unwrap().starts_with("row_type,run_id,series_id"));

        let files = emit_report(
            &series(2),
            &ReportOptions {
                format: ReportFormat::Json,
                group: None,
            },
            dir.path(),
        )
        .unwrap();
        let rep: Report = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(rep.runs.len(), 3);
    }

    #[test]
    fn boxplot_matches_nearest_rank() {
        let rep = build_report(&series(3), &ReportOptions::default()).unwrap();
        let b = rep.boxplot.iter().find(|b| b.metric == "ground_truth_w").unwrap();
        let mut w: Vec<f64> = (0..3).map(|i| (30_000.0 + 100.0 * i as f64) / 120.0).collect();
        w.sort_by(f64::total_cmp);
        assert_eq!((b.min, b.median, b.max), (w[0], w[1], w[2]));
    }

    #[test]
    fn column_list_matches_row() {
        let row = run_row(&record(1.0, None, None, 1.0));
        let v = serde_json::to_value(row).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, RUN_COLUMNS);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(build_report(&[], &ReportOptions::default()), Err(AnalysisError::Empty)));
    }
}
