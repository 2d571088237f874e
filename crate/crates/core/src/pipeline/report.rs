//! Report files.
//!
//! Layout of an output directory:
//!
//! ```text
//! summary.csv   key,value rows
//! curve.csv     k,test_mce            (filter grid; header only for wrapper runs)
//! ecdf.csv      p,cumulative          (training-set p-values)
//! trace.csv     step,feature,size,cv_mean,fold1..foldK (header only for filter runs)
//! plots/ecdf.svg, plots/curve.svg, plots/trace.svg
//! ```
//!
//! Floats are written in shortest round-trip form (exponent notation below
//! 1e-4), except the summary's `final_test_mce`, which is rounded to four
//! decimals. Nothing time- or
//! machine-dependent is written, so equal reports give equal bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use itertools::Itertools;

use super::svg::LineChart;
use super::{ExperimentKind, ExperimentReport};
use crate::{Error, Result};

/// Writes every report file under `out_dir`, creating it if needed.
pub fn emit_report(report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    let plots = out_dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| io_error(&plots, e))?;

    write_file(&out_dir.join("summary.csv"), &csv_rows(summary_rows(report)))?;
    write_file(&out_dir.join("curve.csv"), &curve_csv(report))?;
    write_file(&out_dir.join("ecdf.csv"), &ecdf_csv(report))?;
    write_file(&out_dir.join("trace.csv"), &trace_csv(report))?;

    let ecdf: Vec<(f64, f64)> = report.ecdf.points().collect();
    let curve: Vec<(f64, f64)> = report
        .filter_curve
        .iter()
        .map(|p| (p.k as f64, p.test_mce))
        .collect();
    let trace: Vec<(f64, f64)> = report
        .trace
        .iter()
        .flat_map(|t| &t.steps)
        .map(|s| (s.subset.len() as f64, s.score))
        .collect();
    let charts = [
        ("ecdf.svg", LineChart {
            title: "Empirical CDF of training-set p-values",
            x_label: "p-value",
            y_label: "cumulative fraction",
            points: &ecdf,
            steps: true,
        }),
        ("curve.svg", LineChart {
            title: "Test error of the top-k ranked features",
            x_label: "k",
            y_label: "test MCE",
            points: &curve,
            steps: false,
        }),
        ("trace.svg", LineChart {
            title: "Cross-validated error along the search",
            x_label: "subset size",
            y_label: "CV MCE",
            points: &trace,
            steps: false,
        }),
    ];
    for (name, chart) in charts {
        write_file(&plots.join(name), chart.render().as_bytes())?;
    }
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    file.write_all(bytes).map_err(|e| io_error(path, e))
}

/// Shortest round-trip text; exponent form for small magnitudes so tiny
/// p-values do not turn into long runs of zeros.
fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn csv_rows<R, S>(rows: impl IntoIterator<Item = R>) -> Vec<u8>
where
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for row in rows {
        // writing to memory cannot fail
        w.write_record(row).expect("in-memory CSV write");
    }
    w.into_inner().expect("in-memory CSV flush")
}

fn summary_rows(r: &ExperimentReport) -> Vec<[String; 2]> {
    let cfg = &r.config;
    let names = |ids: &[usize]| ids.iter().map(|&f| r.feature_names[f].as_str()).join(";");
    let counts = |c: &[usize]| c.iter().join(";");
    let min_p = r.ttests.iter().map(|t| t.p).fold(f64::INFINITY, f64::min);
    let mut rows: Vec<(&str, String)> = vec![
        ("experiment", r.experiment.to_string()),
        ("data", r.data_description.clone()),
        ("n_obs", r.n_obs.to_string()),
        ("n_features", r.n_features.to_string()),
        ("classes", r.class_names.join(";")),
        ("seed", cfg.seed.to_string()),
        ("holdout", if cfg.stratified { "stratified" } else { "random" }.into()),
        ("train_count", r.split.train.len().to_string()),
        ("test_count", r.split.test.len().to_string()),
        ("train_class_counts", counts(&r.train_class_counts)),
        ("test_class_counts", counts(&r.test_class_counts)),
        ("classifier", cfg.classifier.to_string()),
        ("ridge", num(cfg.ridge)),
        ("ttest", format!("{:?}", cfg.ttest).to_lowercase()),
        ("feasibility_bound", r.feasibility_bound.to_string()),
        ("pvalues_below_0.05", r.pvalues_below(0.05).to_string()),
        ("pvalues_below_0.01", r.pvalues_below(0.01).to_string()),
        ("min_pvalue", if min_p.is_finite() { num(min_p) } else { String::new() }),
        ("top_ranked", names(&r.ranking[..r.ranking.len().min(10)])),
    ];
    match r.experiment {
        ExperimentKind::Filter => {
            rows.push(("grid", cfg.filter_grid.iter().join(";")));
        }
        ExperimentKind::Wrapper => {
            rows.push(("folds", cfg.folds.to_string()));
            rows.push(("prefilter_k", cfg.prefilter_k.to_string()));
            rows.push(("stop", cfg.stop.mode.to_string()));
            rows.push(("max_size", cfg.stop.max_size.to_string()));
        }
    }
    if let Some(trace) = &r.trace {
        rows.push(("stop_reason", trace.stop_reason.to_string()));
        rows.push(("steps", trace.steps.len().to_string()));
        rows.push(("selected_cv_mce", num(trace.selected_score())));
    }
    rows.extend([
        ("selected_count", r.selected_features.len().to_string()),
        ("selected_features", names(&r.selected_features)),
        ("selected_indices", r.selected_features.iter().join(";")),
        ("final_test_errors", r.final_test_errors.to_string()),
        ("final_test_mce", format!("{:.4}", r.final_test_mce)),
    ]);
    std::iter::once(["key".to_string(), "value".to_string()])
        .chain(rows.into_iter().map(|(k, v)| [k.to_string(), v]))
        .collect()
}

fn curve_csv(r: &ExperimentReport) -> Vec<u8> {
    let header = vec!["k".to_string(), "test_mce".to_string()];
    csv_rows(
        std::iter::once(header).chain(
            r.filter_curve
                .iter()
                .map(|p| vec![p.k.to_string(), num(p.test_mce)]),
        ),
    )
}

fn ecdf_csv(r: &ExperimentReport) -> Vec<u8> {
    let header = vec!["p".to_string(), "cumulative".to_string()];
    csv_rows(std::iter::once(header).chain(r.ecdf.points().map(|(p, c)| vec![num(p), num(c)])))
}

fn trace_csv(r: &ExperimentReport) -> Vec<u8> {
    let folds = r
        .trace
        .as_ref()
        .and_then(|t| t.steps.first())
        .map_or(r.config.folds, |s| s.per_fold.len());
    let header: Vec<String> = ["step", "feature", "size", "cv_mean"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=folds).map(|i| format!("fold{i}")))
        .collect();
    let steps = r.trace.iter().flat_map(|t| t.steps.iter().enumerate());
    csv_rows(std::iter::once(header).chain(steps.map(|(i, s)| {
        [
            (i + 1).to_string(),
            s.feature.map(|f| r.feature_names[f].clone()).unwrap_or_default(),
            s.subset.len().to_string(),
            num(s.score),
        ]
        .into_iter()
        .chain(s.per_fold.iter().map(|&v| num(v)))
        .collect::<Vec<_>>()
    })))
}
