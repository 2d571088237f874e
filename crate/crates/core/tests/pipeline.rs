use std::path::Path;

use featsel::dataset::{synthetic_gaussian, CovarianceMode, LabelColumn, SyntheticSpec};
use featsel::pipeline::{
    emit_report, recompute_test_mce, run_filter_experiment, run_wrapper_experiment, DataSource, PipelineConfig,
};
use featsel::selection::{StopMode, StopRule};
use featsel::DiscriminantKind;

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_per_class: (40, 50),
        n_features: 60,
        informative: vec![2, 17, 33],
        delta: 1.5,
        covariance: CovarianceMode::Identity,
        seed,
    }
}

fn summary(dir: &Path) -> Vec<(String, String)> {
    let mut reader = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].to_string())
        })
        .collect()
}

fn lookup<'a>(rows: &'a [(String, String)], key: &str) -> &'a str {
    &rows.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no {key}")).1
}

#[test]
fn csv_source_matches_in_memory_source() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let spec = small_spec(3);
    synthetic_gaussian(&spec).unwrap().save_csv(&path, "y").unwrap();

    let mut from_file = PipelineConfig::new(DataSource::Csv { path, label: LabelColumn::Name("y".into()) });
    from_file.filter_grid = vec![1, 2, 3, 5, 8];
    let mut in_memory = from_file.clone();
    in_memory.data = DataSource::Synthetic(spec);

    let a = run_filter_experiment(&from_file).unwrap();
    let b = run_filter_experiment(&in_memory).unwrap();
    assert_eq!(a.ranking, b.ranking);
    assert_eq!(a.filter_curve, b.filter_curve);
    assert_eq!(a.selected_features, b.selected_features);
}

#[test]
fn summary_agrees_with_recomputed_error() {
    let spec = small_spec(8);
    let mut cfg = PipelineConfig::new(DataSource::Synthetic(spec.clone()));
    cfg.prefilter_k = 20;
    cfg.folds = 5;
    cfg.classifier = DiscriminantKind::Linear;
    let report = run_wrapper_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();

    let rows = summary(dir.path());
    let indices: Vec<usize> = lookup(&rows, "selected_indices")
        .split(';')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(indices, report.selected_features);
    let ds = synthetic_gaussian(&spec).unwrap();
    let again = recompute_test_mce(&report, &ds, &indices).unwrap();
    assert_eq!(lookup(&rows, "final_test_mce"), format!("{again:.4}"));
    assert_eq!(lookup(&rows, "experiment"), "wrapper");
    assert_eq!(lookup(&rows, "train_count"), "67");

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let steps = report.trace.as_ref().unwrap().steps.len();
    assert_eq!(trace.lines().count(), steps + 1);
    assert!(trace.starts_with("step,feature,size,cv_mean,fold1,fold2,fold3,fold4,fold5\n"));
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(curve, "k,test_mce\n");
}

#[test]
fn filter_run_emits_header_only_trace_and_full_curve() {
    let mut cfg = PipelineConfig::new(DataSource::Synthetic(small_spec(1)));
    cfg.filter_grid = vec![1, 2, 4, 8];
    let report = run_filter_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let ks: Vec<&str> = curve.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["1", "2", "4", "8"]);
    let ecdf = std::fs::read_to_string(dir.path().join("ecdf.csv")).unwrap();
    assert_eq!(ecdf.lines().count(), 61);
    for plot in ["ecdf", "curve", "trace"] {
        let svg = std::fs::read_to_string(dir.path().join(format!("plots/{plot}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let mut cfg = PipelineConfig::new(DataSource::Synthetic(small_spec(5)));
    cfg.prefilter_k = 15;
    cfg.folds = 4;
    cfg.stop = StopRule::new(StopMode::RangeMin, 6);
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<_> = [Some(1), Some(3), None]
        .into_iter()
        .enumerate()
        .map(|(i, threads)| {
            let mut c = cfg.clone();
            c.threads = threads;
            let out = dir.path().join(i.to_string());
            emit_report(&run_wrapper_experiment(&c).unwrap(), &out).unwrap();
            out
        })
        .collect();
    for name in ["summary.csv", "curve.csv", "ecdf.csv", "trace.csv", "plots/ecdf.svg", "plots/curve.svg", "plots/trace.svg"] {
        let first = std::fs::read(outs[0].join(name)).unwrap();
        for other in &outs[1..] {
            assert_eq!(first, std::fs::read(other.join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn seed_changes_split() {
    let mut cfg = PipelineConfig::new(DataSource::Synthetic(small_spec(5)));
    cfg.filter_grid = vec![1, 2];
    let a = run_filter_experiment(&cfg).unwrap();
    cfg.seed = 1;
    let b = run_filter_experiment(&cfg).unwrap();
    assert_ne!(a.split.train, b.split.train);
    assert_eq!(a.train_class_counts, b.train_class_counts);
}
