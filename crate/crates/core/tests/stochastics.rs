use std::io::Write;
use std::sync::Arc;

use bipsmc::stochastics::{
    load_dataset, load_dataset_with, rng_stream, sample, validate_dataset, DatasetError, Distribution, ParseMode,
    ReliabilityPolicy, TimeUnit,
};
use tempfile::NamedTempFile;

fn file(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn daily(n: usize, value: impl Fn(usize) -> String) -> String {
    let mut s = String::from("timestamp,value\n");
    for i in 0..n {
        s.push_str(&format!("2016-01-{:02},{}\n", i % 28 + 1, value(i)));
    }
    s
}

#[test]
fn loads_minutes_from_file() {
    let f = file("timestamp,value\n2016-01-01,10\n2016-01-02,9.5\n");
    let ds = load_dataset(f.path(), TimeUnit::Minutes).unwrap();
    assert_eq!(ds.values(), &[600.0, 570.0]);
    assert_eq!(ds.unit(), TimeUnit::Minutes);
    assert_eq!(ds.source_path(), f.path().display().to_string());
}

#[test]
fn strict_load_rejects_nulls_tolerant_counts_them() {
    let f = file("timestamp,value\n2016-01-01,600\n2016-01-02,\n2016-01-03,null\n");
    assert!(load_dataset(f.path(), TimeUnit::Seconds).is_err());
    let ds = load_dataset_with(f.path(), TimeUnit::Seconds, ParseMode::Tolerant).unwrap();
    assert_eq!(ds.null_count(), 2);
    assert_eq!(ds.values(), &[600.0]);
}

#[test]
fn missing_file_reports_path() {
    let err = load_dataset("/definitely/not/here.csv", TimeUnit::Seconds).unwrap_err();
    assert!(matches!(err, DatasetError::Io { .. }));
    assert!(err.to_string().contains("/definitely/not/here.csv"));
}

#[test]
fn reliability_of_short_and_gappy_series() {
    let policy = ReliabilityPolicy::default();
    let short = file(&daily(20, |_| "600".into()));
    let ds = load_dataset(short.path(), TimeUnit::Seconds).unwrap();
    assert!(!validate_dataset(&ds, &policy).reliable);

    let gappy = file("timestamp,value\n2016-01-01,1\n2016-03-01,2\n");
    let ds = load_dataset(gappy.path(), TimeUnit::Seconds).unwrap();
    let lax = ReliabilityPolicy {
        min_rows: 1,
        ..policy
    };
    let report = validate_dataset(&ds, &lax);
    assert!(!report.reliable);
    assert_eq!(report.max_gap_seconds, 60.0 * 86_400.0);
}

#[test]
fn empirical_resamples_file_values() {
    let f = file(&daily(28, |i| (i % 4 * 100).to_string()));
    let ds = Arc::new(load_dataset(f.path(), TimeUnit::Seconds).unwrap());
    let d = Distribution::empirical(ds).unwrap();
    let mut rng = rng_stream(8, 0);
    let mut counts = [0usize; 4];
    let n = 40_000;
    for _ in 0..n {
        let x = sample(&d, &mut rng, &[]).unwrap();
        counts[(x / 100.0) as usize] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() < 0.02, "{counts:?}");
    }
}
