use std::fs::File;

use varfit::analytics::MeanFunction;
use varfit::estimators::BandwidthRule;
use varfit::io::{
    read_json, read_reports_csv, write_histogram_csv, write_json, write_matrix_csv,
    write_reports_csv, Dataset, ReportRow,
};
use varfit::simulation::{histogram, run_cell, EstimatorKind, SimConfig, SimReport};
use varfit::{build_ms_matrix, Error};

fn report() -> SimReport {
    let config = SimConfig::new(
        30,
        0.25,
        MeanFunction::G3,
        EstimatorKind::Ms,
        BandwidthRule::Sqrt,
    )
    .reps(200)
    .seed(3)
    .alpha(0.1)
    .keep_raw(true);
    run_cell(&config).unwrap()
}

#[test]
fn report_json_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let original = vec![report()];
    write_json(&original, File::create(&path).unwrap()).unwrap();
    let back: Vec<SimReport> = read_json(File::open(&path).unwrap()).unwrap();
    assert_eq!(back, original);
}

#[test]
fn report_csv_round_trips() {
    let r = report();
    let mut buf = Vec::new();
    write_reports_csv(std::slice::from_ref(&r), &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("n,sigma2,g,estimator,bandwidth_rule,rel_mse,negative_count\n"));
    let rows = read_reports_csv(buf.as_slice()).unwrap();
    assert_eq!(rows, vec![ReportRow::from(&r)]);
}

#[test]
fn histogram_csv_lists_every_bin() {
    let r = report();
    let h = histogram(r.raw_estimates.as_deref().unwrap(), 12);
    let mut buf = Vec::new();
    write_histogram_csv(&h, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "bin_lo,bin_hi,count");
    assert_eq!(lines.len(), 13);
    let total: usize = lines[1..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 200);
}

#[test]
fn matrix_dump_reproduces_entries() {
    let m = build_ms_matrix(12, 4).unwrap();
    let mut buf = Vec::new();
    write_matrix_csv(&m, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut count = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (i, j): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let v: f64 = f[2].parse().unwrap();
        assert_eq!(v, m.entry(i - 1, j - 1));
        assert_eq!(m.entry(i - 1, j - 1), m.entry(j - 1, i - 1));
        count += 1;
    }
    let nonzero = (0..12)
        .flat_map(|i| (0..12).map(move |j| (i, j)))
        .filter(|&(i, j)| m.entry(i, j) != 0.0)
        .count();
    assert_eq!(count, nonzero);
}

#[test]
fn dataset_errors_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x,y\n1,2\n2,inf\n3,4\n").unwrap();
    assert!(matches!(Dataset::read(&path), Err(Error::Data(_))));
    std::fs::write(&path, "x,y\n1,2\n2,3,4\n3,4\n").unwrap();
    assert!(Dataset::read(&path).is_err());
    assert!(matches!(
        Dataset::read(dir.path().join("missing.csv")),
        Err(Error::Data(_))
    ));
}
