//! File formats: dataset ingestion, report CSV/JSON, histogram CSV and
//! matrix dumps.
//!
//! CSV files are comma separated with a header row, UTF-8, `.` as decimal
//! point. Machine-readable floats are written with 17 significant digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadratic::BandedSymmetric;
use crate::sample::Sample1D;
use crate::simulation::{Histogram, SimReport};

/// Relative tolerance on consecutive steps for a file covariate to count as
/// equally spaced.
pub const FILE_SPACING_RTOL: f64 = 1e-9;

/// Steps within this relative tolerance, but not [`FILE_SPACING_RTOL`], are
/// reported as near misses.
pub const NEAR_SPACING_RTOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Equal,
    NearMiss,
    Unequal,
}

/// Classifies sorted `x` by the largest deviation of a step from the mean
/// step. Ties make the design unequal.
pub fn classify_spacing(x: &[f64]) -> Spacing {
    if x.len() < 2 {
        return Spacing::Unequal;
    }
    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    if step <= 0.0 {
        return Spacing::Unequal;
    }
    let dev = x
        .windows(2)
        .map(|w| ((w[1] - w[0]) - step).abs())
        .fold(0.0, f64::max)
        / step;
    if dev <= FILE_SPACING_RTOL {
        Spacing::Equal
    } else if dev <= NEAR_SPACING_RTOL {
        Spacing::NearMiss
    } else {
        Spacing::Unequal
    }
}

/// Float with 17 significant digits; round-trips exactly.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Float with 6 significant digits for human-readable tables.
pub fn fmt_short(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// A numeric CSV table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.is_empty() {
            return Err(Error::Data("missing header row".into()));
        }
        let mut columns = vec![Vec::new(); headers.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::Data(format!(
                    "row {} has {} fields, expected {}",
                    row + 2,
                    record.len(),
                    headers.len()
                )));
            }
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Data(format!(
                        "row {}, column '{}': cannot parse '{field}' as a number",
                        row + 2,
                        headers[col]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "row {}, column '{}': non-finite value",
                        row + 2,
                        headers[col]
                    )));
                }
                columns[col].push(v);
            }
        }
        let rows = columns[0].len();
        if rows < 3 {
            return Err(Error::Data(format!(
                "need at least 3 data rows, got {rows}"
            )));
        }
        Ok(Dataset { headers, columns })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.as_ref().display())))?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Data(format!("no column named '{name}'")))
    }

    /// Columns that are not `exclude`, in file order.
    pub fn other_columns(&self, exclude: &str) -> Vec<&str> {
        self.headers
            .iter()
            .filter(|h| h.as_str() != exclude)
            .map(String::as_str)
            .collect()
    }
}

/// A one-dimensional sample sorted by its covariate.
#[derive(Debug, Clone)]
pub struct SortedSample {
    pub sample: Sample1D,
    /// `order[i]` is the file row of sorted observation `i`.
    pub order: Vec<usize>,
    pub spacing: Spacing,
}

/// Sorts `(x, y)` by `x` (stable) and records the original order.
pub fn sorted_sample(x: &[f64], y: &[f64]) -> Result<SortedSample> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let spacing = classify_spacing(&xs);
    Ok(SortedSample {
        sample: Sample1D::new(xs, ys)?,
        order,
        spacing,
    })
}

impl SortedSample {
    /// The responses on the grid `i/n`; only meaningful for [`Spacing::Equal`].
    pub fn on_unit_grid(&self) -> Result<Sample1D> {
        Sample1D::equally_spaced(self.sample.y().to_vec())
    }
}

/// Covariate vectors built from column blocks. With `rescale`, each block is
/// shifted to start at 0 per column and divided by the block's largest
/// column range, so a single-column block maps onto `[0, 1]` and the
/// geometry inside a multi-column block is preserved.
pub fn covariate_points(
    data: &Dataset,
    blocks: &[Vec<String>],
    rescale: bool,
) -> Result<Vec<Vec<f64>>> {
    let mut points = vec![Vec::new(); data.rows()];
    for block in blocks {
        let cols: Vec<&[f64]> = block
            .iter()
            .map(|name| data.column(name))
            .collect::<Result<_>>()?;
        let (mins, scale) = if rescale {
            let mins: Vec<f64> = cols
                .iter()
                .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
                .collect();
            let range = cols
                .iter()
                .zip(&mins)
                .map(|(c, lo)| c.iter().copied().fold(f64::NEG_INFINITY, f64::max) - lo)
                .fold(0.0, f64::max);
            (mins, if range > 0.0 { range } else { 1.0 })
        } else {
            (vec![0.0; cols.len()], 1.0)
        };
        for (i, p) in points.iter_mut().enumerate() {
            p.extend(cols.iter().zip(&mins).map(|(c, lo)| (c[i] - lo) / scale));
        }
    }
    Ok(points)
}

/// Writes the nonzero entries of `a` as `i,j,value` with 1-based indices.
pub fn write_matrix_csv<W: Write>(a: &BandedSymmetric, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "value"])?;
    for (i, j, v) in a.nonzero_entries() {
        w.write_record([(i + 1).to_string(), (j + 1).to_string(), fmt_full(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub sigma2: f64,
    pub g: String,
    pub estimator: String,
    pub bandwidth_rule: String,
    pub rel_mse: f64,
    pub negative_count: usize,
}

impl From<&SimReport> for ReportRow {
    fn from(r: &SimReport) -> Self {
        ReportRow {
            n: r.n,
            sigma2: r.sigma2,
            g: r.g.clone(),
            estimator: r.estimator.to_string(),
            bandwidth_rule: r.bandwidth_rule.to_string(),
            rel_mse: r.rel_mse,
            negative_count: r.negative_count,
        }
    }
}

pub fn write_reports_csv<W: Write>(reports: &[SimReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "sigma2",
        "g",
        "estimator",
        "bandwidth_rule",
        "rel_mse",
        "negative_count",
    ])?;
    for r in reports.iter().map(ReportRow::from) {
        w.write_record([
            r.n.to_string(),
            fmt_full(r.sigma2),
            r.g,
            r.estimator,
            r.bandwidth_rule,
            fmt_full(r.rel_mse),
            r.negative_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_json<T: Serialize, W: Write>(value: &T, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(input))?)
}

/// `bin_lo,bin_hi,count`.
pub fn write_histogram_csv<W: Write>(h: &Histogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for b in &h.bins {
        w.write_record([fmt_full(b.lo), fmt_full(b.hi), b.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One untruncated estimate per line, in replicate order.
pub fn write_raw_estimates_csv<W: Write>(raw: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "raw_estimate"])?;
    for (r, v) in raw.iter().enumerate() {
        w.write_record([r.to_string(), fmt_full(*v)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::build_tw_matrix;

    #[test]
    fn short_format() {
        assert_eq!(fmt_short(2.0 / 3.0), "0.666667");
        assert_eq!(fmt_short(1234.5678), "1234.57");
        assert_eq!(fmt_short(1.5e-7), "1.50000e-7");
        assert_eq!(fmt_short(0.0), "0");
    }

    #[test]
    fn full_format_round_trips() {
        for x in [0.1, 2.0 / 3.0, 1e-300, -123456.789, std::f64::consts::PI] {
            assert_eq!(fmt_full(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn dataset_parsing() {
        let csv = "x,y\n0.25,1\n0.5,2\n0.75,3\n1.0,4\n";
        let d = Dataset::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(d.rows(), 4);
        assert_eq!(d.column("y").unwrap(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(d.column("z").is_err());
        assert_eq!(d.other_columns("y"), vec!["x"]);
        assert!(Dataset::from_reader("x,y\n1,2\n2,3\n".as_bytes()).is_err());
        assert!(Dataset::from_reader("x,y\n1,2\n2,abc\n3,4\n".as_bytes()).is_err());
        assert!(Dataset::from_reader("x,y\n1,2\n2,NaN\n3,4\n".as_bytes()).is_err());
    }

    #[test]
    fn sorting_keeps_original_order() {
        let s = sorted_sample(&[0.75, 0.25, 1.0, 0.5], &[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(s.order, vec![1, 3, 0, 2]);
        assert_eq!(s.sample.y(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.spacing, Spacing::Equal);
        assert!(s.sample.is_equally_spaced());
        assert!(s.on_unit_grid().unwrap().is_equally_spaced());
    }

    #[test]
    fn spacing_classes() {
        assert_eq!(classify_spacing(&[1990.0, 1991.0, 1992.0]), Spacing::Equal);
        assert_eq!(classify_spacing(&[0.0, 1.0, 2.00001]), Spacing::NearMiss);
        assert_eq!(classify_spacing(&[0.0, 1.0, 3.0]), Spacing::Unequal);
        assert_eq!(classify_spacing(&[0.0, 0.0, 1.0]), Spacing::Unequal);
        assert_eq!(classify_spacing(&[1.0, 1.0, 1.0]), Spacing::Unequal);
    }

    #[test]
    fn rescaling_blocks() {
        let csv = "a,b,c,y\n0,10,5,0\n2,20,5,0\n4,30,7,0\n";
        let d = Dataset::from_reader(csv.as_bytes()).unwrap();
        let blocks = vec![
            vec!["a".to_string()],
            vec!["b".to_string(), "c".to_string()],
        ];
        let p = covariate_points(&d, &blocks, true).unwrap();
        assert_eq!(p[0], vec![0.0, 0.0, 0.0]);
        assert_eq!(p[2], vec![1.0, 1.0, 0.1]);
        let raw = covariate_points(&d, &blocks, false).unwrap();
        assert_eq!(raw[1], vec![2.0, 20.0, 5.0]);
    }

    #[test]
    fn matrix_dump() {
        let mut buf = Vec::new();
        write_matrix_csv(&build_tw_matrix(4, 2).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i,j,value"));
        assert!(lines.next().unwrap().starts_with("1,1,"));
    }
}
