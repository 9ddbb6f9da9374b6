use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use log::info;
use varfit::analytics::MeanFunction;
use varfit::estimators::BandwidthRule;
use varfit::io::{fmt_short, write_histogram_csv, write_json, write_reports_csv};
use varfit::simulation::{histogram, run_cell, run_table1, EstimatorKind, SimConfig, SimReport};

use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run all 18 settings with the four benchmark estimator columns.
    #[arg(long, conflicts_with = "cell")]
    table1: bool,
    /// One cell: "n,sigma2,g,estimator,rule", e.g. "30,0.25,g3,ms,sqrt".
    #[arg(long)]
    cell: Option<String>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Confidence level parameter for coverage, using the true kurtosis.
    #[arg(long)]
    alpha: Option<f64>,
    /// Report path; CSV is written here and JSON next to it. Without it the
    /// CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a histogram of the untruncated estimates (single cell).
    #[arg(long, requires = "cell")]
    histogram: bool,
    #[arg(long, default_value_t = 30)]
    bins: usize,
}

fn parse_cell(cell: &str) -> CliResult<SimConfig> {
    let fields: Vec<&str> = cell.split(',').map(str::trim).collect();
    let bad = |what: &str| CliError::Usage(format!("invalid cell '{cell}': {what}"));
    if fields.len() != 5 {
        return Err(bad("expected n,sigma2,g,estimator,rule"));
    }
    let n: usize = fields[0].parse().map_err(|_| bad("n is not an integer"))?;
    let sigma2: f64 = fields[1]
        .parse()
        .map_err(|_| bad("sigma2 is not a number"))?;
    let mean: MeanFunction = fields[2].parse().map_err(|e| bad(&format!("{e}")))?;
    let estimator: EstimatorKind = fields[3].parse().map_err(|e| bad(&format!("{e}")))?;
    let rule: BandwidthRule = fields[4].parse().map_err(|e| bad(&format!("{e}")))?;
    Ok(SimConfig::new(n, sigma2, mean, estimator, rule))
}

fn sibling(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn print_summary(reports: &[SimReport]) {
    eprintln!(
        "{:>6} {:>6} {:>4} {:>4} {:>7} {:>4} {:>10} {:>5}",
        "n", "sigma2", "g", "est", "rule", "bw", "rel_mse", "neg"
    );
    for r in reports {
        eprintln!(
            "{:>6} {:>6} {:>4} {:>4} {:>7} {:>4} {:>10} {:>5}",
            r.n,
            r.sigma2,
            r.g,
            r.estimator.to_string(),
            r.bandwidth_rule.to_string(),
            r.bandwidth,
            fmt_short(r.rel_mse),
            r.negative_count
        );
    }
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let (reports, hist) = if args.table1 {
        if args.alpha.is_some() {
            return Err(CliError::Usage("--alpha applies to --cell only".into()));
        }
        info!(
            "running 18 settings x 4 estimators, {} replicates",
            args.reps
        );
        (run_table1(args.seed, args.reps)?.cells, None)
    } else if let Some(cell) = &args.cell {
        let mut config = parse_cell(cell)?
            .reps(args.reps)
            .seed(args.seed)
            .keep_raw(args.histogram);
        if let Some(alpha) = args.alpha {
            config = config.alpha(alpha);
        }
        let report = run_cell(&config)?;
        let hist = if args.histogram {
            if args.bins == 0 {
                return Err(CliError::Usage("--bins must be at least 1".into()));
            }
            report
                .raw_estimates
                .as_deref()
                .map(|raw| histogram(raw, args.bins))
        } else {
            None
        };
        (vec![report], hist)
    } else {
        return Err(CliError::Usage(
            "one of --table1 or --cell is required".into(),
        ));
    };

    match &args.out {
        Some(out) => {
            write_reports_csv(&reports, File::create(out)?)?;
            write_json(&reports, File::create(out.with_extension("json"))?)?;
            if let Some(h) = &hist {
                let path = sibling(out, "_histogram", "csv");
                write_histogram_csv(h, File::create(&path)?)?;
                eprintln!(
                    "histogram: {} ({} of {} estimates negative)",
                    path.display(),
                    h.negative_count,
                    h.raw.len()
                );
            }
            print_summary(&reports);
        }
        None => {
            write_reports_csv(&reports, std::io::stdout())?;
            if let Some(h) = &hist {
                println!();
                write_histogram_csv(h, std::io::stdout())?;
            }
        }
    }
    Ok(())
}
