use std::path::PathBuf;

use clap::{Args, ValueEnum};
use log::warn;
use serde::Serialize;
use varfit::estimators::{pair_threshold_for_lags, BandwidthRule};
use varfit::io::{covariate_points, fmt_short, sorted_sample, write_json, Dataset, Spacing};
use varfit::{
    build_ms_matrix, build_tw_matrix, chi_square_df, confidence_interval, estimate_gamma4,
    general_domain, muller_stadtmuller, rice, tong_wang, LsMethod, VarianceEstimate,
};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Tw,
    Ms,
    Rice,
    General,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Response column.
    #[arg(long)]
    response: String,
    /// Covariate columns, e.g. "a,b;c" where ';' separates rescaling blocks.
    /// Defaults to every other column.
    #[arg(long)]
    covariates: Option<String>,
    #[arg(long, value_enum, default_value = "tw")]
    method: MethodArg,
    /// auto, sqrt, cbrt or a lag count.
    #[arg(long, default_value = "auto")]
    bandwidth: String,
    /// Squared-distance threshold for the general method; overrides --bandwidth.
    #[arg(long)]
    threshold: Option<f64>,
    /// Report a 1 − alpha confidence interval.
    #[arg(long)]
    alpha: Option<f64>,
    /// Kurtosis for the interval: a value, or "estimate".
    #[arg(long, default_value = "3")]
    gamma4: String,
    /// Map each covariate block onto [0, 1] before computing distances.
    #[arg(long)]
    rescale: bool,
    /// Print the estimate as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize)]
struct EstimateOutput {
    n: usize,
    method: String,
    gamma4: Option<f64>,
    estimate: VarianceEstimate,
}

fn parse_blocks(text: &str) -> CliResult<Vec<Vec<String>>> {
    let blocks: Vec<Vec<String>> = text
        .split(';')
        .map(|b| {
            b.split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect::<Vec<_>>()
        })
        .filter(|b| !b.is_empty())
        .collect();
    if blocks.is_empty() {
        return Err(CliError::Usage("--covariates names no columns".into()));
    }
    Ok(blocks)
}

fn parse_rule(s: &str) -> CliResult<BandwidthRule> {
    match s.parse::<BandwidthRule>() {
        Ok(BandwidthRule::Optimal) | Err(_) => Err(CliError::Usage(format!(
            "--bandwidth must be auto, sqrt, cbrt or a lag count, got '{s}'"
        ))),
        Ok(rule) => Ok(rule),
    }
}

pub fn run(args: EstimateArgs) -> CliResult<()> {
    let data = Dataset::read(&args.input)?;
    let y = data.column(&args.response)?.to_vec();
    let blocks = match &args.covariates {
        Some(text) => parse_blocks(text)?,
        None => {
            let others = data.other_columns(&args.response);
            if others.is_empty() {
                return Err(CliError::Usage("dataset has no covariate column".into()));
            }
            vec![others.into_iter().map(String::from).collect()]
        }
    };
    let rule = parse_rule(&args.bandwidth)?;
    let n = y.len();
    let dim: usize = blocks.iter().map(Vec::len).sum();

    // 1-D designs on an equally spaced grid go through the lag statistics.
    let mut method = args.method;
    let mut grid_sample = None;
    if dim == 1 && method != MethodArg::General {
        let x = data.column(&blocks[0][0])?;
        let sorted = sorted_sample(x, &y)?;
        match sorted.spacing {
            Spacing::Equal => grid_sample = Some(sorted.on_unit_grid()?),
            spacing => {
                let what = if spacing == Spacing::NearMiss {
                    "nearly but not exactly equally spaced"
                } else {
                    "not equally spaced"
                };
                if method == MethodArg::Tw {
                    warn!(
                        "covariate '{}' is {what}; using the general pairwise estimator",
                        blocks[0][0]
                    );
                    method = MethodArg::General;
                } else {
                    return Err(varfit::Error::Data(format!(
                        "method {:?} requires an equally spaced covariate; '{}' is {what}",
                        method, blocks[0][0]
                    ))
                    .into());
                }
            }
        }
    } else if method != MethodArg::General {
        if method == MethodArg::Tw {
            warn!("{dim} covariates; using the general pairwise estimator");
            method = MethodArg::General;
        } else {
            return Err(varfit::Error::Data(format!(
                "method {method:?} needs exactly one covariate, got {dim}"
            ))
            .into());
        }
    }

    let min_bw = match method {
        MethodArg::Ms => 3,
        MethodArg::Tw => 2,
        _ => 1,
    };
    let mut est = match (method, &grid_sample) {
        (MethodArg::Tw, Some(s)) => {
            let m = rule.resolve(n, min_bw, None)?;
            let mut e = tong_wang(s, m, LsMethod::Wls)?;
            e.df = Some(chi_square_df(&build_tw_matrix(n, m)?)?);
            e
        }
        (MethodArg::Ms, Some(s)) => {
            let l = rule.resolve(n, min_bw, None)?;
            let mut e = muller_stadtmuller(s, l)?;
            if 2 * l <= n {
                e.df = Some(chi_square_df(&build_ms_matrix(n, l)?)?);
            }
            e
        }
        (MethodArg::Rice, Some(s)) => rice(s)?,
        _ => {
            let points = covariate_points(&data, &blocks, args.rescale)?;
            let threshold = match args.threshold {
                Some(t) => t,
                None => pair_threshold_for_lags(&points, rule.resolve(n, 2, None)?)?,
            };
            general_domain(&points, &y, threshold)?
        }
    };

    let mut gamma4_used = None;
    if let Some(alpha) = args.alpha {
        let gamma4 = if args.gamma4.trim().eq_ignore_ascii_case("estimate") {
            let sample = match &grid_sample {
                Some(s) => s.clone(),
                None if dim == 1 => sorted_sample(data.column(&blocks[0][0])?, &y)?.sample,
                None => {
                    return Err(CliError::Usage(
                        "--gamma4 estimate needs a single covariate".into(),
                    ))
                }
            };
            estimate_gamma4(&sample, est.value)?
        } else {
            args.gamma4.trim().parse::<f64>().map_err(|_| {
                CliError::Usage(format!(
                    "--gamma4 must be a number or 'estimate', got '{}'",
                    args.gamma4
                ))
            })?
        };
        est.ci = Some(confidence_interval(&est, gamma4, n, alpha)?);
        gamma4_used = Some(gamma4);
    }

    if args.json {
        let out = EstimateOutput {
            n,
            method: est.method.to_string(),
            gamma4: gamma4_used,
            estimate: est,
        };
        write_json(&out, std::io::stdout())?;
    } else {
        println!("method     {}", est.method);
        println!("n          {n}");
        if let Some(bw) = est.bandwidth {
            println!("bandwidth  {bw}");
        }
        println!("sigma2     {}", fmt_short(est.value));
        if est.truncated {
            println!(
                "raw        {} (negative, truncated to 0)",
                fmt_short(est.raw_value)
            );
        }
        if let Some(df) = est.df {
            println!("df         {}", fmt_short(df));
        }
        if let (Some(ci), Some(g4)) = (est.ci, gamma4_used) {
            println!(
                "ci         [{}, {}] (level {}, gamma4 {})",
                fmt_short(ci.lo),
                fmt_short(ci.hi),
                fmt_short(1.0 - ci.alpha),
                fmt_short(g4)
            );
        }
    }
    Ok(())
}
