use std::fs::File;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use varfit::analytics::{
    asymptotic_mse_ms, check_identities, optimal_l, optimal_l_real, optimal_mse_comparison,
    IdentityReport, MeanFunction, OptimalMseComparison,
};
use varfit::estimators::BandwidthRule;
use varfit::io::{write_json, write_matrix_csv};
use varfit::{
    build_ms_matrix, build_tw_matrix, chi_square_df, exact_mse, traces, ExactMoments, NoiseMoments,
    Traces,
};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixArg {
    Tw,
    Ms,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma3: f64,
    #[arg(long, default_value_t = 3.0)]
    gamma4: f64,
    /// Mean function on the grid i/n: g1, g2, g3 or zero.
    #[arg(long, default_value = "zero")]
    mean: String,
    #[arg(long, value_enum, default_value = "ms")]
    method: MatrixArg,
    /// Lag count, sqrt, cbrt or optimal (ms only).
    #[arg(long, default_value = "sqrt")]
    bandwidth: String,
    /// Use the asymptotically optimal L (ms only); overrides --bandwidth.
    #[arg(long = "optimal-L")]
    optimal_l: bool,
    /// Include the coefficient and trace identity report at this bandwidth.
    #[arg(long)]
    identities: bool,
    /// Write the nonzero matrix entries as i,j,value CSV.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct AnalyzeOutput {
    n: usize,
    method: MatrixArg,
    bandwidth: usize,
    mean: String,
    noise: NoiseMoments,
    exact: ExactMoments,
    /// `n·MSE/(2σ⁴)`.
    rel_mse: f64,
    traces: Traces,
    df: f64,
    /// Two-term expansion, Müller–Stadtmüller only.
    asymptotic_mse: Option<f64>,
    l_opt: usize,
    l_opt_real: f64,
    optimal_mse: OptimalMseComparison,
    identities: Option<IdentityReport>,
}

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    let noise = NoiseMoments::new(args.sigma2, args.gamma3, args.gamma4)?;
    let mean: MeanFunction = args.mean.parse()?;
    let n = args.n;
    if n < 3 {
        return Err(CliError::Usage(format!("--n must be at least 3, got {n}")));
    }
    let rule = if args.optimal_l {
        BandwidthRule::Optimal
    } else {
        args.bandwidth.parse::<BandwidthRule>()?
    };
    if rule == BandwidthRule::Optimal && args.method != MatrixArg::Ms {
        return Err(CliError::Usage(
            "the optimal bandwidth is defined for --method ms only".into(),
        ));
    }
    let min_bw = match args.method {
        MatrixArg::Tw => 2,
        MatrixArg::Ms => 3,
    };
    let bandwidth = rule.resolve(n, min_bw, Some(&noise))?;
    let matrix = match args.method {
        MatrixArg::Tw => build_tw_matrix(n, bandwidth)?,
        MatrixArg::Ms => build_ms_matrix(n, bandwidth)?,
    };
    if let Some(path) = &args.dump_matrix {
        write_matrix_csv(&matrix, File::create(path)?)?;
    }

    let exact = exact_mse(&matrix, &mean.on_grid(n), &noise)?;
    let s4 = noise.sigma2() * noise.sigma2();
    let out = AnalyzeOutput {
        n,
        method: args.method,
        bandwidth,
        mean: mean.name().to_string(),
        noise,
        exact,
        rel_mse: n as f64 * exact.mse / (2.0 * s4),
        traces: traces(&matrix),
        df: chi_square_df(&matrix)?,
        asymptotic_mse: (args.method == MatrixArg::Ms)
            .then(|| asymptotic_mse_ms(n, bandwidth, &noise)),
        l_opt: optimal_l(n, &noise),
        l_opt_real: optimal_l_real(n, &noise),
        optimal_mse: optimal_mse_comparison(n, &noise),
        identities: if args.identities {
            Some(check_identities(n, bandwidth)?)
        } else {
            None
        },
    };
    write_json(&out, std::io::stdout())?;
    Ok(())
}
