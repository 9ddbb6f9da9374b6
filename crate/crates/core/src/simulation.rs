//! Seeded Monte Carlo engine.
//!
//! Replicate `r` draws its noise from a stream seeded by
//! `splitmix64(master_seed + φ·(r + 1))`, so results do not depend on which
//! thread runs which replicate. Per-replicate estimates are collected in
//! replicate order and reduced sequentially, which keeps every report
//! bit-identical across thread counts.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytics::MeanFunction;
use crate::error::{Error, Result};
use crate::estimators::{
    compute_lag_stats, confidence_bounds, muller_stadtmuller, rice, tong_wang, Bandwidth,
    BandwidthRule, DenominatorMode, LsMethod, Method, VarianceEstimate,
};
use crate::sample::{NoiseMoments, Sample1D};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser; a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed of replicate `r`. Injective in `r` for a fixed master seed.
pub fn replicate_seed(master_seed: u64, r: u64) -> u64 {
    mix64(master_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(r.wrapping_add(1))))
}

/// Random number generator for replicate `r`.
pub fn replicate_rng(master_seed: u64, r: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replicate_seed(master_seed, r))
}

/// Error distribution used to draw `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLaw {
    #[default]
    Normal,
    /// `±σ` with equal probability.
    Rademacher,
}

impl NoiseLaw {
    pub fn moments(&self, sigma2: f64) -> Result<NoiseMoments> {
        match self {
            NoiseLaw::Normal => NoiseMoments::normal(sigma2),
            // γ4 = 1 sits on the boundary of the γ4 > 1 assumption.
            NoiseLaw::Rademacher => Err(Error::Moments(
                "Rademacher noise has gamma4 = 1, outside gamma4 > 1".into(),
            )),
        }
    }

    pub fn gamma4(&self) -> f64 {
        match self {
            NoiseLaw::Normal => 3.0,
            NoiseLaw::Rademacher => 1.0,
        }
    }

    /// Fills `out` with standardised draws (mean 0, variance 1).
    pub fn fill_standard<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            NoiseLaw::Normal => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
            NoiseLaw::Rademacher => out
                .iter_mut()
                .for_each(|v| *v = if rng.random::<bool>() { 1.0 } else { -1.0 }),
        }
    }
}

/// Estimator evaluated in each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Least squares (weighted) estimator.
    Tw,
    Ms,
    Rice,
    /// Single lag statistic `s_k`, `k` given by the bandwidth rule.
    Lag,
}

impl EstimatorKind {
    fn min_bandwidth(&self) -> usize {
        match self {
            EstimatorKind::Tw => 2,
            EstimatorKind::Ms => 3,
            EstimatorKind::Rice | EstimatorKind::Lag => 1,
        }
    }

    /// Whether `√n(σ̂² − σ²)` has limiting variance `γ4σ⁴` (single lag
    /// statistic) rather than `(γ4 − 1)σ⁴`.
    fn single_lag(&self) -> bool {
        matches!(self, EstimatorKind::Rice | EstimatorKind::Lag)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Tw => "tw",
            EstimatorKind::Ms => "ms",
            EstimatorKind::Rice => "rice",
            EstimatorKind::Lag => "lag",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tw" => Ok(EstimatorKind::Tw),
            "ms" => Ok(EstimatorKind::Ms),
            "rice" => Ok(EstimatorKind::Rice),
            "lag" => Ok(EstimatorKind::Lag),
            _ => Err(Error::Config(format!("unknown estimator '{s}'"))),
        }
    }
}

/// One simulation setting.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub sigma2: f64,
    pub mean: MeanFunction,
    pub estimator: EstimatorKind,
    pub bandwidth_rule: BandwidthRule,
    pub reps: usize,
    pub master_seed: u64,
    /// Level for CI coverage with known `γ4`; `None` skips coverage.
    pub alpha: Option<f64>,
    pub noise: NoiseLaw,
    /// Keep untruncated per-replicate estimates in the report.
    pub keep_raw: bool,
}

impl SimConfig {
    pub fn new(
        n: usize,
        sigma2: f64,
        mean: MeanFunction,
        estimator: EstimatorKind,
        bandwidth_rule: BandwidthRule,
    ) -> Self {
        SimConfig {
            n,
            sigma2,
            mean,
            estimator,
            bandwidth_rule,
            reps: 1000,
            master_seed: 0,
            alpha: None,
            noise: NoiseLaw::Normal,
            keep_raw: false,
        }
    }

    pub fn reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn keep_raw(mut self, keep: bool) -> Self {
        self.keep_raw = keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n < 3 {
            return Err(Error::Config(format!(
                "n must be at least 3, got {}",
                self.n
            )));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::Config(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    /// Lag count used for this configuration.
    pub fn resolve_bandwidth(&self) -> Result<usize> {
        let noise = match self.bandwidth_rule {
            BandwidthRule::Optimal => {
                if self.estimator != EstimatorKind::Ms {
                    return Err(Error::Config(
                        "the optimal bandwidth rule is only defined for the ms estimator".into(),
                    ));
                }
                Some(self.noise.moments(self.sigma2)?)
            }
            _ => None,
        };
        let bw =
            self.bandwidth_rule
                .resolve(self.n, self.estimator.min_bandwidth(), noise.as_ref())?;
        let ok = match self.estimator {
            EstimatorKind::Tw => (2..self.n).contains(&bw),
            EstimatorKind::Ms => (3..self.n).contains(&bw),
            EstimatorKind::Rice => true,
            EstimatorKind::Lag => (1..self.n).contains(&bw),
        };
        if !ok {
            return Err(Error::bandwidth(
                bw as f64,
                format!(
                    "invalid for estimator {} with n = {}",
                    self.estimator, self.n
                ),
            ));
        }
        Ok(bw)
    }

    /// Estimate for one response vector on the grid `i/n`.
    pub fn estimate(&self, y: Vec<f64>, bandwidth: usize) -> Result<VarianceEstimate> {
        let sample = Sample1D::equally_spaced(y)?;
        match self.estimator {
            EstimatorKind::Tw => tong_wang(&sample, bandwidth, LsMethod::Wls),
            EstimatorKind::Ms => muller_stadtmuller(&sample, bandwidth),
            EstimatorKind::Rice => rice(&sample),
            EstimatorKind::Lag => {
                let lags = compute_lag_stats(&sample, bandwidth, DenominatorMode::PerLag)?;
                Ok(VarianceEstimate::from_raw(
                    lags.stats[bandwidth - 1],
                    Method::Rice,
                    Some(Bandwidth::Lags(bandwidth)),
                ))
            }
        }
    }

    /// Responses `g(i/n) + ε` for replicate `r`.
    pub fn draw(&self, grid_mean: &[f64], r: u64) -> Vec<f64> {
        let mut rng = replicate_rng(self.master_seed, r);
        let mut eps = vec![0.0; self.n];
        self.noise.fill_standard(&mut rng, &mut eps);
        let sd = self.sigma2.sqrt();
        grid_mean
            .iter()
            .zip(&eps)
            .map(|(g, e)| g + sd * e)
            .collect()
    }

    /// Untruncated estimates for every replicate, in replicate order.
    pub fn raw_estimates(&self) -> Result<(usize, Vec<f64>)> {
        self.validate()?;
        let bw = self.resolve_bandwidth()?;
        let grid_mean = self.mean.on_grid(self.n);
        let raws = (0..self.reps as u64)
            .into_par_iter()
            .map(|r| {
                self.estimate(self.draw(&grid_mean, r), bw)
                    .map(|e| e.raw_value)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((bw, raws))
    }
}

/// Aggregated results of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n: usize,
    pub sigma2: f64,
    pub g: String,
    pub estimator: EstimatorKind,
    pub bandwidth_rule: BandwidthRule,
    pub bandwidth: usize,
    pub reps: usize,
    pub master_seed: u64,
    /// `n·MSE/(2σ⁴)` of the truncated estimates.
    pub rel_mse: f64,
    pub mse: f64,
    pub bias: f64,
    pub variance: f64,
    pub negative_count: usize,
    pub ci_coverage: Option<f64>,
    pub raw_estimates: Option<Vec<f64>>,
}

/// Runs one simulation setting. Negative estimates are replaced by zero for
/// the MSE while the raw values stay available.
pub fn run_cell(config: &SimConfig) -> Result<SimReport> {
    let (bandwidth, raws) = config.raw_estimates()?;
    let sigma2 = config.sigma2;
    let reps = raws.len() as f64;

    let truncated: Vec<f64> = raws.iter().map(|v| v.max(0.0)).collect();
    let negative_count = raws.iter().filter(|v| **v < 0.0).count();
    let mean = truncated.iter().sum::<f64>() / reps;
    let mse = truncated
        .iter()
        .map(|v| (v - sigma2) * (v - sigma2))
        .sum::<f64>()
        / reps;
    let variance = truncated
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / reps;
    let bias = mean - sigma2;

    let ci_coverage = match config.alpha {
        Some(alpha) => {
            let gamma4 = config.noise.gamma4();
            let mut covered = 0usize;
            for &value in &truncated {
                let (lo, hi) = confidence_bounds(value, gamma4, config.n, alpha)?;
                if lo <= sigma2 && sigma2 <= hi {
                    covered += 1;
                }
            }
            Some(covered as f64 / reps)
        }
        None => None,
    };

    Ok(SimReport {
        n: config.n,
        sigma2,
        g: config.mean.name().to_string(),
        estimator: config.estimator,
        bandwidth_rule: config.bandwidth_rule,
        bandwidth,
        reps: raws.len(),
        master_seed: config.master_seed,
        rel_mse: config.n as f64 * mse / (2.0 * sigma2 * sigma2),
        mse,
        bias,
        variance,
        negative_count,
        ci_coverage,
        raw_estimates: config.keep_raw.then_some(raws),
    })
}

pub const TABLE1_SIZES: [usize; 3] = [30, 100, 1000];
pub const TABLE1_SIGMA2: [f64; 2] = [0.25, 4.0];

/// Estimator/bandwidth columns of the comparison table, in order.
pub const TABLE1_COLUMNS: [(EstimatorKind, BandwidthRule); 4] = [
    (EstimatorKind::Tw, BandwidthRule::Sqrt),
    (EstimatorKind::Tw, BandwidthRule::Cbrt),
    (EstimatorKind::Ms, BandwidthRule::Sqrt),
    (EstimatorKind::Ms, BandwidthRule::Cbrt),
];

/// The 18 settings × 4 estimators study. `cells` is in row-major order:
/// `n`, then `σ²`, then `g`, then the four columns of [`TABLE1_COLUMNS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub master_seed: u64,
    pub reps: usize,
    pub cells: Vec<SimReport>,
}

impl Table1 {
    /// Rows of `(n, σ², g, [rel_mse; 4])`.
    pub fn wide_rows(&self) -> Vec<(usize, f64, String, [f64; 4])> {
        self.cells
            .chunks(4)
            .map(|c| {
                (
                    c[0].n,
                    c[0].sigma2,
                    c[0].g.clone(),
                    [c[0].rel_mse, c[1].rel_mse, c[2].rel_mse, c[3].rel_mse],
                )
            })
            .collect()
    }
}

/// Settings `(n, σ², g)` in table order.
pub fn table1_settings() -> Vec<(usize, f64, MeanFunction)> {
    let mut out = Vec::new();
    for &n in &TABLE1_SIZES {
        for &s2 in &TABLE1_SIGMA2 {
            for g in [MeanFunction::G1, MeanFunction::G2, MeanFunction::G3] {
                out.push((n, s2, g));
            }
        }
    }
    out
}

pub fn run_table1(master_seed: u64, reps: usize) -> Result<Table1> {
    if reps < 100 {
        return Err(Error::Config(format!(
            "table reproduction needs reps >= 100, got {reps}"
        )));
    }
    let configs: Vec<SimConfig> = table1_settings()
        .into_iter()
        .flat_map(|(n, s2, g)| {
            TABLE1_COLUMNS.iter().map(move |&(est, rule)| {
                SimConfig::new(n, s2, g.clone(), est, rule)
                    .reps(reps)
                    .seed(master_seed)
            })
        })
        .collect();
    let cells = configs
        .par_iter()
        .map(run_cell)
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1 {
        master_seed,
        reps,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostic {
    pub mean: f64,
    pub variance: f64,
    /// Kolmogorov–Smirnov distance to the standard normal.
    pub ks: f64,
}

/// Standardises `T_r = √n(σ̂²_r − σ²)/√V` with `V = (γ4 − 1)σ⁴` (or `γ4σ⁴`
/// for a single lag statistic) and compares it with `N(0, 1)`.
pub fn normality_diagnostic(config: &SimConfig) -> Result<NormalityDiagnostic> {
    let (_, raws) = config.raw_estimates()?;
    let g4 = config.noise.gamma4();
    let s4 = config.sigma2 * config.sigma2;
    let limit_var = if config.estimator.single_lag() {
        g4 * s4
    } else {
        (g4 - 1.0) * s4
    };
    let root_n = (config.n as f64).sqrt();
    let mut t: Vec<f64> = raws
        .iter()
        .map(|v| root_n * (v - config.sigma2) / limit_var.sqrt())
        .collect();
    let count = t.len() as f64;
    let mean = t.iter().sum::<f64>() / count;
    let variance = t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0).max(1.0);
    t.sort_by(f64::total_cmp);
    Ok(NormalityDiagnostic {
        mean,
        variance,
        ks: ks_distance_standard_normal(&t),
    })
}

/// Kolmogorov–Smirnov distance between the empirical law of sorted `xs` and
/// the standard normal.
pub fn ks_distance_standard_normal(sorted: &[f64]) -> f64 {
    let std = Normal::standard();
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std.cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub raw: Vec<f64>,
    pub bins: Vec<Bin>,
    pub negative_count: usize,
}

/// Fixed-width bins over `[min, max]`; the maximum falls in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let negative_count = values.iter().filter(|v| **v < 0.0).count();
    if values.is_empty() {
        return Histogram {
            raw: Vec::new(),
            bins: Vec::new(),
            negative_count,
        };
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = if hi > lo { bins } else { 1 };
    let width = (hi - lo) / bins as f64;
    let edge = |i: usize| if i == bins { hi } else { lo + width * i as f64 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Histogram {
        raw: values.to_vec(),
        bins: counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| Bin {
                lo: edge(i),
                hi: edge(i + 1),
                count,
            })
            .collect(),
        negative_count,
    }
}

/// Untruncated estimates of a cell together with their histogram.
pub fn histogram_export(config: &SimConfig, bins: usize) -> Result<Histogram> {
    let (_, raws) = config.raw_estimates()?;
    Ok(histogram(&raws, bins))
}
