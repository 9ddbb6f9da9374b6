//! Difference-based estimators of the residual variance.
//!
//! All estimators here work directly from the responses: differences
//! `y_{i+k} − y_i` cancel a smooth trend, and the remaining bias, which grows
//! like `k²/n²`, is removed by regressing the lag statistics on the squared
//! lag distance and keeping the intercept.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytics;
use crate::error::{Error, Result};
use crate::quadratic::MsCoefficients;
use crate::sample::{NoiseMoments, Sample1D};

/// Lower clamp applied by [`estimate_gamma4`].
pub const GAMMA4_FLOOR: f64 = 1.0 + 1e-9;

/// How the lag statistics are normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenominatorMode {
    /// `s_k`: every available lag-`k` pair, divided by `2(n − k)`.
    PerLag,
    /// `z_k`: only `i = 1..n−L`, divided by `2(n − L)` for every lag.
    FixedL,
}

/// Lag statistics with their squared-lag covariates and regression weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagStats {
    /// Largest lag (`m` or `L`).
    pub max_lag: usize,
    /// `stats[k-1]` is `s_k` (per-lag) or `z_k` (fixed-L).
    pub stats: Vec<f64>,
    /// `d_k = k²/n²`.
    pub d: Vec<f64>,
    /// `w_k = (n − k)/N` in per-lag mode, `1/L` in fixed-L mode.
    pub w: Vec<f64>,
    /// Total number of squared differences entering the statistics.
    pub pair_count: usize,
    pub mode: DenominatorMode,
}

/// Computes `s_k` (or `z_k`) for `k = 1..=max_lag` by direct summation.
pub fn compute_lag_stats(
    sample: &Sample1D,
    max_lag: usize,
    mode: DenominatorMode,
) -> Result<LagStats> {
    if !sample.is_equally_spaced() {
        return Err(Error::NotEquallySpaced);
    }
    let n = sample.n();
    let min = match mode {
        DenominatorMode::PerLag => 1,
        DenominatorMode::FixedL => 3,
    };
    if max_lag < min || max_lag >= n {
        return Err(Error::bandwidth(
            max_lag as f64,
            format!("need {min} <= lag count <= n-1 = {}", n.saturating_sub(1)),
        ));
    }
    let y = sample.y();
    let nf = n as f64;
    let d: Vec<f64> = (1..=max_lag).map(|k| (k * k) as f64 / (nf * nf)).collect();

    let (stats, w, pair_count) = match mode {
        DenominatorMode::PerLag => {
            let pair_count = n * max_lag - max_lag * (max_lag + 1) / 2;
            let stats = (1..=max_lag)
                .map(|k| lag_sum(y, k, n - k) / (2.0 * (n - k) as f64))
                .collect();
            let w = (1..=max_lag)
                .map(|k| (n - k) as f64 / pair_count as f64)
                .collect();
            (stats, w, pair_count)
        }
        DenominatorMode::FixedL => {
            let rows = n - max_lag;
            let stats = (1..=max_lag)
                .map(|k| lag_sum(y, k, rows) / (2.0 * rows as f64))
                .collect();
            let w = vec![1.0 / max_lag as f64; max_lag];
            (stats, w, rows * max_lag)
        }
    };

    Ok(LagStats {
        max_lag,
        stats,
        d,
        w,
        pair_count,
        mode,
    })
}

/// `Σ_{i=0}^{rows-1} (y[i+k] − y[i])²`.
fn lag_sum(y: &[f64], k: usize, rows: usize) -> f64 {
    y[..rows]
        .iter()
        .zip(&y[k..k + rows])
        .map(|(a, b)| (b - a) * (b - a))
        .sum()
}

/// Least squares flavour used to fit `s_k = β0 + β1 d_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LsMethod {
    /// Weights `w_k = (n − k)/N`.
    Wls,
    Ols,
    /// Compound-symmetry covariance `γ4σ⁴{(1 − ρ)I + ρ11ᵀ}/n`.
    Gls(NoiseMoments),
}

impl LsMethod {
    pub fn kind(&self) -> LsKind {
        match self {
            LsMethod::Wls => LsKind::Wls,
            LsMethod::Ols => LsKind::Ols,
            LsMethod::Gls(_) => LsKind::Gls,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LsKind {
    Wls,
    Ols,
    Gls,
}

/// Intercept and slope of the lag regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub beta0: f64,
    pub beta1: f64,
    pub method: LsKind,
}

/// Which estimator produced a [`VarianceEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rice,
    LeastSquares(LsKind),
    MullerStadtmuller,
    GeneralDomain,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Rice => f.write_str("rice"),
            Method::LeastSquares(LsKind::Wls) => f.write_str("least-squares"),
            Method::LeastSquares(LsKind::Ols) => f.write_str("least-squares-ols"),
            Method::LeastSquares(LsKind::Gls) => f.write_str("least-squares-gls"),
            Method::MullerStadtmuller => f.write_str("muller-stadtmuller"),
            Method::GeneralDomain => f.write_str("general-domain"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// Number of lags (`m` or `L`).
    Lags(usize),
    /// Threshold on squared covariate distance.
    SquaredDistance(f64),
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Lags(m) => write!(f, "{m}"),
            Bandwidth::SquaredDistance(t) => write!(f, "d<={t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Output of every estimator.
///
/// `raw_value` is the untruncated estimate and may be negative, since the
/// matrices behind these estimators are not positive definite. `value` is
/// `max(raw_value, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub raw_value: f64,
    pub method: Method,
    pub bandwidth: Option<Bandwidth>,
    pub truncated: bool,
    pub fit: Option<RegressionFit>,
    pub df: Option<f64>,
    pub ci: Option<ConfidenceInterval>,
}

impl VarianceEstimate {
    pub fn from_raw(raw_value: f64, method: Method, bandwidth: Option<Bandwidth>) -> Self {
        VarianceEstimate {
            value: raw_value.max(0.0),
            raw_value,
            method,
            bandwidth,
            truncated: raw_value < 0.0,
            fit: None,
            df: None,
            ci: None,
        }
    }

    fn with_fit(mut self, fit: RegressionFit) -> Self {
        self.fit = Some(fit);
        self
    }
}

/// First-order difference estimator `Σ (y_i − y_{i−1})² / (2(n − 1))`.
///
/// Works for any ordered design.
pub fn rice(sample: &Sample1D) -> Result<VarianceEstimate> {
    let y = sample.y();
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidSample("rice needs n >= 2".into()));
    }
    let raw = lag_sum(y, 1, n - 1) / (2.0 * (n - 1) as f64);
    Ok(VarianceEstimate::from_raw(
        raw,
        Method::Rice,
        Some(Bandwidth::Lags(1)),
    ))
}

/// Least squares estimator: regress `s_k` on `d_k` for `k = 1..m` and keep
/// the intercept.
pub fn tong_wang(sample: &Sample1D, m: usize, method: LsMethod) -> Result<VarianceEstimate> {
    let n = sample.n();
    if m < 2 || m >= n {
        return Err(Error::bandwidth(
            m as f64,
            format!("need 2 <= m <= n-1 = {}", n.saturating_sub(1)),
        ));
    }
    let lags = compute_lag_stats(sample, m, DenominatorMode::PerLag)?;
    let fit = fit_lag_regression(&lags.d, &lags.stats, &lags.w, method, n)?;
    Ok(VarianceEstimate::from_raw(
        fit.beta0,
        Method::LeastSquares(fit.method),
        Some(Bandwidth::Lags(m)),
    )
    .with_fit(fit))
}

/// Fits `s = β0 + β1 d` by the requested least squares method.
///
/// `n` is the sample size, used only to scale the GLS covariance.
pub fn fit_lag_regression(
    d: &[f64],
    s: &[f64],
    w: &[f64],
    method: LsMethod,
    n: usize,
) -> Result<RegressionFit> {
    let (beta0, beta1) = match method {
        LsMethod::Wls => weighted_line(d, s, w)?,
        LsMethod::Ols => {
            let ones = vec![1.0; d.len()];
            weighted_line(d, s, &ones)?
        }
        LsMethod::Gls(noise) => compound_symmetry_gls(d, s, &noise, n)?,
    };
    if !(beta0.is_finite() && beta1.is_finite()) {
        return Err(Error::Precondition(
            "non-finite regression coefficients".into(),
        ));
    }
    Ok(RegressionFit {
        beta0,
        beta1,
        method: method.kind(),
    })
}

/// Closed-form weighted least squares line in centred form:
/// `β1 = Σw s (d − d̄)/Σw (d − d̄)²`, `β0 = Σw s/Σw − β1 d̄`.
fn weighted_line(d: &[f64], s: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    let wsum: f64 = w.iter().sum();
    if d.len() < 2 || wsum <= 0.0 {
        return Err(Error::Precondition(
            "need at least two weighted points".into(),
        ));
    }
    let dbar = w.iter().zip(d).map(|(w, d)| w * d).sum::<f64>() / wsum;
    let sbar = w.iter().zip(s).map(|(w, s)| w * s).sum::<f64>() / wsum;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((&wk, &dk), &sk) in w.iter().zip(d).zip(s) {
        let dc = dk - dbar;
        sxx += wk * dc * dc;
        sxy += wk * dc * sk;
    }
    if sxx <= 0.0 {
        return Err(Error::Precondition(
            "slope unidentifiable: covariates do not vary".into(),
        ));
    }
    let beta1 = sxy / sxx;
    Ok((sbar - beta1 * dbar, beta1))
}

/// Generalised least squares with `Σ = γ4σ⁴{(1 − ρ)I + ρ11ᵀ}/n`.
///
/// By Sherman–Morrison `Σ⁻¹ = c(I − t11ᵀ)` with `t = ρ/(1 − ρ + mρ)`, so
/// every entry of the 2×2 normal equations reduces to plain sums. The factor
/// `1 − tm` is evaluated as `(1 − ρ)/(1 − ρ + mρ)` to avoid cancellation when
/// `ρ` is close to one, and the covariate is shifted by its mean first.
fn compound_symmetry_gls(
    d: &[f64],
    s: &[f64],
    noise: &NoiseMoments,
    n: usize,
) -> Result<(f64, f64)> {
    let m = d.len();
    if m < 2 {
        return Err(Error::Precondition("need at least two points".into()));
    }
    let mf = m as f64;
    let rho = noise.rho();
    let c = n as f64 / (noise.gamma4() * noise.sigma2() * noise.sigma2() * (1.0 - rho));
    let t = rho / (1.0 - rho + mf * rho);
    let one_minus_tm = (1.0 - rho) / (1.0 - rho + mf * rho);

    let shift = d.iter().sum::<f64>() / mf;
    let (mut sum_dc, mut sum_dc2, mut sum_s, mut sum_dcs) = (0.0, 0.0, 0.0, 0.0);
    for (&dk, &sk) in d.iter().zip(s) {
        let dc = dk - shift;
        sum_dc += dc;
        sum_dc2 += dc * dc;
        sum_s += sk;
        sum_dcs += dc * sk;
    }

    // [1 dc]ᵀ Σ⁻¹ [1 dc] and [1 dc]ᵀ Σ⁻¹ s.
    let a00 = c * mf * one_minus_tm;
    let a01 = c * sum_dc * one_minus_tm;
    let a11 = c * (sum_dc2 - t * sum_dc * sum_dc);
    let r0 = c * sum_s * one_minus_tm;
    let r1 = c * (sum_dcs - t * sum_dc * sum_s);
    let det = a00 * a11 - a01 * a01;
    if det.is_nan() || det <= 0.0 {
        return Err(Error::Precondition("singular GLS normal equations".into()));
    }
    let beta1 = (a00 * r1 - a01 * r0) / det;
    let beta0_shifted = (a11 * r0 - a01 * r1) / det;
    Ok((beta0_shifted - beta1 * shift, beta1))
}

/// Müller–Stadtmüller estimator `Σ_{k=1}^L a_k z_k`.
pub fn muller_stadtmuller(sample: &Sample1D, l: usize) -> Result<VarianceEstimate> {
    let n = sample.n();
    if l < 3 || l >= n {
        return Err(Error::bandwidth(
            l as f64,
            format!("need 3 <= L <= n-1 = {}", n.saturating_sub(1)),
        ));
    }
    let lags = compute_lag_stats(sample, l, DenominatorMode::FixedL)?;
    let coef = MsCoefficients::new(l)?;
    let raw = coef
        .weights()
        .iter()
        .zip(&lags.stats)
        .map(|(a, z)| a * z)
        .sum();
    Ok(VarianceEstimate::from_raw(
        raw,
        Method::MullerStadtmuller,
        Some(Bandwidth::Lags(l)),
    ))
}

fn check_points(points: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if points.len() != y.len() {
        return Err(Error::Dimension {
            expected: points.len(),
            got: y.len(),
        });
    }
    let dim = points.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::InvalidSample(
            "covariate vectors must be non-empty".into(),
        ));
    }
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidSample(
            "covariate vectors differ in dimension".into(),
        ));
    }
    if points.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidSample("non-finite value".into()));
    }
    Ok(dim)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise estimator for covariates in an arbitrary normed space.
///
/// Every pair `i < j` with `‖x_i − x_j‖² ≤ threshold` contributes
/// `s_ij = (y_i − y_j)²/2` at covariate `d_ij = ‖x_i − x_j‖²`; the intercept
/// of the ordinary least squares line is returned. Replicated design points
/// (`d_ij = 0`) are kept.
pub fn general_domain(points: &[Vec<f64>], y: &[f64], threshold: f64) -> Result<VarianceEstimate> {
    check_points(points, y)?;
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::bandwidth(
            threshold,
            "threshold must be finite and nonnegative",
        ));
    }
    let n = y.len();
    let retained = || {
        (0..n).flat_map(move |i| {
            ((i + 1)..n).filter_map(move |j| {
                let d = squared_distance(&points[i], &points[j]);
                (d <= threshold).then(|| (d, 0.5 * (y[i] - y[j]) * (y[i] - y[j])))
            })
        })
    };

    let mut count = 0usize;
    let mut dsum = 0.0;
    let mut ssum = 0.0;
    let mut dmin = f64::INFINITY;
    let mut dmax = f64::NEG_INFINITY;
    for (d, s) in retained() {
        count += 1;
        dsum += d;
        ssum += s;
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if count < 2 {
        return Err(Error::bandwidth(
            threshold,
            format!("only {count} pair(s) within threshold; need at least 2"),
        ));
    }
    if dmax - dmin <= 1e-12 * dmax.abs() {
        return Err(Error::bandwidth(
            threshold,
            "all retained pairs share one distance; slope unidentifiable",
        ));
    }
    let dbar = dsum / count as f64;
    let sbar = ssum / count as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (d, s) in retained() {
        let dc = d - dbar;
        sxx += dc * dc;
        sxy += dc * s;
    }
    let beta1 = sxy / sxx;
    let beta0 = sbar - beta1 * dbar;
    let fit = RegressionFit {
        beta0,
        beta1,
        method: LsKind::Ols,
    };
    Ok(VarianceEstimate::from_raw(
        beta0,
        Method::GeneralDomain,
        Some(Bandwidth::SquaredDistance(threshold)),
    )
    .with_fit(fit))
}

pub const PAIR_THRESHOLD_SLACK: f64 = 1e-9;

/// Squared-distance threshold that retains the `nm − m(m+1)/2` closest
/// pairs, i.e. exactly lags `1..m` on a one-dimensional equally spaced
/// design. The `N`-th smallest distance is widened by a relative
/// [`PAIR_THRESHOLD_SLACK`] so pairs tied with it up to rounding are kept.
pub fn pair_threshold_for_lags(points: &[Vec<f64>], m: usize) -> Result<f64> {
    let n = points.len();
    if m < 1 || m >= n {
        return Err(Error::bandwidth(
            m as f64,
            format!("need 1 <= m <= n-1 = {}", n.saturating_sub(1)),
        ));
    }
    let target = n * m - m * (m + 1) / 2;
    let mut all: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| squared_distance(&points[i], &points[j]))
        .collect();
    let (_, nth, _) = all.select_nth_unstable_by(target - 1, f64::total_cmp);
    Ok(*nth * (1.0 + PAIR_THRESHOLD_SLACK))
}

/// Standard normal upper quantile `z_{α/2}`.
pub fn normal_upper_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let std = Normal::standard();
    Ok(std.inverse_cdf(1.0 - alpha / 2.0))
}

/// Approximate `1 − α` interval from the limiting normal law of the least
/// squares estimator:
/// `[σ̂²/{1 + z√((γ4 − 1)/n)}, σ̂²/{1 − z√((γ4 − 1)/n)}]`.
pub fn confidence_interval(
    est: &VarianceEstimate,
    gamma4: f64,
    n: usize,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    let (lo, hi) = confidence_bounds(est.value, gamma4, n, alpha)?;
    Ok(ConfidenceInterval { lo, hi, alpha })
}

/// Bounds of [`confidence_interval`] for a point estimate `value`.
pub fn confidence_bounds(value: f64, gamma4: f64, n: usize, alpha: f64) -> Result<(f64, f64)> {
    let z = normal_upper_quantile(alpha)?;
    if !(gamma4.is_finite() && gamma4 > 1.0) {
        return Err(Error::Moments(format!(
            "gamma4 must exceed 1, got {gamma4}"
        )));
    }
    let half = z * ((gamma4 - 1.0) / n as f64).sqrt();
    if half >= 1.0 {
        return Err(Error::Precondition(format!(
            "n = {n} must exceed (gamma4 - 1) z^2 = {:.6}",
            (gamma4 - 1.0) * z * z
        )));
    }
    Ok((value / (1.0 + half), value / (1.0 - half)))
}

/// Kurtosis estimate from fourth moments of first differences.
///
/// For a smooth trend `E(ε_i − ε_{i−1})⁴ = 2μ4 + 6σ⁴`, so
/// `μ̂4 = max{(mean Δ⁴ − 6σ̂⁴)/2, σ̂⁴}` and `γ̂4 = μ̂4/σ̂⁴`, clamped at
/// [`GAMMA4_FLOOR`].
pub fn estimate_gamma4(sample: &Sample1D, sigma2_hat: f64) -> Result<f64> {
    let y = sample.y();
    if y.len() < 3 {
        return Err(Error::InvalidSample("gamma4 estimate needs n >= 3".into()));
    }
    if !(sigma2_hat.is_finite() && sigma2_hat > 0.0) {
        return Err(Error::Precondition(format!(
            "sigma2 estimate must be positive, got {sigma2_hat}"
        )));
    }
    let fourth = y.windows(2).map(|w| (w[1] - w[0]).powi(4)).sum::<f64>() / (y.len() - 1) as f64;
    let s4 = sigma2_hat * sigma2_hat;
    let mu4 = ((fourth - 6.0 * s4) / 2.0).max(s4);
    Ok((mu4 / s4).max(GAMMA4_FLOOR))
}

/// Integer bandwidth rule. `Sqrt` and `Cbrt` use exact integer roots
/// (`⌊√n⌋`, `⌊∛n⌋`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthRule {
    Sqrt,
    Cbrt,
    Fixed(usize),
    /// Asymptotically optimal `L` of the Müller–Stadtmüller estimator.
    Optimal,
}

impl BandwidthRule {
    /// Resolves the rule for sample size `n`, raising the result to at least
    /// `min`. `Optimal` requires the noise moments.
    pub fn resolve(&self, n: usize, min: usize, noise: Option<&NoiseMoments>) -> Result<usize> {
        let raw = match *self {
            BandwidthRule::Sqrt => isqrt(n),
            BandwidthRule::Cbrt => icbrt(n),
            BandwidthRule::Fixed(k) => return Ok(k),
            BandwidthRule::Optimal => {
                let noise = noise
                    .ok_or_else(|| Error::Config("optimal bandwidth needs noise moments".into()))?;
                analytics::optimal_l(n, noise)
            }
        };
        Ok(raw.max(min))
    }
}

impl fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthRule::Sqrt => f.write_str("sqrt"),
            BandwidthRule::Cbrt => f.write_str("cbrt"),
            BandwidthRule::Fixed(k) => write!(f, "{k}"),
            BandwidthRule::Optimal => f.write_str("optimal"),
        }
    }
}

impl FromStr for BandwidthRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sqrt" | "auto" => Ok(BandwidthRule::Sqrt),
            "cbrt" => Ok(BandwidthRule::Cbrt),
            "optimal" => Ok(BandwidthRule::Optimal),
            other => other
                .parse::<usize>()
                .map(BandwidthRule::Fixed)
                .map_err(|_| Error::Config(format!("unknown bandwidth rule '{s}'"))),
        }
    }
}

/// Largest `r` with `r² ≤ n`.
pub fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Largest `r` with `r³ ≤ n`.
pub fn icbrt(n: usize) -> usize {
    let mut r = (n as f64).cbrt() as usize;
    while r > 0 && r * r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn alt(n: usize) -> Sample1D {
        Sample1D::equally_spaced((0..n).map(|i| (i % 2) as f64).collect()).unwrap()
    }

    #[test]
    fn lag_stats_per_lag() {
        let s = compute_lag_stats(&alt(5), 2, DenominatorMode::PerLag).unwrap();
        assert_eq!(s.stats, vec![0.5, 0.0]);
        assert_eq!(s.pair_count, 7);
        assert_relative_eq!(s.w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(s.d, vec![1.0 / 25.0, 4.0 / 25.0]);
    }

    #[test]
    fn lag_stats_fixed_l() {
        let s = compute_lag_stats(&alt(6), 3, DenominatorMode::FixedL).unwrap();
        assert_eq!(s.stats, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn lag_stats_constant_and_errors() {
        let c = Sample1D::equally_spaced(vec![3.0; 8]).unwrap();
        let s = compute_lag_stats(&c, 5, DenominatorMode::PerLag).unwrap();
        assert!(s.stats.iter().all(|&v| v == 0.0));
        assert!(compute_lag_stats(&c, 0, DenominatorMode::PerLag).is_err());
        assert!(compute_lag_stats(&c, 8, DenominatorMode::PerLag).is_err());
        assert!(compute_lag_stats(&c, 2, DenominatorMode::FixedL).is_err());
        let uneven = Sample1D::new(vec![0.0, 0.1, 0.5, 1.0], vec![1.0; 4]).unwrap();
        assert!(matches!(
            compute_lag_stats(&uneven, 1, DenominatorMode::PerLag),
            Err(Error::NotEquallySpaced)
        ));
    }

    #[test]
    fn rice_examples() {
        assert_eq!(rice(&alt(5)).unwrap().value, 0.5);
        let c = Sample1D::equally_spaced(vec![2.0; 5]).unwrap();
        assert_eq!(rice(&c).unwrap().value, 0.0);
        let two = Sample1D::equally_spaced(vec![0.0, 2.0]).unwrap();
        assert_eq!(rice(&two).unwrap().value, 2.0);
    }

    #[test]
    fn tong_wang_two_point_interpolation() {
        let est = tong_wang(&alt(5), 2, LsMethod::Wls).unwrap();
        assert_relative_eq!(est.raw_value, 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(est.fit.unwrap().beta1, -25.0 / 6.0, epsilon = 1e-12);
        assert!(!est.truncated);
    }

    #[test]
    fn tong_wang_constant() {
        let c = Sample1D::equally_spaced(vec![1.5; 20]).unwrap();
        let est = tong_wang(&c, 4, LsMethod::Wls).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.fit.unwrap().beta1, 0.0);
    }

    #[test]
    fn tong_wang_rejects_bad_bandwidth() {
        assert!(tong_wang(&alt(5), 1, LsMethod::Wls).is_err());
        assert!(tong_wang(&alt(5), 5, LsMethod::Wls).is_err());
    }

    #[test]
    fn gls_matches_ols_on_example() {
        let noise = NoiseMoments::normal(1.0).unwrap();
        let ols = tong_wang(&alt(5), 2, LsMethod::Ols).unwrap();
        let gls = tong_wang(&alt(5), 2, LsMethod::Gls(noise)).unwrap();
        assert!((ols.raw_value - gls.raw_value).abs() < 1e-12);
        assert_eq!(gls.method, Method::LeastSquares(LsKind::Gls));
    }

    #[test]
    fn ms_examples() {
        let est = muller_stadtmuller(&alt(6), 3).unwrap();
        assert_relative_eq!(est.raw_value, 2.0, epsilon = 1e-14);
        let c = Sample1D::equally_spaced(vec![-1.0; 12]).unwrap();
        assert_eq!(muller_stadtmuller(&c, 4).unwrap().value, 0.0);
        assert!(muller_stadtmuller(&alt(6), 2).is_err());
        assert!(muller_stadtmuller(&alt(6), 6).is_err());
    }

    #[test]
    fn negative_estimates_are_truncated() {
        let est = VarianceEstimate::from_raw(-0.3, Method::Rice, None);
        assert_eq!(est.value, 0.0);
        assert!(est.truncated);
        assert_eq!(est.raw_value, -0.3);
    }

    #[test]
    fn general_domain_matches_tong_wang_example() {
        let pts: Vec<Vec<f64>> = (1..=5).map(|i| vec![i as f64 / 5.0]).collect();
        let y = [0.0, 1.0, 0.0, 1.0, 0.0];
        let est = general_domain(&pts, &y, 4.0 / 25.0 + 1e-9).unwrap();
        assert!((est.raw_value - 2.0 / 3.0).abs() < 1e-12);
        let flat = general_domain(&pts, &[2.0; 5], 1.0).unwrap();
        assert_eq!(flat.value, 0.0);
    }

    #[test]
    fn general_domain_errors() {
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let y = [0.0, 1.0, 0.0, 1.0];
        // only lag-1 pairs: one distinct distance
        assert!(general_domain(&pts, &y, 1.0).is_err());
        assert!(general_domain(&pts, &y, 0.5).is_err());
        assert!(general_domain(&pts[..3], &y, 4.0).is_err());
    }

    #[test]
    fn pair_threshold_recovers_lag_cutoff() {
        let pts: Vec<Vec<f64>> = (1..=10).map(|i| vec![i as f64 / 10.0]).collect();
        let t = pair_threshold_for_lags(&pts, 3).unwrap();
        assert_relative_eq!(t, 0.09 * (1.0 + PAIR_THRESHOLD_SLACK), max_relative = 1e-12);
        // lag-3 squared distance is 0.09, lag-4 is 0.16
        assert!((0.09..0.16).contains(&t));
    }

    #[test]
    fn ci_examples() {
        let one = VarianceEstimate::from_raw(1.0, Method::Rice, None);
        let ci = confidence_interval(&one, 3.0, 100, 0.05).unwrap();
        assert!((ci.lo - 0.78297).abs() < 5e-6, "{}", ci.lo);
        assert!((ci.hi - 1.38347).abs() < 5e-6, "{}", ci.hi);
        let zero = VarianceEstimate::from_raw(0.0, Method::Rice, None);
        let ci = confidence_interval(&zero, 3.0, 100, 0.05).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.0, 0.0));
        assert!(matches!(
            confidence_interval(&one, 3.0, 4, 0.05),
            Err(Error::Precondition(_))
        ));
        assert!(confidence_interval(&one, 3.0, 100, 1.5).is_err());
    }

    #[test]
    fn gamma4_clamps_for_constant_data() {
        let c = Sample1D::equally_spaced(vec![1.0; 10]).unwrap();
        assert_eq!(estimate_gamma4(&c, 1.0).unwrap(), GAMMA4_FLOOR);
        assert!(estimate_gamma4(&c, 0.0).is_err());
    }

    #[test]
    fn integer_roots() {
        assert_eq!(icbrt(1000), 10);
        assert_eq!(icbrt(999), 9);
        assert_eq!(icbrt(100), 4);
        assert_eq!(icbrt(30), 3);
        assert_eq!(isqrt(1000), 31);
        assert_eq!(isqrt(100), 10);
        assert_eq!(isqrt(30), 5);
        for n in 0..2000usize {
            let r = isqrt(n);
            assert!(r * r <= n && (r + 1) * (r + 1) > n);
            let c = icbrt(n);
            assert!(c * c * c <= n && (c + 1).pow(3) > n);
        }
    }

    #[test]
    fn bandwidth_rules() {
        assert_eq!(
            "sqrt".parse::<BandwidthRule>().unwrap(),
            BandwidthRule::Sqrt
        );
        assert_eq!(
            "7".parse::<BandwidthRule>().unwrap(),
            BandwidthRule::Fixed(7)
        );
        assert!("bogus".parse::<BandwidthRule>().is_err());
        assert_eq!(BandwidthRule::Cbrt.resolve(8, 3, None).unwrap(), 3);
        assert_eq!(BandwidthRule::Cbrt.resolve(1000, 3, None).unwrap(), 10);
        let noise = NoiseMoments::normal(1.0).unwrap();
        assert_eq!(
            BandwidthRule::Optimal
                .resolve(1000, 3, Some(&noise))
                .unwrap(),
            66
        );
        assert!(BandwidthRule::Optimal.resolve(1000, 3, None).is_err());
    }
}
