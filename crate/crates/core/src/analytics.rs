//! Closed-form asymptotics and coefficient identity checks.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadratic::{build_ms_matrix, build_tw_matrix, traces, MsCoefficients, TwCoefficients};
use crate::sample::NoiseMoments;

/// Intervals used by the composite Simpson rule in [`trend_j`].
pub const SIMPSON_INTERVALS: usize = 10_000;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied mean function with an optional analytic derivative.
#[derive(Clone)]
pub struct CustomMean {
    name: String,
    f: RealFn,
    derivative: Option<RealFn>,
}

/// Mean function `g` on `[0, 1]`.
#[derive(Clone)]
pub enum MeanFunction {
    /// `5x`
    G1,
    /// `5x(1 − x)`
    G2,
    /// `5 sin(2πx)`
    G3,
    Custom(CustomMean),
}

impl MeanFunction {
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Self {
        MeanFunction::Custom(CustomMean {
            name: name.into(),
            f: Arc::new(f),
            derivative: derivative.map(Arc::from),
        })
    }

    /// The constant function `c`.
    pub fn constant(c: f64) -> Self {
        MeanFunction::custom(format!("const({c})"), move |_| c, Some(Box::new(|_| 0.0)))
    }

    pub fn name(&self) -> &str {
        match self {
            MeanFunction::G1 => "g1",
            MeanFunction::G2 => "g2",
            MeanFunction::G3 => "g3",
            MeanFunction::Custom(c) => &c.name,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MeanFunction::G1 => 5.0 * x,
            MeanFunction::G2 => 5.0 * x * (1.0 - x),
            MeanFunction::G3 => 5.0 * (2.0 * PI * x).sin(),
            MeanFunction::Custom(c) => (c.f)(x),
        }
    }

    /// Analytic derivative when known.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        match self {
            MeanFunction::G1 => Some(5.0),
            MeanFunction::G2 => Some(5.0 - 10.0 * x),
            MeanFunction::G3 => Some(10.0 * PI * (2.0 * PI * x).cos()),
            MeanFunction::Custom(c) => c.derivative.as_ref().map(|d| d(x)),
        }
    }

    /// `g(i/n)` for `i = 1..n`.
    pub fn on_grid(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|i| self.eval(i as f64 / n as f64)).collect()
    }
}

impl fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MeanFunction({})", self.name())
    }
}

impl FromStr for MeanFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "g1" => Ok(MeanFunction::G1),
            "g2" => Ok(MeanFunction::G2),
            "g3" => Ok(MeanFunction::G3),
            "zero" | "const" | "constant" => Ok(MeanFunction::constant(0.0)),
            _ => Err(Error::Config(format!("unknown mean function '{s}'"))),
        }
    }
}

/// Trend functional `J = ∫₀¹ g′(x)² dx / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendProfile {
    pub j: f64,
}

/// Computes `J` by composite Simpson on [`SIMPSON_INTERVALS`] intervals,
/// using the analytic derivative when available and central differences on
/// the same grid otherwise.
pub fn trend_j(g: &MeanFunction) -> Result<TrendProfile> {
    let intervals = SIMPSON_INTERVALS;
    let h = 1.0 / intervals as f64;
    let grid = |i: usize| i as f64 * h;

    let slopes: Vec<f64> = if g.derivative(0.0).is_some() {
        (0..=intervals)
            .map(|i| g.derivative(grid(i)).unwrap_or(f64::NAN))
            .collect()
    } else {
        let vals: Vec<f64> = (0..=intervals).map(|i| g.eval(grid(i))).collect();
        (0..=intervals)
            .map(|i| match i {
                0 => (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * h),
                i if i == intervals => {
                    (3.0 * vals[i] - 4.0 * vals[i - 1] + vals[i - 2]) / (2.0 * h)
                }
                i => (vals[i + 1] - vals[i - 1]) / (2.0 * h),
            })
            .collect()
    };
    if slopes.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!(
            "mean function {} produced non-finite values",
            g.name()
        )));
    }

    let integral = h / 3.0
        * slopes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let weight = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                weight * s * s
            })
            .sum::<f64>();
    Ok(TrendProfile { j: integral / 2.0 })
}

/// Leading bias `J k²/n²` of the lag-`k` statistic.
pub fn expected_lag_bias(j: f64, k: usize, n: usize) -> f64 {
    if (k as f64) > (n as f64).powf(0.75) {
        log::warn!("lag {k} exceeds n^(3/4) for n = {n}; the k = o(n) expansion is unreliable");
    }
    let (k, n) = (k as f64, n as f64);
    j * k * k / (n * n)
}

/// Leading term of `Cov(s_b, s_k)`: `(2n − 2k − b)(γ4 − 1)σ⁴ / {2(n − b)(n − k)}`.
pub fn asymptotic_cov_lag(b: usize, k: usize, n: usize, noise: &NoiseMoments) -> Result<f64> {
    if b < 1 || b >= k || k >= n {
        return Err(Error::Precondition(format!(
            "need 1 <= b < k < n, got b={b}, k={k}, n={n}"
        )));
    }
    let (b, k, n) = (b as f64, k as f64, n as f64);
    Ok((2.0 * n - 2.0 * k - b) * noise.var_eps2() / (2.0 * (n - b) * (n - k)))
}

/// Two-term asymptotic MSE of the Müller–Stadtmüller estimator:
/// `var(ε²)/n + 73L var(ε²)/(70n²) + 9σ⁴/(Ln)`.
pub fn asymptotic_mse_ms(n: usize, l: usize, noise: &NoiseMoments) -> f64 {
    let (n, l) = (n as f64, l as f64);
    let v = noise.var_eps2();
    let s4 = noise.sigma2() * noise.sigma2();
    v / n + 73.0 * l * v / (70.0 * n * n) + 9.0 * s4 / (l * n)
}

/// Real-valued minimiser `√(630nσ⁴ / (73 var(ε²)))` of [`asymptotic_mse_ms`].
pub fn optimal_l_real(n: usize, noise: &NoiseMoments) -> f64 {
    let s4 = noise.sigma2() * noise.sigma2();
    (630.0 * n as f64 * s4 / (73.0 * noise.var_eps2())).sqrt()
}

/// [`optimal_l_real`] rounded to the nearest integer and clamped to `[3, n − 1]`.
pub fn optimal_l(n: usize, noise: &NoiseMoments) -> usize {
    let l = optimal_l_real(n, noise).round() as usize;
    l.clamp(3, n.saturating_sub(1).max(3))
}

/// Second-order coefficient of the least squares estimator at its optimal bandwidth.
pub fn tw_second_order_coefficient() -> f64 {
    567f64.sqrt() / 28.0
}

/// Second-order coefficient of the Müller–Stadtmüller estimator at `L_opt`.
pub fn ms_second_order_coefficient() -> f64 {
    45990f64.sqrt() / 35.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalMseComparison {
    /// Common first-order term `var(ε²)/n`, the efficiency bound.
    pub first_order: f64,
    pub mse_tw_opt: f64,
    pub mse_ms_opt: f64,
    /// Ratio of the `n^{-3/2}` coefficients, MS over least squares.
    pub ratio: f64,
}

/// Both optimal-bandwidth MSE expansions,
/// `var(ε²)/n + c {σ⁴ var(ε²)}^{1/2} n^{-3/2}`.
pub fn optimal_mse_comparison(n: usize, noise: &NoiseMoments) -> OptimalMseComparison {
    let v = noise.var_eps2();
    let s4 = noise.sigma2() * noise.sigma2();
    let nf = n as f64;
    let first_order = v / nf;
    let second = (s4 * v).sqrt() * nf.powf(-1.5);
    let (c_tw, c_ms) = (tw_second_order_coefficient(), ms_second_order_coefficient());
    OptimalMseComparison {
        first_order,
        mse_tw_opt: first_order + c_tw * second,
        mse_ms_opt: first_order + c_ms * second,
        ratio: c_ms / c_tw,
    }
}

/// One exact quantity next to its prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub exact: f64,
    pub predicted: f64,
    /// `|exact − predicted| / scale`.
    pub rel_deviation: f64,
    /// Exact identities (as opposed to asymptotic expansions).
    pub exact_identity: bool,
}

impl IdentityCheck {
    fn new(name: &str, exact: f64, predicted: f64, scale: f64, exact_identity: bool) -> Self {
        IdentityCheck {
            name: name.to_string(),
            exact,
            predicted,
            rel_deviation: (exact - predicted).abs() / scale,
            exact_identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n: usize,
    pub m: usize,
    pub checks: Vec<IdentityCheck>,
    pub warnings: Vec<String>,
}

impl IdentityReport {
    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Evaluates the coefficient and trace identities behind the asymptotics at
/// bandwidth `m` (used both as `m` for `D` and as `L` for `M`).
///
/// Deviations of the asymptotic expansions are scaled by `m` for the `b_k`
/// sums and by the prediction for the traces, matching the order of the
/// neglected terms.
pub fn check_identities(n: usize, m: usize) -> Result<IdentityReport> {
    let mut warnings = Vec::new();
    let (nf, mf) = (n as f64, m as f64);
    if mf > nf.powf(2.0 / 3.0) {
        warnings.push(format!(
            "m = {m} exceeds n^(2/3) = {:.1}; asymptotic predictions assume m = o(n)",
            nf.powf(2.0 / 3.0)
        ));
    }
    let mut checks = Vec::new();

    let tw = TwCoefficients::new(n, m)?;
    let b = tw.lag_coefficients();
    let sum_b: f64 = b.iter().sum();
    let sum_b2: f64 = b.iter().map(|v| v * v).sum();
    checks.push(IdentityCheck::new(
        "sum_b",
        sum_b,
        mf - 5.0 * mf * mf / (16.0 * nf),
        mf,
        false,
    ));
    checks.push(IdentityCheck::new(
        "sum_b_sq",
        sum_b2,
        9.0 * mf / 4.0,
        mf,
        false,
    ));

    let d = build_tw_matrix(n, m)?;
    let two_pairs = 2.0 * (n * m - m * (m + 1) / 2) as f64;
    checks.push(IdentityCheck::new(
        "trace_D",
        d.trace(),
        two_pairs,
        two_pairs,
        true,
    ));

    if m >= 3 && 2 * m <= n {
        let l = m;
        let a = MsCoefficients::new(l)?;
        let sum_a: f64 = a.weights().iter().sum();
        checks.push(IdentityCheck::new("sum_a", sum_a, 1.0, 1.0, true));
        let sum_a2: f64 = a.weights().iter().map(|v| v * v).sum();
        checks.push(IdentityCheck::new(
            "sum_a_sq",
            sum_a2,
            9.0 / mf,
            9.0 / mf,
            false,
        ));

        let mm = build_ms_matrix(n, l)?;
        let t = traces(&mm);
        let tr_m = 2.0 * (nf - mf);
        checks.push(IdentityCheck::new("trace_M", t.trace, tr_m, tr_m, true));
        let diag_pred = 4.0 * nf - 134.0 * mf / 35.0;
        checks.push(IdentityCheck::new(
            "trace_diag_M_sq",
            t.diag_sq,
            diag_pred,
            diag_pred,
            false,
        ));
        let sq_pred = diag_pred + 18.0 * nf / mf;
        checks.push(IdentityCheck::new(
            "trace_M_sq",
            t.trace_sq,
            sq_pred,
            sq_pred,
            false,
        ));
    } else {
        warnings.push(format!(
            "M identities skipped: need 3 <= L and 2L <= n (L = {m})"
        ));
    }

    Ok(IdentityReport {
        n,
        m,
        checks,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trend_j_builtins() {
        assert_relative_eq!(
            trend_j(&MeanFunction::G1).unwrap().j,
            12.5,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            trend_j(&MeanFunction::G2).unwrap().j,
            25.0 / 6.0,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            trend_j(&MeanFunction::G3).unwrap().j,
            25.0 * PI * PI,
            max_relative = 1e-6
        );
    }

    #[test]
    fn trend_j_finite_differences() {
        let g = MeanFunction::custom("sin", |x| 5.0 * (2.0 * PI * x).sin(), None);
        assert_relative_eq!(trend_j(&g).unwrap().j, 25.0 * PI * PI, max_relative = 1e-6);
        let c = MeanFunction::constant(3.0);
        assert_eq!(trend_j(&c).unwrap().j, 0.0);
        let bad = MeanFunction::custom("bad", |x| 1.0 / (x - 0.5), None);
        assert!(trend_j(&bad).is_err());
    }

    #[test]
    fn lag_bias() {
        assert_relative_eq!(
            expected_lag_bias(12.5, 10, 100),
            0.125,
            max_relative = 1e-15
        );
        assert_eq!(expected_lag_bias(12.5, 0, 100), 0.0);
    }

    #[test]
    fn cov_lag_formula() {
        let noise = NoiseMoments::normal(1.0).unwrap();
        let c = asymptotic_cov_lag(1, 2, 1000, &noise).unwrap();
        assert_relative_eq!(
            c,
            1995.0 * 2.0 / (2.0 * 999.0 * 998.0),
            max_relative = 1e-15
        );
        assert!((c - 2.0 / 1000.0).abs() < 1e-5);
        let big = asymptotic_cov_lag(1, 2, 10_000_000, &noise).unwrap();
        assert!((1e7 * big - 2.0).abs() < 1e-6);
        assert!(asymptotic_cov_lag(2, 2, 100, &noise).is_err());
    }

    #[test]
    fn asymptotic_mse_ms_value() {
        let noise = NoiseMoments::normal(1.0).unwrap();
        let v = asymptotic_mse_ms(1000, 66, &noise);
        let want = 2.0 / 1000.0 + 73.0 * 66.0 * 2.0 / (70.0 * 1e6) + 9.0 / 66000.0;
        assert_relative_eq!(v, want, max_relative = 1e-15);
        assert_relative_eq!(v, 0.002_274_020_779_220_78, max_relative = 1e-12);
    }

    #[test]
    fn asymptotic_mse_ms_convex_in_l() {
        let noise = NoiseMoments::normal(1.0).unwrap();
        let n = 1000;
        let f = |l| asymptotic_mse_ms(n, l, &noise);
        for l in 4..n {
            assert!(f(l - 1) + f(l + 1) - 2.0 * f(l) > 0.0, "L={l}");
        }
    }

    #[test]
    fn optimal_bandwidth() {
        let noise = NoiseMoments::normal(1.0).unwrap();
        assert_eq!(optimal_l(1000, &noise), 66);
        let heavy = NoiseMoments::new(1.0, 0.0, 9.0).unwrap(); // var(eps^2) = 8 = 4 x normal
        assert_relative_eq!(
            optimal_l_real(1000, &heavy),
            optimal_l_real(1000, &noise) / 2.0,
            max_relative = 1e-14
        );
        assert_eq!(optimal_l(10, &heavy), 3);
    }

    #[test]
    fn optimal_comparison() {
        let noise = NoiseMoments::normal(0.25).unwrap();
        let c = optimal_mse_comparison(500, &noise);
        assert_relative_eq!(
            c.first_order,
            noise.var_eps2() / 500.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(c.ratio, 7.204_936_579_256_692, max_relative = 1e-12);
        assert!(c.mse_tw_opt < c.mse_ms_opt);
    }

    #[test]
    fn identities_small() {
        let r = check_identities(1000, 10).unwrap();
        assert!(r.get("trace_D").unwrap().rel_deviation < 1e-12);
        assert!(r.get("trace_M").unwrap().rel_deviation < 1e-12);
        assert!(r.get("sum_a").unwrap().rel_deviation < 1e-12);
        assert!(r.warnings.is_empty());
        let r = check_identities(100, 40).unwrap();
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn parse_mean() {
        assert_eq!("G3".parse::<MeanFunction>().unwrap().name(), "g3");
        assert!("g4".parse::<MeanFunction>().is_err());
    }
}
