//! Quadratic-form representation of the difference-based estimators.
//!
//! Both the least squares estimator and the Müller–Stadtmüller estimator can
//! be written as `yᵀAy / tr(A)` for a symmetric banded `A` (`D` and `M`
//! respectively). Given that form, the exact finite-sample bias and variance
//! follow from the first four moments of the noise.
//!
//! Matrices are never materialised densely: [`BandedSymmetric`] keeps the
//! full diagonal plus one value per band offset together with the range of
//! rows on which that offset is populated.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::NoiseMoments;

/// Coefficients `b_0..b_{m+1}` of the least squares estimator's matrix `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwCoefficients {
    pub n: usize,
    pub m: usize,
    /// `b[0] = b[m+1] = 0`, `b[k] = 1 − d̄_w(d_k − d̄_w)/Σ w_j(d_j − d̄_w)²`.
    pub b: Vec<f64>,
    /// Weighted mean `d̄_w = Σ w_k d_k`.
    pub dbar_w: f64,
}

impl TwCoefficients {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m < 2 || m >= n {
            return Err(Error::bandwidth(
                m as f64,
                format!("need 2 <= m <= n-1 = {}", n.saturating_sub(1)),
            ));
        }
        let nf = n as f64;
        let total = (n * m - m * (m + 1) / 2) as f64;
        let w: Vec<f64> = (1..=m).map(|k| (n - k) as f64 / total).collect();
        let d: Vec<f64> = (1..=m).map(|k| (k * k) as f64 / (nf * nf)).collect();
        let dbar_w: f64 = w.iter().zip(&d).map(|(w, d)| w * d).sum();
        let spread: f64 = w
            .iter()
            .zip(&d)
            .map(|(w, d)| w * (d - dbar_w) * (d - dbar_w))
            .sum();
        let mut b = Vec::with_capacity(m + 2);
        b.push(0.0);
        b.extend(d.iter().map(|dk| 1.0 - dbar_w * (dk - dbar_w) / spread));
        b.push(0.0);
        Ok(TwCoefficients { n, m, b, dbar_w })
    }

    /// `b_1..b_m`.
    pub fn lag_coefficients(&self) -> &[f64] {
        &self.b[1..=self.m]
    }
}

/// Weights `a_0..a_L` of the Müller–Stadtmüller estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsCoefficients {
    pub l: usize,
    /// `a[0] = 0`, `a[k] = 3{3L² + 3L + 2 − 6(2L + 1)k + 10k²}/{L(L − 1)(L − 2)}`.
    pub a: Vec<f64>,
}

impl MsCoefficients {
    pub fn new(l: usize) -> Result<Self> {
        if l < 3 {
            return Err(Error::bandwidth(l as f64, "need L >= 3"));
        }
        let lf = l as f64;
        let denom = lf * (lf - 1.0) * (lf - 2.0);
        let base = 3.0 * lf * lf + 3.0 * lf + 2.0;
        let mut a = Vec::with_capacity(l + 1);
        a.push(0.0);
        a.extend((1..=l).map(|k| {
            let k = k as f64;
            3.0 * (base - 6.0 * (2.0 * lf + 1.0) * k + 10.0 * k * k) / denom
        }));
        Ok(MsCoefficients { l, a })
    }

    /// `a_1..a_L`.
    pub fn weights(&self) -> &[f64] {
        &self.a[1..]
    }
}

/// One off-diagonal offset of a [`BandedSymmetric`] matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub offset: usize,
    pub value: f64,
    /// Zero-based rows `i` for which `A[i][i + offset] = value`.
    pub rows: Range<usize>,
}

impl Band {
    fn len(&self) -> usize {
        self.rows.len()
    }
}

/// Symmetric banded matrix stored as its diagonal plus per-offset bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandedSymmetric {
    n: usize,
    diag: Vec<f64>,
    bands: Vec<Band>,
}

impl BandedSymmetric {
    /// Builds a matrix from its diagonal and bands. Bands must have distinct
    /// positive offsets and rows that stay inside the matrix.
    pub fn new(diag: Vec<f64>, mut bands: Vec<Band>) -> Result<Self> {
        let n = diag.len();
        bands.sort_by_key(|b| b.offset);
        for pair in bands.windows(2) {
            if pair[0].offset == pair[1].offset {
                return Err(Error::Config(format!(
                    "duplicate band offset {}",
                    pair[0].offset
                )));
            }
        }
        for b in &bands {
            if b.offset == 0 || (!b.rows.is_empty() && b.rows.end + b.offset > n) {
                return Err(Error::Config(format!(
                    "band offset {} with rows {:?} does not fit an {n}x{n} matrix",
                    b.offset, b.rows
                )));
            }
        }
        Ok(BandedSymmetric { n, diag, bands })
    }

    pub fn diagonal_matrix(diag: Vec<f64>) -> Self {
        BandedSymmetric {
            n: diag.len(),
            diag,
            bands: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest populated offset.
    pub fn bandwidth(&self) -> usize {
        self.bands
            .iter()
            .filter(|b| !b.rows.is_empty())
            .map(|b| b.offset)
            .max()
            .unwrap_or(0)
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Entry `(i, j)`, zero-based.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of bounds");
        if i == j {
            return self.diag[i];
        }
        let (lo, k) = (i.min(j), i.abs_diff(j));
        self.bands
            .iter()
            .find(|b| b.offset == k)
            .filter(|b| b.rows.contains(&lo))
            .map_or(0.0, |b| b.value)
    }

    /// Unnormalised `yᵀAy`.
    pub fn form(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        let diag: f64 = self.diag.iter().zip(y).map(|(a, v)| a * v * v).sum();
        let off: f64 = self
            .bands
            .iter()
            .map(|b| {
                let k = b.offset;
                b.value * b.rows.clone().map(|i| y[i] * y[i + k]).sum::<f64>()
            })
            .sum();
        Ok(diag + 2.0 * off)
    }

    /// `Ay`.
    pub fn matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let mut out: Vec<f64> = self.diag.iter().zip(y).map(|(a, v)| a * v).collect();
        for b in &self.bands {
            let k = b.offset;
            for i in b.rows.clone() {
                out[i] += b.value * y[i + k];
                out[i + k] += b.value * y[i];
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Nonzero entries as zero-based `(i, j, value)`, both triangles, in row
    /// major order.
    pub fn nonzero_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (i, &v) in self.diag.iter().enumerate() {
            if v != 0.0 {
                rows[i].push((i, v));
            }
        }
        for b in self.bands.iter().filter(|b| b.value != 0.0) {
            for i in b.rows.clone() {
                rows[i].push((i + b.offset, b.value));
                rows[i + b.offset].push((i, b.value));
            }
        }
        rows.into_iter()
            .enumerate()
            .flat_map(|(i, mut r)| {
                r.sort_by_key(|&(j, _)| j);
                r.into_iter().map(move |(j, v)| (i, j, v))
            })
            .collect()
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: y.len(),
            });
        }
        Ok(())
    }
}

/// Builds `D` for the least squares estimator with `m` lags.
///
/// Each lag `k` adds `b_k (e_{i+k} − e_i)(e_{i+k} − e_i)ᵀ` for `i = 1..n−k`,
/// so `d_ii = Σ_{k ≤ min(n−i, m)} b_k + Σ_{k ≤ min(i−1, m)} b_k`. For
/// `n ≥ 2m` this is the familiar `Σ_{k=1}^m b_k + Σ_{k=0}^{min(i−1,n−i,m)} b_k`.
pub fn build_tw_matrix(n: usize, m: usize) -> Result<BandedSymmetric> {
    let coef = TwCoefficients::new(n, m)?;
    let b = &coef.b;
    // prefix[j] = b_1 + ... + b_j
    let mut prefix = vec![0.0; m + 1];
    for k in 1..=m {
        prefix[k] = prefix[k - 1] + b[k];
    }
    let diag: Vec<f64> = (1..=n)
        .map(|i| prefix[(n - i).min(m)] + prefix[(i - 1).min(m)])
        .collect();
    let bands = (1..=m)
        .map(|k| Band {
            offset: k,
            value: -b[k],
            rows: 0..n - k,
        })
        .collect();
    let d = BandedSymmetric::new(diag, bands)?;
    debug_assert!({
        let two_n = 2.0 * (n * m - m * (m + 1) / 2) as f64;
        (d.trace() - two_n).abs() <= 1e-9 * two_n
    });
    Ok(d)
}

/// Builds `M` for the Müller–Stadtmüller estimator with bandwidth `L`.
///
/// Diagonal: `1 + Σ_{k<i} a_k` for `i ≤ L`, `2` for `L < i ≤ n − L`, and
/// `Σ_{k=i}^n a_{k+L−n}` for `i > n − L`. Off-diagonal `−a_{|i−j|}` when the
/// smaller index is at most `n − L`.
pub fn build_ms_matrix(n: usize, l: usize) -> Result<BandedSymmetric> {
    if l < 3 || l >= n {
        return Err(Error::bandwidth(
            l as f64,
            format!("need 3 <= L <= n-1 = {}", n.saturating_sub(1)),
        ));
    }
    if 2 * l > n {
        return Err(Error::bandwidth(l as f64, format!("need 2L <= n = {n}")));
    }
    let coef = MsCoefficients::new(l)?;
    let a = &coef.a;
    let mut diag = Vec::with_capacity(n);
    let mut head = 1.0;
    for i in 1..=l {
        head += a[i - 1];
        diag.push(head);
    }
    diag.extend(std::iter::repeat_n(2.0, n - 2 * l));
    for i in (n - l + 1)..=n {
        let tail: f64 = (i..=n).map(|k| a[k + l - n]).sum();
        diag.push(tail);
    }
    let bands = (1..=l)
        .map(|k| Band {
            offset: k,
            value: -a[k],
            rows: 0..n - l,
        })
        .collect();
    let mat = BandedSymmetric::new(diag, bands)?;
    debug_assert!((mat.trace() - 2.0 * (n - l) as f64).abs() <= 1e-9 * (n as f64));
    Ok(mat)
}

/// `yᵀAy / tr(A)` in `O(n · bandwidth)`.
pub fn quad_form(a: &BandedSymmetric, y: &[f64]) -> Result<f64> {
    let tr = a.trace();
    if tr == 0.0 {
        return Err(Error::Precondition("matrix has zero trace".into()));
    }
    Ok(a.form(y)? / tr)
}

/// `tr(A)`, `tr(A²)` and `tr[{diag(A)}²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    pub trace: f64,
    pub trace_sq: f64,
    pub diag_sq: f64,
}

pub fn traces(a: &BandedSymmetric) -> Traces {
    let diag_sq: f64 = a.diag.iter().map(|v| v * v).sum();
    let off: f64 = a
        .bands
        .iter()
        .map(|b| b.value * b.value * b.len() as f64)
        .sum();
    Traces {
        trace: a.trace(),
        trace_sq: diag_sq + 2.0 * off,
        diag_sq,
    }
}

/// Exact bias, variance and MSE of `yᵀAy/tr(A)` as an estimator of `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
}

/// Exact moments for `y = g + ε` with i.i.d. noise described by `noise`:
///
/// `MSE = [(gᵀAg)² + 4σ²gᵀA²g + 4gᵀA·diag(A)1·σ³γ3
///        + σ⁴tr{diag(A)²}(γ4 − 3) + 2σ⁴tr(A²)] / tr(A)²`.
pub fn exact_mse(a: &BandedSymmetric, g: &[f64], noise: &NoiseMoments) -> Result<ExactMoments> {
    let tr = a.trace();
    if tr == 0.0 {
        return Err(Error::Precondition("matrix has zero trace".into()));
    }
    let ag = a.matvec(g)?;
    let gag: f64 = g.iter().zip(&ag).map(|(x, y)| x * y).sum();
    let ga2g: f64 = ag.iter().map(|v| v * v).sum();
    let ga_diag: f64 = ag.iter().zip(a.diag()).map(|(x, d)| x * d).sum();
    let t = traces(a);

    let s2 = noise.sigma2();
    let s = s2.sqrt();
    let variance_num = 4.0 * s2 * ga2g
        + 4.0 * ga_diag * s2 * s * noise.gamma3()
        + s2 * s2 * t.diag_sq * (noise.gamma4() - 3.0)
        + 2.0 * s2 * s2 * t.trace_sq;
    let bias = gag / tr;
    let variance = variance_num / (tr * tr);
    Ok(ExactMoments {
        bias,
        variance,
        mse: bias * bias + variance,
    })
}

/// Degrees of freedom `ν = tr(A)²/tr(A²)` of the scaled chi-square
/// approximation `(σ²/ν)χ²(ν)`.
pub fn chi_square_df(a: &BandedSymmetric) -> Result<f64> {
    let t = traces(a);
    if t.trace_sq <= 0.0 {
        return Err(Error::Precondition("tr(A^2) must be positive".into()));
    }
    Ok(t.trace * t.trace / t.trace_sq)
}
