//! Input data and noise-law descriptors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for recognising the design `x_i = i/n`.
pub const EQUAL_SPACING_RTOL: f64 = 1e-12;

/// Ordered design points and responses of one regression dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample1D {
    x: Vec<f64>,
    y: Vec<f64>,
    equally_spaced: bool,
}

impl Sample1D {
    /// Builds a sample from design points and responses.
    ///
    /// `x` must be nondecreasing and both vectors finite and of equal
    /// length, at least two.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: y.len(),
            });
        }
        if y.len() < 2 {
            return Err(Error::InvalidSample(format!(
                "need at least 2 observations, got {}",
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample("non-finite value".into()));
        }
        if x.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSample(
                "design points must be nondecreasing".into(),
            ));
        }
        let equally_spaced = is_unit_grid(&x, EQUAL_SPACING_RTOL);
        Ok(Sample1D {
            x,
            y,
            equally_spaced,
        })
    }

    /// Sample on the grid `x_i = i/n`, `i = 1..n`.
    pub fn equally_spaced(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        let x = unit_grid(n);
        Self::new(x, y)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn is_equally_spaced(&self) -> bool {
        self.equally_spaced
    }
}

/// The grid `i/n` for `i = 1..n`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// True when `x_i = i/n` for every `i` within relative tolerance `rtol`.
pub fn is_unit_grid(x: &[f64], rtol: f64) -> bool {
    let n = x.len() as f64;
    x.iter().enumerate().all(|(i, &xi)| {
        let target = (i + 1) as f64 / n;
        (xi - target).abs() <= rtol * target
    })
}

/// Moments of the error law: variance, skewness `γ3` and kurtosis `γ4`.
///
/// `ρ = (γ4 − 1)/γ4` is derived on demand and never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMoments {
    sigma2: f64,
    gamma3: f64,
    gamma4: f64,
}

impl NoiseMoments {
    pub fn new(sigma2: f64, gamma3: f64, gamma4: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::Moments(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        if !gamma3.is_finite() {
            return Err(Error::Moments("gamma3 must be finite".into()));
        }
        if !(gamma4.is_finite() && gamma4 > 1.0) {
            return Err(Error::Moments(format!(
                "gamma4 must exceed 1, got {gamma4}"
            )));
        }
        Ok(NoiseMoments {
            sigma2,
            gamma3,
            gamma4,
        })
    }

    /// Gaussian noise: `γ3 = 0`, `γ4 = 3`.
    pub fn normal(sigma2: f64) -> Result<Self> {
        Self::new(sigma2, 0.0, 3.0)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn gamma3(&self) -> f64 {
        self.gamma3
    }

    pub fn gamma4(&self) -> f64 {
        self.gamma4
    }

    /// Asymptotic correlation between lag statistics.
    pub fn rho(&self) -> f64 {
        (self.gamma4 - 1.0) / self.gamma4
    }

    /// `var(ε²) = (γ4 − 1)σ⁴`.
    pub fn var_eps2(&self) -> f64 {
        (self.gamma4 - 1.0) * self.sigma2 * self.sigma2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_unit_grid() {
        let s = Sample1D::equally_spaced(vec![0.0; 7]).unwrap();
        assert!(s.is_equally_spaced());
        let s = Sample1D::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(!s.is_equally_spaced());
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(Sample1D::new(vec![0.1, 0.2], vec![1.0]).is_err());
        assert!(Sample1D::new(vec![0.2, 0.1], vec![1.0, 2.0]).is_err());
        assert!(Sample1D::new(vec![0.1, 0.2], vec![1.0, f64::NAN]).is_err());
        assert!(Sample1D::equally_spaced(vec![1.0]).is_err());
    }

    #[test]
    fn moments_validation() {
        assert!(NoiseMoments::new(1.0, 0.0, 1.0).is_err());
        assert!(NoiseMoments::new(0.0, 0.0, 3.0).is_err());
        let m = NoiseMoments::normal(2.0).unwrap();
        assert!((m.rho() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.var_eps2(), 8.0);
    }
}
