//! Problem parameters `(N, p, lambda)`.

use crate::error::{Error, Result};
use crate::scalar::{Field, Real};
use serde::{Deserialize, Serialize};

/// Parameters of `-Delta u - lambda u = |u|^{p-1} u` on the `N`-ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    #[serde(rename = "N")]
    pub dim: usize,
    pub p: T,
    pub lambda: T,
}

/// Where `lambda` sits relative to the conformal threshold `N(N-2)/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRegime {
    /// `lambda <= N(N-2)/4`
    AtOrBelowConformal,
    /// `N(N-2)/4 < lambda < ((N-1)/2)^2`
    Window,
}

impl<T: Field> Params<T> {
    pub fn new(dim: usize, p: T, lambda: T) -> Result<Self> {
        let params = Params { dim, p, lambda };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidParams(format!("dimension N = {} must be at least 2", self.dim)));
        }
        if self.p <= T::one() {
            return Err(Error::InvalidParams(format!("exponent p = {} must exceed 1", self.p)));
        }
        if let Some(crit) = self.critical_exponent() {
            if self.p > crit && !self.p.near(&crit) {
                return Err(Error::InvalidParams(format!(
                    "exponent p = {} exceeds the critical exponent {}",
                    self.p, crit
                )));
            }
        }
        let bottom = self.spectral_bottom();
        if self.lambda.near(&bottom) {
            return Err(Error::Borderline(format!("lambda = {}", self.lambda)));
        }
        if self.lambda > bottom {
            return Err(Error::InvalidParams(format!(
                "lambda = {} must be below ((N-1)/2)^2 = {}",
                self.lambda, bottom
            )));
        }
        Ok(())
    }

    /// `(N+2)/(N-2)` for `N >= 3`.
    pub fn critical_exponent(&self) -> Option<T> {
        if self.dim <= 2 {
            return None;
        }
        let n = T::from_usize_exact(self.dim);
        let two = T::one() + T::one();
        Some((n.clone() + two.clone()) / (n - two))
    }

    pub fn is_critical(&self) -> bool {
        self.critical_exponent().map_or(false, |c| self.p.near(&c))
    }

    /// `((N-1)/2)^2`, the bottom of the spectrum of `-Delta`.
    pub fn spectral_bottom(&self) -> T {
        let two = T::one() + T::one();
        let h = (T::from_usize_exact(self.dim) - T::one()) / two;
        h.clone() * h
    }

    /// `N(N-2)/4`.
    pub fn conformal_threshold(&self) -> T {
        let n = T::from_usize_exact(self.dim);
        let two = T::one() + T::one();
        n.clone() * (n - two.clone()) / (two.clone() * two)
    }

    /// `lambda - N(N-2)/4`, the potential coefficient after the conformal change.
    pub fn lambda_tilde(&self) -> T {
        self.lambda.clone() - self.conformal_threshold()
    }

    pub fn regime(&self) -> LambdaRegime {
        if self.lambda <= self.conformal_threshold() {
            LambdaRegime::AtOrBelowConformal
        } else {
            LambdaRegime::Window
        }
    }

    /// `N - (N-2)(p+1)/2`, the weight exponent of the Euclidean nonlinearity.
    pub fn weight_exponent(&self) -> T {
        let n = T::from_usize_exact(self.dim);
        let two = T::one() + T::one();
        n.clone() - (n - two.clone()) * (self.p.clone() + T::one()) / two
    }
}

impl<T: Real> Params<T> {
    /// Decay rates `c_- <= c_+` of the linearised radial equation at infinity.
    pub fn decay_rates(&self) -> (T, T) {
        let h = (T::n(self.dim) - T::one()) / T::c(2.0);
        let root = (h * h - self.lambda).max(T::zero()).sqrt();
        (h - root, h + root)
    }

    /// The `H^1` decay rate `c(lambda) = (N-1)/2 + sqrt(((N-1)/2)^2 - lambda)`.
    pub fn decay_rate(&self) -> T {
        self.decay_rates().1
    }

    pub fn to_f64(&self) -> Params<f64> {
        Params { dim: self.dim, p: self.p.f64(), lambda: self.lambda.f64() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn validation() {
        assert!(Params::new(4, 3.0, 2.1).is_ok());
        assert!(matches!(Params::new(4, 3.0, 2.25), Err(Error::Borderline(_))));
        assert!(Params::new(4, 3.0, 2.5).is_err());
        assert!(Params::new(4, 3.5, 1.0).is_err());
        assert!(Params::new(4, 1.0, 1.0).is_err());
        assert!(Params::new(1, 2.0, 0.0).is_err());
        assert!(Params::new(2, 50.0, 0.1).is_ok());
    }

    #[test]
    fn critical_detection_float_and_exact() {
        assert!(Params::new(5, 7.0 / 3.0, 1.0).unwrap().is_critical());
        assert!(Params::new(7, 9.0 / 5.0, 8.8).unwrap().is_critical());
        let exact = Params::new(5, Ratio::new(7i64, 3), Ratio::from_integer(1)).unwrap();
        assert!(exact.is_critical());
        assert_eq!(exact.conformal_threshold(), Ratio::new(15, 4));
        assert_eq!(exact.weight_exponent(), Ratio::from_integer(0));
    }

    #[test]
    fn regimes_and_rates() {
        let p = Params::new(4, 3.0f64, 2.1).unwrap();
        assert_eq!(p.regime(), LambdaRegime::Window);
        let (lo, hi) = p.decay_rates();
        assert!((lo + hi - 3.0).abs() < 1e-14);
        assert!((lo * hi - 2.1).abs() < 1e-13);
        let q = Params::new(5, 7.0 / 3.0, 1.0).unwrap();
        assert_eq!(q.regime(), LambdaRegime::AtOrBelowConformal);
    }
}
