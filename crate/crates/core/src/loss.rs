//! Circularly symmetric loss functions for complex residuals.
//!
//! A loss is `rho(e) = rho0(|e|)` for a convex `rho0` with `rho0(0) = 0`. The
//! score `psi` is the derivative with respect to the conjugate argument,
//! `psi(e) = rho0'(|e|) ssgn(e) / 2`, and `chi(t) = rho0'(t) t - rho0(t)` drives
//! the scale equation. The consistency factor `alpha = E[chi(|e|)]` for
//! `e ~ CN(0, 1)` makes the joint scale estimate Fisher-consistent under
//! circular complex Gaussian noise.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    LeastSquares,
    Huber,
}

/// One loss family together with its consistency factor.
///
/// Immutable once built; the constructors enforce `alpha > 0` and the closed
/// forms `alpha = 1` (least squares) and `alpha = 1 - exp(-c^2)` (Huber).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossModel {
    kind: LossKind,
    c: f64,
    alpha: f64,
}

impl LossModel {
    pub fn least_squares() -> Self {
        LossModel {
            kind: LossKind::LeastSquares,
            c: f64::INFINITY,
            alpha: 1.0,
        }
    }

    /// Huber loss with threshold `c > 0`.
    pub fn huber(c: f64) -> Result<Self> {
        if !(c > 0.0) || c.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "Huber threshold must be positive, got {c}"
            )));
        }
        Ok(LossModel {
            kind: LossKind::Huber,
            c,
            alpha: huber_consistency_factor(c),
        })
    }

    /// Huber loss with `c^2 = F^{-1}_{chi2(2)}(q) / 2`.
    pub fn huber_from_q(q: f64) -> Result<Self> {
        Self::huber(huber_threshold_from_q(q)?)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Huber threshold; infinite for least squares.
    pub fn threshold(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho0(&self, t: f64) -> f64 {
        match self.kind {
            LossKind::LeastSquares => t * t,
            LossKind::Huber => {
                if t <= self.c {
                    t * t
                } else {
                    2.0 * self.c * t - self.c * self.c
                }
            }
        }
    }

    pub fn rho(&self, e: Complex64) -> f64 {
        self.rho0(e.norm())
    }

    pub fn psi(&self, e: Complex64) -> Complex64 {
        match self.kind {
            LossKind::LeastSquares => e,
            LossKind::Huber => {
                let modulus = e.norm();
                if modulus <= self.c {
                    e
                } else {
                    e * (self.c / modulus)
                }
            }
        }
    }

    pub fn chi(&self, t: f64) -> f64 {
        match self.kind {
            LossKind::LeastSquares => t * t,
            LossKind::Huber => {
                if t <= self.c {
                    t * t
                } else {
                    self.c * self.c
                }
            }
        }
    }

    /// Same as [`LossModel::alpha`].
    pub fn consistency_factor(&self) -> f64 {
        self.alpha
    }
}

/// Complex signum: `e / |e|`, and exactly zero at the origin.
pub fn ssgn(e: Complex64) -> Complex64 {
    let modulus = e.norm();
    if modulus == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        e / modulus
    }
}

/// Huber threshold for a target quantile `q` of the standardized residual
/// modulus under CN(0, 1): `c = sqrt(-ln(1 - q))`.
pub fn huber_threshold_from_q(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile q must lie in (0, 1), got {q}"
        )));
    }
    Ok((0.5 * chi2::quantile_2(q)).sqrt())
}

/// `E[chi_{H,c}(|e|)]` for `e ~ CN(0, 1)`.
///
/// `2|e|^2` is chi-square with 2 degrees of freedom, so the expectation is
/// `c^2 (1 - F2(2c^2)) + F4(2c^2)`, which simplifies to `1 - exp(-c^2)`.
pub fn huber_consistency_factor(c: f64) -> f64 {
    let x = 2.0 * c * c;
    let value = c * c * (1.0 - chi2::cdf_2(x)) + chi2::cdf_4(x);
    if value.is_finite() {
        value
    } else {
        1.0
    }
}

/// Closed-form chi-square distribution functions for 2 and 4 degrees of
/// freedom.
pub mod chi2 {
    pub fn cdf_2(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-x / 2.0).exp_m1()
        }
    }

    pub fn cdf_4(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-x / 2.0).exp_m1() - (-x / 2.0).exp() * (x / 2.0)
        }
    }

    /// Inverse of [`cdf_2`] on `(0, 1)`.
    pub fn quantile_2(q: f64) -> f64 {
        -2.0 * (-q).ln_1p()
    }
}
