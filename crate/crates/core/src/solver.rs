//! Cyclic coordinate descent for the M-Lasso estimating equations.
//!
//! For a fixed penalty `lambda` the solver looks for `(s, sigma)` with
//!
//! ```text
//! <m_j, e_psi> = lambda * sub_j          for every column j
//! sum_i chi(|y_i - m_(i)^H s| / sigma) = alpha * n
//! ```
//!
//! where `e_psi = psi((y - M s) / sigma) * sigma` is the pseudo-residual and
//! `sub_j` is `ssgn(s_j)` on the support and any complex number of modulus at
//! most one elsewhere. Each sweep first refreshes the scale, then updates the
//! coefficients one at a time by complex soft-thresholding of
//! `s_j + <m_j, e_psi>`, which is the exact coordinate step when every column
//! has unit norm.

use ndarray::{Array1, Array2, ArrayView1, ShapeBuilder};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::{LossKind, LossModel};

const UNIT_NORM_TOL: f64 = 1e-8;

/// Complex measurement matrix with unit-norm columns and its observation.
#[derive(Debug, Clone)]
pub struct Problem {
    // column-major so that column views are contiguous
    matrix: Array2<Complex64>,
    observation: Array1<Complex64>,
}

impl Problem {
    /// Builds a problem, rejecting columns whose norm differs from one by more
    /// than `1e-8`.
    pub fn new(matrix: Array2<Complex64>, observation: Array1<Complex64>) -> Result<Self> {
        let problem = Self::unchecked(matrix, observation)?;
        for (j, col) in problem.matrix.columns().into_iter().enumerate() {
            let norm = column_norm(col);
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NonUnitColumn { column: j, norm });
            }
        }
        Ok(problem)
    }

    /// Rescales every column to unit norm. Returns the problem together with
    /// the original column norms; a coefficient `s_j` of the normalized problem
    /// corresponds to `s_j / norms[j]` in the original parametrization.
    pub fn normalized(
        matrix: Array2<Complex64>,
        observation: Array1<Complex64>,
    ) -> Result<(Self, Vec<f64>)> {
        let mut problem = Self::unchecked(matrix, observation)?;
        let mut norms = Vec::with_capacity(problem.cols());
        for (j, mut col) in problem.matrix.columns_mut().into_iter().enumerate() {
            let norm = column_norm(col.view());
            if norm == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "column {j} is identically zero"
                )));
            }
            col.mapv_inplace(|v| v / norm);
            norms.push(norm);
        }
        Ok((problem, norms))
    }

    fn unchecked(matrix: Array2<Complex64>, observation: Array1<Complex64>) -> Result<Self> {
        let (n, p) = matrix.dim();
        if n == 0 || p == 0 {
            return Err(Error::DimensionMismatch(format!("empty {n}x{p} matrix")));
        }
        if observation.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {n} rows but observation has {} entries",
                observation.len()
            )));
        }
        if !matrix.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("measurement matrix"));
        }
        if !observation
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
        {
            return Err(Error::NonFinite("observation"));
        }
        let mut stored = Array2::zeros((n, p).f());
        stored.assign(&matrix);
        Ok(Problem {
            matrix: stored,
            observation,
        })
    }

    /// Same matrix, different observation.
    pub fn with_observation(&self, observation: Array1<Complex64>) -> Result<Self> {
        if observation.len() != self.rows() {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows but observation has {} entries",
                self.rows(),
                observation.len()
            )));
        }
        if !observation
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
        {
            return Err(Error::NonFinite("observation"));
        }
        Ok(Problem {
            matrix: self.matrix.clone(),
            observation,
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn observation(&self) -> &Array1<Complex64> {
        &self.observation
    }

    /// `y - M s`.
    pub fn residual(&self, coefficients: ArrayView1<Complex64>) -> Array1<Complex64> {
        &self.observation - &self.matrix.dot(&coefficients)
    }

    /// `|<m_j, v>|` for every column.
    pub fn abs_correlations(&self, v: ArrayView1<Complex64>) -> Vec<f64> {
        self.matrix
            .columns()
            .into_iter()
            .map(|col| hermitian_dot(col, v).norm())
            .collect()
    }
}

fn column_norm(col: ArrayView1<Complex64>) -> f64 {
    col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `a^H b`.
pub(crate) fn hermitian_dot(a: ArrayView1<Complex64>, b: ArrayView1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub max_sweeps: usize,
    /// Stop when the largest coefficient change in a sweep is below
    /// `coef_tol * max(1, max_j |s_j|)` ...
    pub coef_tol: f64,
    /// ... and the relative scale change is below this.
    pub scale_tol: f64,
    pub kkt_tol: f64,
    pub sigma_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_sweeps: 10_000,
            coef_tol: 1e-7,
            scale_tol: 1e-7,
            kkt_tol: 1e-4,
            sigma_floor: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter(
                "max_sweeps must be positive".into(),
            ));
        }
        positive("coef_tol", self.coef_tol)?;
        positive("scale_tol", self.scale_tol)?;
        positive("kkt_tol", self.kkt_tol)?;
        positive("sigma_floor", self.sigma_floor)
    }
}

/// Stationarity diagnostics of a candidate solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// `|<m_j, e_psi>|` per column.
    pub correlations: Vec<f64>,
    pub active: Vec<bool>,
    /// Largest of `| |c_j| - lambda |` over active and `(|c_j| - lambda)_+`
    /// over inactive columns.
    pub max_violation: f64,
    /// `|sum_i chi(|r_i| / sigma) / n - alpha|`.
    pub scale_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct MLassoFit {
    pub coefficients: Array1<Complex64>,
    pub scale: f64,
    pub lambda: f64,
    /// Number of full sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    pub kkt: KktReport,
}

impl MLassoFit {
    pub fn nonzeros(&self) -> usize {
        self.coefficients
            .iter()
            .filter(|v| **v != Complex64::new(0.0, 0.0))
            .count()
    }

    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(|(j, _)| j)
            .collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|v| v.norm()).sum()
    }

    /// `(coefficients, scale)` for warm-starting another solve.
    pub fn start(&self) -> (ArrayView1<'_, Complex64>, f64) {
        (self.coefficients.view(), self.scale)
    }
}

/// `S_lambda(x) = ssgn(x) (|x| - lambda)_+`.
pub fn soft_threshold(x: Complex64, lambda: f64) -> Complex64 {
    let modulus = x.norm();
    if modulus <= lambda {
        Complex64::new(0.0, 0.0)
    } else {
        x * ((modulus - lambda) / modulus)
    }
}

/// Pseudo-residual of one raw residual: `psi(r / sigma) * sigma`.
#[inline]
fn pseudo_entry(loss: &LossModel, r: Complex64, sigma: f64) -> Complex64 {
    match loss.kind() {
        LossKind::LeastSquares => r,
        LossKind::Huber => {
            let bound = loss.threshold() * sigma;
            let modulus = r.norm();
            if modulus <= bound {
                r
            } else {
                r * (bound / modulus)
            }
        }
    }
}

/// `sigma^2 * chi(|r| / sigma)`, evaluated without dividing by sigma.
#[inline]
fn scaled_chi(loss: &LossModel, r: Complex64, sigma: f64) -> f64 {
    match loss.kind() {
        LossKind::LeastSquares => r.norm_sqr(),
        LossKind::Huber => {
            let bound = loss.threshold() * sigma;
            r.norm_sqr().min(bound * bound)
        }
    }
}

/// `psi((y - M s) / sigma) * sigma`; equals `y - M s` for least squares.
pub fn pseudo_residual(
    loss: &LossModel,
    problem: &Problem,
    coefficients: ArrayView1<Complex64>,
    sigma: f64,
) -> Array1<Complex64> {
    pseudo_residual_of(loss, &problem.residual(coefficients), sigma)
}

pub(crate) fn pseudo_residual_of(
    loss: &LossModel,
    residual: &Array1<Complex64>,
    sigma: f64,
) -> Array1<Complex64> {
    residual.mapv(|r| pseudo_entry(loss, r, sigma))
}

/// One application of the scale map on a residual vector:
/// `sigma^2 <- sigma^2 / (alpha n) * sum_i chi(|r_i| / sigma)`.
pub(crate) fn scale_step(
    loss: &LossModel,
    residual: &Array1<Complex64>,
    sigma: f64,
    sigma_floor: f64,
) -> Result<f64> {
    let n = residual.len() as f64;
    let total: f64 = residual.iter().map(|&r| scaled_chi(loss, r, sigma)).sum();
    let updated = (total / (loss.alpha() * n)).sqrt();
    if !(updated >= sigma_floor) || !updated.is_finite() {
        return Err(Error::DegenerateScale {
            sigma: updated,
            floor: sigma_floor,
        });
    }
    Ok(updated)
}

/// Scale update of the coordinate descent sweep at fixed coefficients.
pub fn update_scale(
    loss: &LossModel,
    problem: &Problem,
    coefficients: ArrayView1<Complex64>,
    sigma: f64,
    sigma_floor: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    scale_step(loss, &problem.residual(coefficients), sigma, sigma_floor)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "scale must be positive, got {sigma}"
        )))
    }
}

/// Crude robust scale of `y` used when no starting scale is given:
/// `median |y_i| / 0.6745 / sqrt(2)`, falling back to the root mean square when
/// the median vanishes.
pub fn initial_scale(observation: ArrayView1<Complex64>) -> Result<f64> {
    let mut moduli: Vec<f64> = observation.iter().map(|v| v.norm()).collect();
    moduli.sort_by(|a, b| a.total_cmp(b));
    let n = moduli.len();
    let median = if n % 2 == 1 {
        moduli[n / 2]
    } else {
        0.5 * (moduli[n / 2 - 1] + moduli[n / 2])
    };
    let sigma = median / 0.6745 * std::f64::consts::FRAC_1_SQRT_2;
    if sigma > 0.0 {
        return Ok(sigma);
    }
    let rms = (moduli.iter().map(|m| m * m).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        Ok(rms)
    } else {
        Err(Error::DegenerateScale {
            sigma: 0.0,
            floor: 0.0,
        })
    }
}

/// Solves the M-Lasso equations at a fixed `lambda`.
///
/// `init` is an optional `(coefficients, scale)` starting point; the default is
/// `s = 0` with [`initial_scale`]. The returned fit carries a KKT report
/// computed at `config.kkt_tol`.
pub fn ccd_solve(
    loss: &LossModel,
    problem: &Problem,
    lambda: f64,
    init: Option<(ArrayView1<Complex64>, f64)>,
    config: &SolverConfig,
) -> Result<MLassoFit> {
    config.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let (n, p) = (problem.rows(), problem.cols());
    if lambda == 0.0 && n <= p {
        return Err(Error::Underdetermined { n, p });
    }

    let (mut coefs, mut sigma) = match init {
        Some((s0, sigma0)) => {
            if s0.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "initial coefficients have length {}, expected {p}",
                    s0.len()
                )));
            }
            check_sigma(sigma0)?;
            (s0.to_owned(), sigma0)
        }
        None => (
            Array1::zeros(p),
            initial_scale(problem.observation().view())?,
        ),
    };

    let matrix = problem.matrix();
    let mut residual = problem.residual(coefs.view());
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        let previous_sigma = sigma;
        sigma = scale_step(loss, &residual, sigma, config.sigma_floor)?;

        let mut max_delta = 0.0f64;
        for j in 0..p {
            let col = matrix.column(j);
            // the raw residual is kept up to date; psi is applied on demand
            let correlation: Complex64 = col
                .iter()
                .zip(residual.iter())
                .map(|(m, &r)| m.conj() * pseudo_entry(loss, r, sigma))
                .sum();
            let old = coefs[j];
            let updated = soft_threshold(old + correlation, lambda);
            let delta = updated - old;
            if delta != Complex64::new(0.0, 0.0) {
                residual.scaled_add(-delta, &col);
                coefs[j] = updated;
                max_delta = max_delta.max(delta.norm());
            }
        }

        let largest = coefs.iter().fold(1.0f64, |acc, v| acc.max(v.norm()));
        if max_delta <= config.coef_tol * largest
            && (sigma - previous_sigma).abs() <= config.scale_tol * sigma
        {
            converged = true;
            break;
        }
    }

    let kkt = kkt_report(loss, problem, coefs.view(), sigma, lambda, config.kkt_tol);
    let fit = MLassoFit {
        coefficients: coefs,
        scale: sigma,
        lambda,
        iterations: sweeps,
        converged,
        kkt,
    };
    if converged {
        Ok(fit)
    } else {
        Err(Error::MaxSweepsExceeded {
            sweeps,
            fit: Box::new(fit),
        })
    }
}

/// Recomputes the pseudo-residual at the fit and checks both estimating
/// equations at tolerance `tol`.
pub fn kkt_check(loss: &LossModel, problem: &Problem, fit: &MLassoFit, tol: f64) -> KktReport {
    kkt_report(
        loss,
        problem,
        fit.coefficients.view(),
        fit.scale,
        fit.lambda,
        tol,
    )
}

pub(crate) fn kkt_report(
    loss: &LossModel,
    problem: &Problem,
    coefficients: ArrayView1<Complex64>,
    sigma: f64,
    lambda: f64,
    tol: f64,
) -> KktReport {
    let residual = problem.residual(coefficients);
    let pseudo = pseudo_residual_of(loss, &residual, sigma);
    let correlations = problem.abs_correlations(pseudo.view());
    let active: Vec<bool> = coefficients
        .iter()
        .map(|v| *v != Complex64::new(0.0, 0.0))
        .collect();
    let max_violation = correlations
        .iter()
        .zip(&active)
        .map(|(&c, &is_active)| {
            if is_active {
                (c - lambda).abs()
            } else {
                (c - lambda).max(0.0)
            }
        })
        .fold(0.0f64, f64::max);

    let n = residual.len() as f64;
    let chi_mean = residual
        .iter()
        .map(|&r| scaled_chi(loss, r, sigma))
        .sum::<f64>()
        / (sigma * sigma * n);
    let scale_residual = (chi_mean - loss.alpha()).abs();

    KktReport {
        correlations,
        active,
        max_violation,
        scale_residual,
        tol,
        passed: max_violation <= tol && scale_residual <= tol,
    }
}

/// `||y - M s||^2 + 2 lambda ||s||_1`, the penalized least-squares objective
/// whose minimizers coincide with least-squares M-Lasso solutions.
pub fn lasso_objective(problem: &Problem, coefficients: ArrayView1<Complex64>, lambda: f64) -> f64 {
    let rss: f64 = problem
        .residual(coefficients)
        .iter()
        .map(|r| r.norm_sqr())
        .sum();
    rss + 2.0 * lambda * coefficients.iter().map(|v| v.norm()).sum::<f64>()
}
