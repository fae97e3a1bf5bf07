//! Regularization paths: `lambda_max`, log-spaced penalty grids, warm-started
//! path solves and the search for the largest penalty with a given support
//! size.

use ndarray::Array1;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::solver::{ccd_solve, initial_scale, scale_step, MLassoFit, Problem, SolverConfig};

/// Relative offset of the first grid point below `lambda_max`.
pub const GRID_TOP_OFFSET: f64 = 1e-6;

const NULL_SCALE_TOL: f64 = 1e-14;
const NULL_SCALE_MAX_ITER: usize = 100_000;
const BISECTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOptions {
    pub count: usize,
    pub floor_ratio: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            count: 200,
            floor_ratio: 1e-3,
        }
    }
}

/// The all-zero solution: its scale and the smallest penalty that keeps it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullModel {
    pub lambda_max: f64,
    pub scale: f64,
}

/// Solves the scale equation at `s = 0` by iterating the scale map, then
/// takes the largest pseudo-residual correlation.
pub fn null_model(loss: &LossModel, problem: &Problem, config: &SolverConfig) -> Result<NullModel> {
    let y = problem.observation();
    let mut sigma = initial_scale(y.view())?;
    let mut settled = false;
    for _ in 0..NULL_SCALE_MAX_ITER {
        let next = scale_step(loss, y, sigma, config.sigma_floor)?;
        let change = (next - sigma).abs();
        sigma = next;
        if change <= NULL_SCALE_TOL * sigma {
            settled = true;
            break;
        }
    }
    if !settled {
        return Err(Error::DegenerateScale {
            sigma,
            floor: config.sigma_floor,
        });
    }
    let pseudo = crate::solver::pseudo_residual_of(loss, y, sigma);
    let lambda_max = problem
        .abs_correlations(pseudo.view())
        .into_iter()
        .fold(0.0f64, f64::max);
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateScale {
            sigma,
            floor: config.sigma_floor,
        });
    }
    Ok(NullModel {
        lambda_max,
        scale: sigma,
    })
}

/// Smallest penalty for which `s = 0` solves the estimating equations.
pub fn lambda_max(loss: &LossModel, problem: &Problem) -> Result<f64> {
    Ok(null_model(loss, problem, &SolverConfig::default())?.lambda_max)
}

/// `count` values equally spaced in log scale, from
/// `lambda_max * (1 - GRID_TOP_OFFSET)` down to `lambda_max * floor_ratio`.
pub fn lambda_grid(lambda_max: f64, count: usize, floor_ratio: f64) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParameter(
            "grid count must be positive".into(),
        ));
    }
    if !(floor_ratio > 0.0 && floor_ratio < 1.0 - GRID_TOP_OFFSET) {
        return Err(Error::InvalidParameter(format!(
            "floor ratio must lie in (0, 1), got {floor_ratio}"
        )));
    }
    let top = (lambda_max * (1.0 - GRID_TOP_OFFSET)).ln();
    if count == 1 {
        return Ok(vec![top.exp()]);
    }
    let bottom = (lambda_max * floor_ratio).ln();
    let step = (bottom - top) / (count - 1) as f64;
    Ok((0..count).map(|k| (top + step * k as f64).exp()).collect())
}

#[derive(Debug, Clone)]
pub struct SolutionPath {
    /// Strictly descending.
    pub lambdas: Vec<f64>,
    pub fits: Vec<MLassoFit>,
    pub lambda_max: f64,
    /// Scale of the all-zero fit.
    pub null_scale: f64,
}

impl SolutionPath {
    pub fn len(&self) -> usize {
        self.fits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fits.is_empty()
    }

    /// For every coordinate, the largest grid penalty at which it is nonzero.
    pub fn activation_lambdas(&self) -> Vec<Option<f64>> {
        let p = self.fits.first().map_or(0, |f| f.coefficients.len());
        (0..p)
            .map(|j| {
                self.fits
                    .iter()
                    .find(|f| f.coefficients[j] != Complex64::new(0.0, 0.0))
                    .map(|f| f.lambda)
            })
            .collect()
    }
}

fn check_descending(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    if !grid.iter().all(|l| *l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(
            "grid values must be positive and finite".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "lambda grid must be strictly descending".into(),
        ));
    }
    Ok(())
}

fn solve_checked(
    loss: &LossModel,
    problem: &Problem,
    lambda: f64,
    start: (ndarray::ArrayView1<Complex64>, f64),
    config: &SolverConfig,
) -> Result<MLassoFit> {
    // Once more than n columns are active the minimizer can sit in a very flat
    // valley and the coefficient-change criterion may need millions of
    // sweeps. An exhausted iterate that already satisfies both estimating
    // equations is kept, with `converged == false`.
    let fit = match ccd_solve(loss, problem, lambda, Some(start), config) {
        Ok(fit) => fit,
        Err(Error::MaxSweepsExceeded { fit, .. }) if fit.kkt.passed => *fit,
        Err(e) => return Err(e.at_lambda(lambda)),
    };
    if !fit.kkt.passed {
        return Err(Error::KktFailure {
            lambda,
            violation: fit.kkt.max_violation,
            scale_residual: fit.kkt.scale_residual,
        });
    }
    Ok(fit)
}

/// Solves along a descending grid, warm-starting each penalty from the
/// previous fit. The first solve starts from the all-zero null model.
///
/// Every returned fit passes the KKT check. A fit that ran out of sweeps is
/// kept when it passes, with `converged` left false.
pub fn solve_path(
    loss: &LossModel,
    problem: &Problem,
    grid: &[f64],
    config: &SolverConfig,
) -> Result<SolutionPath> {
    check_descending(grid)?;
    let null = null_model(loss, problem, config)?;
    let zero = Array1::<Complex64>::zeros(problem.cols());
    let mut fits: Vec<MLassoFit> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let start = match fits.last() {
            Some(prev) => prev.start(),
            None => (zero.view(), null.scale),
        };
        let fit = solve_checked(loss, problem, lambda, start, config)?;
        fits.push(fit);
    }
    Ok(SolutionPath {
        lambdas: grid.to_vec(),
        fits,
        lambda_max: null.lambda_max,
        null_scale: null.scale,
    })
}

/// Computes `lambda_max`, builds the grid described by `options` and solves
/// the path.
pub fn solve_default_path(
    loss: &LossModel,
    problem: &Problem,
    options: &PathOptions,
    config: &SolverConfig,
) -> Result<SolutionPath> {
    let null = null_model(loss, problem, config)?;
    let grid = lambda_grid(null.lambda_max, options.count, options.floor_ratio)?;
    solve_path(loss, problem, &grid, config)
}

#[derive(Debug, Clone)]
pub struct LambdaStar {
    pub lambda: f64,
    pub fit: MLassoFit,
    pub lambda_max: f64,
}

/// Finds the largest penalty whose fit has exactly `k` nonzero coefficients.
///
/// Walks the grid from the top until the support reaches `k`, then bisects
/// between that grid point and its upper neighbour on the predicate
/// "support size >= k" down to a bracket of `1e-6 * lambda_max`.
pub fn find_lambda_for_k(
    loss: &LossModel,
    problem: &Problem,
    k: usize,
    options: &PathOptions,
    config: &SolverConfig,
) -> Result<LambdaStar> {
    let limit = problem.rows().min(problem.cols());
    if k == 0 || k > limit {
        return Err(Error::InvalidParameter(format!(
            "target support size must lie in [1, {limit}], got {k}"
        )));
    }
    let null = null_model(loss, problem, config)?;
    let grid = lambda_grid(null.lambda_max, options.count, options.floor_ratio)?;
    let zero = Array1::<Complex64>::zeros(problem.cols());

    let mut previous: Option<MLassoFit> = None;
    let mut index = None;
    for (i, &lambda) in grid.iter().enumerate() {
        let start = match &previous {
            Some(prev) => prev.start(),
            None => (zero.view(), null.scale),
        };
        let fit = solve_checked(loss, problem, lambda, start, config)?;
        let reached = fit.nonzeros() >= k;
        previous = Some(fit);
        if reached {
            index = Some(i);
            break;
        }
    }
    let Some(i) = index else {
        return Err(Error::NoSuchSparsity { k });
    };
    let grid_fit = previous.expect("grid walk produced a fit");

    let mut hi = if i == 0 { null.lambda_max } else { grid[i - 1] };
    let mut lo_fit = grid_fit.clone();
    let tol = BISECTION_TOL * null.lambda_max;
    while hi - lo_fit.lambda > tol {
        let mid = 0.5 * (hi + lo_fit.lambda);
        let fit = solve_checked(loss, problem, mid, lo_fit.start(), config)?;
        if fit.nonzeros() >= k {
            lo_fit = fit;
        } else {
            hi = mid;
        }
    }
    if lo_fit.nonzeros() == k {
        return Ok(LambdaStar {
            lambda: lo_fit.lambda,
            fit: lo_fit,
            lambda_max: null.lambda_max,
        });
    }
    if grid_fit.nonzeros() == k {
        return Ok(LambdaStar {
            lambda: grid_fit.lambda,
            fit: grid_fit,
            lambda_max: null.lambda_max,
        });
    }

    // the support jumped past k; keep walking down the grid
    let mut prev = grid_fit;
    for &lambda in &grid[i + 1..] {
        let fit = solve_checked(loss, problem, lambda, prev.start(), config)?;
        if fit.nonzeros() == k {
            return Ok(LambdaStar {
                lambda,
                fit,
                lambda_max: null.lambda_max,
            });
        }
        prev = fit;
    }
    Err(Error::NoSuchSparsity { k })
}
