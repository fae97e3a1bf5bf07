//! Uniform linear array steering model and DoA extraction from sparse fits.
//!
//! Angles are in degrees at the API boundary, measured from broadside, and
//! must lie in `[-90, 90)`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::solver::{pseudo_residual, MLassoFit, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaConfig {
    pub sensors: usize,
    /// Inter-element spacing in wavelengths.
    pub spacing_wavelengths: f64,
}

impl UlaConfig {
    /// Half-wavelength spacing.
    pub fn new(sensors: usize) -> Result<Self> {
        Self::with_spacing(sensors, 0.5)
    }

    pub fn with_spacing(sensors: usize, spacing_wavelengths: f64) -> Result<Self> {
        let ula = UlaConfig {
            sensors,
            spacing_wavelengths,
        };
        ula.validate()?;
        Ok(ula)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors < 2 {
            return Err(Error::InvalidParameter(format!(
                "array needs at least 2 sensors, got {}",
                self.sensors
            )));
        }
        if !(self.spacing_wavelengths > 0.0) || !self.spacing_wavelengths.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sensor spacing must be positive, got {}",
                self.spacing_wavelengths
            )));
        }
        Ok(())
    }
}

/// Strictly monotone look directions in `[-90, 90)` degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngularGrid {
    angles_deg: Vec<f64>,
}

impl AngularGrid {
    pub fn new(angles_deg: Vec<f64>) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::InvalidParameter("angular grid is empty".into()));
        }
        for &a in &angles_deg {
            check_angle(a)?;
        }
        let increasing = angles_deg.windows(2).all(|w| w[1] > w[0]);
        let decreasing = angles_deg.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidParameter(
                "angular grid must be strictly monotone".into(),
            ));
        }
        Ok(AngularGrid { angles_deg })
    }

    /// `count` angles starting at `start_deg` with spacing `step_deg`.
    pub fn uniform(start_deg: f64, step_deg: f64, count: usize) -> Result<Self> {
        Self::new(
            (0..count)
                .map(|i| start_deg + step_deg * i as f64)
                .collect(),
        )
    }

    /// -90, -85, ..., 85.
    pub fn five_degree() -> Self {
        Self::uniform(-90.0, 5.0, 36).expect("static grid is valid")
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    /// Grid index of an angle, if it lies on the grid (within `1e-9` deg).
    pub fn index_of(&self, angle_deg: f64) -> Option<usize> {
        self.angles_deg
            .iter()
            .position(|a| (a - angle_deg).abs() < 1e-9)
    }
}

impl TryFrom<Vec<f64>> for AngularGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        AngularGrid::new(v)
    }
}

impl From<AngularGrid> for Vec<f64> {
    fn from(g: AngularGrid) -> Self {
        g.angles_deg
    }
}

fn check_angle(theta_deg: f64) -> Result<()> {
    if (-90.0..90.0).contains(&theta_deg) {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange(theta_deg))
    }
}

/// Per-sensor phase factors `exp(-i 2 pi d k sin(theta))`, `k = 0..n`, with
/// unit modulus.
pub fn array_response(ula: &UlaConfig, theta_deg: f64) -> Result<Array1<Complex64>> {
    ula.validate()?;
    check_angle(theta_deg)?;
    let phase_step =
        -2.0 * std::f64::consts::PI * ula.spacing_wavelengths * theta_deg.to_radians().sin();
    Ok(Array1::from_shape_fn(ula.sensors, |k| {
        phasor(1.0, phase_step * k as f64)
    }))
}

/// `r * exp(i phi)` with `cos` and `sin` evaluated separately. Optimized
/// builds would otherwise fuse them into one `sincos` call, which may round
/// differently and break bitwise agreement between build profiles.
pub(crate) fn phasor(r: f64, phi: f64) -> Complex64 {
    let c = std::hint::black_box(phi).cos();
    let s = std::hint::black_box(phi).sin();
    Complex64::new(r * c, r * s)
}

/// Unit-norm steering vector: the array response divided by `sqrt(n)`.
pub fn steering_vector(ula: &UlaConfig, theta_deg: f64) -> Result<Array1<Complex64>> {
    let scale = 1.0 / (ula.sensors as f64).sqrt();
    Ok(array_response(ula, theta_deg)?.mapv(|v| v * scale))
}

/// Columns are the steering vectors of the grid angles.
pub fn steering_matrix(ula: &UlaConfig, grid: &AngularGrid) -> Result<Array2<Complex64>> {
    let mut m = Array2::zeros((ula.sensors, grid.len()));
    for (j, &theta) in grid.angles().iter().enumerate() {
        m.column_mut(j).assign(&steering_vector(ula, theta)?);
    }
    Ok(m)
}

/// Regression problem for a snapshot on the given grid.
pub fn doa_problem(
    ula: &UlaConfig,
    grid: &AngularGrid,
    snapshot: Array1<Complex64>,
) -> Result<Problem> {
    Problem::new(steering_matrix(ula, grid)?, snapshot)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaEstimate {
    /// Ordered by decreasing coefficient magnitude.
    pub angles_deg: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub source_coeffs: Vec<Complex64>,
    pub grid_indices: Vec<usize>,
    /// Fewer than `k` nonzero coefficients were available.
    pub incomplete: bool,
}

/// Grid angles of the `k` largest nonzero coefficients, largest first. Ties
/// go to the lower grid index.
pub fn extract_doas(fit: &MLassoFit, grid: &AngularGrid, k: usize) -> Result<DoaEstimate> {
    let p = fit.coefficients.len();
    if p != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "fit has {p} coefficients but grid has {} angles",
            grid.len()
        )));
    }
    if k == 0 || k > p {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {p}], got {k}"
        )));
    }
    let mut order: Vec<usize> = (0..p)
        .filter(|&j| fit.coefficients[j] != Complex64::new(0.0, 0.0))
        .collect();
    order.sort_by(|&a, &b| {
        fit.coefficients[b]
            .norm()
            .total_cmp(&fit.coefficients[a].norm())
            .then(a.cmp(&b))
    });
    let incomplete = order.len() < k;
    order.truncate(k);
    Ok(DoaEstimate {
        angles_deg: order.iter().map(|&j| grid.angles()[j]).collect(),
        amplitudes: order.iter().map(|&j| fit.coefficients[j].norm()).collect(),
        source_coeffs: order.iter().map(|&j| fit.coefficients[j]).collect(),
        grid_indices: order,
        incomplete,
    })
}

/// `|<a(theta_j), e_psi>|` over the grid, recomputed at the fit.
pub fn correlation_spectrum(loss: &LossModel, problem: &Problem, fit: &MLassoFit) -> Vec<f64> {
    let pseudo = pseudo_residual(loss, problem, fit.coefficients.view(), fit.scale);
    problem.abs_correlations(pseudo.view())
}
