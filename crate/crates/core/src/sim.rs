//! Seeded single-snapshot DoA scenarios.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`) seeded with
//! `seed_from_u64(scenario.seed)`. Draw order is fixed: first one uniform
//! phase in `[0, 2 pi)` per source, then `n` pairs of standard normals (real
//! part, imaginary part) for the noise. Monte Carlo trial `i` under master
//! seed `m` uses seed `splitmix64(splitmix64(m) + i)`.

use ndarray::Array1;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::doa::{
    array_response, doa_problem, extract_doas, phasor, steering_vector, AngularGrid, UlaConfig,
};
use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::path::{find_lambda_for_k, PathOptions};
use crate::solver::{Problem, SolverConfig};

/// How the per-source signal enters the snapshot relative to the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// Each sensor sees every source with unit gain, so `snr_db` is the
    /// per-sensor signal-to-noise ratio: `y = sum_k s_k u(theta_k) + e` with
    /// `|u_i| = 1`.
    #[default]
    PerSensor,
    /// Sources enter through unit-norm steering vectors:
    /// `y = sum_k s_k a(theta_k) + e` with `||a|| = 1`. The effective
    /// per-sensor SNR is lower by a factor `n`.
    UnitNormColumns,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    /// 0-based sensor index.
    pub index: usize,
    /// Multiplies the measurement; phase is preserved for positive factors.
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaScenario {
    pub ula: UlaConfig,
    pub grid: AngularGrid,
    pub true_doas_deg: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub snr_convention: SnrConvention,
    pub corruption: Option<Corruption>,
    pub seed: u64,
}

impl DoaScenario {
    /// Three sources at -5, 0 and 20 degrees with magnitudes 1, 0.6, 0.2,
    /// 15 dB SNR, on the 5-degree grid.
    pub fn paper(sensors: usize, seed: u64) -> Result<Self> {
        let scenario = DoaScenario {
            ula: UlaConfig::new(sensors)?,
            grid: AngularGrid::five_degree(),
            true_doas_deg: vec![-5.0, 0.0, 20.0],
            amplitudes: vec![1.0, 0.6, 0.2],
            snr_db: Some(15.0),
            snr_convention: SnrConvention::PerSensor,
            corruption: None,
            seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Scales the first measurement by 100.
    pub fn corrupted(mut self) -> Self {
        self.corruption = Some(Corruption {
            index: 0,
            factor: 100.0,
        });
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.ula.validate()?;
        if self.true_doas_deg.is_empty() {
            return Err(Error::InvalidParameter("scenario has no sources".into()));
        }
        if self.true_doas_deg.len() != self.amplitudes.len() {
            return Err(Error::InvalidParameter(format!(
                "{} DoAs but {} amplitudes",
                self.true_doas_deg.len(),
                self.amplitudes.len()
            )));
        }
        for (i, a) in self.true_doas_deg.iter().enumerate() {
            if !(-90.0..90.0).contains(a) {
                return Err(Error::AngleOutOfRange(*a));
            }
            if self.true_doas_deg[..i].contains(a) {
                return Err(Error::InvalidParameter(format!("duplicate DoA {a}")));
            }
        }
        if !self.amplitudes.iter().all(|a| *a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(
                "amplitudes must be positive".into(),
            ));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "SNR must be finite, got {snr}"
                )));
            }
        }
        if let Some(c) = self.corruption {
            if c.index >= self.ula.sensors {
                return Err(Error::InvalidParameter(format!(
                    "corruption index {} outside array of {} sensors",
                    c.index, self.ula.sensors
                )));
            }
            if !(c.factor > 0.0) || !c.factor.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "corruption factor must be positive, got {}",
                    c.factor
                )));
            }
        }
        Ok(())
    }

    /// True DoAs ordered by decreasing amplitude (stable for ties).
    pub fn doas_by_amplitude(&self) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..self.amplitudes.len()).collect();
        idx.sort_by(|&a, &b| self.amplitudes[b].total_cmp(&self.amplitudes[a]));
        idx.into_iter().map(|i| self.true_doas_deg[i]).collect()
    }
}

/// Ground truth kept alongside a generated snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub source_phases: Vec<f64>,
    pub source_coeffs: Vec<Complex64>,
    pub noise_sigma: f64,
    /// Noiseless array output.
    pub signal: Array1<Complex64>,
    /// Snapshot before corruption.
    pub uncorrupted: Array1<Complex64>,
    /// True DoAs that are not grid points.
    pub off_grid_doas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub y: Array1<Complex64>,
    pub truth: Truth,
}

/// `sigma` with `sigma^2 = mean(|s_k|^2) * 10^(-snr_db / 10)`.
pub fn noise_sigma_from_snr(amplitudes: &[f64], snr_db: f64) -> Result<f64> {
    if amplitudes.is_empty() {
        return Err(Error::InvalidParameter("no amplitudes".into()));
    }
    let power = amplitudes.iter().map(|a| a * a).sum::<f64>() / amplitudes.len() as f64;
    Ok((power * 10f64.powf(-snr_db / 10.0)).sqrt())
}

pub fn generate_snapshot(scenario: &DoaScenario) -> Result<(Problem, Snapshot)> {
    scenario.validate()?;
    let n = scenario.ula.sensors;
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);

    let source_phases: Vec<f64> = scenario
        .amplitudes
        .iter()
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();
    let source_coeffs: Vec<Complex64> = scenario
        .amplitudes
        .iter()
        .zip(&source_phases)
        .map(|(&a, &phi)| phasor(a, phi))
        .collect();

    let mut signal = Array1::<Complex64>::zeros(n);
    for (&theta, &s) in scenario.true_doas_deg.iter().zip(&source_coeffs) {
        let response = match scenario.snr_convention {
            SnrConvention::PerSensor => array_response(&scenario.ula, theta)?,
            SnrConvention::UnitNormColumns => steering_vector(&scenario.ula, theta)?,
        };
        signal.scaled_add(s, &response);
    }

    let noise_sigma = match scenario.snr_db {
        Some(snr) => noise_sigma_from_snr(&scenario.amplitudes, snr)?,
        None => 0.0,
    };
    let component = noise_sigma * std::f64::consts::FRAC_1_SQRT_2;
    let noise = Array1::from_shape_fn(n, |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * component, im * component)
    });

    let uncorrupted = &signal + &noise;
    let mut y = uncorrupted.clone();
    if let Some(c) = scenario.corruption {
        y[c.index] *= c.factor;
    }

    let off_grid_doas = scenario
        .true_doas_deg
        .iter()
        .copied()
        .filter(|a| scenario.grid.index_of(*a).is_none())
        .collect();

    let problem = doa_problem(&scenario.ula, &scenario.grid, y.clone())?;
    Ok((
        problem,
        Snapshot {
            y,
            truth: Truth {
                source_phases,
                source_coeffs,
                noise_sigma,
                signal,
                uncorrupted,
                off_grid_doas,
            },
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub estimated_doas_deg: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub lambda_star: Option<f64>,
    pub lambda_max: Option<f64>,
    pub scale: Option<f64>,
    pub iterations: Option<usize>,
    pub kkt_max_violation: Option<f64>,
    /// The estimated angle set equals the true set.
    pub success: bool,
    /// Estimates, ordered by magnitude, match the true DoAs ordered by
    /// amplitude.
    pub magnitude_order_correct: bool,
    pub failure: Option<String>,
}

impl TrialResult {
    fn failed(seed: u64, reason: String) -> Self {
        TrialResult {
            seed,
            estimated_doas_deg: Vec::new(),
            amplitudes: Vec::new(),
            lambda_star: None,
            lambda_max: None,
            scale: None,
            iterations: None,
            kkt_max_violation: None,
            success: false,
            magnitude_order_correct: false,
            failure: Some(reason),
        }
    }
}

/// Generates the snapshot, selects the largest penalty with `k` nonzeros and
/// compares the recovered grid angles with the truth. Solver failures become
/// failed trials; invalid scenarios are errors.
pub fn run_trial(
    scenario: &DoaScenario,
    loss: &LossModel,
    k: usize,
    options: &PathOptions,
    config: &SolverConfig,
) -> Result<TrialResult> {
    let (problem, _) = generate_snapshot(scenario)?;
    let star = match find_lambda_for_k(loss, &problem, k, options, config) {
        Ok(star) => star,
        Err(e @ Error::InvalidParameter(_)) => return Err(e),
        Err(e) => return Ok(TrialResult::failed(scenario.seed, e.to_string())),
    };
    let estimate = extract_doas(&star.fit, &scenario.grid, k)?;

    let mut estimated = estimate.angles_deg.clone();
    let mut truth = scenario.true_doas_deg.clone();
    estimated.sort_by(f64::total_cmp);
    truth.sort_by(f64::total_cmp);
    let success = estimated == truth;
    let magnitude_order_correct = success && estimate.angles_deg == scenario.doas_by_amplitude();

    Ok(TrialResult {
        seed: scenario.seed,
        estimated_doas_deg: estimate.angles_deg,
        amplitudes: estimate.amplitudes,
        lambda_star: Some(star.lambda),
        lambda_max: Some(star.lambda_max),
        scale: Some(star.fit.scale),
        iterations: Some(star.fit.iterations),
        kkt_max_violation: Some(star.fit.kkt.max_violation),
        success,
        magnitude_order_correct,
        failure: None,
    })
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of Monte Carlo trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master).wrapping_add(index))
}
