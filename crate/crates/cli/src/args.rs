use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robust_classo::{LossModel, PathOptions, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_Q: f64 = 0.85;
pub const DEFAULT_SEED: u64 = 2019;

#[derive(Debug, Parser)]
#[command(
    name = "robust-classo",
    version,
    about = "Robust complex M-Lasso fits and single-snapshot DoA experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at a single penalty.
    Solve(SolveArgs),
    /// Fit along a log-spaced penalty grid and write the coefficient path.
    Path(PathArgs),
    /// Regenerate the DoA figure data: paths, spectra and estimates per loss.
    DoaRepro(DoaReproArgs),
    /// Success rates of DoA recovery over seeded trials.
    Montecarlo(MonteCarloArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossArg {
    Ls,
    Huber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataArg {
    Clean,
    Corrupted,
    Both,
}

/// Huber threshold, either directly or through the chi-square quantile.
#[derive(Debug, Clone, Args)]
pub struct HuberArgs {
    /// Huber threshold from the quantile level q of chi^2_2 / 2 (default 0.85).
    #[arg(long, conflicts_with = "c")]
    pub q: Option<f64>,
    /// Huber threshold c.
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = SolverConfig::default().max_sweeps)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = SolverConfig::default().coef_tol)]
    pub coef_tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().scale_tol)]
    pub scale_tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().kkt_tol)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().sigma_floor)]
    pub sigma_floor: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = PathOptions::default().count)]
    pub grid_count: usize,
    /// Smallest grid penalty as a fraction of lambda_max.
    #[arg(long, default_value_t = PathOptions::default().floor_ratio)]
    pub grid_floor: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Problem file (JSON).
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = LossArg::Huber)]
    pub loss: LossArg,
    #[command(flatten)]
    pub huber: HuberArgs,
    #[arg(long)]
    pub lambda: f64,
    /// Rescale columns to unit norm; coefficients are reported on both scales.
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = LossArg::Huber)]
    pub loss: LossArg,
    #[command(flatten)]
    pub huber: HuberArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DoaReproArgs {
    /// Loss to run; repeat for several. Defaults to both.
    #[arg(long, value_enum)]
    pub loss: Vec<LossArg>,
    #[command(flatten)]
    pub huber: HuberArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub sensors: usize,
    /// Only the corrupted data (shorthand for `--data corrupted`).
    #[arg(long, conflicts_with = "data")]
    pub corrupt: bool,
    #[arg(long, value_enum, default_value_t = DataArg::Both)]
    pub data: DataArg,
    /// Number of sources to resolve.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, value_enum)]
    pub loss: Vec<LossArg>,
    #[command(flatten)]
    pub huber: HuberArgs,
    /// Master seed; trial seeds are derived from it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub sensors: usize,
    #[arg(long)]
    pub corrupt: bool,
    /// Scenario template (JSON). Overrides --sensors and --corrupt.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolved loss choice as recorded in outputs and manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossArg,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c: Option<f64>,
}

impl LossSpec {
    pub fn resolve(kind: LossArg, huber: &HuberArgs) -> CliResult<Self> {
        match kind {
            LossArg::Ls => Ok(LossSpec {
                kind,
                q: None,
                c: None,
            }),
            LossArg::Huber => match (huber.q, huber.c) {
                (_, Some(c)) => Ok(LossSpec {
                    kind,
                    q: None,
                    c: Some(c),
                }),
                (q, None) => Ok(LossSpec {
                    kind,
                    q: Some(q.unwrap_or(DEFAULT_Q)),
                    c: None,
                }),
            },
        }
    }

    pub fn model(&self) -> CliResult<LossModel> {
        let model = match (self.kind, self.q, self.c) {
            (LossArg::Ls, _, _) => Ok(LossModel::least_squares()),
            (LossArg::Huber, _, Some(c)) => LossModel::huber(c),
            (LossArg::Huber, Some(q), None) => LossModel::huber_from_q(q),
            (LossArg::Huber, None, None) => LossModel::huber_from_q(DEFAULT_Q),
        };
        model.map_err(|e| CliError::InvalidArgs(e.to_string()))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LossArg::Ls => "ls",
            LossArg::Huber => "huber",
        }
    }

    /// Flags that reproduce this choice.
    pub fn to_args(&self) -> Vec<String> {
        let mut v = vec!["--loss".to_string(), self.name().to_string()];
        if let Some(q) = self.q {
            v.extend(["--q".to_string(), q.to_string()]);
        }
        if let Some(c) = self.c {
            v.extend(["--c".to_string(), c.to_string()]);
        }
        v
    }
}

/// Losses for the multi-loss commands: each requested kind once, in the
/// order given; both when none is requested.
pub fn resolve_losses(kinds: &[LossArg], huber: &HuberArgs) -> CliResult<Vec<LossSpec>> {
    let mut seen = Vec::new();
    let requested: &[LossArg] = if kinds.is_empty() {
        &[LossArg::Ls, LossArg::Huber]
    } else {
        kinds
    };
    for &k in requested {
        if !seen.contains(&k) {
            seen.push(k);
        }
    }
    seen.into_iter()
        .map(|k| LossSpec::resolve(k, huber))
        .collect()
}

impl SolverArgs {
    pub fn config(&self) -> CliResult<SolverConfig> {
        let config = SolverConfig {
            max_sweeps: self.max_sweeps,
            coef_tol: self.coef_tol,
            scale_tol: self.scale_tol,
            kkt_tol: self.kkt_tol,
            sigma_floor: self.sigma_floor,
        };
        config
            .validate()
            .map_err(|e| CliError::InvalidArgs(e.to_string()))?;
        Ok(config)
    }

    pub fn to_args(&self) -> Vec<String> {
        vec![
            "--max-sweeps".into(),
            self.max_sweeps.to_string(),
            "--coef-tol".into(),
            self.coef_tol.to_string(),
            "--scale-tol".into(),
            self.scale_tol.to_string(),
            "--kkt-tol".into(),
            self.kkt_tol.to_string(),
            "--sigma-floor".into(),
            self.sigma_floor.to_string(),
        ]
    }
}

impl GridArgs {
    pub fn options(&self) -> CliResult<PathOptions> {
        if self.grid_count == 0 {
            return Err(CliError::InvalidArgs(
                "--grid-count must be at least 1".into(),
            ));
        }
        if !(self.grid_floor > 0.0 && self.grid_floor < 1.0) {
            return Err(CliError::InvalidArgs(format!(
                "--grid-floor must lie in (0, 1), got {}",
                self.grid_floor
            )));
        }
        Ok(PathOptions {
            count: self.grid_count,
            floor_ratio: self.grid_floor,
        })
    }

    pub fn to_args(&self) -> Vec<String> {
        vec![
            "--grid-count".into(),
            self.grid_count.to_string(),
            "--grid-floor".into(),
            self.grid_floor.to_string(),
        ]
    }
}
