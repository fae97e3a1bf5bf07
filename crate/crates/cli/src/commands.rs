use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;
use robust_classo::doa::{correlation_spectrum, extract_doas};
use robust_classo::path::{
    find_lambda_for_k, lambda_grid, null_model, solve_default_path, solve_path, SolutionPath,
};
use robust_classo::sim::{generate_snapshot, run_trial, trial_seed, DoaScenario, TrialResult};
use robust_classo::solver::ccd_solve;
use robust_classo::{Error as CoreError, LossModel, MLassoFit, Problem};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    resolve_losses, DataArg, DoaReproArgs, LossSpec, MonteCarloArgs, PathArgs, SolveArgs,
};
use crate::error::{CliError, CliResult, EXIT_KKT, EXIT_OK};
use crate::io::{
    complex_pairs, csv_table, ensure_dir, fmt_num, read_problem, write_json, write_text,
    SCHEMA_VERSION,
};
use crate::manifest::{GridRecord, InputFile, RunManifest};

pub const THREADS_ENV: &str = "ROBUST_CLASSO_THREADS";

fn loss_json(spec: &LossSpec, model: &LossModel) -> Value {
    let c = model.threshold();
    json!({
        "kind": spec.name(),
        "q": spec.q,
        "c": if c.is_finite() { Some(c) } else { None },
        "alpha": model.alpha(),
    })
}

/// Loads a problem file, optionally rescaling the columns to unit norm.
fn load_problem(input: &Path, normalize: bool) -> CliResult<(Problem, Option<Vec<f64>>)> {
    let file = read_problem(input)?;
    let context = format!("{}", input.display());
    if normalize {
        let (problem, norms) = Problem::normalized(file.matrix(), file.observation())
            .map_err(|e| CliError::core(&context, e))?;
        Ok((problem, Some(norms)))
    } else {
        let problem = Problem::new(file.matrix(), file.observation())
            .map_err(|e| CliError::core(&context, e))?;
        Ok((problem, None))
    }
}

fn canonical(input: &Path) -> CliResult<PathBuf> {
    fs::canonicalize(input).map_err(|e| CliError::io(input, e))
}

fn fit_json(spec: &LossSpec, model: &LossModel, fit: &MLassoFit, norms: Option<&[f64]>) -> Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "loss": loss_json(spec, model),
        "lambda": fit.lambda,
        "scale": fit.scale,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "nonzeros": fit.nonzeros(),
        "support": fit.support(),
        "coefficients": complex_pairs(fit.coefficients.iter().copied()),
        "kkt": {
            "max_violation": fit.kkt.max_violation,
            "scale_residual": fit.kkt.scale_residual,
            "tol": fit.kkt.tol,
            "passed": fit.kkt.passed,
        },
    });
    if let Some(norms) = norms {
        let original = fit.coefficients.iter().zip(norms).map(|(s, n)| s / n);
        v["column_norms"] = json!(norms);
        v["coefficients_original_scale"] = json!(complex_pairs(original));
    }
    v
}

pub fn solve(args: &SolveArgs) -> CliResult<i32> {
    let spec = LossSpec::resolve(args.loss, &args.huber)?;
    let model = spec.model()?;
    let config = args.solver.config()?;
    let input = canonical(&args.input)?;
    let (problem, norms) = load_problem(&input, args.normalize)?;

    let context = format!("{} fit at lambda = {}", spec.name(), args.lambda);
    // an exhausted sweep budget still leaves a fit worth writing
    let (fit, exhausted) = match ccd_solve(&model, &problem, args.lambda, None, &config) {
        Ok(fit) => (fit, None),
        Err(CoreError::MaxSweepsExceeded { sweeps, fit }) => (*fit, Some(sweeps)),
        Err(e) => return Err(CliError::core(context, e)),
    };

    ensure_dir(&args.out)?;
    write_json(
        &args.out.join("fit.json"),
        &fit_json(&spec, &model, &fit, norms.as_deref()),
    )?;

    let mut argv = vec![
        "solve".to_string(),
        "--input".into(),
        input.display().to_string(),
    ];
    argv.extend(spec.to_args());
    argv.extend(["--lambda".to_string(), args.lambda.to_string()]);
    if args.normalize {
        argv.push("--normalize".into());
    }
    argv.extend(args.solver.to_args());
    let mut manifest = RunManifest::new("solve", argv, &args.out);
    manifest.losses = vec![spec];
    manifest.inputs = vec![InputFile::record(&input)?];
    manifest.outputs = vec!["fit.json".into()];
    manifest.write()?;

    println!(
        "{}: lambda = {}, scale = {:.6e}, nonzeros = {}, sweeps = {}, KKT violation = {:.3e} ({})",
        spec.name(),
        fit.lambda,
        fit.scale,
        fit.nonzeros(),
        fit.iterations,
        fit.kkt.max_violation,
        if fit.kkt.passed { "pass" } else { "FAIL" }
    );
    if let Some(sweeps) = exhausted {
        return Err(CliError::core(
            context,
            CoreError::MaxSweepsExceeded {
                sweeps,
                fit: Box::new(fit),
            },
        ));
    }
    Ok(if fit.kkt.passed { EXIT_OK } else { EXIT_KKT })
}

/// Path table: `lambda, l1_norm, l1_norm_rel, nonzeros, scale, converged,
/// abs_s_0..`, where `l1_norm_rel` divides by the largest l1 norm on the
/// path and `converged` is 0 for points kept on the KKT check alone.
pub fn path_csv(path: &SolutionPath) -> String {
    let p = path.fits.first().map_or(0, |f| f.coefficients.len());
    let mut header: Vec<String> = [
        "lambda",
        "l1_norm",
        "l1_norm_rel",
        "nonzeros",
        "scale",
        "converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..p).map(|j| format!("abs_s_{j}")));
    let max_l1 = path.fits.iter().map(|f| f.l1_norm()).fold(0.0, f64::max);
    let rows: Vec<Vec<String>> = path
        .fits
        .iter()
        .map(|f| {
            let l1 = f.l1_norm();
            let rel = if max_l1 > 0.0 { l1 / max_l1 } else { 0.0 };
            let mut row = vec![
                fmt_num(f.lambda),
                fmt_num(l1),
                fmt_num(rel),
                f.nonzeros().to_string(),
                fmt_num(f.scale),
                u8::from(f.converged).to_string(),
            ];
            row.extend(f.coefficients.iter().map(|s| fmt_num(s.norm())));
            row
        })
        .collect();
    csv_table(&header, &rows)
}

pub fn path(args: &PathArgs) -> CliResult<i32> {
    let spec = LossSpec::resolve(args.loss, &args.huber)?;
    let model = spec.model()?;
    let config = args.solver.config()?;
    let options = args.grid.options()?;
    let input = canonical(&args.input)?;
    let (problem, _) = load_problem(&input, args.normalize)?;

    let context = format!("{} path", spec.name());
    let null = null_model(&model, &problem, &config).map_err(|e| CliError::core(&context, e))?;
    let grid = lambda_grid(null.lambda_max, options.count, options.floor_ratio)
        .map_err(|e| CliError::core(&context, e))?;
    let solution =
        solve_path(&model, &problem, &grid, &config).map_err(|e| CliError::core(&context, e))?;

    ensure_dir(&args.out)?;
    write_text(&args.out.join("path.csv"), &path_csv(&solution))?;

    let mut argv = vec![
        "path".to_string(),
        "--input".into(),
        input.display().to_string(),
    ];
    argv.extend(spec.to_args());
    argv.extend(args.grid.to_args());
    if args.normalize {
        argv.push("--normalize".into());
    }
    argv.extend(args.solver.to_args());
    let mut manifest = RunManifest::new("path", argv, &args.out);
    manifest.losses = vec![spec];
    manifest.grid = Some(GridRecord {
        count: options.count,
        floor_ratio: options.floor_ratio,
    });
    manifest.inputs = vec![InputFile::record(&input)?];
    manifest.outputs = vec!["path.csv".into()];
    manifest.write()?;

    println!(
        "{}: {} grid points, lambda_max = {:.6e}, final support {}",
        spec.name(),
        solution.len(),
        solution.lambda_max,
        solution.fits.last().map_or(0, |f| f.nonzeros())
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct DoaRecord {
    schema_version: u32,
    loss: Value,
    data: &'static str,
    seed: u64,
    k: usize,
    lambda_star: f64,
    lambda_max: f64,
    lambda_star_rel: f64,
    scale: f64,
    iterations: usize,
    kkt_max_violation: f64,
    estimated_doas_deg: Vec<f64>,
    amplitudes: Vec<f64>,
    grid_indices: Vec<usize>,
    incomplete: bool,
    true_doas_deg: Vec<f64>,
    success: bool,
}

fn spectrum_csv(
    scenario: &DoaScenario,
    spectrum: &[f64],
    coefficients: &Array1<Complex64>,
) -> String {
    let header: Vec<String> = ["index", "angle_deg", "abs_correlation", "abs_coefficient"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = scenario
        .grid
        .angles()
        .iter()
        .enumerate()
        .map(|(j, a)| {
            vec![
                j.to_string(),
                a.to_string(),
                fmt_num(spectrum[j]),
                fmt_num(coefficients[j].norm()),
            ]
        })
        .collect();
    csv_table(&header, &rows)
}

fn data_variants(args: &DoaReproArgs) -> Vec<DataArg> {
    match (args.corrupt, args.data) {
        (true, _) | (false, DataArg::Corrupted) => vec![DataArg::Corrupted],
        (false, DataArg::Clean) => vec![DataArg::Clean],
        (false, DataArg::Both) => vec![DataArg::Clean, DataArg::Corrupted],
    }
}

fn data_name(d: DataArg) -> &'static str {
    match d {
        DataArg::Clean => "clean",
        DataArg::Corrupted => "corrupted",
        DataArg::Both => "both",
    }
}

/// Per loss and data variant: `<loss>_<data>_path.csv`,
/// `<loss>_<data>_spectrum.csv` (at lambda*) and `<loss>_<data>_doa.json`.
/// The generated snapshots go to `problem_<data>.json`.
pub fn doa_repro(args: &DoaReproArgs) -> CliResult<i32> {
    let specs = resolve_losses(&args.loss, &args.huber)?;
    let config = args.solver.config()?;
    let options = args.grid.options()?;
    let clean = DoaScenario::paper(args.sensors, args.seed)
        .map_err(|e| CliError::InvalidArgs(e.to_string()))?;
    if args.k == 0 || args.k > clean.grid.len() {
        return Err(CliError::InvalidArgs(format!(
            "--k must lie in [1, {}], got {}",
            clean.grid.len(),
            args.k
        )));
    }
    ensure_dir(&args.out)?;
    let variants = data_variants(args);
    let mut outputs = Vec::new();

    for &data in &variants {
        let scenario = match data {
            DataArg::Corrupted => clean.clone().corrupted(),
            _ => clean.clone(),
        };
        let name = data_name(data);
        let (problem, _) = generate_snapshot(&scenario).map_err(|e| CliError::core(name, e))?;
        let problem_file = format!("problem_{name}.json");
        write_exact_problem(&args.out.join(&problem_file), &problem)?;
        outputs.push(problem_file);

        for spec in &specs {
            let model = spec.model()?;
            let context = format!("{} {name}", spec.name());
            let path = solve_default_path(&model, &problem, &options, &config)
                .map_err(|e| CliError::core(&context, e))?;
            let star = find_lambda_for_k(&model, &problem, args.k, &options, &config)
                .map_err(|e| CliError::core(&context, e))?;
            let estimate = extract_doas(&star.fit, &scenario.grid, args.k)
                .map_err(|e| CliError::core(&context, e))?;
            let spectrum = correlation_spectrum(&model, &problem, &star.fit);

            let mut found = estimate.angles_deg.clone();
            let mut truth = scenario.true_doas_deg.clone();
            found.sort_by(f64::total_cmp);
            truth.sort_by(f64::total_cmp);

            let stem = format!("{}_{name}", spec.name());
            write_text(&args.out.join(format!("{stem}_path.csv")), &path_csv(&path))?;
            write_text(
                &args.out.join(format!("{stem}_spectrum.csv")),
                &spectrum_csv(&scenario, &spectrum, &star.fit.coefficients),
            )?;
            let record = DoaRecord {
                schema_version: SCHEMA_VERSION,
                loss: loss_json(spec, &model),
                data: name,
                seed: scenario.seed,
                k: args.k,
                lambda_star: star.lambda,
                lambda_max: star.lambda_max,
                lambda_star_rel: star.lambda / star.lambda_max,
                scale: star.fit.scale,
                iterations: star.fit.iterations,
                kkt_max_violation: star.fit.kkt.max_violation,
                estimated_doas_deg: estimate.angles_deg.clone(),
                amplitudes: estimate.amplitudes.clone(),
                grid_indices: estimate.grid_indices.clone(),
                incomplete: estimate.incomplete,
                true_doas_deg: scenario.true_doas_deg.clone(),
                success: found == truth,
            };
            write_json(&args.out.join(format!("{stem}_doa.json")), &record)?;
            outputs.extend([
                format!("{stem}_path.csv"),
                format!("{stem}_spectrum.csv"),
                format!("{stem}_doa.json"),
            ]);

            println!(
                "{:<5} {:<9} lambda* = {:.6e} ({:.4} lambda_max)  DoAs: {}",
                spec.name(),
                name,
                star.lambda,
                star.lambda / star.lambda_max,
                estimate
                    .angles_deg
                    .iter()
                    .map(|a| format!("{a}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
    }

    let mut argv = vec!["doa-repro".to_string()];
    for spec in &specs {
        argv.extend(spec.to_args());
    }
    argv.extend([
        "--seed".to_string(),
        args.seed.to_string(),
        "--sensors".into(),
        args.sensors.to_string(),
        "--data".into(),
        if variants.len() == 2 {
            "both".into()
        } else {
            data_name(variants[0]).to_string()
        },
        "--k".into(),
        args.k.to_string(),
    ]);
    argv.extend(args.grid.to_args());
    argv.extend(args.solver.to_args());
    let mut manifest = RunManifest::new("doa-repro", argv, &args.out);
    manifest.losses = specs;
    manifest.grid = Some(GridRecord {
        count: options.count,
        floor_ratio: options.floor_ratio,
    });
    manifest.seed = Some(args.seed);
    manifest.scenario = Some(serde_json::to_value(&clean).expect("scenario serializes"));
    manifest.outputs = outputs;
    manifest.write()?;
    Ok(EXIT_OK)
}

fn write_exact_problem(path: &Path, problem: &Problem) -> CliResult<()> {
    let file = crate::io::ProblemFile::from_parts(problem.matrix(), problem.observation());
    let mut text = serde_json::to_string(&file).expect("problem serializes");
    text.push('\n');
    write_text(path, &text)
}

/// Thread count from the environment; `None` leaves the pool default.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::InvalidArgs(format!("{THREADS_ENV}: {e}"))),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::InvalidArgs(format!(
                "{THREADS_ENV} must be a positive integer, got {s:?}"
            ))),
        },
    }
}

#[derive(Debug, Serialize)]
pub struct MethodSummary {
    pub loss: Value,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub magnitude_order_rate: f64,
    pub solver_failures: usize,
    pub mean_scale: Option<f64>,
    pub mean_lambda_star_rel: Option<f64>,
    pub results: Vec<TrialResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(loss: Value, results: Vec<TrialResult>) -> MethodSummary {
    let trials = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    let ordered = results.iter().filter(|r| r.magnitude_order_correct).count();
    MethodSummary {
        loss,
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        magnitude_order_rate: ordered as f64 / trials as f64,
        solver_failures: results.iter().filter(|r| r.failure.is_some()).count(),
        mean_scale: mean(results.iter().filter_map(|r| r.scale)),
        mean_lambda_star_rel: mean(
            results
                .iter()
                .filter_map(|r| Some(r.lambda_star? / r.lambda_max?)),
        ),
        results,
    }
}

/// Writes `summary.json` (deterministic given the arguments) and
/// `timing.json` (wall clock, not reproducible).
pub fn montecarlo(args: &MonteCarloArgs) -> CliResult<i32> {
    if args.trials == 0 {
        return Err(CliError::InvalidArgs("--trials must be at least 1".into()));
    }
    let specs = resolve_losses(&args.loss, &args.huber)?;
    let config = args.solver.config()?;
    let options = args.grid.options()?;
    let (template, template_input) = match &args.scenario {
        Some(path) => {
            let path = canonical(path)?;
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let scenario: DoaScenario =
                serde_json::from_str(&text).map_err(|e| CliError::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
            scenario
                .validate()
                .map_err(|e| CliError::core(path.display().to_string(), e))?;
            (scenario, Some(path))
        }
        None => {
            let s = DoaScenario::paper(args.sensors, args.seed)
                .map_err(|e| CliError::InvalidArgs(e.to_string()))?;
            (if args.corrupt { s.corrupted() } else { s }, None)
        }
    };
    let threads = thread_cap()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::InvalidArgs(e.to_string()))?;

    let mut methods = Vec::new();
    let mut timings = Vec::new();
    let started = Instant::now();
    for spec in &specs {
        let model = spec.model()?;
        let t0 = Instant::now();
        let results: Vec<_> = pool.install(|| {
            (0..args.trials)
                .into_par_iter()
                .map(|i| {
                    let scenario = template.clone().with_seed(trial_seed(args.seed, i as u64));
                    run_trial(&scenario, &model, args.k, &options, &config)
                })
                .collect()
        });
        let results = results
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::core(spec.name(), e))?;
        timings.push(json!({ "loss": spec.name(), "seconds": t0.elapsed().as_secs_f64() }));
        let summary = summarize(loss_json(spec, &model), results);
        println!(
            "{:<5} success {}/{} ({:.0}%), magnitude order {:.0}%, solver failures {}",
            spec.name(),
            summary.successes,
            summary.trials,
            100.0 * summary.success_rate,
            100.0 * summary.magnitude_order_rate,
            summary.solver_failures
        );
        methods.push(summary);
    }

    ensure_dir(&args.out)?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "master_seed": args.seed,
        "trials": args.trials,
        "k": args.k,
        "scenario": template,
        "methods": methods,
    });
    write_json(&args.out.join("summary.json"), &summary)?;
    let timing = json!({
        "threads": threads.unwrap_or_else(|| pool.current_num_threads()),
        "methods": timings,
        "total_seconds": started.elapsed().as_secs_f64(),
    });
    write_json(&args.out.join("timing.json"), &timing)?;

    let mut argv = vec![
        "montecarlo".to_string(),
        "--trials".into(),
        args.trials.to_string(),
    ];
    for spec in &specs {
        argv.extend(spec.to_args());
    }
    argv.extend([
        "--seed".to_string(),
        args.seed.to_string(),
        "--k".into(),
        args.k.to_string(),
    ]);
    match &template_input {
        Some(path) => argv.extend(["--scenario".to_string(), path.display().to_string()]),
        None => {
            argv.extend(["--sensors".to_string(), args.sensors.to_string()]);
            if args.corrupt {
                argv.push("--corrupt".into());
            }
        }
    }
    argv.extend(args.grid.to_args());
    argv.extend(args.solver.to_args());
    let mut manifest = RunManifest::new("montecarlo", argv, &args.out);
    manifest.losses = specs;
    manifest.grid = Some(GridRecord {
        count: options.count,
        floor_ratio: options.floor_ratio,
    });
    manifest.seed = Some(args.seed);
    manifest.scenario = Some(serde_json::to_value(&template).expect("scenario serializes"));
    if let Some(path) = &template_input {
        manifest.inputs = vec![InputFile::record(path)?];
    }
    manifest.outputs = vec!["summary.json".into(), "timing.json".into()];
    manifest.write()?;
    Ok(EXIT_OK)
}
