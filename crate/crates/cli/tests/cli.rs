use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use robust_classo::sim::{generate_snapshot, run_trial, DoaScenario};
use robust_classo::{LossModel, PathOptions, SolverConfig};
use robust_classo_cli::io::{rounded, ProblemFile};
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_robust-classo"));
    cmd.env_remove("ROBUST_CLASSO_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn coefficients(fit: &Value) -> Vec<Complex64> {
    fit["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| Complex64::new(p[0].as_f64().unwrap(), p[1].as_f64().unwrap()))
        .collect()
}

/// 4 x 3 problem with unit-norm columns.
fn tiny_problem(dir: &Path) -> std::path::PathBuf {
    let h = 0.5;
    let m = Array2::from_shape_vec(
        (4, 3),
        vec![
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(0.0, h),
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(0.0, -h),
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
            Complex64::new(-h, 0.0),
        ],
    )
    .unwrap();
    let y = Array1::from(vec![
        Complex64::new(1.0, 0.2),
        Complex64::new(0.1, -0.3),
        Complex64::new(0.9, 0.1),
        Complex64::new(0.2, 0.4),
    ]);
    let path = dir.join("tiny.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&ProblemFile::from_parts(&m, &y)).unwrap(),
    )
    .unwrap();
    path
}

fn paper_problem(dir: &Path) -> std::path::PathBuf {
    let (problem, _) = generate_snapshot(&DoaScenario::paper(20, 1).unwrap()).unwrap();
    let path = dir.join("paper.json");
    let file = ProblemFile::from_parts(problem.matrix(), problem.observation());
    fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    path
}

#[test]
fn solve_above_lambda_max_writes_zero_fit() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny_problem(dir.path());
    let out = dir.path().join("o");
    let res = run(&[
        "solve",
        "-i",
        input.to_str().unwrap(),
        "--loss",
        "ls",
        "--lambda",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let fit = read_json(&out.join("fit.json"));
    assert!(coefficients(&fit).iter().all(|c| c.norm() == 0.0));
    assert_eq!(fit["nonzeros"], 0);
    assert_eq!(fit["kkt"]["passed"], true);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn least_squares_and_wide_huber_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny_problem(dir.path());
    let ls = dir.path().join("ls");
    let hub = dir.path().join("hub");
    let i = input.to_str().unwrap();
    assert_eq!(
        code(&run(&[
            "solve",
            "-i",
            i,
            "--loss",
            "ls",
            "--lambda",
            "0.05",
            "--out",
            ls.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        code(&run(&[
            "solve",
            "-i",
            i,
            "--loss",
            "huber",
            "--c",
            "50",
            "--lambda",
            "0.05",
            "--out",
            hub.to_str().unwrap()
        ])),
        0
    );
    let a = coefficients(&read_json(&ls.join("fit.json")));
    let b = coefficients(&read_json(&hub.join("fit.json")));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).norm() < 1e-5);
    }
}

#[test]
fn malformed_file_is_a_parse_error_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    fs::write(
        &input,
        "{\n  \"matrix\": [[[1, 0]]],\n  \"observation\": [[1, 0],,]\n}\n",
    )
    .unwrap();
    let res = run(&[
        "solve",
        "-i",
        input.to_str().unwrap(),
        "--lambda",
        "0.1",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn unnormalized_columns_need_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let m = Array2::from_shape_fn((5, 2), |(i, j)| Complex64::new(1.0 + i as f64, j as f64));
    let y = Array1::from_shape_fn(5, |i| Complex64::new(i as f64, 1.0));
    let input = dir.path().join("raw.json");
    fs::write(
        &input,
        serde_json::to_string(&ProblemFile::from_parts(&m, &y)).unwrap(),
    )
    .unwrap();
    let out = dir.path().join("o");
    let args = [
        "solve",
        "-i",
        input.to_str().unwrap(),
        "--loss",
        "ls",
        "--lambda",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&run(&args)), 5);
    let mut with_flag = args.to_vec();
    with_flag.push("--normalize");
    assert_eq!(code(&run(&with_flag)), 0);
    let fit = read_json(&out.join("fit.json"));
    assert_eq!(fit["column_norms"].as_array().unwrap().len(), 2);
    assert!(fit["coefficients_original_scale"].is_array());
}

#[test]
fn kkt_and_solver_failures_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = paper_problem(dir.path());
    let i = input.to_str().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    let kkt = run(&[
        "solve",
        "-i",
        i,
        "--lambda",
        "0.5",
        "--kkt-tol",
        "1e-300",
        "--out",
        o,
    ]);
    assert_eq!(code(&kkt), 4);
    assert_eq!(read_json(&out.join("fit.json"))["kkt"]["passed"], false);

    let starved = run(&[
        "solve",
        "-i",
        i,
        "--lambda",
        "0.5",
        "--max-sweeps",
        "1",
        "--out",
        o,
    ]);
    assert_eq!(code(&starved), 3);
    assert_eq!(read_json(&out.join("fit.json"))["converged"], false);
}

#[test]
fn bad_arguments_exit_five_and_help_exits_zero() {
    assert_eq!(code(&run(&["solve", "--lambda", "x"])), 5);
    assert_eq!(code(&run(&["frobnicate"])), 5);
    assert_eq!(code(&run(&["doa-repro", "--q", "0.5", "--c", "1.0"])), 5);
    assert_eq!(code(&run(&["--help"])), 0);
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    assert_eq!(
        code(&run(&[
            "doa-repro",
            "--q",
            "1.5",
            "--out",
            o.to_str().unwrap()
        ])),
        5
    );
    assert_eq!(code(&run(&["path", "-i", "/nonexistent/problem.json"])), 1);
}

#[test]
fn path_rows_follow_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = paper_problem(dir.path());
    let i = input.to_str().unwrap();
    let full = dir.path().join("full");
    assert_eq!(
        code(&run(&["path", "-i", i, "--out", full.to_str().unwrap()])),
        0
    );
    let csv = fs::read_to_string(full.join("path.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 201);
    assert!(lines[0].starts_with("lambda,l1_norm,l1_norm_rel,nonzeros,scale,converged,abs_s_0,"));
    assert!(lines[0].ends_with("abs_s_35"));
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 6 + 36));

    let single = dir.path().join("single");
    assert_eq!(
        code(&run(&[
            "path",
            "-i",
            i,
            "--grid-count",
            "1",
            "--out",
            single.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        fs::read_to_string(single.join("path.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
}

#[test]
fn replaying_a_manifest_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = paper_problem(dir.path());
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let res = run(&[
        "path",
        "-i",
        input.to_str().unwrap(),
        "--loss",
        "ls",
        "--grid-count",
        "30",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    let manifest = first.join("manifest.json");
    assert_eq!(
        code(&run(&[
            "replay",
            manifest.to_str().unwrap(),
            "--out",
            second.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        fs::read(first.join("path.csv")).unwrap(),
        fs::read(second.join("path.csv")).unwrap()
    );

    // an edited input is refused
    let mut text = fs::read_to_string(&input).unwrap();
    text.push(' ');
    fs::write(&input, text).unwrap();
    assert_eq!(
        code(&run(&[
            "replay",
            manifest.to_str().unwrap(),
            "--out",
            second.to_str().unwrap()
        ])),
        5
    );
}

#[test]
fn doa_repro_single_loss_corrupted_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = run(&[
        "doa-repro",
        "--loss",
        "huber",
        "--corrupt",
        "--grid-count",
        "40",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "huber_corrupted_doa.json",
            "huber_corrupted_path.csv",
            "huber_corrupted_spectrum.csv",
            "manifest.json",
            "problem_corrupted.json"
        ]
    );
    let doa = read_json(&out.join("huber_corrupted_doa.json"));
    assert_eq!(doa["k"], 3);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("lambda*"), "{stdout}");

    // the written problem feeds back into solve
    let refit = dir.path().join("refit");
    let lambda = doa["lambda_star"].as_f64().unwrap().to_string();
    let args = [
        "solve".to_string(),
        "-i".into(),
        out.join("problem_corrupted.json")
            .to_str()
            .unwrap()
            .to_string(),
        "--lambda".into(),
        lambda,
        "--out".into(),
        refit.to_str().unwrap().to_string(),
    ];
    assert_eq!(code(&bin().args(&args).output().unwrap()), 0);
    assert_eq!(read_json(&refit.join("fit.json"))["nonzeros"], 3);
}

#[test]
fn single_trial_summary_matches_run_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc");
    let res = run(&[
        "montecarlo",
        "--trials",
        "1",
        "--loss",
        "huber",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let summary = read_json(&out.join("summary.json"));
    let method = &summary["methods"][0];
    assert_eq!(method["trials"], 1);

    let seed = robust_classo::sim::trial_seed(5, 0);
    let scenario = DoaScenario::paper(20, seed).unwrap();
    let direct = run_trial(
        &scenario,
        &LossModel::huber_from_q(0.85).unwrap(),
        3,
        &PathOptions::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert_eq!(
        method["results"][0],
        rounded(serde_json::to_value(&direct).unwrap())
    );
    assert_eq!(
        method["success_rate"],
        if direct.success { 1.0 } else { 0.0 }
    );
    assert!(out.join("timing.json").exists());
}

#[test]
fn thread_count_does_not_change_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let res = bin()
            .env("ROBUST_CLASSO_THREADS", threads)
            .args([
                "montecarlo",
                "--trials",
                "12",
                "--corrupt",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(code(&res), 0);
        assert_eq!(
            read_json(&out.join("timing.json"))["threads"]
                .as_u64()
                .unwrap()
                .to_string(),
            threads
        );
        summaries.push(fs::read(out.join("summary.json")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);

    let bad = bin()
        .env("ROBUST_CLASSO_THREADS", "zero")
        .args([
            "montecarlo",
            "--trials",
            "1",
            "--out",
            dir.path().join("bad").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 5);
}

#[test]
fn montecarlo_rates_match_the_qualitative_claims() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    let corrupt = dir.path().join("corrupt");
    assert_eq!(
        code(&run(&[
            "montecarlo",
            "--trials",
            "50",
            "--out",
            clean.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        code(&run(&[
            "montecarlo",
            "--trials",
            "50",
            "--corrupt",
            "--out",
            corrupt.to_str().unwrap()
        ])),
        0
    );
    let rate = |path: &Path, i: usize| {
        read_json(&path.join("summary.json"))["methods"][i]["success_rate"]
            .as_f64()
            .unwrap()
    };
    // methods are listed ls first, then huber
    assert!((rate(&clean, 0) - rate(&clean, 1)).abs() <= 0.10);
    assert!(rate(&corrupt, 1) >= rate(&corrupt, 0));
}

#[test]
fn scenario_template_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = DoaScenario::paper(20, 0).unwrap();
    scenario.snr_db = None;
    let path = dir.path().join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(&scenario).unwrap()).unwrap();
    let out = dir.path().join("o");
    let res = run(&[
        "montecarlo",
        "--trials",
        "3",
        "--sensors",
        "12",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["scenario"]["ula"]["sensors"], 20);
    for m in summary["methods"].as_array().unwrap() {
        assert_eq!(m["success_rate"], 1.0);
    }

    fs::write(&path, "{\"ula\": 3}").unwrap();
    let res = run(&[
        "montecarlo",
        "--trials",
        "1",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
}
