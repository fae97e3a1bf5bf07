use num_complex::Complex64;
use proptest::prelude::*;
use robust_classo::doa::{
    array_response, correlation_spectrum, doa_problem, extract_doas, steering_matrix,
    steering_vector, AngularGrid, UlaConfig,
};
use robust_classo::path::find_lambda_for_k;
use robust_classo::sim::{generate_snapshot, run_trial, DoaScenario};
use robust_classo::solver::ccd_solve;
use robust_classo::{LossModel, PathOptions, SolverConfig};

/// Closed form of `sum_k exp(i k x)` for `k = 0..n`.
fn geometric_sum(n: usize, x: f64) -> Complex64 {
    if (x / (2.0 * std::f64::consts::PI)).fract().abs() < 1e-12 {
        return Complex64::new(n as f64, 0.0);
    }
    let i = Complex64::new(0.0, 1.0);
    ((i * x * n as f64).exp() - 1.0) / ((i * x).exp() - 1.0)
}

#[test]
fn gram_matches_geometric_series() {
    let ula = UlaConfig::new(20).unwrap();
    let grid = AngularGrid::five_degree();
    let m = steering_matrix(&ula, &grid).unwrap();
    let mh = m.t().mapv(|v| v.conj());
    let gram = mh.dot(&m);
    for (a, &ta) in grid.angles().iter().enumerate() {
        for (b, &tb) in grid.angles().iter().enumerate() {
            let x = std::f64::consts::PI * (ta.to_radians().sin() - tb.to_radians().sin());
            let expect = geometric_sum(20, x) / 20.0;
            assert!((gram[[a, b]] - expect).norm() < 1e-12, "{ta} {tb}");
        }
    }
}

#[test]
fn spectrum_peaks_at_true_directions_without_noise() {
    for theta in [-40.0, -5.0, 0.0, 20.0, 65.0] {
        let ula = UlaConfig::new(16).unwrap();
        let grid = AngularGrid::five_degree();
        let y = steering_vector(&ula, theta).unwrap();
        let problem = doa_problem(&ula, &grid, y).unwrap();
        let ls = LossModel::least_squares();
        let fit = ccd_solve(&ls, &problem, 10.0, None, &SolverConfig::default()).unwrap();
        let spec = correlation_spectrum(&ls, &problem, &fit);
        let best = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(grid.angles()[best], theta);
        assert!((spec[best] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn noiseless_paper_scenario_recovers_support() {
    for loss in [
        LossModel::least_squares(),
        LossModel::huber_from_q(0.85).unwrap(),
    ] {
        let mut scenario = DoaScenario::paper(20, 3).unwrap();
        scenario.snr_db = None;
        let (problem, _) = generate_snapshot(&scenario).unwrap();
        let star = find_lambda_for_k(
            &loss,
            &problem,
            3,
            &PathOptions::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        let est = extract_doas(&star.fit, &scenario.grid, 3).unwrap();
        assert_eq!(est.angles_deg, vec![-5.0, 0.0, 20.0]);
        // and the corrupted version for the robust loss
        if loss.threshold().is_finite() {
            let (problem, _) = generate_snapshot(&scenario.clone().corrupted()).unwrap();
            let star = find_lambda_for_k(
                &loss,
                &problem,
                3,
                &PathOptions::default(),
                &SolverConfig::default(),
            )
            .unwrap();
            let mut est = extract_doas(&star.fit, &scenario.grid, 3)
                .unwrap()
                .angles_deg;
            est.sort_by(f64::total_cmp);
            assert_eq!(est, vec![-5.0, 0.0, 20.0]);
        }
    }
}

#[test]
fn trials_are_reproducible() {
    let scenario = DoaScenario::paper(20, 77).unwrap().corrupted();
    let loss = LossModel::huber_from_q(0.85).unwrap();
    let a = run_trial(
        &scenario,
        &loss,
        3,
        &PathOptions::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    let b = run_trial(
        &scenario,
        &loss,
        3,
        &PathOptions::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn grid_permutation_permutes_coefficients() {
    let scenario = DoaScenario::paper(20, 5).unwrap();
    let (problem, _) = generate_snapshot(&scenario).unwrap();
    let y = problem.observation().clone();
    let ula = scenario.ula;
    let reversed: Vec<f64> = scenario.grid.angles().iter().rev().copied().collect();
    let rev_grid = AngularGrid::new(reversed).unwrap();
    let rev_problem = doa_problem(&ula, &rev_grid, y).unwrap();
    let loss = LossModel::huber_from_q(0.85).unwrap();
    let lam = 0.2 * robust_classo::path::lambda_max(&loss, &problem).unwrap();
    let config = SolverConfig {
        coef_tol: 1e-10,
        scale_tol: 1e-10,
        ..SolverConfig::default()
    };
    let a = ccd_solve(&loss, &problem, lam, None, &config).unwrap();
    let b = ccd_solve(&loss, &rev_problem, lam, None, &config).unwrap();
    let p = a.coefficients.len();
    for j in 0..p {
        assert!((a.coefficients[j] - b.coefficients[p - 1 - j]).norm() < 1e-7);
    }
}

proptest! {
    #[test]
    fn response_has_unit_modulus(n in 2usize..64, theta in -90.0f64..89.999) {
        let ula = UlaConfig::new(n).unwrap();
        let a = array_response(&ula, theta).unwrap();
        prop_assert!(a.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        let s = steering_vector(&ula, theta).unwrap();
        let norm: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirrored_angle_conjugates(n in 2usize..64, theta in -89.999f64..89.999) {
        let ula = UlaConfig::new(n).unwrap();
        let a = steering_vector(&ula, theta).unwrap();
        let b = steering_vector(&ula, -theta).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x.conj() - y).norm() < 1e-12);
        }
    }
}
