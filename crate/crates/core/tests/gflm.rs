use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trunc_fpca::dataset::Covariates;
use trunc_fpca::gflm::{classify, fit_gflm_rows, inverse_link, predict_gflm, select_k_fve, FitInfo, GflmFit, Link};
use trunc_fpca::numeric::EigenSystem;
use trunc_fpca::Error;

fn spectrum(values: &[f64]) -> EigenSystem {
    let total: f64 = values.iter().sum();
    let mut acc = 0.0;
    EigenSystem {
        grid: vec![0.0, 1.0],
        eigenvalues: values.to_vec(),
        eigenvectors: vec![vec![0.0, 0.0]; values.len()],
        quad_weights: vec![0.5, 0.5],
        fve: values
            .iter()
            .map(|v| {
                acc += v;
                acc / total
            })
            .collect(),
    }
}

fn normal_rows(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

#[test]
fn fve_examples() {
    assert_eq!(select_k_fve(&spectrum(&[4.0, 2.0, 1.0, 1.0]), 0.75).unwrap(), 2);
    assert_eq!(select_k_fve(&spectrum(&[4.0, 2.0, 1.0, 0.0]), 1.0).unwrap(), 3);
    for th in [0.1, 0.5, 0.99, 1.0] {
        assert_eq!(select_k_fve(&spectrum(&[3.0, 0.0, 0.0]), th).unwrap(), 1);
    }
    assert!(matches!(
        select_k_fve(&spectrum(&[0.0, 0.0]), 0.9),
        Err(Error::DegenerateSpectrum)
    ));
}

#[test]
fn noiseless_identity_fit_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows = normal_rows(&mut rng, 40, 3);
    let beta = [1.0, -0.5, 2.0];
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 0.7 + r.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let fit = fit_gflm_rows(&rows, None, &y, Link::Identity, 3).unwrap();
    assert!((fit.intercept - 0.7).abs() < 1e-8);
    for (b, want) in fit.score_coeffs.iter().zip(beta) {
        assert!((b - want).abs() < 1e-8);
    }
}

#[test]
fn identity_fit_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows = normal_rows(&mut rng, 60, 3);
    let cov = Covariates {
        names: vec!["age".into()],
        rows: (0..60).map(|_| vec![rng.random_range(20.0..70.0)]).collect(),
    };
    let y: Vec<f64> = (0..60)
        .map(|i| 1.0 + 0.02 * cov.rows[i][0] + rows[i][0] - rows[i][2] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let fit = fit_gflm_rows(&rows, Some(&cov), &y, Link::Identity, 3).unwrap();

    let x = DMatrix::from_fn(60, 5, |i, j| match j {
        0 => 1.0,
        1 => cov.rows[i][0],
        _ => rows[i][j - 2],
    });
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * DVector::from_vec(y.clone());
    let beta = xtx.cholesky().unwrap().solve(&xty);
    for (a, b) in fit.coefficients().iter().zip(beta.iter()) {
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
    assert_eq!(fit.column_names, ["intercept", "age", "score1", "score2", "score3"]);
}

#[test]
fn permuted_response_gives_null_coefficients() {
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = normal_rows(&mut rng, 100, 3);
        let mut y: Vec<f64> = rows
            .iter()
            .map(|r| r[0] + 0.5 * r[1] + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for i in (1..y.len()).rev() {
            let j = rng.random_range(0..=i);
            y.swap(i, j);
        }
        let fit = fit_gflm_rows(&rows, None, &y, Link::Identity, 3).unwrap();
        let ok = fit
            .score_coeffs
            .iter()
            .zip(&fit.standard_errors[1..])
            .all(|(b, se)| b.abs() < 3.0 * se);
        hits += ok as usize;
    }
    assert!(hits >= 95, "only {hits} of 100 seeds inside 3 SE");
}

fn logistic_data(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = normal_rows(&mut rng, n, 2);
    let y = rows
        .iter()
        .map(|r| {
            let p = 1.0 / (1.0 + (-(0.3 + 1.2 * r[0] - 0.8 * r[1])).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (rows, y)
}

#[test]
fn logit_relabelling_flips_signs() {
    let (rows, y) = logistic_data(5, 200);
    let flipped: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let a = fit_gflm_rows(&rows, None, &y, Link::Logit, 2).unwrap();
    let b = fit_gflm_rows(&rows, None, &flipped, Link::Logit, 2).unwrap();
    assert!(
        a.fit_info.converged && b.fit_info.converged,
        "{:?} {:?}",
        a.fit_info,
        b.fit_info
    );
    assert!(a.fit_info.gradient_norm < 1e-8);
    for (x, z) in a.coefficients().iter().zip(b.coefficients()) {
        assert!((x + z).abs() < 1e-8);
    }
    let pa = predict_gflm(&a, &rows, None).unwrap();
    let pb = predict_gflm(&b, &rows, None).unwrap();
    for (p, q) in pa.iter().zip(&pb) {
        assert!((p + q - 1.0).abs() < 1e-10);
    }
}

#[test]
fn duplicate_covariate_is_collinear() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows = normal_rows(&mut rng, 30, 2);
    let cov = Covariates {
        names: vec!["x".into(), "x_copy".into()],
        rows: (0..30)
            .map(|_| {
                let v: f64 = rng.random();
                vec![v, v]
            })
            .collect(),
    };
    let y: Vec<f64> = (0..30).map(|i| rows[i][0]).collect();
    match fit_gflm_rows(&rows, Some(&cov), &y, Link::Identity, 2) {
        Err(Error::Collinearity { columns }) => assert!(columns.iter().any(|c| c == "x_copy"), "{columns:?}"),
        other => panic!("expected a collinearity error, got {other:?}"),
    }
}

#[test]
fn non_binary_logit_response_is_rejected() {
    let (rows, mut y) = logistic_data(3, 40);
    y[7] = 0.5;
    assert!(matches!(
        fit_gflm_rows(&rows, None, &y, Link::Logit, 2),
        Err(e) if e.is_validation()
    ));
}

#[test]
fn separation_is_flagged() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0 - 2.0]).collect();
    let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.0 { 1.0 } else { 0.0 }).collect();
    let fit = fit_gflm_rows(&rows, None, &y, Link::Logit, 1).unwrap();
    assert!(fit.fit_info.separation);
}

#[test]
fn prediction_basics() {
    let fit = GflmFit {
        link: Link::Identity,
        k: 2,
        intercept: 1.25,
        covariate_coeffs: vec![],
        score_coeffs: vec![0.0, 0.0],
        standard_errors: vec![0.0; 3],
        column_names: vec!["intercept".into(), "score1".into(), "score2".into()],
        dispersion: 1.0,
        fit_info: FitInfo {
            log_likelihood: 0.0,
            iterations: 0,
            converged: true,
            gradient_norm: 0.0,
            separation: false,
        },
    };
    let rows = vec![vec![3.0, -1.0], vec![0.2, 9.0]];
    assert_eq!(predict_gflm(&fit, &rows, None).unwrap(), vec![1.25, 1.25]);
    assert!(predict_gflm(&fit, &[vec![1.0]], None).is_err());
    assert_eq!(inverse_link(Link::Logit, 0.0), 0.5);
    assert_eq!(classify(&[0.2, 0.5, 0.9]), vec![0, 1, 1]);
}
