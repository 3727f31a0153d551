//! Acceptance criteria. Each test prints one PASS/FAIL line per criterion
//! (and indented detail lines) straight to stderr so the lines show up in
//! captured test logs.

use std::sync::OnceLock;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trunc_fpca::covariance::{fit_covariance_pgd, offdiag_local_loglik, MixedConditioning, PgdConfig};
use trunc_fpca::dataset::{Bounds, FunctionalDataset};
use trunc_fpca::kernel::KernelSpec;
use trunc_fpca::mean_variance::{estimate_mean_variance, local_loglik_mean_var};
use trunc_fpca::numeric::{bivariate_normal_cdf, sample_truncated_mvn, GibbsConfig, SymMatrix};
use trunc_fpca::simulation::{
    generate_case, run_experiment, run_method, uniform_grid, write_summary_csv, ExperimentConfig, ExperimentResult,
    MethodId, PipelineConfig, Scenario, SimCase,
};
use trunc_fpca_study::{fmt3, lowest, report, verdict, within};

const SEED: u64 = 1;
const REPLICATES: usize = 100;
const MAGNITUDE_TOL: f64 = 0.5;

/// Printed Monte Carlo means, ordered proposed, naive, pace.
const MEAN_SSE: [[f64; 3]; 5] = [
    [0.11, 0.61, 0.67],
    [0.14, 0.65, 0.71],
    [0.11, 0.63, 0.69],
    [0.15, 0.65, 0.71],
    [0.04, 0.13, 0.19],
];
const COV_SSE: [[f64; 3]; 5] = [
    [2.25, 2.24, 3.79],
    [1.68, 8.83, 8.00],
    [1.80, 4.08, 4.75],
    [1.74, 8.74, 8.00],
    [0.16, 0.44, 0.24],
];
const SNR_SSE_CASE1: [f64; 3] = [7.08, 4.70, 13.02];

fn surfaces() -> &'static [ExperimentResult] {
    static CACHE: OnceLock<Vec<ExperimentResult>> = OnceLock::new();
    CACHE.get_or_init(|| {
        (1..=5u8)
            .map(|case_id| {
                let cfg = ExperimentConfig::new(case_id, Scenario::Surfaces, REPLICATES, SEED);
                run_experiment(&cfg).expect("surface experiment")
            })
            .collect()
    })
}

fn regression() -> &'static [ExperimentResult] {
    static CACHE: OnceLock<Vec<ExperimentResult>> = OnceLock::new();
    CACHE.get_or_init(|| {
        [Scenario::GflmIdentity, Scenario::GflmLogit]
            .into_iter()
            .map(|s| run_experiment(&ExperimentConfig::new(5, s, REPLICATES, SEED)).expect("gflm experiment"))
            .collect()
    })
}

fn means(r: &ExperimentResult, metric: &str) -> [f64; 3] {
    MethodId::ALL.map(|m| r.get(m, metric).map_or(f64::NAN, |s| s.mean))
}

fn dump_summary(results: &[ExperimentResult]) {
    let summaries: Vec<_> = results.iter().flat_map(|r| r.summary.iter().cloned()).collect();
    let mut buf = Vec::new();
    write_summary_csv(&summaries, &mut buf).unwrap();
    report(&String::from_utf8(buf).unwrap());
}

#[test]
fn criterion_1_surface_orderings_and_magnitudes() {
    let results = surfaces();
    dump_summary(results);
    let mut all = true;
    for r in results {
        let case = r.config.case_id as usize;
        let mean = means(r, "mean_sse");
        let cov = means(r, "cov_sse");
        for m in MethodId::ALL {
            assert_eq!(r.failures(m), 0, "case {case}: {m} failed on some replicates");
        }

        let ok = lowest(&mean) == 0;
        all &= ok;
        report(&format!(
            "  case {case} mean-SSE proposed lowest: {} ({})",
            verdict(ok),
            fmt3(&mean)
        ));
        if case >= 2 {
            let ok = lowest(&cov) == 0;
            all &= ok;
            report(&format!(
                "  case {case} cov-SSE proposed lowest: {} ({})",
                verdict(ok),
                fmt3(&cov)
            ));
        }
        if [1, 2, 5].contains(&case) {
            for (name, got, printed) in [("mean", mean, MEAN_SSE[case - 1]), ("cov", cov, COV_SSE[case - 1])] {
                let ok = (0..3).all(|j| within(got[j], printed[j], MAGNITUDE_TOL));
                all &= ok;
                report(&format!(
                    "  case {case} {name}-SSE within ±50% of {}: {}",
                    fmt3(&printed),
                    verdict(ok)
                ));
            }
        }
    }
    report(&format!(
        "criterion 1 (mean and covariance orderings and magnitudes): {}",
        verdict(all)
    ));
    assert!(all, "criterion 1 failed; see the lines above");
}

#[test]
fn criterion_2_snr_pattern() {
    let results = surfaces();
    let mut all = true;
    for r in results {
        let case = r.config.case_id as usize;
        let snr = means(r, "snr_sse");
        if case == 1 {
            let printed = SNR_SSE_CASE1;
            let order_ok = snr[1] < snr[0] && snr[0] < snr[2];
            let mag_ok = (0..3).all(|j| within(snr[j], printed[j], MAGNITUDE_TOL));
            all &= order_ok && mag_ok;
            report(&format!(
                "  case 1 SNR-SSE ordering naive < proposed < pace: {} ({})",
                verdict(order_ok),
                fmt3(&snr)
            ));
            report(&format!(
                "  case 1 SNR-SSE within ±50% of {}: {}",
                fmt3(&printed),
                verdict(mag_ok)
            ));
        } else {
            let ok = lowest(&snr) == 0;
            all &= ok;
            report(&format!(
                "  case {case} SNR-SSE proposed lowest: {} ({})",
                verdict(ok),
                fmt3(&snr)
            ));
        }
    }
    report(&format!("criterion 2 (SNR pattern): {}", verdict(all)));
    assert!(all, "criterion 2 failed; see the lines above");
}

#[test]
fn criterion_3_gflm_prediction() {
    let results = regression();
    dump_summary(results);
    let identity = &results[0];
    let logit = &results[1];
    let mse = identity.get(MethodId::Proposed, "mse_heldout").expect("mse").mean;
    let acc = logit
        .get(MethodId::Proposed, "accuracy_heldout")
        .expect("accuracy")
        .mean;
    let mse_ok = (0.74..=1.04).contains(&mse);
    let acc_ok = (0.75..=0.86).contains(&acc);
    report(&format!(
        "  identity link held-out MSE {mse:.4} in [0.74, 1.04]: {}",
        verdict(mse_ok)
    ));
    report(&format!(
        "  logit link held-out accuracy {acc:.4} in [0.75, 0.86]: {}",
        verdict(acc_ok)
    ));
    report(&format!("criterion 3 (GFLM): {}", verdict(mse_ok && acc_ok)));
    assert!(mse_ok && acc_ok, "criterion 3 failed; see the lines above");
}

#[test]
fn criterion_4_eigenfunction_recovery() {
    let case5 = &surfaces()[4];
    let proposed = case5.values(MethodId::Proposed, "phi1_alignment");
    let naive = case5.values(MethodId::Naive, "phi1_alignment");
    assert_eq!(proposed.len(), REPLICATES);
    assert_eq!(naive.len(), REPLICATES);
    let above = proposed.iter().filter(|(_, a)| *a > 0.9).count() as f64 / REPLICATES as f64;
    let beats = proposed
        .iter()
        .zip(&naive)
        .filter(|((rp, a), (rn, b))| {
            assert_eq!(rp, rn);
            a > b
        })
        .count() as f64
        / REPLICATES as f64;
    let ok_above = above >= 0.8;
    let ok_beats = beats >= 0.8;
    report(&format!(
        "  alignment > 0.9 in {:.0}% of seeds (need 80%): {}",
        100.0 * above,
        verdict(ok_above)
    ));
    report(&format!(
        "  alignment above naive in {:.0}% of seeds (need 80%): {}",
        100.0 * beats,
        verdict(ok_beats)
    ));
    report(&format!(
        "criterion 4 (eigenfunction recovery): {}",
        verdict(ok_above && ok_beats)
    ));
    assert!(ok_above && ok_beats, "criterion 4 failed; see the lines above");
}

/// Share of replicates in which `a`'s metric is below `b`'s, paired by replicate.
fn share_below(r: &ExperimentResult, metric: &str, a: MethodId, b: MethodId) -> f64 {
    let (va, vb) = (r.values(a, metric), r.values(b, metric));
    assert_eq!(va.len(), vb.len());
    let wins = va
        .iter()
        .zip(&vb)
        .filter(|((ra, x), (rb, y))| {
            assert_eq!(ra, rb);
            x < y
        })
        .count();
    wins as f64 / va.len().max(1) as f64
}

#[test]
fn per_replicate_dominance() {
    let results = surfaces();
    let checks = [
        (
            "case 1 mean SSE, proposed below naive",
            &results[0],
            "mean_sse",
            MethodId::Proposed,
            MethodId::Naive,
        ),
        (
            "case 2 covariance SSE, proposed below naive",
            &results[1],
            "cov_sse",
            MethodId::Proposed,
            MethodId::Naive,
        ),
        (
            "case 2 covariance SSE, proposed below pace",
            &results[1],
            "cov_sse",
            MethodId::Proposed,
            MethodId::Pace,
        ),
    ];
    let mut all = true;
    for (label, r, metric, a, b) in checks {
        let share = share_below(r, metric, a, b);
        let ok = share >= 0.9;
        all &= ok;
        report(&format!(
            "  {label} in {:.0}% of replicates (need 90%): {}",
            100.0 * share,
            verdict(ok)
        ));
    }
    report(&format!("per-replicate dominance: {}", verdict(all)));
    assert!(all, "per-replicate dominance failed; see the lines above");
}

fn small_instance(rng: &mut ChaCha8Rng) -> (FunctionalDataset, Vec<f64>) {
    let case_id = [1u8, 2, 4, 5][rng.random_range(0..4)];
    let n = rng.random_range(25..=45);
    let mut sim = SimCase::new(case_id, n, rng.random());
    sim.g = rng.random_range(4..=8);
    let (ds, _) = generate_case(&sim).expect("small instance");
    (ds, uniform_grid(sim.g))
}

fn psd_invariance() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let (ds, grid) = small_instance(&mut rng);
        let (mv, _) = estimate_mean_variance(&ds, &grid, None).unwrap();
        let k = KernelSpec::gaussian(mv.bandwidth).unwrap();
        let cfg = PgdConfig {
            track_min_eigenvalue: true,
            ..PgdConfig::default()
        };
        let fit = fit_covariance_pgd(&ds, &mv, &grid, &k, &cfg).unwrap();
        assert!(!fit.min_eigenvalues.is_empty());
        worst = fit.min_eigenvalues.iter().copied().fold(worst, f64::min);
    }
    let ok = worst >= -1e-10;
    report(&format!(
        "  PSD after every sweep, 20 instances (worst λmin {worst:.3e}): {}",
        verdict(ok)
    ));
    ok
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn gradient_checks() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6EAD);
    let (ds, _) = generate_case(&SimCase::new(2, 60, 11)).unwrap();
    let grid = uniform_grid(15);
    let (mv, _) = estimate_mean_variance(&ds, &grid, None).unwrap();
    let k = KernelSpec::gaussian(mv.bandwidth).unwrap();

    let mut worst_uni: f64 = 0.0;
    for _ in 0..20 {
        let t = rng.random_range(0.05..0.95);
        let mu = rng.random_range(-0.8..0.8);
        let ls = rng.random_range(0.3f64.ln()..1.5f64.ln());
        let (_, g) = local_loglik_mean_var(t, mu, ls, &ds, &k).unwrap();
        let h = 1e-5;
        let f = |m: f64, l: f64| local_loglik_mean_var(t, m, l, &ds, &k).unwrap().0;
        let fd_mu = (f(mu + h, ls) - f(mu - h, ls)) / (2.0 * h);
        let fd_ls = (f(mu, ls + h) - f(mu, ls - h)) / (2.0 * h);
        worst_uni = worst_uni.max(rel_err(g[0], fd_mu)).max(rel_err(g[1], fd_ls));
    }

    let mut worst_bi: f64 = 0.0;
    for _ in 0..20 {
        let s = rng.random_range(0.05..0.9);
        let t = rng.random_range(s + 0.03..0.97);
        let bound = (mv.sigma_tilde_sq_at(s) * mv.sigma_tilde_sq_at(t)).sqrt();
        let c = rng.random_range(-0.8..0.8) * bound;
        let f = |c: f64| offdiag_local_loglik(s, t, c, &mv, &ds, &k, MixedConditioning::ExactValue).unwrap();
        let (_, g) = f(c);
        let h = 1e-5 * bound;
        let fd = (f(c + h).0 - f(c - h).0) / (2.0 * h);
        worst_bi = worst_bi.max(rel_err(g, fd));
    }
    let ok = worst_uni < 1e-4 && worst_bi < 1e-4;
    report(&format!(
        "  analytic vs central-difference gradients, 20 states each (worst rel. error {worst_uni:.2e} / {worst_bi:.2e}): {}",
        verdict(ok)
    ));
    ok
}

/// On data with nothing truncated both routes agree, and stage 1 matches
/// the closed-form kernel-weighted mean and variance.
fn oracle_equivalence() -> bool {
    let mut sim = SimCase::new(2, 50, 21);
    sim.bounds = Bounds { a: -50.0, b: 50.0 };
    let (ds, _) = generate_case(&sim).unwrap();
    assert!(!ds.has_truncation());
    let grid = sim.grid();
    let cfg = PipelineConfig::default();
    let p = run_method(MethodId::Proposed, &ds, &grid, &cfg).unwrap();
    let q = run_method(MethodId::Naive, &ds, &grid, &cfg).unwrap();
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let mut diff = max_diff(&p.mean_variance.mu_hat, &q.mean_variance.mu_hat);
    diff = diff.max(max_diff(
        &p.mean_variance.sigma_tilde_sq_hat,
        &q.mean_variance.sigma_tilde_sq_hat,
    ));
    diff = diff.max(max_diff(
        p.model.sigma.as_matrix().as_slice(),
        q.model.sigma.as_matrix().as_slice(),
    ));
    diff = diff.max(max_diff(
        p.model.sigma_tilde.as_matrix().as_slice(),
        q.model.sigma_tilde.as_matrix().as_slice(),
    ));
    let (ps, qs) = (p.scores.as_ref().unwrap(), q.scores.as_ref().unwrap());
    assert_eq!(ps.k, qs.k);
    for (a, b) in ps.scores.iter().zip(&qs.scores) {
        diff = diff.max(max_diff(a, b));
    }
    let routes_ok = diff <= 1e-10;

    // Independent closed form for stage 1.
    let mut closed: f64 = 0.0;
    let mv = &p.mean_variance;
    for (i, &t) in grid.iter().enumerate() {
        let h = mv.local_bandwidths[i];
        let (mut w0, mut w1, mut w2) = (0.0, 0.0, 0.0);
        for traj in &ds.trajectories {
            for pt in &traj.points {
                let w = (-0.5 * ((pt.time - t) / h).powi(2)).exp();
                w0 += w;
                w1 += w * pt.value;
                w2 += w * pt.value * pt.value;
            }
        }
        let mu = w1 / w0;
        let var = w2 / w0 - mu * mu;
        closed = closed
            .max((mu - mv.mu_hat[i]).abs())
            .max((var - mv.sigma_tilde_sq_hat[i]).abs());
    }
    let closed_ok = closed <= 1e-10;

    // Nothing to impute, so Monte Carlo scores equal the plain BLUP.
    let mut blup: f64 = 0.0;
    for (a, b) in ps.scores.iter().zip(&ps.scores_nontrunc) {
        blup = blup.max(max_diff(a, b));
    }
    let blup_ok = blup <= 1e-10;

    report(&format!(
        "  truncation-free data, proposed vs naive (max diff {diff:.2e}), stage 1 vs closed form ({closed:.2e}), MC vs BLUP scores ({blup:.2e}): {}",
        verdict(routes_ok && closed_ok && blup_ok)
    ));
    routes_ok && closed_ok && blup_ok
}

fn sampler_checks() -> bool {
    let mean = DVector::from_element(1, 0.0);
    let cov = SymMatrix::identity(1);
    let draws = sample_truncated_mvn(
        &mean,
        &cov,
        &[0.0],
        &[f64::INFINITY],
        100_000,
        77,
        GibbsConfig::default(),
    )
    .unwrap();
    let avg = draws.column(0).mean();
    let target = (2.0 / std::f64::consts::PI).sqrt();
    let tmvn_ok = (avg - target).abs() < 0.01;
    report(&format!(
        "  one-sided truncated normal mean {avg:.5} vs {target:.5} (tol 0.01): {}",
        verdict(tmvn_ok)
    ));

    let mut worst: f64 = 0.0;
    for rho in [-0.9, 0.0, 0.5] {
        let exact = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
        worst = worst.max((bivariate_normal_cdf(0.0, 0.0, rho).unwrap() - exact).abs());
    }
    let bvn_ok = worst < 1e-6;
    report(&format!(
        "  bivariate CDF at the origin vs 1/4 + asin(ρ)/2π (max error {worst:.2e}): {}",
        verdict(bvn_ok)
    ));
    tmvn_ok && bvn_ok
}

fn affine(ds: &FunctionalDataset, shift: f64, scale: f64) -> FunctionalDataset {
    let mut out = ds.clone();
    out.bounds = Bounds {
        a: shift + scale * ds.bounds.a,
        b: shift + scale * ds.bounds.b,
    };
    for traj in &mut out.trajectories {
        for p in &mut traj.points {
            p.value = shift + scale * p.value;
        }
    }
    out
}

fn equivariance() -> bool {
    let (ds, _) = generate_case(&SimCase::new(2, 60, 5)).unwrap();
    let grid = uniform_grid(15);
    let (base, _) = estimate_mean_variance(&ds, &grid, None).unwrap();
    let mut worst: f64 = 0.0;
    for (shift, scale) in [(3.0, 1.0), (0.0, 2.5), (-1.5, 0.4)] {
        let (mv, _) = estimate_mean_variance(&affine(&ds, shift, scale), &grid, None).unwrap();
        for i in 0..grid.len() {
            let mu_err = (mv.mu_hat[i] - (shift + scale * base.mu_hat[i])).abs() / scale;
            let var_err =
                (mv.sigma_tilde_sq_hat[i] - scale * scale * base.sigma_tilde_sq_hat[i]).abs() / (scale * scale);
            worst = worst.max(mu_err).max(var_err);
        }
    }
    let ok = worst <= 1e-8;
    report(&format!(
        "  stage-1 shift/scale equivariance (max error {worst:.2e}): {}",
        verdict(ok)
    ));
    ok
}

fn reproducibility() -> bool {
    let run = || {
        let mut cfg = ExperimentConfig::new(5, Scenario::GflmLogit, 2, 99);
        cfg.n = 40;
        let r = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&r.summary, &mut buf).unwrap();
        buf.extend(serde_json::to_vec(&r.records).unwrap());
        buf
    };
    let ok = run() == run();
    report(&format!(
        "  identical seeds give byte-identical artifacts: {}",
        verdict(ok)
    ));
    ok
}

#[test]
fn criterion_5_property_suites() {
    let checks = [
        psd_invariance(),
        gradient_checks(),
        oracle_equivalence(),
        sampler_checks(),
        equivariance(),
        reproducibility(),
    ];
    let ok = checks.iter().all(|&c| c);
    report(&format!("criterion 5 (property suites): {}", verdict(ok)));
    assert!(ok, "criterion 5 failed; see the lines above");
}

/// Mean-SSE should fall as n grows. Slow and asymptotic in nature, so it
/// only runs on request.
#[test]
#[ignore]
fn criterion_6_smoke_mean_sse_decreases_in_n() {
    let mut previous = f64::INFINITY;
    let mut ok = true;
    for n in [50, 100, 200, 400] {
        let mut cfg = ExperimentConfig::new(2, Scenario::Surfaces, 50, SEED);
        cfg.n = n;
        cfg.methods = vec![MethodId::Proposed];
        let r = run_experiment(&cfg).unwrap();
        let sse = r.get(MethodId::Proposed, "mean_sse").unwrap().mean;
        report(&format!("  n = {n}: mean-SSE {sse:.4}"));
        ok &= sse < previous;
        previous = sse;
    }
    report(&format!(
        "criterion 6 smoke (mean-SSE decreasing in n): {}",
        verdict(ok)
    ));
    assert!(ok);
}
