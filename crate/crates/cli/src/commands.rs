use std::io::Write;
use std::path::Path;

use serde_json::json;
use trunc_fpca::covariance::{
    estimate_covariance, write_matrix_csv, BandwidthChoice, CovarianceConfig, CovarianceModel,
};
use trunc_fpca::dataset::{self, attach_covariates, Bounds, FlagMode, FunctionalDataset, LoadOptions};
use trunc_fpca::gflm::{classify, fit_gflm, predict_gflm, select_k_fve, Link, DEFAULT_FVE_THRESHOLD};
use trunc_fpca::mean_variance::{estimate_mean_variance, CvTable, MeanVarianceEstimate};
use trunc_fpca::scores::{predict_scores_mc, ScoreConfig, ScoreSet};
use trunc_fpca::simulation::{
    generate_case, phi1_overlay, reference_phi1, run_experiment, run_method, uniform_grid, write_series_csv,
    write_summary_csv, ExperimentConfig, ExperimentResult, MethodFit, MethodId, MetricSummary, PipelineConfig,
    Scenario, SimCase,
};

use crate::args::*;
use crate::config::*;
use crate::error::CliError;
use crate::output::{digest_inputs, read_input, Manifest, OutDir};
use crate::reference::{ranks, GFLM_ACCURACY, GFLM_MSE, SURFACES};

type Res<T> = Result<T, CliError>;

const DEFAULT_GRID: usize = 15;
const DEFAULT_SEED: u64 = 1;

fn bounds(args: &DataArgs, cfg: &RunConfig) -> Res<Bounds> {
    let a = args.lower.or(cfg.lower);
    let b = args.upper.or(cfg.upper);
    match (a, b) {
        (Some(a), Some(b)) => Ok(Bounds::new(a, b)?),
        _ => Err(CliError::Validation(
            "recording bounds are required (--lower/--upper or the config file)".into(),
        )),
    }
}

fn load(args: &DataArgs, cfg: &RunConfig) -> Res<FunctionalDataset> {
    let bytes = read_input(&args.data)?;
    let b = bounds(args, cfg)?;
    let mode = if args.infer_flags {
        FlagMode::Infer
    } else {
        FlagMode::Explicit
    };
    let opts = LoadOptions {
        rescale_time: args.rescale_time,
    };
    Ok(dataset::read_csv(bytes.as_slice(), b, mode, opts)?)
}

fn grid_of(size: Option<usize>, cfg: &RunConfig) -> Res<Vec<f64>> {
    let g = size.or(cfg.grid_size).unwrap_or(DEFAULT_GRID);
    check_grid_size(g)?;
    Ok(uniform_grid(g))
}

fn mean_candidates(args: &FitMeanArgs, cfg: &RunConfig) -> Res<Option<Vec<f64>>> {
    let c = args.bandwidths.clone().or_else(|| cfg.mean_bandwidths.clone());
    if let Some(c) = &c {
        check_positive_list(c)?;
    }
    Ok(c)
}

fn data_config(args: &DataArgs, cfg: &RunConfig) -> serde_json::Value {
    json!({
        "lower": args.lower.or(cfg.lower),
        "upper": args.upper.or(cfg.upper),
        "infer_flags": args.infer_flags,
        "rescale_time": args.rescale_time,
    })
}

fn validation_failures(ds: &FunctionalDataset) -> Res<()> {
    let report = dataset::validate(ds);
    if report.all_passed() {
        return Ok(());
    }
    let lines: Vec<String> = report.failures().map(|(c, f)| format!("{c}: {f}")).collect();
    Err(CliError::Validation(lines.join("; ")))
}

pub fn simulate(args: &SimulateArgs, cfg: &RunConfig) -> Res<()> {
    let n = args.n.or(cfg.n).unwrap_or(100);
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let mut sim = SimCase::new(args.case, n, seed);
    sim.g = args.g.or(cfg.g).unwrap_or(sim.g);
    sim.validate()?;
    let (ds, truth) = generate_case(&sim)?;
    let mut out = OutDir::create(&args.out)?;
    out.write_with("dataset.csv", |w| dataset::write_csv(&ds, w))?;
    out.write_json("truth.json", &truth)?;
    out.finish(Manifest::new(
        "simulate",
        json!({ "case": sim.case_id, "n": sim.n, "g": sim.g, "bounds": sim.bounds }),
        json!({ "seed": sim.seed, "structure_seed": sim.structure_seed }),
        vec![],
    ))
}

pub fn validate(args: &DataArgs, cfg: &RunConfig) -> Res<()> {
    let ds = load(args, cfg)?;
    let report = dataset::validate(&ds);
    let mut stdout = std::io::stdout().lock();
    for c in &report.checks {
        let _ = writeln!(stdout, "{:6} {}", if c.passed { "ok" } else { "FAIL" }, c.name);
        for f in &c.failures {
            let _ = writeln!(stdout, "       {f}");
        }
    }
    let _ = writeln!(
        stdout,
        "{} units, {} points, {:.1}% truncated",
        ds.n(),
        ds.total_points(),
        100.0 * ds.truncated_fraction()
    );
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Validation("dataset failed validation".into()))
    }
}

fn mean_csv(mv: &MeanVarianceEstimate, w: &mut Vec<u8>) -> trunc_fpca::Result<()> {
    let _ = writeln!(w, "t,mu,sigma_tilde_sq,bandwidth");
    for i in 0..mv.grid.len() {
        let _ = writeln!(
            w,
            "{},{},{},{}",
            mv.grid[i], mv.mu_hat[i], mv.sigma_tilde_sq_hat[i], mv.local_bandwidths[i]
        );
    }
    Ok(())
}

fn cv_csv(cv: &CvTable, w: &mut Vec<u8>) -> trunc_fpca::Result<()> {
    let _ = writeln!(w, "bandwidth,cv_score");
    for (h, s) in cv.candidates.iter().zip(&cv.scores) {
        let _ = writeln!(w, "{h},{s}");
    }
    Ok(())
}

pub fn fit_mean(args: &FitMeanArgs, cfg: &RunConfig) -> Res<()> {
    let inputs = digest_inputs(&[&args.data.data])?;
    let ds = load(&args.data, cfg)?;
    validation_failures(&ds)?;
    let grid = grid_of(args.grid_size, cfg)?;
    let candidates = mean_candidates(args, cfg)?;
    let (mv, cv) = estimate_mean_variance(&ds, &grid, candidates.as_deref())?;
    let mut out = OutDir::create(&args.out)?;
    out.write_json("mean_variance.json", &mv)?;
    out.write_with("mean.csv", |w| mean_csv(&mv, w))?;
    out.write_with("cv.csv", |w| cv_csv(&cv, w))?;
    out.finish(Manifest::new(
        "fit-mean",
        json!({ "data": data_config(&args.data, cfg), "grid_size": grid.len(), "bandwidths": candidates }),
        json!({}),
        inputs,
    ))
}

fn covariance_config(args: &FitCovArgs, cfg: &RunConfig) -> Res<CovarianceConfig> {
    let mut pgd = cfg.pgd.unwrap_or_default();
    if let Some(t) = args.tolerance {
        pgd.tolerance = t;
    }
    if let Some(m) = args.max_sweeps {
        pgd.max_sweeps = m;
    }
    if let Some(s) = args.seed.or(cfg.seed) {
        pgd.seed = s;
    }
    pgd.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let bandwidth = if let Some(h) = args.cov_bandwidth.or(cfg.cov_bandwidth) {
        check_positive("covariance bandwidth", h)?;
        BandwidthChoice::Fixed(h)
    } else if let Some(m) = args.cov_multiples.clone().or_else(|| cfg.cov_multiples.clone()) {
        check_positive_list(&m)?;
        BandwidthChoice::Multiples(m)
    } else {
        BandwidthChoice::default()
    };
    Ok(CovarianceConfig { pgd, bandwidth })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Res<T> {
    let bytes = read_input(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn noise_csv(model: &CovarianceModel, w: &mut Vec<u8>) -> trunc_fpca::Result<()> {
    let _ = writeln!(w, "t,sigma_tilde_sq,signal_var,noise_var,noise_fraction");
    let frac = model.noise_fraction();
    for (i, t) in model.grid.iter().enumerate() {
        let _ = writeln!(
            w,
            "{t},{},{},{},{}",
            model.sigma_tilde[(i, i)],
            model.sigma[(i, i)],
            model.noise_var[i],
            frac[i]
        );
    }
    Ok(())
}

fn eigen_csv(model: &CovarianceModel, w: &mut Vec<u8>) -> trunc_fpca::Result<()> {
    let e = &model.eigen;
    let _ = writeln!(w, "component,eigenvalue,fve,t,phi");
    for k in 0..e.len() {
        for (t, v) in e.grid.iter().zip(&e.eigenvectors[k]) {
            let _ = writeln!(w, "{},{},{},{t},{v}", k + 1, e.eigenvalues[k], e.fve[k]);
        }
    }
    Ok(())
}

pub fn fit_cov(args: &FitCovArgs, cfg: &RunConfig) -> Res<()> {
    let mut paths: Vec<&Path> = vec![&args.fit.data.data];
    if let Some(m) = &args.mean {
        paths.push(m);
    }
    let inputs = digest_inputs(&paths)?;
    let ds = load(&args.fit.data, cfg)?;
    validation_failures(&ds)?;
    let cov_cfg = covariance_config(args, cfg)?;
    let (mv, cv) = match &args.mean {
        Some(p) => (read_json::<MeanVarianceEstimate>(p)?, None),
        None => {
            let grid = grid_of(args.fit.grid_size, cfg)?;
            let candidates = mean_candidates(&args.fit, cfg)?;
            let (mv, cv) = estimate_mean_variance(&ds, &grid, candidates.as_deref())?;
            (mv, Some(cv))
        }
    };
    let grid = mv.grid.clone();
    let model = estimate_covariance(&ds, &mv, &grid, &cov_cfg)?;
    model.check_invariants()?;
    let mut out = OutDir::create(&args.fit.out)?;
    if let Some(cv) = &cv {
        out.write_json("mean_variance.json", &mv)?;
        out.write_with("mean.csv", |w| mean_csv(&mv, w))?;
        out.write_with("cv.csv", |w| cv_csv(cv, w))?;
    }
    out.write("covariance.json", model.to_json()?.as_bytes())?;
    out.write_with("sigma.csv", |w| write_matrix_csv(&grid, &model.sigma, w))?;
    out.write_with("sigma_tilde.csv", |w| write_matrix_csv(&grid, &model.sigma_tilde, w))?;
    out.write_with("noise.csv", |w| noise_csv(&model, w))?;
    out.write_with("eigen.csv", |w| eigen_csv(&model, w))?;
    out.finish(Manifest::new(
        "fit-cov",
        json!({
            "data": data_config(&args.fit.data, cfg),
            "grid_size": grid.len(),
            "covariance": cov_cfg,
        }),
        json!({ "pgd_seed": cov_cfg.pgd.seed }),
        inputs,
    ))
}

pub fn scores(args: &ScoresArgs, cfg: &RunConfig) -> Res<()> {
    let inputs = digest_inputs(&[&args.data.data, &args.mean, &args.model])?;
    let ds = load(&args.data, cfg)?;
    validation_failures(&ds)?;
    let mv: MeanVarianceEstimate = read_json(&args.mean)?;
    let model: CovarianceModel = read_json(&args.model)?;
    let mut score_cfg: ScoreConfig = cfg.scores.unwrap_or_default();
    if let Some(m) = args.m {
        score_cfg.m = m;
    }
    check_m(score_cfg.m)?;
    if let Some(s) = args.seed.or(cfg.seed) {
        score_cfg.seed = s;
    }
    let fve = args.fve.or(cfg.fve_threshold).unwrap_or(DEFAULT_FVE_THRESHOLD);
    check_fve(fve)?;
    let k = match args.k.or(cfg.k) {
        Some(0) => return Err(CliError::Validation("K must be at least 1".into())),
        Some(k) => k,
        None => select_k_fve(&model.eigen, fve)?,
    };
    let set = predict_scores_mc(&ds, &model, &mv, k, &score_cfg)?;
    let mut out = OutDir::create(&args.out)?;
    out.write_with("scores.csv", |w| set.write_csv(w))?;
    out.finish(Manifest::new(
        "scores",
        json!({ "data": data_config(&args.data, cfg), "k": k, "fve": fve, "m": score_cfg.m, "gibbs": score_cfg.gibbs }),
        json!({ "seed": score_cfg.seed }),
        inputs,
    ))
}

pub fn gflm(args: &GflmArgs, cfg: &RunConfig) -> Res<()> {
    let inputs = digest_inputs(&[&args.scores, &args.outcomes])?;
    let set = ScoreSet::read_csv(read_input(&args.scores)?.as_slice())?;
    let link = match args.link {
        Some(LinkArg::Identity) => Link::Identity,
        Some(LinkArg::Logit) => Link::Logit,
        None => match &cfg.link {
            Some(s) => s.parse::<Link>()?,
            None => Link::Identity,
        },
    };
    let k = args.k.or(cfg.k).unwrap_or(set.k);
    if k == 0 || k > set.k {
        return Err(CliError::Validation(format!("K must be in 1..={}", set.k)));
    }
    // Reuse the dataset covariate reader keyed on unit_id.
    let mut holder = FunctionalDataset::new(
        set.unit_ids
            .iter()
            .map(|u| dataset::Trajectory {
                unit_id: u.clone(),
                points: vec![],
            })
            .collect(),
        Bounds { a: 0.0, b: 1.0 },
    );
    attach_covariates(
        &mut holder,
        read_input(&args.outcomes)?.as_slice(),
        &args.covariates,
        Some(&args.response),
    )?;
    let y = holder.outcomes.clone().unwrap_or_default();
    let covariates = holder.covariates.as_ref().filter(|c| !c.names.is_empty());
    let rows = if args.nontruncated {
        &set.scores_nontrunc
    } else {
        &set.scores
    };
    let score_set = ScoreSet {
        scores: rows.clone(),
        ..set.clone()
    };
    let fit = fit_gflm(&score_set, covariates, &y, link, k)?;
    let fitted = predict_gflm(&fit, &score_set.scores, covariates)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("gflm_fit.json", fit.to_json()?.as_bytes())?;
    let mut buf = Vec::new();
    let labels = classify(&fitted);
    let _ = writeln!(
        buf,
        "unit_id,observed,fitted{}",
        if link == Link::Logit { ",label" } else { "" }
    );
    for (i, u) in set.unit_ids.iter().enumerate() {
        let _ = write!(buf, "{u},{},{}", y[i], fitted[i]);
        if link == Link::Logit {
            let _ = write!(buf, ",{}", labels[i]);
        }
        let _ = writeln!(buf);
    }
    out.write("predictions.csv", &buf)?;
    out.finish(Manifest::new(
        "gflm",
        json!({ "link": link, "k": k, "response": args.response, "covariates": args.covariates, "nontruncated": args.nontruncated }),
        json!({}),
        inputs,
    ))
}

fn pipeline_from(cfg: &RunConfig) -> Res<PipelineConfig> {
    let mut p = PipelineConfig::default();
    if let Some(c) = &cfg.mean_bandwidths {
        p.mean_candidates = Some(c.clone());
    }
    if let Some(pgd) = cfg.pgd {
        p.covariance.pgd = pgd;
    }
    if let Some(h) = cfg.cov_bandwidth {
        p.covariance.bandwidth = BandwidthChoice::Fixed(h);
    } else if let Some(m) = &cfg.cov_multiples {
        p.covariance.bandwidth = BandwidthChoice::Multiples(m.clone());
    }
    if let Some(s) = cfg.scores {
        p.scores = s;
    }
    if let Some(f) = cfg.fve_threshold {
        p.fve_threshold = f;
    }
    p.k = cfg.k;
    Ok(p)
}

struct ReproduceSetup {
    replicates: usize,
    n: usize,
    g: usize,
    seed: u64,
    pipeline: PipelineConfig,
}

impl ReproduceSetup {
    fn experiment(&self, case_id: u8, scenario: Scenario) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            g: self.g,
            pipeline: self.pipeline.clone(),
            ..ExperimentConfig::new(case_id, scenario, self.replicates, self.seed)
        }
    }
}

pub fn reproduce(args: &ReproduceArgs, cfg: &RunConfig) -> Res<()> {
    let setup = ReproduceSetup {
        replicates: args
            .replicates
            .or(cfg.replicates)
            .unwrap_or(if args.fast { 25 } else { 100 }),
        n: args.n.or(cfg.n).unwrap_or(if args.fast { 60 } else { 100 }),
        g: cfg.g.unwrap_or(15),
        seed: args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        pipeline: pipeline_from(cfg)?,
    };
    if setup.replicates == 0 {
        return Err(CliError::Validation("replicates must be at least 1".into()));
    }
    let surfaces = matches!(args.table, TableArg::One | TableArg::Two | TableArg::All);
    let regression = matches!(args.table, TableArg::Gflm | TableArg::All);
    let mut out = OutDir::create(&args.out)?;
    let mut summaries: Vec<MetricSummary> = Vec::new();
    let mut results: Vec<ExperimentResult> = Vec::new();

    if surfaces {
        for case_id in 1..=5u8 {
            log::info!("case {case_id}: {} replicates of n = {}", setup.replicates, setup.n);
            let r = run_experiment(&setup.experiment(case_id, Scenario::Surfaces))?;
            summaries.extend(r.summary.iter().cloned());
            results.push(r);
        }
        let tables: &[(&str, [&str; 2])] = match args.table {
            TableArg::One => &[("table1", ["mean_sse", "cov_sse"])],
            TableArg::Two => &[("table2", ["noise_sse", "snr_sse"])],
            _ => &[
                ("table1", ["mean_sse", "cov_sse"]),
                ("table2", ["noise_sse", "snr_sse"]),
            ],
        };
        for (name, metrics) in tables {
            out.write(&format!("{name}.csv"), &table_csv(&results, metrics))?;
            out.write(&format!("{name}_comparison.csv"), &comparison_csv(&results, metrics))?;
        }
        figure_data(&setup, &mut out)?;
    }
    if regression {
        let mut gflm_results = Vec::new();
        for scenario in [Scenario::GflmIdentity, Scenario::GflmLogit] {
            log::info!("{scenario}: {} replicates of n = {}", setup.replicates, setup.n);
            let r = run_experiment(&setup.experiment(5, scenario))?;
            summaries.extend(r.summary.iter().cloned());
            gflm_results.push(r);
        }
        out.write("gflm.csv", &gflm_csv(&gflm_results))?;
        results.extend(gflm_results);
    }
    out.write_with("summary.csv", |w| write_summary_csv(&summaries, w))?;
    out.write("replicates.csv", &replicates_csv(&results))?;
    out.finish(Manifest::new(
        "reproduce",
        json!({
            "table": format!("{:?}", args.table).to_lowercase(),
            "fast": args.fast,
            "replicates": setup.replicates,
            "n": setup.n,
            "g": setup.g,
            "pipeline": setup.pipeline,
        }),
        json!({ "seed": setup.seed }),
        vec![],
    ))
}

fn find(results: &[ExperimentResult], case_id: u8, scenario: Scenario) -> Option<&ExperimentResult> {
    results
        .iter()
        .find(|r| r.config.case_id == case_id && r.config.scenario == scenario)
}

fn table_csv(results: &[ExperimentResult], metrics: &[&str; 2]) -> Vec<u8> {
    let mut buf = Vec::new();
    let _ = writeln!(
        buf,
        "case,method,{0},{0}_se,{1},{1}_se,replicates,failures",
        metrics[0], metrics[1]
    );
    for case_id in 1..=5u8 {
        let Some(r) = find(results, case_id, Scenario::Surfaces) else {
            continue;
        };
        for m in MethodId::ALL {
            let a = r.get(m, metrics[0]);
            let b = r.get(m, metrics[1]);
            let _ = writeln!(
                buf,
                "{case_id},{m},{},{},{},{},{},{}",
                a.map_or(f64::NAN, |s| s.mean),
                a.map_or(f64::NAN, |s| s.std_error),
                b.map_or(f64::NAN, |s| s.mean),
                b.map_or(f64::NAN, |s| s.std_error),
                a.map_or(0, |s| s.replicates),
                r.failures(m),
            );
        }
    }
    buf
}

/// Per cell: the reference value, this run's value, their ratio, and whether
/// the method's rank within the row matches.
fn comparison_csv(results: &[ExperimentResult], metrics: &[&str; 2]) -> Vec<u8> {
    let mut buf = Vec::new();
    let _ = writeln!(
        buf,
        "case,metric,method,reference,run,run_se,ratio,reference_rank,run_rank,rank_match,best_match"
    );
    for row in &SURFACES {
        let Some(r) = find(results, row.case_id, Scenario::Surfaces) else {
            continue;
        };
        for metric in metrics {
            let reference = row.metric(metric).expect("known metric");
            let run: Vec<f64> = MethodId::ALL
                .iter()
                .map(|&m| r.get(m, metric).map_or(f64::NAN, |s| s.mean))
                .collect();
            let ref_rank = ranks(&reference, false);
            let run_rank = ranks(&run, false);
            let best_match = ref_rank.iter().position(|&x| x == 0) == run_rank.iter().position(|&x| x == 0);
            for (j, m) in MethodId::ALL.iter().enumerate() {
                let se = r.get(*m, metric).map_or(f64::NAN, |s| s.std_error);
                let _ = writeln!(
                    buf,
                    "{},{metric},{m},{},{},{se},{},{},{},{},{best_match}",
                    row.case_id,
                    reference[j],
                    run[j],
                    run[j] / reference[j],
                    ref_rank[j],
                    run_rank[j],
                    ref_rank[j] == run_rank[j],
                );
            }
        }
    }
    buf
}

fn gflm_csv(results: &[ExperimentResult]) -> Vec<u8> {
    let mut buf = Vec::new();
    let _ = writeln!(
        buf,
        "scenario,method,metric,mean,std_error,reference,replicates,failures"
    );
    for r in results {
        for (j, m) in MethodId::ALL.iter().enumerate() {
            let (metrics, reference): (&[&str], f64) = match r.config.scenario {
                Scenario::GflmIdentity => (&["mse_heldout", "mse_insample"], GFLM_MSE[j]),
                _ => (&["accuracy_heldout", "accuracy_insample"], GFLM_ACCURACY[j]),
            };
            for metric in metrics {
                let s = r.get(*m, metric);
                let _ = writeln!(
                    buf,
                    "{},{m},{metric},{},{},{reference},{},{}",
                    r.config.scenario,
                    s.map_or(f64::NAN, |s| s.mean),
                    s.map_or(f64::NAN, |s| s.std_error),
                    s.map_or(0, |s| s.replicates),
                    r.failures(*m),
                );
            }
        }
    }
    buf
}

fn replicates_csv(results: &[ExperimentResult]) -> Vec<u8> {
    let mut buf = Vec::new();
    let _ = writeln!(buf, "case,scenario,replicate,seed,method,metric,value,error");
    for r in results {
        for rec in &r.records {
            if let Some(e) = &rec.error {
                let _ = writeln!(
                    buf,
                    "{},{},{},{},{},,,\"{}\"",
                    r.config.case_id,
                    r.config.scenario,
                    rec.replicate,
                    rec.seed,
                    rec.method,
                    e.replace('"', "'")
                );
            }
            for (k, v) in &rec.metrics {
                let _ = writeln!(
                    buf,
                    "{},{},{},{},{},{k},{v},",
                    r.config.case_id, r.config.scenario, rec.replicate, rec.seed, rec.method
                );
            }
        }
    }
    buf
}

/// One Case 5 sample fitted by every method: eigenfunction and mean
/// overlays and covariance surfaces on the grid.
fn figure_data(setup: &ReproduceSetup, out: &mut OutDir) -> Res<()> {
    let exp = setup.experiment(5, Scenario::Surfaces);
    let sim = SimCase {
        g: setup.g,
        ..SimCase::new(5, setup.n, exp.replicate_seed(0))
    };
    let (ds, truth) = generate_case(&sim)?;
    let grid = sim.grid();
    let mut pipeline = setup.pipeline.clone();
    pipeline.compute_scores = false;
    let fits: Vec<MethodFit> = MethodId::ALL
        .iter()
        .map(|&m| run_method(m, &ds, &grid, &pipeline))
        .collect::<trunc_fpca::Result<_>>()?;
    let phi1 = reference_phi1(&truth.structure, 5);
    let overlay = phi1_overlay(&fits, &phi1);
    out.write_with("figure_phi1.csv", |w| write_series_csv(&grid, &overlay, w))?;
    let mut means = vec![("truth".to_string(), truth.structure.mu.clone())];
    means.extend(
        fits.iter()
            .map(|f| (f.method.to_string(), f.mean_variance.mu_hat.clone())),
    );
    out.write_with("figure_mean.csv", |w| write_series_csv(&grid, &means, w))?;
    out.write_with("figure_sigma_truth.csv", |w| {
        write_matrix_csv(&grid, &truth.structure.sigma, w)
    })?;
    for f in &fits {
        out.write_with(&format!("figure_sigma_{}.csv", f.method), |w| {
            write_matrix_csv(&grid, &f.model.sigma, w)
        })?;
    }
    Ok(())
}
