//! Acceptance suite: one PASS/FAIL line per criterion. Criterion 12 needs
//! external feature sets (`PCQKIT_BASICS_TRAIN`, `PCQKIT_BASICS_VAL`) and is
//! reported without affecting the exit status.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use pcqkit::evaluation::report::metric_stats;
use pcqkit::evaluation::{correlation_stats, error_stats, evaluate, logistic, logistic_fit, pearson, spearman, ScoreTable};
use pcqkit::features::{extract_features, load_manifest, FeatureTable};
use pcqkit::metrics::graphsim::{msgraphsim_score, sim_ratio, GraphSimConfig};
use pcqkit::metrics::pcqm::{compute_pcqm, point_features, LocalStats, PairedStats, PcqmConfig};
use pcqkit::metrics::pointssim::{pointssim, relative_difference, Attribute, Estimator, PointSsimConfig};
use pcqkit::metrics::psnr::{compute_d1, compute_d2, compute_yuv, PsnrConfig};
use pcqkit::normals::DEFAULT_NORMAL_RADIUS;
use pcqkit::regression::svr::{dual_objective, kernel_matrix, kkt_violation, training_duals};
use pcqkit::regression::{group_kfold, ridge_fit, rfe_rank, svr_fit, FusionModel, RfeEstimator, SvrParams};
use pcqkit::workflow::predict_table;
use pcqkit::{Config, Point3, PointCloud, SpatialIndex};
use rand::Rng;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

fn identity_suite() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut sizes = Vec::new();
    for i in 0..10u64 {
        let n = 10f64.powf(3.0 + 2.0 * i as f64 / 9.0).round() as usize;
        sizes.push(n);
        let c = uniform_cloud(&mut rng(100 + i), n);
        let d1 = compute_d1(&c, &c, c.peak()).unwrap();
        let d2 = compute_d2(&c, &c, c.peak(), DEFAULT_NORMAL_RADIUS).unwrap();
        let yuv = compute_yuv(&c, &c, &PsnrConfig::default()).unwrap();
        let psnr_ok = [d1.psnr_db, d2.psnr_db, yuv.psnr_y.psnr_db, yuv.psnr_u.psnr_db, yuv.psnr_v.psnr_db]
            .iter()
            .all(|v| *v == f64::INFINITY)
            && yuv.psnr_combined == PsnrConfig::default().cap_db;
        let ss_cfg = PointSsimConfig::default();
        let ss_ok = pointssim(&c, &c, Attribute::Luminance, &ss_cfg).unwrap().score == 0.0
            && pointssim(&c, &c, Attribute::Geometry, &ss_cfg).unwrap().score == 0.0;
        let pcqm = compute_pcqm(&c, &c, &PcqmConfig::default()).unwrap();
        let f = pcqm.features.f;
        let pcqm_ok = f[..3].iter().all(|v| *v == 0.0) && f[3..].iter().all(|v| *v == 1.0) && pcqm.aggregate == 0.0;
        let gs = msgraphsim_score(&c, &c, &GraphSimConfig::default()).unwrap();
        let gs_ok = gs.scales.iter().all(|s| {
            [s.sim_mg, s.sim_ug, s.sim_cg, s.score].iter().all(|v| *v == 1.0)
                && s.channels.iter().flatten().all(|v| *v == 1.0)
        }) && gs.overall == 1.0;
        for (name, ok) in [("psnr", psnr_ok), ("pointssim", ss_ok), ("pcqm", pcqm_ok), ("graphsim", gs_ok)] {
            if !ok {
                failures.push(format!("{name} at n={n}"));
            }
        }
    }
    let t = start.elapsed();
    outcome(
        failures.is_empty() && within(t, 120),
        format!(
            "{} clouds, {}..{} points, {:.1}s{}",
            sizes.len(),
            sizes[0],
            sizes[9],
            t.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn nn_oracle() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut queries = 0;
    for s in 0..50u64 {
        let mut r = rng(200 + s);
        let n = r.random_range(1..=2000);
        // Integer lattices produce many exact distance ties.
        let lattice = s % 2 == 0;
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                if lattice {
                    [0; 3].map(|_| r.random_range(0..12) as f64)
                } else {
                    [0; 3].map(|_| r.random_range(-50.0..50.0))
                }
            })
            .collect();
        let index = SpatialIndex::from_points(&pts).unwrap();
        for q in 0..40 {
            let query = if q % 2 == 0 { pts[r.random_range(0..n)] } else { [0; 3].map(|_| r.random_range(-60.0..60.0)) };
            let k = if q == 0 { n + 5 } else { r.random_range(1..=30) };
            let radius = if lattice { r.random_range(0..6) as f64 } else { r.random_range(0.0..30.0) };
            let got = index.knn(&query, k);
            let (ki, kd) = brute_knn(&pts, &query, k);
            let rad = index.radius(&query, radius);
            let (ri, rd) = brute_radius(&pts, &query, radius);
            queries += 2;
            if got.indices != ki || got.distances != kd {
                mismatches += 1;
            }
            if rad.indices != ri || rad.distances != rd {
                mismatches += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        mismatches == 0 && within(t, 60),
        format!("{queries} queries on 50 clouds, {mismatches} mismatches, {:.1}s", t.as_secs_f64()),
    )
}

fn hand_values() -> Outcome {
    let single = |p: Point3| PointCloud::new(vec![p]).unwrap();
    let d1 = compute_d1(&single([0.0; 3]), &single([3.0, 4.0, 2.0]), 1023.0).unwrap().psnr_db;
    let z = vec![[0.0, 0.0, 1.0]];
    let d2 = compute_d2(
        &single([0.0; 3]).with_normals(z.clone()).unwrap(),
        &single([3.0, 4.0, 2.0]).with_normals(z).unwrap(),
        1023.0,
        DEFAULT_NORMAL_RADIUS,
    )
    .unwrap()
    .psnr_db;
    let two = vec![[0.0; 3], [10.0, 0.0, 0.0]];
    let gray = |v: u8| [v, v, v];
    let a = PointCloud::new(two.clone()).unwrap().with_colors(vec![gray(100), gray(100)]).unwrap();
    let b = PointCloud::new(two).unwrap().with_colors(vec![gray(110), gray(90)]).unwrap();
    let y = compute_yuv(&a, &b, &PsnrConfig::default()).unwrap().psnr_y.psnr_db;
    let fx = Estimator::Variance.apply(&mut [1.0, 2.0, 3.0]);
    let ssim = relative_difference(fx, 38.0 / 3.0, PointSsimConfig::default().epsilon);
    let mg = sim_ratio(2.0, 4.0, 0.001);
    let stats = LocalStats {
        curvature: PairedStats {
            mean_x: 1.0,
            mean_y: 3.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut k = PcqmConfig::default().constants;
    k[0] = 0.0;
    let f1 = point_features(&stats, &k)[0];

    let checks = [
        ("D1", d1, 10.0 * (3.0 * 1023.0f64.powi(2) / 29.0).log10(), 50.34, 1e-2),
        ("D2", d2, 10.0 * (3.0 * 1023.0f64.powi(2) / 4.0).log10(), 58.95, 1e-2),
        ("PSNR_Y", y, 10.0 * (255.0f64.powi(2) / 100.0).log10(), 28.13, 1e-2),
        ("PointSSIM", ssim, 12.0 / (38.0 / 3.0 + 1e-9), 0.947, 1e-3),
        ("SIM_mg", mg, 16.001 / 20.001, 0.800, 1e-3),
        ("PCQM f1", f1, 2.0 / 3.0, 2.0 / 3.0, 1e-3),
    ];
    let mut parts = Vec::new();
    let mut pass = fx == 2.0 / 3.0;
    for (name, got, oracle, quoted, tol) in checks {
        let ok = (got - oracle).abs() < 1e-9 && (got - quoted).abs() < tol;
        pass &= ok;
        parts.push(format!("{name}={got:.4}{}", if ok { "" } else { "!" }));
    }
    outcome(pass, parts.join(" "))
}

fn monotonicity() -> Outcome {
    let start = Instant::now();
    let sigmas = [0.5, 1.0, 2.0, 4.0];
    // Per metric: +1 when the score must rise with noise, −1 when it must fall.
    let names = ["D1", "D2", "SIM_mg s0", "PCQM", "PointSSIM lum", "PointSSIM geo"];
    let direction = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0];
    let mut good = vec![vec![0usize; sigmas.len() - 1]; names.len()];
    for seed in 0..5u64 {
        let mut r = rng(300 + seed);
        let reference = sphere_cloud(&mut r, 12_000, 300.0);
        let mut series = vec![Vec::new(); names.len()];
        for &sigma in &sigmas {
            let d = jitter(&reference, sigma, &mut r);
            let peak = reference.peak();
            let cfg = PointSsimConfig::default();
            let values = [
                compute_d1(&reference, &d, peak).unwrap().psnr_db,
                compute_d2(&reference, &d, peak, DEFAULT_NORMAL_RADIUS).unwrap().psnr_db,
                msgraphsim_score(&reference, &d, &GraphSimConfig::default()).unwrap().scales[0].sim_mg,
                compute_pcqm(&reference, &d, &PcqmConfig::default()).unwrap().aggregate,
                pointssim(&reference, &d, Attribute::Luminance, &cfg).unwrap().score,
                pointssim(&reference, &d, Attribute::Geometry, &cfg).unwrap().score,
            ];
            for (m, v) in values.iter().enumerate() {
                series[m].push(*v);
            }
        }
        for m in 0..names.len() {
            for l in 0..sigmas.len() - 1 {
                if direction[m] * (series[m][l + 1] - series[m][l]) > 0.0 {
                    good[m][l] += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    let pass = good.iter().flatten().all(|&c| c >= 4) && within(t, 300);
    let detail = names
        .iter()
        .zip(&good)
        .map(|(n, g)| format!("{n} {}", g.iter().map(|c| format!("{c}/5")).collect::<Vec<_>>().join(",")))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, format!("{detail}; {:.1}s", t.as_secs_f64()))
}

fn ridge_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for s in 0..100u64 {
        let mut r = rng(400 + s);
        let n = r.random_range(2..=50);
        let p = r.random_range(1..=23);
        let alpha = r.random_range(0.1..10.0);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random::<f64>()).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(1.0..5.0)).collect();
        let m = ridge_fit(&x, &y, alpha).unwrap();
        let (beta, b) = cg_ridge(&x, &y, alpha);
        for (c, o) in m.coefficients.iter().zip(&beta) {
            worst = worst.max((c - o).abs());
        }
        worst = worst.max((m.intercept - b).abs());
    }
    let hand = ridge_fit(&[vec![1.0], vec![2.0], vec![3.0]], &[2.0, 4.0, 6.0], 1.0).unwrap();
    let hand_ok = (hand.coefficients[0] - 4.0 / 3.0).abs() < 1e-12 && (hand.intercept - 4.0 / 3.0).abs() < 1e-12;
    outcome(
        worst < 1e-6 && hand_ok,
        format!("max |closed form - CG| = {worst:.2e} over 100 problems; hand slope {:.12}", hand.coefficients[0]),
    )
}

fn random_feasible_duals(r: &mut rand_chacha::ChaCha8Rng, n: usize, c: f64) -> Vec<f64> {
    // Random box point, pulled onto the zero-sum plane and shrunk back into the box.
    let mut b: Vec<f64> = (0..n).map(|_| r.random_range(-c..=c)).collect();
    let mean = b.iter().sum::<f64>() / n as f64;
    b.iter_mut().for_each(|v| *v -= mean);
    let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > c {
        b.iter_mut().for_each(|v| *v *= c / peak);
    }
    b
}

fn svr_kkt() -> Outcome {
    let mut worst_kkt = 0.0f64;
    let mut beaten = 0;
    for s in 0..20u64 {
        let mut r = rng(500 + s);
        let n = r.random_range(10..=40);
        let p = r.random_range(1..=5);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random::<f64>()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|row| row.iter().sum::<f64>().sin() + r.random_range(-0.2..0.2)).collect();
        let params = SvrParams::default();
        let m = svr_fit(&x, &y, &params).unwrap();
        worst_kkt = worst_kkt.max(kkt_violation(&m, &x, &y));
        let kernel = kernel_matrix(&x, m.gamma);
        let trained = dual_objective(&kernel, &y, &training_duals(&m, &x), m.epsilon);
        for _ in 0..10_000 {
            let b = random_feasible_duals(&mut r, n, params.c);
            if dual_objective(&kernel, &y, &b, m.epsilon) > trained + 1e-9 {
                beaten += 1;
            }
        }
    }
    outcome(
        worst_kkt <= 1e-3 && beaten == 0,
        format!("max KKT violation {worst_kkt:.2e}; random duals beating the solver: {beaten} of 200000"),
    )
}

fn rfe_recovery() -> Outcome {
    let names: Vec<String> = (1..=8).map(|i| format!("x{i}")).collect();
    let truth: BTreeSet<&str> = ["x1", "x4"].into();
    let (mut ridge_hits, mut svr_hits) = (0, 0);
    for s in 0..20u64 {
        let mut r = rng(600 + s);
        let noise = rand_distr::Normal::new(0.0, 0.01).unwrap();
        let x: Vec<Vec<f64>> = (0..100).map(|_| (0..8).map(|_| r.random::<f64>()).collect()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|row| 3.0 * row[0] - 2.0 * row[3] + rand_distr::Distribution::sample(&noise, &mut r))
            .collect();
        let top2 = |est: &RfeEstimator| -> bool {
            let ranking = rfe_rank(&x, &y, &names, est, 1, s).unwrap().ranking;
            ranking[..2].iter().map(String::as_str).collect::<BTreeSet<_>>() == truth
        };
        ridge_hits += top2(&RfeEstimator::Ridge { alpha: 1.0 }) as usize;
        svr_hits += top2(&RfeEstimator::Svr {
            params: SvrParams::default(),
            permutations: 10,
        }) as usize;
    }
    outcome(
        ridge_hits >= 19 && svr_hits >= 16,
        format!("top-2 recovered: ridge {ridge_hits}/20, SVR permutation {svr_hits}/20"),
    )
}

fn statistics() -> Outcome {
    let (p, s) = correlation_stats(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
    let e = error_stats(&[0.0, 0.0], &[1.0, -1.0], None, 2.0);
    let or = error_stats(&[0.0; 3], &[0.1, 0.1, 5.0], Some(&[1.0; 3]), 2.0).outlier_ratio;
    let hand_ok = (p - 0.5).abs() < 1e-12
        && (s - 0.5).abs() < 1e-12
        && (e.rmse - 1.0).abs() < 1e-12
        && (or - 1.0 / 3.0).abs() < 1e-12
        && error_stats(&[2.0, 3.0], &[2.0, 3.0], None, 2.0).rmse == 0.0;

    let truth = [1.0, 5.0, 2.0, 0.5];
    let mut r = rng(700);
    let x: Vec<f64> = (0..200).map(|_| r.random_range(-2.0..3.0)).collect();
    let y: Vec<f64> = x.iter().map(|&v| logistic(&truth, v)).collect();
    let fit = logistic_fit(&x, &y).unwrap();
    let beta_err = (0..4).map(|k| (fit.beta[k] - truth[k]).abs()).fold(0.0, f64::max);

    let pred: Vec<f64> = (0..80).map(|_| r.random_range(0.0..10.0)).collect();
    let mos: Vec<f64> = pred.iter().map(|v| v * 0.4 + r.random_range(-1.5..1.5)).collect();
    let base = spearman(&pred, &mos).unwrap();
    let mut invariant = 0;
    for t in 0..10 {
        let (a, b) = (r.random_range(0.1..3.0), r.random_range(-5.0..5.0));
        let transformed: Vec<f64> = pred
            .iter()
            .map(|&v| match t % 5 {
                0 => a * v + b,
                1 => (a * v / 10.0).exp() + b,
                2 => v.powi(3) * a + b,
                3 => (v + 1.0).ln() * a,
                _ => a * v + (v / 2.0).tanh() + b,
            })
            .collect();
        invariant += (spearman(&transformed, &mos).unwrap() == base) as usize;
    }
    let affine = pearson(&pred.iter().map(|v| 2.5 * v + 1.0).collect::<Vec<_>>(), &mos).unwrap();
    let pcc_ok = (affine - pearson(&pred, &mos).unwrap()).abs() < 1e-12;
    outcome(
        hand_ok && beta_err < 1e-3 && fit.rmse < 1e-6 && invariant == 10 && pcc_ok,
        format!(
            "hand pcc {p:.12} srocc {s:.12} rmse {:.1} or {or:.4}; logistic max |beta err| {beta_err:.1e}; SROCC invariant {invariant}/10",
            e.rmse
        ),
    )
}

fn split_hygiene() -> Outcome {
    let mut leaks = 0;
    let mut coverage_errors = 0;
    let mut r = rng(800);
    for draw in 0..1000u64 {
        let groups = r.random_range(2..=40);
        let rows: Vec<String> = (0..r.random_range(groups..=groups * 6))
            .map(|i| format!("g{}", if i < groups { i } else { r.random_range(0..groups) }))
            .collect();
        let folds = r.random_range(2..=groups.min(12));
        let splits = group_kfold(&rows, folds, draw).unwrap();
        let mut tested = vec![0usize; rows.len()];
        for (train, test) in &splits {
            let tg: BTreeSet<&str> = test.iter().map(|&i| rows[i].as_str()).collect();
            leaks += train.iter().filter(|&&i| tg.contains(rows[i].as_str())).count();
            test.iter().for_each(|&i| tested[i] += 1);
            coverage_errors += (train.len() + test.len() != rows.len()) as usize;
        }
        coverage_errors += tested.iter().filter(|&&c| c != 1).count();
    }
    outcome(
        leaks == 0 && coverage_errors == 0,
        format!("1000 draws: {leaks} leaked rows, {coverage_errors} coverage errors"),
    )
}

/// extract → train fsm → predict → evaluate in a fresh directory; returns the artifacts.
fn pipeline_run(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let manifest_path = write_corpus(dir, 5, 4, 1500, 42);
    let config = Config::default();
    let manifest = load_manifest(&manifest_path).unwrap();
    let (table, _) = extract_features(&manifest, &config, Some(&dir.join("cache"))).unwrap();
    table.save(dir.join("features.csv")).unwrap();
    let table = FeatureTable::load(dir.join("features.csv")).unwrap();
    let model = FusionModel::fit_named("fsm", &table, &config).unwrap();
    model.save(dir.join("model.json")).unwrap();
    let model = FusionModel::load(dir.join("model.json")).unwrap();
    let scores = predict_table(&model, &table, &config, false).unwrap();
    let mut buf = Vec::new();
    scores.write_csv("pcqkit-scores", &mut buf).unwrap();
    std::fs::write(dir.join("scores.csv"), &buf).unwrap();
    let scores = ScoreTable::load(dir.join("scores.csv")).unwrap();
    let mut report = evaluate(&scores, &manifest, None, &config.evaluation).unwrap();
    report.config_hash = config.hash();
    report.save(dir.join("report.json")).unwrap();
    ["features.csv", "model.json", "scores.csv", "report.json"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline_run(a.path());
    let second = pipeline_run(b.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let rows = String::from_utf8_lossy(&first[0].1).lines().count().saturating_sub(2);
    outcome(
        differing.is_empty() && rows == 20,
        format!(
            "{rows} pairs; {}",
            if differing.is_empty() { "features, model, scores and report bit-identical".to_string() } else { format!("differing: {}", differing.join(", ")) }
        ),
    )
}

fn fusion_sanity() -> Outcome {
    let drivers = ["pcqm_f2", "msgsim_mg_s0", "psnr_d2"];
    let config = Config::default();
    let mut failures = Vec::new();
    let mut fused_pccs = Vec::new();
    for seed in 0..10u64 {
        let table = driven_feature_table(900 + seed, 30, 8, &drivers, 0.15);
        let (train, test) = group_kfold(&table.groups(), 5, seed).unwrap().swap_remove(0);
        let held_out = table.subset(&test);
        let model = FusionModel::fit_named("fsm", &table.subset(&train), &config).unwrap();
        let mos = held_out.mos();
        let fused = metric_stats(&model.predict(&held_out, config.psnr.cap_db).unwrap(), &mos, None, 2.0)
            .unwrap()
            .pcc;
        fused_pccs.push(fused);
        let best_single = held_out
            .names
            .iter()
            .map(|n| metric_stats(&held_out.column(n).unwrap(), &mos, None, 2.0).unwrap().pcc)
            .fold(f64::NEG_INFINITY, f64::max);
        if fused < 0.9 || best_single > fused + 0.02 {
            failures.push(format!("seed {seed}: fused {fused:.3}, best single {best_single:.3}"));
        }
    }
    let min = fused_pccs.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        failures.is_empty(),
        format!(
            "min held-out fused PCC {min:.3} over 10 seeds{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

/// Reported only: returns `None` when the external data is absent.
fn basics_check() -> Option<Outcome> {
    let train = std::env::var_os("PCQKIT_BASICS_TRAIN")?;
    let val = std::env::var_os("PCQKIT_BASICS_VAL")?;
    let config = Config::default();
    let train = FeatureTable::load(&train).ok()?;
    let val = FeatureTable::load(&val).ok()?;
    let model = FusionModel::fit_named("model5", &train, &config).ok()?;
    let mos = val.mos();
    let (lo, hi) = mos.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mos_n: Vec<f64> = mos.iter().map(|m| (m - lo) / (hi - lo)).collect();
    let s = metric_stats(&model.predict(&val, config.psnr.cap_db).ok()?, &mos_n, None, 2.0).ok()?;
    let ok = (s.pcc - 0.944).abs() <= 0.03 && (s.srocc - 0.854).abs() <= 0.04;
    Some(outcome(
        ok,
        format!("validation PCC {:.3} (target 0.944 ± 0.03), SROCC {:.3} (target 0.854 ± 0.04)", s.pcc, s.srocc),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("identity suite", identity_suite),
        ("nearest-neighbor oracle", nn_oracle),
        ("hand values", hand_values),
        ("monotonicity under geometry noise", monotonicity),
        ("ridge oracle", ridge_oracle),
        ("SVR KKT and dual optimality", svr_kkt),
        ("RFE recovery", rfe_recovery),
        ("statistics", statistics),
        ("split hygiene", split_hygiene),
        ("end-to-end determinism", determinism),
        ("fusion sanity", fusion_sanity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    match basics_check() {
        Some(r) => println!(
            "{} 12 BASICS model5 (reported only): {}",
            if r.pass { "PASS" } else { "MISS" },
            r.detail
        ),
        None => println!("SKIP 12 BASICS model5 (reported only): set PCQKIT_BASICS_TRAIN and PCQKIT_BASICS_VAL to feature CSVs"),
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
