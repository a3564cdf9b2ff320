//! Synthetic data and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pcqkit::features::{feature_names, FeatureRow, FeatureTable};
use pcqkit::{save_ply, Point3, PointCloud, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_colors(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rgb> {
    (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}

/// `n` uniform points in a cube whose side keeps the mean spacing near 4.
pub fn uniform_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let side = 4.0 * (n as f64).cbrt();
    let pts: Vec<Point3> = (0..n)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();
    let colors = random_colors(rng, n);
    PointCloud::new(pts).unwrap().with_colors(colors).unwrap()
}

/// Smoothly varying color with a little per-point texture.
pub fn surface_color(p: &Point3, texture: f64) -> Rgb {
    let c = |v: f64| v.clamp(0.0, 255.0).round() as u8;
    [
        c(128.0 + 90.0 * (p[0] / 40.0).sin() + texture),
        c(128.0 + 90.0 * (p[1] / 55.0).cos() - texture),
        c(128.0 + 60.0 * ((p[0] + p[2]) / 70.0).sin() + 0.5 * texture),
    ]
}

/// Points on a sphere inside the 10-bit voxel grid.
pub fn sphere_cloud(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> PointCloud {
    let center = [512.0, 512.0, 512.0];
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let mut pts = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    while pts.len() < n {
        let v: [f64; 3] = [gauss.sample(rng), gauss.sample(rng), gauss.sample(rng)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm < 1e-9 {
            continue;
        }
        let p = [0, 1, 2].map(|k| center[k] + radius * v[k] / norm);
        colors.push(surface_color(&p, rng.random_range(-12.0..12.0)));
        pts.push(p);
    }
    PointCloud::new(pts).unwrap().with_colors(colors).unwrap().with_bit_depth(10).unwrap()
}

/// Copy of `cloud` with isotropic Gaussian position noise; colors travel with their points.
pub fn jitter(cloud: &PointCloud, sigma: f64, rng: &mut ChaCha8Rng) -> PointCloud {
    let noise = Normal::new(0.0, sigma).unwrap();
    let pts: Vec<Point3> = cloud
        .positions()
        .iter()
        .map(|p| [p[0] + noise.sample(rng), p[1] + noise.sample(rng), p[2] + noise.sample(rng)])
        .collect();
    PointCloud::new(pts)
        .unwrap()
        .with_colors(cloud.colors().unwrap().to_vec())
        .unwrap()
        .with_bit_depth(cloud.bit_depth())
        .unwrap()
}

/// Copy of `cloud` with uniform color noise of amplitude `amp`.
pub fn recolor(cloud: &PointCloud, amp: f64, rng: &mut ChaCha8Rng) -> PointCloud {
    let colors: Vec<Rgb> = cloud
        .colors()
        .unwrap()
        .iter()
        .map(|c| c.map(|v| (v as f64 + rng.random_range(-amp..=amp)).clamp(0.0, 255.0).round() as u8))
        .collect();
    cloud.clone().with_colors(colors).unwrap()
}

fn sq_dist(a: &Point3, b: &Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Exhaustive scan sorted by (distance, index).
pub fn brute_sorted(points: &[Point3], q: &Point3) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (sq_dist(p, q), i)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all
}

pub fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> (Vec<usize>, Vec<f64>) {
    brute_sorted(points, q).into_iter().take(k).map(|(d2, i)| (i, d2.sqrt())).unzip()
}

pub fn brute_radius(points: &[Point3], q: &Point3, r: f64) -> (Vec<usize>, Vec<f64>) {
    brute_sorted(points, q)
        .into_iter()
        .filter(|(d2, _)| *d2 <= r * r)
        .map(|(d2, i)| (i, d2.sqrt()))
        .unzip()
}

/// Ridge solution by conjugate gradients on the centered normal equations,
/// iterated until the residual stalls.
pub fn cg_ridge(x: &[Vec<f64>], y: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let (n, p) = (x.len(), x[0].len());
    let mx: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let my = y.iter().sum::<f64>() / n as f64;
    let xc: Vec<Vec<f64>> = x.iter().map(|r| (0..p).map(|j| r[j] - mx[j]).collect()).collect();
    let apply = |v: &[f64]| -> Vec<f64> {
        let xv: Vec<f64> = xc.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect();
        (0..p)
            .map(|j| xc.iter().zip(&xv).map(|(r, s)| r[j] * s).sum::<f64>() + alpha * v[j])
            .collect()
    };
    let b: Vec<f64> = (0..p)
        .map(|j| xc.iter().zip(y).map(|(r, t)| r[j] * (t - my)).sum())
        .collect();
    let mut beta = vec![0.0; p];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..50 * p {
        if rr.sqrt() < 1e-14 {
            break;
        }
        let ad = apply(&d);
        let step = rr / d.iter().zip(&ad).map(|(a, b)| a * b).sum::<f64>();
        for j in 0..p {
            beta[j] += step * d[j];
            r[j] -= step * ad[j];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        for j in 0..p {
            d[j] = r[j] + rr_new / rr * d[j];
        }
        rr = rr_new;
    }
    let intercept = my - beta.iter().zip(&mx).map(|(b, m)| b * m).sum::<f64>();
    (beta, intercept)
}

/// Feature table whose MOS is a noisy logistic function of an equal mix of `drivers`.
pub fn driven_feature_table(seed: u64, groups: usize, per_group: usize, drivers: &[&str], noise: f64) -> FeatureTable {
    let mut rng = rng(seed);
    let names = feature_names();
    let cols: Vec<usize> = drivers.iter().map(|d| names.iter().position(|n| n == d).unwrap()).collect();
    let mut t = FeatureTable::new(names);
    let gauss = Normal::new(0.0, noise).unwrap();
    for g in 0..groups {
        for d in 0..per_group {
            let values: Vec<f64> = (0..23).map(|_| rng.random::<f64>()).collect();
            let mix = cols.iter().map(|&c| values[c]).sum::<f64>() / cols.len() as f64;
            let mos = 1.0 + 4.0 / (1.0 + (-6.0 * (mix - 0.5)).exp()) + gauss.sample(&mut rng);
            t.rows.push(FeatureRow {
                group_id: format!("g{g:02}"),
                ref_name: format!("ref{g:02}.ply"),
                dist_name: format!("ref{g:02}_d{d:02}.ply"),
                mos,
                values,
            });
        }
    }
    t
}

/// Writes `refs` reference spheres with `dists` distortions each plus a
/// manifest; returns the manifest path. MOS falls with distortion strength.
pub fn write_corpus(dir: &Path, refs: usize, dists: usize, points: usize, seed: u64) -> PathBuf {
    let mut rng = rng(seed);
    let mut manifest = String::from("group_id,ref,dist,mos,mos_std\n");
    for r in 0..refs {
        let reference = sphere_cloud(&mut rng, points, 150.0 + 20.0 * r as f64);
        let ref_name = format!("ref{r}.ply");
        save_ply(&reference, dir.join(&ref_name), true).unwrap();
        for d in 0..dists {
            let sigma = 0.5 * (d + 1) as f64;
            let amp = 6.0 * d as f64;
            let distorted = recolor(&jitter(&reference, sigma, &mut rng), amp, &mut rng);
            let dist_name = format!("ref{r}_d{d}.ply");
            save_ply(&distorted, dir.join(&dist_name), true).unwrap();
            let mos = 5.0 - 0.6 * sigma - 0.03 * amp + rng.random_range(-0.1..0.1);
            writeln!(manifest, "g{r},{ref_name},{dist_name},{mos:.4},0.3").unwrap();
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}
