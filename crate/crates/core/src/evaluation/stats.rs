use crate::error::{Error, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::DegenerateInput("correlation needs two equal-length samples".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 {
        return Err(Error::ZeroVariance("predictions"));
    }
    if sbb <= 0.0 {
        return Err(Error::ZeroVariance("MOS"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given their average rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson(&ranks(a), &ranks(b))
}

/// `(PCC, SROCC)` of predictions against MOS.
pub fn correlation_stats(pred: &[f64], mos: &[f64]) -> Result<(f64, f64)> {
    if pred.len() < 3 {
        return Err(Error::DegenerateInput(format!("need at least 3 samples, got {}", pred.len())));
    }
    Ok((pearson(pred, mos)?, spearman(pred, mos)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub rmse: f64,
    pub outlier_ratio: f64,
    /// No per-stimulus deviation was available; the threshold used RMSE instead.
    pub fallback: bool,
}

/// RMSE and outlier ratio. A residual is an outlier when it exceeds
/// `multiplier · mos_std[i]`, or `multiplier · rmse` without deviations.
pub fn error_stats(fitted: &[f64], mos: &[f64], mos_std: Option<&[f64]>, multiplier: f64) -> ErrorStats {
    let residuals: Vec<f64> = fitted.iter().zip(mos).map(|(f, m)| m - f).collect();
    let n = residuals.len().max(1) as f64;
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let outliers = match mos_std {
        Some(std) => residuals.iter().zip(std).filter(|(r, s)| r.abs() > multiplier * **s).count(),
        None => residuals.iter().filter(|r| r.abs() > multiplier * rmse).count(),
    };
    ErrorStats {
        rmse,
        outlier_ratio: outliers as f64 / n,
        fallback: mos_std.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_correlations() {
        let (p, s) = correlation_stats(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((s - 0.5).abs() < 1e-12);
        let x = [1.0, 2.0, 3.0, 4.0];
        let (p, s) = correlation_stats(&x, &x).unwrap();
        assert!((p - 1.0).abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
        let cubed: Vec<f64> = x.iter().map(|v: &f64| v.powi(3)).collect();
        let (p, s) = correlation_stats(&cubed, &x).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(p < 1.0 - 1e-3);
    }

    #[test]
    fn zero_variance() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn tied_ranks_average() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn hand_errors() {
        let e = error_stats(&[0.0, 0.0], &[1.0, -1.0], None, 2.0);
        assert_eq!(e.rmse, 1.0);
        assert!(e.fallback);
        let e = error_stats(&[0.0; 3], &[0.1, 0.1, 5.0], Some(&[1.0; 3]), 2.0);
        assert!((e.outlier_ratio - 1.0 / 3.0).abs() < 1e-15);
        assert!(!e.fallback);
        let e = error_stats(&[1.0, 2.0], &[1.0, 2.0], Some(&[0.5, 0.5]), 2.0);
        assert_eq!((e.rmse, e.outlier_ratio), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn pcc_affine_invariant(v in proptest::collection::vec(-10.0f64..10.0, 4..40), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let mos: Vec<f64> = v.iter().enumerate().map(|(i, x)| x.sin() + i as f64 * 0.1).collect();
            if let (Ok(p1), Ok(p2)) = (pearson(&v, &mos), pearson(&v.iter().map(|x| a * x + b).collect::<Vec<_>>(), &mos)) {
                prop_assert!((p1 - p2).abs() < 1e-9);
            }
        }

        #[test]
        fn or_non_increasing_in_multiplier(res in proptest::collection::vec(-3.0f64..3.0, 1..30)) {
            let zeros = vec![0.0; res.len()];
            let mut last = 1.0;
            for k in [0.5, 1.0, 2.0, 3.0] {
                let e = error_stats(&zeros, &res, None, k);
                prop_assert!(e.outlier_ratio <= last);
                last = e.outlier_ratio;
            }
        }
    }
}
