//! Small statistical helpers shared by the estimators, the harness and the
//! test suites.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(statistic)
}

/// Goodness of fit of `counts[k]` (observations equal to `k`, for the listed
/// categories) against `probs[k]`, with everything else lumped into one
/// remainder cell. `total` is the full sample size.
pub fn chi_square_gof(counts: &[u64], probs: &[f64], total: u64) -> ChiSquare {
    assert_eq!(counts.len(), probs.len());
    let n = total as f64;
    let mut stat = 0.0;
    let mut rest_count = total;
    let mut rest_prob = 1.0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = n * p;
        stat += (c as f64 - e).powi(2) / e;
        rest_count -= c;
        rest_prob -= p;
    }
    let mut dof = counts.len();
    let e = n * rest_prob;
    if e > 1e-9 {
        stat += (rest_count as f64 - e).powi(2) / e;
    } else {
        dof -= 1;
    }
    ChiSquare {
        statistic: stat,
        dof,
        p_value: chi_square_p(stat, dof.max(1)),
    }
}

/// χ² goodness of fit for a dependent stationary sequence.
///
/// The sequence is cut into `batches` contiguous blocks and the block
/// frequencies of `categories` give the long-run covariance, so the
/// statistic is Hotelling's `T² = b d̄ᵀ S⁻¹ d̄` with `d` the block frequency
/// minus `probs`. Under approximately normal block means
/// `(b − k)/(k(b − 1)) T²` is `F(k, b − k)`; the p-value comes from there and
/// `statistic` holds `T²`. For iid data this reduces to the usual test.
pub fn chi_square_batch_means(values: &[u64], categories: &[u64], probs: &[f64], batches: usize) -> ChiSquare {
    assert_eq!(categories.len(), probs.len());
    let k = categories.len();
    assert!(batches > k + 1, "need more batches than categories");
    let len = values.len() / batches;
    assert!(len > 0, "fewer values than batches");
    let b = batches as f64;
    let freqs: Vec<DVector<f64>> = values
        .chunks_exact(len)
        .take(batches)
        .map(|block| {
            let mut f = DVector::zeros(k);
            for v in block {
                if let Some(j) = categories.iter().position(|c| c == v) {
                    f[j] += 1.0;
                }
            }
            f / len as f64 - DVector::from_column_slice(probs)
        })
        .collect();
    let mean = freqs.iter().sum::<DVector<f64>>() / b;
    let mut cov = DMatrix::zeros(k, k);
    for f in &freqs {
        let d = f - &mean;
        cov += &d * d.transpose();
    }
    cov /= b - 1.0;
    let t2 = match cov.cholesky() {
        Some(ch) => b * mean.dot(&ch.solve(&mean)),
        None => f64::INFINITY,
    };
    let f_stat = (b - k as f64) / (k as f64 * (b - 1.0)) * t2;
    let p_value = if f_stat.is_finite() {
        FisherSnedecor::new(k as f64, b - k as f64)
            .expect("positive degrees of freedom")
            .sf(f_stat)
    } else {
        0.0
    };
    ChiSquare {
        statistic: t2,
        dof: k,
        p_value,
    }
}

/// Two-sample χ² homogeneity test on aligned category counts.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (na, nb) = (na as f64, nb as f64);
    let mut stat = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
        cells += 1;
    }
    let dof = cells.max(2) - 1;
    ChiSquare {
        statistic: stat,
        dof,
        p_value: chi_square_p(stat, dof),
    }
}

/// Empirical quantile of an ascending slice (lower interpolation point).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = (q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[pos]
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope · x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let f = linear_fit(&xs, &ys);
        assert!((f.slope + 2.0).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let c = chi_square_gof(&[500, 250], &[0.5, 0.25], 1000);
        assert!(c.statistic.abs() < 1e-12);
        assert!(c.p_value > 0.999);
        assert_eq!(c.dof, 2);
    }

    #[test]
    fn batch_means_on_iid_data_is_calibrated() {
        use crate::rng::seed_stream;
        use rand::Rng;
        // p-values of a correct test are uniform; count rejections at 5%
        let mut rejections = 0;
        for rep in 0..200 {
            let mut rng = seed_stream(17, rep);
            let values: Vec<u64> = (0..20_000).map(|_| rng.random_range(0..4)).collect();
            let c = chi_square_batch_means(&values, &[0, 1, 2], &[0.25, 0.25, 0.25], 100);
            if c.p_value < 0.05 {
                rejections += 1;
            }
        }
        assert!((3..=20).contains(&rejections), "{rejections} rejections of 200");
        let mut rng = seed_stream(18, 0);
        let biased: Vec<u64> = (0..20_000).map(|_| rng.random_range(0..4).min(2)).collect();
        let c = chi_square_batch_means(&biased, &[0, 1, 2], &[0.25, 0.25, 0.25], 100);
        assert!(c.p_value < 1e-6);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&a, &[10.0, 11.0]), 1.0);
    }
}
