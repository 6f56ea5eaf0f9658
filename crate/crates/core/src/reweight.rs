//! Reweighted location/scatter estimation and the fast depth-based (FDB)
//! baseline, plus the chi-square quantiles they need.

use nalgebra::{DMatrix, DVector};

use crate::data::{BinaryMap, DataMatrix, SubsetIndex};
use crate::depth::{depth_rank_subset, sample_directions};
use crate::error::{Error, Result};
use crate::mcd::{mahalanobis_sq, subset_estimate, LocationScatter};

// Lanczos approximation, g = 7.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma P(a, x), by series for x < a + 1 and
/// continued fraction otherwise.
fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series expansion
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut f = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma(a)).exp() * f;
        1.0 - q
    }
}

/// CDF of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_cdf(x: f64, df: usize) -> f64 {
    assert!(df >= 1);
    if x <= 0.0 {
        0.0
    } else {
        gamma_p(df as f64 / 2.0, x / 2.0)
    }
}

// Acklam's rational approximation to the standard normal quantile; only
// used to seed the Newton iteration.
fn normal_quantile_approx(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile_approx(1.0 - p)
    }
}

/// Inverse CDF of the chi-square distribution, by safeguarded Newton
/// iteration on the regularized incomplete gamma. Relative accuracy
/// better than 1e-8.
pub fn chi2_quantile(prob: f64, df: usize) -> f64 {
    assert!(df >= 1);
    assert!(0.0 < prob && prob < 1.0, "prob must be in (0, 1)");
    let a = df as f64 / 2.0;
    // Wilson-Hilferty starting point
    let z = normal_quantile_approx(prob);
    let d = 2.0 / (9.0 * df as f64);
    let mut x = df as f64 * (1.0 - d + z * d.sqrt()).powi(3);
    if !(x.is_finite() && x > 0.0) {
        x = df as f64;
    }
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for _ in 0..100 {
        let f = chi2_cdf(x, df) - prob;
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        // density of chi-square at x
        let half = x / 2.0;
        let pdf = (-(half) + (a - 1.0) * half.ln() - ln_gamma(a)).exp() / 2.0;
        let mut next = if pdf > 0.0 { x - f / pdf } else { x };
        if !(next.is_finite() && next > lo && (hi.is_infinite() || next < hi)) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1.0) };
        }
        if (next - x).abs() <= 1e-12 * x.max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Result of one Rousseeuw reweighting pass.
#[derive(Debug, Clone)]
pub struct ReweightResult {
    pub weights: Vec<u8>,
    pub mu_re: DVector<f64>,
    pub sigma_re: DMatrix<f64>,
    /// Chi-square cutoff applied to the rescaled squared distances.
    pub cutoff: f64,
    /// Median-based consistency factor applied to the scatter.
    pub scale_c: f64,
}

/// Rousseeuw reweighting: rescale the scatter by the median ratio of
/// squared distances to the chi-square median, keep observations whose
/// rescaled squared distance is below the chi-square `level` quantile, and
/// re-estimate with divisor (sum of weights - 1).
pub fn reweight(x: &DataMatrix, est: &LocationScatter, level: f64) -> Result<ReweightResult> {
    let p = x.p();
    if est.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: est.p(),
        });
    }
    let n = x.n();
    let d2: Vec<f64> = (0..n)
        .map(|i| mahalanobis_sq(&x.row(i), est))
        .collect::<Result<_>>()?;
    let mut sorted = d2.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let scale_c = med / chi2_quantile(0.5, p);
    let cutoff = chi2_quantile(level, p);
    let weights: Vec<u8> = d2
        .iter()
        .map(|&v| if v / scale_c <= cutoff { 1 } else { 0 })
        .collect();
    let kept: Vec<usize> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w == 1)
        .map(|(i, _)| i)
        .collect();
    if kept.len() < 2 {
        return Err(Error::AllRejected { kept: kept.len() });
    }
    let sw = kept.len() as f64;
    let mut mu_re = DVector::zeros(p);
    for &i in &kept {
        mu_re += x.row(i);
    }
    mu_re /= sw;
    let mut sigma_re = DMatrix::zeros(p, p);
    for &i in &kept {
        let d = x.row(i) - &mu_re;
        sigma_re += &d * d.transpose();
    }
    sigma_re /= sw - 1.0;
    Ok(ReweightResult {
        weights,
        mu_re,
        sigma_re,
        cutoff,
        scale_c,
    })
}

/// Output of the fast depth-based baseline.
#[derive(Debug, Clone)]
pub struct FdbResult {
    pub labels: BinaryMap,
    pub subset: SubsetIndex,
    /// Eq.-style estimate of the depth-ranked subset (divisor h).
    pub estimate: LocationScatter,
    /// Present only when p < n and the subset scatter was invertible.
    pub reweight: Option<ReweightResult>,
}

/// Fast depth-based baseline: depth-rank to an h-subset, estimate its
/// location/scatter, then apply one reweighting pass when p < n and the
/// scatter is invertible. When reweighting is skipped the complement of
/// the depth subset is labeled outlier.
pub fn fdb(x: &DataMatrix, h: usize, k: usize, seed: u64) -> Result<FdbResult> {
    let (n, p) = (x.n(), x.p());
    assert!(h >= 1 && h <= n);
    let dirs = sample_directions(k, p, seed);
    let subset = depth_rank_subset(x, h, &dirs)?;
    let estimate = subset_estimate(x, &subset);
    if p < n {
        if let Ok(est) = estimate.clone().factorized() {
            let rw = reweight(x, &est, 0.975)?;
            let labels = BinaryMap::new(rw.weights.iter().map(|&w| 1 - w).collect())?;
            return Ok(FdbResult {
                labels,
                subset,
                estimate: est,
                reweight: Some(rw),
            });
        }
    }
    let labels = subset.complement_map(n);
    Ok(FdbResult {
        labels,
        subset,
        estimate,
        reweight: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn chi2_df2_closed_forms() {
        assert_relative_eq!(
            chi2_quantile(0.975, 2),
            -2.0 * 0.025_f64.ln(),
            epsilon = 1e-10
        );
        assert_relative_eq!(chi2_quantile(0.5, 2), 2.0 * 2.0_f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn chi2_reference_value() {
        assert_relative_eq!(chi2_quantile(0.95, 5), 11.0705, epsilon = 1e-3);
        assert_relative_eq!(chi2_cdf(chi2_quantile(0.95, 5), 5), 0.95, epsilon = 1e-8);
    }

    #[test]
    fn chi2_quantile_round_trip_and_monotone() {
        for df in [1usize, 2, 3, 5, 10, 20, 50] {
            let mut last = 0.0;
            for &p in &[0.05, 0.25, 0.5, 0.75, 0.95, 0.975, 0.99] {
                let x = chi2_quantile(p, df);
                assert!(x > last, "not increasing in prob at df = {}", df);
                last = x;
                assert_relative_eq!(chi2_cdf(x, df), p, epsilon = 1e-8);
            }
        }
        // increasing in df
        for df in 1..20 {
            assert!(chi2_quantile(0.9, df + 1) > chi2_quantile(0.9, df));
        }
    }

    fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DataMatrix {
        DataMatrix::new(DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn reweight_rejects_about_two_and_a_half_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rejected = 0usize;
        let mut total = 0usize;
        for _ in 0..200 {
            let x = gaussian_matrix(&mut rng, 250, 4);
            let est = subset_estimate(&x, &crate::data::SubsetIndex::full(250))
                .factorized()
                .unwrap();
            let rw = reweight(&x, &est, 0.975).unwrap();
            rejected += rw.weights.iter().filter(|&&w| w == 0).count();
            total += 250;
        }
        let frac = 100.0 * rejected as f64 / total as f64;
        assert!((frac - 2.5).abs() < 1.5, "rejected {:.2}%", frac);
    }

    #[test]
    fn planted_outlier_gets_zero_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        rows.push(vec![50.0, 50.0, 50.0]);
        let x = DataMatrix::from_rows(&rows).unwrap();
        let est = subset_estimate(&x, &crate::data::SubsetIndex::full(61))
            .factorized()
            .unwrap();
        let rw = reweight(&x, &est, 0.975).unwrap();
        assert_eq!(rw.weights[60], 0);
    }

    #[test]
    fn near_unit_level_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian_matrix(&mut rng, 100, 3);
        let est = subset_estimate(&x, &crate::data::SubsetIndex::full(100))
            .factorized()
            .unwrap();
        let rw = reweight(&x, &est, 1.0 - 1e-12).unwrap();
        assert!(rw.weights.iter().all(|&w| w == 1));
    }

    #[test]
    fn reweight_is_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gaussian_matrix(&mut rng, 80, 3);
        let est = subset_estimate(&x, &crate::data::SubsetIndex::full(80))
            .factorized()
            .unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, -0.1, 1.5, 0.2, 0.0, 0.4, 0.8]);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let xt = DataMatrix::new(DMatrix::from_fn(80, 3, |i, j| {
            (0..3).map(|k| a[(j, k)] * x.values()[(i, k)]).sum::<f64>() + b[j]
        }))
        .unwrap();
        let est_t = LocationScatter {
            mu: &a * &est.mu + &b,
            sigma: &a * &est.sigma * a.transpose(),
            sigma_inv: None,
            log_det: None,
            h: est.h,
        }
        .factorized()
        .unwrap();
        let w0 = reweight(&x, &est, 0.975).unwrap().weights;
        let w1 = reweight(&xt, &est_t, 0.975).unwrap().weights;
        assert_eq!(w0, w1);
    }

    #[test]
    fn fdb_reweighting_rescues_trimmed_rows_in_low_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian_matrix(&mut rng, 400, 5);
        let res = fdb(&x, 200, 1000, 9).unwrap();
        assert!(res.reweight.is_some());
        let frac_zero = res.labels.count_ones() as f64 / 400.0;
        assert!(frac_zero < 0.10, "weight-0 fraction {}", frac_zero);
    }

    #[test]
    fn fdb_skips_reweighting_when_p_exceeds_n() {
        let ds = crate::simgen::gen_highdim(40, 60, 0.1, 1, 3).unwrap();
        let res = fdb(&ds.x, 20, 600, 7).unwrap();
        assert!(res.reweight.is_none());
        assert_eq!(res.labels.count_ones(), 20);
    }
}
