//! Subset location/scatter estimation, Mahalanobis distances, and
//! concentration steps with rank-1 maintenance of the scatter inverse and
//! determinant.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::data::{DataMatrix, SubsetIndex};
use crate::error::{Error, Result};

/// Threshold below which a Sherman-Morrison denominator triggers a dense
/// refresh of the inverse and determinant.
const SM_DENOM_THRESHOLD: f64 = 1e-12;

/// Location and scatter of an h-subset. The covariance divisor is h.
/// The inverse and log-determinant are filled on demand by [`LocationScatter::factorized`]
/// and thereafter maintained incrementally.
#[derive(Debug, Clone)]
pub struct LocationScatter {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma_inv: Option<DMatrix<f64>>,
    pub log_det: Option<f64>,
    pub h: usize,
}

impl LocationScatter {
    pub fn p(&self) -> usize {
        self.mu.len()
    }

    /// Compute `sigma_inv` and `log_det` via a Cholesky factorization.
    /// No-op when both are already present.
    pub fn factorized(mut self) -> Result<Self> {
        if self.sigma_inv.is_some() && self.log_det.is_some() {
            return Ok(self);
        }
        let chol = cholesky_or_rank_error(&self.sigma)?;
        self.log_det = Some(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>());
        self.sigma_inv = Some(chol.inverse());
        Ok(self)
    }

    fn inverse(&self) -> Result<&DMatrix<f64>> {
        self.sigma_inv.as_ref().ok_or(Error::InverseUnavailable)
    }
}

fn cholesky_or_rank_error(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    match Cholesky::new(sigma.clone()) {
        Some(c) => Ok(c),
        None => {
            let eig = SymmetricEigen::new(sigma.clone());
            let max = eig
                .eigenvalues
                .iter()
                .cloned()
                .fold(0.0_f64, |a, b| a.max(b.abs()));
            let tol = max * 1e-12 + f64::MIN_POSITIVE;
            let deficient = eig.eigenvalues.iter().filter(|&&l| l <= tol).count().max(1);
            Err(Error::RankDeficient { deficient })
        }
    }
}

/// Mean and covariance over the rows indexed by `subset`, with covariance
/// divisor h. The inverse and log-determinant are left unfilled.
pub fn subset_estimate(x: &DataMatrix, subset: &SubsetIndex) -> LocationScatter {
    let h = subset.h();
    let p = x.p();
    let mut mu = DVector::zeros(p);
    for &i in subset.indices() {
        mu += x.row(i);
    }
    mu /= h as f64;
    let mut sigma = DMatrix::zeros(p, p);
    for &i in subset.indices() {
        let d = x.row(i) - &mu;
        sigma.syger(1.0 / h as f64, &d, &d, 1.0);
    }
    symmetrize(&mut sigma);
    LocationScatter {
        mu,
        sigma,
        sigma_inv: None,
        log_det: None,
        h,
    }
}

/// Squared Mahalanobis distance of `x` under `est`.
pub fn mahalanobis_sq(x: &DVector<f64>, est: &LocationScatter) -> Result<f64> {
    if x.len() != est.p() {
        return Err(Error::DimensionMismatch {
            expected: est.p(),
            got: x.len(),
        });
    }
    let inv = est.inverse()?;
    let d = x - &est.mu;
    Ok((inv * &d).dot(&d).max(0.0))
}

fn all_mahalanobis_sq(z: &DataMatrix, est: &LocationScatter) -> Result<Vec<f64>> {
    (0..z.n()).map(|i| mahalanobis_sq(&z.row(i), est)).collect()
}

/// One H-update: indices of the h smallest Mahalanobis distances under
/// `est`, ties broken by ascending row index.
pub fn c_step(z: &DataMatrix, est: &LocationScatter, h: usize) -> Result<SubsetIndex> {
    assert!(h >= 1 && h <= z.n(), "h must be in [1, n]");
    let d2 = all_mahalanobis_sq(z, est)?;
    let mut order: Vec<usize> = (0..z.n()).collect();
    order.sort_by(|&a, &b| d2[a].partial_cmp(&d2[b]).unwrap().then(a.cmp(&b)));
    order.truncate(h);
    SubsetIndex::new(order, z.n())
}

#[derive(Debug, Clone)]
pub struct ConcentrateResult {
    pub subset: SubsetIndex,
    pub estimate: LocationScatter,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterate C-steps from `h0` until the subset is unchanged between
/// iterations or `max_iter` is reached. The estimate between iterations is
/// maintained by rank-1 updates, with a dense refresh whenever the
/// incremental path degenerates.
pub fn concentrate(z: &DataMatrix, h0: &SubsetIndex, max_iter: usize) -> Result<ConcentrateResult> {
    let h = h0.h();
    let mut subset = h0.clone();
    let mut est = subset_estimate(z, &subset).factorized()?;
    for iter in 1..=max_iter.max(1) {
        let next = c_step(z, &est, h)?;
        if next == subset {
            return Ok(ConcentrateResult {
                subset,
                estimate: est,
                iterations: iter,
                converged: true,
            });
        }
        est = match transition_estimate(z, &subset, &next, est) {
            Ok(e) => e,
            // Incremental path hit a degenerate denominator or lost
            // positive definiteness; recompute from scratch.
            Err(_) => subset_estimate(z, &next).factorized()?,
        };
        subset = next;
    }
    Ok(ConcentrateResult {
        subset,
        estimate: est,
        iterations: max_iter.max(1),
        converged: false,
    })
}

/// Move an estimate from subset `from` to subset `to` (same size) through
/// rank-1 updates for the added rows and downdates for the removed rows.
fn transition_estimate(
    z: &DataMatrix,
    from: &SubsetIndex,
    to: &SubsetIndex,
    est: LocationScatter,
) -> Result<LocationScatter> {
    let added: Vec<usize> = to
        .indices()
        .iter()
        .copied()
        .filter(|&i| !from.contains(i))
        .collect();
    let removed: Vec<usize> = from
        .indices()
        .iter()
        .copied()
        .filter(|&i| !to.contains(i))
        .collect();
    let mut est = est;
    for &i in &added {
        est = rank_one_update(&est, &z.row(i))?.estimate;
    }
    for &i in &removed {
        est = rank_one_downdate(&est, &z.row(i))?.estimate;
    }
    Ok(est)
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub estimate: LocationScatter,
    /// True when the Sherman-Morrison denominator fell below threshold and
    /// the inverse was refreshed densely instead.
    pub dense_fallback: bool,
}

/// Add observation `y` to the subset behind `est` (size h -> h + 1),
/// updating mu, sigma, the inverse, and the log-determinant in O(p^2).
pub fn rank_one_update(est: &LocationScatter, y: &DVector<f64>) -> Result<UpdateOutcome> {
    if y.len() != est.p() {
        return Err(Error::DimensionMismatch {
            expected: est.p(),
            got: y.len(),
        });
    }
    let inv = est.inverse()?.clone();
    let log_det = est.log_det.ok_or(Error::InverseUnavailable)?;
    let h = est.h as f64;
    let p = est.p() as f64;

    let mu_new = (&est.mu * h + y) / (h + 1.0);
    let w = y - &mu_new;
    // sigma_{h+1} = h/(h+1) sigma_h + (1/h) w w^T
    let mut sigma_new = &est.sigma * (h / (h + 1.0));
    sigma_new.syger(1.0 / h, &w, &w, 1.0);
    symmetrize(&mut sigma_new);

    // Sherman-Morrison on A = h/(h+1) sigma_h.
    let a_inv = &inv * ((h + 1.0) / h);
    let a_inv_w = &a_inv * &w;
    let quad = a_inv_w.dot(&w);
    let denom = h + quad;
    if denom.abs() < SM_DENOM_THRESHOLD {
        let refreshed = LocationScatter {
            mu: mu_new,
            sigma: sigma_new,
            sigma_inv: None,
            log_det: None,
            h: est.h + 1,
        }
        .factorized()?;
        return Ok(UpdateOutcome {
            estimate: refreshed,
            dense_fallback: true,
        });
    }
    let mut inv_new = a_inv.clone();
    inv_new.syger(-1.0 / denom, &a_inv_w, &a_inv_w, 1.0);
    symmetrize(&mut inv_new);
    let log_det_new = p * (h / (h + 1.0)).ln() + log_det + (1.0 + quad / h).ln();

    Ok(UpdateOutcome {
        estimate: LocationScatter {
            mu: mu_new,
            sigma: sigma_new,
            sigma_inv: Some(inv_new),
            log_det: Some(log_det_new),
            h: est.h + 1,
        },
        dense_fallback: false,
    })
}

/// Remove observation `y` from the subset behind `est` (size h -> h - 1).
/// Inverse of [`rank_one_update`].
pub fn rank_one_downdate(est: &LocationScatter, y: &DVector<f64>) -> Result<UpdateOutcome> {
    if y.len() != est.p() {
        return Err(Error::DimensionMismatch {
            expected: est.p(),
            got: y.len(),
        });
    }
    if est.h < 3 {
        return Err(Error::InvalidData(
            "downdate requires at least 2 remaining observations".into(),
        ));
    }
    let inv = est.inverse()?.clone();
    let log_det = est.log_det.ok_or(Error::InverseUnavailable)?;
    let m = est.h as f64;
    let p = est.p() as f64;

    let mu_new = (&est.mu * m - y) / (m - 1.0);
    let w = y - &est.mu;
    // sigma_{m-1} = m/(m-1) [sigma_m - 1/(m-1) w w^T]
    let mut b = est.sigma.clone();
    b.syger(-1.0 / (m - 1.0), &w, &w, 1.0);
    let mut sigma_new = b;
    symmetrize(&mut sigma_new);
    sigma_new *= m / (m - 1.0);

    let inv_w = &inv * &w;
    let quad = inv_w.dot(&w);
    let denom = (m - 1.0) - quad;
    if denom.abs() < SM_DENOM_THRESHOLD {
        let refreshed = LocationScatter {
            mu: mu_new,
            sigma: sigma_new,
            sigma_inv: None,
            log_det: None,
            h: est.h - 1,
        }
        .factorized()?;
        return Ok(UpdateOutcome {
            estimate: refreshed,
            dense_fallback: true,
        });
    }
    let mut b_inv = inv.clone();
    b_inv.syger(1.0 / denom, &inv_w, &inv_w, 1.0);
    symmetrize(&mut b_inv);
    let inv_new = b_inv * ((m - 1.0) / m);
    let arg = 1.0 - quad / (m - 1.0);
    if arg <= 0.0 {
        // Downdated scatter lost positive definiteness; force dense refresh.
        let refreshed = LocationScatter {
            mu: mu_new,
            sigma: sigma_new,
            sigma_inv: None,
            log_det: None,
            h: est.h - 1,
        }
        .factorized()?;
        return Ok(UpdateOutcome {
            estimate: refreshed,
            dense_fallback: true,
        });
    }
    let log_det_new = p * (m / (m - 1.0)).ln() + log_det + arg.ln();

    Ok(UpdateOutcome {
        estimate: LocationScatter {
            mu: mu_new,
            sigma: sigma_new,
            sigma_inv: Some(inv_new),
            log_det: Some(log_det_new),
            h: est.h - 1,
        },
        dense_fallback: false,
    })
}

/// Mirror the lower triangle into the upper one. `syger` only touches the
/// lower triangle.
fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            m[(r, c)] = m[(c, r)];
        }
    }
}

/// Exact univariate MCD: the size-h window, contiguous in sorted order,
/// with minimal variance. Ties break toward the smallest window start in
/// sorted order. O(n log n) via rolling sums.
pub fn univariate_mcd_exact(x: &[f64], h: usize) -> Result<SubsetIndex> {
    let n = x.len();
    if h < 2 || h > n {
        return Err(Error::InvalidData(format!(
            "h = {} must satisfy 2 <= h <= n = {}",
            h, n
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| x[i]).collect();

    let mut sum: f64 = sorted[..h].iter().sum();
    let mut sumsq: f64 = sorted[..h].iter().map(|v| v * v).sum();
    let hf = h as f64;
    let mut best_start = 0usize;
    let mut best_var = (sumsq - sum * sum / hf) / hf;
    for start in 1..=(n - h) {
        let out = sorted[start - 1];
        let inc = sorted[start + h - 1];
        sum += inc - out;
        sumsq += inc * inc - out * out;
        let var = (sumsq - sum * sum / hf) / hf;
        if var < best_var {
            best_var = var;
            best_start = start;
        }
    }
    SubsetIndex::new(order[best_start..best_start + h].to_vec(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dm(rows: usize, cols: usize, data: &[f64]) -> DataMatrix {
        DataMatrix::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DataMatrix {
        DataMatrix::new(DMatrix::from_fn(n, p, |_, _| rng.gen_range(-2.0..2.0))).unwrap()
    }

    /// Independent two-pass mean/covariance oracle, divisor h.
    fn dense_oracle(x: &DataMatrix, idx: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
        let p = x.p();
        let h = idx.len() as f64;
        let mut mu = DVector::zeros(p);
        for &i in idx {
            mu += x.row(i);
        }
        mu /= h;
        let mut sigma = DMatrix::zeros(p, p);
        for &i in idx {
            let d = x.row(i) - &mu;
            sigma += &d * d.transpose();
        }
        sigma /= h;
        (mu, sigma)
    }

    #[test]
    fn subset_estimate_small_case() {
        let x = dm(3, 2, &[0.0, 0.0, 2.0, 0.0, 1.0, 3.0]);
        let est = subset_estimate(&x, &SubsetIndex::full(3));
        assert_relative_eq!(est.mu[0], 1.0);
        assert_relative_eq!(est.mu[1], 1.0);
        assert_relative_eq!(est.sigma[(0, 0)], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(est.sigma[(1, 1)], 2.0, epsilon = 1e-14);
        assert_relative_eq!(est.sigma[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn subset_estimate_singleton() {
        let x = dm(3, 2, &[0.0, 0.0, 2.0, 0.0, 1.0, 3.0]);
        let est = subset_estimate(&x, &SubsetIndex::new(vec![2], 3).unwrap());
        assert_eq!(est.mu, x.row(2));
        assert!(est.sigma.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subset_estimate_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(&mut rng, 20, 4);
        let mut idx: Vec<usize> = (0..20).collect();
        for _ in 0..10 {
            let j = rng.gen_range(0..idx.len());
            idx.swap_remove(j);
        }
        idx.sort_unstable();
        let est = subset_estimate(&x, &SubsetIndex::new(idx.clone(), 20).unwrap());
        let (mu, sigma) = dense_oracle(&x, &idx);
        assert_relative_eq!(est.mu, mu, epsilon = 1e-12);
        assert_relative_eq!(est.sigma, sigma, epsilon = 1e-12);
    }

    #[test]
    fn mahalanobis_euclidean_and_diagonal() {
        let est = LocationScatter {
            mu: DVector::zeros(2),
            sigma: DMatrix::identity(2, 2),
            sigma_inv: None,
            log_det: None,
            h: 2,
        }
        .factorized()
        .unwrap();
        let d2 = mahalanobis_sq(&DVector::from_vec(vec![3.0, 4.0]), &est).unwrap();
        assert_relative_eq!(d2, 25.0, epsilon = 1e-12);

        let est = LocationScatter {
            mu: DVector::zeros(2),
            sigma: DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
            sigma_inv: None,
            log_det: None,
            h: 2,
        }
        .factorized()
        .unwrap();
        let d2 = mahalanobis_sq(&DVector::from_vec(vec![2.0, 0.0]), &est).unwrap();
        assert_relative_eq!(d2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mahalanobis_matches_dense_solve_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let sigma = &a * a.transpose() + DMatrix::identity(3, 3) * 0.5;
            let mu = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let est = LocationScatter {
                mu: mu.clone(),
                sigma: sigma.clone(),
                sigma_inv: None,
                log_det: None,
                h: 10,
            }
            .factorized()
            .unwrap();
            let d = &x - &mu;
            let expected = (sigma.clone().try_inverse().unwrap() * &d).dot(&d);
            assert_relative_eq!(mahalanobis_sq(&x, &est).unwrap(), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn mahalanobis_dimension_mismatch() {
        let est = LocationScatter {
            mu: DVector::zeros(2),
            sigma: DMatrix::identity(2, 2),
            sigma_inv: None,
            log_det: None,
            h: 2,
        }
        .factorized()
        .unwrap();
        assert!(matches!(
            mahalanobis_sq(&DVector::zeros(3), &est),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn c_step_excludes_far_outlier() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows: Vec<Vec<f64>> = (0..9)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        rows.push(vec![100.0, 100.0]);
        let z = DataMatrix::from_rows(&rows).unwrap();
        let est = subset_estimate(&z, &SubsetIndex::full(10))
            .factorized()
            .unwrap();
        let h = c_step(&z, &est, 9).unwrap();
        assert!(!h.contains(9));
    }

    #[test]
    fn c_step_matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = random_matrix(&mut rng, 30, 2);
        let est = subset_estimate(&z, &SubsetIndex::full(30))
            .factorized()
            .unwrap();
        let sub = c_step(&z, &est, 15).unwrap();
        let mut d2: Vec<(f64, usize)> = (0..30)
            .map(|i| (mahalanobis_sq(&z.row(i), &est).unwrap(), i))
            .collect();
        d2.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut expect: Vec<usize> = d2[..15].iter().map(|&(_, i)| i).collect();
        expect.sort_unstable();
        assert_eq!(sub.indices(), expect.as_slice());
    }

    #[test]
    fn c_step_decreases_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let z = random_matrix(&mut rng, 25, 3);
            let h0 = SubsetIndex::new((0..12).collect(), 25).unwrap();
            let est = subset_estimate(&z, &h0).factorized().unwrap();
            let h1 = c_step(&z, &est, 12).unwrap();
            let before = est.log_det.unwrap();
            let after = subset_estimate(&z, &h1)
                .factorized()
                .unwrap()
                .log_det
                .unwrap();
            assert!(after <= before + 1e-10);
        }
    }

    #[test]
    fn c_step_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let z = random_matrix(&mut rng, 12, 2);
        let est = subset_estimate(&z, &SubsetIndex::full(12))
            .factorized()
            .unwrap();
        let sub = c_step(&z, &est, 6).unwrap();
        // Rotate rows by 5 positions.
        let perm: Vec<usize> = (0..12).map(|i| (i + 5) % 12).collect();
        let zp = z.select_rows(&perm);
        let estp = subset_estimate(&zp, &SubsetIndex::full(12))
            .factorized()
            .unwrap();
        let subp = c_step(&zp, &estp, 6).unwrap();
        let mut mapped: Vec<usize> = subp
            .indices()
            .iter()
            .map(|&i| perm[i])
            .collect();
        mapped.sort_unstable();
        assert_eq!(mapped.as_slice(), sub.indices());
    }

    #[test]
    fn concentrate_fixed_point_returns_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let z = random_matrix(&mut rng, 20, 2);
        let first = concentrate(&z, &SubsetIndex::new((0..10).collect(), 20).unwrap(), 100).unwrap();
        assert!(first.converged);
        let again = concentrate(&z, &first.subset, 100).unwrap();
        assert_eq!(again.iterations, 1);
        assert_eq!(again.subset, first.subset);
    }

    #[test]
    fn concentrate_estimate_matches_fresh_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let z = random_matrix(&mut rng, 40, 3);
        let h0 = SubsetIndex::new((0..20).collect(), 40).unwrap();
        let res = concentrate(&z, &h0, 100).unwrap();
        let fresh = subset_estimate(&z, &res.subset).factorized().unwrap();
        let ld = res.estimate.log_det.unwrap();
        let ld_fresh = fresh.log_det.unwrap();
        assert!((ld - ld_fresh).abs() <= 1e-8 * ld_fresh.abs().max(1.0));
    }

    #[test]
    fn affine_equivariance_of_subset_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = random_matrix(&mut rng, 15, 3);
        let a = DMatrix::from_fn(3, 3, |r, c| {
            if r == c {
                2.0 + rng.gen_range(0.0..1.0)
            } else {
                rng.gen_range(-0.5..0.5)
            }
        });
        let b = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let transformed = DataMatrix::new(DMatrix::from_fn(15, 3, |i, j| {
            (0..3).map(|k| a[(j, k)] * x.values()[(i, k)]).sum::<f64>() + b[j]
        }))
        .unwrap();
        let sub = SubsetIndex::new(vec![0, 2, 3, 5, 7, 9, 11, 13], 15).unwrap();
        let est = subset_estimate(&x, &sub);
        let est_t = subset_estimate(&transformed, &sub);
        let mu_expect = &a * &est.mu + &b;
        let sigma_expect = &a * &est.sigma * a.transpose();
        assert_relative_eq!(est_t.mu, mu_expect, epsilon = 1e-10, max_relative = 1e-10);
        assert_relative_eq!(
            est_t.sigma,
            sigma_expect,
            epsilon = 1e-10,
            max_relative = 1e-10
        );
    }

    #[test]
    fn update_with_mean_shrinks_scatter() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x = random_matrix(&mut rng, 12, 3);
        let est = subset_estimate(&x, &SubsetIndex::full(12))
            .factorized()
            .unwrap();
        let out = rank_one_update(&est, &est.mu.clone()).unwrap();
        assert!(!out.dense_fallback);
        let upd = out.estimate;
        assert_relative_eq!(upd.mu, est.mu, epsilon = 1e-12);
        assert_relative_eq!(
            upd.sigma,
            &est.sigma * (12.0 / 13.0),
            epsilon = 1e-12,
            max_relative = 1e-12
        );
        let expected_ld = est.log_det.unwrap() - 3.0 * (13.0_f64 / 12.0).ln();
        assert_relative_eq!(upd.log_det.unwrap(), expected_ld, epsilon = 1e-10);
    }

    #[test]
    fn scalar_update_matches_welford_variance() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let x = DataMatrix::from_rows(&xs[..4].iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let est = subset_estimate(&x, &SubsetIndex::full(4))
            .factorized()
            .unwrap();
        let upd = rank_one_update(&est, &DVector::from_vec(vec![xs[4]])).unwrap().estimate;
        let mean: f64 = xs.iter().sum::<f64>() / 5.0;
        let var: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert_relative_eq!(upd.mu[0], mean, epsilon = 1e-12);
        assert_relative_eq!(upd.sigma[(0, 0)], var, epsilon = 1e-12);
        assert_relative_eq!(upd.sigma_inv.unwrap()[(0, 0)], 1.0 / var, epsilon = 1e-10);
    }

    #[test]
    fn repeated_updates_track_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let x = random_matrix(&mut rng, 30, 10);
        let mut est = subset_estimate(&x, &SubsetIndex::full(30))
            .factorized()
            .unwrap();
        let mut rows: Vec<DVector<f64>> = Vec::new();
        for k in 0..100 {
            let y = DVector::from_fn(10, |_, _| rng.gen_range(-2.0..2.0));
            rows.push(y.clone());
            est = rank_one_update(&est, &y).unwrap().estimate;
            if k % 10 == 9 {
                // dense recomputation over original rows plus insertions
                let mut all: Vec<Vec<f64>> = (0..30)
                    .map(|i| x.row(i).iter().copied().collect())
                    .collect();
                all.extend(rows.iter().map(|r| r.iter().copied().collect::<Vec<_>>()));
                let xa = DataMatrix::from_rows(&all).unwrap();
                let dense = subset_estimate(&xa, &SubsetIndex::full(all.len()))
                    .factorized()
                    .unwrap();
                let inv_inc = est.sigma_inv.as_ref().unwrap();
                let inv_dense = dense.sigma_inv.as_ref().unwrap();
                let denom = inv_dense.norm();
                assert!((inv_inc - inv_dense).norm() <= 1e-8 * denom);
                assert!(
                    (est.log_det.unwrap() - dense.log_det.unwrap()).abs()
                        <= 1e-8 * dense.log_det.unwrap().abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn update_downdate_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for p in [1usize, 3, 5] {
            let x = random_matrix(&mut rng, 15, p);
            let est = subset_estimate(&x, &SubsetIndex::full(15))
                .factorized()
                .unwrap();
            let y = DVector::from_fn(p, |_, _| rng.gen_range(-2.0..2.0));
            let up = rank_one_update(&est, &y).unwrap().estimate;
            let back = rank_one_downdate(&up, &y).unwrap().estimate;
            assert_relative_eq!(back.mu, est.mu, epsilon = 1e-8, max_relative = 1e-8);
            assert_relative_eq!(back.sigma, est.sigma, epsilon = 1e-8, max_relative = 1e-8);
            assert!(
                (back.log_det.unwrap() - est.log_det.unwrap()).abs()
                    <= 1e-8 * est.log_det.unwrap().abs().max(1.0)
            );
        }
    }

    #[test]
    fn downdating_farthest_point_decreases_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let mut rows: Vec<Vec<f64>> = (0..11)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        rows.push(vec![50.0, -50.0]);
        let x = DataMatrix::from_rows(&rows).unwrap();
        let est = subset_estimate(&x, &SubsetIndex::full(12))
            .factorized()
            .unwrap();
        let down = rank_one_downdate(&est, &x.row(11)).unwrap().estimate;
        assert!(down.log_det.unwrap() < est.log_det.unwrap());
        // dense oracle comparison
        let dense = subset_estimate(&x, &SubsetIndex::new((0..11).collect(), 12).unwrap())
            .factorized()
            .unwrap();
        assert_relative_eq!(down.sigma, dense.sigma, epsilon = 1e-8, max_relative = 1e-8);
    }

    #[test]
    fn singular_scatter_reports_deficiency() {
        // two distinct points on a line in 2-D: rank-1 scatter
        let x = dm(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        let est = subset_estimate(&x, &SubsetIndex::full(3));
        match est.factorized() {
            Err(Error::RankDeficient { deficient }) => assert_eq!(deficient, 1),
            other => panic!("expected rank-deficient error, got {:?}", other.map(|_| ())),
        }
    }

    fn brute_force_univariate(x: &[f64], h: usize) -> f64 {
        // minimal variance over all C(n, h) subsets
        let n = x.len();
        let mut best = f64::INFINITY;
        let mut pick = vec![false; n];
        fn rec(x: &[f64], h: usize, start: usize, pick: &mut Vec<bool>, chosen: usize, best: &mut f64) {
            if chosen == h {
                let vals: Vec<f64> = x
                    .iter()
                    .zip(pick.iter())
                    .filter(|(_, &p)| p)
                    .map(|(&v, _)| v)
                    .collect();
                let m = vals.iter().sum::<f64>() / h as f64;
                let v = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / h as f64;
                if v < *best {
                    *best = v;
                }
                return;
            }
            if start >= x.len() {
                return;
            }
            pick[start] = true;
            rec(x, h, start + 1, pick, chosen + 1, best);
            pick[start] = false;
            rec(x, h, start + 1, pick, chosen, best);
        }
        rec(x, h, 0, &mut pick, 0, &mut best);
        best
    }

    #[test]
    fn univariate_mcd_simple_cases() {
        let sub = univariate_mcd_exact(&[0.0, 1.0, 2.0, 10.0], 3).unwrap();
        assert_eq!(sub.indices(), &[0, 1, 2]);
        let sub = univariate_mcd_exact(&[0.0, 0.0, 0.0, 5.0], 2).unwrap();
        assert_eq!(sub.indices(), &[0, 1]);
    }

    #[test]
    fn univariate_mcd_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..50 {
            let n = rng.gen_range(3..=9);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            for h in 2..=n {
                let sub = univariate_mcd_exact(&x, h).unwrap();
                let vals: Vec<f64> = sub.indices().iter().map(|&i| x[i]).collect();
                let m = vals.iter().sum::<f64>() / h as f64;
                let v = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / h as f64;
                let best = brute_force_univariate(&x, h);
                assert!(v <= best + 1e-12, "window var {} vs brute {}", v, best);
            }
        }
    }
}
