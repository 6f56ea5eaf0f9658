//! Seeded generators for the simulation protocols: high-dimensional
//! eigen-direction contamination, the overdetermined four-kind protocol,
//! and the masking settings.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{BinaryMap, DataMatrix};
use crate::error::{Error, Result};

/// Which generator produced a dataset, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    HighDim { eps: f64, l: usize },
    Overdetermined { eps: f64, kind: OutlierKind, r: f64 },
    Masking { id: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierKind {
    Point,
    Cluster,
    Random,
    Radial,
}

impl std::str::FromStr for OutlierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(Self::Point),
            "cluster" => Ok(Self::Cluster),
            "random" => Ok(Self::Random),
            "radial" => Ok(Self::Radial),
            other => Err(Error::InvalidData(format!(
                "unknown outlier kind '{}' (expected point, cluster, random, or radial)",
                other
            ))),
        }
    }
}

/// A generated dataset with its planted truth and population parameters.
#[derive(Debug, Clone)]
pub struct SimDataset {
    pub x: DataMatrix,
    pub truth: BinaryMap,
    pub mu_true: DVector<f64>,
    /// None when the population scatter is only defined up to the protocol
    /// tag (overdetermined y-space).
    pub sigma_true: Option<DMatrix<f64>>,
    pub protocol: Protocol,
    pub seed: u64,
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Random SPD matrix with a Haar-ish orthogonal eigenbasis (QR of a
/// Gaussian matrix, R-diagonal signs fixed) and eigenvalues affinely
/// mapped onto [1, target_cn], so cond equals target_cn up to roundoff.
/// Returns the matrix together with its eigenvalues and eigenvectors
/// (ascending eigenvalue order).
pub fn gen_covariance_cn_full(
    p: usize,
    target_cn: f64,
    seed: u64,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    assert!(p >= 2);
    assert!(target_cn > 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j).clone_owned();
            q.set_column(j, &col);
        }
    }
    // raw spectrum, then affine map onto [1, target_cn]; the high power
    // concentrates most eigenvalues near the bottom of the range with a
    // thin top edge, the typical shape of large empirical correlation
    // spectra
    let mut raw: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0f64).powi(16)).collect();
    raw.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (lo, hi) = (raw[0], raw[p - 1]);
    let span = (hi - lo).max(1e-12);
    let eig = DVector::from_fn(p, |i, _| 1.0 + (raw[i] - lo) / span * (target_cn - 1.0));
    let mut sigma = DMatrix::zeros(p, p);
    for j in 0..p {
        let v = q.column(j);
        sigma += eig[j] * &v * v.transpose();
    }
    // exact symmetry
    for i in 0..p {
        for j in 0..i {
            let m = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
            sigma[(i, j)] = m;
            sigma[(j, i)] = m;
        }
    }
    (sigma, eig, q)
}

/// Convenience wrapper returning only the SPD matrix.
pub fn gen_covariance_cn(p: usize, target_cn: f64, seed: u64) -> DMatrix<f64> {
    gen_covariance_cn_full(p, target_cn, seed).0
}

/// High-dimensional protocol: inliers N(0, Σ) with cond(Σ) = 50, and
/// ⌊εn⌋ outliers N(50a, Σ) where a is redrawn per outlier row uniformly
/// from the l eigenvectors of the smallest eigenvalues. Inlier rows come
/// first, then outliers.
pub fn gen_highdim(n: usize, p: usize, eps: f64, l: usize, seed: u64) -> Result<SimDataset> {
    gen_highdim_scaled(n, p, eps, l, 50.0, seed)
}

fn gen_highdim_scaled(
    n: usize,
    p: usize,
    eps: f64,
    l: usize,
    shift: f64,
    seed: u64,
) -> Result<SimDataset> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidData(format!("eps = {} must be in [0, 1)", eps)));
    }
    if l > p || (eps > 0.0 && l == 0) {
        return Err(Error::InvalidData(format!("l = {} must be in [1, p = {}]", l, p)));
    }
    let n_out = (eps * n as f64).floor() as usize;
    let (sigma, eig, q) = gen_covariance_cn_full(p, 50.0, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e3779b97f4a7c15));
    let sqrt_eig: Vec<f64> = eig.iter().map(|&e| e.sqrt()).collect();
    let mut x = DMatrix::zeros(n, p);
    let sample_sigma_row = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        let z = standard_normal_vec(rng, p);
        let scaled = DVector::from_fn(p, |j, _| sqrt_eig[j] * z[j]);
        &q * scaled
    };
    for i in 0..n - n_out {
        x.set_row(i, &sample_sigma_row(&mut rng).transpose());
    }
    let mut labels = vec![0u8; n];
    for i in n - n_out..n {
        let pick = rng.gen_range(0..l);
        // eigenvalues are ascending, so columns 0..l are the l smallest
        let a = q.column(pick).clone_owned();
        let row = shift * a + sample_sigma_row(&mut rng);
        x.set_row(i, &row.transpose());
        labels[i] = 1;
    }
    Ok(SimDataset {
        x: DataMatrix::new(x)?,
        truth: BinaryMap::new(labels)?,
        mu_true: DVector::zeros(p),
        sigma_true: Some(sigma),
        protocol: Protocol::HighDim { eps, l },
        seed,
    })
}

/// The overdetermined-protocol mixing matrix: 1 on the diagonal, 0.75 off.
pub fn g_matrix(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.75 })
}

/// Overdetermined protocol: y-space inliers N(0, I_p), outliers per kind,
/// observed x = Gy. Inlier rows come first, then outliers.
pub fn gen_overdetermined(
    n: usize,
    p: usize,
    eps: f64,
    kind: OutlierKind,
    r: f64,
    seed: u64,
) -> Result<SimDataset> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidData(format!("eps = {} must be in [0, 1)", eps)));
    }
    let n_out = (eps * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pf = p as f64;
    // deterministic point direction: Gaussian draw, demeaned, normalized
    let point_a = {
        let mut a = standard_normal_vec(&mut rng, p);
        let mean = a.mean();
        a.add_scalar_mut(-mean);
        let norm = a.norm();
        a / norm
    };
    let mut y = DMatrix::zeros(n, p);
    for i in 0..n - n_out {
        y.set_row(i, &standard_normal_vec(&mut rng, p).transpose());
    }
    let mut labels = vec![0u8; n];
    for i in n - n_out..n {
        let row = match kind {
            OutlierKind::Point => {
                r * pf.sqrt() * &point_a + 0.01 * standard_normal_vec(&mut rng, p)
            }
            OutlierKind::Cluster => {
                DVector::from_element(p, r * pf.powf(-0.25)) + standard_normal_vec(&mut rng, p)
            }
            OutlierKind::Random => {
                let nu = standard_normal_vec(&mut rng, p);
                r * pf.powf(0.25) * &nu / nu.norm() + standard_normal_vec(&mut rng, p)
            }
            OutlierKind::Radial => 5.0_f64.sqrt() * standard_normal_vec(&mut rng, p),
        };
        y.set_row(i, &row.transpose());
        labels[i] = 1;
    }
    let g = g_matrix(p);
    let x = &y * g.transpose();
    Ok(SimDataset {
        x: DataMatrix::new(x)?,
        truth: BinaryMap::new(labels)?,
        mu_true: DVector::zeros(p),
        sigma_true: None,
        protocol: Protocol::Overdetermined { eps, kind, r },
        seed,
    })
}

/// The four masking settings. 1 and 2 are univariate mixtures, 3 is the
/// two-dimensional analog of 2, and 4 plants outliers along the two
/// smallest eigen-directions of a p = 500 scatter.
pub fn gen_masking_setting(id: u8, seed: u64) -> Result<SimDataset> {
    let protocol = Protocol::Masking { id };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match id {
        1 | 2 => {
            let (m1, c1, m2, c2) = if id == 1 {
                (-10.0, 100usize, 10.0, 100usize)
            } else {
                (5.0, 150, 1000.0, 50)
            };
            let mut rows = Vec::with_capacity(1000);
            let mut labels = Vec::with_capacity(1000);
            for _ in 0..800 {
                rows.push(vec![rng.sample::<f64, _>(StandardNormal)]);
                labels.push(0);
            }
            for _ in 0..c1 {
                rows.push(vec![m1 + rng.sample::<f64, _>(StandardNormal)]);
                labels.push(1);
            }
            for _ in 0..c2 {
                rows.push(vec![m2 + rng.sample::<f64, _>(StandardNormal)]);
                labels.push(1);
            }
            Ok(SimDataset {
                x: DataMatrix::from_rows(&rows)?,
                truth: BinaryMap::new(labels)?,
                mu_true: DVector::zeros(1),
                sigma_true: Some(DMatrix::identity(1, 1)),
                protocol,
                seed,
            })
        }
        3 => {
            let mut rows = Vec::with_capacity(1000);
            let mut labels = Vec::with_capacity(1000);
            let push = |rng: &mut ChaCha8Rng, rows: &mut Vec<Vec<f64>>, m: f64| {
                rows.push(vec![
                    m + rng.sample::<f64, _>(StandardNormal),
                    m + rng.sample::<f64, _>(StandardNormal),
                ]);
            };
            for _ in 0..800 {
                push(&mut rng, &mut rows, 0.0);
                labels.push(0);
            }
            for _ in 0..150 {
                push(&mut rng, &mut rows, 5.0);
                labels.push(1);
            }
            for _ in 0..50 {
                push(&mut rng, &mut rows, 1000.0);
                labels.push(1);
            }
            Ok(SimDataset {
                x: DataMatrix::from_rows(&rows)?,
                truth: BinaryMap::new(labels)?,
                mu_true: DVector::zeros(2),
                sigma_true: Some(DMatrix::identity(2, 2)),
                protocol,
                seed,
            })
        }
        4 => {
            let (n, p) = (300usize, 500usize);
            let (sigma, eig, q) = gen_covariance_cn_full(p, 50.0, seed);
            let sqrt_eig: Vec<f64> = eig.iter().map(|&e| e.sqrt()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e3779b97f4a7c15));
            let sample = |rng: &mut ChaCha8Rng| -> DVector<f64> {
                let z = standard_normal_vec(rng, p);
                &q * DVector::from_fn(p, |j, _| sqrt_eig[j] * z[j])
            };
            let n_a = (0.15 * n as f64).round() as usize;
            let n_b = (0.05 * n as f64).round() as usize;
            let mut x = DMatrix::zeros(n, p);
            let mut labels = vec![0u8; n];
            for i in 0..n - n_a - n_b {
                x.set_row(i, &sample(&mut rng).transpose());
            }
            let a = q.column(0).clone_owned();
            let b = q.column(1).clone_owned();
            for i in n - n_a - n_b..n - n_b {
                x.set_row(i, &(50.0 * &a + sample(&mut rng)).transpose());
                labels[i] = 1;
            }
            for i in n - n_b..n {
                x.set_row(i, &(5000.0 * &b + sample(&mut rng)).transpose());
                labels[i] = 1;
            }
            Ok(SimDataset {
                x: DataMatrix::new(x)?,
                truth: BinaryMap::new(labels)?,
                mu_true: DVector::zeros(p),
                sigma_true: Some(sigma),
                protocol,
                seed,
            })
        }
        other => Err(Error::InvalidData(format!(
            "masking setting id must be 1..4, got {}",
            other
        ))),
    }
}
