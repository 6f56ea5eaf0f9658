//! Approximate projection depth via random directions, with median/MAD
//! projection kernels.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{DataMatrix, SubsetIndex};
use crate::error::{Error, Result};

/// Default direction count: max{1000, 10q}.
pub fn default_k(q: usize) -> usize {
    1000.max(10 * q)
}

/// k unit-norm directions in q dimensions, i.i.d. uniform on the sphere.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    directions: DMatrix<f64>,
    seed: u64,
}

impl DirectionSet {
    pub fn k(&self) -> usize {
        self.directions.nrows()
    }

    pub fn q(&self) -> usize {
        self.directions.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    #[cfg(test)]
    pub(crate) fn from_matrix(directions: DMatrix<f64>, seed: u64) -> Self {
        Self { directions, seed }
    }
}

/// Sample `k` directions uniformly on the unit sphere in `q` dimensions
/// (normalized standard-normal draws). Deterministic given `seed`.
pub fn sample_directions(k: usize, q: usize, seed: u64) -> DirectionSet {
    assert!(k >= 1 && q >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions = DMatrix::zeros(k, q);
    for i in 0..k {
        loop {
            let mut norm_sq = 0.0;
            for j in 0..q {
                let v: f64 = rng.sample(StandardNormal);
                directions[(i, j)] = v;
                norm_sq += v * v;
            }
            if norm_sq > 1e-24 {
                let norm = norm_sq.sqrt();
                for j in 0..q {
                    directions[(i, j)] /= norm;
                }
                break;
            }
        }
    }
    DirectionSet { directions, seed }
}

/// Projection depths in [0, 1], plus the reference size they were computed
/// against.
#[derive(Debug, Clone)]
pub struct DepthVector {
    pub values: Vec<f64>,
    pub reference_size: usize,
}

/// Median of a scratch slice; mean of the two central order statistics for
/// even lengths. Uses selection, not a full sort.
fn median_in_place(v: &mut [f64]) -> f64 {
    let m = v.len();
    debug_assert!(m >= 1);
    let mid = m / 2;
    let (_, pivot, _) = v.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    let hi = *pivot;
    if m % 2 == 1 {
        hi
    } else {
        let lo = v[..mid]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Depth of every query row with respect to the reference rows:
/// depth = 1 / (1 + O), where O is the maximum robust z-score
/// |u'x - med(u'y)| / MAD(u'y) over the sampled directions. A direction
/// with MAD = 0 contributes nothing when the numerator is also 0 and
/// infinite outlyingness (depth 0) otherwise.
pub fn projection_depths(
    query: &DataMatrix,
    reference: &DataMatrix,
    dirs: &DirectionSet,
) -> Result<DepthVector> {
    let q = dirs.q();
    if query.p() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: query.p(),
        });
    }
    if reference.p() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: reference.p(),
        });
    }
    let m = reference.n();
    if m < 2 {
        return Err(Error::InvalidData(
            "projection depth needs at least 2 reference rows".into(),
        ));
    }
    let k = dirs.k();
    // m x k and n x k projection matrices
    let ref_proj = reference.values() * dirs.directions().transpose();
    let query_proj = query.values() * dirs.directions().transpose();

    let stats: Vec<(f64, f64)> = (0..k)
        .into_par_iter()
        .map(|j| {
            let mut col: Vec<f64> = ref_proj.column(j).iter().copied().collect();
            let med = median_in_place(&mut col);
            for v in col.iter_mut() {
                *v = (*v - med).abs();
            }
            let mad = median_in_place(&mut col);
            (med, mad)
        })
        .collect();

    let n = query.n();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = 0.0_f64;
            for (j, &(med, mad)) in stats.iter().enumerate() {
                let num = (query_proj[(i, j)] - med).abs();
                if mad > 0.0 {
                    let o = num / mad;
                    if o > out {
                        out = o;
                    }
                } else if num > 0.0 {
                    return 0.0;
                }
            }
            1.0 / (1.0 + out)
        })
        .collect();
    Ok(DepthVector {
        values,
        reference_size: m,
    })
}

/// Indices of the `h` rows with the largest depths; ties break by
/// ascending row index.
pub fn top_depth_indices(depths: &[f64], h: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..depths.len()).collect();
    order.sort_by(|&a, &b| {
        depths[b]
            .partial_cmp(&depths[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(h);
    order
}

/// The h-subset with the greatest self-referenced depths (reference = Z
/// itself).
pub fn depth_rank_subset(z: &DataMatrix, h: usize, dirs: &DirectionSet) -> Result<SubsetIndex> {
    assert!(h >= 1 && h <= z.n());
    let depths = projection_depths(z, z, dirs)?;
    SubsetIndex::new(top_depth_indices(&depths.values, h), z.n())
}
