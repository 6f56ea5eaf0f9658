//! Centering, SVD-based embedding, projection of new data, and the
//! depth-initialized best-subset search in score space.

use nalgebra::{DMatrix, DVector};

use crate::data::{BinaryMap, DataMatrix, SubsetIndex};
use crate::depth::{projection_depths, sample_directions, top_depth_indices, DirectionSet};
use crate::error::{Error, Result};
use crate::mcd::{concentrate, LocationScatter};

/// A fitted embedding: column means, top-q right singular vectors (columns
/// orthonormal, ordered by decreasing singular value), and the singular
/// values themselves.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub mu: DVector<f64>,
    pub v_q: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub q: usize,
    /// Set when q exceeds the numerical rank of the centered data, so
    /// trailing singular values are effectively zero.
    pub rank_deficient: bool,
}

/// Center X over all rows (ordinary, non-robust PCA) and keep the top q
/// right singular vectors. No variable rescaling. The largest-magnitude
/// entry of each singular vector is forced positive so fits are
/// reproducible across platforms.
pub fn fit_embedding(x: &DataMatrix, q: usize) -> Result<SpectralModel> {
    let (n, p) = (x.n(), x.p());
    if q < 1 || q > n.min(p) {
        return Err(Error::InvalidData(format!(
            "q = {} must be in [1, min(n, p) = {}]",
            q,
            n.min(p)
        )));
    }
    let mu = column_means(x.values());
    let centered = center(x.values(), &mu);
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .expect("v_t requested from SVD");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap().then(a.cmp(&b)));

    let mut v_q = DMatrix::zeros(p, q);
    let mut singular_values = Vec::with_capacity(q);
    for (col, &src) in order.iter().take(q).enumerate() {
        let mut v: DVector<f64> = v_t.row(src).transpose();
        // sign convention: largest-magnitude entry positive
        let mut max_abs = 0.0;
        let mut max_val = 0.0;
        for &e in v.iter() {
            if e.abs() > max_abs {
                max_abs = e.abs();
                max_val = e;
            }
        }
        if max_val < 0.0 {
            v = -v;
        }
        v_q.set_column(col, &v);
        singular_values.push(sv[src]);
    }
    let tol = singular_values.first().copied().unwrap_or(0.0) * f64::EPSILON * n.max(p) as f64;
    let rank_deficient = singular_values.last().copied().unwrap_or(0.0) <= tol;
    Ok(SpectralModel {
        mu,
        v_q,
        singular_values,
        q,
        rank_deficient,
    })
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    m.row_mean().transpose()
}

fn center(m: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v -= mu[j];
        }
    }
    c
}

/// Scores of X under the model: (X - 1 mu') V_q.
pub fn project(model: &SpectralModel, x: &DataMatrix) -> Result<DataMatrix> {
    if x.p() != model.mu.len() {
        return Err(Error::DimensionMismatch {
            expected: model.mu.len(),
            got: x.p(),
        });
    }
    let centered = center(x.values(), &model.mu);
    Ok(DataMatrix::from_matrix_unchecked(centered * &model.v_q))
}

#[derive(Debug, Clone)]
pub struct BestSubsetResult {
    pub subset: SubsetIndex,
    /// Location/scatter of the final subset, in q-dimensional score space.
    pub estimate: LocationScatter,
    pub model: SpectralModel,
    pub labels: BinaryMap,
    pub converged: bool,
    pub iterations: usize,
    /// Self-referenced projection depths used for initialization.
    pub init_depths: Vec<f64>,
}

/// Full best-subset pipeline: embed to q principal component scores,
/// depth-rank to initialize H, then concentrate until H stabilizes. The
/// complement of the final subset is labeled outlier.
pub fn spectral_mcd(
    x: &DataMatrix,
    h: usize,
    q: usize,
    k: usize,
    seed: u64,
) -> Result<BestSubsetResult> {
    let n = x.n();
    if !(q < h && h <= n) {
        return Err(Error::InvalidData(format!(
            "need q < h <= n, got q = {}, h = {}, n = {}",
            q, h, n
        )));
    }
    assert!(k >= 1);
    let model = fit_embedding(x, q)?;
    let z = project(&model, x)?;
    let dirs = sample_directions(k, q, seed);
    let result = spectral_mcd_on_scores(&z, h, &dirs)?;
    Ok(BestSubsetResult {
        subset: result.0,
        estimate: result.1,
        model,
        labels: result.2,
        converged: result.3,
        iterations: result.4,
        init_depths: result.5,
    })
}

/// Steps 2-4 of the best-subset pipeline, on precomputed scores. Shared
/// with the bootstrap grid search, which recycles embeddings.
pub(crate) fn spectral_mcd_on_scores(
    z: &DataMatrix,
    h: usize,
    dirs: &DirectionSet,
) -> Result<(SubsetIndex, LocationScatter, BinaryMap, bool, usize, Vec<f64>)> {
    let depths = projection_depths(z, z, dirs)?;
    let h0 = SubsetIndex::new(top_depth_indices(&depths.values, h), z.n())?;
    let conc = concentrate(z, &h0, 100)?;
    let labels = conc.subset.complement_map(z.n());
    Ok((
        conc.subset,
        conc.estimate,
        labels,
        conc.converged,
        conc.iterations,
        depths.values,
    ))
}
