//! Distances between binary outlier maps, their size-corrected versions,
//! and the bootstrap instability estimator with grid search over (h, q).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{BinaryMap, DataMatrix, SubsetIndex};
use crate::depth::{default_k, projection_depths, sample_directions, top_depth_indices};
use crate::error::{Error, Result};
use crate::spectral::{fit_embedding, project};

/// Fraction of observations on which two maps disagree.
pub fn probability_distance(a: &BinaryMap, b: &BinaryMap) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.n(),
        });
    }
    let disagree = a
        .labels()
        .iter()
        .zip(b.labels())
        .filter(|(x, y)| x != y)
        .count();
    Ok(disagree as f64 / a.n() as f64)
}

/// Co-membership disagreement rate between two 2-cluster labelings,
/// computed in O(n) as 2p(1 - p).
pub fn clustering_distance(a: &BinaryMap, b: &BinaryMap) -> Result<f64> {
    let p = probability_distance(a, b)?;
    Ok(2.0 * p * (1.0 - p))
}

/// Null expectation of the per-observation disagreement for two random
/// h-subsets: c = 2 (h/n) ((n-h)/n).
pub fn null_disagreement(h: usize, n: usize) -> f64 {
    2.0 * (h as f64 / n as f64) * ((n - h) as f64 / n as f64)
}

/// Null expectation of co-membership agreement for two random h-subsets:
/// c' = [C(h,2) + C(n-h,2)] / C(n,2).
pub fn null_comembership(h: usize, n: usize) -> f64 {
    let choose2 = |m: usize| m as f64 * (m as f64 - 1.0) / 2.0;
    (choose2(h) + choose2(n - h)) / choose2(n)
}

/// Probability distance scaled by its null expectation c.
pub fn corrected_probability_distance(a: &BinaryMap, b: &BinaryMap, h: usize) -> Result<f64> {
    let n = a.n();
    if h == 0 || h >= n {
        return Err(Error::DegenerateCorrection { h, n });
    }
    Ok(probability_distance(a, b)? / null_disagreement(h, n))
}

/// Clustering distance scaled to a correlation-like quantity:
/// d / [2 c'(1 - c')] - 1. This is the distance averaged by the
/// instability estimator.
pub fn corrected_clustering_distance(a: &BinaryMap, b: &BinaryMap, h: usize) -> Result<f64> {
    let n = a.n();
    if n < 2 || h == 0 || h >= n {
        return Err(Error::DegenerateCorrection { h, n });
    }
    let c_prime = null_comembership(h, n);
    if c_prime <= 0.0 || c_prime >= 1.0 {
        return Err(Error::DegenerateCorrection { h, n });
    }
    Ok(clustering_distance(a, b)? / (2.0 * c_prime * (1.0 - c_prime)) - 1.0)
}

/// What to do when a bootstrap pair fails (e.g. singular score-space
/// scatter on a degenerate resample).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailurePolicy {
    /// Abort the whole run with the failing pair index attached.
    #[default]
    Abort,
    /// Drop the pair and record how many were dropped.
    Skip,
}

#[derive(Debug, Clone)]
pub struct InstabilityCell {
    pub h: usize,
    pub q: usize,
    /// Corrected clustering distance per bootstrap pair, in pair order.
    pub distances: Vec<f64>,
    pub s_hat: f64,
    pub std_err: f64,
    pub failed_pairs: usize,
}

impl InstabilityCell {
    fn from_distances(h: usize, q: usize, distances: Vec<f64>, failed_pairs: usize) -> Self {
        let b = distances.len() as f64;
        let s_hat = distances.iter().sum::<f64>() / b;
        let std_err = if distances.len() > 1 {
            let var = distances
                .iter()
                .map(|d| (d - s_hat).powi(2))
                .sum::<f64>()
                / (b - 1.0);
            (var / b).sqrt()
        } else {
            0.0
        };
        Self {
            h,
            q,
            distances,
            s_hat,
            std_err,
            failed_pairs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InstabilityPath {
    /// Cells in grid order: outer loop over h, inner loop over q.
    pub cells: Vec<InstabilityCell>,
    /// (h, q) with minimal s_hat; ties prefer larger h, then smaller q.
    pub argmin: (usize, usize),
    pub pairs: usize,
    pub master_seed: u64,
}

// splitmix64; used to derive independent seeds from (master seed, stream).
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0xa5a5_5a5a_1234_5678)))
}

const STREAM_RESAMPLE: u64 = 1;
const STREAM_SELF_DIRS: u64 = 2;
const STREAM_MAP_DIRS: u64 = 3;

fn resample_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Binary maps produced by one half of a bootstrap pair, for every (h, q)
/// cell. The resample, its SVD, and its projections are computed once and
/// shared across the whole grid.
fn half_maps(
    x: &DataMatrix,
    h_list: &[usize],
    q_list: &[usize],
    k: Option<usize>,
    pair_seed: u64,
    half: u64,
) -> Result<Vec<Vec<BinaryMap>>> {
    let n = x.n();
    let q_max = *q_list.iter().max().unwrap();
    let idx = resample_indices(n, derive_seed(pair_seed, STREAM_RESAMPLE * 1000 + half));
    let xb = x.select_rows(&idx);
    let model = fit_embedding(&xb, q_max)?;
    let zb_full = project(&model, &xb)?;
    let zx_full = project(&model, x)?;

    let mut out: Vec<Vec<BinaryMap>> = Vec::with_capacity(h_list.len());
    for _ in h_list {
        out.push(Vec::with_capacity(q_list.len()));
    }
    for &q in q_list {
        let zbq = zb_full.left_columns(q);
        let zxq = zx_full.left_columns(q);
        let kq = k.unwrap_or_else(|| default_k(q));
        let dirs_self = sample_directions(
            kq,
            q,
            derive_seed(pair_seed, STREAM_SELF_DIRS * 1_000_000 + half * 1000 + q as u64),
        );
        let self_depths = projection_depths(&zbq, &zbq, &dirs_self)?;
        let dirs_map = sample_directions(
            kq,
            q,
            derive_seed(pair_seed, STREAM_MAP_DIRS * 1_000_000 + half * 1000 + q as u64),
        );
        for (hi, &h) in h_list.iter().enumerate() {
            let h0 = SubsetIndex::new(top_depth_indices(&self_depths.values, h), n)?;
            let subset = crate::mcd::concentrate(&zbq, &h0, 100)?.subset;
            let reference = zbq.select_rows(subset.indices());
            let d = projection_depths(&zxq, &reference, &dirs_map)?;
            let inliers = top_depth_indices(&d.values, h);
            let map = SubsetIndex::new(inliers, n)?.complement_map(n);
            out[hi].push(map);
        }
    }
    Ok(out)
}

/// Corrected clustering distance for every (h, q) cell of one bootstrap
/// pair. Both halves share the grid, so the SVD and projections of each
/// resample are computed once.
fn pair_distances(
    x: &DataMatrix,
    h_list: &[usize],
    q_list: &[usize],
    k: Option<usize>,
    pair_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let first = half_maps(x, h_list, q_list, k, pair_seed, 0)?;
    let second = half_maps(x, h_list, q_list, k, pair_seed, 1)?;
    let mut out = Vec::with_capacity(h_list.len());
    for (hi, &h) in h_list.iter().enumerate() {
        let mut row = Vec::with_capacity(q_list.len());
        for qi in 0..q_list.len() {
            row.push(corrected_clustering_distance(
                &first[hi][qi],
                &second[hi][qi],
                h,
            )?);
        }
        out.push(row);
    }
    Ok(out)
}

/// One bootstrap pair at a single (h, q): draw two independent size-n
/// with-replacement resamples, run the best-subset pipeline on each,
/// project the original X through each resample's embedding, label by
/// depth against the selected subset, and return the corrected clustering
/// distance of the two maps. Deterministic given `pair_seed`.
pub fn bootstrap_pair_distance(
    x: &DataMatrix,
    h: usize,
    q: usize,
    k: usize,
    pair_seed: u64,
) -> Result<f64> {
    let d = pair_distances(x, &[h], &[q], Some(k), pair_seed)?;
    Ok(d[0][0])
}

/// Seed for pair `b` under `master_seed`. Exposed so tests can reproduce
/// individual pairs.
pub fn pair_seed(master_seed: u64, pair: u64) -> u64 {
    derive_seed(master_seed, 0x7000_0000 + pair)
}

/// Mean corrected clustering distance over B bootstrap pairs at one
/// (h, q).
pub fn instability(
    x: &DataMatrix,
    h: usize,
    q: usize,
    k: usize,
    pairs: usize,
    master_seed: u64,
    policy: FailurePolicy,
) -> Result<InstabilityCell> {
    assert!(pairs >= 1);
    let results: Vec<Result<f64>> = (0..pairs)
        .into_par_iter()
        .map(|b| bootstrap_pair_distance(x, h, q, k, pair_seed(master_seed, b as u64)))
        .collect();
    let mut distances = Vec::with_capacity(pairs);
    let mut failed = 0usize;
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(d) => distances.push(d),
            Err(e) => match policy {
                FailurePolicy::Abort => {
                    return Err(Error::Bootstrap {
                        pair: b,
                        source: Box::new(e),
                    })
                }
                FailurePolicy::Skip => failed += 1,
            },
        }
    }
    if distances.is_empty() {
        return Err(Error::InvalidData("every bootstrap pair failed".into()));
    }
    Ok(InstabilityCell::from_distances(h, q, distances, failed))
}

/// Grid search over (h, q) with computation recycling: every pair's
/// resamples, SVDs, projections, and self-referenced depths are shared
/// across the grid. Results are identical regardless of worker count.
pub fn grid_search(
    x: &DataMatrix,
    h_fractions: &[f64],
    q_grid: &[usize],
    k: Option<usize>,
    pairs: usize,
    master_seed: u64,
    policy: FailurePolicy,
) -> Result<InstabilityPath> {
    let n = x.n();
    if h_fractions.is_empty() || q_grid.is_empty() {
        return Err(Error::InvalidData("empty (h, q) grid".into()));
    }
    if h_fractions.iter().any(|&f| !(0.0 < f && f < 1.0)) {
        return Err(Error::InvalidData(
            "h fractions must lie strictly in (0, 1)".into(),
        ));
    }
    assert!(pairs >= 1);
    let h_list: Vec<usize> = h_fractions.iter().map(|&f| (f * n as f64) as usize).collect();

    let per_pair: Vec<Result<Vec<Vec<f64>>>> = (0..pairs)
        .into_par_iter()
        .map(|b| pair_distances(x, &h_list, q_grid, k, pair_seed(master_seed, b as u64)))
        .collect();

    let mut kept: Vec<Vec<Vec<f64>>> = Vec::with_capacity(pairs);
    let mut failed = 0usize;
    for (b, r) in per_pair.into_iter().enumerate() {
        match r {
            Ok(d) => kept.push(d),
            Err(e) => match policy {
                FailurePolicy::Abort => {
                    return Err(Error::Bootstrap {
                        pair: b,
                        source: Box::new(e),
                    })
                }
                FailurePolicy::Skip => failed += 1,
            },
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidData("every bootstrap pair failed".into()));
    }

    let mut cells = Vec::with_capacity(h_list.len() * q_grid.len());
    for (hi, &h) in h_list.iter().enumerate() {
        for (qi, &q) in q_grid.iter().enumerate() {
            let distances: Vec<f64> = kept.iter().map(|d| d[hi][qi]).collect();
            cells.push(InstabilityCell::from_distances(h, q, distances, failed));
        }
    }
    let argmin = cells
        .iter()
        .min_by(|a, b| {
            a.s_hat
                .partial_cmp(&b.s_hat)
                .unwrap()
                .then(b.h.cmp(&a.h)) // prefer larger h
                .then(a.q.cmp(&b.q)) // then smaller q
        })
        .map(|c| (c.h, c.q))
        .unwrap();
    Ok(InstabilityPath {
        cells,
        argmin,
        pairs,
        master_seed,
    })
}
