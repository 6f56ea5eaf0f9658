//! Robust high-dimensional outlier detection: spectral embedding, MCD-style
//! concentration initialized by projection depth, and bootstrap instability
//! paths for choosing the subset size h and embedding dimension q.

pub mod data;
pub mod depth;
pub mod error;
pub mod mcd;
pub mod metrics;
pub mod reweight;
pub mod simgen;
pub mod spectral;
pub mod stability;

pub use data::{BinaryMap, DataMatrix, SubsetIndex};
pub use depth::{default_k, projection_depths, sample_directions, DepthVector, DirectionSet};
pub use error::{Error, Result};
pub use mcd::{
    c_step, concentrate, mahalanobis_sq, subset_estimate, univariate_mcd_exact, ConcentrateResult,
    LocationScatter,
};
pub use metrics::{detection_report, estimation_report, DetectionReport, EstimationReport};
pub use reweight::{chi2_cdf, chi2_quantile, fdb, reweight, FdbResult, ReweightResult};
pub use simgen::{
    g_matrix, gen_covariance_cn, gen_highdim, gen_masking_setting, gen_overdetermined,
    OutlierKind, Protocol, SimDataset,
};
pub use spectral::{fit_embedding, project, spectral_mcd, BestSubsetResult, SpectralModel};
pub use stability::{
    bootstrap_pair_distance, clustering_distance, corrected_clustering_distance,
    corrected_probability_distance, grid_search, instability, null_comembership,
    null_disagreement, pair_seed, probability_distance, FailurePolicy, InstabilityCell,
    InstabilityPath,
};
