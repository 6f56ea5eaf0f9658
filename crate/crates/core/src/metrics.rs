//! Detection and estimation quality metrics.

use nalgebra::{DMatrix, DVector};

use crate::data::BinaryMap;
use crate::error::{Error, Result};

/// Confusion counts and F1 with outliers as the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub f1: f64,
    pub elapsed_seconds: f64,
    /// True when neither prediction nor truth contains a positive, in
    /// which case f1 is reported as 1.
    pub degenerate: bool,
}

pub fn detection_report(
    pred: &BinaryMap,
    truth: &BinaryMap,
    elapsed_seconds: f64,
) -> Result<DetectionReport> {
    if pred.n() != truth.n() {
        return Err(Error::DimensionMismatch {
            expected: truth.n(),
            got: pred.n(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0, 0, 0);
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    let denom = 2 * tp + fp + fn_;
    let degenerate = denom == 0;
    let f1 = if degenerate {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    };
    Ok(DetectionReport {
        tp,
        fp,
        fn_,
        tn,
        f1,
        elapsed_seconds,
        degenerate,
    })
}

/// Location error, log-condition of the scatter ratio, and KL divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub e_mu: f64,
    pub e_sigma: f64,
    pub kl: f64,
}

pub fn estimation_report(
    mu_hat: &DVector<f64>,
    sigma_hat: &DMatrix<f64>,
    mu_true: &DVector<f64>,
    sigma_true: &DMatrix<f64>,
) -> Result<EstimationReport> {
    let p = mu_true.len();
    if mu_hat.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: mu_hat.len(),
        });
    }
    if sigma_hat.nrows() != p || sigma_hat.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: sigma_hat.nrows(),
        });
    }
    if sigma_true.nrows() != p || sigma_true.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: sigma_true.nrows(),
        });
    }
    let chol_hat = sigma_hat
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd {
            name: "sigma_hat".into(),
        })?;
    let chol_true = sigma_true
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd {
            name: "sigma_true".into(),
        })?;
    let e_mu = (mu_hat - mu_true).norm();
    let true_inv = chol_true.inverse();
    let ratio = sigma_hat * &true_inv;
    let sv = ratio.clone().svd(false, false).singular_values;
    let s_max = sv.iter().cloned().fold(f64::MIN, f64::max);
    let s_min = sv.iter().cloned().fold(f64::MAX, f64::min);
    let e_sigma = (s_max / s_min).log10();
    let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| -> f64 {
        2.0 * (0..p).map(|i| c.l_dirty()[(i, i)].ln()).sum::<f64>()
    };
    let kl = ratio.trace() - (logdet(&chol_hat) - logdet(&chol_true)) - p as f64;
    Ok(EstimationReport { e_mu, e_sigma, kl })
}
