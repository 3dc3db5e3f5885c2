//! Random hot-deck imputation on Mahalanobis distance between covariate
//! profiles. The covariance of the encoded predictors gets
//! `1e-6 * trace / P` added to its diagonal before whitening.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::imputers::{draw_from_nearest, ImputerConfig, Target};
use crate::rng::Rng;

/// Rows of `x` mapped to coordinates where Mahalanobis distance is
/// Euclidean. Returns `n x P` whitened values.
pub(crate) fn whiten(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if p == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let means: Vec<f64> = x.column_iter().map(|c| c.sum() / n as f64).collect();
    let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let denom = (n.max(2) - 1) as f64;
    let mut cov = centered.transpose() * &centered / denom;
    let trace = cov.trace();
    if !trace.is_finite() || trace <= 0.0 {
        return Err(Error::DegenerateCovariance);
    }
    let ridge = 1e-6 * trace / p as f64;
    for j in 0..p {
        cov[(j, j)] += ridge;
    }
    let chol = cov.cholesky().ok_or(Error::DegenerateCovariance)?;
    // Solve L z_i = x_i for every row: Z' = L^-1 X'.
    let zt = chol
        .l()
        .solve_lower_triangular(&centered.transpose())
        .ok_or(Error::DegenerateCovariance)?;
    Ok(zt.transpose())
}

pub(crate) fn impute(t: &Target<'_>, cfg: &ImputerConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    t.require_donors(cfg.donors)?;
    let obs = t.observed_rows();
    let mis = t.missing_rows();
    let z = whiten(&t.predictors.data)?;
    let p = z.ncols();
    let mut out = Vec::with_capacity(mis.len());
    let mut dist = vec![0.0; obs.len()];
    for &row in &mis {
        for (d, &o) in dist.iter_mut().zip(&obs) {
            *d = (0..p).map(|j| (z[(row, j)] - z[(o, j)]).powi(2)).sum();
        }
        let donor = draw_from_nearest(&dist, cfg.donors, rng);
        out.push(t.values[obs[donor]]);
    }
    Ok(out)
}
