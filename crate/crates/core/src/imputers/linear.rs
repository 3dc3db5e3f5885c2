use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Least-squares fit with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// Intercept first, then one entry per design column. Columns dropped
    /// for collinearity have coefficient 0.
    pub coefficients: Vec<f64>,
    /// `SSR / (n - rank)`.
    pub residual_variance: f64,
    pub design_labels: Vec<String>,
    /// Design positions (0 = intercept) dropped as linearly dependent.
    pub dropped: Vec<usize>,
    kept: Vec<usize>,
    r_inv: DMatrix<f64>,
    ssr: f64,
    df: usize,
}

const DEPENDENCE_TOL: f64 = 1e-9;

/// Fit `y ~ 1 + X` by Householder QR on the linearly independent columns.
///
/// Columns are screened in order with Gram-Schmidt: a column whose residual
/// after projecting out the columns already kept is below `1e-9` of its
/// norm is dropped.
pub fn fit_linear(y: &[f64], x: &FeatureMatrix) -> Result<RegressionFit> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "{} responses for {} design rows",
            n,
            x.nrows()
        )));
    }
    let k = x.ncols();
    if n <= k + 1 {
        return Err(Error::TooFewRows { needed: k + 1, found: n });
    }
    let design = |i: usize, j: usize| if j == 0 { 1.0 } else { x.data[(i, j - 1)] };

    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..=k {
        let col = DVector::from_fn(n, |i, _| design(i, j));
        let norm = col.norm();
        let mut r = col;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let rn = r.norm();
        if norm > 0.0 && rn > DEPENDENCE_TOL * norm {
            basis.push(r / rn);
            kept.push(j);
        } else {
            dropped.push(j);
        }
    }
    let rank = kept.len();
    let xk = DMatrix::from_fn(n, rank, |i, c| design(i, kept[c]));
    let qr = xk.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let yv = DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(rank, rank))
        .ok_or_else(|| Error::RankDeficient("triangular inverse failed".into()))?;

    let mut coefficients = vec![0.0; k + 1];
    for (c, &j) in kept.iter().enumerate() {
        coefficients[j] = beta[c];
    }
    let fitted = &xk * &beta;
    let ssr: f64 = (yv - fitted).iter().map(|e| e * e).sum();
    let df = n - rank;
    let mut design_labels = vec!["(intercept)".to_string()];
    design_labels.extend(x.labels.iter().map(|l| l.to_string()));
    Ok(RegressionFit {
        coefficients,
        residual_variance: ssr / df as f64,
        design_labels,
        dropped,
        kept,
        r_inv,
        ssr,
        df,
    })
}

impl RegressionFit {
    pub fn predict_row(&self, x: &FeatureMatrix, row: usize) -> f64 {
        predict_with(&self.coefficients, x, row)
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(x, i)).collect()
    }

    pub fn residual_df(&self) -> usize {
        self.df
    }

    /// Draw `(beta*, sigma*)` from the posterior under a flat prior:
    /// `sigma*^2 = SSR / chi2(n - rank)` and
    /// `beta* ~ N(beta_hat, sigma*^2 (X'X)^-1)` on the kept columns.
    pub fn draw_posterior(&self, rng: &mut Rng) -> (Vec<f64>, f64) {
        let chi = ChiSquared::new(self.df as f64).expect("df >= 1");
        let denom: f64 = chi.sample(rng);
        let sigma = (self.ssr / denom).sqrt();
        let rank = self.kept.len();
        let z = DVector::from_fn(rank, |_, _| StandardNormal.sample(rng));
        let shift = &self.r_inv * z;
        let mut beta = self.coefficients.clone();
        for (c, &j) in self.kept.iter().enumerate() {
            beta[j] += sigma * shift[c];
        }
        (beta, sigma)
    }
}

pub(crate) fn predict_with(beta: &[f64], x: &FeatureMatrix, row: usize) -> f64 {
    beta[0]
        + (0..x.ncols())
            .map(|j| beta[j + 1] * x.data[(row, j)])
            .sum::<f64>()
}
