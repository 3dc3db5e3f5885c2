//! Bayesian normal linear-model imputation: draw `(beta*, sigma*)` from the
//! posterior of the least-squares fit, then `y = x' beta* + N(0, sigma*^2)`.
//! Binary targets round the draw to the nearer of 0 and 1.

use rand_distr::{Distribution, StandardNormal};

use crate::data::ColumnKind;
use crate::error::Result;
use crate::imputers::linear::{fit_linear, predict_with};
use crate::imputers::Target;
use crate::rng::Rng;

pub(crate) fn impute(t: &Target<'_>, rng: &mut Rng) -> Result<Vec<f64>> {
    let obs = t.observed_rows();
    let mis = t.missing_rows();
    let x_obs = t.predictors.select_rows(&obs);
    let x_mis = t.predictors.select_rows(&mis);
    let y: Vec<f64> = obs.iter().map(|&i| t.values[i]).collect();
    let fit = fit_linear(&y, &x_obs)?;
    let (beta, sigma) = fit.draw_posterior(rng);
    Ok((0..mis.len())
        .map(|j| {
            let e: f64 = StandardNormal.sample(rng);
            let v = predict_with(&beta, &x_mis, j) + sigma * e;
            if t.kind == ColumnKind::Binary {
                if v >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            } else {
                v
            }
        })
        .collect())
}
