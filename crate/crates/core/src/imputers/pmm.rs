//! Predictive mean matching.
//!
//! Observed rows are predicted with the least-squares fit, missing rows with
//! a coefficient vector drawn from its posterior. The `donors` observed rows
//! whose predictions are closest to a missing row's prediction form the
//! pool, and one donor's observed value is copied. Categorical targets
//! regress each non-reference indicator and match on Euclidean distance
//! between prediction vectors.

use crate::data::ColumnKind;
use crate::error::Result;
use crate::imputers::linear::{fit_linear, predict_with};
use crate::imputers::{draw_from_nearest, ImputerConfig, Target};
use crate::rng::Rng;

pub(crate) fn impute(t: &Target<'_>, cfg: &ImputerConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    t.require_donors(cfg.donors)?;
    let obs = t.observed_rows();
    let mis = t.missing_rows();
    let x_obs = t.predictors.select_rows(&obs);
    let x_mis = t.predictors.select_rows(&mis);

    let responses: Vec<Vec<f64>> = match t.kind {
        ColumnKind::Categorical => (1..t.n_categories)
            .map(|k| {
                obs.iter()
                    .map(|&i| if t.values[i] == k as f64 { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect(),
        _ => vec![obs.iter().map(|&i| t.values[i]).collect()],
    };

    // pred_obs[r][i], pred_mis[r][j] for response r
    let mut pred_obs = Vec::with_capacity(responses.len());
    let mut pred_mis = Vec::with_capacity(responses.len());
    for y in &responses {
        let fit = fit_linear(y, &x_obs)?;
        let (beta_star, _) = fit.draw_posterior(rng);
        pred_obs.push(fit.predict(&x_obs));
        pred_mis.push(
            (0..mis.len())
                .map(|j| predict_with(&beta_star, &x_mis, j))
                .collect::<Vec<f64>>(),
        );
    }

    let mut out = Vec::with_capacity(mis.len());
    let mut dist = vec![0.0; obs.len()];
    for j in 0..mis.len() {
        for (i, d) in dist.iter_mut().enumerate() {
            *d = if pred_obs.len() == 1 {
                (pred_mis[0][j] - pred_obs[0][i]).abs()
            } else {
                pred_obs
                    .iter()
                    .zip(&pred_mis)
                    .map(|(po, pm)| (pm[j] - po[i]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
        }
        let donor = draw_from_nearest(&dist, cfg.donors, rng);
        out.push(t.values[obs[donor]]);
    }
    Ok(out)
}
