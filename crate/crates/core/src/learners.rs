//! Meta-learners over weighted ridge base learners.
//!
//! The T-learner fits one ridge model per venue on that venue's papers; the
//! S-learner fits a single model on the pooled papers with a one-hot venue
//! indicator appended. Both weight each training paper by the inverse of its
//! estimated venue propensity unless uniform weighting is requested; each
//! ridge fit sees the weights of its rows rescaled to mean one. The
//! recommended venue is the one with the largest predicted potential outcome.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Covariates, Dataset, FeatureVector, Vocabulary};
use crate::error::{Error, Result};
use crate::grid::default_grid;
use crate::numeric::{fit_weighted_ridge, fit_weighted_ridge_path, DesignMatrix, LinearModel, LogisticOptions, RowView};
use crate::propensity::{
    fit_propensity, fold_partition, ipw_weights_for, stratified_folds, CvPoint, PropensityConfig, PropensityModel,
    SampleWeights, DEFAULT_CLIP_FLOOR,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    T,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Ipw,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetTransform {
    /// `log(1 + y)`; defined for zero counts.
    Log1p,
    /// `log(y)`; needs strictly positive outcomes.
    Log,
}

impl TargetTransform {
    pub fn forward(self, y: f64) -> Result<f64> {
        match self {
            TargetTransform::Log1p if y >= 0.0 => Ok(y.ln_1p()),
            TargetTransform::Log if y > 0.0 => Ok(y.ln()),
            _ => Err(Error::InvalidInput(format!("outcome {y} outside the domain of {self:?}"))),
        }
    }

    pub fn inverse(self, score: f64) -> f64 {
        match self {
            TargetTransform::Log1p => score.exp_m1(),
            TargetTransform::Log => score.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learner: LearnerKind,
    pub weighting: Weighting,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub target_transform: TargetTransform,
    pub seed: u64,
    /// Candidate inverse regularization strengths for the propensity model.
    pub c_grid: Vec<f64>,
    pub clip_floor: f64,
    #[serde(default)]
    pub solver: LogisticOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learner: LearnerKind::T,
            weighting: Weighting::Ipw,
            lambda_grid: default_grid(),
            cv_folds: 5,
            target_transform: TargetTransform::Log1p,
            seed: 0,
            c_grid: default_grid(),
            clip_floor: DEFAULT_CLIP_FLOOR,
            solver: LogisticOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn propensity_config(&self) -> PropensityConfig {
        PropensityConfig {
            c_grid: self.c_grid.clone(),
            folds: self.cv_folds,
            clip_floor: self.clip_floor,
            seed: self.seed,
            solver: self.solver.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        if self.lambda_grid.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("lambda grid values must be non-negative".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseLearners {
    /// One model per venue, in venue order.
    T { models: Vec<LinearModel> },
    /// Weights cover the features followed by one indicator per venue.
    S { model: LinearModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    /// Venue the search was run for; `None` for the pooled S-learner.
    pub venue: Option<String>,
    pub curve: Vec<CvPoint>,
    pub selected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub lambda_search: Vec<LambdaSearch>,
    /// Weighted training loss of each final base learner (per venue for T).
    pub training_loss: BTreeMap<String, f64>,
    pub min_norm_fits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub venues: Vec<String>,
    pub vocabulary: Vocabulary,
    pub config: TrainConfig,
    pub base_learners: BaseLearners,
    pub propensity: Option<PropensityModel>,
    pub per_venue_lambda: BTreeMap<String, f64>,
    pub diagnostics: TrainDiagnostics,
    pub dataset_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// Predicted score on the transformed (log) scale.
    pub scores: BTreeMap<String, f64>,
    pub predicted_citations: BTreeMap<String, f64>,
    pub recommended: String,
    pub ranking: Vec<String>,
}

/// `(1/n) Σ w_i r_i²`
pub fn compute_ipw_loss(residuals: &[f64], weights: &[f64]) -> Result<f64> {
    if residuals.is_empty() || residuals.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "loss needs equal non-empty inputs (got {} residuals, {} weights)",
            residuals.len(),
            weights.len()
        )));
    }
    let total: f64 = residuals.iter().zip(weights).map(|(r, w)| w * r * r).sum();
    Ok(total / residuals.len() as f64)
}

pub fn train(train: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    train_with_propensity(train, config, None)
}

/// As [`train`], reusing an already fitted propensity model for IPW weights.
pub fn train_with_propensity(train: &Dataset, config: &TrainConfig, propensity: Option<PropensityModel>) -> Result<TrainedModel> {
    config.validate()?;
    let by_venue = train.indices_by_venue();
    for (v, idx) in by_venue.iter().enumerate() {
        if idx.len() < config.cv_folds {
            return Err(Error::TooFewForFolds {
                venue: train.venues[v].clone(),
                count: idx.len(),
                folds: config.cv_folds,
            });
        }
    }
    let targets = train
        .records
        .iter()
        .map(|r| config.target_transform.forward(r.outcome))
        .collect::<Result<Vec<_>>>()?;
    let x = train.design_matrix();
    let labels = train.venue_labels();

    let (propensity, weights) = match config.weighting {
        Weighting::Uniform => (None, SampleWeights::uniform(train.len())),
        Weighting::Ipw => {
            let model = match propensity {
                Some(m) => m,
                None => fit_propensity(train, &config.propensity_config())?,
            };
            if model.logistic.dim() != x.n_cols() || model.n_venues() != train.venues.len() {
                return Err(Error::InvalidInput("propensity model does not match the training data".into()));
            }
            let w = ipw_weights_for(&model, &x, &labels);
            (Some(model), w)
        }
    };

    let mut lambda_grid = config.lambda_grid.clone();
    lambda_grid.sort_by(f64::total_cmp);
    lambda_grid.dedup();

    let mut per_venue_lambda = BTreeMap::new();
    let mut training_loss = BTreeMap::new();
    let mut lambda_search = Vec::new();
    let mut min_norm_fits = 0;

    let base_learners = match config.learner {
        LearnerKind::T => {
            let fits = by_venue
                .par_iter()
                .enumerate()
                .map(|(v, idx)| {
                    let xv = x.select_rows(idx);
                    let yv: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
                    let wv = weights.select(idx);
                    let folds = stratified_folds(&[(0..idx.len()).collect()], config.cv_folds, config.seed, &format!("ridge-folds/{v}"));
                    fit_with_cv(&xv, &yv, &wv, &lambda_grid, &folds)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut models = Vec::with_capacity(fits.len());
            for (v, fit) in fits.into_iter().enumerate() {
                let name = train.venues[v].clone();
                per_venue_lambda.insert(name.clone(), fit.selected);
                training_loss.insert(name.clone(), fit.training_loss);
                min_norm_fits += usize::from(fit.min_norm);
                lambda_search.push(LambdaSearch {
                    venue: Some(name),
                    curve: fit.curve,
                    selected: fit.selected,
                });
                models.push(fit.model);
            }
            BaseLearners::T { models }
        }
        LearnerKind::S => {
            let xs = x.with_one_hot(&labels, train.venues.len());
            let folds = stratified_folds(&by_venue, config.cv_folds, config.seed, "ridge-folds/pooled");
            let fit = fit_with_cv(&xs, &targets, weights.as_slice(), &lambda_grid, &folds)?;
            for v in &train.venues {
                per_venue_lambda.insert(v.clone(), fit.selected);
            }
            training_loss.insert("pooled".to_string(), fit.training_loss);
            min_norm_fits += usize::from(fit.min_norm);
            lambda_search.push(LambdaSearch {
                venue: None,
                curve: fit.curve,
                selected: fit.selected,
            });
            BaseLearners::S { model: fit.model }
        }
    };

    Ok(TrainedModel {
        venues: train.venues.clone(),
        vocabulary: train.vocabulary.clone(),
        config: config.clone(),
        base_learners,
        propensity,
        per_venue_lambda,
        diagnostics: TrainDiagnostics {
            lambda_search,
            training_loss,
            min_norm_fits,
        },
        dataset_fingerprint: crate::store::fingerprint(train)?,
    })
}

struct CvFit {
    model: LinearModel,
    curve: Vec<CvPoint>,
    selected: f64,
    training_loss: f64,
    min_norm: bool,
}

/// `w` scaled to mean one, so that only relative weights reach the ridge fit.
pub fn unit_mean(w: &[f64]) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|v| v / mean).collect()
}

/// Pick λ by mean held-out weighted MSE (ties toward the larger λ), then refit
/// on all rows.
fn fit_with_cv(x: &DesignMatrix, y: &[f64], w: &[f64], grid: &[f64], folds: &[Vec<usize>]) -> Result<CvFit> {
    let per_fold = (0..folds.len())
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let (fit_idx, held_idx) = fold_partition(folds, k);
            let xf = x.select_rows(&fit_idx);
            let yf: Vec<f64> = fit_idx.iter().map(|&i| y[i]).collect();
            let wf: Vec<f64> = fit_idx.iter().map(|&i| w[i]).collect();
            let path = fit_weighted_ridge_path(&xf, &yf, &unit_mean(&wf), grid)?;
            let wh: Vec<f64> = held_idx.iter().map(|&i| w[i]).collect();
            path.iter()
                .map(|fit| {
                    let residuals: Vec<f64> = held_idx.iter().map(|&i| y[i] - fit.model.predict_row(x.row(i))).collect();
                    compute_ipw_loss(&residuals, &wh)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let curve: Vec<CvPoint> = grid
        .iter()
        .enumerate()
        .map(|(j, &l)| CvPoint {
            value: l,
            score: per_fold.iter().map(|f| f[j]).sum::<f64>() / folds.len() as f64,
        })
        .collect();
    let best = select_lambda(&curve);
    let fit = fit_weighted_ridge(x, y, &unit_mean(w), best)?;
    let residuals: Vec<f64> = (0..x.n_rows()).map(|i| y[i] - fit.model.predict_row(x.row(i))).collect();
    Ok(CvFit {
        training_loss: compute_ipw_loss(&residuals, w)?,
        min_norm: fit.min_norm,
        model: fit.model,
        curve,
        selected: best,
    })
}

/// Minimum score; among equal scores the largest λ.
pub fn select_lambda(curve: &[CvPoint]) -> f64 {
    let mut best = curve[0];
    for p in &curve[1..] {
        if p.score < best.score || (p.score == best.score && p.value > best.value) {
            best = *p;
        }
    }
    best.value
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn venue_index(&self, venue: &str) -> Result<usize> {
        self.venues
            .iter()
            .position(|v| v == venue)
            .ok_or_else(|| Error::UnknownVenue(venue.to_string()))
    }

    /// Bag-of-fields query vector; unknown field names are returned separately.
    pub fn featurize<S: AsRef<str>>(&self, fields: &[S]) -> (FeatureVector, Vec<String>) {
        self.vocabulary.project_fields(fields)
    }

    /// Potential-outcome scores `μ̂_t(x)` on the transformed scale, in venue order.
    pub fn predict_outcomes(&self, x: &Covariates) -> Result<Vec<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "query has dimension {}, model expects {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(self.predict_view(x.view()))
    }

    pub fn predict_view(&self, x: RowView<'_>) -> Vec<f64> {
        match &self.base_learners {
            BaseLearners::T { models } => models.iter().map(|m| m.predict_row(x)).collect(),
            BaseLearners::S { model } => {
                let d = self.dim();
                let shared = model.intercept + x.dot(&model.weights[..d]);
                (0..self.venues.len()).map(|t| shared + model.weights[d + t]).collect()
            }
        }
    }

    pub fn recommend(&self, x: &Covariates) -> Result<Recommendation> {
        let scores = self.predict_outcomes(x)?;
        Ok(recommend_from_scores(&self.venues, &scores, self.config.target_transform))
    }

    /// The `top_k` largest coefficients of `venue`'s base learner (the shared
    /// feature block for an S-learner), largest first.
    pub fn coefficients(&self, venue: &str, top_k: usize) -> Result<Vec<(String, f64)>> {
        if top_k == 0 {
            return Err(Error::InvalidInput("top_k must be positive".into()));
        }
        let v = self.venue_index(venue)?;
        let d = self.dim();
        let weights = match &self.base_learners {
            BaseLearners::T { models } => &models[v].weights[..],
            BaseLearners::S { model } => &model.weights[..d],
        };
        let mut pairs: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(pairs
            .into_iter()
            .take(top_k)
            .map(|(j, w)| (self.vocabulary.name(j).to_string(), w))
            .collect())
    }

    /// Venue-indicator coefficients of an S-learner.
    pub fn venue_effects(&self) -> Option<Vec<(String, f64)>> {
        match &self.base_learners {
            BaseLearners::S { model } => Some(
                self.venues
                    .iter()
                    .zip(&model.weights[self.dim()..])
                    .map(|(v, w)| (v.clone(), *w))
                    .collect(),
            ),
            BaseLearners::T { .. } => None,
        }
    }

    pub fn intercepts(&self) -> Vec<f64> {
        self.predict_view(RowView::SparseBinary(&[]))
    }
}

/// Argmax recommendation; ties keep the order of `venues`.
pub fn recommend_from_scores(venues: &[String], scores: &[f64], transform: TargetTransform) -> Recommendation {
    let ranking = rank_venues(scores);
    Recommendation {
        scores: venues.iter().cloned().zip(scores.iter().copied()).collect(),
        predicted_citations: venues
            .iter()
            .cloned()
            .zip(scores.iter().map(|&s| transform.inverse(s)))
            .collect(),
        recommended: venues[ranking[0]].clone(),
        ranking: ranking.into_iter().map(|i| venues[i].clone()).collect(),
    }
}

/// Venue positions sorted by score, descending; stable with respect to venue order.
pub fn rank_venues(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn loss_is_weighted_mean_square() {
        assert_eq!(compute_ipw_loss(&[0.0, 0.0, 0.0], &[1.0, 5.0, 2.0]).unwrap(), 0.0);
        assert_eq!(compute_ipw_loss(&[1.0], &[2.0]).unwrap(), 2.0);
        assert!(compute_ipw_loss(&[], &[]).is_err());
        assert!(compute_ipw_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn recommendation_is_argmax_with_stable_ties() {
        let r = recommend_from_scores(&names(&["A", "B", "C"]), &[1.0, 2.0, 0.0], TargetTransform::Log1p);
        assert_eq!(r.recommended, "B");
        assert_eq!(r.ranking, names(&["B", "A", "C"]));
        assert_eq!(r.predicted_citations["B"], 2.0f64.exp_m1());
        let tie = recommend_from_scores(&names(&["A", "B"]), &[1.0, 1.0], TargetTransform::Log1p);
        assert_eq!(tie.recommended, "A");
        let shifted = recommend_from_scores(&names(&["A", "B", "C"]), &[4.5, 5.5, 3.5], TargetTransform::Log1p);
        assert_eq!(shifted.ranking, r.ranking);
    }

    #[test]
    fn lambda_ties_prefer_stronger_penalty() {
        let curve = [
            CvPoint { value: 0.1, score: 2.0 },
            CvPoint { value: 1.0, score: 1.0 },
            CvPoint { value: 10.0, score: 1.0 },
            CvPoint { value: 20.0, score: 3.0 },
        ];
        assert_eq!(select_lambda(&curve), 10.0);
    }

    #[test]
    fn transforms_round_trip() {
        for y in [0.0, 1.0, 37.0] {
            let s = TargetTransform::Log1p.forward(y).unwrap();
            assert!((TargetTransform::Log1p.inverse(s) - y).abs() < 1e-12);
        }
        assert!(TargetTransform::Log.forward(0.0).is_err());
        assert!((TargetTransform::Log.inverse(TargetTransform::Log.forward(5.0).unwrap()) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.lambda_grid.clear();
        assert!(c.validate().is_err());
        let c = TrainConfig { cv_folds: 1, ..TrainConfig::default() };
        assert!(c.validate().is_err());
    }
}
