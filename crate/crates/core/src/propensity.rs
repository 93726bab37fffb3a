//! Venue propensities `P̂[t | x]` and inverse-propensity sample weights.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::grid::default_grid;
use crate::numeric::logistic::fit_multinomial_logistic_from;
use crate::numeric::{fit_multinomial_logistic, DesignMatrix, LogisticOptions, MultinomialLogisticModel, RowView};
use crate::rng::substream;

pub const DEFAULT_CLIP_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityConfig {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub clip_floor: f64,
    pub seed: u64,
    #[serde(default)]
    pub solver: LogisticOptions,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        PropensityConfig {
            c_grid: default_grid(),
            folds: 5,
            clip_floor: DEFAULT_CLIP_FLOOR,
            seed: 0,
            solver: LogisticOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub value: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub logistic: MultinomialLogisticModel,
    pub clip_floor: f64,
    pub selected_c: f64,
    /// Mean held-out log-loss per candidate C.
    pub cv: Vec<CvPoint>,
}

impl PropensityModel {
    /// All-zero logistic model: `1/|T|` for every input.
    pub fn constant(dim: usize, venues: usize, clip_floor: f64) -> Self {
        PropensityModel {
            logistic: MultinomialLogisticModel::zero(dim, (0..venues).collect(), 1.0),
            clip_floor,
            selected_c: 1.0,
            cv: Vec::new(),
        }
    }

    pub fn from_logistic(logistic: MultinomialLogisticModel, clip_floor: f64) -> Result<Self> {
        check_clip_floor(clip_floor, logistic.n_classes())?;
        Ok(PropensityModel {
            selected_c: logistic.inverse_regularization,
            logistic,
            clip_floor,
            cv: Vec::new(),
        })
    }

    pub fn n_venues(&self) -> usize {
        self.logistic.n_classes()
    }
}

fn check_clip_floor(clip_floor: f64, venues: usize) -> Result<()> {
    if !(clip_floor > 0.0 && clip_floor * venues as f64 <= 1.0 + 1e-15) {
        return Err(Error::Config(format!("clip floor must lie in (0, 1/{venues}], got {clip_floor}")));
    }
    Ok(())
}

pub fn fit_propensity(train: &Dataset, config: &PropensityConfig) -> Result<PropensityModel> {
    let venues = train.venues.len();
    check_clip_floor(config.clip_floor, venues)?;
    if config.folds < 2 {
        return Err(Error::Config("propensity CV needs at least 2 folds".into()));
    }
    if config.c_grid.is_empty() || config.c_grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Config("C grid must be non-empty and positive".into()));
    }
    let by_venue = train.indices_by_venue();
    for (v, idx) in by_venue.iter().enumerate() {
        if idx.len() < config.folds {
            return Err(Error::TooFewForFolds {
                venue: train.venues[v].clone(),
                count: idx.len(),
                folds: config.folds,
            });
        }
    }
    let x = train.design_matrix();
    let labels = train.venue_labels();
    let folds = stratified_folds(&by_venue, config.folds, config.seed, "propensity-folds");

    let mut grid = config.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    // losses[fold][c]
    let losses: Vec<Vec<f64>> = (0..config.folds)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let (fit_idx, held_idx) = fold_partition(&folds, k);
            let xf = x.select_rows(&fit_idx);
            let yf: Vec<usize> = fit_idx.iter().map(|&i| labels[i]).collect();
            let xh = x.select_rows(&held_idx);
            let yh: Vec<usize> = held_idx.iter().map(|&i| labels[i]).collect();
            let mut warm: Option<MultinomialLogisticModel> = None;
            let mut out = Vec::with_capacity(grid.len());
            for &c in &grid {
                let m = fit_multinomial_logistic_from(&xf, &yf, c, &config.solver, warm.as_ref())?;
                out.push(m.mean_log_loss(&xh, &yh));
                warm = Some(m);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let cv: Vec<CvPoint> = grid
        .iter()
        .enumerate()
        .map(|(j, &c)| CvPoint {
            value: c,
            score: losses.iter().map(|l| l[j]).sum::<f64>() / config.folds as f64,
        })
        .collect();
    // Ties go to the smaller C (stronger regularization).
    let best = cv
        .iter()
        .fold(cv[0], |best, p| if p.score < best.score { *p } else { best });
    let logistic = fit_multinomial_logistic(&x, &labels, best.value, &config.solver)?;
    if logistic.class_order != (0..venues).collect::<Vec<_>>() {
        return Err(Error::InvalidInput("every venue must appear in the training data".into()));
    }
    if !logistic.fit.converged {
        log::warn!(
            "propensity model stopped after {} iterations with gradient norm {:.3e}",
            logistic.fit.iterations,
            logistic.fit.gradient_norm
        );
    }
    Ok(PropensityModel {
        logistic,
        clip_floor: config.clip_floor,
        selected_c: best.value,
        cv,
    })
}

/// Assign fold ids per stratum after a seeded shuffle: the j-th shuffled row
/// of each stratum lands in fold `j mod k`. Returns rows per fold, sorted.
pub fn stratified_folds(strata: &[Vec<usize>], k: usize, seed: u64, purpose: &str) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    for (s, idx) in strata.iter().enumerate() {
        let mut idx = idx.clone();
        idx.shuffle(&mut substream(seed, purpose, s as u64));
        for (j, i) in idx.into_iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

/// (training rows, held-out rows) for fold `k`.
pub fn fold_partition(folds: &[Vec<usize>], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut fit: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    fit.sort_unstable();
    (fit, folds[k].clone())
}

/// Raise every probability to at least `floor` while keeping the total at 1:
/// entries that would fall below the floor are pinned to it and the rest are
/// rescaled proportionally.
pub fn clip_probabilities(p: &[f64], floor: f64) -> Vec<f64> {
    let k = p.len();
    let mut pinned = vec![false; k];
    loop {
        let free_mass: f64 = p.iter().zip(&pinned).filter(|(_, &f)| !f).map(|(v, _)| v).sum();
        let budget = 1.0 - floor * pinned.iter().filter(|&&f| f).count() as f64;
        if free_mass <= 0.0 {
            return vec![1.0 / k as f64; k].iter().map(|v| v.max(floor)).collect();
        }
        let scale = budget / free_mass;
        let mut changed = false;
        for i in 0..k {
            if !pinned[i] && p[i] * scale < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            return p
                .iter()
                .zip(&pinned)
                .map(|(&v, &f)| if f { floor } else { v * scale })
                .collect();
        }
    }
}

/// Clipped propensities over all venues, in venue order.
pub fn propensity_of(model: &PropensityModel, x: RowView<'_>) -> Vec<f64> {
    clip_probabilities(&model.logistic.predict_proba(x), model.clip_floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights(pub Vec<f64>);

impl SampleWeights {
    pub fn uniform(n: usize) -> Self {
        SampleWeights(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn select(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.0[i]).collect()
    }
}

/// `w_i = 1 / P̂[t_i | x_i]` using clipped propensities.
pub fn ipw_weights(model: &PropensityModel, train: &Dataset) -> Result<SampleWeights> {
    if model.logistic.dim() != train.vocabulary.len() || model.n_venues() != train.venues.len() {
        return Err(Error::InvalidInput("propensity model does not match the dataset's feature space".into()));
    }
    Ok(SampleWeights(
        train
            .records
            .iter()
            .map(|r| 1.0 / propensity_of(model, r.features.view())[r.venue])
            .collect(),
    ))
}

/// Weights for the rows of an already-built design matrix.
pub fn ipw_weights_for(model: &PropensityModel, x: &DesignMatrix, venues: &[usize]) -> SampleWeights {
    SampleWeights(
        (0..x.n_rows())
            .map(|i| 1.0 / propensity_of(model, x.row(i))[venues[i]])
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_pins_small_entries() {
        let p = clip_probabilities(&[1e-6, 0.3, 0.7 - 1e-6], 1e-3);
        assert_eq!(p[0], 1e-3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 1e-3));
        assert!((p[1] / p[2] - 0.3 / (0.7 - 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn clipping_leaves_comfortable_vectors_alone() {
        let p = clip_probabilities(&[0.2, 0.3, 0.5], 1e-3);
        assert_eq!(p, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn clip_cascade_reaches_a_fixed_point() {
        // Rescaling after pinning the first entry pushes the second below the floor.
        let p = clip_probabilities(&[0.0, 0.0999, 0.9001], 0.1);
        assert!(p.iter().all(|&v| v >= 0.1 - 1e-15));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_model_is_uniform() {
        let m = PropensityModel::constant(3, 4, 1e-3);
        let p = propensity_of(&m, RowView::SparseBinary(&[0, 2]));
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn two_venue_model_matches_sigmoid() {
        let mut logistic = MultinomialLogisticModel::zero(1, vec![0, 1], 1.0);
        logistic.class_weights = vec![vec![0.8], vec![-0.4]];
        logistic.class_intercepts = vec![0.1, -0.1];
        let m = PropensityModel::from_logistic(logistic, 1e-3).unwrap();
        let x = [1.5];
        let z = (0.1 + 0.8 * 1.5) - (-0.1 - 0.4 * 1.5);
        let sig = 1.0 / (1.0 + (-z as f64).exp());
        let p = propensity_of(&m, RowView::Dense(&x));
        assert!((p[0] - sig).abs() < 1e-15);
        assert!((p[1] - (1.0 - sig)).abs() < 1e-15);
    }

    #[test]
    fn clip_floor_is_validated() {
        let l = MultinomialLogisticModel::zero(1, vec![0, 1], 1.0);
        assert!(PropensityModel::from_logistic(l.clone(), 0.0).is_err());
        assert!(PropensityModel::from_logistic(l.clone(), 0.6).is_err());
        assert!(PropensityModel::from_logistic(l, 0.5).is_ok());
    }

    #[test]
    fn folds_partition_each_stratum() {
        let strata = vec![(0..7).collect::<Vec<_>>(), (7..12).collect()];
        let folds = stratified_folds(&strata, 3, 1, "t");
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
        for f in &folds {
            assert!(f.iter().any(|&i| i < 7) && f.iter().any(|&i| i >= 7));
        }
        let (fit, held) = fold_partition(&folds, 0);
        assert_eq!(fit.len() + held.len(), 12);
    }
}
