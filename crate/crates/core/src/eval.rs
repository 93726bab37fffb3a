//! Factual evaluation: Spearman correlation between model scores and observed
//! citations on held-out papers, repeated over seeded splits.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::learners::{train_with_propensity, LearnerKind, TrainConfig, TrainedModel, Weighting};
use crate::numeric::{spearman, MultinomialLogisticModel, RowView};
use crate::propensity::fit_propensity;

/// Fewer test papers than this and a venue's correlation is not reported.
pub const MIN_PAPERS_FOR_RHO: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Summary {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

/// `P̂[venue | x]` under an association model.
pub fn score_association(model: &MultinomialLogisticModel, x: RowView<'_>, venue: usize) -> Result<f64> {
    let k = model
        .class_order
        .iter()
        .position(|&c| c == venue)
        .ok_or_else(|| Error::UnknownVenue(format!("#{venue}")))?;
    Ok(model.predict_proba(x)[k])
}

/// Model score of every test paper at its factual venue.
pub fn factual_scores(model: &TrainedModel, test: &Dataset) -> Result<Vec<f64>> {
    let test = aligned(test, model)?;
    Ok(test
        .records
        .iter()
        .map(|r| model.predict_view(r.features.view())[r.venue])
        .collect())
}

pub fn association_scores(model: &MultinomialLogisticModel, test: &Dataset) -> Result<Vec<f64>> {
    test.records
        .iter()
        .map(|r| score_association(model, r.features.view(), r.venue))
        .collect()
}

fn aligned(test: &Dataset, model: &TrainedModel) -> Result<Dataset> {
    if test.venues != model.venues {
        return Err(Error::InvalidInput("test venues differ from the model's venues".into()));
    }
    if test.vocabulary == model.vocabulary {
        Ok(test.clone())
    } else {
        Ok(test.project_onto(&model.vocabulary))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvaluation {
    /// `None` when the venue had too few test papers or constant ranks.
    pub per_venue_rho: BTreeMap<String, Option<f64>>,
    pub total_rho: Option<f64>,
    pub omitted: Vec<String>,
}

/// Per-venue and pooled Spearman ρ between `scores` and the test outcomes.
pub fn evaluate_factual(scores: &[f64], test: &Dataset) -> Result<SplitEvaluation> {
    if scores.len() != test.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} test papers",
            scores.len(),
            test.len()
        )));
    }
    let outcomes = test.outcomes();
    let rho = |idx: &[usize]| -> Option<f64> {
        if idx.len() < MIN_PAPERS_FOR_RHO {
            return None;
        }
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| outcomes[i]).collect();
        spearman(&s, &y).ok()
    };
    let mut per_venue_rho = BTreeMap::new();
    let mut omitted = Vec::new();
    for (v, idx) in test.indices_by_venue().iter().enumerate() {
        let r = rho(idx);
        if r.is_none() {
            log::warn!("venue {}: correlation omitted ({} test papers)", test.venues[v], idx.len());
            omitted.push(test.venues[v].clone());
        }
        per_venue_rho.insert(test.venues[v].clone(), r);
    }
    let all: Vec<usize> = (0..test.len()).collect();
    Ok(SplitEvaluation {
        per_venue_rho,
        total_rho: rho(&all),
        omitted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub seeds: Vec<u64>,
    pub per_venue_rho: BTreeMap<String, Option<Summary>>,
    pub total_rho: Option<Summary>,
    pub runs: Vec<SplitEvaluation>,
}

impl EvalReport {
    pub fn aggregate(method: impl Into<String>, seeds: Vec<u64>, runs: Vec<SplitEvaluation>) -> Self {
        let mut venues: Vec<String> = runs.iter().flat_map(|r| r.per_venue_rho.keys().cloned()).collect();
        venues.sort();
        venues.dedup();
        let per_venue_rho = venues
            .into_iter()
            .map(|v| {
                let vals: Vec<f64> = runs.iter().filter_map(|r| r.per_venue_rho.get(&v).copied().flatten()).collect();
                (v, Summary::of(&vals))
            })
            .collect();
        let totals: Vec<f64> = runs.iter().filter_map(|r| r.total_rho).collect();
        EvalReport {
            method: method.into(),
            seeds,
            total_rho: Summary::of(&totals),
            per_venue_rho,
            runs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TIpw,
    TUniform,
    SIpw,
    LogisticAssociation,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TIpw, Method::TUniform, Method::SIpw, Method::LogisticAssociation];

    pub fn name(self) -> &'static str {
        match self {
            Method::TIpw => "t-ipw",
            Method::TUniform => "t-uniform",
            Method::SIpw => "s-ipw",
            Method::LogisticAssociation => "logistic-association",
        }
    }

    /// Training configuration of a learner method; `None` for the baseline.
    pub fn train_config(self, base: &TrainConfig) -> Option<TrainConfig> {
        let (learner, weighting) = match self {
            Method::TIpw => (LearnerKind::T, Weighting::Ipw),
            Method::TUniform => (LearnerKind::T, Weighting::Uniform),
            Method::SIpw => (LearnerKind::S, Weighting::Ipw),
            Method::LogisticAssociation => return None,
        };
        Some(TrainConfig {
            learner,
            weighting,
            ..base.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub venues: Vec<String>,
    pub train_fraction: f64,
    /// Every seed re-runs the split, the propensity CV and the ridge CV.
    pub retuned_per_seed: bool,
    pub reports: Vec<EvalReport>,
}

/// Split, train every method and score the factual test outcomes, for each seed.
pub fn eval_suite(dataset: &Dataset, seeds: &[u64], train_fraction: f64, base: &TrainConfig) -> Result<SuiteReport> {
    let per_seed = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<SplitEvaluation>> {
            let (train, test) = stratified_split(dataset, train_fraction, seed)?;
            let base = TrainConfig { seed, ..base.clone() };
            let propensity = fit_propensity(&train, &base.propensity_config())?;
            Method::ALL
                .iter()
                .map(|&m| {
                    let scores = match m.train_config(&base) {
                        Some(cfg) => factual_scores(&train_with_propensity(&train, &cfg, Some(propensity.clone()))?, &test)?,
                        None => association_scores(&propensity.logistic, &test)?,
                    };
                    evaluate_factual(&scores, &test)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = Method::ALL
        .iter()
        .enumerate()
        .map(|(k, m)| EvalReport::aggregate(m.name(), seeds.to_vec(), per_seed.iter().map(|r| r[k].clone()).collect()))
        .collect();
    Ok(SuiteReport {
        venues: dataset.venues.clone(),
        train_fraction,
        retuned_per_seed: true,
        reports,
    })
}

fn cell(s: Option<Summary>, best: Option<Summary>) -> String {
    match s {
        None => "n/a".to_string(),
        Some(s) => {
            let star = best.is_some_and(|b| s.mean >= b.mean - b.std);
            format!("{:.3} ± {:.3}{}", s.mean, s.std, if star { "*" } else { "" })
        }
    }
}

fn best(column: impl Iterator<Item = Option<Summary>>) -> Option<Summary> {
    column.flatten().max_by(|a, b| a.mean.total_cmp(&b.mean))
}

/// Methods × (venues, total) table of mean ± std; `*` marks entries within
/// one standard deviation of the column's best mean.
pub fn suite_table(suite: &SuiteReport) -> String {
    let mut header = vec!["method".to_string()];
    header.extend(suite.venues.iter().cloned());
    header.push("total".into());
    let mut rows = vec![header];
    let venue_best: Vec<Option<Summary>> = suite
        .venues
        .iter()
        .map(|v| best(suite.reports.iter().map(|r| r.per_venue_rho.get(v).copied().flatten())))
        .collect();
    let total_best = best(suite.reports.iter().map(|r| r.total_rho));
    for r in &suite.reports {
        let mut row = vec![r.method.clone()];
        for (v, b) in suite.venues.iter().zip(&venue_best) {
            row.push(cell(r.per_venue_rho.get(v).copied().flatten(), *b));
        }
        row.push(cell(r.total_rho, total_best));
        rows.push(row);
    }
    render(&rows)
}

pub(crate) fn render(rows: &[Vec<String>]) -> String {
    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| {
                let pad = w - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
