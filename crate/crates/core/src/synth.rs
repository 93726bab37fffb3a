//! Synthetic benchmark with both potential outcomes known.
//!
//! Papers are assigned to venue −1 or +1 with probability ½, covariates are
//! drawn as `x ~ N(t·offset·1, 4I)` and each venue's outcome is
//! `y(t) = exp(0.01 xᵀA_t x + b_tᵀx)` with `A_t`, `b_t` uniform on [0, 1).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split, Covariates, Dataset, Record, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{render, Summary};
use crate::learners::{rank_venues, train_with_propensity, TargetTransform, TrainConfig, TrainedModel};
use crate::propensity::fit_propensity;
use crate::eval::Method;
use crate::rng::substream;

pub const VENUES: [&str; 2] = ["-1", "+1"];
const SIGNS: [f64; 2] = [-1.0, 1.0];
const COVARIATE_STD: f64 = 2.0;
const QUADRATIC_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub d: usize,
    /// Venue-dependent shift of the covariate mean.
    pub mean_offset: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n: 10_000,
            d: 16,
            mean_offset: 1.0,
            seed: 0,
        }
    }
}

/// Outcome law of one venue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueLaw {
    /// Row-major d×d.
    pub cross_terms: Vec<f64>,
    pub linear_terms: Vec<f64>,
}

impl VenueLaw {
    pub fn exponent(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut quad = 0.0;
        for i in 0..d {
            let row = &self.cross_terms[i * d..(i + 1) * d];
            quad += x[i] * row.iter().zip(x).map(|(a, xj)| a * xj).sum::<f64>();
        }
        QUADRATIC_SCALE * quad + self.linear_terms.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>()
    }

    pub fn outcome(&self, x: &[f64]) -> f64 {
        self.exponent(x).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub id: String,
    pub x: Vec<f64>,
    /// Index into [`VENUES`].
    pub t: usize,
    /// Potential outcomes in [`VENUES`] order.
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSet {
    pub params: SynthParams,
    pub laws: [VenueLaw; 2],
    pub instances: Vec<SyntheticInstance>,
}

fn uniform_vec(seed: u64, purpose: &str, len: usize) -> Vec<f64> {
    let mut rng = substream(seed, purpose, 0);
    (0..len).map(|_| rng.random::<f64>()).collect()
}

pub fn venue_laws(seed: u64, d: usize) -> [VenueLaw; 2] {
    let law = |v: usize| VenueLaw {
        cross_terms: uniform_vec(seed, &format!("synth-cross/{}", VENUES[v]), d * d),
        linear_terms: uniform_vec(seed, &format!("synth-linear/{}", VENUES[v]), d),
    };
    [law(0), law(1)]
}

pub fn generate(params: &SynthParams) -> Result<SyntheticSet> {
    if params.n == 0 || params.d == 0 {
        return Err(Error::Config("synthetic benchmark needs n ≥ 1 and d ≥ 1".into()));
    }
    let laws = venue_laws(params.seed, params.d);
    let instances = (0..params.n)
        .into_par_iter()
        .map(|i| {
            let t = usize::from(substream(params.seed, "synth-assignment", i as u64).random_bool(0.5));
            let mut rng = substream(params.seed, "synth-covariates", i as u64);
            let mean = SIGNS[t] * params.mean_offset;
            let x: Vec<f64> = (0..params.d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + COVARIATE_STD * z
                })
                .collect();
            let y = [laws[0].outcome(&x), laws[1].outcome(&x)];
            SyntheticInstance {
                id: format!("{i:06}"),
                x,
                t,
                y,
            }
        })
        .collect();
    Ok(SyntheticSet {
        params: *params,
        laws,
        instances,
    })
}

impl SyntheticSet {
    /// Learner-facing dataset: covariates, factual venue and factual outcome.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let records = self
            .instances
            .iter()
            .map(|s| Record {
                id: s.id.clone(),
                features: Covariates::Dense(s.x.clone()),
                venue: s.t,
                outcome: s.y[s.t],
            })
            .collect();
        Dataset::new(
            Vocabulary::dense(self.params.d),
            VENUES.iter().map(|v| v.to_string()).collect(),
            records,
        )
    }

    pub fn by_id(&self) -> BTreeMap<&str, &SyntheticInstance> {
        self.instances.iter().map(|s| (s.id.as_str(), s)).collect()
    }
}

fn resolve<'a>(recommendations: &BTreeMap<String, usize>, instances: &'a [SyntheticInstance]) -> Result<Vec<(&'a SyntheticInstance, usize)>> {
    if instances.is_empty() {
        return Err(Error::InvalidInput("no instances to score".into()));
    }
    instances
        .iter()
        .map(|s| match recommendations.get(&s.id) {
            Some(&r) if r < VENUES.len() => Ok((s, r)),
            Some(&r) => Err(Error::UnknownVenue(format!("#{r}"))),
            None => Err(Error::InvalidInput(format!("no recommendation for instance {}", s.id))),
        })
        .collect()
}

/// Share of instances whose recommended venue attains the larger outcome;
/// ties count as correct.
pub fn counterfactual_accuracy(recommendations: &BTreeMap<String, usize>, instances: &[SyntheticInstance]) -> Result<f64> {
    let pairs = resolve(recommendations, instances)?;
    let hits = pairs
        .iter()
        .filter(|(s, r)| s.y[*r] >= s.y[0].max(s.y[1]))
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

pub fn average_outcome(recommendations: &BTreeMap<String, usize>, instances: &[SyntheticInstance]) -> Result<f64> {
    let pairs = resolve(recommendations, instances)?;
    Ok(pairs.iter().map(|(s, r)| s.y[*r]).sum::<f64>() / pairs.len() as f64)
}

pub fn oracle_recommendations(instances: &[SyntheticInstance]) -> BTreeMap<String, usize> {
    instances
        .iter()
        .map(|s| (s.id.clone(), usize::from(s.y[1] > s.y[0])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub params: SynthParams,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub train: TrainConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            params: SynthParams::default(),
            seeds: (0..10).collect(),
            train_fraction: 0.7,
            train: TrainConfig {
                target_transform: TargetTransform::Log,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedScore {
    pub seed: u64,
    pub accuracy: f64,
    pub average_outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub accuracy: Summary,
    pub average_outcome: Summary,
    pub per_seed: Vec<SeedScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoreboard {
    pub config: BenchConfig,
    /// Scored on the held-out test instances of each seed's split.
    pub rows: Vec<BenchRow>,
}

impl Scoreboard {
    pub fn row(&self, method: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![vec!["method".to_string(), "accuracy".into(), "average outcome".into()]];
        for r in &self.rows {
            rows.push(vec![
                r.method.clone(),
                format!("{:.4} ± {:.4}", r.accuracy.mean, r.accuracy.std),
                format!("{:.4e} ± {:.4e}", r.average_outcome.mean, r.average_outcome.std),
            ]);
        }
        render(&rows)
    }
}

pub const ORACLE: &str = "oracle";

fn learner_recommendations(model: &TrainedModel, test: &Dataset) -> BTreeMap<String, usize> {
    test.records
        .iter()
        .map(|r| (r.id.clone(), rank_venues(&model.predict_view(r.features.view()))[0]))
        .collect()
}

/// Scores of every method on one seed: generate, split, train, recommend on
/// the test instances.
pub fn bench_seed(config: &BenchConfig, seed: u64) -> Result<Vec<(String, SeedScore)>> {
    let set = generate(&SynthParams { seed, ..config.params })?;
    let (train, test) = stratified_split(&set.to_dataset()?, config.train_fraction, seed)?;
    let by_id = set.by_id();
    let test_instances: Vec<SyntheticInstance> = test.records.iter().map(|r| by_id[r.id.as_str()].clone()).collect();
    let base = TrainConfig { seed, ..config.train.clone() };
    let propensity = fit_propensity(&train, &base.propensity_config())?;

    let mut out = Vec::new();
    let mut score = |name: &str, recs: BTreeMap<String, usize>| -> Result<()> {
        out.push((
            name.to_string(),
            SeedScore {
                seed,
                accuracy: counterfactual_accuracy(&recs, &test_instances)?,
                average_outcome: average_outcome(&recs, &test_instances)?,
            },
        ));
        Ok(())
    };
    for m in Method::ALL {
        let recs = match m.train_config(&base) {
            Some(cfg) => learner_recommendations(&train_with_propensity(&train, &cfg, Some(propensity.clone()))?, &test),
            None => test
                .records
                .iter()
                .map(|r| (r.id.clone(), propensity.logistic.class_order[propensity.logistic.predict_class_position(r.features.view())]))
                .collect(),
        };
        score(m.name(), recs)?;
    }
    score(ORACLE, oracle_recommendations(&test_instances))?;
    Ok(out)
}

pub fn run_bench(config: &BenchConfig) -> Result<Scoreboard> {
    if config.seeds.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    let per_seed = config
        .seeds
        .iter()
        .map(|&s| bench_seed(config, s))
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..per_seed[0].len())
        .map(|k| {
            let scores: Vec<SeedScore> = per_seed.iter().map(|r| r[k].1.clone()).collect();
            let acc: Vec<f64> = scores.iter().map(|s| s.accuracy).collect();
            let avg: Vec<f64> = scores.iter().map(|s| s.average_outcome).collect();
            BenchRow {
                method: per_seed[0][k].0.clone(),
                accuracy: Summary::of(&acc).expect("non-empty"),
                average_outcome: Summary::of(&avg).expect("non-empty"),
                per_seed: scores,
            }
        })
        .collect();
    Ok(Scoreboard {
        config: config.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, y: [f64; 2]) -> SyntheticInstance {
        SyntheticInstance {
            id: id.into(),
            x: vec![0.0],
            t: 0,
            y,
        }
    }

    #[test]
    fn hand_computed_outcome() {
        let law = VenueLaw {
            cross_terms: vec![0.5, 0.25, 0.0, 1.0],
            linear_terms: vec![0.1, 0.2],
        };
        let x = [2.0, -1.0];
        // xᵀAx = 0.5·4 + 0.25·(−2) + 0 + 1·1 = 2.5
        let expected = (0.01 * 2.5 + 0.2 - 0.2f64).exp();
        assert!((law.outcome(&x) - expected).abs() < 1e-15);
    }

    #[test]
    fn oracle_and_anti_oracle() {
        let xs = vec![inst("a", [1.0, 2.0]), inst("b", [3.0, 0.5]), inst("c", [1.0, 1.0])];
        let oracle = oracle_recommendations(&xs);
        assert_eq!(counterfactual_accuracy(&oracle, &xs).unwrap(), 1.0);
        let distinct = &xs[..2];
        let anti: BTreeMap<String, usize> = oracle.iter().map(|(k, v)| (k.clone(), 1 - v)).collect();
        assert_eq!(counterfactual_accuracy(&anti, distinct).unwrap(), 0.0);
        let always_first: BTreeMap<String, usize> = xs.iter().map(|s| (s.id.clone(), 0)).collect();
        assert!((average_outcome(&always_first, &xs).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(average_outcome(&oracle, &xs).unwrap() >= average_outcome(&always_first, &xs).unwrap());
    }

    #[test]
    fn missing_recommendation_is_an_error() {
        let xs = vec![inst("a", [1.0, 2.0])];
        assert!(counterfactual_accuracy(&BTreeMap::new(), &xs).is_err());
    }

    #[test]
    fn laws_do_not_depend_on_n() {
        let a = generate(&SynthParams { n: 10, d: 3, mean_offset: 1.0, seed: 4 }).unwrap();
        let b = generate(&SynthParams { n: 50, d: 3, mean_offset: 1.0, seed: 4 }).unwrap();
        assert_eq!(a.laws, b.laws);
        assert_eq!(a.instances[..], b.instances[..10]);
    }

    #[test]
    fn dataset_hides_counterfactuals() {
        let set = generate(&SynthParams { n: 20, d: 2, mean_offset: 1.0, seed: 1 }).unwrap();
        let ds = set.to_dataset().unwrap();
        for (r, s) in ds.records.iter().zip(&set.instances) {
            assert_eq!(r.outcome, s.y[s.t]);
            assert_eq!(r.venue, s.t);
        }
    }
}
