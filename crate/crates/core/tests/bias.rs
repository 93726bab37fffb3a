mod common;

use venuerec::bias::{mmd2_unbiased, pairwise_bias_report};
use venuerec::dataset::{Covariates, Dataset, Record, Vocabulary};
use venuerec::numeric::{DesignMatrix, KernelSpec};

fn dense_dataset(groups: &[Vec<Vec<f64>>]) -> Dataset {
    let d = groups[0][0].len();
    let mut records = Vec::new();
    for (v, g) in groups.iter().enumerate() {
        for (i, x) in g.iter().enumerate() {
            records.push(Record {
                id: format!("{v}-{i:03}"),
                features: Covariates::Dense(x.clone()),
                venue: v,
                outcome: 0.0,
            });
        }
    }
    let venues = (0..groups.len()).map(|v| format!("V{v}")).collect();
    Dataset::new(Vocabulary::dense(d), venues, records).unwrap()
}

fn sample(seed: u64, n: usize, mean: f64) -> Vec<Vec<f64>> {
    let mut r = common::rng(seed);
    (0..n).map(|_| common::normal_vec(&mut r, 3, mean, 1.0)).collect()
}

#[test]
fn estimator_is_exactly_symmetric() {
    for seed in 0..50 {
        let a = DesignMatrix::from_dense_rows(&sample(seed, 15, 0.0)).unwrap();
        let b = DesignMatrix::from_dense_rows(&sample(seed + 100, 12, 0.3)).unwrap();
        let k = KernelSpec::gaussian(1.3).unwrap();
        assert_eq!(mmd2_unbiased(&a, &b, &k).unwrap(), mmd2_unbiased(&b, &a, &k).unwrap());
    }
}

#[test]
fn fifteen_and_twelve_points_match_the_oracle() {
    let a = sample(1, 15, 0.0);
    let b = sample(2, 12, 1.0);
    let got = mmd2_unbiased(
        &DesignMatrix::from_dense_rows(&a).unwrap(),
        &DesignMatrix::from_dense_rows(&b).unwrap(),
        &KernelSpec::gaussian(2.0).unwrap(),
    )
    .unwrap();
    assert!((got - common::mmd2_oracle(&a, &b, 2.0)).abs() < 1e-12);
}

#[test]
fn identical_venues_are_not_significant() {
    let g = sample(3, 25, 0.0);
    let report = pairwise_bias_report(&dense_dataset(&[g.clone(), g]), 500, 0.01, 0).unwrap();
    let r = report.pairs().next().unwrap();
    assert!(r.p_value > 0.5, "p = {}", r.p_value);
    assert!(!report.significant(r));
}

#[test]
fn three_venues_give_three_pairs() {
    let ds = dense_dataset(&[sample(4, 20, 0.0), sample(5, 20, 0.0), sample(6, 20, 3.0)]);
    let report = pairwise_bias_report(&ds, 200, 0.01, 7).unwrap();
    assert_eq!(report.pairs().count(), 3);
    let names: Vec<(String, String)> = report.pairs().map(|r| r.venue_pair.clone().unwrap()).collect();
    assert_eq!(
        names,
        vec![
            ("V1".to_string(), "V0".to_string()),
            ("V2".to_string(), "V0".to_string()),
            ("V2".to_string(), "V1".to_string())
        ]
    );
    for r in report.pairs() {
        assert!(r.p_value >= 1.0 / 201.0 && r.p_value <= 1.0);
    }
    let shifted: Vec<bool> = report.pairs().map(|r| report.significant(r)).collect();
    assert_eq!(&shifted[1..], &[true, true]);

    let text = report.to_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("V2"));
    assert!(lines[3].contains('*'));
    assert_eq!(report, pairwise_bias_report(&ds, 200, 0.01, 7).unwrap());

    let json = serde_json::to_string(&report).unwrap();
    let back: venuerec::bias::MmdReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}

#[test]
fn report_preconditions() {
    let ds = dense_dataset(&[sample(8, 5, 0.0)]);
    assert!(pairwise_bias_report(&ds, 200, 0.01, 0).is_err());
    let ds = dense_dataset(&[sample(8, 5, 0.0), sample(9, 5, 0.0)]);
    assert!(pairwise_bias_report(&ds, 10, 0.01, 0).is_err());
    assert!(pairwise_bias_report(&ds, 200, 1.5, 0).is_err());
}
