mod common;

use proptest::prelude::*;
use rand::Rng;
use venuerec::bias::mmd2_unbiased;
use venuerec::learners::{recommend_from_scores, TargetTransform};
use venuerec::numeric::ridge::objective;
use venuerec::numeric::{
    fit_multinomial_logistic, fit_weighted_ridge, spearman, DesignMatrix, Kernel, KernelSpec, LinearModel, LogisticOptions,
    MultinomialLogisticModel, RowView,
};
use venuerec::propensity::clip_probabilities;

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (2usize..25, 1usize..8).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n),
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(0.1..10.0f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ridge_solution_beats_perturbations((rows, y, w) in instance(), lambda in 0.001..50.0f64, seed: u64) {
        let x = DesignMatrix::from_dense_rows(&rows).unwrap();
        let fit = fit_weighted_ridge(&x, &y, &w, lambda).unwrap();
        let best = objective(&x, &y, &w, lambda, &fit.model);
        let mut r = common::rng(seed);
        for _ in 0..1000 {
            let scale = 10f64.powf(r.random_range(-4.0..0.0));
            let probe = LinearModel {
                weights: fit.model.weights.iter().map(|v| v + scale * r.random_range(-1.0..1.0)).collect(),
                intercept: fit.model.intercept + scale * r.random_range(-1.0..1.0),
                regularization: lambda,
            };
            prop_assert!(best <= objective(&x, &y, &w, lambda, &probe) + 1e-12 * best.abs().max(1.0));
        }
    }

    #[test]
    fn ridge_constant_weights_rescale_the_penalty((rows, y, _) in instance(), lambda in 0.001..50.0f64, c in 0.1..20.0f64) {
        let x = DesignMatrix::from_dense_rows(&rows).unwrap();
        let ones = fit_weighted_ridge(&x, &y, &vec![1.0; y.len()], lambda).unwrap().model;
        let scaled = fit_weighted_ridge(&x, &y, &vec![c; y.len()], lambda * c).unwrap().model;
        for (a, b) in ones.weights.iter().zip(&scaled.weights) {
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
        }
        prop_assert!((ones.intercept - scaled.intercept).abs() <= 1e-8 * ones.intercept.abs().max(1.0));
    }

    #[test]
    fn logistic_probabilities_sum_to_one(weights in prop::collection::vec(-30.0..30.0f64, 12), x in prop::collection::vec(-5.0..5.0f64, 4)) {
        let mut m = MultinomialLogisticModel::zero(4, vec![0, 1, 2], 1.0);
        for k in 0..3 {
            m.class_weights[k] = weights[k * 4..(k + 1) * 4].to_vec();
        }
        let p = m.predict_proba(RowView::Dense(&x));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn gaussian_kernel_properties(a in prop::collection::vec(-5.0..5.0f64, 3), b in prop::collection::vec(-5.0..5.0f64, 3), sigma in 0.1..5.0f64) {
        let k = KernelSpec::gaussian(sigma).unwrap();
        prop_assert_eq!(k.eval(RowView::Dense(&a), RowView::Dense(&a)), 1.0);
        let ab = k.eval(RowView::Dense(&a), RowView::Dense(&b));
        prop_assert_eq!(ab, k.eval(RowView::Dense(&b), RowView::Dense(&a)));
        prop_assert!((0.0..=1.0).contains(&ab));
        let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        if sq / (2.0 * sigma * sigma) < 700.0 {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn spearman_ignores_increasing_transforms(pairs in prop::collection::vec((0u8..8, 0u8..8), 3..30)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let base = spearman(&a, &b);
        let ta: Vec<f64> = a.iter().map(|v| (v * 0.7).exp() - 3.0).collect();
        let tb: Vec<f64> = b.iter().map(|v| v.powi(3) + v).collect();
        match base {
            Ok(rho) => {
                let t = spearman(&ta, &tb).unwrap();
                prop_assert!((rho - t).abs() <= 1e-12);
                prop_assert!((-1.0..=1.0).contains(&rho));
                prop_assert!((rho - common::spearman_oracle(&a, &b)).abs() <= 1e-12);
            }
            Err(_) => prop_assert!(spearman(&ta, &tb).is_err()),
        }
    }

    #[test]
    fn mmd_symmetric_and_matches_oracle(
        a in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 2..20),
        b in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 2..20),
        sigma in 0.2..4.0f64,
    ) {
        let (da, db) = (DesignMatrix::from_dense_rows(&a).unwrap(), DesignMatrix::from_dense_rows(&b).unwrap());
        let k = KernelSpec::gaussian(sigma).unwrap();
        let ab = mmd2_unbiased(&da, &db, &k).unwrap();
        prop_assert_eq!(ab, mmd2_unbiased(&db, &da, &k).unwrap());
        prop_assert!((ab - common::mmd2_oracle(&a, &b, sigma)).abs() <= 1e-12);
    }

    #[test]
    fn clipped_propensities_stay_valid(raw in prop::collection::vec(0.0..1.0f64, 2..8), floor_frac in 0.01..1.0f64) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let floor = floor_frac / p.len() as f64;
        let q = clip_probabilities(&p, floor);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(q.iter().all(|&v| v >= floor - 1e-15));
        prop_assert!(q.iter().all(|&v| (1.0..=1.0 / floor + 1e-9).contains(&(1.0 / v))));
    }

    #[test]
    fn recommended_is_argmax(scores in prop::collection::vec(-10.0..10.0f64, 1..6)) {
        let venues: Vec<String> = (0..scores.len()).map(|i| format!("v{i}")).collect();
        let rec = recommend_from_scores(&venues, &scores, TargetTransform::Log1p);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(rec.scores[&rec.recommended], max);
        prop_assert_eq!(&rec.ranking[0], &rec.recommended);
        for pair in rec.ranking.windows(2) {
            prop_assert!(rec.scores[&pair[0]] >= rec.scores[&pair[1]]);
        }
    }
}

#[test]
fn training_loss_falls_as_c_grows_on_separable_data() {
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 * 2.0 - 2.0, (i % 5) as f64 * 0.1]).collect();
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let x = DesignMatrix::from_dense_rows(&rows).unwrap();
    let mut last = f64::INFINITY;
    for c in [0.01, 0.1, 1.0, 10.0, 90.0] {
        let m = fit_multinomial_logistic(&x, &labels, c, &LogisticOptions::default()).unwrap();
        let nll = m.mean_log_loss(&x, &labels);
        assert!(nll <= last + 1e-9, "C = {c}: {nll} after {last}");
        last = nll;
    }
}
