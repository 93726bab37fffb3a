//! Default hyperparameter grids.

/// `{0.001, …, 0.009, 0.01, …, 0.09, 0.1, …, 0.9, 1, …, 9, 10, …, 90}`: 45
/// values, used both for the ridge penalty and the logistic `C`.
pub fn default_grid() -> Vec<f64> {
    (-3..=1)
        .flat_map(|exp| (1..=9).map(move |step| format!("{step}e{exp}")))
        .map(|lit| lit.parse().expect("decimal literal parses"))
        .collect()
}
