use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Overlay `patch` onto `base`. Every key in `patch` must already exist in
/// `base`, so typos in a config file are caught instead of ignored.
pub fn merge(base: &mut Value, patch: &Value, path: &str) -> Result<(), CliError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &here)?,
                    None => return Err(CliError::config(format!("unknown config key `{here}`"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

pub fn load_overrides(path: &Path) -> Result<Value, CliError> {
    let text = venuerec::io::read_to_string(path)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::config(format!("{}: expected a JSON object", path.display())));
    }
    Ok(value)
}

/// Apply optional file overrides to `base`, then let `flags` have the last word.
pub fn resolve<T: Serialize + DeserializeOwned>(
    base: T,
    overrides: Option<&Value>,
    flags: impl FnOnce(&mut T) -> Result<(), CliError>,
) -> Result<T, CliError> {
    let mut resolved = match overrides {
        Some(patch) => {
            let mut value = serde_json::to_value(&base).map_err(|e| CliError::config(e.to_string()))?;
            merge(&mut value, patch, "")?;
            serde_json::from_value(value).map_err(|e| CliError::config(format!("config file: {e}")))?
        }
        None => base,
    };
    flags(&mut resolved)?;
    Ok(resolved)
}

/// Parse `0..9` (inclusive), `3`, or comma-separated mixes like `0..4,8`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
            if a > b {
                return Err(format!("empty seed range `{part}`"));
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?);
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(format!("seed {dup} listed twice"));
    }
    Ok(seeds)
}

pub fn parse_list(text: &str) -> Vec<String> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("0..9").unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("4").unwrap(), vec![4]);
        assert_eq!(parse_seeds("0..2, 7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("1,1").is_err());
        assert!(parse_seeds("a").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn merge_is_deep_and_strict() {
        let mut base = json!({ "a": 1, "b": { "c": 2, "d": 3 }, "e": null });
        merge(&mut base, &json!({ "b": { "c": 5 }, "e": [1] }), "").unwrap();
        assert_eq!(base, json!({ "a": 1, "b": { "c": 5, "d": 3 }, "e": [1] }));
        let err = merge(&mut base, &json!({ "b": { "x": 1 } }), "").unwrap_err();
        assert!(err.message.contains("b.x"));
    }

    #[test]
    fn list() {
        assert_eq!(parse_list(" a, b ,,c"), vec!["a", "b", "c"]);
    }
}
