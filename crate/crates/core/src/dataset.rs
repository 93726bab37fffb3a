//! Paper ingestion, bag-of-fields features and stratified splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::de::{SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::numeric::{DesignMatrix, RowView};
use crate::rng::substream;

pub const DATASET_FORMAT_VERSION: u64 = 1;

/// One ingested publication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    pub fields_of_study: Vec<String>,
    pub venue: String,
    pub citations: u64,
    pub year: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Canonical venue names, in the order used everywhere downstream.
    pub venues: Vec<String>,
    pub year: Option<i64>,
    /// Raw venue name → canonical name. Matching ignores case and
    /// surrounding/repeated whitespace.
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
    /// A listed field counts when its relevance weight is at least this.
    #[serde(default)]
    pub field_weight_threshold: f64,
}

impl IngestConfig {
    /// The five 2015 conferences with the raw names used in dblp v12.
    pub fn dblp_2015() -> Self {
        let aliases = [
            ("national conference on artificial intelligence", "AAAI"),
            ("aaai conference on artificial intelligence", "AAAI"),
            ("international joint conference on artificial intelligence", "IJCAI"),
            ("knowledge discovery and data mining", "KDD"),
            ("sigkdd", "KDD"),
            ("neural information processing systems", "NeurIPS"),
            ("advances in neural information processing systems", "NeurIPS"),
            ("nips", "NeurIPS"),
            ("international conference on machine learning", "ICML"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        IngestConfig {
            venues: ["AAAI", "IJCAI", "KDD", "NeurIPS", "ICML"].map(String::from).to_vec(),
            year: Some(2015),
            aliases,
            field_weight_threshold: 0.0,
        }
    }

    fn resolver(&self) -> HashMap<String, String> {
        let mut map: HashMap<String, String> = self
            .aliases
            .iter()
            .filter(|(_, v)| self.venues.contains(v))
            .map(|(k, v)| (normalize_name(k), v.clone()))
            .collect();
        for v in &self.venues {
            map.insert(normalize_name(v), v.clone());
        }
        map
    }
}

fn normalize_name(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub papers: Vec<Paper>,
    pub malformed: usize,
    pub filtered: usize,
}

/// Read dblp-style records (a JSON array or JSON lines) and keep the papers
/// of the configured venues and year.
pub fn ingest<R: BufRead>(mut reader: R, config: &IngestConfig) -> Result<IngestReport> {
    let resolver = config.resolver();
    let mut report = IngestReport {
        papers: Vec::new(),
        malformed: 0,
        filtered: 0,
    };
    let handle = |value: Value, report: &mut IngestReport| match parse_record(&value, config, &resolver) {
        Ok(Some(paper)) => report.papers.push(paper),
        Ok(None) => report.filtered += 1,
        Err(reason) => {
            report.malformed += 1;
            log::warn!("skipping malformed record: {reason}");
        }
    };

    if first_byte(&mut reader)? == Some(b'[') {
        let mut de = serde_json::Deserializer::from_reader(reader);
        de.deserialize_seq(EachElement(|v| handle(v, &mut report)))
            .map_err(|e| Error::json("record array", e))?;
    } else {
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<input>", e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match serde_json::from_str::<Value>(line) {
                Ok(v) => handle(v, &mut report),
                Err(e) => {
                    report.malformed += 1;
                    log::warn!("skipping unparsable line {}: {e}", lineno + 1);
                }
            }
        }
    }

    if report.papers.is_empty() {
        return Err(Error::EmptyDataset {
            skipped: report.malformed,
            filtered: report.filtered,
        });
    }
    if report.malformed > 0 {
        log::warn!("{} malformed record(s) skipped", report.malformed);
    }
    Ok(report)
}

pub fn ingest_path(path: &Path, config: &IngestConfig) -> Result<IngestReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest(std::io::BufReader::new(file), config)
}

fn first_byte<R: BufRead>(reader: &mut R) -> Result<Option<u8>> {
    loop {
        let buf = reader.fill_buf().map_err(|e| Error::io("<input>", e))?;
        if buf.is_empty() {
            return Ok(None);
        }
        match buf.iter().position(|b| !b.is_ascii_whitespace()) {
            Some(pos) => {
                let b = buf[pos];
                reader.consume(pos);
                return Ok(Some(b));
            }
            None => {
                let len = buf.len();
                reader.consume(len);
            }
        }
    }
}

/// Feeds each element of a JSON array to a callback without buffering the array.
struct EachElement<F>(F);

impl<'de, F: FnMut(Value)> Visitor<'de> for EachElement<F> {
    type Value = ();

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an array of paper records")
    }

    fn visit_seq<A: SeqAccess<'de>>(mut self, mut seq: A) -> std::result::Result<(), A::Error> {
        while let Some(v) = seq.next_element::<Value>()? {
            (self.0)(v);
        }
        Ok(())
    }
}

fn parse_record(v: &Value, config: &IngestConfig, resolver: &HashMap<String, String>) -> std::result::Result<Option<Paper>, String> {
    let obj = v.as_object().ok_or("record is not an object")?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err("missing id".into()),
    };
    let year = obj.get("year").and_then(Value::as_i64).ok_or_else(|| format!("{id}: missing year"))?;
    let raw_venue = match obj.get("venue") {
        Some(Value::String(s)) => s.as_str(),
        Some(Value::Object(o)) => o
            .get("raw")
            .or_else(|| o.get("name"))
            .and_then(Value::as_str)
            .ok_or_else(|| format!("{id}: venue has no raw name"))?,
        _ => return Err(format!("{id}: missing venue")),
    };
    let citations = obj
        .get("n_citation")
        .or_else(|| obj.get("citations"))
        .and_then(Value::as_u64)
        .ok_or_else(|| format!("{id}: missing or negative citation count"))?;
    let mut fields = Vec::new();
    if let Some(fos) = obj.get("fos").or_else(|| obj.get("fields_of_study")) {
        let list = fos.as_array().ok_or_else(|| format!("{id}: fos is not a list"))?;
        for entry in list {
            let (name, weight) = match entry {
                Value::String(s) => (s.as_str(), f64::INFINITY),
                Value::Object(o) => (
                    o.get("name").and_then(Value::as_str).ok_or_else(|| format!("{id}: fos entry without name"))?,
                    o.get("w").or_else(|| o.get("weight")).and_then(Value::as_f64).unwrap_or(f64::INFINITY),
                ),
                _ => return Err(format!("{id}: bad fos entry")),
            };
            if weight >= config.field_weight_threshold {
                fields.push(name.trim().to_string());
            }
        }
    }

    let Some(venue) = resolver.get(&normalize_name(raw_venue)) else {
        return Ok(None);
    };
    if config.year.is_some_and(|y| y != year) {
        return Ok(None);
    }
    Ok(Some(Paper {
        id,
        fields_of_study: fields,
        venue: venue.clone(),
        citations,
        year,
    }))
}

/// Field names in index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Vocabulary {
    fields: Vec<String>,
    built_from: String,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            fields: Vec<String>,
            built_from: String,
        }
        let r = Repr::deserialize(d)?;
        Vocabulary::new(r.fields, r.built_from).map_err(serde::de::Error::custom)
    }
}

impl Vocabulary {
    pub fn new(fields: Vec<String>, built_from: impl Into<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(fields.len());
        for (i, f) in fields.iter().enumerate() {
            if index.insert(f.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary entry `{f}`")));
            }
        }
        Ok(Vocabulary {
            fields,
            built_from: built_from.into(),
            index,
        })
    }

    /// Generic names `x0 … x{d-1}` for dense real covariates.
    pub fn dense(dim: usize) -> Self {
        Vocabulary::new((0..dim).map(|j| format!("x{j}")).collect(), "dense").expect("distinct names")
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index_of(&self, field: &str) -> Option<u32> {
        self.index.get(field).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.fields[index]
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn built_from(&self) -> &str {
        &self.built_from
    }

    /// Bag-of-fields vector for `fields`; names outside the vocabulary are
    /// returned separately.
    pub fn project_fields<S: AsRef<str>>(&self, fields: &[S]) -> (FeatureVector, Vec<String>) {
        let mut active = BTreeSet::new();
        let mut ignored = Vec::new();
        for f in fields {
            match self.index_of(f.as_ref()) {
                Some(i) => {
                    active.insert(i);
                }
                None => {
                    if !ignored.iter().any(|g: &String| g == f.as_ref()) {
                        ignored.push(f.as_ref().to_string());
                    }
                }
            }
        }
        (
            FeatureVector {
                dim: self.len(),
                active: active.into_iter().collect(),
            },
            ignored,
        )
    }
}

/// Binary bag of fields: the listed indices are one, all others zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dim: usize,
    pub active: Vec<u32>,
}

impl FeatureVector {
    pub fn new(dim: usize, mut active: Vec<u32>) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if active.last().is_some_and(|&j| j as usize >= dim) {
            return Err(Error::InvalidInput(format!("feature index out of range for dimension {dim}")));
        }
        Ok(FeatureVector { dim, active })
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector { dim, active: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariates {
    Sparse(FeatureVector),
    Dense(Vec<f64>),
}

impl Covariates {
    pub fn dim(&self) -> usize {
        match self {
            Covariates::Sparse(f) => f.dim,
            Covariates::Dense(v) => v.len(),
        }
    }

    pub fn view(&self) -> RowView<'_> {
        match self {
            Covariates::Sparse(f) => RowView::SparseBinary(&f.active),
            Covariates::Dense(v) => RowView::Dense(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub features: Covariates,
    /// Index into [`Dataset::venues`].
    pub venue: usize,
    /// Observed outcome at the factual venue (citation count for real data).
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub format_version: u64,
    pub vocabulary: Vocabulary,
    pub venues: Vec<String>,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(vocabulary: Vocabulary, venues: Vec<String>, records: Vec<Record>) -> Result<Self> {
        let ds = Dataset {
            format_version: DATASET_FORMAT_VERSION,
            vocabulary,
            venues,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.vocabulary.len();
        for r in &self.records {
            if r.venue >= self.venues.len() {
                return Err(Error::InvalidInput(format!("record {} references venue #{}", r.id, r.venue)));
            }
            if r.features.dim() != dim {
                return Err(Error::InvalidInput(format!(
                    "record {} has dimension {}, vocabulary has {dim}",
                    r.id,
                    r.features.dim()
                )));
            }
            if !r.outcome.is_finite() || r.outcome < 0.0 {
                return Err(Error::InvalidInput(format!("record {} has invalid outcome {}", r.id, r.outcome)));
            }
            match &r.features {
                Covariates::Sparse(f) => {
                    if f.active.windows(2).any(|w| w[0] >= w[1]) || f.active.last().is_some_and(|&j| j as usize >= dim) {
                        return Err(Error::InvalidInput(format!("record {} has malformed feature indices", r.id)));
                    }
                }
                Covariates::Dense(v) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite("dense covariates"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn venue_index(&self, name: &str) -> Option<usize> {
        self.venues.iter().position(|v| v == name)
    }

    /// Row indices per venue, in record order.
    pub fn indices_by_venue(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.venues.len()];
        for (i, r) in self.records.iter().enumerate() {
            out[r.venue].push(i);
        }
        out
    }

    pub fn design_matrix(&self) -> DesignMatrix {
        self.design_for(&(0..self.len()).collect::<Vec<_>>())
    }

    pub fn design_for(&self, idx: &[usize]) -> DesignMatrix {
        let dim = self.vocabulary.len();
        let dense = self.records.first().is_some_and(|r| matches!(r.features, Covariates::Dense(_)));
        if dense {
            let mut data = Vec::with_capacity(idx.len() * dim);
            for &i in idx {
                match &self.records[i].features {
                    Covariates::Dense(v) => data.extend_from_slice(v),
                    Covariates::Sparse(f) => data.extend(RowView::SparseBinary(&f.active).to_dense(dim)),
                }
            }
            DesignMatrix::Dense { cols: dim, data }
        } else {
            let rows = idx
                .iter()
                .map(|&i| match &self.records[i].features {
                    Covariates::Sparse(f) => f.active.clone(),
                    Covariates::Dense(v) => v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(j, _)| j as u32).collect(),
                })
                .collect();
            DesignMatrix::SparseBinary { cols: dim, rows }
        }
    }

    pub fn venue_labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.venue).collect()
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.outcome).collect()
    }

    /// Same vocabulary and venues, only the given rows.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            format_version: self.format_version,
            vocabulary: self.vocabulary.clone(),
            venues: self.venues.clone(),
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Re-express sparse records over `target`; fields it lacks are dropped.
    pub fn project_onto(&self, target: &Vocabulary) -> Dataset {
        let mut dropped = 0usize;
        let records = self
            .records
            .iter()
            .map(|r| {
                let features = match &r.features {
                    Covariates::Sparse(f) => {
                        let mut active: Vec<u32> = f
                            .active
                            .iter()
                            .filter_map(|&j| {
                                let idx = target.index_of(self.vocabulary.name(j as usize));
                                if idx.is_none() {
                                    dropped += 1;
                                }
                                idx
                            })
                            .collect();
                        active.sort_unstable();
                        Covariates::Sparse(FeatureVector {
                            dim: target.len(),
                            active,
                        })
                    }
                    Covariates::Dense(v) => Covariates::Dense(v.clone()),
                };
                Record {
                    features,
                    ..r.clone()
                }
            })
            .collect();
        if dropped > 0 {
            log::info!("{dropped} field occurrence(s) outside the target vocabulary were ignored");
        }
        Dataset {
            format_version: self.format_version,
            vocabulary: target.clone(),
            venues: self.venues.clone(),
            records,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let text = crate::io::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::json(path.display().to_string(), source),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Dataset> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::json("dataset", e))?;
        let found = value.get("format_version").and_then(Value::as_u64).unwrap_or(0);
        if found != DATASET_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        let ds: Dataset = serde_json::from_value(value).map_err(|e| Error::json("dataset", e))?;
        ds.validate()?;
        Ok(ds)
    }
}

/// Build the sorted vocabulary of all fields and one binary vector per paper.
/// Records are ordered by paper id so the result depends only on the set of papers.
pub fn build_features(papers: &[Paper], venues: &[String]) -> Result<Dataset> {
    if papers.is_empty() {
        return Err(Error::EmptyDataset { skipped: 0, filtered: 0 });
    }
    let names: BTreeSet<&str> = papers.iter().flat_map(|p| p.fields_of_study.iter().map(String::as_str)).collect();
    let vocabulary = Vocabulary::new(names.into_iter().map(String::from).collect(), "all")?;
    let mut sorted: Vec<&Paper> = papers.iter().collect();
    sorted.sort_by(|a, b| {
        a.id.cmp(&b.id)
            .then_with(|| a.venue.cmp(&b.venue))
            .then_with(|| a.citations.cmp(&b.citations))
            .then_with(|| a.fields_of_study.cmp(&b.fields_of_study))
    });
    let records = sorted
        .into_iter()
        .map(|p| {
            let venue = venues
                .iter()
                .position(|v| *v == p.venue)
                .ok_or_else(|| Error::UnknownVenue(p.venue.clone()))?;
            let (features, _) = vocabulary.project_fields(&p.fields_of_study);
            Ok(Record {
                id: p.id.clone(),
                features: Covariates::Sparse(features),
                venue,
                outcome: p.citations as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(vocabulary, venues.to_vec(), records)
}

/// Per venue, `max(1, ⌊fraction · n⌋)` papers go to train after a seeded
/// shuffle. Sparse datasets are re-indexed over the training vocabulary.
pub fn stratified_split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must be in (0, 1), got {train_fraction}")));
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (v, mut idx) in dataset.indices_by_venue().into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::Split {
                venue: dataset.venues[v].clone(),
                count: idx.len(),
            });
        }
        let n_train = train_count(idx.len(), train_fraction);
        idx.shuffle(&mut substream(seed, "split", v as u64));
        train_idx.extend_from_slice(&idx[..n_train]);
        test_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train = dataset.subset(&train_idx);
    let test = dataset.subset(&test_idx);
    if train.records.iter().any(|r| matches!(r.features, Covariates::Dense(_))) {
        return Ok((train, test));
    }
    let used: BTreeSet<&str> = train
        .records
        .iter()
        .filter_map(|r| match &r.features {
            Covariates::Sparse(f) => Some(f.active.iter().map(|&j| dataset.vocabulary.name(j as usize))),
            Covariates::Dense(_) => None,
        })
        .flatten()
        .collect();
    let vocab = Vocabulary::new(used.into_iter().map(String::from).collect(), format!("train:seed={seed}"))?;
    Ok((train.project_onto(&vocab), test.project_onto(&vocab)))
}

pub fn train_count(n: usize, fraction: f64) -> usize {
    // The epsilon keeps 0.7 · 10 from flooring to 6.
    (((fraction * n as f64) + 1e-9).floor() as usize).clamp(1, n - 1)
}
