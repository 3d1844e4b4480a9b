//! CPU specifications and the computational-efficiency (CE) ratio.
//!
//! The CE of a CPU is its throughput benchmark score divided by its thermal
//! design power. The ratio of an on-premise CPU's CE to the cloud reference
//! CPU's CE estimates the fraction of energy a workload consumes after a
//! lift-and-shift migration. Scores are treated as whole-CPU throughput;
//! `cores` is carried for reporting only.
//!
//! A catalog never mixes benchmark families: no unit conversion is attempted,
//! so every score in one catalog must come from the same benchmark.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

/// Header of the catalog CSV format, in order.
pub const CATALOG_COLUMNS: [&str; 6] = [
    "model_name",
    "spec_score",
    "tdp_watts",
    "release_date",
    "cores",
    "cloud",
];

/// The bundled test fixture catalog. Scores are plausible in magnitude but are
/// not measured data.
pub const FIXTURE_CATALOG_CSV: &str = include_str!("../data/fixture_catalog.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("catalog line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("catalog line {line}: duplicate model_name {name:?}")]
    Duplicate { line: u64, name: String },
    #[error("catalog line {line}: {field} must be positive, got {value}")]
    NonPositive {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error("catalog has no cloud reference: no entry is flagged cloud=true and none was given")]
    MissingCloudReference,
    #[error("unknown CPU model {name:?}{}", format_suggestions(.suggestions))]
    UnknownModel {
        name: String,
        suggestions: Vec<String>,
    },
    #[error("invalid CPU spec {name:?}: {message}")]
    InvalidSpec { name: String, message: String },
}

fn format_suggestions(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {})", suggestions.join(", "))
    }
}

/// One CPU model's benchmark score, TDP, release date and core count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpuSpec {
    pub model_name: String,
    pub spec_score: f64,
    pub tdp_watts: f64,
    pub release_date: NaiveDate,
    pub cores: u32,
    /// Whether this CPU is available as cloud hardware.
    pub cloud: bool,
}

impl CpuSpec {
    pub fn new(
        model_name: impl Into<String>,
        spec_score: f64,
        tdp_watts: f64,
        release_date: NaiveDate,
        cores: u32,
    ) -> Result<Self, CatalogError> {
        let spec = Self {
            model_name: model_name.into(),
            spec_score,
            tdp_watts,
            release_date,
            cores,
            cloud: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_cloud(mut self, cloud: bool) -> Self {
        self.cloud = cloud;
        self
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let invalid = |message: &str| CatalogError::InvalidSpec {
            name: self.model_name.clone(),
            message: message.to_string(),
        };
        if self.model_name.is_empty() {
            return Err(invalid("model_name is empty"));
        }
        if !(self.spec_score.is_finite() && self.spec_score > 0.0) {
            return Err(invalid("spec_score must be positive"));
        }
        if !(self.tdp_watts.is_finite() && self.tdp_watts > 0.0) {
            return Err(invalid("tdp_watts must be positive"));
        }
        if self.cores == 0 {
            return Err(invalid("cores must be at least 1"));
        }
        Ok(())
    }

    /// Computational efficiency: benchmark score per watt of TDP.
    pub fn computational_efficiency(&self) -> f64 {
        compute_ce(self)
    }
}

pub fn compute_ce(spec: &CpuSpec) -> f64 {
    spec.spec_score / spec.tdp_watts
}

/// Energy fraction after moving a workload from `on_prem` to `cloud` hardware
/// of equal capability. Values above 1 mean the migration costs energy.
pub fn lift_and_shift_fraction(on_prem: &CpuSpec, cloud: &CpuSpec) -> f64 {
    compute_ce(on_prem) / compute_ce(cloud)
}

/// An immutable set of CPU specs with one designated cloud reference.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: BTreeMap<String, CpuSpec>,
    cloud_reference: String,
}

impl Catalog {
    /// Builds a catalog from specs. Without an explicit `cloud_reference`, the
    /// newest entry flagged `cloud` is used.
    pub fn from_specs(
        specs: impl IntoIterator<Item = CpuSpec>,
        cloud_reference: Option<&str>,
    ) -> Result<Self, CatalogError> {
        let mut entries = BTreeMap::new();
        for (i, spec) in specs.into_iter().enumerate() {
            spec.validate()?;
            if entries.contains_key(&spec.model_name) {
                return Err(CatalogError::Duplicate {
                    line: i as u64 + 1,
                    name: spec.model_name,
                });
            }
            entries.insert(spec.model_name.clone(), spec);
        }
        Self::with_entries(entries, cloud_reference)
    }

    fn with_entries(
        entries: BTreeMap<String, CpuSpec>,
        cloud_reference: Option<&str>,
    ) -> Result<Self, CatalogError> {
        let mut catalog = Self {
            entries,
            cloud_reference: String::new(),
        };
        let reference = match cloud_reference {
            Some(name) => catalog.lookup(name)?.model_name.clone(),
            None => catalog
                .entries
                .values()
                .filter(|spec| spec.cloud)
                // Ties on date resolve to the alphabetically last name.
                .max_by(|a, b| {
                    a.release_date
                        .cmp(&b.release_date)
                        .then_with(|| a.model_name.cmp(&b.model_name))
                })
                .map(|spec| spec.model_name.clone())
                .ok_or(CatalogError::MissingCloudReference)?,
        };
        catalog.cloud_reference = reference;
        Ok(catalog)
    }

    /// The bundled fixture catalog.
    pub fn fixture() -> Self {
        load_catalog(FIXTURE_CATALOG_CSV.as_bytes(), None).expect("bundled fixture catalog is valid")
    }

    /// Returns a copy of this catalog using a different cloud reference.
    pub fn with_cloud_reference(&self, name: &str) -> Result<Self, CatalogError> {
        Self::with_entries(self.entries.clone(), Some(name))
    }

    pub fn lookup(&self, model_name: &str) -> Result<&CpuSpec, CatalogError> {
        lookup(self, model_name)
    }

    pub fn cloud_reference(&self) -> &CpuSpec {
        &self.entries[&self.cloud_reference]
    }

    pub fn cloud_reference_name(&self) -> &str {
        &self.cloud_reference
    }

    /// Entries in model-name order.
    pub fn iter(&self) -> impl Iterator<Item = &CpuSpec> {
        self.entries.values()
    }

    pub fn model_names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Looks up a model by exact name. Unknown names report up to three nearest
/// names by edit distance.
pub fn lookup<'a>(catalog: &'a Catalog, model_name: &str) -> Result<&'a CpuSpec, CatalogError> {
    catalog
        .entries
        .get(model_name)
        .ok_or_else(|| CatalogError::UnknownModel {
            name: model_name.to_string(),
            suggestions: nearest_names(catalog, model_name, 3),
        })
}

fn nearest_names(catalog: &Catalog, query: &str, limit: usize) -> Vec<String> {
    let mut scored: Vec<(usize, &str)> = catalog
        .model_names()
        .map(|name| (strsim::levenshtein(query, name), name))
        .collect();
    scored.sort();
    scored
        .into_iter()
        .take(limit)
        .map(|(_, name)| name.to_string())
        .collect()
}

/// Parses a catalog from CSV (`model_name,spec_score,tdp_watts,release_date,cores,cloud`).
///
/// Line numbers in errors are 1-based file lines, so the first data row is line 2.
pub fn load_catalog<R: Read>(
    source: R,
    cloud_reference: Option<&str>,
) -> Result<Catalog, CatalogError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers().map_err(|e| malformed(1, e))?.clone();
    if headers.iter().ne(CATALOG_COLUMNS.iter().copied()) {
        return Err(CatalogError::Malformed {
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                CATALOG_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut entries = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let spec = parse_row(&record, line)?;
        if entries.contains_key(&spec.model_name) {
            return Err(CatalogError::Duplicate {
                line,
                name: spec.model_name,
            });
        }
        entries.insert(spec.model_name.clone(), spec);
    }
    Catalog::with_entries(entries, cloud_reference)
}

fn malformed(line: u64, err: impl std::fmt::Display) -> CatalogError {
    CatalogError::Malformed {
        line,
        message: err.to_string(),
    }
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<CpuSpec, CatalogError> {
    let field = |i: usize| record.get(i).unwrap_or("");
    let model_name = field(0).to_string();
    if model_name.is_empty() {
        return Err(malformed(line, "model_name is empty"));
    }
    let positive = |i: usize, name: &'static str| -> Result<f64, CatalogError> {
        let raw = field(i);
        let value: f64 = raw
            .parse()
            .map_err(|_| malformed(line, format!("{name} is not a number: {raw:?}")))?;
        if !value.is_finite() || value <= 0.0 {
            return Err(CatalogError::NonPositive {
                line,
                field: name,
                value: raw.to_string(),
            });
        }
        Ok(value)
    };
    let spec_score = positive(1, "spec_score")?;
    let tdp_watts = positive(2, "tdp_watts")?;
    let release_date = NaiveDate::parse_from_str(field(3), "%Y-%m-%d")
        .map_err(|_| malformed(line, format!("release_date is not YYYY-MM-DD: {:?}", field(3))))?;
    let cores: u32 = field(4)
        .parse()
        .map_err(|_| malformed(line, format!("cores is not an integer: {:?}", field(4))))?;
    if cores == 0 {
        return Err(CatalogError::NonPositive {
            line,
            field: "cores",
            value: field(4).to_string(),
        });
    }
    let cloud = match field(5) {
        "true" => true,
        "false" => false,
        other => {
            return Err(malformed(
                line,
                format!("cloud must be true or false, got {other:?}"),
            ))
        }
    };
    Ok(CpuSpec {
        model_name,
        spec_score,
        tdp_watts,
        release_date,
        cores,
        cloud,
    })
}
