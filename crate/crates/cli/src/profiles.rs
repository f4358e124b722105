//! Time-series CSV files: a timestamp column followed by named value columns.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use strata::component::is_valid_identifier;
use thiserror::Error;

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];

/// Format used for every timestamp written by this crate.
pub const TIMESTAMP_OUTPUT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("empty file")]
    Empty,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line 1: first column must be `timestamp`, found `{0}`")]
    MissingTimestamp(String),
    #[error("line 1: column `{0}` is not a valid profile name")]
    InvalidName(String),
    #[error("line 1: column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("line {line}: timestamp `{value}` is not ISO-8601")]
    BadTimestamp { line: usize, value: String },
    #[error("line {line}: timestamps must be strictly increasing")]
    NotIncreasing { line: usize },
    #[error("line {line}, column `{column}`: `{value}` is not a finite number")]
    BadValue { line: usize, column: String, value: String },
    #[error("no data rows")]
    NoRows,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl ProfileTable {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    let s = s.strip_suffix('Z').unwrap_or(s);
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Parses profile CSV text.
pub fn parse_profiles(text: &str) -> Result<ProfileTable, ProfileError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(ProfileError::Empty),
        Some(r) => r.map_err(|e| malformed(&e, 1))?,
    };
    let first = header.get(0).unwrap_or("");
    if !first.eq_ignore_ascii_case("timestamp") {
        return Err(ProfileError::MissingTimestamp(first.to_string()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    for (i, name) in names.iter().enumerate() {
        if !is_valid_identifier(name) {
            return Err(ProfileError::InvalidName(name.clone()));
        }
        if names[..i].contains(name) {
            return Err(ProfileError::DuplicateColumn(name.clone()));
        }
    }

    let mut timestamps: Vec<NaiveDateTime> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for record in records {
        let record = record.map_err(|e| malformed(&e, timestamps.len() + 2))?;
        let line = record.position().map_or(timestamps.len() + 2, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != names.len() + 1 {
            return Err(ProfileError::Malformed {
                line,
                message: format!("expected {} fields, found {}", names.len() + 1, record.len()),
            });
        }
        let raw = &record[0];
        let ts = parse_timestamp(raw).ok_or_else(|| ProfileError::BadTimestamp {
            line,
            value: raw.to_string(),
        })?;
        if timestamps.last().is_some_and(|prev| *prev >= ts) {
            return Err(ProfileError::NotIncreasing { line });
        }
        timestamps.push(ts);
        for (j, name) in names.iter().enumerate() {
            let raw = &record[j + 1];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => values[j].push(v),
                _ => {
                    return Err(ProfileError::BadValue {
                        line,
                        column: name.clone(),
                        value: raw.to_string(),
                    })
                }
            }
        }
    }
    if timestamps.is_empty() {
        return Err(ProfileError::NoRows);
    }
    Ok(ProfileTable {
        timestamps,
        columns: names.into_iter().zip(values).collect(),
    })
}

fn malformed(e: &csv::Error, fallback_line: usize) -> ProfileError {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    ProfileError::Malformed {
        line,
        message: e.to_string(),
    }
}
