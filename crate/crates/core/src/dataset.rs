//! Plain-text dataset format, version 1.
//!
//! ```text
//! # pd-infer v1 labeled n=3
//! # psi=1,10 seed=7
//! 0 0
//! 0 1
//! 1 0
//! ```
//!
//! The first line is the header. Further `#` lines and blank lines are
//! ignored. Labeled records are `<class-id> <species-id>`, unlabeled ones a
//! single `<species-id>`. Fields may be separated by any whitespace.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::partition::{SpeciesCounts, SpeciesId};
use crate::sampling::LabeledRecord;

pub const FORMAT_TAG: &str = "pd-infer v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Labeled,
    Unlabeled,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Labeled => "labeled",
            DatasetKind::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dataset {
    Labeled(Vec<LabeledRecord>),
    Unlabeled(Vec<SpeciesId>),
}

impl Dataset {
    pub fn kind(&self) -> DatasetKind {
        match self {
            Dataset::Labeled(_) => DatasetKind::Labeled,
            Dataset::Unlabeled(_) => DatasetKind::Unlabeled,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Labeled(r) => r.len(),
            Dataset::Unlabeled(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Feature values in file order, dropping labels if present.
    pub fn values(&self) -> Vec<SpeciesId> {
        match self {
            Dataset::Labeled(r) => r.iter().map(|r| r.species).collect(),
            Dataset::Unlabeled(v) => v.clone(),
        }
    }

    /// True classes, if labeled.
    pub fn labels(&self) -> Option<Vec<usize>> {
        match self {
            Dataset::Labeled(r) => Some(r.iter().map(|r| r.class).collect()),
            Dataset::Unlabeled(_) => None,
        }
    }

    /// Frequency table per class, indexed by class id. An unlabeled dataset
    /// is a single group.
    pub fn class_counts(&self) -> Vec<SpeciesCounts> {
        match self {
            Dataset::Unlabeled(v) => vec![v.iter().copied().collect()],
            Dataset::Labeled(records) => {
                let k = records.iter().map(|r| r.class + 1).max().unwrap_or(0);
                let mut tables = vec![SpeciesCounts::new(); k];
                for r in records {
                    tables[r.class].observe(r.species);
                }
                tables
            }
        }
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, what: &str, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{field}'")))
}

fn parse_header(line: &str) -> Result<(DatasetKind, usize)> {
    let bad = || Error::parse(1, format!("expected header '# {FORMAT_TAG} labeled|unlabeled n=<N>', got '{line}'"));
    let rest = line.strip_prefix('#').ok_or_else(bad)?.trim_start();
    let rest = rest.strip_prefix(FORMAT_TAG).ok_or_else(bad)?;
    let mut tokens = rest.split_whitespace();
    let kind = match tokens.next() {
        Some("labeled") => DatasetKind::Labeled,
        Some("unlabeled") => DatasetKind::Unlabeled,
        _ => return Err(bad()),
    };
    let n = tokens
        .next()
        .and_then(|t| t.strip_prefix("n="))
        .ok_or_else(bad)
        .and_then(|v| parse_field::<usize>(1, "record count", v))?;
    if tokens.next().is_some() {
        return Err(bad());
    }
    Ok((kind, n))
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::parse(1, "empty file: missing header")),
    };
    let (kind, declared) = parse_header(header.trim_end())?;
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        match (kind, fields.as_slice()) {
            (DatasetKind::Labeled, [class, species]) => labeled.push(LabeledRecord {
                class: parse_field(lineno, "class id", class)?,
                species: parse_field(lineno, "species id", species)?,
            }),
            (DatasetKind::Unlabeled, [species]) => unlabeled.push(parse_field(lineno, "species id", species)?),
            (DatasetKind::Labeled, _) => {
                return Err(Error::parse(lineno, format!("expected '<class-id> <species-id>', got '{text}'")))
            }
            (DatasetKind::Unlabeled, _) => {
                return Err(Error::parse(lineno, format!("expected '<species-id>', got '{text}'")))
            }
        }
    }
    let data = match kind {
        DatasetKind::Labeled => Dataset::Labeled(labeled),
        DatasetKind::Unlabeled => Dataset::Unlabeled(unlabeled),
    };
    if data.len() != declared {
        return Err(Error::parse(1, format!("header declares n={declared} but {} records follow", data.len())));
    }
    Ok(data)
}

/// Writes `data` with the v1 header. `extra` key-value pairs go on a second
/// `#` line.
pub fn write_dataset<W: Write>(mut out: W, data: &Dataset, extra: &[(&str, String)]) -> Result<()> {
    writeln!(out, "# {FORMAT_TAG} {} n={}", data.kind(), data.len())?;
    if !extra.is_empty() {
        let pairs: Vec<String> = extra.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(out, "# {}", pairs.join(" "))?;
    }
    match data {
        Dataset::Labeled(records) => {
            for r in records {
                writeln!(out, "{} {}", r.class, r.species)?;
            }
        }
        Dataset::Unlabeled(values) => {
            for v in values {
                writeln!(out, "{v}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
