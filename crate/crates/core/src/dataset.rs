//! Class labels and the patient-by-feature matrix shared by selection,
//! training and evaluation.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::io::Stamp;

/// Weaning outcome. Failure is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Success,
    Failure,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Success => 0,
            Label::Failure => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Success),
            1 => Some(Label::Failure),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Failure
    }

    /// SVM target: +1 for failure, -1 for success.
    pub fn sign(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Rows are patients, columns are named features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl Dataset {
    pub fn new(names: Vec<String>, ids: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if ids.len() != rows.len() || labels.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: ids.len().min(labels.len()),
            });
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::DimensionMismatch {
                    expected: names.len(),
                    got: row.len(),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row: r, col: c });
            }
        }
        Ok(Self {
            names,
            ids,
            rows,
            labels,
        })
    }

    /// Anonymous dataset, mostly for tests and synthetic problems.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let names = (0..dim).map(|i| format!("x{i}")).collect();
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        Self::new(names, ids, rows, labels)
    }

    pub fn from_vectors(vectors: &[FeatureVector]) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptySample)?;
        let names = first.names.clone();
        let mut ids = Vec::with_capacity(vectors.len());
        let mut rows = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.names != names {
                return Err(Error::DimensionMismatch {
                    expected: names.len(),
                    got: v.names.len(),
                });
            }
            ids.push(v.patient_id.clone());
            rows.push(v.values.clone());
            labels.push(v.label);
        }
        Self::new(names, ids, rows, labels)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|l| l.is_positive()).count();
        [self.labels.len() - pos, pos]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Dataset> {
        Dataset::new(self.names.clone(), self.ids.clone(), self.rows.clone(), labels)
    }

    /// `patient_id,label,<features...>`
    pub fn to_csv(&self, stamp: Option<&Stamp>) -> String {
        let mut out = String::new();
        if let Some(stamp) = stamp {
            out.push_str(&stamp.comment_line());
        }
        out.push_str("patient_id,label");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            out.push_str(id);
            out.push(',');
            out.push_str(&label.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, stamp: Option<&Stamp>) -> Result<()> {
        crate::io::write_file(path, &self.to_csv(stamp))
    }

    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let mut reader = crate::io::csv_reader(path)?;
        let header = crate::io::expect_header(&mut reader, path, &["patient_id", "label"])?;
        let names: Vec<String> = header.iter().skip(2).map(|s| s.trim().to_string()).collect();
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| crate::io::csv_error(path, e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let malformed = |message: String| Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                message,
            };
            if record.len() != names.len() + 2 {
                return Err(malformed(format!(
                    "expected {} fields, found {}",
                    names.len() + 2,
                    record.len()
                )));
            }
            let label = record[1]
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(Label::from_u8)
                .ok_or_else(|| malformed(format!("invalid label `{}`", &record[1])))?;
            let row = record
                .iter()
                .skip(2)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| malformed(format!("invalid value `{s}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            ids.push(record[0].trim().to_string());
            labels.push(label);
            rows.push(row);
        }
        Dataset::new(names, ids, rows, labels)
    }
}
