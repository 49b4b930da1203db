//! Square, label-keyed matrices shared by every stage of the pipeline.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Correlation,
    Distance,
    Te,
    Rte,
    Ete,
    Nte,
    Binary,
}

impl MatrixKind {
    /// Flow matrices are read `values[source][destination]`.
    pub fn is_flow(self) -> bool {
        matches!(
            self,
            MatrixKind::Te | MatrixKind::Rte | MatrixKind::Ete | MatrixKind::Nte | MatrixKind::Binary
        )
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Correlation => "correlation",
            MatrixKind::Distance => "distance",
            MatrixKind::Te => "te",
            MatrixKind::Rte => "rte",
            MatrixKind::Ete => "ete",
            MatrixKind::Nte => "nte",
            MatrixKind::Binary => "binary",
        })
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "correlation" => MatrixKind::Correlation,
            "distance" => MatrixKind::Distance,
            "te" => MatrixKind::Te,
            "rte" => MatrixKind::Rte,
            "ete" => MatrixKind::Ete,
            "nte" => MatrixKind::Nte,
            "binary" => MatrixKind::Binary,
            other => return Err(Error::InvalidParams(format!("unknown matrix kind `{other}`"))),
        })
    }
}

/// N x N real matrix keyed by column labels, stored row-major.
///
/// For flow kinds the row is the source and the column the destination:
/// `get(y, x)` is the flow from `y` to `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
    kind: MatrixKind,
}

impl LabeledMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>, kind: MatrixKind) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {n} labels",
                values.len()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::DuplicateLabel(dup.clone()));
        }
        Ok(Self {
            labels,
            values,
            kind,
        })
    }

    pub fn zeros(labels: Vec<String>, kind: MatrixKind) -> Result<Self> {
        let n = labels.len();
        Self::new(labels, vec![0.0; n * n], kind)
    }

    pub fn from_rows(labels: Vec<String>, rows: &[Vec<f64>], kind: MatrixKind) -> Result<Self> {
        if rows.iter().any(|r| r.len() != labels.len()) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(labels, rows.concat(), kind)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let n = self.n();
        self.values[row * n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.n();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Looks up `values[row_label][col_label]`.
    pub fn get_by_label(&self, row: &str, col: &str) -> Option<f64> {
        Some(self.get(self.index_of(row)?, self.index_of(col)?))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (i + 1..n).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub(crate) fn with_kind(mut self, kind: MatrixKind) -> Self {
        self.kind = kind;
        self
    }

    pub(crate) fn expect_kind(&self, kinds: &[MatrixKind]) -> Result<()> {
        if kinds.contains(&self.kind) {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kinds
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("|"),
                got: self.kind.to_string(),
            })
        }
    }

    pub(crate) fn expect_same_labels(&self, other: &LabeledMatrix) -> Result<()> {
        if self.labels == other.labels {
            Ok(())
        } else {
            Err(Error::LabelMismatch)
        }
    }

    /// Entrywise map into a new matrix of `kind`.
    pub fn map(&self, kind: MatrixKind, f: impl Fn(f64) -> f64) -> LabeledMatrix {
        LabeledMatrix {
            labels: self.labels.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            kind,
        }
    }

    /// Restriction to the given labels, in that order.
    pub fn submatrix(&self, labels: &[String]) -> Result<LabeledMatrix> {
        let idx = labels
            .iter()
            .map(|l| self.index_of(l).ok_or_else(|| Error::UnknownLabel(l.clone())))
            .collect::<Result<Vec<_>>>()?;
        let values = idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        LabeledMatrix::new(labels.to_vec(), values, self.kind)
    }
}

/// Entrywise indicator `value > threshold`.
pub fn binarize(matrix: &LabeledMatrix, threshold: f64) -> LabeledMatrix {
    matrix.map(MatrixKind::Binary, |v| if v > threshold { 1.0 } else { 0.0 })
}
