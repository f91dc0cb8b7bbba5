//! Tabular datasets: loading, preprocessing and train/test partitioning.
//!
//! A [`Dataset`] keeps the raw table shape until it passes through a fitted
//! [`Preprocessor`]: missing cells are `NaN` and categorical cells hold the
//! index of their level in [`ColumnKind::Categorical::levels`]. After
//! preprocessing every column is numeric and every entry finite.

mod csv_io;
mod preprocess;
mod split;
pub mod synth;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, load_csv_reader, load_csv_unlabeled, write_csv, ID_COLUMN};
pub use preprocess::{
    preprocess, CategoricalEncoding, Impute, Normalize, OutlierPolicy, PreprocessSpec,
    Preprocessor,
};
pub use split::{split, subsample, SplitDataset, DEFAULT_TRAIN_FRACTION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// `n_rows x n_features`; `NaN` marks a missing cell before imputation.
    pub features: DMatrix<f64>,
    pub target: DVector<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub columns: Vec<ColumnKind>,
    /// Stable identifier of every row (row index in the source file unless
    /// the file carries a `point_id` column).
    pub row_ids: Vec<usize>,
}

impl Dataset {
    /// Build an all-numeric dataset from row-major data.
    pub fn from_rows(
        name: impl Into<String>,
        rows: &[Vec<f64>],
        target: &[f64],
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let n = rows.len();
        if n != target.len() {
            return Err(Error::LengthMismatch(format!(
                "{n} feature rows but {} targets",
                target.len()
            )));
        }
        let p = feature_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::RaggedRows {
                row: bad,
                expected: p,
                found: rows[bad].len(),
            });
        }
        let features = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Ok(Dataset {
            name: name.into(),
            features,
            target: DVector::from_column_slice(target),
            feature_names,
            target_name: target_name.into(),
            columns: vec![ColumnKind::Numeric; p],
            row_ids: (0..n).collect(),
        })
    }

    /// Numeric dataset with generated column names `x0, x1, ...`.
    pub fn from_matrix(name: impl Into<String>, features: DMatrix<f64>, target: DVector<f64>) -> Self {
        let p = features.ncols();
        let n = features.nrows();
        Dataset {
            name: name.into(),
            features,
            target,
            feature_names: (0..p).map(|j| format!("x{j}")).collect(),
            target_name: "y".to_string(),
            columns: vec![ColumnKind::Numeric; p],
            row_ids: (0..n).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// All feature entries finite and every column numeric.
    pub fn is_model_ready(&self) -> bool {
        self.features.iter().all(|v| v.is_finite())
            && self.columns.iter().all(|c| *c == ColumnKind::Numeric)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let p = self.n_features();
        Dataset {
            name: self.name.clone(),
            features: DMatrix::from_fn(idx.len(), p, |i, j| self.features[(idx[i], j)]),
            target: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.target[i])),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            columns: self.columns.clone(),
            row_ids: idx.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    pub(crate) fn check_same_schema(&self, other: &Dataset) -> Result<()> {
        if self.feature_names != other.feature_names {
            return Err(Error::SchemaMismatch(format!(
                "columns {:?} vs {:?}",
                self.feature_names, other.feature_names
            )));
        }
        for (name, (a, b)) in self
            .feature_names
            .iter()
            .zip(self.columns.iter().zip(&other.columns))
        {
            let same_kind = matches!(
                (a, b),
                (ColumnKind::Numeric, ColumnKind::Numeric)
                    | (ColumnKind::Categorical { .. }, ColumnKind::Categorical { .. })
            );
            if !same_kind {
                return Err(Error::SchemaMismatch(format!(
                    "column `{name}` is numeric in one table and categorical in the other"
                )));
            }
        }
        Ok(())
    }
}
