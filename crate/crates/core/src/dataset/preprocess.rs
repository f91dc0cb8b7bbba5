use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impute {
    Mean,
    Median,
    DropRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    Zscore,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalEncoding {
    /// Level index written in base 2, one column per bit
    /// (`max(1, ceil(log2(levels)))` columns).
    Binary,
    /// Level index kept as a single ordinal column.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierPolicy {
    Keep,
    /// Clip numeric columns to `mean ± k·std` of the fitting table.
    ZscoreClip(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSpec {
    pub impute: Impute,
    pub normalize: Normalize,
    pub categorical_encoding: CategoricalEncoding,
    pub outlier_policy: OutlierPolicy,
    /// Drop the later column of every pair whose |Pearson r| on the fitting
    /// table exceeds this value. `None` disables the filter.
    pub correlation_filter: Option<f64>,
    /// Z-score the target with fitting-table statistics.
    pub standardize_target: bool,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        PreprocessSpec {
            impute: Impute::Mean,
            normalize: Normalize::Zscore,
            categorical_encoding: CategoricalEncoding::Binary,
            outlier_policy: OutlierPolicy::Keep,
            correlation_filter: None,
            standardize_target: true,
        }
    }
}

/// Preprocessing statistics fitted on one table (the training split) and
/// applied unchanged to any table with the same schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub spec: PreprocessSpec,
    input_names: Vec<String>,
    input_kinds: Vec<ColumnKind>,
    /// Imputation value per input column (category code for categoricals).
    fill: Vec<f64>,
    clip: Vec<Option<(f64, f64)>>,
    encoded_names: Vec<String>,
    /// Encoded columns surviving the correlation filter.
    keep: Vec<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
    target_center: f64,
    target_scale: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_std(v: &[f64], m: f64) -> f64 {
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn mode_code(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (s[0], 0usize);
    let mut i = 0;
    while i < s.len() {
        let j = s[i..].iter().position(|&x| x != s[i]).map_or(s.len(), |k| i + k);
        if j - i > best_n {
            best = s[i];
            best_n = j - i;
        }
        i = j;
    }
    best
}

fn bits_for(levels: usize) -> usize {
    let mut bits = 1;
    while (1usize << bits) < levels {
        bits += 1;
    }
    bits
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

impl Preprocessor {
    pub fn fit(spec: &PreprocessSpec, fit_on: &Dataset) -> Result<Self> {
        let p = fit_on.n_features();
        let rows: Vec<usize> = match spec.impute {
            Impute::DropRow => (0..fit_on.n_rows())
                .filter(|&i| fit_on.features.row(i).iter().all(|v| !v.is_nan()))
                .collect(),
            _ => (0..fit_on.n_rows()).collect(),
        };
        if rows.is_empty() {
            return Err(Error::DegenerateInput("no complete rows to fit preprocessing".into()));
        }

        let mut fill = Vec::with_capacity(p);
        for j in 0..p {
            let observed: Vec<f64> = rows
                .iter()
                .map(|&i| fit_on.features[(i, j)])
                .filter(|v| !v.is_nan())
                .collect();
            let value = if observed.is_empty() {
                warn!("column `{}` has no observed values; filling with 0", fit_on.feature_names[j]);
                0.0
            } else {
                match (&fit_on.columns[j], spec.impute) {
                    (ColumnKind::Categorical { .. }, _) => mode_code(&observed),
                    (ColumnKind::Numeric, Impute::Median) => median(&observed),
                    (ColumnKind::Numeric, _) => mean(&observed),
                }
            };
            fill.push(value);
        }

        let mut pre = Preprocessor {
            spec: spec.clone(),
            input_names: fit_on.feature_names.clone(),
            input_kinds: fit_on.columns.clone(),
            fill,
            clip: vec![None; p],
            encoded_names: Vec::new(),
            keep: Vec::new(),
            center: Vec::new(),
            scale: Vec::new(),
            target_center: 0.0,
            target_scale: 1.0,
        };

        let filled = pre.impute_rows(fit_on, &rows);
        if let OutlierPolicy::ZscoreClip(k) = spec.outlier_policy {
            for j in 0..p {
                if pre.input_kinds[j] == ColumnKind::Numeric {
                    let col: Vec<f64> = filled.column(j).iter().copied().collect();
                    let m = mean(&col);
                    let s = pop_std(&col, m);
                    pre.clip[j] = Some((m - k * s, m + k * s));
                }
            }
        }
        let clipped = pre.apply_clip(filled);
        let (encoded, names) = pre.encode(&clipped);
        pre.encoded_names = names;

        let q = encoded.ncols();
        let mut keep: Vec<usize> = (0..q).collect();
        if let Some(limit) = spec.correlation_filter {
            let cols: Vec<Vec<f64>> = (0..q).map(|j| encoded.column(j).iter().copied().collect()).collect();
            let mut dropped = vec![false; q];
            for a in 0..q {
                if dropped[a] {
                    continue;
                }
                for b in a + 1..q {
                    if !dropped[b] && pearson(&cols[a], &cols[b]).abs() > limit {
                        dropped[b] = true;
                    }
                }
            }
            keep.retain(|&j| !dropped[j]);
        }
        pre.keep = keep;

        for &j in &pre.keep {
            let col: Vec<f64> = encoded.column(j).iter().copied().collect();
            match spec.normalize {
                Normalize::Zscore => {
                    let m = mean(&col);
                    pre.center.push(m);
                    pre.scale.push(pop_std(&col, m));
                }
                Normalize::None => {
                    pre.center.push(0.0);
                    pre.scale.push(1.0);
                }
            }
        }

        if spec.standardize_target {
            let t: Vec<f64> = rows.iter().map(|&i| fit_on.target[i]).collect();
            let m = mean(&t);
            let s = pop_std(&t, m);
            pre.target_center = m;
            pre.target_scale = if s > 0.0 { s } else { 1.0 };
        }
        Ok(pre)
    }

    /// Names of the model-ready columns.
    pub fn output_names(&self) -> Vec<String> {
        self.keep.iter().map(|&j| self.encoded_names[j].clone()).collect()
    }

    pub fn n_outputs(&self) -> usize {
        self.keep.len()
    }

    /// Map raw feature rows of `d` to categorical codes of the fitting table.
    fn recode(&self, d: &Dataset) -> Result<DMatrix<f64>> {
        if d.feature_names != self.input_names {
            return Err(Error::SchemaMismatch(format!(
                "expected columns {:?}, found {:?}",
                self.input_names, d.feature_names
            )));
        }
        let mut x = d.features.clone();
        for (j, (fit_kind, kind)) in self.input_kinds.iter().zip(&d.columns).enumerate() {
            match (fit_kind, kind) {
                (ColumnKind::Numeric, ColumnKind::Numeric) => {}
                (ColumnKind::Categorical { levels: fit }, ColumnKind::Categorical { levels }) => {
                    if fit != levels {
                        for i in 0..x.nrows() {
                            let v = x[(i, j)];
                            if !v.is_nan() {
                                x[(i, j)] = fit
                                    .iter()
                                    .position(|l| *l == levels[v as usize])
                                    .map_or(f64::NAN, |c| c as f64);
                            }
                        }
                    }
                }
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` changed between numeric and categorical",
                        self.input_names[j]
                    )))
                }
            }
        }
        Ok(x)
    }

    fn impute_rows(&self, d: &Dataset, rows: &[usize]) -> DMatrix<f64> {
        let p = d.n_features();
        DMatrix::from_fn(rows.len(), p, |i, j| {
            let v = d.features[(rows[i], j)];
            if v.is_nan() {
                self.fill[j]
            } else {
                v
            }
        })
    }

    fn apply_clip(&self, mut x: DMatrix<f64>) -> DMatrix<f64> {
        for (j, c) in self.clip.iter().enumerate() {
            if let Some((lo, hi)) = *c {
                for v in x.column_mut(j).iter_mut() {
                    *v = v.clamp(lo, hi);
                }
            }
        }
        x
    }

    fn encode(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<String>) {
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut names = Vec::new();
        for (j, kind) in self.input_kinds.iter().enumerate() {
            let col = x.column(j);
            match (kind, self.spec.categorical_encoding) {
                (ColumnKind::Categorical { levels }, CategoricalEncoding::Binary) => {
                    for b in 0..bits_for(levels.len()) {
                        cols.push(col.iter().map(|&c| ((c as usize >> b) & 1) as f64).collect());
                        names.push(format!("{}_bit{b}", self.input_names[j]));
                    }
                }
                _ => {
                    cols.push(col.iter().copied().collect());
                    names.push(self.input_names[j].clone());
                }
            }
        }
        let m = DMatrix::from_fn(x.nrows(), cols.len(), |i, j| cols[j][i]);
        (m, names)
    }

    /// Apply the fitted statistics to `d`.
    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        let coded = self.recode(d)?;
        let rows: Vec<usize> = match self.spec.impute {
            Impute::DropRow => (0..coded.nrows())
                .filter(|&i| coded.row(i).iter().all(|v| !v.is_nan()))
                .collect(),
            _ => (0..coded.nrows()).collect(),
        };
        let staged = Dataset { features: coded, ..d.clone() };
        let filled = self.impute_rows(&staged, &rows);
        let clipped = self.apply_clip(filled);
        let (encoded, _) = self.encode(&clipped);
        let features = DMatrix::from_fn(rows.len(), self.keep.len(), |i, k| {
            let j = self.keep[k];
            let (c, s) = (self.center[k], self.scale[k]);
            if s > 0.0 {
                (encoded[(i, j)] - c) / s
            } else {
                0.0
            }
        });
        let target = DVector::from_iterator(
            rows.len(),
            rows.iter().map(|&i| self.transform_target(d.target[i])),
        );
        Ok(Dataset {
            name: d.name.clone(),
            features,
            target,
            feature_names: self.output_names(),
            target_name: d.target_name.clone(),
            columns: vec![ColumnKind::Numeric; self.keep.len()],
            row_ids: rows.iter().map(|&i| d.row_ids[i]).collect(),
        })
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        (y - self.target_center) / self.target_scale
    }

    pub fn inverse_target(&self, y: f64) -> f64 {
        y * self.target_scale + self.target_center
    }
}

/// Fit preprocessing on `fit_on` and apply it to `d`.
pub fn preprocess(d: &Dataset, spec: &PreprocessSpec, fit_on: &Dataset) -> Result<Dataset> {
    d.check_same_schema(fit_on)?;
    Preprocessor::fit(spec, fit_on)?.transform(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_csv_reader;

    fn numeric(cols: &[&[f64]]) -> Dataset {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let names = (0..cols.len()).map(|j| format!("c{j}")).collect();
        Dataset::from_rows("t", &rows, &vec![0.0; n], names, "y").unwrap()
    }

    fn spec_plain() -> PreprocessSpec {
        PreprocessSpec { standardize_target: false, ..Default::default() }
    }

    #[test]
    fn zscore_uses_population_std() {
        let d = numeric(&[&[1.0, 2.0, 3.0]]);
        let out = preprocess(&d, &spec_plain(), &d).unwrap();
        let s = (1.5f64).sqrt();
        let expect = [-s, 0.0, s];
        for (a, b) in out.features.column(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((out.features[(0, 0)] + 1.2247).abs() < 1e-4);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let d = numeric(&[&[4.0, 4.0, 4.0], &[1.0, 2.0, 3.0]]);
        let out = preprocess(&d, &spec_plain(), &d).unwrap();
        assert!(out.features.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fitted_columns_standardized() {
        let d = numeric(&[&[0.3, 9.0, -2.0, 5.5, 1.0], &[10.0, 20.0, 15.0, 12.0, 11.0]]);
        let out = preprocess(&d, &spec_plain(), &d).unwrap();
        for col in out.features.column_iter() {
            let v: Vec<f64> = col.iter().copied().collect();
            let m = mean(&v);
            assert!(m.abs() < 1e-9);
            assert!((pop_std(&v, m) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn binary_encoding_two_levels() {
        let d = load_csv_reader("color,y\nred,1\nwhite,2\nred,3\n".as_bytes(), "t", Some("y"), true).unwrap();
        let spec = PreprocessSpec { normalize: Normalize::None, ..spec_plain() };
        let out = preprocess(&d, &spec, &d).unwrap();
        assert_eq!(out.n_features(), 1);
        assert_eq!(out.features.column(0).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn binary_encoding_three_levels_uses_two_bits() {
        let d = load_csv_reader("sex,y\nM,1\nF,2\nI,3\n".as_bytes(), "t", Some("y"), true).unwrap();
        let spec = PreprocessSpec { normalize: Normalize::None, ..spec_plain() };
        let out = preprocess(&d, &spec, &d).unwrap();
        assert_eq!(out.feature_names, vec!["sex_bit0", "sex_bit1"]);
        // levels sorted: F=0, I=1, M=2
        assert_eq!(out.row(0), vec![0.0, 1.0]);
        assert_eq!(out.row(1), vec![0.0, 0.0]);
        assert_eq!(out.row(2), vec![1.0, 0.0]);
    }

    #[test]
    fn unseen_level_is_imputed_with_mode() {
        let train = load_csv_reader("c,y\na,1\nb,2\nb,3\n".as_bytes(), "t", Some("y"), true).unwrap();
        let test = load_csv_reader("c,y\nz,1\na,2\n".as_bytes(), "t", Some("y"), true).unwrap();
        let spec = PreprocessSpec { normalize: Normalize::None, ..spec_plain() };
        let pre = Preprocessor::fit(&spec, &train).unwrap();
        let out = pre.transform(&test).unwrap();
        assert_eq!(out.features.column(0).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn imputes_training_mean() {
        let train = load_csv_reader("a,y\n1,0\nbad,0\n5,0\n".as_bytes(), "t", Some("y"), true).unwrap();
        let spec = PreprocessSpec { normalize: Normalize::None, ..spec_plain() };
        let out = preprocess(&train, &spec, &train).unwrap();
        assert_eq!(out.features[(1, 0)], 3.0);
    }

    #[test]
    fn median_and_drop_row() {
        let d = numeric(&[&[1.0, f64::NAN, 2.0, 10.0]]);
        let spec = PreprocessSpec { impute: Impute::Median, normalize: Normalize::None, ..spec_plain() };
        assert_eq!(preprocess(&d, &spec, &d).unwrap().features[(1, 0)], 2.0);
        let spec = PreprocessSpec { impute: Impute::DropRow, ..spec };
        let out = preprocess(&d, &spec, &d).unwrap();
        assert_eq!(out.n_rows(), 3);
        assert_eq!(out.row_ids, vec![0, 2, 3]);
    }

    #[test]
    fn outlier_clip() {
        let d = numeric(&[&[0.0, 0.0, 0.0, 0.0, 100.0]]);
        let spec = PreprocessSpec {
            outlier_policy: OutlierPolicy::ZscoreClip(1.0),
            normalize: Normalize::None,
            ..spec_plain()
        };
        let out = preprocess(&d, &spec, &d).unwrap();
        // mean 20, std 40 -> upper bound 60
        assert_eq!(out.features[(4, 0)], 60.0);
    }

    #[test]
    fn correlation_filter_drops_later_twin() {
        let d = numeric(&[&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.1, 6.0, 8.0], &[1.0, -1.0, 1.0, -1.0]]);
        let spec = PreprocessSpec { correlation_filter: Some(0.95), ..spec_plain() };
        let out = preprocess(&d, &spec, &d).unwrap();
        assert_eq!(out.feature_names, vec!["c0", "c2"]);
    }

    #[test]
    fn schema_mismatch() {
        let a = numeric(&[&[1.0, 2.0]]);
        let b = numeric(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!(matches!(preprocess(&a, &spec_plain(), &b), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn target_standardization_round_trip() {
        let mut d = numeric(&[&[1.0, 2.0, 3.0]]);
        d.target = DVector::from_vec(vec![2.0, 4.0, 9.0]);
        let pre = Preprocessor::fit(&PreprocessSpec::default(), &d).unwrap();
        let out = pre.transform(&d).unwrap();
        let t: Vec<f64> = out.target.iter().copied().collect();
        assert!(mean(&t).abs() < 1e-12);
        for (z, y) in out.target.iter().zip(d.target.iter()) {
            assert!((pre.inverse_target(*z) - y).abs() < 1e-12);
        }
    }
}
