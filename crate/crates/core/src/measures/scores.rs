use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-point AD values paired with absolute prediction errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdScores {
    pub measure_kind: String,
    pub model_kind: String,
    pub dataset_name: String,
    pub point_ids: Vec<usize>,
    pub values: Vec<f64>,
    pub abs_errors: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    point_id: usize,
    ad_value: f64,
    abs_error: f64,
    measure_kind: String,
    model_kind: String,
    dataset_name: String,
}

impl AdScores {
    pub fn new(
        measure_kind: impl Into<String>,
        point_ids: Vec<usize>,
        values: Vec<f64>,
        abs_errors: Vec<f64>,
    ) -> Result<Self> {
        if point_ids.len() != values.len() || values.len() != abs_errors.len() {
            return Err(Error::LengthMismatch(format!(
                "{} ids, {} values, {} errors",
                point_ids.len(),
                values.len(),
                abs_errors.len()
            )));
        }
        Ok(AdScores {
            measure_kind: measure_kind.into(),
            model_kind: String::new(),
            dataset_name: String::new(),
            point_ids,
            values,
            abs_errors,
        })
    }

    pub fn with_labels(mut self, model_kind: impl Into<String>, dataset_name: impl Into<String>) -> Self {
        self.model_kind = model_kind.into();
        self.dataset_name = dataset_name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row positions sorted by `(ad_value, point_id)`.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.values[a]
                .total_cmp(&self.values[b])
                .then(self.point_ids[a].cmp(&self.point_ids[b]))
        });
        idx
    }
}

/// Write score tables in the interchange layout
/// `point_id,ad_value,abs_error,measure_kind,model_kind,dataset_name`.
pub fn write_scores_csv<'a>(scores: impl IntoIterator<Item = &'a AdScores>, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut wrote_any = false;
    for s in scores {
        for i in 0..s.len() {
            w.serialize(Record {
                point_id: s.point_ids[i],
                ad_value: s.values[i],
                abs_error: s.abs_errors[i],
                measure_kind: s.measure_kind.clone(),
                model_kind: s.model_kind.clone(),
                dataset_name: s.dataset_name.clone(),
            })?;
            wrote_any = true;
        }
    }
    if !wrote_any {
        w.write_record(["point_id", "ad_value", "abs_error", "measure_kind", "model_kind", "dataset_name"])?;
    }
    w.flush()?;
    Ok(())
}

/// Read interchange CSV, grouping rows by `(dataset, model, measure)` in
/// order of first appearance.
pub fn read_scores_csv(input: impl Read) -> Result<Vec<AdScores>> {
    let mut r = csv::Reader::from_reader(input);
    let mut groups: Vec<AdScores> = Vec::new();
    let mut index: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for rec in r.deserialize() {
        let rec: Record = rec?;
        let key = (rec.dataset_name.clone(), rec.model_kind.clone(), rec.measure_kind.clone());
        let g = *index.entry(key).or_insert_with(|| {
            groups.push(AdScores {
                measure_kind: rec.measure_kind.clone(),
                model_kind: rec.model_kind.clone(),
                dataset_name: rec.dataset_name.clone(),
                point_ids: Vec::new(),
                values: Vec::new(),
                abs_errors: Vec::new(),
            });
            groups.len() - 1
        });
        groups[g].point_ids.push(rec.point_id);
        groups[g].values.push(rec.ad_value);
        groups[g].abs_errors.push(rec.abs_error);
    }
    Ok(groups)
}
