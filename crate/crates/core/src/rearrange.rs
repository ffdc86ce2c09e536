//! Cell rearrangement: restore the initial multiset of vorticity values by
//! matching ranks.

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Initial values sorted in descending order. Equal values keep their vertex
/// index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedValueTable {
    values: Vec<f64>,
}

impl SortedValueTable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Vertex indices ordered by descending value, ties by ascending index.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

pub fn build_table(omega0: &ScalarField) -> SortedValueTable {
    build_table_from_values(omega0.values())
}

pub fn build_table_from_values(values: &[f64]) -> SortedValueTable {
    let order = descending_order(values);
    SortedValueTable {
        values: order.iter().map(|&k| values[k]).collect(),
    }
}

/// The k-th largest current value is replaced by the k-th largest initial
/// value.
pub fn rank_project(omega: &ScalarField, table: &SortedValueTable) -> Result<ScalarField> {
    let out = rank_project_values(omega.values(), table)?;
    ScalarField::from_values(*omega.grid(), out)
}

pub fn rank_project_values(values: &[f64], table: &SortedValueTable) -> Result<Vec<f64>> {
    if values.len() != table.len() {
        return Err(Error::Input(format!(
            "field has {} values but the rank table has {}",
            values.len(),
            table.len()
        )));
    }
    let order = descending_order(values);
    let mut out = vec![0.0; values.len()];
    for (rank, &k) in order.iter().enumerate() {
        out[k] = table.values[rank];
    }
    Ok(out)
}
