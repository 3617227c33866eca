//! Matrices on disk are nested arrays of rows.

use nalgebra::DMatrix;

pub type Rows = Vec<Vec<f64>>;

pub fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &Rows, what: &str) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(format!(
            "{what}: matrix must have at least one row and one column"
        ));
    }
    if let Some(k) = rows.iter().position(|r| r.len() != ncols) {
        return Err(format!(
            "{what}: row {k} has {} entries, expected {ncols}",
            rows[k].len()
        ));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

pub fn list_from_rows(list: &[Rows], what: &str) -> Result<Vec<DMatrix<f64>>, String> {
    list.iter()
        .enumerate()
        .map(|(i, m)| from_rows(m, &format!("{what}[{i}]")))
        .collect()
}

pub fn list_to_rows(list: &[DMatrix<f64>]) -> Vec<Rows> {
    list.iter().map(to_rows).collect()
}
