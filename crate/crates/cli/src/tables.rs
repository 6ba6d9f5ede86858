//! Numeric CSV tables (`x,w`, `x,u`, `t,x,u`). A first row that does not
//! parse as numbers is taken as a header.

use std::path::Path;

/// Reads exactly `columns` numeric columns, returned column-major.
pub fn read_columns(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut out = vec![Vec::new(); columns];
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("{}: {e}", path.display()))?;
        let row = record.position().map_or(k + 1, |p| p.line() as usize);
        let parsed: Option<Vec<f64>> = record
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let values = match parsed {
            Some(v) => v,
            None if k == 0 => continue,
            None => {
                return Err(format!(
                    "{}:{row}: non-numeric or non-finite field",
                    path.display()
                ))
            }
        };
        if values.len() != columns {
            return Err(format!(
                "{}:{row}: expected {columns} columns, found {}",
                path.display(),
                values.len()
            ));
        }
        for (col, v) in out.iter_mut().zip(values) {
            col.push(v);
        }
    }
    if out[0].is_empty() {
        return Err(format!("{}: no data rows", path.display()));
    }
    Ok(out)
}
