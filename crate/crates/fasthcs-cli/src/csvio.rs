//! CSV ingestion: comma-separated numeric matrices, '.' decimal point,
//! UTF-8 with LF or CRLF line endings, optionally one header row. Errors
//! name the offending row and column so a bad export is easy to fix.

use std::path::Path;

use nalgebra::DMatrix;

use crate::commands::CliError;

/// Read a CSV file into a dense matrix. `header` skips the first record.
/// Width is set by the first data row; ragged rows, non-numeric cells, and
/// non-finite values are input errors.
pub fn read_matrix(path: &Path, header: bool) -> Result<DMatrix<f64>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let text = raw.strip_prefix('\u{feff}').unwrap_or(&raw);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if header && idx == 0 {
            continue;
        }
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if rows.is_empty() {
            width = record.len();
        } else if record.len() != width {
            return Err(CliError::input(format!(
                "{}: row {line} has {} fields, expected {width}",
                path.display(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                CliError::input(format!(
                    "{}: row {line}, column {}: could not parse {:?} as a number",
                    path.display(),
                    col + 1,
                    field
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::input(format!(
                    "{}: row {line}, column {}: non-finite value {field}",
                    path.display(),
                    col + 1
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() || width == 0 {
        return Err(CliError::input(format!(
            "{}: no data rows to read",
            path.display()
        )));
    }
    let n = rows.len();
    Ok(DMatrix::from_fn(n, width, |r, c| rows[r][c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    #[test]
    fn reads_plain_and_headered_csv() {
        let file = write_tmp("1.0,2.0\n3.0,4.5\n");
        let m = read_matrix(file.path(), false).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 2));
        assert_eq!(m[(1, 1)], 4.5);

        let file = write_tmp("a,b\r\n1,2\r\n3,4\r\n");
        let m = read_matrix(file.path(), true).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 2));
        assert_eq!(m[(0, 0)], 1.0);
    }

    #[test]
    fn strips_a_byte_order_mark() {
        let file = write_tmp("\u{feff}1,2\n3,4\n");
        let m = read_matrix(file.path(), false).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
    }

    #[test]
    fn ragged_row_error_names_the_row() {
        let file = write_tmp("1,2,3\n4,5\n");
        let err = read_matrix(file.path(), false).unwrap_err();
        assert!(err.message.contains("row 2"), "{}", err.message);
        assert!(err.message.contains("2 fields, expected 3"), "{}", err.message);
    }

    #[test]
    fn bad_cell_error_names_row_and_column() {
        let file = write_tmp("1,2\n3,oops\n");
        let err = read_matrix(file.path(), false).unwrap_err();
        assert!(err.message.contains("row 2, column 2"), "{}", err.message);

        let file = write_tmp("1,2\ninf,4\n");
        let err = read_matrix(file.path(), false).unwrap_err();
        assert!(err.message.contains("non-finite"), "{}", err.message);
    }

    #[test]
    fn empty_input_is_rejected() {
        let file = write_tmp("");
        assert!(read_matrix(file.path(), false).is_err());
        let file = write_tmp("a,b\n");
        assert!(read_matrix(file.path(), true).is_err());
    }
}
