//! CSV datasets and the shipped banknote fixture.
//!
//! Files have one header row naming the variables, then one row per
//! observation. Every cell must parse as a finite number; missing values are
//! rejected rather than imputed.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub values: Matrix,
}

impl Dataset {
    pub fn new(names: Vec<String>, values: Matrix) -> Result<Self> {
        if names.len() != values.cols() {
            return Err(Error::validation(format!(
                "{} column names for {} columns",
                names.len(),
                values.cols()
            )));
        }
        if !values.is_finite() {
            return Err(Error::validation("dataset contains non-finite values"));
        }
        Ok(Dataset { names, values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn p(&self) -> usize {
        self.values.cols()
    }

    /// Parses CSV text; `source` only labels error messages.
    pub fn from_reader(reader: impl Read, source: &Path) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(parse_err(1, "empty file or missing header".into()));
        }
        let p = names.len();
        let mut data = Vec::new();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |pos| pos.line());
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |pos| pos.line());
            if rec.len() != p {
                return Err(parse_err(
                    line,
                    format!("expected {p} fields, found {}", rec.len()),
                ));
            }
            for (col, cell) in rec.iter().enumerate() {
                let x: f64 = cell.parse().map_err(|_| {
                    parse_err(line, format!("column {} ('{}'): not a number: '{cell}'", col + 1, names[col]))
                })?;
                if !x.is_finite() {
                    return Err(parse_err(
                        line,
                        format!("column {} ('{}'): non-finite value '{cell}'", col + 1, names[col]),
                    ));
                }
                data.push(x);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(parse_err(1, "no data rows".into()));
        }
        Dataset::new(names, Matrix::from_row_major(rows, p, data)?)
    }

    pub fn to_writer(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.names).map_err(io)?;
        for i in 0..self.n() {
            // `{}` prints the shortest representation that parses back exactly.
            w.write_record(self.values.row(i).iter().map(|x| format!("{x}")))
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    Dataset::from_reader(std::io::BufReader::new(file), path)
}

pub fn save_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path)?;
    data.to_writer(std::io::BufWriter::new(file))
}

/// Sample size of the banknote case study.
pub const BANKNOTE_N: usize = 85;

const BANKNOTE_CSV: &str = include_str!("../fixtures/banknote_cov.csv");

/// The published covariance matrix of the four banknote measurements, exactly
/// as printed (unbiased divisor `n - 1`).
pub fn banknote_printed() -> Dataset {
    Dataset::from_reader(BANKNOTE_CSV.as_bytes(), &PathBuf::from("banknote_cov.csv"))
        .expect("shipped fixture parses")
}

/// The banknote covariance rescaled by `(n-1)/n` to divisor `n`.
pub fn banknote_covariance() -> Matrix {
    let c = (BANKNOTE_N as f64 - 1.0) / BANKNOTE_N as f64;
    banknote_printed().values.scale(c)
}

/// The hypothesized second principal direction `(1, 1, 0, 0)/√2`.
pub fn banknote_theta0() -> Vec<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![h, h, 0.0, 0.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        Dataset::from_reader(s.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn handwritten_file() {
        let d = parse("a,b\n1,2\n3,4.5\n-1e3,0\n").unwrap();
        assert_eq!(d.names, vec!["a", "b"]);
        assert_eq!(d.values, Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.5], vec![-1e3, 0.0]]).unwrap());
    }

    #[test]
    fn na_cell_names_line_and_column() {
        let err = parse("a,b\n1,2\n3,NA\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{msg}");
        assert!(msg.contains("column 2") && msg.contains("NA"), "{msg}");
    }

    #[test]
    fn ragged_and_empty() {
        assert!(matches!(parse("a,b\n1,2\n3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
        assert!(matches!(parse("a,b\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("a,b\n1,inf\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn fixture_is_symmetric() {
        let d = banknote_printed();
        assert_eq!(d.names, vec!["L", "R", "B", "T"]);
        let m = &d.values;
        assert_eq!(m.sub(&m.transpose()).unwrap().max_abs(), 0.0);
        assert_eq!(m[(2, 3)], -43.30);
    }
}
