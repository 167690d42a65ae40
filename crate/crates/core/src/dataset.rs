//! Row-major sample matrices and the headerless CSV format used on disk.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// An n x d collection of sample vectors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Real> {
    n: usize,
    d: usize,
    data: Vec<T>,
}

impl<T: Real> Dataset<T> {
    pub fn from_flat(n: usize, d: usize, data: Vec<T>) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dataset dimension must be at least 1"));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("row {} column {}", i / d, i % d)));
        }
        Ok(Dataset { n, d, data })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        let n = rows.len();
        let mut data = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            data.extend(row);
        }
        Self::from_flat(n, d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// Copies the given rows, in order, into a new dataset.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Dataset {
            n: indices.len(),
            d: self.d,
            data,
        }
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Parses headerless CSV: one row per line, `d` decimal floats per row.
    /// Blank lines are skipped.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let row = trimmed
                .split(',')
                .map(|field| {
                    field
                        .trim()
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|e| Error::Parse(format!("line {}: {field:?}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    /// Writes headerless CSV using the shortest round-trip decimal form.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{x}").expect("write to String");
            }
            line.push('\n');
            writer.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_ragged_rows() {
        let err = Dataset::from_rows(vec![vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Dataset::from_rows(vec![vec![1.0, f64::INFINITY]]).is_err());
    }

    #[test]
    fn csv_parse_errors_name_the_line() {
        let err = Dataset::<f64>::read_csv("1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn select_keeps_order() {
        let ds = Dataset::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(ds.select(&[2, 0]).as_flat(), &[2.0, 0.0]);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)
        ) {
            let ds = Dataset::from_rows(rows).unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            let back = Dataset::<f64>::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
