use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// Sparse labelled rows read from LIBSVM text.
///
/// Feature indices are stored 0-based; labels are mapped to `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmData {
    pub labels: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub dim: usize,
}

impl LibsvmData {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_norm2(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|(_, v)| v * v).sum()
    }
}

/// Parses `label idx:value idx:value ...` lines with 1-based indices.
/// Blank lines and `#` comments are skipped. The two label values are
/// mapped to `−1` (smaller) and `+1` (larger); anything other than
/// `{−1, +1}` is remapped with a warning.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<LibsvmData> {
    let mut raw_labels = Vec::new();
    let mut rows = Vec::new();
    let mut dim = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid label '{label_tok}'"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: "non-finite label".into(),
            });
        }
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected index:value, got '{tok}'"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid feature index '{idx}'"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "feature indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("feature index {idx} not increasing"),
                });
            }
            last = idx;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid feature value '{val}'"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "non-finite feature value".into(),
                });
            }
            dim = dim.max(idx);
            row.push((idx - 1, val));
        }
        raw_labels.push((line_no, label));
        rows.push(row);
    }

    let distinct: BTreeSet<u64> = raw_labels.iter().map(|(_, l)| l.to_bits()).collect();
    let values: Vec<f64> = {
        let mut v: Vec<f64> = distinct.iter().map(|b| f64::from_bits(*b)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    if values.len() > 2 {
        let line = raw_labels
            .iter()
            .find(|(_, l)| *l != values[0] && *l != values[1])
            .unwrap()
            .0;
        return Err(Error::Parse {
            line,
            message: format!("non-binary labels {values:?}"),
        });
    }
    let (neg, pos) = match values.as_slice() {
        [] => (-1.0, 1.0),
        [one] if *one > 0.0 => (f64::NAN, *one),
        [one] => (*one, f64::NAN),
        [a, b] => (*a, *b),
        _ => unreachable!(),
    };
    if (neg != -1.0 && !neg.is_nan()) || (pos != 1.0 && !pos.is_nan()) {
        log::warn!("remapping labels {neg} -> -1 and {pos} -> +1");
    }
    let labels = raw_labels
        .iter()
        .map(|(_, l)| if *l == pos { 1.0 } else { -1.0 })
        .collect();
    Ok(LibsvmData { labels, rows, dim })
}

pub fn read_libsvm(path: impl AsRef<Path>) -> Result<LibsvmData> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_libsvm(std::io::BufReader::new(f))
}
