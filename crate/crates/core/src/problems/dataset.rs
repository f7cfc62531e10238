//! Sparse binary-classification datasets in LIBSVM text format.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("expected at most two distinct labels, found {0:?}")]
    Label(Vec<f64>),
    #[error("dataset has no samples")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Feature matrix in compressed sparse row form plus `±1` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    /// raw label value -> mapped label, sorted by raw value
    label_map: Vec<(f64, f64)>,
}

impl Dataset {
    /// Builds a dataset from dense rows. Labels must already be `±1`.
    pub fn from_dense(rows: &[Vec<f64>], labels: &[f64]) -> Self {
        assert_eq!(rows.len(), labels.len());
        assert!(labels.iter().all(|&y| y == 1.0 || y == -1.0), "labels must be ±1");
        let n_features = rows.first().map_or(0, Vec::len);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in rows {
            assert_eq!(r.len(), n_features);
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut label_map: Vec<(f64, f64)> = Vec::new();
        for &y in labels {
            if !label_map.iter().any(|&(r, _)| r == y) {
                label_map.push((y, y));
            }
        }
        label_map.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            n_features,
            row_ptr,
            col_idx,
            values,
            labels: labels.to_vec(),
            label_map,
        }
    }

    pub fn open(path: impl AsRef<Path>, n_override: Option<usize>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_libsvm(BufReader::new(file), n_override).map_err(|e| match e {
            DataError::Io { source, .. } => DataError::Io {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension `n`.
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Sparse row `i` as `(column, value)` pairs with 0-based columns.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for (j, v) in self.row(i) {
            out[j] = v;
        }
        out
    }

    /// `X_iᵀ x`
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    /// `out += alpha * X_i`
    pub fn add_row(&self, i: usize, alpha: f64, out: &mut [f64]) {
        for (j, v) in self.row(i) {
            out[j] += alpha * v;
        }
    }

    /// Raw label values seen in the source and what each was mapped to.
    pub fn label_map(&self) -> &[(f64, f64)] {
        &self.label_map
    }

    /// Counts of `(-1, +1)` labels.
    pub fn label_histogram(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0.0).count();
        (self.labels.len() - pos, pos)
    }
}

/// Reads LIBSVM sparse text: `<label> <idx>:<val> ...` with 1-based indices.
///
/// Blank lines and `#` comments are skipped. `n` is the largest index seen
/// unless `n_override` is given. The larger of the two raw label values maps
/// to `+1`.
pub fn parse_libsvm<R: BufRead>(reader: R, n_override: Option<usize>) -> Result<Dataset, DataError> {
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| DataError::Io {
            path: String::new(),
            source,
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| DataError::Parse {
            line: lineno,
            reason: format!("invalid label `{label_tok}`"),
        })?;
        if !label.is_finite() {
            return Err(DataError::Parse {
                line: lineno,
                reason: format!("invalid label `{label_tok}`"),
            });
        }
        let row_start = col_idx.len();
        let mut last = 0usize;
        for tok in tokens {
            if tok.starts_with("qid:") {
                continue;
            }
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: lineno,
                reason: format!("expected `index:value`, got `{tok}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::Parse {
                line: lineno,
                reason: format!("invalid feature index `{idx}`"),
            })?;
            let val: f64 = val.parse().map_err(|_| DataError::Parse {
                line: lineno,
                reason: format!("invalid feature value `{val}`"),
            })?;
            if idx == 0 {
                return Err(DataError::Parse {
                    line: lineno,
                    reason: "feature indices are 1-based".into(),
                });
            }
            if !val.is_finite() {
                return Err(DataError::Parse {
                    line: lineno,
                    reason: format!("non-finite feature value `{val}`"),
                });
            }
            if idx <= last {
                return Err(DataError::Parse {
                    line: lineno,
                    reason: format!("feature index {idx} is not increasing"),
                });
            }
            last = idx;
            max_index = max_index.max(idx);
            if val != 0.0 {
                col_idx.push(idx - 1);
                values.push(val);
            }
        }
        debug_assert!(col_idx.len() >= row_start);
        row_ptr.push(col_idx.len());
        raw_labels.push((label, lineno));
    }

    if raw_labels.is_empty() {
        return Err(DataError::Empty);
    }
    let n_features = match n_override {
        Some(n) if n < max_index => {
            let line = raw_labels
                .iter()
                .enumerate()
                .find(|(i, _)| col_idx[row_ptr[*i]..row_ptr[*i + 1]].iter().any(|&c| c >= n))
                .map_or(0, |(_, &(_, l))| l);
            return Err(DataError::Parse {
                line,
                reason: format!("feature index exceeds configured dimension {n}"),
            });
        }
        Some(n) => n,
        None => max_index,
    };

    let mut distinct: Vec<f64> = Vec::new();
    for &(y, _) in &raw_labels {
        if !distinct.contains(&y) {
            distinct.push(y);
        }
    }
    distinct.sort_by(f64::total_cmp);
    let label_map: Vec<(f64, f64)> = match distinct.as_slice() {
        [only] => vec![(*only, if *only > 0.0 { 1.0 } else { -1.0 })],
        [lo, hi] => vec![(*lo, -1.0), (*hi, 1.0)],
        _ => return Err(DataError::Label(distinct)),
    };
    let labels = raw_labels
        .iter()
        .map(|&(y, _)| label_map.iter().find(|&&(r, _)| r == y).expect("mapped").1)
        .collect();

    Ok(Dataset {
        n_features,
        row_ptr,
        col_idx,
        values,
        labels,
        label_map,
    })
}
