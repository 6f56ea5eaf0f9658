//! Core data containers: observation matrices, subset indices, and binary
//! inlier/outlier maps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An n-by-p observation matrix. Rows are cases, columns are features.
/// All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidData(
                "data matrix must have at least one row and one column".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData(
                "data matrix contains NaN or infinite entries".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidData("no rows provided".into()));
        }
        let p = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::InvalidData(format!(
                    "ragged input: row {} has {} columns, expected {}",
                    i,
                    r.len(),
                    p
                )));
            }
        }
        let values = DMatrix::from_row_iterator(rows.len(), p, rows.iter().flatten().copied());
        Self::new(values)
    }

    /// Wrap a matrix produced internally from finite inputs.
    pub(crate) fn from_matrix_unchecked(values: DMatrix<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    /// New matrix containing the given rows, in the given order.
    /// Indices may repeat (bootstrap resamples do).
    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        let p = self.p();
        let values = DMatrix::from_fn(indices.len(), p, |i, j| self.values[(indices[i], j)]);
        Self { values }
    }

    /// First `q` columns as a new matrix.
    pub fn left_columns(&self, q: usize) -> DataMatrix {
        assert!(q >= 1 && q <= self.p());
        Self {
            values: self.values.columns(0, q).into_owned(),
        }
    }
}

/// A strictly sorted, duplicate-free set of row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetIndex {
    indices: Vec<usize>,
}

impl SubsetIndex {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidData("subset index must be nonempty".into()));
        }
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidData(format!(
                    "duplicate index {} in subset",
                    w[0]
                )));
            }
        }
        if *indices.last().unwrap() >= n {
            return Err(Error::InvalidData(format!(
                "index {} out of range for n = {}",
                indices.last().unwrap(),
                n
            )));
        }
        Ok(Self { indices })
    }

    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn h(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Complement of the subset as a 0/1 outlier map (1 = not in subset).
    pub fn complement_map(&self, n: usize) -> BinaryMap {
        let mut labels = vec![1u8; n];
        for &i in &self.indices {
            labels[i] = 0;
        }
        BinaryMap::new(labels).expect("labels are 0/1 by construction")
    }
}

/// Per-observation inlier/outlier labels; 0 = inlier, 1 = outlier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    labels: Vec<u8>,
}

impl BinaryMap {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidData("labels must be 0 or 1".into()));
        }
        Ok(Self { labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn count_ones(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn complement(&self) -> BinaryMap {
        BinaryMap {
            labels: self.labels.iter().map(|&l| 1 - l).collect(),
        }
    }
}
