//! Data model shared by every stage: dense row-major matrices, column
//! standardization, random frequency matrices, the complex exponential
//! feature map, nearest-centroid assignment and SSE.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngKey, Stream};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

/// `N × d` data points, one per row.
pub type Dataset = Matrix;

/// `k × d` centroids, one per row.
pub type Centroids = Matrix;

impl Matrix {
    /// Builds a matrix from row-major values. Rejects empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidData(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows picked by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            values,
        }
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Matrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-column affine map to zero mean and unit population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn transform(&self, data: &Matrix) -> Matrix {
        let mut out = data.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    pub fn inverse_transform(&self, data: &Matrix) -> Matrix {
        let mut out = data.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.scale[j] + self.mean[j];
            }
        }
        out
    }
}

/// Standardizes columns with the population (divide-by-N) convention.
/// Zero-variance columns keep scale 1 and map to zeros.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardizer)> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::InvalidData(format!(
            "standardization needs at least 2 rows, got {n}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in data.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for row in data.iter_rows() {
        for j in 0..d {
            let t = row[j] - mean[j];
            var[j] += t * t;
        }
    }
    let scale = var
        .iter()
        .zip(&mean)
        .map(|(v, m)| {
            let s = (v / n as f64).sqrt();
            // rounding noise on a constant column counts as zero variance
            if s <= 1e-12 * m.abs().max(1.0) {
                1.0
            } else {
                s
            }
        })
        .collect();
    let st = Standardizer { mean, scale };
    Ok((st.transform(data), st))
}

/// `m × d` random frequencies, rows drawn from `N(0, sigma² I_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMatrix {
    pub w: Matrix,
    pub sigma: f64,
}

impl FrequencyMatrix {
    pub fn m(&self) -> usize {
        self.w.rows()
    }

    pub fn d(&self) -> usize {
        self.w.cols()
    }

    /// Phase `w_j · x`.
    pub fn phase(&self, j: usize, x: &[f64]) -> f64 {
        self.w.row(j).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

pub fn sample_frequencies(m: usize, d: usize, sigma: f64, key: &RngKey) -> Result<FrequencyMatrix> {
    if m == 0 || d == 0 {
        return Err(Error::param(format!("frequency matrix must be non-empty, got {m}x{d}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let mut rng = key.rng(Stream::Frequencies);
    let values = (0..m * d)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    Ok(FrequencyMatrix {
        w: Matrix::new(m, d, values)?,
        sigma,
    })
}

/// `exp(i W x)`, elementwise.
pub fn feature_map(x: &[f64], w: &FrequencyMatrix) -> Result<Vec<Complex64>> {
    if x.len() != w.d() {
        return Err(Error::DimensionMismatch {
            expected: w.d(),
            actual: x.len(),
        });
    }
    Ok((0..w.m()).map(|j| Complex64::cis(w.phase(j, x))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    Exact,
    Estimated,
}

/// Averaged Fourier features of a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    pub z: Vec<Complex64>,
    pub kind: SketchKind,
}

impl Sketch {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.z.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Squared distance between two equal-length complex vectors.
pub fn complex_dist_sqr(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Hermitian inner product `Σ conj(a_j) b_j`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid for every point, lowest index on ties.
pub fn assign_nearest(data: &Dataset, centroids: &Centroids) -> Vec<usize> {
    data.iter_rows()
        .map(|x| {
            let mut best = (0, f64::INFINITY);
            for (g, c) in centroids.iter_rows().enumerate() {
                let dist = sq_dist(x, c);
                if dist < best.1 {
                    best = (g, dist);
                }
            }
            best.0
        })
        .collect()
}

pub fn sse(data: &Dataset, centroids: &Centroids, assignment: &[usize]) -> f64 {
    data.iter_rows()
        .zip(assignment)
        .map(|(x, &a)| sq_dist(x, centroids.row(a)))
        .sum()
}
