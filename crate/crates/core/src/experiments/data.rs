//! Datasets: synthetic least squares, LIBSVM ingestion and the planted
//! covariance used by power iteration.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::random::{Domain, RoundId, SharedRandomness};

// Iteration indices inside `Domain::Data`, so every use gets its own stream.
pub(crate) const DATA_GENERATE: u64 = 0;
pub(crate) const DATA_SHUFFLE: u64 = 1;
pub(crate) const DATA_EXTRA_BATCH: u64 = 2;
pub(crate) const DATA_INIT: u64 = 3;
pub(crate) const DATA_BASIS: u64 = 4;

/// Row-major regression data with `b` the target column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Dataset {
    pub fn samples(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `||Aw - b||^2 / (2S)`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let r = &self.a * DVector::from_column_slice(w) - &self.b;
        r.norm_squared() / (2.0 * self.samples() as f64)
    }

    /// Gradient of the loss over the full data.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let rows: Vec<usize> = (0..self.samples()).collect();
        self.batch_gradient(w, &rows)
    }

    /// `A_B^T (A_B w - b_B) / |B|` for the rows in `rows`.
    pub fn batch_gradient(&self, w: &[f64], rows: &[usize]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d];
        for &i in rows {
            let row = self.a.row(i);
            let r = row.iter().zip(w).map(|(a, w)| a * w).sum::<f64>() - self.b[i];
            for (gj, a) in g.iter_mut().zip(row.iter()) {
                *gj += r * a;
            }
        }
        let m = rows.len().max(1) as f64;
        g.iter_mut().for_each(|v| *v /= m);
        g
    }
}

/// `A` and `w*` with i.i.d. standard normal entries and `b = A w*`.
pub fn gen_least_squares(samples: usize, dim: usize, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    if samples == 0 || dim == 0 {
        return Err(Error::Parameter(format!("need S, d >= 1, got S = {samples}, d = {dim}")));
    }
    let mut rng = SharedRandomness::new(seed).stream(Domain::Data, RoundId(0), DATA_GENERATE);
    let w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let a = DMatrix::from_fn(samples, dim, |_, _| StandardNormal.sample(&mut rng));
    let b = &a * DVector::from_column_slice(&w);
    Ok((Dataset { a, b }, w))
}

/// Reads `label idx:val ...` lines with 1-based indices. The dimension is the
/// largest index seen. Blank lines are skipped.
pub fn parse_libsvm(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_libsvm_str(&text)
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut dim = 0;
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut label = None;
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (col, tok) in tokens(line) {
            let err = |message: String| Error::Parse {
                line: line_no,
                column: col,
                message,
            };
            if label.is_none() {
                label = Some(tok.parse::<f64>().map_err(|_| err(format!("bad label {tok:?}")))?);
                continue;
            }
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got {tok:?}")))?;
            let i: usize = i.parse().map_err(|_| err(format!("bad index {i:?}")))?;
            if i == 0 {
                return Err(err("indices are 1-based".into()));
            }
            let v: f64 = v.parse().map_err(|_| err(format!("bad value {v:?}")))?;
            if !seen.insert(i) {
                return Err(err(format!("duplicate index {i}")));
            }
            dim = dim.max(i);
            entries.push((i - 1, v));
        }
        labels.push(label.expect("non-blank line has a token"));
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut a = DMatrix::zeros(rows.len(), dim);
    for (r, entries) in rows.iter().enumerate() {
        for &(c, v) in entries {
            a[(r, c)] = v;
        }
    }
    Ok(Dataset {
        a,
        b: DVector::from_vec(labels),
    })
}

/// Whitespace-separated tokens with their 1-based byte column.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_whitespace()
        .map(move |t| (t.as_ptr() as usize - line.as_ptr() as usize + 1, t))
}

/// Random split of `0..samples` into `parts` batches of `samples / parts`
/// rows; leftover rows sit out this iteration.
pub fn shuffled_batches(samples: usize, parts: usize, seed: u64, iteration: u64) -> Vec<Vec<usize>> {
    batches_from(samples, parts, seed, iteration, DATA_SHUFFLE)
}

/// A second batch of `samples / parts` rows for iteration `iteration`,
/// independent of [`shuffled_batches`].
pub fn extra_batch(samples: usize, parts: usize, seed: u64, iteration: u64) -> Vec<usize> {
    batches_from(samples, parts, seed, iteration, DATA_EXTRA_BATCH).swap_remove(0)
}

fn batches_from(samples: usize, parts: usize, seed: u64, iteration: u64, stream: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..samples).collect();
    let mut rng = SharedRandomness::new(seed).stream(Domain::Data, RoundId(iteration), stream);
    idx.shuffle(&mut rng);
    let size = samples / parts;
    idx.chunks_exact(size.max(1)).take(parts).map(<[usize]>::to_vec).collect()
}

/// `samples` gaussian rows whose covariance has eigenvalues `spectrum`
/// (padded with ones) in a random orthogonal basis. Returns the rows and the
/// basis, whose first column is the top eigenvector.
pub fn planted_covariance(samples: usize, dim: usize, spectrum: &[f64], seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if samples == 0 || dim == 0 {
        return Err(Error::Parameter(format!("need S, d >= 1, got S = {samples}, d = {dim}")));
    }
    let shared = SharedRandomness::new(seed);
    let mut rng = shared.stream(Domain::Data, RoundId(0), DATA_BASIS);
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let basis = g.qr().q();
    let scale = DVector::from_fn(dim, |i, _| spectrum.get(i).copied().unwrap_or(1.0).sqrt());
    let mut rng = shared.stream(Domain::Data, RoundId(0), DATA_GENERATE);
    let z: DMatrix<f64> = DMatrix::from_fn(samples, dim, |_, _| StandardNormal.sample(&mut rng));
    // rows are V diag(sqrt(lambda)) z
    let x = z * DMatrix::from_diagonal(&scale) * basis.transpose();
    Ok((x, basis))
}

/// Unit eigenvector of the largest eigenvalue of `X^T X`.
pub fn top_eigenvector(x: &DMatrix<f64>) -> Vec<f64> {
    let eig = (x.transpose() * x).symmetric_eigen();
    let (i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    eig.eigenvectors.column(i).iter().copied().collect()
}
