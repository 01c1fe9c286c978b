//! Observation matrices, sample covariance, and CSV data exchange.

use crate::error::Error;
use crate::mat::{sym_eigenvalues, Mat};
use std::io::{BufRead, Write};

/// An n×p observation matrix; rows are samples.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: Mat,
}

impl DataMatrix {
    /// Requires n ≥ 2, p ≥ 1, and all entries finite.
    pub fn new(values: Mat) -> Result<Self, Error> {
        if values.rows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 samples, got {}",
                values.rows()
            )));
        }
        if values.cols() < 1 {
            return Err(Error::InvalidArgument("need at least one feature".into()));
        }
        if !values.all_finite() {
            return Err(Error::InvalidArgument("non-finite entries in data".into()));
        }
        Ok(DataMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn p(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn column_means(&self) -> Vec<f64> {
        let (n, p) = (self.n(), self.p());
        let mut m = vec![0.0; p];
        for i in 0..n {
            for (j, v) in self.values.row(i).iter().enumerate() {
                m[j] += v;
            }
        }
        for v in &mut m {
            *v /= n as f64;
        }
        m
    }

    /// Centers each column by its sample mean and divides by its sample
    /// standard deviation (1/n divisor). Optional preprocessing; the synthetic
    /// models are already normalized to unit variances, so it defaults to off
    /// everywhere in this crate.
    pub fn standardized(&self) -> Result<DataMatrix, Error> {
        let (n, p) = (self.n(), self.p());
        let means = self.column_means();
        let mut sd = vec![0.0; p];
        for i in 0..n {
            for (j, v) in self.values.row(i).iter().enumerate() {
                sd[j] += (v - means[j]).powi(2);
            }
        }
        for (j, v) in sd.iter_mut().enumerate() {
            *v = (*v / n as f64).sqrt();
            if *v == 0.0 {
                return Err(Error::DegenerateColumn(j));
            }
        }
        let mut out = Mat::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                out[(i, j)] = (self.values[(i, j)] - means[j]) / sd[j];
            }
        }
        DataMatrix::new(out)
    }

    /// Headerless CSV, one row per sample, '.' decimal separator, LF endings.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<(), Error> {
        for i in 0..self.n() {
            let line = self
                .values
                .row(i)
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",");
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn from_csv<R: BufRead>(r: R) -> Result<Self, Error> {
        let rows = read_csv_rows(r)?;
        DataMatrix::new(Mat::from_rows(&rows)?)
    }
}

pub(crate) fn read_csv_rows<R: BufRead>(r: R) -> Result<Vec<Vec<f64>>, Error> {
    let mut rows = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty CSV input".into()));
    }
    Ok(rows)
}

pub(crate) fn write_csv_mat<W: Write>(m: &Mat, mut w: W) -> Result<(), Error> {
    for i in 0..m.rows() {
        let line = m
            .row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Choice of the mean used when centering the sample covariance.
#[derive(Clone, Debug, PartialEq)]
pub enum MeanMode {
    /// The theoretical mean is known (e.g. zero for the synthetic models).
    Known(Vec<f64>),
    /// Center by the sample mean.
    SampleMean,
}

impl MeanMode {
    pub fn known_zero(p: usize) -> Self {
        MeanMode::Known(vec![0.0; p])
    }
}

/// A p×p sample or population covariance matrix.
///
/// Construction through [`sample_covariance`] is positive semidefinite by
/// construction and symmetrized exactly; [`CovarianceMatrix::try_new`]
/// validates externally supplied matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    values: Mat,
}

impl CovarianceMatrix {
    /// Validates symmetry (1e-12 relative) and positive semidefiniteness
    /// (min eigenvalue ≥ −1e-9 · trace/p).
    pub fn try_new(values: Mat) -> Result<Self, Error> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        if !values.all_finite() {
            return Err(Error::InvalidArgument(
                "non-finite covariance entries".into(),
            ));
        }
        if values.symmetry_gap() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "covariance asymmetry {:.3e} exceeds 1e-12",
                values.symmetry_gap()
            )));
        }
        let p = values.rows();
        let min_eig = sym_eigenvalues(&values)[0];
        if min_eig < -1e-9 * values.trace().abs() / p as f64 {
            return Err(Error::InvalidArgument(format!(
                "covariance has eigenvalue {min_eig:.3e} below tolerance"
            )));
        }
        Ok(CovarianceMatrix { values })
    }

    /// For matrices PSD by construction (sample covariances, SPD inverses).
    pub(crate) fn new_unchecked(mut values: Mat) -> Self {
        values.symmetrize();
        CovarianceMatrix { values }
    }

    pub fn p(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }
}

/// Sample covariance Sₙ = (1/n) Σ_k (X_k − μ̂)(X_k − μ̂)ᵀ with μ̂ given by
/// `mode`. Note the 1/n divisor. The result is symmetrized exactly.
pub fn sample_covariance(x: &DataMatrix, mode: &MeanMode) -> Result<CovarianceMatrix, Error> {
    let (n, p) = (x.n(), x.p());
    let mu = match mode {
        MeanMode::Known(mu) => {
            if mu.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "mean of length {} for p = {p}",
                    mu.len()
                )));
            }
            if !mu.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite known mean".into()));
            }
            mu.clone()
        }
        MeanMode::SampleMean => x.column_means(),
    };
    let mut centered = Mat::zeros(n, p);
    for i in 0..n {
        let src = x.values().row(i);
        let dst = centered.row_mut(i);
        for j in 0..p {
            dst[j] = src[j] - mu[j];
        }
    }
    let mut s = centered.transpose().matmul(&centered);
    let inv_n = 1.0 / n as f64;
    for i in 0..p {
        for j in 0..p {
            s[(i, j)] *= inv_n;
        }
    }
    Ok(CovarianceMatrix::new_unchecked(s))
}
