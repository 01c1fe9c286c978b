//! Column-wise square-root Lasso estimation of the regression matrix B, and
//! the optional OLS refit on the selected support.
//!
//! Column j solves
//!
//! ```text
//!   min over (β with β_j = 1, c)   ‖Xβ − c·1‖₂ + λ‖β‖₁
//! ```
//!
//! so that `Xβ̂` is the regression residual and `β̂_{j^c}` carries the
//! sign-embedded coefficients (the model reads
//! `X_{•,j} = c_j·1 − X_{•,j^c} B_{j^c,j} + noise`, hence `β̂_{j^c}` estimates
//! `+B_{j^c,j}`). The fixed diagonal contributes a constant λ to the penalty
//! and never changes the argmin, so only the free coordinates are penalized.
//!
//! The solver alternates a noise-scale update with a coordinate-descent Lasso
//! pass (the scaled-Lasso fixed point): with residual r = Xβ − ĉ1,
//!
//! ```text
//!   σ ← ‖r‖₂,   β ← argmin ½‖Xβ − c·1‖₂² + λσ‖β_free‖₁
//! ```
//!
//! whose fixed point satisfies the subgradient conditions of the original
//! nonsmooth objective. Data are centered by the column means before descent
//! (reducing the affine problem to a linear one) and the intercept is
//! recovered as ĉ = μᵀβ̂ afterwards.

use crate::data::{read_csv_rows, write_csv_mat, DataMatrix};
use crate::error::Error;
use crate::mat::{chol_solve, Mat};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A p×p matrix with unit diagonal; column j holds the regression
/// coefficients of feature j on the others.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionMatrix {
    values: Mat,
}

impl RegressionMatrix {
    pub fn new(mut values: Mat) -> Result<Self, Error> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch("B must be square".into()));
        }
        if !values.all_finite() {
            return Err(Error::InvalidArgument("non-finite entries in B".into()));
        }
        for j in 0..values.rows() {
            if (values[(j, j)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "B[{j},{j}] = {} but the diagonal must be 1",
                    values[(j, j)]
                )));
            }
            values[(j, j)] = 1.0;
        }
        Ok(RegressionMatrix { values })
    }

    pub fn identity(p: usize) -> Self {
        RegressionMatrix {
            values: Mat::identity(p),
        }
    }

    pub fn p(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    /// Dense CSV: p rows of p comma-separated entries.
    pub fn to_csv<W: Write>(&self, w: W) -> Result<(), Error> {
        write_csv_mat(&self.values, w)
    }

    pub fn from_csv<R: BufRead>(r: R) -> Result<Self, Error> {
        let rows = read_csv_rows(r)?;
        RegressionMatrix::new(Mat::from_rows(&rows)?)
    }

    /// Sparse JSON triplets {i, j, value} of the off-diagonal nonzeros.
    pub fn to_sparse_json(&self) -> Result<String, Error> {
        let p = self.p();
        let mut triplets = Vec::new();
        for i in 0..p {
            for j in 0..p {
                if i != j && self.values[(i, j)] != 0.0 {
                    triplets.push(Triplet {
                        i,
                        j,
                        value: self.values[(i, j)],
                    });
                }
            }
        }
        Ok(serde_json::to_string_pretty(&SparseDoc { p, triplets })?)
    }

    pub fn from_sparse_json(text: &str) -> Result<Self, Error> {
        let doc: SparseDoc = serde_json::from_str(text)?;
        let mut m = Mat::identity(doc.p);
        for t in doc.triplets {
            if t.i >= doc.p || t.j >= doc.p {
                return Err(Error::Parse(format!(
                    "triplet ({}, {}) out of range",
                    t.i, t.j
                )));
            }
            if t.i == t.j {
                return Err(Error::Parse("diagonal triplet in sparse B".into()));
            }
            m[(t.i, t.j)] = t.value;
        }
        RegressionMatrix::new(m)
    }
}

#[derive(Serialize, Deserialize)]
struct Triplet {
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct SparseDoc {
    p: usize,
    triplets: Vec<Triplet>,
}

/// The universal penalty level λ = √(2 log p).
pub fn universal_lambda(p: usize) -> f64 {
    (2.0 * (p as f64).ln()).sqrt()
}

/// Square-root Lasso configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SqrlConfig {
    /// Penalty level; `None` selects the universal choice √(2 log p).
    pub lambda: Option<f64>,
    /// Fixed-point tolerance on the noise-scale iterate.
    pub tol: f64,
    /// Cap on coordinate-descent sweeps per column.
    pub max_iter: usize,
    /// Fit an intercept (center columns before descent).
    pub intercept: bool,
}

impl Default for SqrlConfig {
    fn default() -> Self {
        SqrlConfig {
            lambda: None,
            tol: 1e-8,
            max_iter: 10_000,
            intercept: true,
        }
    }
}

impl SqrlConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "lambda must be ≥ 0, got {l}"
                )));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    fn lambda_for(&self, p: usize) -> f64 {
        self.lambda.unwrap_or_else(|| universal_lambda(p))
    }
}

/// One fitted column.
#[derive(Clone, Debug)]
pub struct ColumnFit {
    /// Full-length coefficient vector with β_j = 1.
    pub beta: Vec<f64>,
    /// Recovered intercept ĉ_j.
    pub intercept: f64,
    /// Residual scale ‖r‖₂/√n at the solution.
    pub sigma: f64,
    /// Coordinate-descent sweeps used.
    pub iterations: usize,
    /// False when the sweep cap was hit before the fixed point stabilized.
    pub converged: bool,
    /// The residual vanished (interpolation); σ̂ = 0 is meaningful downstream.
    pub zero_residual: bool,
}

/// All p columns assembled into a [`RegressionMatrix`].
#[derive(Clone, Debug)]
pub struct SqrlFit {
    pub b: RegressionMatrix,
    pub intercepts: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub columns_converged: Vec<bool>,
    pub zero_residual_columns: Vec<usize>,
}

struct CenteredDesign {
    gram: Mat,
    means: Vec<f64>,
    col_scales: Vec<f64>,
    n: usize,
}

fn centered_design(x: &DataMatrix, intercept: bool) -> CenteredDesign {
    let (n, p) = (x.n(), x.p());
    let means = if intercept {
        x.column_means()
    } else {
        vec![0.0; p]
    };
    let mut centered = Mat::zeros(n, p);
    let mut col_scales = vec![0.0f64; p];
    for i in 0..n {
        let src = x.values().row(i);
        let dst = centered.row_mut(i);
        for j in 0..p {
            dst[j] = src[j] - means[j];
            col_scales[j] = col_scales[j].max(src[j].abs());
        }
    }
    let gram = centered.transpose().matmul(&centered);
    CenteredDesign {
        gram,
        means,
        col_scales,
        n,
    }
}

/// Fits one column of B by the square-root Lasso.
pub fn sqrt_lasso_column(x: &DataMatrix, j: usize, cfg: &SqrlConfig) -> Result<ColumnFit, Error> {
    cfg.validate()?;
    let p = x.p();
    if p < 2 {
        return Err(Error::InvalidArgument("need at least two features".into()));
    }
    if j >= p {
        return Err(Error::DimensionMismatch(format!(
            "column {j} out of range for p = {p}"
        )));
    }
    let design = centered_design(x, cfg.intercept);
    solve_column(&design, j, cfg)
}

fn solve_column(design: &CenteredDesign, j: usize, cfg: &SqrlConfig) -> Result<ColumnFit, Error> {
    let g = &design.gram;
    let p = g.rows();
    let lambda = cfg.lambda_for(p);
    let n = design.n;

    let yss = g[(j, j)];
    let degenerate_tol = (design.col_scales[j] * 1e-13).powi(2) * n as f64;
    if yss <= degenerate_tol {
        return Err(Error::DegenerateColumn(j));
    }
    let zero_scale = yss.sqrt();

    let mut beta = vec![0.0; p];
    beta[j] = 1.0;
    // q = G·β, maintained incrementally
    let mut q: Vec<f64> = (0..p).map(|i| g[(i, j)]).collect();
    let mut sigma_raw = yss.max(0.0).sqrt();
    let mut sweeps = 0usize;
    let mut converged = false;
    let mut zero_residual = false;

    'outer: loop {
        let gamma = lambda * sigma_raw;
        // coordinate descent at fixed penalty
        loop {
            if sweeps >= cfg.max_iter {
                break 'outer;
            }
            sweeps += 1;
            let mut max_delta = 0.0f64;
            let mut max_beta = 1.0f64;
            for i in 0..p {
                if i == j {
                    continue;
                }
                let gii = g[(i, i)];
                if gii <= 0.0 {
                    continue;
                }
                let old = beta[i];
                let c = -(q[i] - gii * old);
                let new = soft_threshold(c, gamma) / gii;
                if new != old {
                    let delta = new - old;
                    let row = g.row(i);
                    for (qk, gik) in q.iter_mut().zip(row) {
                        *qk += delta * gik;
                    }
                    beta[i] = new;
                    max_delta = max_delta.max(delta.abs());
                }
                max_beta = max_beta.max(beta[i].abs());
            }
            // sub-ulp oscillations cannot settle below the epsilon floor
            let inner_tol = (1e-2 * cfg.tol).max(4.0 * f64::EPSILON);
            if max_delta <= inner_tol * max_beta {
                break;
            }
        }
        let rss: f64 = beta.iter().zip(&q).map(|(b, qv)| b * qv).sum();
        let new_sigma = rss.max(0.0).sqrt();
        if new_sigma <= 1e-12 * zero_scale {
            sigma_raw = new_sigma;
            zero_residual = true;
            converged = true;
            break;
        }
        if (new_sigma - sigma_raw).abs() <= cfg.tol * sigma_raw.max(1e-12) {
            sigma_raw = new_sigma;
            converged = true;
            break;
        }
        sigma_raw = new_sigma;
    }
    if !converged {
        // the sweep cap can fire mid-pass; keep σ consistent with β
        let rss: f64 = beta.iter().zip(&q).map(|(b, qv)| b * qv).sum();
        sigma_raw = rss.max(0.0).sqrt();
    }

    let intercept = if cfg.intercept {
        design
            .means
            .iter()
            .zip(&beta)
            .map(|(m, b)| m * b)
            .sum::<f64>()
    } else {
        0.0
    };
    Ok(ColumnFit {
        beta,
        intercept,
        sigma: sigma_raw / (n as f64).sqrt(),
        iterations: sweeps,
        converged,
        zero_residual,
    })
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Fits every column of B; the p subproblems are independent and are solved
/// in parallel when the `parallel` feature is enabled.
pub fn sqrt_lasso_all(x: &DataMatrix, cfg: &SqrlConfig) -> Result<SqrlFit, Error> {
    cfg.validate()?;
    let p = x.p();
    if p < 2 {
        return Err(Error::InvalidArgument("need at least two features".into()));
    }
    let design = centered_design(x, cfg.intercept);

    #[cfg(feature = "parallel")]
    let fits: Vec<Result<ColumnFit, Error>> = (0..p)
        .into_par_iter()
        .map(|j| solve_column(&design, j, cfg))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let fits: Vec<Result<ColumnFit, Error>> =
        (0..p).map(|j| solve_column(&design, j, cfg)).collect();

    assemble_fit(fits)
}

fn assemble_fit(fits: Vec<Result<ColumnFit, Error>>) -> Result<SqrlFit, Error> {
    let p = fits.len();
    let mut failures = Vec::new();
    let mut columns = Vec::with_capacity(p);
    for (j, fit) in fits.into_iter().enumerate() {
        match fit {
            Ok(f) => columns.push(f),
            Err(e) => failures.push((j, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::ColumnFailures(failures));
    }
    let mut b = Mat::identity(p);
    let mut intercepts = vec![0.0; p];
    let mut sigmas = vec![0.0; p];
    let mut converged = vec![false; p];
    let mut zero_residual = Vec::new();
    for (j, f) in columns.iter().enumerate() {
        for i in 0..p {
            b[(i, j)] = f.beta[i];
        }
        intercepts[j] = f.intercept;
        sigmas[j] = f.sigma;
        converged[j] = f.converged;
        if f.zero_residual {
            zero_residual.push(j);
        }
    }
    Ok(SqrlFit {
        b: RegressionMatrix::new(b)?,
        intercepts,
        sigmas,
        columns_converged: converged,
        zero_residual_columns: zero_residual,
    })
}

/// Result of the OLS refit.
#[derive(Clone, Debug)]
pub struct OlsFit {
    pub b: RegressionMatrix,
    pub intercepts: Vec<f64>,
    /// Columns whose selected design was collinear; those got the
    /// minimum-norm least-squares solution.
    pub singular_columns: Vec<usize>,
}

/// Re-estimates each column by ordinary least squares (with intercept) on the
/// support `{i ≠ j : |B̂_ij| > support_threshold}`; entries off the support
/// are exactly 0 and the diagonal stays 1.
pub fn ols_refit(
    x: &DataMatrix,
    bhat: &RegressionMatrix,
    support_threshold: f64,
) -> Result<OlsFit, Error> {
    let p = x.p();
    if bhat.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "B is {}x{} but the data has p = {p}",
            bhat.p(),
            bhat.p()
        )));
    }
    let design = centered_design(x, true);
    let g = &design.gram;
    let mut b = Mat::identity(p);
    let mut intercepts = vec![0.0; p];
    let mut singular = Vec::new();
    for j in 0..p {
        let support: Vec<usize> = (0..p)
            .filter(|&i| i != j && bhat.values()[(i, j)].abs() > support_threshold)
            .collect();
        if !support.is_empty() {
            let k = support.len();
            let mut gss = Mat::zeros(k, k);
            let mut rhs = vec![0.0; k];
            for (a, &ia) in support.iter().enumerate() {
                for (c, &ic) in support.iter().enumerate() {
                    gss[(a, c)] = g[(ia, ic)];
                }
                rhs[a] = -g[(ia, j)];
            }
            let theta = match cholesky_rtol(&gss, 1e-10) {
                Some(l) => chol_solve(&l, &rhs),
                None => {
                    singular.push(j);
                    min_norm_solve(&gss, &rhs)
                }
            };
            for (a, &ia) in support.iter().enumerate() {
                b[(ia, j)] = theta[a];
            }
        }
        let col = b.col(j);
        intercepts[j] = design.means.iter().zip(&col).map(|(m, v)| m * v).sum();
    }
    Ok(OlsFit {
        b: RegressionMatrix::new(b)?,
        intercepts,
        singular_columns: singular,
    })
}

// Cholesky that treats pivots below rtol·max(diag) as rank deficiency.
// Selected designs can be collinear to rounding, which the strict
// factorization does not see.
fn cholesky_rtol(m: &Mat, rtol: f64) -> Option<Mat> {
    let n = m.rows();
    let scale = (0..n).map(|i| m[(i, i)]).fold(0.0f64, f64::max);
    let cutoff = rtol * scale.max(1e-300);
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= cutoff || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

// Minimum-norm least-squares solution of G θ = rhs for symmetric PSD G,
// via the spectral pseudo-inverse.
fn min_norm_solve(g: &Mat, rhs: &[f64]) -> Vec<f64> {
    let k = g.rows();
    // Jacobi rotations give eigenvalues; recover eigenvectors by repeating
    // the rotations on an identity accumulator.
    let (eigvals, eigvecs) = sym_eigen_with_vectors(g);
    let cutoff = 1e-12 * eigvals.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let mut theta = vec![0.0; k];
    for (idx, &lam) in eigvals.iter().enumerate() {
        if lam <= cutoff {
            continue;
        }
        let v: Vec<f64> = (0..k).map(|r| eigvecs[(r, idx)]).collect();
        let coef: f64 = v.iter().zip(rhs).map(|(a, b)| a * b).sum::<f64>() / lam;
        for r in 0..k {
            theta[r] += coef * v[r];
        }
    }
    theta
}

fn sym_eigen_with_vectors(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.rows();
    let mut a = m.clone();
    a.symmetrize();
    let mut v = Mat::identity(n);
    let tol = 1e-14 * a.frob_norm().max(1e-300);
    for _ in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < tol * 1e-2 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    (eig, v)
}
