//! The four estimators of the precision-matrix diagonal, precision-matrix
//! assembly, and partial-correlation extraction.
//!
//! All estimators consume the data only through the sample covariance Sₙ and
//! the first-stage regression matrix B̂:
//!
//! * `rv`  — `φ̂_j = B̂_{•,j}ᵀ Sₙ B̂_{•,j}` (empirical residual variance);
//! * `rml` — `φ̂_j = (SₙB̂)_jj ∨ 0`;
//! * `sml` — ties all coordinates of a connected component of the thresholded
//!   partial-correlation graph to the tree root through the path-product
//!   factors δ and estimates the one free parameter by a trace average;
//! * `pml` — minimizes, over v = 1/φ in the box [1, √n]^p,
//!   `f(v) = Σ_j { −log v_j + (SₙB̂)_jj v_j } + κ Σ_pairs (B̂_ji v_i − B̂_ij v_j)² / (B̂_ij² + B̂_ji²)`
//!   by steepest descent with normalized direction and adaptive step size.

use crate::data::{sample_covariance, DataMatrix, MeanMode};
use crate::error::Error;
use crate::graph::{build_graph, default_threshold, delta_factors, spanning_forest, TreeMode};
use crate::mat::Mat;
use crate::regression::RegressionMatrix;
use serde::{Deserialize, Serialize};

/// Length-p vector of variance parameters (φ_j = 1/ω_jj).
#[derive(Clone, Debug, PartialEq)]
pub struct PhiVector {
    values: Vec<f64>,
}

impl PhiVector {
    /// Entries must be finite and nonnegative.
    pub fn new(values: Vec<f64>) -> Result<Self, Error> {
        for (j, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("phi[{j}] = {v} is invalid")));
            }
        }
        Ok(PhiVector { values })
    }

    pub fn p(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_error(&self, other: &PhiVector) -> f64 {
        assert_eq!(self.p(), other.p());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

fn check_dims(x: &DataMatrix, bhat: &RegressionMatrix) -> Result<(), Error> {
    if x.p() != bhat.p() {
        return Err(Error::DimensionMismatch(format!(
            "data has p = {} but B is {}x{}",
            x.p(),
            bhat.p(),
            bhat.p()
        )));
    }
    Ok(())
}

/// Residual variance estimator φ̂_j = B̂_{•,j}ᵀ Sₙ B̂_{•,j}; never negative.
pub fn estimate_rv(
    x: &DataMatrix,
    bhat: &RegressionMatrix,
    mode: &MeanMode,
) -> Result<PhiVector, Error> {
    check_dims(x, bhat)?;
    let s = sample_covariance(x, mode)?;
    let p = x.p();
    let mut phi = vec![0.0; p];
    for j in 0..p {
        let col = bhat.values().col(j);
        phi[j] = s.values().quad_form(&col).max(0.0);
    }
    PhiVector::new(phi)
}

/// Relaxed maximum likelihood φ̂_j = (SₙB̂)_jj ∨ 0.
pub fn estimate_rml(
    x: &DataMatrix,
    bhat: &RegressionMatrix,
    mode: &MeanMode,
) -> Result<PhiVector, Error> {
    check_dims(x, bhat)?;
    let s = sample_covariance(x, mode)?;
    let diag = sb_diagonal(s.values(), bhat.values());
    PhiVector::new(diag.into_iter().map(|v| v.max(0.0)).collect())
}

// diagonal of Sₙ·B̂
fn sb_diagonal(s: &Mat, b: &Mat) -> Vec<f64> {
    let p = s.rows();
    (0..p)
        .map(|j| (0..p).map(|k| s[(j, k)] * b[(k, j)]).sum())
        .collect()
}

/// Symmetry-enforced maximum likelihood.
#[derive(Clone, Debug)]
pub struct SmlOutcome {
    pub phi: PhiVector,
    /// Components (by smallest member) whose δ factors were unusable; their
    /// coordinates fell back to the relaxed-likelihood value.
    pub fallback_components: Vec<usize>,
}

/// Per connected component c of the thresholded graph, anchors the component
/// at the tree root r and sets `φ̂_j = δ_j · (1/p_c) Σ_{i∈c} (SₙB̂)_ii / δ_i`,
/// the trace form of the constrained MLE. Singleton components reduce to the
/// relaxed-likelihood coordinate. Negative outcomes are clamped at 0.
pub fn estimate_sml(
    x: &DataMatrix,
    bhat: &RegressionMatrix,
    mode: &MeanMode,
    tree_mode: TreeMode,
    threshold: Option<f64>,
) -> Result<SmlOutcome, Error> {
    check_dims(x, bhat)?;
    let t = threshold.unwrap_or_else(|| default_threshold(x.n()));
    let s = sample_covariance(x, mode)?;
    let diag = sb_diagonal(s.values(), bhat.values());
    let graph = build_graph(bhat, t)?;
    let forest = spanning_forest(&graph, tree_mode);
    let mut phi = vec![0.0; x.p()];
    let mut fallbacks = Vec::new();
    for tree in &forest.trees {
        if tree.nodes.len() == 1 {
            let j = tree.nodes[0];
            phi[j] = diag[j].max(0.0);
            continue;
        }
        match delta_factors(tree, bhat) {
            Ok(deltas) => {
                let p_c = tree.nodes.len() as f64;
                let mut mean = 0.0;
                for &(i, d) in &deltas.factors {
                    mean += diag[i] / d;
                }
                mean /= p_c;
                for &(j, d) in &deltas.factors {
                    phi[j] = (d * mean).max(0.0);
                }
            }
            Err(Error::DivisionByNearZero { .. }) => {
                fallbacks.push(tree.nodes[0]);
                for &j in &tree.nodes {
                    phi[j] = diag[j].max(0.0);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SmlOutcome {
        phi: PhiVector::new(phi)?,
        fallback_components: fallbacks,
    })
}

/// Penalized maximum likelihood configuration; the defaults match the
/// experimental recipe (κ = ⅓√(log p), t = min(0.01, n^(−1/2)), gradient
/// tolerance 1e-5, 5000 iterations, Rprop step factors 1.2 and 0.5).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PmlConfig {
    /// Penalty weight; `None` selects ⅓√(log p).
    pub kappa: Option<f64>,
    /// Symmetry-pair threshold; `None` selects min(0.01, n^(−1/2)).
    pub t: Option<f64>,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub step_up: f64,
    pub step_down: f64,
    pub initial_step: f64,
    /// Per-coordinate (lower, upper) bounds on φ. The default box
    /// [n^(−1/2), 1] assumes unit feature variances; data on another scale
    /// needs an override.
    #[serde(default)]
    pub phi_box: Option<Vec<(f64, f64)>>,
}

impl Default for PmlConfig {
    fn default() -> Self {
        PmlConfig {
            kappa: None,
            t: None,
            grad_tol: 1e-5,
            max_iter: 5000,
            step_up: 1.2,
            step_down: 0.5,
            initial_step: 1.0,
            phi_box: None,
        }
    }
}

impl PmlConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if let Some(k) = self.kappa {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "kappa must be ≥ 0, got {k}"
                )));
            }
        }
        if let Some(t) = self.t {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "t must be in (0,1), got {t}"
                )));
            }
        }
        if !(self.grad_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("bad stopping parameters".into()));
        }
        if !(self.step_up > 1.0) || !(self.step_down > 0.0 && self.step_down < 1.0) {
            return Err(Error::InvalidArgument("bad step factors".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidArgument(
                "initial step must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn kappa_for(&self, p: usize) -> f64 {
        self.kappa.unwrap_or_else(|| (p as f64).ln().sqrt() / 3.0)
    }
}

#[derive(Clone, Debug)]
pub struct PmlOutcome {
    pub phi: PhiVector,
    /// True when the gradient-norm tolerance was met; false means the
    /// iteration cap was reached and the best iterate is returned.
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective: f64,
}

/// The symmetric penalty pairs and the coefficients of the PML objective.
struct PmlProblem {
    s_diag: Vec<f64>,
    /// (i, j, B_ij, B_ji, B_ij² + B_ji²) for i < j with B_ji·B_ij > t.
    pairs: Vec<(usize, usize, f64, f64, f64)>,
    kappa: f64,
    /// Per-coordinate bounds on v = 1/φ.
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PmlProblem {
    fn objective(&self, v: &[f64]) -> f64 {
        let mut f = 0.0;
        for (vj, sj) in v.iter().zip(&self.s_diag) {
            f += -vj.ln() + sj * vj;
        }
        for &(i, j, bij, bji, denom) in &self.pairs {
            let gap = bji * v[i] - bij * v[j];
            f += self.kappa * gap * gap / denom;
        }
        f
    }

    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        for ((g, vj), sj) in out.iter_mut().zip(v).zip(&self.s_diag) {
            *g = -1.0 / vj + sj;
        }
        for &(i, j, bij, bji, denom) in &self.pairs {
            let gap = bji * v[i] - bij * v[j];
            let scale = 2.0 * self.kappa * gap / denom;
            out[i] += scale * bji;
            out[j] -= scale * bij;
        }
    }

    fn project(&self, v: &mut [f64]) {
        for ((vj, lo), hi) in v.iter_mut().zip(&self.lower).zip(&self.upper) {
            *vj = vj.clamp(*lo, *hi);
        }
    }
}

/// The PML objective in the v = 1/φ parameterization, exposed for
/// diagnostics: value, analytic gradient, and the feasible box.
pub struct PmlObjective {
    problem: PmlProblem,
}

impl PmlObjective {
    pub fn new(
        x: &DataMatrix,
        bhat: &RegressionMatrix,
        mode: &MeanMode,
        cfg: &PmlConfig,
    ) -> Result<Self, Error> {
        check_dims(x, bhat)?;
        cfg.validate()?;
        let p = x.p();
        let n = x.n();
        let s = sample_covariance(x, mode)?;
        let s_diag = sb_diagonal(s.values(), bhat.values());
        let t = cfg.t.unwrap_or_else(|| default_threshold(n));
        let b = bhat.values();
        let mut pairs = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                let bij = b[(i, j)];
                let bji = b[(j, i)];
                if bji * bij > t {
                    pairs.push((i, j, bij, bji, bij * bij + bji * bji));
                }
            }
        }
        let (lower, upper) = match &cfg.phi_box {
            None => (vec![1.0; p], vec![(n as f64).sqrt(); p]),
            Some(bounds) => {
                if bounds.len() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "phi_box has {} entries for p = {p}",
                        bounds.len()
                    )));
                }
                // v = 1/φ flips and swaps the bounds
                let mut lower = Vec::with_capacity(p);
                let mut upper = Vec::with_capacity(p);
                for (idx, &(lo, hi)) in bounds.iter().enumerate() {
                    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                        return Err(Error::InvalidArgument(format!(
                            "phi_box[{idx}] = ({lo}, {hi}) is not a valid positive interval"
                        )));
                    }
                    lower.push(1.0 / hi);
                    upper.push(1.0 / lo);
                }
                (lower, upper)
            }
        };
        Ok(PmlObjective {
            problem: PmlProblem {
                s_diag,
                pairs,
                kappa: cfg.kappa_for(p),
                lower,
                upper,
            },
        })
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        self.problem.objective(v)
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; v.len()];
        self.problem.gradient(v, &mut g);
        g
    }

    /// The feasible box for v: bounds of the first coordinate (all
    /// coordinates agree unless a per-coordinate override is set).
    pub fn bounds(&self) -> (f64, f64) {
        (self.problem.lower[0], self.problem.upper[0])
    }

    /// Per-coordinate feasible intervals for v.
    pub fn bounds_at(&self, j: usize) -> (f64, f64) {
        (self.problem.lower[j], self.problem.upper[j])
    }

    pub fn active_pairs(&self) -> usize {
        self.problem.pairs.len()
    }
}

/// Penalized maximum likelihood: returns φ̂ = 1/v̂ with v̂ the approximate
/// box-constrained minimizer of the penalized objective. Every coordinate of
/// the output lies in the φ box exactly ([n^(−1/2), 1] by default).
pub fn estimate_pml(
    x: &DataMatrix,
    bhat: &RegressionMatrix,
    mode: &MeanMode,
    cfg: &PmlConfig,
) -> Result<PmlOutcome, Error> {
    let p = x.p();
    let problem = PmlObjective::new(x, bhat, mode, cfg)?.problem;

    // v₀ = 1, projected in case an override box excludes it
    let mut v = vec![1.0; p];
    problem.project(&mut v);
    let mut f_curr = problem.objective(&v);
    let mut grad = vec![0.0; p];
    let mut step = cfg.initial_step;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;

    while iterations < cfg.max_iter {
        problem.gradient(&v, &mut grad);
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < cfg.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        // scaled descent direction −∇f/‖∇f‖; on failure the same direction is
        // retried with a halved step
        let mut accepted = false;
        while step > 1e-16 {
            let mut trial: Vec<f64> = v
                .iter()
                .zip(&grad)
                .map(|(vj, gj)| vj - step * gj / grad_norm)
                .collect();
            problem.project(&mut trial);
            let f_trial = problem.objective(&trial);
            if f_trial < f_curr {
                v = trial;
                f_curr = f_trial;
                step *= cfg.step_up;
                accepted = true;
                break;
            }
            step *= cfg.step_down;
        }
        if !accepted {
            // step size underflow: no further progress possible
            break;
        }
    }
    if !converged {
        problem.gradient(&v, &mut grad);
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    }

    let phi: Vec<f64> = v.iter().map(|vj| 1.0 / vj).collect();
    Ok(PmlOutcome {
        phi: PhiVector::new(phi)?,
        converged,
        iterations,
        grad_norm,
        objective: f_curr,
    })
}

/// Ω̂ = B̂ · D_φ̂⁻¹, i.e. Ω̂_ij = B̂_ij / φ̂_j. Returned raw: no
/// symmetrization is applied, and for an estimated B̂ the result is generally
/// nonsymmetric.
pub fn assemble_precision(bhat: &RegressionMatrix, phi: &PhiVector) -> Result<Mat, Error> {
    let p = bhat.p();
    if phi.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "phi has length {} but B is {p}x{p}",
            phi.p()
        )));
    }
    let mut omega = Mat::zeros(p, p);
    for j in 0..p {
        let f = phi.values()[j];
        if f <= 0.0 {
            return Err(Error::ZeroPhi(j));
        }
        for i in 0..p {
            omega[(i, j)] = bhat.values()[(i, j)] / f;
        }
    }
    Ok(omega)
}

/// Signed partial-correlation estimates
/// `sign(B̂_ij + B̂_ji) · √(max(B̂_ij·B̂_ji, 0))`, unit diagonal, symmetric by
/// construction. A negative product clamps to 0 (the population quantity is a
/// square, hence nonnegative).
pub fn partial_correlations(bhat: &RegressionMatrix) -> Mat {
    let p = bhat.p();
    let b = bhat.values();
    let mut out = Mat::identity(p);
    for i in 0..p {
        for j in (i + 1)..p {
            let prod = b[(i, j)] * b[(j, i)];
            let val = if prod > 0.0 {
                let sum = b[(i, j)] + b[(j, i)];
                let sign = if sum > 0.0 {
                    1.0
                } else if sum < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                sign * prod.sqrt()
            } else {
                0.0
            };
            out[(i, j)] = val;
            out[(j, i)] = val;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CovarianceMatrix;
    use crate::gauss::sample_gaussian;
    use crate::models::{build_model, ModelId, ModelKind};

    fn iid_data(n: usize, p: usize, seed: u64) -> DataMatrix {
        let sigma = CovarianceMatrix::try_new(Mat::identity(p)).unwrap();
        sample_gaussian(&sigma, n, seed).unwrap()
    }

    #[test]
    fn rv_with_identity_b_is_covariance_diagonal() {
        let x = iid_data(50, 4, 3);
        let s = sample_covariance(&x, &MeanMode::SampleMean).unwrap();
        let phi = estimate_rv(&x, &RegressionMatrix::identity(4), &MeanMode::SampleMean).unwrap();
        for j in 0..4 {
            assert!((phi.values()[j] - s.values()[(j, j)]).abs() < 1e-12);
        }
    }

    #[test]
    fn rv_consistent_at_oracle_b_model1_p2() {
        let model = build_model(ModelId::new(ModelKind::M1, 2).unwrap()).unwrap();
        let x = sample_gaussian(&model.sigma().unwrap(), 1_000_000, 17).unwrap();
        let phi = estimate_rv(&x, &model.b_star, &MeanMode::SampleMean).unwrap();
        for j in 0..2 {
            assert!(
                (phi.values()[j] - 0.64).abs() < 0.01,
                "phi[{j}] = {}",
                phi.values()[j]
            );
        }
    }

    #[test]
    fn rml_truncates_at_zero() {
        let x = iid_data(30, 2, 5);
        let s = sample_covariance(&x, &MeanMode::SampleMean).unwrap();
        // pick B_10 so that (S B)_00 = s00 + B_10·s01 = −s00 < 0
        let coef = -2.0 * s.values()[(0, 0)] / s.values()[(0, 1)];
        let mut b = Mat::identity(2);
        b[(1, 0)] = coef;
        let rml = estimate_rml(
            &x,
            &RegressionMatrix::new(b).unwrap(),
            &MeanMode::SampleMean,
        )
        .unwrap();
        assert_eq!(rml.values()[0], 0.0);
    }

    #[test]
    fn estimators_coincide_for_identity_b() {
        let x = iid_data(200, 5, 7);
        let b = RegressionMatrix::identity(5);
        let mode = MeanMode::SampleMean;
        let rv = estimate_rv(&x, &b, &mode).unwrap();
        let rml = estimate_rml(&x, &b, &mode).unwrap();
        let sml = estimate_sml(&x, &b, &mode, TreeMode::Mst, None).unwrap();
        for j in 0..5 {
            assert_eq!(rv.values()[j], rml.values()[j]);
            assert_eq!(rv.values()[j], sml.phi.values()[j]);
        }
        // PML equals the box clip of the common value
        let pml = estimate_pml(&x, &b, &mode, &PmlConfig::default()).unwrap();
        let lo = 1.0 / (x.n() as f64).sqrt();
        for j in 0..5 {
            let expect = rv.values()[j].clamp(lo, 1.0);
            assert!(
                (pml.phi.values()[j] - expect).abs() < 1e-4,
                "pml[{j}] = {} vs {}",
                pml.phi.values()[j],
                expect
            );
        }
    }

    #[test]
    fn sml_singletons_match_rml() {
        let x = iid_data(100, 3, 11);
        let b = RegressionMatrix::identity(3);
        let sml = estimate_sml(&x, &b, &MeanMode::SampleMean, TreeMode::Mst, Some(0.01)).unwrap();
        let rml = estimate_rml(&x, &b, &MeanMode::SampleMean).unwrap();
        assert_eq!(sml.phi.values(), rml.values());
        assert!(sml.fallback_components.is_empty());
    }

    #[test]
    fn sml_tree_mode_invariant_at_oracle_b() {
        let model = build_model(ModelId::new(ModelKind::M6, 12).unwrap()).unwrap();
        let x = sample_gaussian(&model.sigma().unwrap(), 400, 23).unwrap();
        let mode = MeanMode::SampleMean;
        let a = estimate_sml(&x, &model.b_star, &mode, TreeMode::Mst, None).unwrap();
        let b = estimate_sml(&x, &model.b_star, &mode, TreeMode::Spt, None).unwrap();
        let c = estimate_sml(&x, &model.b_star, &mode, TreeMode::SptBestRoot, None).unwrap();
        for j in 0..12 {
            assert!((a.phi.values()[j] - b.phi.values()[j]).abs() < 1e-9);
            assert!((a.phi.values()[j] - c.phi.values()[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn pml_kappa_zero_is_clipped_rml() {
        let model = build_model(ModelId::new(ModelKind::M1, 6).unwrap()).unwrap();
        let x = sample_gaussian(&model.sigma().unwrap(), 150, 31).unwrap();
        let mode = MeanMode::SampleMean;
        let cfg = PmlConfig {
            kappa: Some(0.0),
            ..Default::default()
        };
        let pml = estimate_pml(&x, &model.b_star, &mode, &cfg).unwrap();
        let rml = estimate_rml(&x, &model.b_star, &mode).unwrap();
        let lo = 1.0 / (x.n() as f64).sqrt();
        for j in 0..6 {
            let expect = rml.values()[j].clamp(lo, 1.0);
            assert!(
                (pml.phi.values()[j] - expect).abs() < 1e-4,
                "pml[{j}] = {} vs clamp(rml) = {expect}",
                pml.phi.values()[j]
            );
        }
    }

    #[test]
    fn pml_gradient_matches_finite_differences() {
        let model = build_model(ModelId::new(ModelKind::M2, 5).unwrap()).unwrap();
        let x = sample_gaussian(&model.sigma().unwrap(), 80, 37).unwrap();
        let s = sample_covariance(&x, &MeanMode::SampleMean).unwrap();
        let s_diag = sb_diagonal(s.values(), model.b_star.values());
        let b = model.b_star.values();
        let mut pairs = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                let bij = b[(i, j)];
                let bji = b[(j, i)];
                if bji * bij > 0.01 {
                    pairs.push((i, j, bij, bji, bij * bij + bji * bji));
                }
            }
        }
        assert!(!pairs.is_empty());
        let problem = PmlProblem {
            s_diag,
            pairs,
            kappa: 1.0,
            lower: vec![1.0; 5],
            upper: vec![(80f64).sqrt(); 5],
        };
        let mut state = 0xabcdefu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            1.5 + 4.0 * ((state >> 11) as f64 / (1u64 << 53) as f64)
        };
        for _ in 0..10 {
            let v: Vec<f64> = (0..5).map(|_| next()).collect();
            let mut grad = vec![0.0; 5];
            problem.gradient(&v, &mut grad);
            for k in 0..5 {
                let h = 1e-6;
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[k] += h;
                vm[k] -= h;
                let fd = (problem.objective(&vp) - problem.objective(&vm)) / (2.0 * h);
                let rel = (grad[k] - fd).abs() / fd.abs().max(1.0);
                assert!(
                    rel < 1e-5,
                    "coordinate {k}: analytic {} vs fd {fd}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn pml_output_feasible() {
        let model = build_model(ModelId::new(ModelKind::M3, 8).unwrap()).unwrap();
        let x = sample_gaussian(&model.sigma().unwrap(), 64, 41).unwrap();
        let pml = estimate_pml(
            &x,
            &model.b_star,
            &MeanMode::SampleMean,
            &PmlConfig::default(),
        )
        .unwrap();
        let lo = 1.0 / 8.0;
        for &v in pml.phi.values() {
            assert!((lo..=1.0).contains(&v), "phi = {v} outside [{lo}, 1]");
        }
    }

    #[test]
    fn pml_box_override_for_unscaled_data() {
        // data with variance 4: the default unit box caps every coordinate,
        // a widened override recovers the unconstrained optimum
        let base = build_model(ModelId::new(ModelKind::M1, 4).unwrap()).unwrap();
        let x0 = sample_gaussian(&base.sigma().unwrap(), 400, 13).unwrap();
        let scaled: Vec<Vec<f64>> = (0..x0.n())
            .map(|r| x0.values().row(r).iter().map(|v| 2.0 * v).collect())
            .collect();
        let x = DataMatrix::new(Mat::from_rows(&scaled).unwrap()).unwrap();
        let mode = MeanMode::SampleMean;
        let dflt = estimate_pml(&x, &base.b_star, &mode, &PmlConfig::default()).unwrap();
        assert!(dflt.phi.values().iter().all(|&v| v <= 1.0));
        let cfg = PmlConfig {
            phi_box: Some(vec![(1e-3, 8.0); 4]),
            ..Default::default()
        };
        let wide = estimate_pml(&x, &base.b_star, &mode, &cfg).unwrap();
        // true residual variances are 4·φ* ≈ 2.56, reachable only with the override
        for &v in wide.phi.values() {
            assert!(v > 1.0, "phi = {v} still clipped at the unit box");
        }
        let bad = PmlConfig {
            phi_box: Some(vec![(0.5, 0.1); 4]),
            ..Default::default()
        };
        assert!(estimate_pml(&x, &base.b_star, &mode, &bad).is_err());
    }

    #[test]
    fn assemble_reconstructs_omega_for_every_model() {
        for kind in ModelKind::all() {
            let p = if kind == ModelKind::M6 { 12 } else { 7 };
            let model = build_model(ModelId::new(kind, p).unwrap()).unwrap();
            let omega = assemble_precision(&model.b_star, &model.phi_star).unwrap();
            assert!(omega.max_abs_diff(&model.omega) < 1e-10);
            assert!(omega.symmetry_gap() < 1e-10);
        }
    }

    #[test]
    fn assemble_diag_example() {
        let b = RegressionMatrix::identity(2);
        let phi = PhiVector::new(vec![0.5, 0.25]).unwrap();
        let omega = assemble_precision(&b, &phi).unwrap();
        assert_eq!(omega[(0, 0)], 2.0);
        assert_eq!(omega[(1, 1)], 4.0);
    }

    #[test]
    fn assemble_rejects_zero_phi() {
        let b = RegressionMatrix::identity(2);
        let phi = PhiVector::new(vec![0.5, 0.0]).unwrap();
        assert!(matches!(
            assemble_precision(&b, &phi),
            Err(Error::ZeroPhi(1))
        ));
    }

    #[test]
    fn partial_correlation_values() {
        let mut m = Mat::identity(3);
        m[(0, 1)] = 0.25;
        m[(1, 0)] = 0.25;
        m[(1, 2)] = 0.5;
        m[(2, 1)] = -0.5;
        let b = RegressionMatrix::new(m).unwrap();
        let pc = partial_correlations(&b);
        assert!((pc[(0, 1)] - 0.25).abs() < 1e-15);
        assert_eq!(pc[(1, 2)], 0.0, "negative product clamps to 0");
        assert_eq!(pc[(0, 0)], 1.0);
        assert_eq!(pc, pc.transpose());
    }

    #[test]
    fn rv_never_negative_and_chi_square_moments() {
        // known-mean RV on exact B: n·φ̂/φ* is χ²_n; check mean and variance
        let model = build_model(ModelId::new(ModelKind::M1, 3).unwrap()).unwrap();
        let sigma = model.sigma().unwrap();
        let n = 40usize;
        let reps = 2000usize;
        let mode = MeanMode::known_zero(3);
        let mut scaled = Vec::with_capacity(reps);
        for r in 0..reps {
            let x = sample_gaussian(&sigma, n, 9000 + r as u64).unwrap();
            let phi = estimate_rv(&x, &model.b_star, &mode).unwrap();
            assert!(phi.values().iter().all(|&v| v >= 0.0));
            scaled.push(phi.values()[0] * n as f64 / model.phi_star.values()[0]);
        }
        let mean = scaled.iter().sum::<f64>() / reps as f64;
        let var = scaled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
        let nf = n as f64;
        assert!(
            (mean - nf).abs() < 3.0 * (2.0 * nf / reps as f64).sqrt(),
            "mean {mean} vs {nf}"
        );
        assert!(
            (var - 2.0 * nf).abs() < 0.2 * 2.0 * nf,
            "var {var} vs {}",
            2.0 * nf
        );
    }
}
