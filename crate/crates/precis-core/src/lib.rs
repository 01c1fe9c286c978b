//! Estimation of the diagonal of a sparse Gaussian precision matrix.
//!
//! The precision matrix `Ω` of a Gaussian vector factors as `Ω = B · D_φ⁻¹`,
//! where `B` has unit diagonal and column `j` of `B` holds the coefficients of
//! the regression of feature `j` on the others, and `φ_j = 1/ω_jj` is the
//! residual variance of that regression. This crate estimates `B` column-wise
//! with the square-root Lasso (optionally refit by OLS on the selected
//! support), then estimates `φ` with four estimators:
//!
//! * `rv`  — residual variance, `φ̂_j = B̂_{•,j}ᵀ Sₙ B̂_{•,j}`;
//! * `rml` — relaxed maximum likelihood, `φ̂_j = (SₙB̂)_jj ∨ 0`;
//! * `sml` — maximum likelihood under the symmetry constraints of `Ω`,
//!   propagated along spanning trees of the thresholded partial-correlation
//!   graph;
//! * `pml` — penalized maximum likelihood, a projected steepest descent on a
//!   convex objective that penalizes symmetry violations.
//!
//! The [`bench`] module runs Monte Carlo risk evaluations of the estimators on
//! six synthetic precision-matrix models, and [`models`] constructs those
//! models with unit-variance normalization.
//!
//! ```
//! use precis_core::*;
//!
//! let model = models::build_model(ModelId::new(ModelKind::M2, 10)?)?;
//! let x = sample_gaussian(&model.sigma()?, 500, 7)?;
//! let fit = sqrt_lasso_all(&x, &SqrlConfig::default())?;
//! let sml = estimate_sml(&x, &fit.b, &MeanMode::SampleMean, TreeMode::Mst, None)?;
//! let omega_hat = assemble_precision(&fit.b, &sml.phi)?;
//! assert_eq!(omega_hat.rows(), 10);
//! # Ok::<(), precis_core::Error>(())
//! ```

pub mod bench;
pub mod data;
pub mod error;
pub mod estimators;
pub mod gauss;
pub mod graph;
pub mod mat;
pub mod models;
pub mod regression;

pub use data::{sample_covariance, CovarianceMatrix, DataMatrix, MeanMode};
pub use error::Error;
pub use estimators::{
    assemble_precision, estimate_pml, estimate_rml, estimate_rv, estimate_sml,
    partial_correlations, PhiVector, PmlConfig, PmlObjective, PmlOutcome, SmlOutcome,
};
pub use gauss::sample_gaussian;
pub use graph::{
    build_graph, connected_components, default_threshold, delta_factors, minimum_spanning_forest,
    shortest_path_tree, DeltaFactors, PartialCorrGraph, RootedTree, SpanningForest, TreeMode,
};
pub use mat::Mat;
pub use models::{build_seed_matrix, normalize, ModelId, ModelKind, PrecisionModel};
pub use regression::{
    ols_refit, sqrt_lasso_all, sqrt_lasso_column, universal_lambda, ColumnFit, OlsFit, SqrlConfig,
    SqrlFit,
};
