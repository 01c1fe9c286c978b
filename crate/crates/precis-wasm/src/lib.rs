//! Browser demo bindings. Three operations, all returning JSON strings so
//! the page stays a plain static file:
//!
//! * [`model_overview`] — ground-truth Ω*, φ*, and dependency graph;
//! * [`estimate_demo`] — one synthetic dataset, all four diagonal
//!   estimators, the thresholded partial-correlation graph and its MST;
//! * [`mini_bench`] — a small Monte Carlo risk comparison.
//!
//! Errors come back as `{"error": "..."}` objects rather than exceptions.

use precis_core::bench::{run_config, BenchConfig, EstimatorKind, Scenario};
use precis_core::graph::tree_weight;
use precis_core::models::build_model;
use precis_core::regression::{ols_refit, sqrt_lasso_all, RegressionMatrix, SqrlConfig};
use precis_core::*;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct ErrorDoc {
    error: String,
}

fn err_json(e: impl std::fmt::Display) -> String {
    serde_json::to_string(&ErrorDoc {
        error: e.to_string(),
    })
    .unwrap_or_else(|_| r#"{"error":"serialization failure"}"#.to_string())
}

#[derive(Serialize)]
struct EdgeDoc {
    i: usize,
    j: usize,
    weight: f64,
}

#[derive(Serialize)]
struct ModelDoc {
    model: String,
    p: usize,
    omega: Vec<f64>,
    phi_star: Vec<f64>,
    edges: Vec<(usize, usize)>,
    partial_corr: Vec<f64>,
}

fn model_overview_impl(model: &str, p: usize) -> Result<String, Error> {
    let kind = ModelKind::parse(model)?;
    let m = build_model(ModelId::new(kind, p)?)?;
    let doc = ModelDoc {
        model: kind.name().to_string(),
        p,
        omega: m.omega.as_slice().to_vec(),
        phi_star: m.phi_star.values().to_vec(),
        edges: m.edges.clone(),
        partial_corr: partial_correlations(&m.b_star).as_slice().to_vec(),
    };
    Ok(serde_json::to_string(&doc)?)
}

/// Ground truth for one model: precision matrix, variances, graph.
#[wasm_bindgen]
pub fn model_overview(model: &str, p: usize) -> String {
    model_overview_impl(model, p).unwrap_or_else(err_json)
}

#[derive(Serialize)]
struct EstimateEntry {
    phi: Vec<f64>,
    l2_error: f64,
    note: Option<String>,
}

#[derive(Serialize)]
struct EstimateDoc {
    model: String,
    p: usize,
    n: usize,
    seed: u32,
    scenario: String,
    phi_star: Vec<f64>,
    estimates: Vec<(String, EstimateEntry)>,
    graph_edges: Vec<EdgeDoc>,
    mst_edges: Vec<(usize, usize)>,
    mst_total_weight: f64,
    partial_corr: Vec<f64>,
    true_edges: Vec<(usize, usize)>,
}

fn scenario_bhat(
    x: &DataMatrix,
    scenario: Scenario,
    b_star: &RegressionMatrix,
) -> Result<RegressionMatrix, Error> {
    Ok(match scenario {
        Scenario::OracleB => b_star.clone(),
        Scenario::SqrtLasso => sqrt_lasso_all(x, &SqrlConfig::default())?.b,
        Scenario::SqrtLassoOls => {
            let first = sqrt_lasso_all(x, &SqrlConfig::default())?.b;
            ols_refit(x, &first, 1e-10)?.b
        }
    })
}

fn estimate_demo_impl(
    model: &str,
    p: usize,
    n: usize,
    seed: u32,
    scenario: &str,
) -> Result<String, Error> {
    let kind = ModelKind::parse(model)?;
    let scenario = Scenario::parse(scenario)?;
    let m = build_model(ModelId::new(kind, p)?)?;
    let x = sample_gaussian(&m.sigma()?, n, seed as u64)?;
    let bhat = scenario_bhat(&x, scenario, &m.b_star)?;
    let mode = MeanMode::SampleMean;

    let mut estimates = Vec::new();
    let rv = estimate_rv(&x, &bhat, &mode)?;
    estimates.push((
        "rv".to_string(),
        EstimateEntry {
            l2_error: m.phi_star.l2_error(&rv),
            phi: rv.values().to_vec(),
            note: None,
        },
    ));
    let rml = estimate_rml(&x, &bhat, &mode)?;
    estimates.push((
        "rml".to_string(),
        EstimateEntry {
            l2_error: m.phi_star.l2_error(&rml),
            phi: rml.values().to_vec(),
            note: None,
        },
    ));
    let sml = estimate_sml(&x, &bhat, &mode, TreeMode::Mst, None)?;
    estimates.push((
        "sml".to_string(),
        EstimateEntry {
            l2_error: m.phi_star.l2_error(&sml.phi),
            phi: sml.phi.values().to_vec(),
            note: (!sml.fallback_components.is_empty())
                .then(|| format!("{} component(s) fell back", sml.fallback_components.len())),
        },
    ));
    let pml = estimate_pml(&x, &bhat, &mode, &PmlConfig::default())?;
    estimates.push((
        "pml".to_string(),
        EstimateEntry {
            l2_error: m.phi_star.l2_error(&pml.phi),
            phi: pml.phi.values().to_vec(),
            note: (!pml.converged).then(|| format!("stopped after {} iterations", pml.iterations)),
        },
    ));

    let g = build_graph(&bhat, default_threshold(n))?;
    let forest = minimum_spanning_forest(&g);
    let mut mst_edges = Vec::new();
    let mut mst_total = 0.0;
    for tree in &forest.trees {
        mst_total += tree_weight(&g, tree);
        for &v in &tree.nodes {
            if let Some(u) = tree.parent[v] {
                mst_edges.push((u.min(v), u.max(v)));
            }
        }
    }
    mst_edges.sort_unstable();

    let doc = EstimateDoc {
        model: kind.name().to_string(),
        p,
        n,
        seed,
        scenario: scenario.name().to_string(),
        phi_star: m.phi_star.values().to_vec(),
        estimates,
        graph_edges: g
            .edges
            .iter()
            .map(|&(i, j, weight)| EdgeDoc { i, j, weight })
            .collect(),
        mst_edges,
        mst_total_weight: mst_total,
        partial_corr: partial_correlations(&bhat).as_slice().to_vec(),
        true_edges: m.edges.clone(),
    };
    Ok(serde_json::to_string(&doc)?)
}

/// One synthetic dataset: fit the first stage per the scenario, run all four
/// estimators, and return the thresholded graph with its spanning forest.
#[wasm_bindgen]
pub fn estimate_demo(model: &str, p: usize, n: usize, seed: u32, scenario: &str) -> String {
    estimate_demo_impl(model, p, n, seed, scenario).unwrap_or_else(err_json)
}

#[derive(Serialize)]
struct BenchRow {
    estimator: String,
    mean_error: f64,
    sd_error: f64,
}

#[derive(Serialize)]
struct BenchDoc {
    model: String,
    p: usize,
    n: usize,
    scenario: String,
    replications: usize,
    rows: Vec<BenchRow>,
}

fn mini_bench_impl(
    model: &str,
    p: usize,
    n: usize,
    reps: usize,
    seed: u32,
    scenario: &str,
) -> Result<String, Error> {
    let kind = ModelKind::parse(model)?;
    let scenario = Scenario::parse(scenario)?;
    let mut cfg = BenchConfig::new(kind, p, n, scenario);
    cfg.replications = reps;
    cfg.base_seed = seed as u64;
    let res = run_config(&cfg)?;
    let rows = EstimatorKind::all()
        .into_iter()
        .filter_map(|kind| {
            res.stats_for(kind).map(|st| BenchRow {
                estimator: kind.name().to_string(),
                mean_error: st.mean_error,
                sd_error: st.sd_error,
            })
        })
        .collect();
    let doc = BenchDoc {
        model: kind.name().to_string(),
        p,
        n,
        scenario: scenario.name().to_string(),
        replications: reps,
        rows,
    };
    Ok(serde_json::to_string(&doc)?)
}

/// Small Monte Carlo risk comparison of the four estimators.
#[wasm_bindgen]
pub fn mini_bench(
    model: &str,
    p: usize,
    n: usize,
    reps: usize,
    seed: u32,
    scenario: &str,
) -> String {
    mini_bench_impl(model, p, n, reps, seed, scenario).unwrap_or_else(err_json)
}
