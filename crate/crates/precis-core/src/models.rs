//! The six synthetic precision-matrix models and their unit-variance
//! normalization Ω* = diag(A⁻¹)^{1/2} · A · diag(A⁻¹)^{1/2}, which makes the
//! implied covariance have unit diagonal.

use crate::error::Error;
use crate::estimators::PhiVector;
use crate::mat::{spd_inverse, Mat};
use crate::regression::RegressionMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
}

impl ModelKind {
    pub fn all() -> [ModelKind; 6] {
        [
            ModelKind::M1,
            ModelKind::M2,
            ModelKind::M3,
            ModelKind::M4,
            ModelKind::M5,
            ModelKind::M6,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::M1 => "m1",
            ModelKind::M2 => "m2",
            ModelKind::M3 => "m3",
            ModelKind::M4 => "m4",
            ModelKind::M5 => "m5",
            ModelKind::M6 => "m6",
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "1" => Ok(ModelKind::M1),
            "m2" | "2" => Ok(ModelKind::M2),
            "m3" | "3" => Ok(ModelKind::M3),
            "m4" | "4" => Ok(ModelKind::M4),
            "m5" | "5" => Ok(ModelKind::M5),
            "m6" | "6" => Ok(ModelKind::M6),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

/// A model choice together with its dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelId {
    pub kind: ModelKind,
    pub p: usize,
}

impl ModelId {
    /// Requires p ≥ 2; model 6 additionally requires p to be a multiple of 6.
    /// A non-multiple is rejected rather than silently padded.
    pub fn new(kind: ModelKind, p: usize) -> Result<Self, Error> {
        if p < 2 {
            return Err(Error::InvalidArgument(format!(
                "p must be at least 2, got {p}"
            )));
        }
        if kind == ModelKind::M6 && p % 6 != 0 {
            return Err(Error::InvalidArgument(format!(
                "model m6 needs p to be a multiple of 6, got {p}"
            )));
        }
        Ok(ModelId { kind, p })
    }
}

/// The seed matrix A of the requested model, exactly as defined:
///
/// * m1 — Toeplitz, A_ij = 0.6^|i−j|;
/// * m2 — pentadiagonal Ā (1, −1/3, −1/10), then A = Ā⁻¹ truncated to |i−j| ≤ 2;
/// * m3 — star: A_11 = p, A_ii = 2, A_1i = A_i1 = √2;
/// * m4 — k = ⌈√p⌉ block with Ā_11 = k, Ā_ii = 2k, borders √2, padded by I;
/// * m5 — k = ⌈√p⌉ block with Ā_11 = 50, Ā_ii = 5, borders 5/2, padded by I;
/// * m6 — block diagonal of p/6 copies of the 6×6 block of m5.
pub fn build_seed_matrix(id: ModelId) -> Result<Mat, Error> {
    let p = id.p;
    let mut a = Mat::zeros(p, p);
    match id.kind {
        ModelKind::M1 => {
            for i in 0..p {
                for j in 0..p {
                    a[(i, j)] = 0.6f64.powi((i as i64 - j as i64).unsigned_abs() as i32);
                }
            }
        }
        ModelKind::M2 => {
            let mut bar = Mat::zeros(p, p);
            for i in 0..p {
                for j in 0..p {
                    bar[(i, j)] = match (i as i64 - j as i64).unsigned_abs() {
                        0 => 1.0,
                        1 => -1.0 / 3.0,
                        2 => -1.0 / 10.0,
                        _ => 0.0,
                    };
                }
            }
            let inv = spd_inverse(&bar)?;
            for i in 0..p {
                for j in 0..p {
                    if (i as i64 - j as i64).unsigned_abs() <= 2 {
                        a[(i, j)] = inv[(i, j)];
                    }
                }
            }
        }
        ModelKind::M3 => {
            a[(0, 0)] = p as f64;
            for i in 1..p {
                a[(i, i)] = 2.0;
                a[(0, i)] = std::f64::consts::SQRT_2;
                a[(i, 0)] = std::f64::consts::SQRT_2;
            }
        }
        ModelKind::M4 => {
            let k = (p as f64).sqrt().ceil() as usize;
            a = Mat::identity(p);
            a[(0, 0)] = k as f64;
            for i in 1..k {
                a[(i, i)] = 2.0 * k as f64;
                a[(0, i)] = std::f64::consts::SQRT_2;
                a[(i, 0)] = std::f64::consts::SQRT_2;
            }
        }
        ModelKind::M5 => {
            let k = (p as f64).sqrt().ceil() as usize;
            a = Mat::identity(p);
            fill_m5_block(&mut a, 0, k);
        }
        ModelKind::M6 => {
            for start in (0..p).step_by(6) {
                fill_m5_block(&mut a, start, 6);
            }
        }
    }
    Ok(a)
}

// The m5 block: hub 50, satellites 5, borders 5/2.
fn fill_m5_block(a: &mut Mat, start: usize, k: usize) {
    a[(start, start)] = 50.0;
    for i in 1..k {
        a[(start + i, start + i)] = 5.0;
        a[(start, start + i)] = 2.5;
        a[(start + i, start)] = 2.5;
    }
}

/// Ground-truth precision model: Ω* with diag((Ω*)⁻¹) = 1, the derived
/// regression matrix B*, residual variances φ*, and the dependency graph.
#[derive(Clone, Debug)]
pub struct PrecisionModel {
    pub model_id: Option<ModelId>,
    pub omega: Mat,
    pub b_star: RegressionMatrix,
    pub phi_star: PhiVector,
    /// Edges (i, j) with i < j and ω*_ij ≠ 0.
    pub edges: Vec<(usize, usize)>,
}

const EDGE_ZERO_TOL: f64 = 1e-12;

/// Normalizes a symmetric positive definite seed matrix A into a
/// [`PrecisionModel`] via Ω* = diag(A⁻¹)^{1/2} A diag(A⁻¹)^{1/2}.
pub fn normalize(a: &Mat) -> Result<PrecisionModel, Error> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(
            "seed matrix must be square".into(),
        ));
    }
    let p = a.rows();
    let inv = spd_inverse(a)?;
    let scale: Vec<f64> = (0..p).map(|i| inv[(i, i)].sqrt()).collect();
    let mut omega = Mat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            omega[(i, j)] = scale[i] * a[(i, j)] * scale[j];
        }
    }
    omega.symmetrize();
    PrecisionModel::from_omega(omega, None)
}

/// Convenience: seed matrix plus normalization in one step.
pub fn build_model(id: ModelId) -> Result<PrecisionModel, Error> {
    let a = build_seed_matrix(id)?;
    let mut m = normalize(&a)?;
    m.model_id = Some(id);
    Ok(m)
}

impl PrecisionModel {
    /// Derives B*, φ* and the dependency graph from a precision matrix.
    /// Validates symmetry and positive definiteness.
    pub fn from_omega(omega: Mat, model_id: Option<ModelId>) -> Result<Self, Error> {
        if !omega.is_square() {
            return Err(Error::DimensionMismatch("omega must be square".into()));
        }
        if omega.symmetry_gap() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "omega asymmetry {:.3e} exceeds 1e-10",
                omega.symmetry_gap()
            )));
        }
        let p = omega.rows();
        // positive definiteness checked by the Cholesky inside spd_inverse
        spd_inverse(&omega)?;
        let mut b = Mat::zeros(p, p);
        let mut phi = vec![0.0; p];
        for j in 0..p {
            let d = omega[(j, j)];
            if d <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "omega[{j},{j}] = {d} is not positive"
                )));
            }
            phi[j] = 1.0 / d;
            for i in 0..p {
                b[(i, j)] = omega[(i, j)] / d;
            }
        }
        let edges = edges_of(&omega);
        Ok(PrecisionModel {
            model_id,
            omega,
            b_star: RegressionMatrix::new(b)?,
            phi_star: PhiVector::new(phi)?,
            edges,
        })
    }

    pub fn p(&self) -> usize {
        self.omega.rows()
    }

    /// The covariance Σ* = (Ω*)⁻¹ implied by the model.
    pub fn sigma(&self) -> Result<crate::data::CovarianceMatrix, Error> {
        let inv = spd_inverse(&self.omega)?;
        Ok(crate::data::CovarianceMatrix::new_unchecked(inv))
    }

    /// Adjacency list of the dependency graph (edge iff |ω*_ij| > 1e-12).
    pub fn true_graph(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.p()];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn to_json(&self) -> Result<String, Error> {
        let doc = ModelDoc {
            p: self.p(),
            model_id: self.model_id,
            omega: self.omega.as_slice().to_vec(),
            phi_star: self.phi_star.values().to_vec(),
            edges: self.edges.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Loads and re-validates a model exported by [`PrecisionModel::to_json`].
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        let omega = Mat::from_row_major(doc.p, doc.p, doc.omega)?;
        let model = PrecisionModel::from_omega(omega, doc.model_id)?;
        // cross-check the derived fields against the stored ones
        for (a, b) in model.phi_star.values().iter().zip(doc.phi_star.iter()) {
            if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(Error::Parse("stored phi_star disagrees with omega".into()));
            }
        }
        if model.edges != doc.edges {
            return Err(Error::Parse("stored edges disagree with omega".into()));
        }
        Ok(model)
    }
}

fn edges_of(omega: &Mat) -> Vec<(usize, usize)> {
    let p = omega.rows();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if omega[(i, j)].abs() > EDGE_ZERO_TOL {
                edges.push((i, j));
            }
        }
    }
    edges
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    p: usize,
    model_id: Option<ModelId>,
    omega: Vec<f64>,
    phi_star: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::sym_eigenvalues;

    fn model(kind: ModelKind, p: usize) -> PrecisionModel {
        build_model(ModelId::new(kind, p).unwrap()).unwrap()
    }

    #[test]
    fn m1_p2_seed_matrix() {
        let a = build_seed_matrix(ModelId::new(ModelKind::M1, 2).unwrap()).unwrap();
        let expect = Mat::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        assert!(a.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn m3_p3_seed_matrix() {
        let a = build_seed_matrix(ModelId::new(ModelKind::M3, 3).unwrap()).unwrap();
        assert_eq!(a[(0, 0)], 3.0);
        assert_eq!(a[(1, 1)], 2.0);
        assert_eq!(a[(2, 2)], 2.0);
        assert!((a[(0, 1)] - 2f64.sqrt()).abs() < 1e-15);
        assert!((a[(0, 2)] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(a[(1, 2)], 0.0);
    }

    #[test]
    fn m2_bandwidth_and_inverse_oracle() {
        let p = 5;
        let a = build_seed_matrix(ModelId::new(ModelKind::M2, p).unwrap()).unwrap();
        // direct dense inverse by Gauss-Jordan, independent of the Cholesky path
        let mut bar = Mat::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                bar[(i, j)] = match (i as i64 - j as i64).unsigned_abs() {
                    0 => 1.0,
                    1 => -1.0 / 3.0,
                    2 => -1.0 / 10.0,
                    _ => 0.0,
                };
            }
        }
        let inv = gauss_jordan_inverse(&bar);
        for i in 0..p {
            for j in 0..p {
                if (i as i64 - j as i64).unsigned_abs() > 2 {
                    assert_eq!(a[(i, j)], 0.0, "entry ({i},{j}) outside band");
                } else {
                    assert!((a[(i, j)] - inv[(i, j)]).abs() < 1e-10);
                }
            }
        }
    }

    fn gauss_jordan_inverse(m: &Mat) -> Mat {
        let n = m.rows();
        let mut aug = Mat::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = m[(i, j)];
            }
            aug[(i, n + i)] = 1.0;
        }
        for col in 0..n {
            let mut pivot = col;
            for r in (col + 1)..n {
                if aug[(r, col)].abs() > aug[(pivot, col)].abs() {
                    pivot = r;
                }
            }
            if pivot != col {
                for j in 0..2 * n {
                    let tmp = aug[(col, j)];
                    aug[(col, j)] = aug[(pivot, j)];
                    aug[(pivot, j)] = tmp;
                }
            }
            let d = aug[(col, col)];
            for j in 0..2 * n {
                aug[(col, j)] /= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = aug[(r, col)];
                if f != 0.0 {
                    for j in 0..2 * n {
                        aug[(r, j)] -= f * aug[(col, j)];
                    }
                }
            }
        }
        let mut inv = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = aug[(i, n + j)];
            }
        }
        inv
    }

    #[test]
    fn normalize_identity_is_fixed_point() {
        let m = normalize(&Mat::identity(4)).unwrap();
        assert!(m.omega.max_abs_diff(&Mat::identity(4)) < 1e-12);
        assert!(m.phi_star.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(m.b_star.values().max_abs_diff(&Mat::identity(4)) < 1e-12);
    }

    #[test]
    fn normalize_m1_p2_hand_computation() {
        // A = [[1, .6], [.6, 1]]: diag(A⁻¹) = 1.5625, so both scalings are 1.25
        // and Ω* = 1.5625 · A, giving φ* = 0.64 and B*_12 = 0.6.
        let m = model(ModelKind::M1, 2);
        assert!((m.omega[(0, 0)] - 1.5625).abs() < 1e-12);
        assert!((m.omega[(0, 1)] - 0.9375).abs() < 1e-12);
        assert!((m.phi_star.values()[0] - 0.64).abs() < 1e-12);
        assert!((m.phi_star.values()[1] - 0.64).abs() < 1e-12);
        assert!((m.b_star.values()[(0, 1)] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn normalized_covariance_has_unit_diagonal() {
        for kind in ModelKind::all() {
            let p = if kind == ModelKind::M6 { 12 } else { 10 };
            let m = model(kind, p);
            let sigma = m.sigma().unwrap();
            for j in 0..p {
                assert!(
                    (sigma.values()[(j, j)] - 1.0).abs() < 1e-9,
                    "{kind:?}: sigma[{j},{j}] = {}",
                    sigma.values()[(j, j)]
                );
            }
        }
    }

    #[test]
    fn omega_equals_b_times_dphi_inverse() {
        for kind in ModelKind::all() {
            let p = if kind == ModelKind::M6 { 12 } else { 9 };
            let m = model(kind, p);
            let mut rebuilt = Mat::zeros(p, p);
            for i in 0..p {
                for j in 0..p {
                    rebuilt[(i, j)] = m.b_star.values()[(i, j)] / m.phi_star.values()[j];
                }
            }
            assert!(m.omega.max_abs_diff(&rebuilt) < 1e-10);
        }
    }

    #[test]
    fn phi_star_in_unit_interval() {
        for kind in ModelKind::all() {
            let m = model(kind, 30);
            for &v in m.phi_star.values() {
                assert!(v > 0.0 && v <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn m3_true_graph_is_star() {
        let m = model(ModelKind::M3, 6);
        let adj = m.true_graph();
        assert_eq!(adj[0].len(), 5);
        for i in 1..6 {
            assert_eq!(adj[i], vec![0]);
        }
    }

    #[test]
    fn m1_p4_graph_complete() {
        let m = model(ModelKind::M1, 4);
        assert_eq!(m.edges.len(), 6);
    }

    #[test]
    fn m6_p12_two_components() {
        let m = model(ModelKind::M6, 12);
        // the edges split into two stars over {0..5} and {6..11}
        assert_eq!(m.edges.len(), 10);
        for &(i, j) in &m.edges {
            assert_eq!(i / 6, j / 6);
        }
    }

    #[test]
    fn m6_rejects_non_multiple_of_six() {
        assert!(ModelId::new(ModelKind::M6, 10).is_err());
    }

    #[test]
    fn m2_seed_is_psd_over_range() {
        for p in (5..=90).step_by(17) {
            let a = build_seed_matrix(ModelId::new(ModelKind::M2, p).unwrap()).unwrap();
            let min_eig = sym_eigenvalues(&a)[0];
            assert!(min_eig > -1e-9, "p={p}: min eigenvalue {min_eig:.3e}");
        }
    }

    #[test]
    fn m4_m5_nodes_outside_block_are_isolated() {
        for kind in [ModelKind::M4, ModelKind::M5] {
            let p = 10;
            let k = 4; // ceil(sqrt(10))
            let m = model(kind, p);
            for &(i, j) in &m.edges {
                assert!(i < k && j < k, "{kind:?}: unexpected edge ({i},{j})");
            }
        }
    }

    #[test]
    fn json_roundtrip_revalidates() {
        let m = model(ModelKind::M2, 8);
        let text = m.to_json().unwrap();
        let back = PrecisionModel::from_json(&text).unwrap();
        assert!(m.omega.max_abs_diff(&back.omega) < 1e-12);
        assert_eq!(m.edges, back.edges);
        assert_eq!(back.model_id, Some(ModelId::new(ModelKind::M2, 8).unwrap()));
    }

    #[test]
    fn path_products_telescope_on_small_models() {
        // Π B*_{v_{h+1},v_h} / B*_{v_h,v_{h+1}} along any simple path from j to i
        // must equal φ*_j / φ*_i.
        for kind in ModelKind::all() {
            let p = 6;
            let m = model(kind, p);
            let adj = m.true_graph();
            let b = m.b_star.values();
            let phi = m.phi_star.values();
            for start in 0..p {
                // DFS over simple paths from start
                let mut stack = vec![(start, vec![start], 1.0f64)];
                while let Some((node, path, prod)) = stack.pop() {
                    if path.len() > 1 {
                        let target = node;
                        let expect = phi[start] / phi[target];
                        assert!(
                            (prod - expect).abs() < 1e-9 * expect.abs().max(1.0),
                            "{kind:?}: path {path:?} product {prod} vs {expect}"
                        );
                    }
                    for &next in &adj[node] {
                        if path.contains(&next) {
                            continue;
                        }
                        // step from v_h = node to v_{h+1} = next
                        let factor = b[(next, node)] / b[(node, next)];
                        let mut path2 = path.clone();
                        path2.push(next);
                        stack.push((next, path2, prod * factor));
                    }
                }
            }
        }
    }
}
