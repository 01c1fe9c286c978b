//! The thresholded partial-correlation graph, its connected components,
//! minimum spanning / shortest path trees, and the path-product factors that
//! tie the variance parameters of a connected component together.

use crate::error::Error;
use crate::regression::RegressionMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

/// Weighted undirected graph on the p variables with
/// `W_ij = exp(−B̂_ij·B̂_ji)` whenever `B̂_ij·B̂_ji > t` (weight 0 encodes the
/// absence of an edge, so edge weights live in (0, 1)).
#[derive(Clone, Debug)]
pub struct PartialCorrGraph {
    pub p: usize,
    pub weights: crate::mat::Mat,
    /// Edges (i, j, W_ij) with i < j, in lexicographic order.
    pub edges: Vec<(usize, usize, f64)>,
    pub threshold: f64,
}

/// The threshold the experiments default to: t = min(0.01, n^{−1/2}).
pub fn default_threshold(n: usize) -> f64 {
    (0.01f64).min(1.0 / (n as f64).sqrt())
}

/// Builds the graph from the estimated regression matrix. Requires t ∈ (0, 1).
pub fn build_graph(bhat: &RegressionMatrix, t: f64) -> Result<PartialCorrGraph, Error> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be in (0,1), got {t}"
        )));
    }
    let p = bhat.p();
    let b = bhat.values();
    let mut weights = crate::mat::Mat::zeros(p, p);
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let prod = b[(i, j)] * b[(j, i)];
            if prod > t {
                let w = (-prod).exp();
                weights[(i, j)] = w;
                weights[(j, i)] = w;
                edges.push((i, j, w));
            }
        }
    }
    Ok(PartialCorrGraph {
        p,
        weights,
        edges,
        threshold: t,
    })
}

impl PartialCorrGraph {
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j, _)| i == v || j == v)
            .count()
    }

    pub fn neighbors(&self, v: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for &(i, j, w) in &self.edges {
            if i == v {
                out.push((j, w));
            } else if j == v {
                out.push((i, w));
            }
        }
        out
    }

    /// JSON edge list {i, j, weight}.
    pub fn to_json(&self) -> Result<String, Error> {
        #[derive(Serialize)]
        struct Edge {
            i: usize,
            j: usize,
            weight: f64,
        }
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|&(i, j, weight)| Edge { i, j, weight })
            .collect();
        Ok(serde_json::to_string_pretty(&edges)?)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Connected components as a partition of [p], each sorted ascending, and the
/// list ordered by smallest member.
pub fn connected_components(g: &PartialCorrGraph) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(g.p);
    for &(i, j, _) in &g.edges {
        uf.union(i, j);
    }
    let mut buckets: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in 0..g.p {
        let root = uf.find(v);
        buckets.entry(root).or_default().push(v);
    }
    let mut comps: Vec<Vec<usize>> = buckets.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// A spanning tree of one component, rooted at `root`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootedTree {
    pub root: usize,
    /// Component nodes, ascending.
    pub nodes: Vec<usize>,
    /// parent[v] for every non-root node v of the tree (indexed by node id).
    pub parent: Vec<Option<usize>>,
}

impl RootedTree {
    /// Children-first-free traversal order: parents always precede children.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order = vec![self.root];
        let mut frontier = vec![self.root];
        while let Some(u) = frontier.pop() {
            for &v in &self.nodes {
                if self.parent[v] == Some(u) {
                    order.push(v);
                    frontier.push(v);
                }
            }
        }
        order
    }
}

/// One spanning tree per connected component; the node sets partition [p].
#[derive(Clone, Debug)]
pub struct SpanningForest {
    pub trees: Vec<RootedTree>,
}

impl SpanningForest {
    /// JSON list of trees, each as {root, nodes, parent} with the parent
    /// array indexed by node id (null for roots and foreign nodes).
    pub fn to_json(&self) -> Result<String, Error> {
        Ok(serde_json::to_string_pretty(&self.trees)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeMode {
    /// Minimum spanning tree per component (Kruskal). The default: it gave
    /// the best empirical accuracy.
    Mst,
    /// Shortest path tree rooted at the largest-degree node of the component.
    Spt,
    /// Shortest path trees from every node of the component, keeping the one
    /// of minimal total weight.
    SptBestRoot,
}

impl TreeMode {
    pub fn parse(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "mst" => Ok(TreeMode::Mst),
            "spt" => Ok(TreeMode::Spt),
            "spt-best-root" | "best-root" => Ok(TreeMode::SptBestRoot),
            other => Err(Error::InvalidArgument(format!(
                "unknown tree mode '{other}'"
            ))),
        }
    }
}

/// Kruskal per component; equal weights break ties by lexicographic (i, j).
/// Each tree is rooted at the largest-degree node of its component (degree in
/// the thresholded graph), ties to the smallest index.
pub fn minimum_spanning_forest(g: &PartialCorrGraph) -> SpanningForest {
    let mut sorted = g.edges.clone();
    sorted.sort_by(|a, b| {
        a.2.partial_cmp(&b.2)
            .unwrap()
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut uf = UnionFind::new(g.p);
    let mut chosen: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.p]; // adjacency of the forest
    for &(i, j, w) in &sorted {
        if uf.union(i, j) {
            chosen[i].push((j, w));
            chosen[j].push((i, w));
        }
    }
    let comps = connected_components(g);
    let trees = comps
        .into_iter()
        .map(|nodes| {
            let root = pick_root(g, &nodes);
            root_tree(&nodes, root, &chosen, g.p)
        })
        .collect();
    SpanningForest { trees }
}

fn pick_root(g: &PartialCorrGraph, nodes: &[usize]) -> usize {
    let mut best = nodes[0];
    let mut best_deg = g.degree(best);
    for &v in &nodes[1..] {
        let d = g.degree(v);
        if d > best_deg {
            best = v;
            best_deg = d;
        }
    }
    best
}

fn root_tree(nodes: &[usize], root: usize, adj: &[Vec<(usize, f64)>], p: usize) -> RootedTree {
    let mut parent = vec![None; p];
    let mut seen = vec![false; p];
    seen[root] = true;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let mut next: Vec<usize> = adj[u].iter().map(|&(v, _)| v).collect();
        next.sort_unstable();
        for v in next {
            if nodes.contains(&v) && !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    RootedTree {
        root,
        nodes: nodes.to_vec(),
        parent,
    }
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
    pred: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // reversed for a min-heap; ties by smaller node then predecessor
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap()
            .then(other.node.cmp(&self.node))
            .then(other.pred.cmp(&self.pred))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra tree over the component containing `root`. All edge weights are
/// in (0, 1), so nonnegativity always holds. Distance ties keep the smaller
/// predecessor index.
pub fn shortest_path_tree(g: &PartialCorrGraph, root: usize) -> Result<RootedTree, Error> {
    if root >= g.p {
        return Err(Error::NodeOutOfRange(root, g.p));
    }
    let (tree, _) = shortest_path_tree_with_dist(g, root);
    Ok(tree)
}

fn shortest_path_tree_with_dist(g: &PartialCorrGraph, root: usize) -> (RootedTree, Vec<f64>) {
    let mut dist = vec![f64::INFINITY; g.p];
    let mut parent: Vec<Option<usize>> = vec![None; g.p];
    let mut done = vec![false; g.p];
    let mut heap = BinaryHeap::new();
    dist[root] = 0.0;
    heap.push(HeapItem {
        dist: 0.0,
        node: root,
        pred: root,
    });
    while let Some(HeapItem { dist: d, node, .. }) = heap.pop() {
        if done[node] || d > dist[node] {
            continue;
        }
        done[node] = true;
        for (v, w) in g.neighbors(node) {
            if done[v] {
                continue;
            }
            let cand = dist[node] + w;
            let better =
                cand < dist[v] || (cand == dist[v] && parent[v].map_or(true, |p| node < p));
            if better {
                dist[v] = cand;
                parent[v] = Some(node);
                heap.push(HeapItem {
                    dist: cand,
                    node: v,
                    pred: node,
                });
            }
        }
    }
    let mut nodes: Vec<usize> = (0..g.p).filter(|&v| dist[v].is_finite()).collect();
    nodes.sort_unstable();
    (
        RootedTree {
            root,
            nodes,
            parent,
        },
        dist,
    )
}

/// Builds one spanning tree per component according to `mode`.
pub fn spanning_forest(g: &PartialCorrGraph, mode: TreeMode) -> SpanningForest {
    match mode {
        TreeMode::Mst => minimum_spanning_forest(g),
        TreeMode::Spt => {
            let comps = connected_components(g);
            let trees = comps
                .into_iter()
                .map(|nodes| {
                    let root = pick_root(g, &nodes);
                    shortest_path_tree_with_dist(g, root).0
                })
                .collect();
            SpanningForest { trees }
        }
        TreeMode::SptBestRoot => {
            let comps = connected_components(g);
            let trees = comps
                .into_iter()
                .map(|nodes| {
                    let mut best: Option<(f64, RootedTree)> = None;
                    for &r in &nodes {
                        let (tree, _) = shortest_path_tree_with_dist(g, r);
                        let total = tree_weight(g, &tree);
                        let replace = match &best {
                            None => true,
                            Some((bw, _)) => total < *bw,
                        };
                        if replace {
                            best = Some((total, tree));
                        }
                    }
                    best.expect("component is non-empty").1
                })
                .collect();
            SpanningForest { trees }
        }
    }
}

/// Total weight of a rooted tree's edges in the source graph.
pub fn tree_weight(g: &PartialCorrGraph, tree: &RootedTree) -> f64 {
    let mut nodes: Vec<usize> = tree.nodes.clone();
    nodes.sort_unstable();
    nodes
        .iter()
        .filter_map(|&v| tree.parent[v].map(|u| g.weights[(u.min(v), u.max(v))]))
        .sum()
}

/// Per-component path-product factors: for each node i of the component with
/// reference node (tree root) r, `delta[i]` satisfies `φ_i = delta[i] · φ_r`
/// when B is the exact regression matrix of a symmetric precision matrix.
#[derive(Clone, Debug)]
pub struct DeltaFactors {
    pub reference: usize,
    /// Pairs (node, δ) over the component, ascending by node.
    pub factors: Vec<(usize, f64)>,
}

impl DeltaFactors {
    pub fn get(&self, node: usize) -> Option<f64> {
        self.factors
            .iter()
            .find(|&&(v, _)| v == node)
            .map(|&(_, d)| d)
    }
}

const RATIO_DENOM_TOL: f64 = 1e-12;

/// Accumulates the edge ratios `B_{parent,child}/B_{child,parent}` from the
/// root outward, so that for the exact B of a symmetric precision matrix
/// `φ_child = (accumulated factor) · φ_root` telescopes along tree paths.
pub fn delta_factors(tree: &RootedTree, bhat: &RegressionMatrix) -> Result<DeltaFactors, Error> {
    let b = bhat.values();
    for &v in &tree.nodes {
        if v >= bhat.p() {
            return Err(Error::NodeOutOfRange(v, bhat.p()));
        }
    }
    let mut delta = vec![0.0f64; bhat.p()];
    delta[tree.root] = 1.0;
    for v in tree.topological_order() {
        if let Some(u) = tree.parent[v] {
            let denom = b[(v, u)];
            if denom.abs() < RATIO_DENOM_TOL {
                return Err(Error::DivisionByNearZero {
                    child: v,
                    parent: u,
                });
            }
            delta[v] = delta[u] * b[(u, v)] / denom;
            if !delta[v].is_finite() {
                return Err(Error::DivisionByNearZero {
                    child: v,
                    parent: u,
                });
            }
        }
    }
    let factors = tree.nodes.iter().map(|&v| (v, delta[v])).collect();
    Ok(DeltaFactors {
        reference: tree.root,
        factors,
    })
}
