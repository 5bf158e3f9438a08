//! The BMS graph: vertices are point indices, `i ~ j` iff `i != j` and
//! `G((u_i - u_j)/h) != 0`. For a truncated kernel this is a unit-ball graph
//! of radius `beta * h` (closed for non-smoothly truncated kernels under the
//! left-derivative weight, open for smoothly truncated ones).

use serde::Serialize;

use crate::configuration::Configuration;
use crate::error::{check_bandwidth, Result};
use crate::kernels::KernelSpec;

/// Union-find with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
        true
    }

    /// Groups ordered by their smallest member, members ascending.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut slot = vec![usize::MAX; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(i);
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmsGraph {
    adjacency: Vec<Vec<usize>>,
    components: Vec<Vec<usize>>,
    labels: Vec<usize>,
}

impl BmsGraph {
    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn is_joined(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Vertex sets of the components, ordered by smallest vertex.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Component index of each vertex.
    pub fn component_of(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            n: self.n(),
            edges: self.edges().map(|(i, j)| [i, j]).collect(),
            components: self.labels.clone(),
        }
    }
}

/// JSON-friendly adjacency dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphExport {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub components: Vec<usize>,
}

pub fn build_graph(cfg: &Configuration, kernel: &KernelSpec, h: f64) -> Result<BmsGraph> {
    check_bandwidth(h)?;
    let n = cfg.n();
    let mut adjacency = vec![Vec::new(); n];
    let mut dsu = DisjointSet::new(n);
    // an untruncated weight is positive everywhere even where it underflows
    let always = !kernel.is_truncated();
    for i in 0..n {
        for j in i + 1..n {
            if always || kernel.g_of_sq(cfg.dist_sq(i, j), h) != 0.0 {
                adjacency[i].push(j);
                adjacency[j].push(i);
                dsu.union(i, j);
            }
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
    }
    let components = dsu.groups();
    let mut labels = vec![0; n];
    for (m, comp) in components.iter().enumerate() {
        for &i in comp {
            labels[i] = m;
        }
    }
    Ok(BmsGraph {
        adjacency,
        components,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphClassification {
    /// Every component is complete.
    pub closed: bool,
    /// Every joined pair coincides.
    pub singular: bool,
    pub stable: bool,
    /// `min_{i<j} | |u_i - u_j| - beta h |`; infinite for non-truncated kernels.
    pub margin: f64,
}

/// Default margin below which a pair is treated as sitting on the truncation sphere.
pub fn default_stability_tol(kernel: &KernelSpec, h: f64) -> f64 {
    if kernel.is_truncated() {
        1e-9 * kernel.beta() * h
    } else {
        0.0
    }
}

/// Closed/singular from the graph; stable when no pair lies within
/// `stability_tol` of the truncation radius (a small move of such a pair could
/// add or remove an edge).
pub fn classify(
    graph: &BmsGraph,
    cfg: &Configuration,
    kernel: &KernelSpec,
    h: f64,
    stability_tol: f64,
) -> GraphClassification {
    let closed = graph
        .components()
        .iter()
        .all(|c| c.iter().all(|&i| graph.neighbors(i).len() == c.len() - 1));
    let singular = graph.edges().all(|(i, j)| cfg.point(i) == cfg.point(j));
    let margin = if kernel.is_truncated() {
        let radius = kernel.beta() * h;
        let n = cfg.n();
        let mut m = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                m = m.min((cfg.dist_sq(i, j).sqrt() - radius).abs());
            }
        }
        m
    } else {
        f64::INFINITY
    };
    GraphClassification {
        closed,
        singular,
        stable: margin > stability_tol,
        margin,
    }
}

/// `floor(min{n, (1 + 2 gamma / (beta h))^d})`; `n` for non-truncated kernels.
pub fn component_count_bound(n: usize, gamma: f64, beta: f64, h: f64, d: usize) -> usize {
    if !beta.is_finite() {
        return n;
    }
    let base = 1.0 + 2.0 * gamma / (beta * h);
    let bound = base.powi(d.min(i32::MAX as usize) as i32);
    if bound >= n as f64 {
        n
    } else {
        bound.floor() as usize
    }
}

/// `|sum_j (u_i - u_j) G((u_i - u_j)/h)| <= tol` for every `i`.
pub fn is_fixed_point(cfg: &Configuration, kernel: &KernelSpec, h: f64, tol: f64) -> Result<bool> {
    check_bandwidth(h)?;
    let (n, d) = (cfg.n(), cfg.d());
    let mut acc = vec![0.0; d];
    for i in 0..n {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for j in 0..n {
            if j == i {
                continue;
            }
            let g = kernel.g_of_sq(cfg.dist_sq(i, j), h);
            if g == 0.0 {
                continue;
            }
            for ((a, x), y) in acc.iter_mut().zip(cfg.point(i)).zip(cfg.point(j)) {
                *a += (x - y) * g;
            }
        }
        if acc.iter().map(|a| a * a).sum::<f64>().sqrt() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelId;

    fn kern(id: KernelId) -> KernelSpec {
        KernelSpec::builtin(id).unwrap()
    }

    fn pts(rows: &[[f64; 2]]) -> Configuration {
        Configuration::from_rows(rows).unwrap()
    }

    #[test]
    fn isolated_vertex_and_joined_pair() {
        // beta h = sqrt(2): points 2 and 3 within reach, point 1 far away
        let c = pts(&[[-5.0, 0.0], [0.0, 0.0], [1.0, 0.5]]);
        let g = build_graph(&c, &kern(KernelId::Epanechnikov), 1.0).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(1, 2)]);
        assert_eq!(g.n_components(), 2);
        assert_eq!(g.components(), &[vec![0], vec![1, 2]]);
        let class = classify(&g, &c, &kern(KernelId::Epanechnikov), 1.0, 1e-9);
        assert!(class.closed && !class.singular && class.stable);
    }

    #[test]
    fn complete_graphs() {
        let c = pts(&[[0.0, 0.0], [0.3, 0.1], [0.2, -0.4]]);
        let g = build_graph(&c, &kern(KernelId::Epanechnikov), 1.0).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.n_components(), 1);
        let far = pts(&[[0.0, 0.0], [30.0, 0.0], [0.0, 50.0]]);
        let g = build_graph(&far, &kern(KernelId::Gaussian), 1.0).unwrap();
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn distant_points_are_singular_and_stable() {
        let c = pts(&[[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]]);
        let k = kern(KernelId::Epanechnikov);
        let g = build_graph(&c, &k, 1.0).unwrap();
        let class = classify(&g, &c, &k, 1.0, default_stability_tol(&k, 1.0));
        assert!(class.singular && class.closed && class.stable);
    }

    #[test]
    fn touching_balls_are_singular_but_unstable() {
        // |(1,1)| = sqrt(2) = beta h exactly for h = 1, and g(1) = 0 for biweight
        let c = pts(&[[0.0, 0.0], [1.0, 1.0], [10.0, 10.0]]);
        let k = kern(KernelId::Biweight);
        let g = build_graph(&c, &k, 1.0).unwrap();
        let class = classify(&g, &c, &k, 1.0, default_stability_tol(&k, 1.0));
        assert!(class.singular && !class.stable);
        assert_eq!(class.margin, 0.0);

        // the left-derivative Epanechnikov weight joins the same pair
        let k = kern(KernelId::Epanechnikov);
        let g = build_graph(&c, &k, 1.0).unwrap();
        let class = classify(&g, &c, &k, 1.0, default_stability_tol(&k, 1.0));
        assert!(g.is_joined(0, 1));
        assert!(!class.singular && !class.stable);
    }

    #[test]
    fn coincident_pair_stays_singular() {
        let c = pts(&[[1.0, 2.0], [1.0, 2.0], [9.0, 9.0]]);
        let k = kern(KernelId::Cosine);
        let g = build_graph(&c, &k, 1.0).unwrap();
        assert!(g.is_joined(0, 1));
        let class = classify(&g, &c, &k, 1.0, 1e-9);
        assert!(class.singular && class.closed);
        assert!(is_fixed_point(&c, &k, 1.0, 0.0).unwrap());
    }

    #[test]
    fn open_graph_detected() {
        // a path 0 - 1 - 2 with 0 and 2 out of reach
        let c = pts(&[[0.0, 0.0], [1.2, 0.0], [2.4, 0.0]]);
        let k = kern(KernelId::Epanechnikov);
        let g = build_graph(&c, &k, 1.0).unwrap();
        assert_eq!(g.n_components(), 1);
        assert!(!classify(&g, &c, &k, 1.0, 1e-9).closed);
    }

    #[test]
    fn component_bound_examples() {
        assert_eq!(component_count_bound(7, 0.0, 2f64.sqrt(), 1.0, 3), 1);
        let beta = 2f64.sqrt();
        assert_eq!(component_count_bound(10, beta * 0.5, beta, 0.5, 2), 9);
        assert_eq!(component_count_bound(3, 1e9, beta, 1.0, 2), 3);
        assert_eq!(component_count_bound(5, 1.0, f64::INFINITY, 1.0, 2), 5);
    }

    #[test]
    fn triangle_inside_one_ball_is_not_fixed() {
        let s = 3f64.sqrt() / 2.0;
        let c = pts(&[[0.0, 0.0], [0.5, 0.0], [0.25, 0.5 * s]]);
        for id in [KernelId::Epanechnikov, KernelId::Biweight, KernelId::Gaussian] {
            assert!(!is_fixed_point(&c, &kern(id), 1.0, 1e-12).unwrap(), "{id}");
        }
    }

    #[test]
    fn graph_export_lists_edges() {
        let c = pts(&[[0.0, 0.0], [0.5, 0.0], [9.0, 0.0]]);
        let g = build_graph(&c, &kern(KernelId::Epanechnikov), 1.0).unwrap();
        let json = serde_json::to_value(g.export()).unwrap();
        assert_eq!(json["edges"], serde_json::json!([[0, 1]]));
        assert_eq!(json["components"], serde_json::json!([0, 0, 1]));
    }
}
