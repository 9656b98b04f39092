//! Independent outcome checkers. Everything here is built on its own
//! flood-fill/BFS primitives and deliberately shares no code with the
//! algorithms it validates.

use crate::graph::{Vertex, WeightedGraph};

#[derive(Debug, Clone, PartialEq)]
pub enum SeparatorCheck {
    Ok,
    Violation { component_root: Vertex, weight: f64 },
}

/// A certified tree: root plus parent pointers for every non-root vertex.
#[derive(Debug, Clone)]
pub struct CertTree {
    pub root: Vertex,
    /// (vertex, parent) pairs; the parent edge must be a graph edge.
    pub parents: Vec<(Vertex, Vertex)>,
}

impl CertTree {
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut v: Vec<Vertex> = self.parents.iter().map(|&(c, _)| c).collect();
        v.push(self.root);
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateCheck {
    Ok,
    WrongTreeCount { got: usize, want: usize },
    NotDisjoint { vertex: Vertex },
    NotATree { tree: usize },
    NotSubgraph { tree: usize, u: Vertex, v: Vertex },
    RadiusExceeded { tree: usize, radius: usize, bound: usize },
    MissingCrossEdge { a: usize, b: usize },
}

/// Flood-fill check that removing `separator` leaves every component with
/// weight <= c * w(V).
pub fn verify_separator(g: &WeightedGraph, separator: &[Vertex], c: f64) -> SeparatorCheck {
    let n = g.n();
    let mut removed = vec![false; n];
    for &v in separator {
        removed[v] = true;
    }
    let total: f64 = (0..n).map(|v| g.weight(v)).sum();
    let bound = c * total;
    let mut seen = vec![false; n];
    for s in 0..n {
        if removed[s] || seen[s] {
            continue;
        }
        let mut w = 0.0;
        let mut members = Vec::new();
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            members.push(v);
            for u in g.neighbors(v) {
                if !removed[u] && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        members.sort_unstable();
        for &v in &members {
            w += g.weight(v);
        }
        if w > bound {
            return SeparatorCheck::Violation {
                component_root: s,
                weight: w,
            };
        }
    }
    SeparatorCheck::Ok
}

/// Check an h-clique minor certificate: exactly h trees, pairwise
/// vertex-disjoint, each a connected acyclic subgraph of g with BFS radius
/// from its root at most `radius_bound`, every pair joined by a graph edge.
pub fn verify_minor_certificate(
    g: &WeightedGraph,
    trees: &[CertTree],
    h: usize,
    radius_bound: usize,
) -> CertificateCheck {
    if trees.len() != h {
        return CertificateCheck::WrongTreeCount {
            got: trees.len(),
            want: h,
        };
    }
    let mut owner = vec![usize::MAX; g.n()];
    for (ti, t) in trees.iter().enumerate() {
        for v in t.vertices() {
            if owner[v] != usize::MAX {
                return CertificateCheck::NotDisjoint { vertex: v };
            }
            owner[v] = ti;
        }
    }
    for (ti, t) in trees.iter().enumerate() {
        let verts = t.vertices();
        // structure: |parents| = |V| - 1 and every vertex except the root
        // appears exactly once as a child, with its parent inside the tree
        if t.parents.len() + 1 != verts.len() {
            return CertificateCheck::NotATree { tree: ti };
        }
        let mut child_seen = std::collections::HashSet::new();
        for &(c, p) in &t.parents {
            if c == t.root || !child_seen.insert(c) {
                return CertificateCheck::NotATree { tree: ti };
            }
            if owner[p] != ti {
                return CertificateCheck::NotATree { tree: ti };
            }
            if !g.has_edge(c, p) {
                return CertificateCheck::NotSubgraph { tree: ti, u: c, v: p };
            }
        }
        // connectivity: walk parent pointers from every vertex to the root
        for &(mut c, _) in &t.parents {
            let mut steps = 0;
            while c != t.root {
                let Some(&(_, p)) = t.parents.iter().find(|&&(x, _)| x == c) else {
                    return CertificateCheck::NotATree { tree: ti };
                };
                c = p;
                steps += 1;
                if steps > t.parents.len() {
                    return CertificateCheck::NotATree { tree: ti };
                }
            }
        }
        // radius via independent BFS inside the tree's vertex set, using
        // tree edges only
        let mut adj: std::collections::HashMap<Vertex, Vec<Vertex>> = Default::default();
        for &(c, p) in &t.parents {
            adj.entry(c).or_default().push(p);
            adj.entry(p).or_default().push(c);
        }
        let mut dist = std::collections::HashMap::new();
        dist.insert(t.root, 0usize);
        let mut q = std::collections::VecDeque::from([t.root]);
        let mut radius = 0usize;
        while let Some(v) = q.pop_front() {
            let dv = dist[&v];
            radius = radius.max(dv);
            for &u in adj.get(&v).map(|x| x.as_slice()).unwrap_or(&[]) {
                if !dist.contains_key(&u) {
                    dist.insert(u, dv + 1);
                    q.push_back(u);
                }
            }
        }
        if dist.len() != verts.len() {
            return CertificateCheck::NotATree { tree: ti };
        }
        if radius > radius_bound {
            return CertificateCheck::RadiusExceeded {
                tree: ti,
                radius,
                bound: radius_bound,
            };
        }
    }
    // pairwise adjacency in g
    for a in 0..trees.len() {
        for b in a + 1..trees.len() {
            let found = trees[a].vertices().iter().any(|&u| {
                g.neighbors(u).any(|x| owner[x] == b)
            });
            if !found {
                return CertificateCheck::MissingCrossEdge { a, b };
            }
        }
    }
    CertificateCheck::Ok
}

/// Reference exact distances in `g` minus `forbidden`, recomputed per query
/// by plain BFS. Used as the oracle side of differential tests.
pub struct ExactDistanceOracle<'a> {
    g: &'a WeightedGraph,
    forbidden: Vec<bool>,
}

impl<'a> ExactDistanceOracle<'a> {
    pub fn new(g: &'a WeightedGraph, forbidden: &[Vertex]) -> Self {
        let mut f = vec![false; g.n()];
        for &v in forbidden {
            f[v] = true;
        }
        ExactDistanceOracle { g, forbidden: f }
    }

    /// BFS distance, `None` for unreachable (or forbidden endpoints).
    pub fn query(&self, u: Vertex, v: Vertex) -> Option<usize> {
        if self.forbidden[u] || self.forbidden[v] {
            return None;
        }
        if u == v {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.g.n()];
        dist[u] = 0;
        let mut q = std::collections::VecDeque::from([u]);
        while let Some(x) = q.pop_front() {
            for y in self.g.neighbors(x) {
                if !self.forbidden[y] && dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    if y == v {
                        return Some(dist[y]);
                    }
                    q.push_back(y);
                }
            }
        }
        None
    }

    /// All distances from `u` at once.
    pub fn distances_from(&self, u: Vertex) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.g.n()];
        if self.forbidden[u] {
            return dist;
        }
        dist[u] = Some(0);
        let mut q = std::collections::VecDeque::from([u]);
        while let Some(x) = q.pop_front() {
            for y in self.g.neighbors(x) {
                if !self.forbidden[y] && dist[y].is_none() {
                    dist[y] = Some(dist[x].unwrap() + 1);
                    q.push_back(y);
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusteringCheck {
    Ok,
    EdgeNotCovered { edge: usize },
    EdgeCoveredTwice { edge: usize },
    ClusterDisconnected { cluster: usize },
    ClusterTooLarge { cluster: usize, size: usize },
    BoundaryBudget { cluster: usize, boundary: usize, bound: usize },
    TotalBoundaryBudget { total: usize, bound: usize },
}

/// Edge-partition / connectivity / size / boundary-budget check for a flat
/// clustering described as (vertex list, edge-id list) pairs.
pub fn verify_clustering(
    g: &WeightedGraph,
    clusters: &[(Vec<Vertex>, Vec<usize>)],
    r: usize,
    per_cluster_boundary_bound: usize,
    total_boundary_bound: usize,
) -> ClusteringCheck {
    let mut covered = vec![0usize; g.m()];
    for (_, es) in clusters {
        for &e in es {
            covered[e] += 1;
        }
    }
    for (e, &c) in covered.iter().enumerate() {
        if c == 0 {
            return ClusteringCheck::EdgeNotCovered { edge: e };
        }
        if c > 1 {
            return ClusteringCheck::EdgeCoveredTwice { edge: e };
        }
    }
    let mut membership = vec![0usize; g.n()];
    for (vs, _) in clusters {
        for &v in vs {
            membership[v] += 1;
        }
    }
    let mut total_boundary = 0usize;
    for (ci, (vs, es)) in clusters.iter().enumerate() {
        if vs.len() > r {
            return ClusteringCheck::ClusterTooLarge {
                cluster: ci,
                size: vs.len(),
            };
        }
        // connectivity over the cluster's own edges
        if !vs.is_empty() {
            let index: std::collections::HashMap<Vertex, usize> =
                vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let mut adj = vec![Vec::new(); vs.len()];
            for &e in es {
                let (u, v) = g.edges()[e];
                let (iu, iv) = (index[&u], index[&v]);
                adj[iu].push(iv);
                adj[iv].push(iu);
            }
            let mut seen = vec![false; vs.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        count += 1;
                        stack.push(y);
                    }
                }
            }
            if count != vs.len() {
                return ClusteringCheck::ClusterDisconnected { cluster: ci };
            }
        }
        let boundary = vs.iter().filter(|&&v| membership[v] > 1).count();
        total_boundary += boundary;
        if boundary > per_cluster_boundary_bound {
            return ClusteringCheck::BoundaryBudget {
                cluster: ci,
                boundary,
                bound: per_cluster_boundary_bound,
            };
        }
    }
    if total_boundary > total_boundary_bound {
        return ClusteringCheck::TotalBoundaryBudget {
            total: total_boundary,
            bound: total_boundary_bound,
        };
    }
    ClusteringCheck::Ok
}
